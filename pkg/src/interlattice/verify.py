"""Randomized self-check of the lattice identities and metric properties.

Each check draws random inputs for every ``n`` up to ``n_max`` and records
the worst error it sees against a tolerance. The Möbius transform under test
is injectable so a deliberately broken one can prove the checks bite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from interlattice.lattice import (
    RTOL,
    InteractionVector,
    check_variable_count,
    inclusion_exclusion,
    mobius_array,
    relative_error,
    zeta_array,
)
from interlattice.metrics import decompose, jaccard, learnability_ratio, split_nonneg

VERIFY_MAX_VARIABLES = 12
JACCARD_TOL = 1e-12
# preserve + discard reproduces |I| to within one unit in the last place; see ulp_deviation
CONSERVATION_ULPS = 1.0

Transform = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def row(self) -> dict:
        return {
            "check": self.name,
            "cases": self.cases,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def corrupted_mobius(values: np.ndarray) -> np.ndarray:
    """A Möbius transform with one dividend knocked off; the negative control."""
    out = mobius_array(values)
    out[..., -1] += 1e-3 * (1.0 + np.max(np.abs(out), axis=-1))
    return out


def ulp_deviation(total: np.ndarray, part: np.ndarray, rest: np.ndarray) -> float:
    """Largest ``|(part + rest) - total|`` measured in ulps of ``total``."""
    total = np.asarray(total)
    dev = np.abs((part + rest) - total)
    ulp = np.spacing(np.maximum(total, np.finfo(np.float64).tiny))
    return float(np.max(dev / ulp)) if dev.size else 0.0


def random_pair(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two dividend vectors with planted zeros, sign conflicts and ties."""
    d = 1 << n
    a = rng.normal(size=d) * np.exp(rng.uniform(-3, 3, size=d))
    b = rng.normal(size=d) * np.exp(rng.uniform(-3, 3, size=d))
    kind = rng.integers(6, size=d)
    a[kind == 0] = 0.0
    b[kind == 1] = 0.0
    b[kind == 2] = -a[kind == 2]
    b[kind == 3] = a[kind == 3]
    return a, b


def run_checks(n_max: int = 8, trials: int = 10, seed: int = 0,
               transform: Optional[Transform] = None) -> list[CheckResult]:
    """Run every check for ``n`` in ``1..n_max`` with ``trials`` draws each."""
    check_variable_count(n_max, VERIFY_MAX_VARIABLES)
    if trials < 1:
        raise ValueError("trials must be positive")
    transform = mobius_array if transform is None else transform
    rng = np.random.default_rng(seed)
    worst = {"round_trip": 0.0, "brute_equivalence": 0.0, "conservation_pretrain": 0.0,
             "conservation_finetune": 0.0, "ratio_bounds": 0.0, "jaccard": 0.0}
    cases = dict.fromkeys(worst, 0)

    for n in range(1, n_max + 1):
        tables = rng.normal(size=(trials, 1 << n)) * rng.uniform(0.1, 10.0, size=(trials, 1))
        dividends = transform(tables)
        for k in range(trials):
            worst["round_trip"] = max(worst["round_trip"], relative_error(zeta_array(dividends[k]), tables[k]))
        brute = inclusion_exclusion(tables)
        for k in range(trials):
            worst["brute_equivalence"] = max(worst["brute_equivalence"], relative_error(dividends[k], brute[k]))
        cases["round_trip"] += trials
        cases["brute_equivalence"] += trials

        for _ in range(trials):
            a, b = random_pair(n, rng)
            c = rng.normal(size=1 << n)
            pre, fine, rand = (InteractionVector(n, v) for v in (a, b, c))
            dec = decompose(pre, fine)
            worst["conservation_pretrain"] = max(
                worst["conservation_pretrain"], ulp_deviation(dec.pretrain_strength, dec.preserve, dec.discard))
            worst["conservation_finetune"] = max(
                worst["conservation_finetune"], ulp_deviation(dec.finetune_strength, dec.preserve, dec.new_))
            negative = min(dec.preserve.min(), dec.discard.min(), dec.new_.min())
            worst["conservation_pretrain"] = max(worst["conservation_pretrain"], math.inf if negative < 0 else 0.0)
            ratio = learnability_ratio(pre, fine, rand).per_subset
            defined = ratio[~np.isnan(ratio)]
            if defined.size:
                out_of_range = max(0.0, -defined.min(), defined.max() - 1.0)
                worst["ratio_bounds"] = max(worst["ratio_bounds"], out_of_range)
            cases["conservation_pretrain"] += 1
            cases["conservation_finetune"] += 1
            cases["ratio_bounds"] += 1

            x, y = split_nonneg(a), split_nonneg(b)
            errs = [abs(jaccard(x, y) - jaccard(y, x)), abs(jaccard(x, x) - 1.0) if np.any(x.values) else 0.0]
            sim = jaccard(x, y)
            errs.append(max(0.0, -sim, sim - 1.0))
            t = float(rng.uniform(0.05, 1.0))
            scaled = type(x)(x.values * t)
            if np.any(x.values):
                errs.append(abs(jaccard(scaled, x) - t))
            worst["jaccard"] = max(worst["jaccard"], *errs)
            cases["jaccard"] += 1

    tolerances = {"round_trip": RTOL, "brute_equivalence": RTOL, "conservation_pretrain": CONSERVATION_ULPS,
                  "conservation_finetune": CONSERVATION_ULPS, "ratio_bounds": 0.0, "jaccard": JACCARD_TOL}
    return [CheckResult(name, cases[name], worst[name], tolerances[name]) for name in worst]


def format_results(results: list[CheckResult]) -> str:
    lines = [f"{'check':<24}{'cases':>7}  {'max_error':>12}  {'tolerance':>10}  status"]
    for r in results:
        lines.append(f"{r.name:<24}{r.cases:>7}  {r.max_error:>12.3e}  {r.tolerance:>10.1e}  "
                     f"{'ok' if r.passed else 'FAIL'}")
    return "\n".join(lines)
