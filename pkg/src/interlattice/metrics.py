"""Knowledge-change metrics between interaction vectors of related models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from interlattice.lattice import (
    DEFAULT_TAU_RATIO,
    InteractionVector,
    order_means,
    popcounts,
    select_salient,
)


def _same_n(*ivs: InteractionVector) -> int:
    ns = {iv.n for iv in ivs}
    if len(ns) != 1:
        raise ValueError(f"interaction vectors mix variable counts {sorted(ns)}")
    return ns.pop()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class KnowledgeDecomposition:
    """Per-subset split of pretrain and finetune interaction strength.

    ``preserve + discard`` rebuilds ``|I_pretrain|`` and ``preserve + new_``
    rebuilds ``|I_finetune|``.
    """

    n: int
    preserve: np.ndarray
    discard: np.ndarray
    new_: np.ndarray
    pretrain_strength: np.ndarray
    finetune_strength: np.ndarray
    pretrain_id: str = "pretrain"
    finetune_id: str = "finetune"


def preserved_strength(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``min(|a|, |b|)`` where ``a`` and ``b`` share a strict sign, else 0."""
    return np.where(a * b > 0, np.minimum(np.abs(a), np.abs(b)), 0.0)


def decompose(
    iv_pre: InteractionVector,
    iv_fine: InteractionVector,
    pretrain_id: str = "pretrain",
    finetune_id: str = "finetune",
) -> KnowledgeDecomposition:
    n = _same_n(iv_pre, iv_fine)
    pre = np.abs(iv_pre.dividends)
    fine = np.abs(iv_fine.dividends)
    preserve = preserved_strength(iv_pre.dividends, iv_fine.dividends)
    return KnowledgeDecomposition(
        n=n,
        preserve=_frozen(preserve),
        discard=_frozen(pre - preserve),
        new_=_frozen(fine - preserve),
        pretrain_strength=_frozen(pre),
        finetune_strength=_frozen(fine),
        pretrain_id=pretrain_id,
        finetune_id=finetune_id,
    )


@dataclass(frozen=True, eq=False)
class OrderDecomposition:
    """Per-order means (over samples and subsets of size ``i``) of each quantity."""

    preserve: np.ndarray
    discard: np.ndarray
    new: np.ndarray
    pretrain: np.ndarray
    finetune: np.ndarray

    @property
    def n(self) -> int:
        return self.preserve.shape[0] - 1

    def rows(self):
        for i in range(self.n + 1):
            yield {
                "order": i,
                "pretrain": float(self.pretrain[i]),
                "finetune": float(self.finetune[i]),
                "preserve": float(self.preserve[i]),
                "discard": float(self.discard[i]),
                "new": float(self.new[i]),
            }


def order_decomposition(decomps: Sequence[KnowledgeDecomposition]) -> OrderDecomposition:
    decomps = list(decomps)
    if not decomps:
        raise ValueError("need at least one decomposition")
    ns = {d.n for d in decomps}
    if len(ns) != 1:
        raise ValueError(f"decompositions mix variable counts {sorted(ns)}")
    n = ns.pop()

    def means(attr):
        return _frozen(order_means([getattr(d, attr) for d in decomps], n))

    return OrderDecomposition(
        preserve=means("preserve"),
        discard=means("discard"),
        new=means("new_"),
        pretrain=means("pretrain_strength"),
        finetune=means("finetune_strength"),
    )


@dataclass(frozen=True, eq=False)
class LearnabilityResult:
    """Per-subset learnability ratios; NaN marks subsets with nothing preserved."""

    n: int
    per_subset: np.ndarray
    aggregate: Optional[float]
    defined_count: int
    excluded_count: int


def learnability_ratio(
    iv_pre: InteractionVector,
    iv_fine: InteractionVector,
    iv_rand: InteractionVector,
) -> LearnabilityResult:
    """Fraction of preserved pretrain knowledge that a scratch model also encodes.

    Subsets with zero preserved strength have no defined ratio; they are left
    as NaN, excluded from the aggregate, and counted in ``excluded_count``.
    """
    n = _same_n(iv_pre, iv_fine, iv_rand)
    preserve = preserved_strength(iv_pre.dividends, iv_fine.dividends)
    defined = preserve > 0
    shared = iv_pre.dividends * iv_rand.dividends > 0
    numerator = np.where(shared, np.minimum(np.abs(iv_rand.dividends), preserve), 0.0)
    ratio = np.full(1 << n, np.nan)
    ratio[defined] = numerator[defined] / preserve[defined]
    count = int(defined.sum())
    aggregate = math.fsum(ratio[defined]) / count if count else None
    return LearnabilityResult(
        n=n,
        per_subset=_frozen(ratio),
        aggregate=aggregate,
        defined_count=count,
        excluded_count=(1 << n) - count,
    )


@dataclass(frozen=True)
class RatioSummary:
    aggregate: Optional[float]
    per_order: tuple[Optional[float], ...]
    defined_count: int
    excluded_count: int
    samples_defined: int


def summarize_ratios(results: Sequence[LearnabilityResult]) -> RatioSummary:
    """Average ratios over samples.

    The aggregate is the mean of per-sample aggregates over samples that have
    at least one defined subset. Per-order values pool every defined subset of
    that order across samples.
    """
    results = list(results)
    if not results:
        raise ValueError("need at least one learnability result")
    ns = {r.n for r in results}
    if len(ns) != 1:
        raise ValueError(f"results mix variable counts {sorted(ns)}")
    n = ns.pop()
    per_sample = [r.aggregate for r in results if r.aggregate is not None]
    aggregate = math.fsum(per_sample) / len(per_sample) if per_sample else None

    sizes = popcounts(n)
    per_order = []
    for i in range(n + 1):
        vals = [v for r in results for v in r.per_subset[sizes == i] if not math.isnan(v)]
        per_order.append(math.fsum(vals) / len(vals) if vals else None)
    return RatioSummary(
        aggregate=aggregate,
        per_order=tuple(per_order),
        defined_count=sum(r.defined_count for r in results),
        excluded_count=sum(r.excluded_count for r in results),
        samples_defined=len(per_sample),
    )


@dataclass(frozen=True, eq=False)
class NonNegVector:
    """``[max(I, 0), -min(I, 0)]``: positive and negative parts side by side."""

    values: np.ndarray

    @property
    def d(self) -> int:
        return self.values.shape[0] // 2

    def signed(self) -> np.ndarray:
        return self.values[: self.d] - self.values[self.d :]


def split_nonneg(iv: Union[InteractionVector, np.ndarray]) -> NonNegVector:
    dividends = iv.dividends if isinstance(iv, InteractionVector) else np.asarray(iv, dtype=np.float64)
    # +0.0 turns any -0.0 from negation into a plain zero
    out = np.concatenate([np.maximum(dividends, 0.0), -np.minimum(dividends, 0.0) + 0.0])
    return NonNegVector(_frozen(out))


def jaccard(a: NonNegVector, b: NonNegVector) -> float:
    """Weighted Jaccard similarity ``|min(a, b)|_1 / |max(a, b)|_1``.

    Two all-zero vectors count as identical (1.0).
    """
    if a.values.shape != b.values.shape:
        raise ValueError(f"length mismatch {a.values.shape} vs {b.values.shape}")
    if np.any(a.values < 0) or np.any(b.values < 0):
        raise ValueError("jaccard needs non-negative vectors")
    top = math.fsum(np.maximum(a.values, b.values))
    if top == 0.0:
        return 1.0
    return math.fsum(np.minimum(a.values, b.values)) / top


@dataclass(frozen=True)
class TrajectoryRecord:
    epoch: int
    similarity: float
    variant: str
    samples_n: int = 1


def _as_samples(item) -> list[InteractionVector]:
    if isinstance(item, InteractionVector):
        return [item]
    return list(item)


def trajectory(
    per_epoch_ivs: Sequence,
    final_iv,
    variant: str = "finetune",
    epochs: Optional[Sequence[int]] = None,
    salient_only: bool = False,
    tau_ratio: float = DEFAULT_TAU_RATIO,
) -> list[TrajectoryRecord]:
    """Jaccard similarity of each epoch's interactions to the final ones.

    Each entry of ``per_epoch_ivs`` is one vector or a list of per-sample
    vectors aligned with ``final_iv``. Similarities are computed per sample
    and then averaged. ``epochs`` defaults to ``1..len(per_epoch_ivs)``.
    With ``salient_only`` the comparison keeps only subsets that are salient
    in the final vector of each sample.
    """
    per_epoch = [_as_samples(item) for item in per_epoch_ivs]
    finals = _as_samples(final_iv)
    if not per_epoch:
        raise ValueError("need at least one epoch")
    if not finals:
        raise ValueError("need at least one sample")
    if epochs is None:
        epochs = range(1, len(per_epoch) + 1)
    epochs = list(epochs)
    if len(epochs) != len(per_epoch):
        raise ValueError(f"{len(epochs)} epoch labels for {len(per_epoch)} epochs")

    keeps = []
    final_parts = []
    for fin in finals:
        keep = select_salient(fin, tau_ratio).indicator() if salient_only else None
        keeps.append(keep)
        final_parts.append(split_nonneg(_restrict(fin.dividends, keep)))

    records = []
    for epoch, ivs in zip(epochs, per_epoch):
        if len(ivs) != len(finals):
            raise ValueError(f"epoch {epoch} has {len(ivs)} samples, final has {len(finals)}")
        sims = []
        for iv, fin, keep, fin_part in zip(ivs, finals, keeps, final_parts):
            _same_n(iv, fin)
            sims.append(jaccard(split_nonneg(_restrict(iv.dividends, keep)), fin_part))
        records.append(TrajectoryRecord(int(epoch), math.fsum(sims) / len(sims), variant, len(sims)))
    return records


def _restrict(dividends: np.ndarray, keep: Optional[np.ndarray]) -> np.ndarray:
    if keep is None:
        return dividends
    return np.where(keep, dividends, 0.0)
