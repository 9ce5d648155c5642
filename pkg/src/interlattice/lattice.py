"""Subset-lattice transforms between masked outputs and Harsanyi dividends.

Subsets of the variable indices ``0..n-1`` are encoded as little-endian
bitmasks: variable ``j`` is bit ``j``. Every lattice array has length
``2**n`` and is indexed by mask, so ``values[0b101]`` is the output with
variables 0 and 2 kept and all others masked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_VARIABLES = 24
BRUTE_MAX_VARIABLES = 16
RTOL = 1e-9
ATOL = 1e-12
DEFAULT_TAU_RATIO = 0.05

# largest lattice array we agree to allocate: 2**24 float64 = 128 MiB
MAX_TABLE_BYTES = 8 << MAX_VARIABLES


def check_variable_count(n: int, limit: int = MAX_VARIABLES) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"variable count must be an integer, got {type(n).__name__}")
    n = int(n)
    if not 1 <= n <= limit:
        raise ValueError(f"variable count must be in 1..{limit}, got {n}")
    if table_nbytes(n) > MAX_TABLE_BYTES:
        raise MemoryError(f"a table over {n} variables needs {table_nbytes(n)} bytes")
    return n


def table_nbytes(n: int) -> int:
    """Bytes needed for one float64 lattice array over ``n`` variables."""
    return 8 << n


def popcounts(n: int) -> np.ndarray:
    """Subset size ``|S|`` for every mask ``S`` in ``0..2**n-1``."""
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint32)).astype(np.intp)


def relative_error(actual, expected) -> float:
    """Max-norm error of ``actual`` relative to the scale of ``expected``.

    The floor keeps all-zero references meaningful: their error is then an
    absolute one measured against ``ATOL``.
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise ValueError(f"shape mismatch {actual.shape} vs {expected.shape}")
    if actual.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(expected))), ATOL / RTOL)
    return float(np.max(np.abs(actual - expected))) / scale


def allclose(actual, expected) -> bool:
    return relative_error(actual, expected) <= RTOL


@dataclass(frozen=True)
class SubsetMask:
    bits: int
    n: int

    def __post_init__(self):
        check_variable_count(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"mask {self.bits} out of range for n={self.n}")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "SubsetMask":
        bits = 0
        for j in indices:
            if not 0 <= j < n:
                raise ValueError(f"variable index {j} out of range for n={n}")
            bits |= 1 << j
        return cls(bits, n)

    @classmethod
    def full(cls, n: int) -> "SubsetMask":
        return cls((1 << n) - 1, n)

    @classmethod
    def empty(cls, n: int) -> "SubsetMask":
        return cls(0, n)

    def indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.n) if self.bits >> j & 1)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, j: int) -> bool:
        return bool(self.bits >> j & 1)

    def issubset(self, other: "SubsetMask") -> bool:
        return self.bits & other.bits == self.bits


def _mask_bits(T, n: int) -> int:
    if isinstance(T, SubsetMask):
        if T.n != n:
            raise ValueError(f"mask is over {T.n} variables, expected {n}")
        return T.bits
    return SubsetMask(int(T), n).bits


def _lattice_array(n: int, values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1 or arr.shape[0] != 1 << n:
        raise ValueError(f"{what} needs exactly 2**{n} = {1 << n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def _infer_n(size: int) -> int:
    if size < 2 or size & (size - 1):
        raise ValueError(f"length {size} is not 2**n for n >= 1")
    return size.bit_length() - 1


@dataclass(frozen=True, eq=False)
class MaskedOutputTable:
    """Scores ``v(x_T)`` of all ``2**n`` masked samples, in mask order."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        check_variable_count(self.n)
        object.__setattr__(self, "values", _lattice_array(self.n, self.values, "masked output table"))

    @classmethod
    def from_values(cls, values) -> "MaskedOutputTable":
        return cls(_infer_n(len(values)), values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, T) -> float:
        return float(self.values[_mask_bits(T, self.n)])


@dataclass(frozen=True, eq=False)
class InteractionVector:
    """Harsanyi dividends ``I(S|x)`` for all ``2**n`` subsets, in mask order."""

    n: int
    dividends: np.ndarray

    def __post_init__(self):
        check_variable_count(self.n)
        object.__setattr__(
            self, "dividends", _lattice_array(self.n, self.dividends, "interaction vector")
        )

    @classmethod
    def from_values(cls, dividends) -> "InteractionVector":
        return cls(_infer_n(len(dividends)), dividends)

    def __len__(self) -> int:
        return self.dividends.shape[0]

    def __getitem__(self, S) -> float:
        return float(self.dividends[_mask_bits(S, self.n)])


def _n_from_last_axis(arr: np.ndarray) -> int:
    return _infer_n(arr.shape[-1])


def mobius_array(values) -> np.ndarray:
    """Fast Möbius transform along the last axis, O(n 2**n) per row.

    For each variable ``j`` every mask containing ``j`` subtracts its partner
    without ``j``. Leading axes are treated as a batch.
    """
    out = np.array(values, dtype=np.float64, copy=True)
    n = check_variable_count(_n_from_last_axis(out))
    batch = out.shape[:-1]
    for j in range(n):
        view = out.reshape(batch + (1 << (n - j - 1), 2, 1 << j))
        np.subtract(view[..., 1, :], view[..., 0, :], out=view[..., 1, :])
    return out


def zeta_array(dividends) -> np.ndarray:
    """Inverse of :func:`mobius_array`: sums every subset's dividends."""
    out = np.array(dividends, dtype=np.float64, copy=True)
    n = check_variable_count(_n_from_last_axis(out))
    batch = out.shape[:-1]
    for j in range(n):
        view = out.reshape(batch + (1 << (n - j - 1), 2, 1 << j))
        np.add(view[..., 1, :], view[..., 0, :], out=view[..., 1, :])
    return out


def inclusion_exclusion(values, chunk: int = 256) -> np.ndarray:
    """Direct evaluation of ``sum_{T subset S} (-1)**(|S|-|T|) v(T)`` for every S.

    Each block of target subsets S is expanded into its explicit signed
    inclusion matrix over all T, so the cost is O(4**n) rather than the
    lattice-recursive O(n 2**n). Used as the independent oracle.
    """
    vals = np.asarray(values, dtype=np.float64)
    n = check_variable_count(_n_from_last_axis(vals), BRUTE_MAX_VARIABLES)
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    sizes = popcounts(n)
    out = np.empty(vals.shape, dtype=np.float64)
    for start in range(0, size, chunk):
        S = masks[start:start + chunk]
        is_subset = (masks[None, :] & S[:, None]) == masks[None, :]
        parity = (sizes[start:start + chunk, None] - sizes[None, :]) & 1
        signs = np.where(is_subset, 1.0 - 2.0 * parity, 0.0)
        out[..., start:start + chunk] = vals @ signs.T
    return out


def mobius_transform(table: MaskedOutputTable) -> InteractionVector:
    return InteractionVector(table.n, mobius_array(table.values))


def mobius_brute(table: MaskedOutputTable) -> InteractionVector:
    check_variable_count(table.n, BRUTE_MAX_VARIABLES)
    return InteractionVector(table.n, inclusion_exclusion(table.values))


def zeta_transform(iv: InteractionVector) -> MaskedOutputTable:
    return MaskedOutputTable(iv.n, zeta_array(iv.dividends))


def _check_tau_ratio(tau_ratio: float) -> float:
    tau_ratio = float(tau_ratio)
    if not 0.0 < tau_ratio < 1.0:
        raise ValueError(f"tau_ratio must lie in (0, 1), got {tau_ratio}")
    return tau_ratio


@dataclass(frozen=True, eq=False)
class SalientSet:
    """Subsets whose dividend magnitude strictly exceeds ``tau``.

    Membership is kept as a sorted mask array; ``members`` materialises
    :class:`SubsetMask` objects on demand.
    """

    tau: float
    n: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.unique(np.asarray(self.bits, dtype=np.int64))
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def members(self) -> list[SubsetMask]:
        return [SubsetMask(int(b), self.n) for b in self.bits]

    def __len__(self) -> int:
        return self.bits.shape[0]

    def __contains__(self, S) -> bool:
        b = _mask_bits(S, self.n)
        i = np.searchsorted(self.bits, b)
        return bool(i < len(self.bits) and self.bits[i] == b)

    def indicator(self) -> np.ndarray:
        flags = np.zeros(1 << self.n, dtype=bool)
        flags[self.bits] = True
        return flags


def select_salient(iv: InteractionVector, tau_ratio: float = DEFAULT_TAU_RATIO) -> SalientSet:
    tau_ratio = _check_tau_ratio(tau_ratio)
    magnitude = np.abs(iv.dividends)
    tau = tau_ratio * float(magnitude.max())
    return SalientSet(tau, iv.n, np.flatnonzero(magnitude > tau))


def reconstruct_salient(salient: SalientSet, iv: InteractionVector, T) -> float:
    """Salient-only approximation of ``v(x_T)``."""
    if salient.n != iv.n:
        raise ValueError(f"salient set is over {salient.n} variables, vector over {iv.n}")
    t = _mask_bits(T, iv.n)
    inside = salient.bits[(salient.bits & t) == salient.bits]
    return math.fsum(iv.dividends[inside])


@dataclass(frozen=True)
class SparsityReport:
    salient_count: int
    total_count: int
    residual_max: float
    tau_ratio: float
    tau: float
    output_max: float

    @property
    def residual_fraction(self) -> float:
        """``residual_max`` relative to the largest masked output magnitude."""
        if self.output_max == 0.0:
            return 0.0
        return self.residual_max / self.output_max


def sparsity_report(iv: InteractionVector, tau_ratio: float = DEFAULT_TAU_RATIO) -> SparsityReport:
    salient = select_salient(iv, tau_ratio)
    dropped = np.array(iv.dividends)
    dropped[salient.bits] = 0.0
    # full minus salient-only reconstruction is the zeta transform of what was dropped
    residual = zeta_array(dropped)
    full = zeta_array(iv.dividends)
    return SparsityReport(
        salient_count=len(salient),
        total_count=1 << iv.n,
        residual_max=float(np.max(np.abs(residual))),
        tau_ratio=float(tau_ratio),
        tau=salient.tau,
        output_max=float(np.max(np.abs(full))),
    )


@dataclass(frozen=True, eq=False)
class OrderProfile:
    """Mean absolute dividend per interaction order ``0..n``."""

    per_order: np.ndarray

    @property
    def n(self) -> int:
        return self.per_order.shape[0] - 1


def order_means(arrays: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Average lattice arrays within each order, then across the sequence.

    Reduction across samples uses ``math.fsum`` so the result does not depend
    on sample order.
    """
    sizes = popcounts(n)
    counts = np.array([math.comb(n, i) for i in range(n + 1)], dtype=np.float64)
    per_sample = [np.bincount(sizes, weights=a, minlength=n + 1) / counts for a in arrays]
    if not per_sample:
        raise ValueError("need at least one sample")
    return np.array([math.fsum(col) / len(per_sample) for col in zip(*per_sample)])


def _common_n(ivs: Sequence[InteractionVector]) -> int:
    if not ivs:
        raise ValueError("need at least one interaction vector")
    ns = {iv.n for iv in ivs}
    if len(ns) != 1:
        raise ValueError(f"interaction vectors mix variable counts {sorted(ns)}")
    return ns.pop()


def order_strength(ivs: Sequence[InteractionVector]) -> OrderProfile:
    ivs = list(ivs)
    n = _common_n(ivs)
    return OrderProfile(order_means([np.abs(iv.dividends) for iv in ivs], n))
