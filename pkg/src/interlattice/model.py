"""Portable feed-forward models, baseline masking and log-odds scoring."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from interlattice.lattice import MaskedOutputTable, SubsetMask, check_variable_count

ACTIVATIONS = ("relu", "identity")
PROB_EPS = 1e-12
# log-odds of the clamped probabilities 1 - eps and eps
LOGODDS_LIMIT = math.log((1.0 - PROB_EPS) / PROB_EPS)
MASK_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map ``activation(weights @ x + bias)``; weights are (rows, cols)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise ValueError(f"layer weights must be 2-D, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ValueError(f"bias length {b.shape[0]} does not match {w.shape[0]} rows")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weights.T + self.bias
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return z


@dataclass(frozen=True, eq=False)
class PortableModel:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("model needs at least one layer")
        for k, (a, b) in enumerate(zip(layers, layers[1:])):
            if b.cols != a.rows:
                raise ValueError(f"layer {k + 1} expects {b.cols} inputs but layer {k} emits {a.rows}")
        if layers[-1].activation != "identity":
            raise ValueError("final layer must be linear (identity activation)")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].cols

    @property
    def output_dim(self) -> int:
        return self.layers[-1].rows

    @property
    def feature_dim(self) -> int:
        if len(self.layers) < 2:
            raise ValueError("a single-layer model has no penultimate features")
        return self.layers[-2].rows

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"model expects {self.input_dim} inputs, got {x.shape[-1]}")
        return x

    def features(self, x) -> np.ndarray:
        """Activations feeding the final linear layer."""
        if len(self.layers) < 2:
            raise ValueError("a single-layer model has no penultimate features")
        h = self._check_input(x)
        with np.errstate(over="ignore", invalid="ignore"):
            for layer in self.layers[:-1]:
                h = layer(h)
        return _finite(h)

    def forward(self, x) -> np.ndarray:
        h = self._check_input(x)
        with np.errstate(over="ignore", invalid="ignore"):
            for layer in self.layers:
                h = layer(h)
        return _finite(h)

    def with_head(self, head: Layer) -> "PortableModel":
        return PortableModel(self.layers[:-1] + (head,))


def _finite(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite activations in forward pass")
    return a


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def confidence_logodds(p):
    """``log(p / (1 - p))`` with ``p`` clamped to ``[1e-12, 1 - 1e-12]``.

    The clamp is applied on the log-odds side: ``1 - 1e-12`` is not a double,
    and clamping ``p`` itself would move the upper limit by about 1e-4 relative.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0.0) | (p > 1.0)) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.clip(np.log(p) - np.log1p(-p), -LOGODDS_LIMIT, LOGODDS_LIMIT)
    return float(out) if out.ndim == 0 else out


def logodds_from_logits(logits, label: int):
    """Log-odds of class ``label`` computed from logits without forming ``1 - p``.

    ``log p_y - log(1 - p_y) = z_y - logsumexp(z_k, k != y)``; the result is
    clamped to the same range as :func:`confidence_logodds`.
    """
    z = np.asarray(logits, dtype=np.float64)
    k = z.shape[-1]
    if k < 2:
        raise ValueError("log-odds need at least two classes")
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    others = np.delete(z, label, axis=-1)
    top = others.max(axis=-1)
    rest = top + np.log(np.exp(others - top[..., None]).sum(axis=-1))
    out = np.clip(z[..., label] - rest, -LOGODDS_LIMIT, LOGODDS_LIMIT)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Sample:
    """An input split into ``n`` contiguous variable slices, plus its label."""

    variables: tuple
    label: int

    def __post_init__(self):
        vs = tuple(np.array(v, dtype=np.float64).reshape(-1) for v in self.variables)
        if not vs:
            raise ValueError("sample needs at least one variable")
        for v in vs:
            v.flags.writeable = False
        object.__setattr__(self, "variables", vs)
        object.__setattr__(self, "label", int(self.label))

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def shapes(self) -> tuple[int, ...]:
        return tuple(v.shape[0] for v in self.variables)

    @property
    def input(self) -> np.ndarray:
        return np.concatenate(self.variables)

    @classmethod
    def from_input(cls, x, slices: Sequence[tuple[int, int]], label: int) -> "Sample":
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        check_slices(slices, x.shape[0])
        return cls(tuple(x[a:b] for a, b in slices), label)


@dataclass(frozen=True, eq=False)
class BaselineVector:
    variables: tuple

    def __post_init__(self):
        vs = tuple(np.array(v, dtype=np.float64).reshape(-1) for v in self.variables)
        for v in vs:
            v.flags.writeable = False
        object.__setattr__(self, "variables", vs)

    @property
    def shapes(self) -> tuple[int, ...]:
        return tuple(v.shape[0] for v in self.variables)

    @property
    def input(self) -> np.ndarray:
        return np.concatenate(self.variables)


def check_slices(slices: Sequence[tuple[int, int]], input_dim: int) -> None:
    """Slices must be non-empty, in order, and tile ``0..input_dim`` exactly."""
    pos = 0
    for a, b in slices:
        if a != pos or b <= a:
            raise ValueError(f"variable slices must tile the input contiguously; bad slice {(a, b)}")
        pos = b
    if pos != input_dim:
        raise ValueError(f"variable slices cover {pos} inputs, model input has {input_dim}")


def slices_from_shapes(shapes: Sequence[int]) -> list[tuple[int, int]]:
    bounds = np.concatenate([[0], np.cumsum(shapes)]).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def compute_baseline(samples: Sequence[Sample]) -> BaselineVector:
    """Per-variable mean over all samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("cannot compute a baseline from no samples")
    shapes = samples[0].shapes
    for s in samples[1:]:
        if s.shapes != shapes:
            raise ValueError(f"sample shapes {s.shapes} differ from {shapes}")
    stacked = np.stack([s.input for s in samples])
    mean = stacked.mean(axis=0)
    return BaselineVector(tuple(mean[a:b] for a, b in slices_from_shapes(shapes)))


@dataclass(frozen=True, eq=False)
class Dataset:
    slices: tuple
    samples: tuple
    baseline: Optional[BaselineVector] = None

    def __post_init__(self):
        slices = tuple((int(a), int(b)) for a, b in self.slices)
        samples = tuple(self.samples)
        shapes = tuple(b - a for a, b in slices)
        check_slices(slices, slices[-1][1] if slices else 0)
        for s in samples:
            if s.shapes != shapes:
                raise ValueError(f"sample shapes {s.shapes} do not match slices {slices}")
        if self.baseline is not None and self.baseline.shapes != shapes:
            raise ValueError("baseline shapes do not match the variable slices")
        object.__setattr__(self, "slices", slices)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_arrays(cls, X, y, slices, baseline=None) -> "Dataset":
        samples = tuple(Sample.from_input(x, slices, int(label)) for x, label in zip(X, y))
        if baseline is not None and not isinstance(baseline, BaselineVector):
            b = np.asarray(baseline, dtype=np.float64)
            baseline = BaselineVector(tuple(b[a:c] for a, c in slices))
        return cls(tuple(slices), samples, baseline)

    @property
    def n(self) -> int:
        return len(self.slices)

    @property
    def input_dim(self) -> int:
        return self.slices[-1][1]

    def inputs(self) -> np.ndarray:
        return np.stack([s.input for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.intp)

    def effective_baseline(self) -> BaselineVector:
        """The stored override, or the per-variable mean over the samples."""
        return self.baseline if self.baseline is not None else compute_baseline(self.samples)

    def subset(self, count: int) -> "Dataset":
        return Dataset(self.slices, self.samples[:count], self.baseline)


def _check_masking(sample: Sample, baseline: BaselineVector) -> None:
    if sample.shapes != baseline.shapes:
        raise ValueError(f"baseline shapes {baseline.shapes} do not match sample {sample.shapes}")


def masked_inputs(sample: Sample, baseline: BaselineVector, masks) -> np.ndarray:
    """Rows of inputs where variables outside each mask take baseline values."""
    _check_masking(sample, baseline)
    masks = np.atleast_1d(np.asarray(masks, dtype=np.int64))
    owner = np.repeat(np.arange(sample.n), sample.shapes)
    keep = (masks[:, None] >> owner[None, :]) & 1
    return np.where(keep.astype(bool), sample.input[None, :], baseline.input[None, :])


def _mask_int(T, n: int) -> int:
    if isinstance(T, SubsetMask):
        if T.n != n:
            raise ValueError(f"mask is over {T.n} variables, sample has {n}")
        return T.bits
    return SubsetMask(int(T), n).bits


def evaluate_masked(model: PortableModel, sample: Sample, baseline: BaselineVector, T) -> np.ndarray:
    x = masked_inputs(sample, baseline, [_mask_int(T, sample.n)])
    return softmax(model.forward(x))[0]


@dataclass(frozen=True, eq=False)
class ProbeClassifier:
    """Linear classifier ``W f + b`` over frozen penultimate features."""

    W: np.ndarray
    b: np.ndarray
    loss_history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if W.ndim != 2 or W.shape[0] != b.shape[0]:
            raise ValueError(f"probe shapes W {W.shape} and b {b.shape} disagree")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("probe parameters must be finite")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def classes(self) -> int:
        return self.W.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.W.shape[1]

    def logits(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        if f.shape[-1] != self.feature_dim:
            raise ValueError(f"probe expects {self.feature_dim} features, got {f.shape[-1]}")
        return f @ self.W.T + self.b

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.logits(features), axis=-1)


@dataclass(frozen=True)
class ProbeConfig:
    lr: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(logz - z[np.arange(len(labels)), labels]))


def train_linear_probe(
    features,
    labels,
    config: ProbeConfig = ProbeConfig(),
    n_classes: Optional[int] = None,
) -> ProbeClassifier:
    """Multinomial logistic regression by full-batch gradient descent.

    Features are standardized internally and the learned map is folded back
    into raw-feature ``W`` and ``b``. The step is capped at ``1/L`` for the
    smoothness constant ``L`` of the regularized loss, which keeps the
    training loss non-increasing. The L2 penalty applies to the standardized
    weights only.
    """
    F = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp).reshape(-1)
    if F.ndim != 2 or F.shape[0] != y.shape[0] or F.shape[0] == 0:
        raise ValueError(f"features {F.shape} and labels {y.shape} do not line up")
    if not np.all(np.isfinite(F)):
        raise ValueError("features must be finite")
    k = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in 0..{k - 1}")
    present = np.bincount(y, minlength=k)
    if k < 2 or np.any(present == 0):
        raise ValueError(f"probe training needs >= 2 classes with samples each, got counts {present.tolist()}")

    m, d = F.shape
    mu = F.mean(axis=0)
    sd = F.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (F - mu) / sd
    onehot = np.eye(k)[y]

    Zb = np.hstack([Z, np.ones((m, 1))])
    curvature = 0.5 * float(np.linalg.eigvalsh(Zb.T @ Zb / m).max()) + config.l2
    step = min(config.lr, 1.0 / curvature)

    rng = np.random.default_rng(config.seed)
    W = rng.normal(scale=0.01, size=(k, d))
    b = np.zeros(k)
    history = []
    for _ in range(config.epochs):
        logits = Z @ W.T + b
        history.append(_cross_entropy(logits, y) + 0.5 * config.l2 * float(np.sum(W * W)))
        err = (softmax(logits) - onehot) / m
        W = W - step * (err.T @ Z + config.l2 * W)
        b = b - step * err.sum(axis=0)
    history.append(_cross_entropy(Z @ W.T + b, y) + 0.5 * config.l2 * float(np.sum(W * W)))

    W_raw = W / sd
    b_raw = b - W_raw @ mu
    return ProbeClassifier(W_raw, b_raw, tuple(history))


def probe_logodds(probe: ProbeClassifier, features, y_truth: int):
    return logodds_from_logits(probe.logits(features), y_truth)


def penultimate_features(model: PortableModel, x) -> np.ndarray:
    return model.features(x)


SCORERS = ("model", "probe")


def build_masked_table(
    model: PortableModel,
    sample: Sample,
    baseline: BaselineVector,
    scorer: str = "model",
    probe: Optional[ProbeClassifier] = None,
    jobs: int = 1,
) -> MaskedOutputTable:
    """Score all ``2**n`` masked versions of ``sample`` in mask order.

    ``scorer="model"`` uses the model's own head; ``scorer="probe"`` runs the
    model up to its penultimate layer and scores with ``probe``.
    """
    n = check_variable_count(sample.n)
    if scorer not in SCORERS:
        raise ValueError(f"scorer must be one of {SCORERS}, got {scorer!r}")
    if scorer == "probe":
        if probe is None:
            raise ValueError("scorer 'probe' needs a probe classifier")
        if probe.feature_dim != model.feature_dim:
            raise ValueError(
                f"probe expects {probe.feature_dim} features, model emits {model.feature_dim}"
            )
    _check_masking(sample, baseline)
    if sum(sample.shapes) != model.input_dim:
        raise ValueError(f"sample has {sum(sample.shapes)} inputs, model expects {model.input_dim}")

    def score(start: int) -> np.ndarray:
        masks = np.arange(start, min(start + MASK_CHUNK, 1 << n))
        x = masked_inputs(sample, baseline, masks)
        if scorer == "probe":
            logits = probe.logits(model.features(x))
        else:
            logits = model.forward(x)
        return np.atleast_1d(logodds_from_logits(logits, sample.label))

    starts = range(0, 1 << n, MASK_CHUNK)
    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(score, starts))
    else:
        parts = [score(s) for s in starts]
    return MaskedOutputTable(n, np.concatenate(parts))
