"""Desk-scale pretrain / finetune / scratch scenario.

A backbone is trained on a wide task: several Gaussian-prototype classes
spread over every input variable. The downstream task is narrower. With
``downstream="subset"`` it keeps only the first ``classes`` prototypes; with
``"pooled"`` downstream class ``c`` pools every pretrain class ``k`` with
``k % classes == c``. The finetuned model starts from the pretrained backbone
with a fresh head; the scratch model starts from random weights. Both see the
same small downstream training set and are checkpointed after every epoch.

Weight decay is strong by default. It keeps the relu networks in a mildly
curved regime, which is what makes their interactions sparse.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from interlattice import formats
from interlattice.manifest import ManifestWriter
from interlattice.model import (
    Dataset,
    Layer,
    PortableModel,
    ProbeClassifier,
    ProbeConfig,
    slices_from_shapes,
    train_linear_probe,
)


@dataclass(frozen=True)
class ToyConfig:
    n_vars: int = 10
    var_dim: int = 2
    classes: int = 2
    pretrain_classes: int = 6
    pretrain_samples: int = 3000
    train_samples: int = 120
    eval_samples: int = 200
    hidden: tuple = (256, 128)
    noise: float = 1.0
    separation: float = 1.0
    informative: Optional[int] = None
    downstream: str = "subset"
    pretrain_epochs: int = 30
    epochs: int = 20
    lr: float = 0.02
    batch_size: int = 32
    momentum: float = 0.9
    weight_decay: float = 0.2
    pretrain_weight_decay: float = 0.2
    finetune_lr: float = 0.02
    finetune_weight_decay: float = 1.0
    head_init: str = "random"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_vars <= 12:
            raise ValueError(f"toy scenarios support 1..12 variables, got {self.n_vars}")
        if self.classes < 2:
            raise ValueError("downstream task needs at least two classes")
        if self.pretrain_classes < self.classes:
            raise ValueError("pretraining task must be at least as wide as the downstream task")
        if self.informative is None:
            object.__setattr__(self, "informative", self.n_vars)
        if not 1 <= self.informative <= self.n_vars:
            raise ValueError(f"informative must lie in 1..{self.n_vars}, got {self.informative}")
        if self.downstream not in ("pooled", "subset"):
            raise ValueError(f"downstream must be 'pooled' or 'subset', got {self.downstream!r}")
        if self.head_init not in ("probe", "random"):
            raise ValueError(f"head_init must be 'probe' or 'random', got {self.head_init!r}")
        if self.epochs < 2:
            raise ValueError("need at least two epochs of checkpoints")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def input_dim(self) -> int:
        return self.n_vars * self.var_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class ToySuite:
    """Everything :func:`generate_suite` produces.

    ``checkpoints`` maps the variant names ``"finetune"`` and ``"random"``
    (the scratch model) to one frozen model per epoch; the last entry of each
    series is the final model.
    """

    config: ToyConfig
    pretrain_data: Dataset
    train_data: Dataset
    eval_data: Dataset
    pretrained: PortableModel
    finetuned: PortableModel
    scratch: PortableModel
    probe: ProbeClassifier
    checkpoints: dict = field(default_factory=dict)
    log: dict = field(default_factory=dict)


class MLP:
    """Mutable relu network used only for training; frozen via :meth:`freeze`."""

    def __init__(self, weights, biases):
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.velocity = [np.zeros_like(p) for p in self.weights + self.biases]
        # weight decay pulls towards these; zero unless anchored to pretrained weights
        self.anchor = [np.zeros_like(w) for w in self.weights]

    @classmethod
    def random(cls, sizes, rng: np.random.Generator) -> "MLP":
        weights = [rng.normal(scale=np.sqrt(2.0 / a), size=(b, a)) for a, b in zip(sizes, sizes[1:])]
        return cls(weights, [np.zeros(b) for b in sizes[1:]])

    @classmethod
    def from_model(cls, model: PortableModel) -> "MLP":
        return cls([l.weights for l in model.layers], [l.bias for l in model.layers])

    def anchor_here(self) -> None:
        self.anchor = [w.copy() for w in self.weights]

    def freeze(self) -> PortableModel:
        last = len(self.weights) - 1
        return PortableModel(tuple(
            Layer(w.copy(), b.copy(), "identity" if k == last else "relu")
            for k, (w, b) in enumerate(zip(self.weights, self.biases))
        ))

    def replace_head(self, classes: int, rng: np.random.Generator) -> None:
        fan_in = self.weights[-1].shape[1]
        self.weights[-1] = rng.normal(scale=np.sqrt(1.0 / fan_in), size=(classes, fan_in))
        self.biases[-1] = np.zeros(classes)
        self.anchor[-1] = np.zeros_like(self.weights[-1])
        self.velocity = [np.zeros_like(p) for p in self.weights + self.biases]

    def set_head(self, weights, bias) -> None:
        self.weights[-1] = np.array(weights, dtype=np.float64)
        self.biases[-1] = np.array(bias, dtype=np.float64)
        self.anchor[-1] = np.zeros_like(self.weights[-1])
        self.velocity = [np.zeros_like(p) for p in self.weights + self.biases]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
        return h

    def step(self, x, y, lr, momentum, weight_decay) -> float:
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        z = acts[-1] - acts[-1].max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        m = x.shape[0]
        loss = float(-np.mean(np.log(p[np.arange(m), y] + 1e-300)))
        delta = p
        delta[np.arange(m), y] -= 1.0
        delta /= m
        grads_w, grads_b = [None] * len(self.weights), [None] * len(self.weights)
        for k in range(last, -1, -1):
            grads_w[k] = delta.T @ acts[k] + weight_decay * (self.weights[k] - self.anchor[k])
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k]) * (acts[k] > 0)
        params = self.weights + self.biases
        for i, (param, grad) in enumerate(zip(params, grads_w + grads_b)):
            self.velocity[i] = momentum * self.velocity[i] - lr * grad
            param += self.velocity[i]
        return loss


def train(net: MLP, X, y, epochs: int, config: ToyConfig, rng: np.random.Generator, on_epoch=None,
          lr=None, weight_decay=None) -> list:
    lr = config.lr if lr is None else lr
    weight_decay = config.weight_decay if weight_decay is None else weight_decay
    losses = []
    m = X.shape[0]
    for epoch in range(1, epochs + 1):
        order = rng.permutation(m)
        total = 0.0
        for start in range(0, m, config.batch_size):
            idx = order[start:start + config.batch_size]
            total += net.step(X[idx], y[idx], lr, config.momentum, weight_decay) * len(idx)
        losses.append(total / m)
        if on_epoch is not None:
            on_epoch(epoch, net)
    return losses


def accuracy(model: PortableModel, dataset: Dataset) -> float:
    pred = np.argmax(model.forward(dataset.inputs()), axis=1)
    return float(np.mean(pred == dataset.labels()))


def _sample(prototypes: np.ndarray, count: int, noise: float, rng: np.random.Generator):
    k = rng.integers(prototypes.shape[0], size=count)
    X = prototypes[k] + noise * rng.normal(size=(count, prototypes.shape[1]))
    return X, k


def _dataset(X, y, config: ToyConfig) -> Dataset:
    slices = slices_from_shapes([config.var_dim] * config.n_vars)
    return Dataset.from_arrays(X, y, slices)


def generate_suite(config: ToyConfig = ToyConfig()) -> ToySuite:
    rng = np.random.default_rng(config.seed)
    prototypes = np.zeros((config.pretrain_classes, config.input_dim))
    signal = config.informative * config.var_dim
    prototypes[:, :signal] = rng.normal(scale=config.separation, size=(config.pretrain_classes, signal))

    Xp, kp = _sample(prototypes, config.pretrain_samples, config.noise, rng)
    down = prototypes[: config.classes] if config.downstream == "subset" else prototypes
    Xt, kt = _sample(down, config.train_samples, config.noise, rng)
    Xe, ke = _sample(down, config.eval_samples, config.noise, rng)
    pretrain_data = _dataset(Xp, kp, config)
    train_data = _dataset(Xt, kt % config.classes, config)
    eval_data = _dataset(Xe, ke % config.classes, config)

    sizes = (config.input_dim,) + config.hidden
    backbone = MLP.random(sizes + (config.pretrain_classes,), rng)
    pretrain_loss = train(backbone, Xp, kp, config.pretrain_epochs, config, rng,
                          weight_decay=config.pretrain_weight_decay)
    pretrained = backbone.freeze()

    probe = train_linear_probe(
        pretrained.features(Xt), train_data.labels(), ProbeConfig(seed=config.seed), n_classes=config.classes
    )

    checkpoints = {"finetune": [], "random": []}
    accuracies = {"finetune": [], "random": []}

    def recorder(variant):
        def on_epoch(epoch, net):
            model = net.freeze()
            checkpoints[variant].append(model)
            accuracies[variant].append(accuracy(model, eval_data))
        return on_epoch

    yt = train_data.labels()
    fine = MLP.from_model(pretrained)
    fine.anchor_here()
    if config.head_init == "probe":
        fine.set_head(probe.W, probe.b)
    else:
        fine.replace_head(config.classes, rng)
    fine_loss = train(fine, Xt, yt, config.epochs, config, rng, recorder("finetune"),
                      lr=config.finetune_lr, weight_decay=config.finetune_weight_decay)

    scratch = MLP.random(sizes + (config.classes,), rng)
    scratch_loss = train(scratch, Xt, yt, config.epochs, config, rng, recorder("random"))

    log = {
        "pretrain_loss": pretrain_loss,
        "pretrain_accuracy": accuracy(pretrained, _dataset(Xe, ke, config)),
        "finetune_loss": fine_loss,
        "random_loss": scratch_loss,
        "finetune_eval_accuracy": accuracies["finetune"],
        "random_eval_accuracy": accuracies["random"],
        "probe_train_accuracy": float(np.mean(
            probe.predict(pretrained.features(Xt)) == yt
        )),
    }
    return ToySuite(
        config=config,
        pretrain_data=pretrain_data,
        train_data=train_data,
        eval_data=eval_data,
        pretrained=pretrained,
        finetuned=checkpoints["finetune"][-1],
        scratch=checkpoints["random"][-1],
        probe=probe,
        checkpoints=checkpoints,
        log=log,
    )


def linear_model(input_dim: int, rng: np.random.Generator, scale: float = 0.3) -> PortableModel:
    """Single linear layer with two classes; its log-odds are additive in the inputs."""
    return PortableModel((Layer(rng.normal(scale=scale, size=(2, input_dim)), rng.normal(size=2), "identity"),))


VARIANTS = ("finetune", "random")
GEN_SECTION = "gen-toy"


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:03d}"


def write_suite(suite: ToySuite, writer: ManifestWriter) -> dict:
    """Serialize a suite through ``writer`` and record its layout as a section."""
    def model_doc(model):
        return formats.dump_json(formats.model_to_dict(model))

    layout = {
        "data": {},
        "models": {},
        "probe": "models/probe.json",
        "checkpoints": {v: [] for v in VARIANTS},
    }
    for name, dataset in (("pretrain", suite.pretrain_data), ("train", suite.train_data), ("eval", suite.eval_data)):
        rel = f"data/{name}.json"
        writer.write_text(rel, formats.dump_json(formats.dataset_to_dict(dataset)))
        layout["data"][name] = rel
    for name, model in (("pretrained", suite.pretrained), ("finetuned", suite.finetuned), ("random", suite.scratch)):
        rel = f"models/{name}.json"
        writer.write_text(rel, model_doc(model))
        layout["models"][name] = rel
    writer.write_text(layout["probe"], formats.dump_json(formats.probe_to_dict(suite.probe)))
    for variant in VARIANTS:
        for epoch, model in enumerate(suite.checkpoints[variant], start=1):
            rel = f"checkpoints/{variant}/{checkpoint_name(epoch)}.json"
            writer.write_text(rel, model_doc(model))
            layout["checkpoints"][variant].append(rel)
    section = {"config": suite.config.to_dict(), "log": suite.log, "layout": layout}
    writer.section(GEN_SECTION, section)
    return section
