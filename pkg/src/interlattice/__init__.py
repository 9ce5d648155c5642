"""Harsanyi interactions over masked model outputs and knowledge-change metrics."""

from interlattice.lattice import (
    MAX_VARIABLES,
    InteractionVector,
    MaskedOutputTable,
    OrderProfile,
    SalientSet,
    SparsityReport,
    SubsetMask,
    mobius_brute,
    mobius_transform,
    order_strength,
    reconstruct_salient,
    select_salient,
    sparsity_report,
    zeta_transform,
)
from interlattice.metrics import (
    KnowledgeDecomposition,
    LearnabilityResult,
    OrderDecomposition,
    TrajectoryRecord,
    decompose,
    jaccard,
    learnability_ratio,
    order_decomposition,
    split_nonneg,
    trajectory,
)
from interlattice.model import (
    BaselineVector,
    Dataset,
    PortableModel,
    ProbeClassifier,
    ProbeConfig,
    Sample,
    build_masked_table,
    compute_baseline,
    confidence_logodds,
    evaluate_masked,
    penultimate_features,
    probe_logodds,
    train_linear_probe,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_VARIABLES",
    "InteractionVector",
    "MaskedOutputTable",
    "OrderProfile",
    "SalientSet",
    "SparsityReport",
    "SubsetMask",
    "mobius_brute",
    "mobius_transform",
    "order_strength",
    "reconstruct_salient",
    "select_salient",
    "sparsity_report",
    "zeta_transform",
    "KnowledgeDecomposition",
    "LearnabilityResult",
    "OrderDecomposition",
    "TrajectoryRecord",
    "decompose",
    "jaccard",
    "learnability_ratio",
    "order_decomposition",
    "split_nonneg",
    "trajectory",
    "BaselineVector",
    "Dataset",
    "PortableModel",
    "ProbeClassifier",
    "ProbeConfig",
    "Sample",
    "build_masked_table",
    "compute_baseline",
    "confidence_logodds",
    "evaluate_masked",
    "penultimate_features",
    "probe_logodds",
    "train_linear_probe",
]
