"""Delimited report rows and their CSV / JSON-lines encodings."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from interlattice.lattice import SparsityReport, popcounts
from interlattice.metrics import (
    KnowledgeDecomposition,
    LearnabilityResult,
    OrderDecomposition,
    RatioSummary,
    TrajectoryRecord,
)

REPORT_FORMATS = ("csv", "jsonl")

DECOMPOSITION_COLUMNS = ("order", "pretrain", "finetune", "preserve", "discard", "new")
RATIO_COLUMNS = ("ratio", "ratio_defined", "ratio_excluded")
RATIO_SUMMARY_COLUMNS = ("aggregate", "defined_count", "excluded_count", "samples", "samples_defined")
TRAJECTORY_COLUMNS = ("variant", "epoch", "jaccard", "samples_n")
SPARSITY_COLUMNS = (
    "sample", "salient_count", "total_count", "tau_ratio", "tau",
    "residual_max", "output_max", "residual_fraction",
)
SUBSET_COLUMNS = ("sample", "mask", "order", "pretrain", "finetune", "preserve", "discard", "new")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return value


def _json_value(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def encode_rows(rows: Iterable[dict], columns: Sequence[str], fmt: str) -> str:
    """CSV with a header row, or one JSON object per line.

    Missing values are empty cells in CSV and ``null`` in JSON lines.
    """
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    if fmt == "jsonl":
        return "".join(
            json.dumps({c: _json_value(row.get(c)) for c in columns}) + "\n" for row in rows
        )
    raise ValueError(f"report format must be one of {REPORT_FORMATS}, got {fmt!r}")


def decode_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def decomposition_rows(decomp: OrderDecomposition, ratios: Optional[RatioSummary] = None,
                       ratio_counts: Optional[Sequence[tuple[int, int]]] = None) -> list[dict]:
    rows = list(decomp.rows())
    if ratios is not None:
        for i, row in enumerate(rows):
            row["ratio"] = ratios.per_order[i]
            if ratio_counts is not None:
                row["ratio_defined"], row["ratio_excluded"] = ratio_counts[i]
    return rows


def decomposition_columns(with_ratio: bool) -> tuple[str, ...]:
    return DECOMPOSITION_COLUMNS + (RATIO_COLUMNS if with_ratio else ())


def ratio_counts_by_order(results: Sequence[LearnabilityResult]) -> list[tuple[int, int]]:
    """``(defined, excluded)`` subset counts per order, pooled over samples."""
    n = results[0].n
    sizes = popcounts(n)
    counts = []
    for i in range(n + 1):
        defined = sum(int(np.count_nonzero(~np.isnan(r.per_subset[sizes == i]))) for r in results)
        total = len(results) * int(np.count_nonzero(sizes == i))
        counts.append((defined, total - defined))
    return counts


def ratio_summary_rows(summary: RatioSummary, samples: int) -> list[dict]:
    return [{
        "aggregate": summary.aggregate,
        "defined_count": summary.defined_count,
        "excluded_count": summary.excluded_count,
        "samples": samples,
        "samples_defined": summary.samples_defined,
    }]


def trajectory_rows(records: Sequence[TrajectoryRecord]) -> list[dict]:
    return [
        {"variant": r.variant, "epoch": r.epoch, "jaccard": r.similarity, "samples_n": r.samples_n}
        for r in records
    ]


def sparsity_rows(reports: Sequence[SparsityReport], sample_ids: Sequence[str]) -> list[dict]:
    return [
        {
            "sample": sid,
            "salient_count": r.salient_count,
            "total_count": r.total_count,
            "tau_ratio": r.tau_ratio,
            "tau": r.tau,
            "residual_max": r.residual_max,
            "output_max": r.output_max,
            "residual_fraction": r.residual_fraction,
        }
        for sid, r in zip(sample_ids, reports)
    ]


def sparsity_summary_row(reports: Sequence[SparsityReport]) -> dict:
    """Aggregate over samples: mean and worst residual fraction, mean salient count."""
    fractions = [r.residual_fraction for r in reports]
    return {
        "sample": "mean",
        "salient_count": math.fsum(r.salient_count for r in reports) / len(reports),
        "total_count": reports[0].total_count,
        "tau_ratio": reports[0].tau_ratio,
        "tau": math.fsum(r.tau for r in reports) / len(reports),
        "residual_max": max(r.residual_max for r in reports),
        "output_max": max(r.output_max for r in reports),
        "residual_fraction": math.fsum(fractions) / len(fractions),
    }


def subset_rows(decomps: Sequence[KnowledgeDecomposition], sample_ids: Sequence[str],
                ratios: Optional[Sequence[LearnabilityResult]] = None) -> list[dict]:
    """One row per (sample, subset); the optional per-subset dump."""
    rows = []
    for k, (sid, d) in enumerate(zip(sample_ids, decomps)):
        sizes = popcounts(d.n)
        for m in range(1 << d.n):
            row = {
                "sample": sid,
                "mask": m,
                "order": int(sizes[m]),
                "pretrain": float(d.pretrain_strength[m]),
                "finetune": float(d.finetune_strength[m]),
                "preserve": float(d.preserve[m]),
                "discard": float(d.discard[m]),
                "new": float(d.new_[m]),
            }
            if ratios is not None:
                value = float(ratios[k].per_subset[m])
                row["ratio"] = None if math.isnan(value) else value
            rows.append(row)
    return rows
