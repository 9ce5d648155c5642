import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from interlattice import plots, reports
from interlattice.lattice import InteractionVector, sparsity_report
from interlattice.metrics import (
    TrajectoryRecord,
    decompose,
    learnability_ratio,
    order_decomposition,
    summarize_ratios,
)

SVG = "{http://www.w3.org/2000/svg}"


def vectors(rng, count=3, n=3):
    return [InteractionVector(n, rng.normal(size=1 << n)) for _ in range(count)]


def test_encode_csv_and_jsonl():
    rows = [{"a": 1, "b": 0.1, "c": None}, {"a": 2, "b": math.nan, "c": "x"}]
    assert reports.encode_rows(rows, ["a", "b", "c"], "csv") == "a,b,c\n1,0.1,\n2,nan,x\n"
    lines = reports.encode_rows(rows, ["a", "b", "c"], "jsonl").splitlines()
    assert [json.loads(l) for l in lines] == [{"a": 1, "b": 0.1, "c": None}, {"a": 2, "b": None, "c": "x"}]
    with pytest.raises(ValueError):
        reports.encode_rows(rows, ["a"], "xml")


def test_floats_survive_csv_exactly():
    value = 0.1 + 0.2
    text = reports.encode_rows([{"v": value}], ["v"], "csv")
    assert float(reports.decode_csv(text)[0]["v"]) == value


def test_decomposition_rows_with_ratio(rng):
    pre, fine, rand = vectors(rng), vectors(rng), vectors(rng)
    order = order_decomposition([decompose(a, b) for a, b in zip(pre, fine)])
    results = [learnability_ratio(a, b, c) for a, b, c in zip(pre, fine, rand)]
    summary = summarize_ratios(results)
    counts = reports.ratio_counts_by_order(results)
    rows = reports.decomposition_rows(order, summary, counts)
    assert [r["order"] for r in rows] == [0, 1, 2, 3]
    assert sum(d + e for d, e in counts) == 3 * 8
    assert sum(d for d, _ in counts) == summary.defined_count
    text = reports.encode_rows(rows, reports.decomposition_columns(True), "csv")
    assert text.splitlines()[0] == "order,pretrain,finetune,preserve,discard,new,ratio,ratio_defined,ratio_excluded"
    plain = reports.encode_rows(reports.decomposition_rows(order), reports.decomposition_columns(False), "csv")
    assert plain.splitlines()[0] == "order,pretrain,finetune,preserve,discard,new"


def test_hand_built_ratio_row():
    pre, fine, rand = (InteractionVector(1, [0.0, v]) for v in (3.0, 2.0, 1.0))
    result = learnability_ratio(pre, fine, rand)
    summary = summarize_ratios([result])
    rows = reports.decomposition_rows(order_decomposition([decompose(pre, fine)]), summary,
                                      reports.ratio_counts_by_order([result]))
    assert rows[1]["ratio"] == 0.5 and rows[1]["ratio_defined"] == 1
    assert rows[0]["ratio"] is None and rows[0]["ratio_excluded"] == 1
    [srow] = reports.ratio_summary_rows(summary, 1)
    assert srow == {"aggregate": 0.5, "defined_count": 1, "excluded_count": 1, "samples": 1, "samples_defined": 1}


def test_trajectory_and_sparsity_rows(rng):
    recs = [TrajectoryRecord(1, 0.5, "finetune", 4)]
    assert reports.trajectory_rows(recs) == [{"variant": "finetune", "epoch": 1, "jaccard": 0.5, "samples_n": 4}]
    ivs = vectors(rng)
    reps = [sparsity_report(iv) for iv in ivs]
    rows = reports.sparsity_rows(reps, ["a", "b", "c"])
    summary = reports.sparsity_summary_row(reps)
    assert [r["sample"] for r in rows] == ["a", "b", "c"]
    assert summary["residual_fraction"] == pytest.approx(np.mean([r.residual_fraction for r in reps]))


def test_subset_rows(rng):
    pre, fine, rand = vectors(rng, 2, 2), vectors(rng, 2, 2), vectors(rng, 2, 2)
    decomps = [decompose(a, b) for a, b in zip(pre, fine)]
    rows = reports.subset_rows(decomps, ["s0", "s1"], [learnability_ratio(a, b, c) for a, b, c in zip(pre, fine, rand)])
    assert len(rows) == 8
    assert rows[5]["sample"] == "s1" and rows[5]["mask"] == 1 and rows[5]["order"] == 1
    assert rows[5]["preserve"] + rows[5]["discard"] == pytest.approx(abs(pre[1].dividends[1]))


def records():
    return ([TrajectoryRecord(e, e / 4, "finetune") for e in (1, 2, 3, 4)]
            + [TrajectoryRecord(e, e / 8, "random") for e in (1, 2, 3, 4)])


def test_trajectory_svg_has_one_line_per_variant():
    svg = plots.trajectory_chart(records(), "svg")
    root = ET.fromstring(svg)
    groups = {g.get("id"): g for g in root.iter(f"{SVG}g") if g.get("id", "").startswith("trajectory-")}
    assert set(groups) == {"trajectory-finetune", "trajectory-random"}
    for g in groups.values():
        assert len(g.findall(f"{SVG}path")) == 1


def test_charts_are_deterministic():
    assert plots.trajectory_chart(records()) == plots.trajectory_chart(records())
    assert plots.trajectory_chart(records(), "png")[:8] == b"\x89PNG\r\n\x1a\n"


def test_decomposition_chart(rng):
    pre, fine = vectors(rng), vectors(rng)
    order = order_decomposition([decompose(a, b) for a, b in zip(pre, fine)])
    root = ET.fromstring(plots.decomposition_chart(order))
    ids = {g.get("id") for g in root.iter(f"{SVG}g")}
    assert {"bars-preserve-pretrain", "bars-discard", "bars-preserve-finetune", "bars-new"} <= ids
    with pytest.raises(ValueError):
        plots.decomposition_chart(order, "gif")
    with pytest.raises(ValueError):
        plots.trajectory_chart([])
