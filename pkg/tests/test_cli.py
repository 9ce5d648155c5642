import json
import os

import pytest

from interlattice import formats
from interlattice.cli import DEFAULT_OUT, ENV_OUT, main, sample_id
from interlattice.lattice import InteractionVector, MaskedOutputTable
from interlattice.manifest import MANIFEST_NAME, load_manifest
from interlattice.model import (
    Dataset,
    Layer,
    PortableModel,
    ProbeClassifier,
    logodds_from_logits,
)
from interlattice.reports import decode_csv

SMALL_ARGS = ["--n-vars", "4", "--epochs", "3", "--set", "hidden=16,8", "--set", "pretrain_samples=400",
              "--set", "train_samples=60", "--set", "eval_samples=40", "--set", "pretrain_epochs=4"]


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    return decode_csv(path.read_text())


@pytest.fixture(scope="module")
def small_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy") / "suite"
    assert run("gen-toy", "--out", out, *SMALL_ARGS) == 0
    return out


@pytest.fixture(scope="module")
def default_pipeline(tmp_path_factory):
    base = tmp_path_factory.mktemp("default")
    assert run("gen-toy", "--out", base / "suite") == 0
    assert run("pipeline", "--suite", base / "suite", "--out", base / "run", "--samples", 20, "--jobs", 4) == 0
    return base / "run"


@pytest.fixture
def tiny(tmp_path, rng):
    model = PortableModel((Layer(rng.normal(size=(4, 6)), rng.normal(size=4)),
                           Layer(rng.normal(size=(3, 4)), rng.normal(size=3), "identity")))
    data = Dataset.from_arrays(rng.normal(size=(5, 6)), [0, 1, 2, 1, 0], [(0, 2), (2, 4), (4, 6)])
    formats.save_model(tmp_path / "model.json", model)
    formats.save_dataset(tmp_path / "data.json", data)
    formats.save_probe(tmp_path / "probe.json", ProbeClassifier(rng.normal(size=(3, 4)), rng.normal(size=3)))
    return tmp_path, model, data


def write_vectors(directory, vectors):
    directory.mkdir(parents=True)
    for k, values in enumerate(vectors):
        iv = InteractionVector.from_values(values)
        formats.write_vector(directory / f"{sample_id(k)}.hivb", iv)


# -- gen-toy -------------------------------------------------------------------------------

def test_gen_toy_is_deterministic(tmp_path, small_dir):
    assert run("gen-toy", "--out", tmp_path / "again", *SMALL_ARGS) == 0
    assert (tmp_path / "again" / MANIFEST_NAME).read_bytes() == (small_dir / MANIFEST_NAME).read_bytes()


def test_gen_toy_refuses_existing_directory(small_dir):
    assert run("gen-toy", "--out", small_dir, *SMALL_ARGS) == 2
    assert run("gen-toy", "--out", small_dir, "--force", *SMALL_ARGS) == 0


def test_gen_toy_rejects_bad_settings(tmp_path):
    assert run("gen-toy", "--out", tmp_path / "a", "--set", "nonsense=1") == 2
    assert run("gen-toy", "--out", tmp_path / "b", "--n-vars", "13") == 2


def test_gen_toy_structure(tmp_path):
    out = tmp_path / "s"
    assert run("gen-toy", "--out", out, "--n-vars", 8, "--classes", 2, "--epochs", 2, "--set", "hidden=8,8",
               "--set", "pretrain_epochs=1", "--set", "pretrain_samples=200") == 0
    doc = load_manifest(out / MANIFEST_NAME)
    layout = doc["sections"]["gen-toy"]["layout"]
    assert sorted(layout["checkpoints"]) == ["finetune", "random"]
    assert sorted(layout["models"]) == ["finetuned", "pretrained", "random"]
    assert all(len(v) == 2 for v in layout["checkpoints"].values())


# -- table ---------------------------------------------------------------------------------

def test_table_one_file_per_sample(tiny):
    root, model, data = tiny
    out = root / "tables"
    assert run("table", "--model", root / "model.json", "--data", root / "data.json", "--out", out) == 0
    files = sorted(out.glob("*.motb"))
    assert [f.stem for f in files] == [sample_id(k) for k in range(5)]
    listed = load_manifest(out / MANIFEST_NAME)["artifacts"]
    assert set(listed) == {f.name for f in files}
    for k, f in enumerate(files):
        table = formats.read_table(f)
        sample = data.samples[k]
        direct = logodds_from_logits(model.forward(sample.input[None, :])[0], sample.label)
        assert table.values[-1] == pytest.approx(direct, rel=1e-12)
        empty = logodds_from_logits(model.forward(data.effective_baseline().input[None, :])[0], sample.label)
        assert table.values[0] == pytest.approx(empty, rel=1e-12, abs=1e-12)


def test_table_probe_scorer(tiny):
    root, _, _ = tiny
    common = ["table", "--model", root / "model.json", "--data", root / "data.json", "--out", root / "p"]
    assert run(*common, "--scorer", "probe") == 2
    assert run(*common, "--scorer", "probe", "--probe", root / "probe.json", "--samples", 2) == 0
    assert len(list((root / "p").glob("*.motb"))) == 2


def test_table_missing_inputs(tmp_path):
    assert run("table", "--model", tmp_path / "none.json", "--data", tmp_path / "none.json",
               "--out", tmp_path / "o") == 2


def test_default_output_from_environment(tiny, monkeypatch):
    root, _, _ = tiny
    monkeypatch.chdir(root)
    monkeypatch.setenv(ENV_OUT, str(root / "env-out"))
    assert run("table", "--model", "model.json", "--data", "data.json") == 0
    assert len(list((root / "env-out").glob("*.motb"))) == 5
    monkeypatch.delenv(ENV_OUT)
    assert run("table", "--model", "model.json", "--data", "data.json", "--samples", 1) == 0
    assert len(list((root / DEFAULT_OUT).glob("*.motb"))) == 1


# -- interactions --------------------------------------------------------------------------

def test_interactions_additive_and_idempotent(tmp_path, rng):
    n = 5
    weights = rng.normal(size=n)
    values = [sum(w for j, w in enumerate(weights) if m >> j & 1) for m in range(1 << n)]
    (tmp_path / "t").mkdir()
    formats.write_table(tmp_path / "t" / "sample_0000.motb", MaskedOutputTable(n, values))
    assert run("interactions", "--tables", tmp_path / "t", "--out", tmp_path / "v") == 0
    [row, mean] = rows(tmp_path / "v" / "sparsity.csv")
    assert int(row["salient_count"]) <= n and float(row["tau_ratio"]) == 0.05
    assert mean["sample"] == "mean"
    snapshot = {p.name: p.read_bytes() for p in (tmp_path / "v").iterdir()}
    assert run("interactions", "--tables", tmp_path / "t", "--out", tmp_path / "v") == 0
    assert {p.name: p.read_bytes() for p in (tmp_path / "v").iterdir()} == snapshot


def test_interactions_rejects_bad_magic(tmp_path):
    (tmp_path / "t").mkdir()
    (tmp_path / "t" / "sample_0000.motb").write_bytes(b"XXXX" + bytes(11))
    assert run("interactions", "--tables", tmp_path / "t", "--out", tmp_path / "v") == 2


def test_tampered_input_fails_integrity(tiny):
    root, _, _ = tiny
    assert run("table", "--model", root / "model.json", "--data", root / "data.json", "--out", root / "t") == 0
    target = root / "t" / "sample_0001.motb"
    data = bytearray(target.read_bytes())
    data[-1] ^= 1
    target.write_bytes(bytes(data))
    assert run("interactions", "--tables", root / "t", "--out", root / "v") == 1


# -- decompose -----------------------------------------------------------------------------

def test_decompose_identical_models(tmp_path, rng):
    vecs = [rng.normal(size=8) for _ in range(3)]
    write_vectors(tmp_path / "pre", vecs)
    assert run("decompose", "--pre", tmp_path / "pre", "--fine", tmp_path / "pre", "--rand", tmp_path / "pre",
               "--out", tmp_path / "o") == 0
    for row in rows(tmp_path / "o" / "decomposition.csv"):
        assert float(row["discard"]) == 0.0 and float(row["new"]) == 0.0
        assert float(row["preserve"]) == float(row["pretrain"])
    [summary] = rows(tmp_path / "o" / "ratio_summary.csv")
    assert float(summary["aggregate"]) == 1.0


def test_decompose_hand_built_ratio(tmp_path):
    write_vectors(tmp_path / "pre", [[0.0, 3.0]])
    write_vectors(tmp_path / "fine", [[0.0, 2.0]])
    write_vectors(tmp_path / "rand", [[0.0, 1.0]])
    assert run("decompose", "--pre", tmp_path / "pre", "--fine", tmp_path / "fine", "--rand", tmp_path / "rand",
               "--per-subset", "--chart", "svg", "--out", tmp_path / "o") == 0
    order1 = rows(tmp_path / "o" / "decomposition.csv")[1]
    assert float(order1["ratio"]) == 0.5 and float(order1["preserve"]) == 2.0 and float(order1["discard"]) == 1.0
    [summary] = rows(tmp_path / "o" / "ratio_summary.csv")
    assert float(summary["aggregate"]) == 0.5 and int(summary["excluded_count"]) == 1
    assert len(rows(tmp_path / "o" / "subsets.csv")) == 2
    assert (tmp_path / "o" / "decomposition.svg").read_bytes().startswith(b"<?xml")


def test_decompose_misaligned_samples(tmp_path, rng):
    write_vectors(tmp_path / "pre", [rng.normal(size=4) for _ in range(3)])
    write_vectors(tmp_path / "fine", [rng.normal(size=4) for _ in range(2)])
    assert run("decompose", "--pre", tmp_path / "pre", "--fine", tmp_path / "fine", "--out", tmp_path / "o") == 2


def test_decompose_jsonl(tmp_path, rng):
    write_vectors(tmp_path / "pre", [rng.normal(size=4)])
    assert run("decompose", "--pre", tmp_path / "pre", "--fine", tmp_path / "pre", "--format", "jsonl",
               "--out", tmp_path / "o") == 0
    lines = (tmp_path / "o" / "decomposition.jsonl").read_text().splitlines()
    assert [json.loads(line)["order"] for line in lines] == [0, 1, 2]


# -- trajectory ----------------------------------------------------------------------------

def test_trajectory_zero_then_final(tmp_path):
    final = [0.0, 1.0, -2.0, 0.5]
    write_vectors(tmp_path / "ft" / "epoch_001", [[0.0] * 4])
    write_vectors(tmp_path / "ft" / "epoch_002", [final])
    assert run("trajectory", "--series", f"finetune={tmp_path / 'ft'}", "--chart", "svg",
               "--out", tmp_path / "o") == 0
    got = rows(tmp_path / "o" / "trajectory.csv")
    assert [(r["epoch"], float(r["jaccard"])) for r in got] == [("1", 0.0), ("2", 1.0)]
    assert b'id="trajectory-finetune"' in (tmp_path / "o" / "trajectory.svg").read_bytes()


def test_trajectory_needs_two_epochs(tmp_path):
    write_vectors(tmp_path / "ft" / "epoch_001", [[0.0, 1.0]])
    assert run("trajectory", "--series", f"finetune={tmp_path / 'ft'}", "--out", tmp_path / "o") == 2
    assert run("trajectory", "--series", "no-equals-sign", "--out", tmp_path / "o") == 2


# -- verify --------------------------------------------------------------------------------

def test_verify_default_passes(capsys, monkeypatch, tmp_path):
    monkeypatch.delenv(ENV_OUT, raising=False)
    monkeypatch.chdir(tmp_path)
    assert run("verify") == 0
    text = capsys.readouterr().out
    [line] = [l for l in text.splitlines() if l.startswith("round_trip")]
    assert float(line.split()[2]) <= 1e-9
    assert not (tmp_path / DEFAULT_OUT).exists()


def test_verify_corrupted_transform_fails(tmp_path):
    assert run("verify", "--n-max", 4, "--corrupt", "--out", tmp_path) == 1
    report = rows(tmp_path / "verify.csv")
    assert {r["check"]: r["passed"] for r in report}["round_trip"] == "False"


def test_verify_bounds():
    assert run("verify", "--n-max", 13) == 2
    assert run("verify", "--n-max", 0) == 2


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


# -- pipeline ------------------------------------------------------------------------------

def test_pipeline_small_suite(small_dir, tmp_path):
    out = tmp_path / "run"
    assert run("pipeline", "--suite", small_dir, "--out", out, "--samples", 3, "--per-subset",
               "--head", "probe") == 0
    doc = load_manifest(out / MANIFEST_NAME)
    for rel in doc["artifacts"]:
        assert (out / rel).is_file()
    assert len([r for r in doc["artifacts"] if r.startswith("tables/finetune/")]) == 3
    assert len(rows(out / "reports" / "subsets.csv")) == 3 * 16
    traj = rows(out / "reports" / "trajectory.csv")
    assert [float(r["jaccard"]) for r in traj if r["epoch"] == "3"] == [1.0, 1.0]


def test_pipeline_rejects_foreign_directory(tmp_path):
    (tmp_path / MANIFEST_NAME).write_text(json.dumps({"tool": "interlattice", "version": 1,
                                                       "sections": {}, "artifacts": {}}))
    assert run("pipeline", "--suite", tmp_path, "--out", tmp_path / "o") == 2


def test_default_suite_finetune_starts_closer(default_pipeline):
    traj = rows(default_pipeline / "reports" / "trajectory.csv")
    first = {r["variant"]: float(r["jaccard"]) for r in traj if r["epoch"] == "1"}
    assert first["finetune"] > first["random"]
    assert os.path.getsize(default_pipeline / "reports" / "trajectory.svg") > 0
