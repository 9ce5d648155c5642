"""Command-line front end.

Usage: ``interlattice <command> [--seed N] [--jobs N] [--out DIR] [--format csv|jsonl] ...``

Exit codes: 0 success, 1 verification or integrity failure, 2 usage error.
The default output directory comes from ``INTERLATTICE_OUT`` when ``--out``
is not given.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Callable, Optional, Sequence

from interlattice import __version__, formats, plots, reports
from interlattice.lattice import (
    DEFAULT_TAU_RATIO,
    InteractionVector,
    MaskedOutputTable,
    mobius_transform,
    sparsity_report,
)
from interlattice.manifest import (
    MANIFEST_NAME,
    IntegrityError,
    ManifestIndex,
    ManifestWriter,
)
from interlattice.metrics import (
    decompose,
    learnability_ratio,
    order_decomposition,
    summarize_ratios,
    trajectory,
)
from interlattice.model import (
    SCORERS,
    BaselineVector,
    Dataset,
    PortableModel,
    ProbeClassifier,
    ProbeConfig,
    build_masked_table,
    train_linear_probe,
)
from interlattice.toy import (
    GEN_SECTION,
    VARIANTS,
    ToyConfig,
    checkpoint_name,
    generate_suite,
    write_suite,
)
from interlattice.verify import (
    VERIFY_MAX_VARIABLES,
    corrupted_mobius,
    format_results,
    run_checks,
)

ENV_OUT = "INTERLATTICE_OUT"
DEFAULT_OUT = "interlattice-out"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
TABLE_SUFFIX, VECTOR_SUFFIX = ".motb", ".hivb"
EPOCH_DIR = re.compile(r"^epoch_(\d+)$")


class UsageError(Exception):
    """Bad arguments or inputs; maps to exit code 2."""


def sample_id(index: int) -> str:
    return f"sample_{index:04d}"


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)


def _require_file(path: Optional[str], what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} is not a directory: {p}")
    return p


class Inputs:
    """Reads input artifacts, checking manifest hashes first."""

    def __init__(self):
        self.index = ManifestIndex()

    def json(self, path) -> dict:
        return formats.parse_json(self.index.read_bytes(path), str(path))

    def model(self, path) -> PortableModel:
        return formats.model_from_dict(self.json(path))

    def probe(self, path) -> ProbeClassifier:
        return formats.probe_from_dict(self.json(path))

    def dataset(self, path) -> Dataset:
        return formats.dataset_from_dict(self.json(path))

    def table(self, path) -> MaskedOutputTable:
        n, values = formats.decode_lattice(self.index.read_bytes(path), formats.TABLE_MAGIC)
        return MaskedOutputTable(n, values)

    def vector(self, path) -> InteractionVector:
        n, values = formats.decode_lattice(self.index.read_bytes(path), formats.VECTOR_MAGIC)
        return InteractionVector(n, values)


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _sample_files(directory: Path, suffix: str) -> dict[str, Path]:
    files = {p.stem: p for p in sorted(directory.glob(f"*{suffix}"))}
    if not files:
        raise UsageError(f"no *{suffix} files in {directory}")
    return files


def _aligned(dirs: dict[str, Path], suffix: str) -> tuple[list[str], dict[str, dict[str, Path]]]:
    """Sample ids shared by every directory; any mismatch is a usage error."""
    listing = {role: _sample_files(d, suffix) for role, d in dirs.items()}
    ids = None
    for role, files in listing.items():
        if ids is None:
            ids, first = set(files), role
        elif set(files) != ids:
            missing = sorted(ids.symmetric_difference(files))[:5]
            raise UsageError(f"samples in {role} do not align with {first}: {', '.join(missing)}")
    return sorted(ids), listing


def _check_n(vectors: Sequence[InteractionVector], what: str) -> None:
    ns = {v.n for v in vectors}
    if len(ns) > 1:
        raise UsageError(f"{what} mix variable counts {sorted(ns)}")


# -- shared work ---------------------------------------------------------------------------

def score_samples(model: PortableModel, dataset: Dataset, baseline: BaselineVector, scorer: str,
                  probe: Optional[ProbeClassifier], count: int, jobs: int) -> list[MaskedOutputTable]:
    samples = dataset.samples[:count]
    return _parallel_map(lambda s: build_masked_table(model, s, baseline, scorer, probe), samples, jobs)


def write_lattices(writer: ManifestWriter, prefix: str, items: Sequence, magic: bytes, suffix: str) -> list[str]:
    rels = []
    for k, item in enumerate(items):
        rel = f"{prefix}{sample_id(k)}{suffix}" if prefix else f"{sample_id(k)}{suffix}"
        values = item.values if isinstance(item, MaskedOutputTable) else item.dividends
        writer.write_bytes(rel, formats.encode_lattice(magic, item.n, values))
        rels.append(rel)
    return rels


def sparsity_outputs(writer: ManifestWriter, rel_stem: str, vectors, ids, tau_ratio: float, fmt: str) -> dict:
    sparsity = [sparsity_report(iv, tau_ratio) for iv in vectors]
    rows = reports.sparsity_rows(sparsity, ids) + [reports.sparsity_summary_row(sparsity)]
    writer.write_text(f"{rel_stem}.{fmt}", reports.encode_rows(rows, reports.SPARSITY_COLUMNS, fmt))
    return rows[-1]


def decomposition_outputs(writer: ManifestWriter, prefix: str, pre, fine, rand, ids, fmt: str,
                          per_subset: bool, chart: Optional[str]) -> dict:
    decomps = [decompose(a, b) for a, b in zip(pre, fine)]
    order = order_decomposition(decomps)
    ratio_results = [learnability_ratio(a, b, c) for a, b, c in zip(pre, fine, rand)] if rand else None
    summary = summarize_ratios(ratio_results) if ratio_results else None
    counts = reports.ratio_counts_by_order(ratio_results) if ratio_results else None
    rows = reports.decomposition_rows(order, summary, counts)
    writer.write_text(f"{prefix}decomposition.{fmt}",
                      reports.encode_rows(rows, reports.decomposition_columns(summary is not None), fmt))
    result = {"orders": len(rows)}
    if summary is not None:
        srows = reports.ratio_summary_rows(summary, len(ids))
        writer.write_text(f"{prefix}ratio_summary.{fmt}",
                          reports.encode_rows(srows, reports.RATIO_SUMMARY_COLUMNS, fmt))
        result.update(srows[0])
    if per_subset:
        columns = reports.SUBSET_COLUMNS + (("ratio",) if ratio_results else ())
        writer.write_text(f"{prefix}subsets.{fmt}",
                          reports.encode_rows(reports.subset_rows(decomps, ids, ratio_results), columns, fmt))
    if chart:
        writer.write_bytes(f"{prefix}decomposition.{chart}", plots.decomposition_chart(order, chart))
    return result


def trajectory_outputs(writer: ManifestWriter, prefix: str, series: dict, fmt: str, chart: Optional[str],
                       salient_only: bool, tau_ratio: float) -> list:
    """``series`` maps variant to ``[(epoch, [per-sample vectors]), ...]`` in epoch order."""
    records = []
    for variant, epochs in series.items():
        if len(epochs) < 2:
            raise UsageError(f"trajectory for {variant!r} needs at least two epochs, got {len(epochs)}")
        labels = [e for e, _ in epochs]
        per_epoch = [ivs for _, ivs in epochs]
        records.extend(trajectory(per_epoch, per_epoch[-1], variant, labels, salient_only, tau_ratio))
    writer.write_text(f"{prefix}trajectory.{fmt}",
                      reports.encode_rows(reports.trajectory_rows(records), reports.TRAJECTORY_COLUMNS, fmt))
    if chart:
        writer.write_bytes(f"{prefix}trajectory.{chart}", plots.trajectory_chart(records, chart))
    return records


# -- commands ------------------------------------------------------------------------------

def _toy_overrides(args) -> dict:
    known = {f.name: f.type for f in fields(ToyConfig)}
    out = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or key not in known or key == "seed":
            raise UsageError(f"--set expects FIELD=VALUE with FIELD one of {sorted(set(known) - {'seed'})}")
        default = getattr(ToyConfig(), key)
        if key == "hidden":
            out[key] = tuple(int(v) for v in value.split(","))
        elif isinstance(default, str):
            out[key] = value
        elif isinstance(default, float):
            out[key] = float(value)
        else:
            out[key] = int(value)
    for key in ("n_vars", "classes", "epochs"):
        if getattr(args, key) is not None:
            out[key] = getattr(args, key)
    return out


def cmd_gen_toy(args) -> int:
    out = _out_dir(args)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"{out} already exists; pass --force to overwrite")
    config = ToyConfig(**_toy_overrides(args), seed=args.seed)
    suite = generate_suite(config)
    writer = ManifestWriter(out, fresh=True)
    write_suite(suite, writer)
    writer.close()
    log = suite.log
    print(f"wrote toy suite to {out}: {len(suite.checkpoints['finetune'])} epochs, "
          f"finetune acc {log['finetune_eval_accuracy'][-1]:.3f}, random acc {log['random_eval_accuracy'][-1]:.3f}")
    return EXIT_OK


def cmd_table(args) -> int:
    inputs = Inputs()
    model_path = _require_file(args.model, "--model")
    data_path = _require_file(args.data, "--data")
    if args.scorer == "probe" and args.probe is None:
        raise UsageError("--scorer probe requires --probe")
    probe_path = _require_file(args.probe, "--probe") if args.probe else None
    model = inputs.model(model_path)
    dataset = inputs.dataset(data_path)
    probe = inputs.probe(probe_path) if probe_path else None
    count = len(dataset.samples) if args.samples is None else min(args.samples, len(dataset.samples))
    tables = score_samples(model, dataset, dataset.effective_baseline(), args.scorer, probe, count, args.jobs)
    writer = ManifestWriter(_out_dir(args))
    write_lattices(writer, "", tables, formats.TABLE_MAGIC, TABLE_SUFFIX)
    writer.section("table", {
        "model": str(model_path),
        "data": str(data_path),
        "probe": str(probe_path) if probe_path else None,
        "scorer": args.scorer,
        "n": dataset.n,
        "samples": [{"id": sample_id(k), "label": s.label} for k, s in enumerate(dataset.samples[:count])],
    })
    writer.close()
    print(f"wrote {len(tables)} tables (n={dataset.n}, scorer={args.scorer}) to {writer.root}")
    return EXIT_OK


def cmd_interactions(args) -> int:
    inputs = Inputs()
    files = _sample_files(_require_dir(args.tables, "--tables"), TABLE_SUFFIX)
    ids = list(files)
    tables = [inputs.table(files[i]) for i in ids]
    vectors = _parallel_map(mobius_transform, tables, args.jobs)
    writer = ManifestWriter(_out_dir(args))
    for sid, iv in zip(ids, vectors):
        writer.write_bytes(f"{sid}{VECTOR_SUFFIX}", formats.encode_lattice(formats.VECTOR_MAGIC, iv.n, iv.dividends))
    summary = sparsity_outputs(writer, "sparsity", vectors, ids, args.tau_ratio, args.format)
    writer.section("interactions", {"tables": str(args.tables), "tau_ratio": args.tau_ratio, "samples": ids})
    writer.close()
    print(f"wrote {len(vectors)} interaction vectors to {writer.root}; mean salient count "
          f"{summary['salient_count']:.1f}, mean residual fraction {summary['residual_fraction']:.4f}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    inputs = Inputs()
    dirs = {"pre": _require_dir(args.pre, "--pre"), "fine": _require_dir(args.fine, "--fine")}
    if args.rand:
        dirs["rand"] = _require_dir(args.rand, "--rand")
    ids, listing = _aligned(dirs, VECTOR_SUFFIX)
    loaded = {role: [inputs.vector(files[i]) for i in ids] for role, files in listing.items()}
    _check_n([v for vs in loaded.values() for v in vs], "vectors")
    writer = ManifestWriter(_out_dir(args))
    result = decomposition_outputs(writer, "", loaded["pre"], loaded["fine"], loaded.get("rand"), ids,
                                   args.format, args.per_subset, args.chart)
    writer.section("decompose", {k: str(v) for k, v in dirs.items()} | {"samples": ids})
    writer.close()
    line = f"wrote decomposition over {len(ids)} samples to {writer.root}"
    if "aggregate" in result:
        agg = result["aggregate"]
        line += f"; ratio {'undefined' if agg is None else f'{agg:.4f}'} ({result['excluded_count']} subsets excluded)"
    print(line)
    return EXIT_OK


def _parse_series(items: Sequence[str]) -> dict[str, Path]:
    series = {}
    for item in items:
        variant, sep, path = item.partition("=")
        if not sep or not variant or not path:
            raise UsageError(f"--series expects VARIANT=DIR, got {item!r}")
        if variant in series:
            raise UsageError(f"variant {variant!r} given twice")
        series[variant] = _require_dir(path, f"series {variant}")
    return series


def _epoch_dirs(root: Path) -> list[tuple[int, Path]]:
    found = []
    for child in root.iterdir():
        match = EPOCH_DIR.match(child.name)
        if match and child.is_dir():
            found.append((int(match.group(1)), child))
    return sorted(found)


def cmd_trajectory(args) -> int:
    inputs = Inputs()
    roots = _parse_series(args.series)
    series = {}
    for variant, root in roots.items():
        epochs = _epoch_dirs(root)
        if len(epochs) < 2:
            raise UsageError(f"series {variant!r} has {len(epochs)} epoch directories; need at least two")
        ids, listing = _aligned({f"{variant}/{p.name}": p for _, p in epochs}, VECTOR_SUFFIX)
        loaded = []
        for (epoch, _), files in zip(epochs, listing.values()):
            loaded.append((epoch, [inputs.vector(files[i]) for i in ids]))
        _check_n([v for _, vs in loaded for v in vs], f"series {variant!r}")
        series[variant] = loaded
    writer = ManifestWriter(_out_dir(args))
    records = trajectory_outputs(writer, "", series, args.format, args.chart, args.salient_only, args.tau_ratio)
    writer.section("trajectory", {
        "series": {v: str(p) for v, p in roots.items()},
        "salient_only": args.salient_only,
        "tau_ratio": args.tau_ratio,
    })
    writer.close()
    print(f"wrote {len(records)} trajectory rows to {writer.root}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if not 1 <= args.n_max <= VERIFY_MAX_VARIABLES:
        raise UsageError(f"--n-max must lie in 1..{VERIFY_MAX_VARIABLES}")
    transform = corrupted_mobius if args.corrupt else None
    results = run_checks(args.n_max, args.trials, args.seed, transform)
    print(format_results(results))
    if args.out or os.environ.get(ENV_OUT):
        writer = ManifestWriter(_out_dir(args))
        writer.write_text(f"verify.{args.format}",
                          reports.encode_rows([r.row() for r in results], list(results[0].row()), args.format))
        writer.section("verify", {"n_max": args.n_max, "trials": args.trials, "seed": args.seed})
        writer.close()
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_pipeline(args) -> int:
    """Tables, interactions, decomposition and trajectories for a generated suite."""
    inputs = Inputs()
    suite_dir = _require_dir(args.suite, "--suite")
    manifest = inputs.json(_require_file(str(suite_dir / MANIFEST_NAME), "suite manifest"))
    section = manifest.get("sections", {}).get(GEN_SECTION)
    if section is None:
        raise UsageError(f"{suite_dir} was not written by gen-toy")
    layout = section["layout"]
    at = lambda rel: suite_dir / rel
    eval_data = inputs.dataset(at(layout["data"]["eval"]))
    train_data = inputs.dataset(at(layout["data"]["train"]))
    baseline = eval_data.effective_baseline()
    count = min(args.samples, len(eval_data.samples))
    ids = [sample_id(k) for k in range(count)]
    jobs = args.jobs

    def vectors_for(model, scorer="model", probe=None):
        tables = score_samples(model, eval_data, baseline, scorer, probe, count, jobs)
        return tables, [mobius_transform(t) for t in tables]

    writer = ManifestWriter(_out_dir(args), fresh=True)
    roles = {
        "pretrain": (inputs.model(at(layout["models"]["pretrained"])), "probe", inputs.probe(at(layout["probe"]))),
        "finetune": (inputs.model(at(layout["models"]["finetuned"])), "model", None),
        "random": (inputs.model(at(layout["models"]["random"])), "model", None),
    }
    vectors = {}
    for role, (model, scorer, probe) in roles.items():
        tables, vectors[role] = vectors_for(model, scorer, probe)
        write_lattices(writer, f"tables/{role}/", tables, formats.TABLE_MAGIC, TABLE_SUFFIX)
        write_lattices(writer, f"vectors/{role}/", vectors[role], formats.VECTOR_MAGIC, VECTOR_SUFFIX)

    sparsity = sparsity_outputs(writer, "reports/sparsity", vectors["finetune"], ids, args.tau_ratio, args.format)
    ratio = decomposition_outputs(writer, "reports/", vectors["pretrain"], vectors["finetune"], vectors["random"],
                                  ids, args.format, args.per_subset, args.chart)

    series = {}
    for variant in VARIANTS:
        epochs = []
        for epoch, rel in enumerate(layout["checkpoints"][variant], start=1):
            model = inputs.model(at(rel))
            probe = None
            if args.head == "probe":
                probe = train_linear_probe(model.features(train_data.inputs()), train_data.labels(),
                                           ProbeConfig(seed=args.seed), n_classes=model.output_dim)
            _, ivs = vectors_for(model, args.head, probe)
            write_lattices(writer, f"vectors/checkpoints/{variant}/{checkpoint_name(epoch)}/", ivs,
                           formats.VECTOR_MAGIC, VECTOR_SUFFIX)
            epochs.append((epoch, ivs))
        series[variant] = epochs
    records = trajectory_outputs(writer, "reports/", series, args.format, args.chart, args.salient_only,
                                 args.tau_ratio)

    writer.section("pipeline", {
        "suite": str(suite_dir),
        "samples": count,
        "tau_ratio": args.tau_ratio,
        "trajectory_head": args.head,
        "salient_only": args.salient_only,
    })
    writer.close()
    quarter = max(1, round(len(series["finetune"]) / 4))
    at_quarter = {r.variant: r.similarity for r in records if r.epoch == quarter}
    agg = ratio.get("aggregate")
    print(f"pipeline over {count} samples written to {writer.root}")
    print(f"  finetune sparsity: mean residual fraction {sparsity['residual_fraction']:.4f}, "
          f"mean salient count {sparsity['salient_count']:.1f}")
    print(f"  learnability ratio: {'undefined' if agg is None else f'{agg:.4f}'}")
    print("  jaccard at epoch " + str(quarter) + ": "
          + ", ".join(f"{v} {s:.3f}" for v, s in at_quarter.items()))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _tau(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("tau ratio must lie in (0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--jobs", type=_positive, default=1, help="worker threads for per-sample work")
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=reports.REPORT_FORMATS, default="csv", help="report encoding")

    parser = argparse.ArgumentParser(prog="interlattice", description="Harsanyi interaction analysis of small models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-toy", parents=[common], help="generate a pretrain/finetune/scratch toy suite")
    p.add_argument("--n-vars", type=int, dest="n_vars", help="number of input variables (<= 12)")
    p.add_argument("--classes", type=int, help="downstream classes")
    p.add_argument("--epochs", type=int, help="downstream training epochs")
    p.add_argument("--set", action="append", metavar="FIELD=VALUE", help="override any toy config field")
    p.add_argument("--force", action="store_true", help="write into an existing directory")
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("table", parents=[common], help="score every masked sample into lattice tables")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--data", required=True, help="dataset JSON")
    p.add_argument("--scorer", choices=SCORERS, default="model", help="score with the model head or a probe")
    p.add_argument("--probe", help="probe JSON (required with --scorer probe)")
    p.add_argument("--samples", type=_positive, help="only the first N samples")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("interactions", parents=[common], help="Harsanyi dividends and sparsity report")
    p.add_argument("--tables", required=True, help="directory of table files")
    p.add_argument("--tau-ratio", type=_tau, default=DEFAULT_TAU_RATIO, dest="tau_ratio")
    p.set_defaults(func=cmd_interactions)

    p = sub.add_parser("decompose", parents=[common], help="preserve/discard/new per order, optional ratio")
    p.add_argument("--pre", required=True, help="pretrain-side vector directory")
    p.add_argument("--fine", required=True, help="finetune-side vector directory")
    p.add_argument("--rand", help="scratch-model vector directory (adds learnability ratios)")
    p.add_argument("--per-subset", action="store_true", help="also dump every (sample, subset) row")
    p.add_argument("--chart", choices=plots.CHART_FORMATS, help="render a stacked bar chart")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("trajectory", parents=[common], help="Jaccard similarity to the final epoch")
    p.add_argument("--series", action="append", required=True, metavar="VARIANT=DIR",
                   help="directory holding epoch_NNN subdirectories of vectors; repeatable")
    p.add_argument("--salient-only", action="store_true", help="compare only subsets salient at the final epoch")
    p.add_argument("--tau-ratio", type=_tau, default=DEFAULT_TAU_RATIO, dest="tau_ratio")
    p.add_argument("--chart", choices=plots.CHART_FORMATS, help="render a line chart")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("verify", parents=[common], help="randomized identity and property checks")
    p.add_argument("--n-max", type=int, default=8, dest="n_max")
    p.add_argument("--trials", type=_positive, default=10)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pipeline", parents=[common], help="run every analysis over a gen-toy suite")
    p.add_argument("--suite", required=True, help="directory written by gen-toy")
    p.add_argument("--samples", type=_positive, default=20, help="evaluation samples to analyse")
    p.add_argument("--tau-ratio", type=_tau, default=DEFAULT_TAU_RATIO, dest="tau_ratio")
    p.add_argument("--head", choices=SCORERS, default="model", help="head used for checkpoint trajectories")
    p.add_argument("--salient-only", action="store_true")
    p.add_argument("--per-subset", action="store_true")
    p.add_argument("--chart", choices=plots.CHART_FORMATS, default="svg")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IntegrityError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (UsageError, formats.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
