"""Readers and writers for lattice arrays, models, probes and datasets.

Lattice arrays use a small binary container::

    magic    4 bytes   b"MOTB" (masked outputs) or b"HIVB" (interactions)
    version  u16 LE
    n        u8
    values   2**n float64 LE, in mask order

Models, probes and datasets are JSON documents. Numbers may be written as
JSON numbers or as hex-float strings (``float.hex`` form).
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from interlattice.lattice import (
    InteractionVector,
    MaskedOutputTable,
    check_variable_count,
)
from interlattice.model import Dataset, Layer, PortableModel, ProbeClassifier

FORMAT_VERSION = 1
TABLE_MAGIC = b"MOTB"
VECTOR_MAGIC = b"HIVB"
_HEADER = struct.Struct("<4sHB")

PathLike = Union[str, Path]


class FormatError(ValueError):
    """A file does not match the expected layout."""


def encode_lattice(magic: bytes, n: int, values: np.ndarray) -> bytes:
    return _HEADER.pack(magic, FORMAT_VERSION, n) + np.asarray(values, dtype="<f8").tobytes()


def decode_lattice(data: bytes, magic: bytes) -> tuple[int, np.ndarray]:
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a lattice header")
    got, version, n = _HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    try:
        check_variable_count(n)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    body = data[_HEADER.size:]
    if len(body) != 8 << n:
        raise FormatError(f"expected {8 << n} payload bytes for n={n}, got {len(body)}")
    return n, np.frombuffer(body, dtype="<f8").astype(np.float64)


def write_table(path: PathLike, table: MaskedOutputTable) -> None:
    Path(path).write_bytes(encode_lattice(TABLE_MAGIC, table.n, table.values))


def read_table(path: PathLike) -> MaskedOutputTable:
    n, values = decode_lattice(Path(path).read_bytes(), TABLE_MAGIC)
    return MaskedOutputTable(n, values)


def write_vector(path: PathLike, iv: InteractionVector) -> None:
    Path(path).write_bytes(encode_lattice(VECTOR_MAGIC, iv.n, iv.dividends))


def read_vector(path: PathLike) -> InteractionVector:
    n, values = decode_lattice(Path(path).read_bytes(), VECTOR_MAGIC)
    return InteractionVector(n, values)


def lattice_to_csv(values: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mask", "value"])
    for m, v in enumerate(values):
        writer.writerow([m, repr(float(v))])
    return buf.getvalue()


def lattice_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(rows[0]) != {"mask", "value"}:
        raise FormatError("CSV lattice needs columns mask,value")
    values = np.full(len(rows), np.nan)
    for row in rows:
        m = int(row["mask"])
        if not 0 <= m < len(rows):
            raise FormatError(f"mask {m} out of range")
        values[m] = _number(row["value"])
    if np.isnan(values).any():
        raise FormatError("CSV lattice is missing masks")
    return values


def _number(x) -> float:
    if isinstance(x, str):
        try:
            return float.fromhex(x) if "0x" in x.lower() else float(x)
        except ValueError:
            raise FormatError(f"not a number: {x!r}") from None
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FormatError(f"not a number: {x!r}")
    return float(x)


def _numbers(seq, expected: int, what: str) -> np.ndarray:
    if not isinstance(seq, list):
        raise FormatError(f"{what} must be a list")
    if len(seq) != expected:
        raise FormatError(f"{what} has {len(seq)} entries, expected {expected}")
    return np.array([_number(x) for x in seq], dtype=np.float64)


def _require(doc: dict, keys, what: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError(f"{what} must be a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError(f"{what} is missing {', '.join(missing)}")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{what} has unsupported version {doc.get('version')!r}")


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _floats(a: np.ndarray) -> list:
    return [float(v) for v in np.asarray(a).reshape(-1)]


def model_to_dict(model: PortableModel) -> dict:
    return {
        "version": FORMAT_VERSION,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "layers": [
            {
                "rows": layer.rows,
                "cols": layer.cols,
                "activation": layer.activation,
                "weights": _floats(layer.weights),
                "bias": _floats(layer.bias),
            }
            for layer in model.layers
        ],
    }


def model_from_dict(doc: dict) -> PortableModel:
    _require(doc, ["version", "input_dim", "output_dim", "layers"], "model")
    layers = []
    for k, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict):
            raise FormatError(f"layer {k} must be an object")
        for key in ("rows", "cols", "activation", "weights", "bias"):
            if key not in entry:
                raise FormatError(f"layer {k} is missing {key}")
        rows, cols = int(entry["rows"]), int(entry["cols"])
        weights = _numbers(entry["weights"], rows * cols, f"layer {k} weights").reshape(rows, cols)
        bias = _numbers(entry["bias"], rows, f"layer {k} bias")
        try:
            layers.append(Layer(weights, bias, entry["activation"]))
        except ValueError as exc:
            raise FormatError(f"layer {k}: {exc}") from None
    try:
        model = PortableModel(tuple(layers))
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if model.input_dim != doc["input_dim"] or model.output_dim != doc["output_dim"]:
        raise FormatError("declared input_dim/output_dim disagree with the layers")
    return model


def save_model(path: PathLike, model: PortableModel) -> None:
    Path(path).write_text(dump_json(model_to_dict(model)))


def load_model(path: PathLike) -> PortableModel:
    return model_from_dict(_load_json(path))


def probe_to_dict(probe: ProbeClassifier) -> dict:
    return {
        "version": FORMAT_VERSION,
        "classes": probe.classes,
        "feature_dim": probe.feature_dim,
        "W": _floats(probe.W),
        "b": _floats(probe.b),
    }


def probe_from_dict(doc: dict) -> ProbeClassifier:
    _require(doc, ["version", "classes", "feature_dim", "W", "b"], "probe")
    k, d = int(doc["classes"]), int(doc["feature_dim"])
    W = _numbers(doc["W"], k * d, "probe W").reshape(k, d)
    b = _numbers(doc["b"], k, "probe b")
    try:
        return ProbeClassifier(W, b)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_probe(path: PathLike, probe: ProbeClassifier) -> None:
    Path(path).write_text(dump_json(probe_to_dict(probe)))


def load_probe(path: PathLike) -> ProbeClassifier:
    return probe_from_dict(_load_json(path))


def dataset_to_dict(dataset: Dataset) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "input_dim": dataset.input_dim,
        "variables": [[a, b] for a, b in dataset.slices],
        "samples": [{"label": s.label, "x": _floats(s.input)} for s in dataset.samples],
    }
    if dataset.baseline is not None:
        doc["baseline"] = _floats(dataset.baseline.input)
    return doc


def dataset_from_dict(doc: dict) -> Dataset:
    """Parse a dataset document.

    ``variables`` lists ``[start, stop)`` input slices, one per variable;
    ``baseline`` optionally overrides the per-variable mean baseline.
    """
    _require(doc, ["version", "input_dim", "variables", "samples"], "dataset")
    dim = int(doc["input_dim"])
    slices = [tuple(int(v) for v in pair) for pair in doc["variables"]]
    if any(len(pair) != 2 for pair in slices):
        raise FormatError("each variable slice must be [start, stop]")
    X, y = [], []
    for k, s in enumerate(doc["samples"]):
        if not isinstance(s, dict) or "x" not in s or "label" not in s:
            raise FormatError(f"sample {k} needs x and label")
        X.append(_numbers(s["x"], dim, f"sample {k} x"))
        y.append(int(s["label"]))
    baseline = None
    if doc.get("baseline") is not None:
        baseline = _numbers(doc["baseline"], dim, "baseline")
    try:
        return Dataset.from_arrays(X, y, slices, baseline)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_dataset(path: PathLike, dataset: Dataset) -> None:
    Path(path).write_text(dump_json(dataset_to_dict(dataset)))


def load_dataset(path: PathLike) -> Dataset:
    return dataset_from_dict(_load_json(path))


def parse_json(data: Union[str, bytes], source: str = "document") -> dict:
    try:
        return json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{source}: invalid JSON ({exc})") from None


def _load_json(path: PathLike) -> dict:
    return parse_json(Path(path).read_bytes(), str(path))
