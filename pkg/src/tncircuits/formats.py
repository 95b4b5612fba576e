"""File formats: dense tensors, tensor-network descriptions, circuit configs.

Dense tensor text (``.tensor``)::

    dense-tensor 1
    order 2
    shape 2 3
    <one value per line, row-major, %.17g>

Tensor-network description (JSON)::

    {"format": "tn-graph/1",
     "nodes": [{"shape": [2, 2], "data": [...], "legs": ["out", "in"]},
               {"file": "core.tensor"}],
     "bonds": [[[0, 1], [1, 0]]],
     "external": [{"node": 0, "leg": 0, "label": 0}]}

Circuit config (YAML or JSON)::

    kind: cac            # or rac
    N: 4
    M: 2
    K: 2
    L: 2
    S: 2
    r: [2, 2, 2]
    seed: 7              # or an explicit `weights` mapping

Explicit weights hold ``{shape, data}`` arrays: ``layers`` (list) and ``head``
for cac; ``hidden``, ``inputs`` (lists), ``out`` and optionally ``h0`` for rac.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .circuits import ConvSpec, ConvWeights, RacSpec, RacWeights
from .network import TensorNetwork
from .tensor import as_tensor

__all__ = [
    "FormatError", "dumps_tensor", "loads_tensor", "save_tensor", "load_tensor",
    "tn_to_dict", "tn_from_dict", "save_tn", "load_tn", "load_structured",
    "circuit_from_config", "CircuitInstance", "weights_to_mapping",
]

TENSOR_MAGIC = "dense-tensor 1"
TN_FORMAT = "tn-graph/1"


class FormatError(ValueError):
    """Malformed input file."""


# -- dense tensors -----------------------------------------------------------


def dumps_tensor(t: np.ndarray) -> str:
    t = as_tensor(t)
    lines = [TENSOR_MAGIC, f"order {t.ndim}", "shape " + " ".join(map(str, t.shape))]
    lines += ["%.17g" % v for v in t.ravel()]
    return "\n".join(lines) + "\n"


def loads_tensor(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or lines[0] != TENSOR_MAGIC:
        raise FormatError(f"not a dense tensor file (expected {TENSOR_MAGIC!r} header)")
    try:
        key, order = lines[1].split()
        if key != "order":
            raise ValueError
        order = int(order)
        key, *dims = lines[2].split()
        if key != "shape":
            raise ValueError
        shape = tuple(int(x) for x in dims)
    except ValueError:
        raise FormatError("malformed order/shape header") from None
    if len(shape) != order:
        raise FormatError(f"order {order} but shape has {len(shape)} extents")
    try:
        data = [float(x) for x in lines[3:]]
    except ValueError as exc:
        raise FormatError(f"bad value: {exc}") from None
    try:
        return as_tensor(data, shape)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_tensor(path, t) -> None:
    Path(path).write_text(dumps_tensor(t))


def load_tensor(path) -> np.ndarray:
    return loads_tensor(Path(path).read_text())


# -- tensor networks ---------------------------------------------------------


def _array_entry(obj: Any, where: str, base: Path | None = None) -> np.ndarray:
    if isinstance(obj, dict) and "file" in obj:
        p = Path(obj["file"])
        if base is not None and not p.is_absolute():
            p = base / p
        if not p.exists():
            raise FormatError(f"{where}: referenced file {str(p)!r} does not exist")
        return load_tensor(p)
    if isinstance(obj, dict) and "data" in obj:
        try:
            return as_tensor(obj["data"], obj.get("shape", [len(obj["data"])]))
        except (ValueError, TypeError) as exc:
            raise FormatError(f"{where}: {exc}") from None
    if isinstance(obj, list):
        return as_tensor(obj)
    raise FormatError(f"{where}: expected {{shape, data}} or {{file}}")


def tn_to_dict(tn: TensorNetwork) -> dict:
    return {
        "format": TN_FORMAT,
        "nodes": [
            {"shape": list(t.shape), "data": [float(v) for v in t.ravel()], "legs": list(nm)}
            for t, nm in zip(tn.tensors, tn.leg_names)
        ],
        "bonds": [[list(a), list(b)] for a, b in tn.bonds],
        "external": [{"node": n, "leg": l, "label": lab} for n, l, lab in tn.external_legs],
    }


def tn_from_dict(d: dict, base: Path | None = None) -> TensorNetwork:
    if d.get("format") != TN_FORMAT:
        raise FormatError(f"expected format {TN_FORMAT!r}, got {d.get('format')!r}")
    try:
        nodes = []
        for i, nd in enumerate(d["nodes"]):
            nodes.append((_array_entry(nd, f"node {i}", base), nd.get("legs")))
        bonds = [(tuple(a), tuple(b)) for a, b in d.get("bonds", [])]
        ext = [(e["node"], e["leg"], e["label"]) for e in d.get("external", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed network description: {exc!r}") from None
    try:
        return TensorNetwork(nodes, bonds, ext)
    except ValueError as exc:
        raise FormatError(f"invalid network: {exc}") from None


def save_tn(path, tn: TensorNetwork) -> None:
    Path(path).write_text(json.dumps(tn_to_dict(tn)) + "\n")


def load_tn(path) -> TensorNetwork:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return tn_from_dict(d, path.parent)


# -- circuit configs ---------------------------------------------------------


def load_structured(path) -> dict:
    """Read a YAML or JSON mapping."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"config file {str(path)!r} does not exist")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be a mapping")
    return data


class CircuitInstance:
    """A circuit spec, its weights, and where the weights came from."""

    def __init__(self, kind, spec, weights, source):
        self.kind, self.spec, self.weights, self.source = kind, spec, weights, source

    def __repr__(self):
        return f"CircuitInstance({self.kind}, {self.spec}, weights from {self.source})"


def circuit_from_config(cfg: dict, seed: int | None = None, base: Path | None = None):
    """Build a :class:`CircuitInstance` from a parsed config mapping.

    ``seed`` overrides the config's seed.  Weights come from an explicit
    ``weights`` mapping if present, else from a seeded standard-normal draw;
    one of the two is mandatory.
    """
    kind = cfg.get("kind")
    try:
        if kind == "cac":
            spec = ConvSpec(int(cfg["N"]), int(cfg.get("M", 2)), int(cfg["L"]), int(cfg["K"]),
                            tuple(int(x) for x in cfg["r"]), S=int(cfg.get("S", 1)),
                            P=int(cfg.get("P", 1)), d=int(cfg.get("d", 1)),
                            pad=str(cfg.get("pad", "one")))
        elif kind == "rac":
            spec = RacSpec(int(cfg["N"]), int(cfg.get("M", 2)), int(cfg.get("R", 2)),
                           int(cfg.get("L", 1)))
        else:
            raise FormatError(f"config kind must be 'cac' or 'rac', got {kind!r}")
    except KeyError as exc:
        raise FormatError(f"{kind} config is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"invalid {kind} config: {exc}") from None

    if seed is None:
        seed = cfg.get("seed")
    if "weights" in cfg and cfg["weights"] is not None:
        w = _weights_from_mapping(kind, cfg["weights"], spec, base)
        source = "config"
    elif seed is not None:
        rng = np.random.default_rng(int(seed))
        w = (ConvWeights if kind == "cac" else RacWeights).random(spec, rng)
        source = f"seed {int(seed)}"
    else:
        raise FormatError("config needs an explicit seed or explicit weights")
    try:
        w.check(spec)
    except ValueError as exc:
        raise FormatError(f"weights do not fit the circuit: {exc}") from None
    return CircuitInstance(kind, spec, w, source)


def _weights_from_mapping(kind, m: dict, spec, base):
    try:
        if kind == "cac":
            layers = tuple(_array_entry(x, f"layers[{i}]", base) for i, x in enumerate(m["layers"]))
            return ConvWeights(layers, _array_entry(m["head"], "head", base))
        hidden = tuple(_array_entry(x, f"hidden[{i}]", base) for i, x in enumerate(m["hidden"]))
        inputs = tuple(_array_entry(x, f"inputs[{i}]", base) for i, x in enumerate(m["inputs"]))
        h0 = m.get("h0")
        h0 = (tuple(_array_entry(x, f"h0[{i}]", base) for i, x in enumerate(h0))
              if h0 is not None else tuple(np.ones(spec.R) for _ in range(spec.L)))
        return RacWeights(hidden, inputs, _array_entry(m["out"], "out", base), h0)
    except KeyError as exc:
        raise FormatError(f"weights mapping is missing {exc.args[0]!r}") from None


def weights_to_mapping(w) -> dict:
    """Inverse of the explicit-weights mapping (for writing configs)."""
    enc = lambda a: {"shape": list(np.shape(a)), "data": [float(v) for v in np.ravel(a)]}
    if isinstance(w, ConvWeights):
        return {"layers": [enc(a) for a in w.layers], "head": enc(w.head)}
    return {"hidden": [enc(a) for a in w.hidden], "inputs": [enc(a) for a in w.inputs],
            "out": enc(w.out), "h0": [enc(a) for a in w.h0]}

