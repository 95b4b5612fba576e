"""Convolutional and recurrent arithmetic circuits.

Both circuit families only add and multiply, so on one-hot inputs their
output is a multilinear polynomial in the input selections: evaluating every
configuration ("materializing") yields the order-N coefficient tensor the
circuit represents.  Local states and sites are 0-based.

Convolutional layers are center-anchored: a window of size K at output
position p covers input positions ``p - (K-1)//2 .. p + K//2`` when the stride
is 1, and ``p*K .. p*K + K-1`` when the stride is K.  Window slots that fall
outside the grid contribute a constant factor: 1 by default (``pad="one"``),
or 0 with ``pad="zero"``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .tensor import iter_configs

__all__ = [
    "ConvSpec", "ConvWeights", "ConvCircuit", "Stage",
    "RacSpec", "RacWeights", "RacCircuit",
    "ProductSpec", "ProductWeights", "ProductCircuit",
    "BudgetExceeded", "DEFAULT_MATERIALIZE_BUDGET",
    "cac_forward", "rac_forward", "materialize", "all_configs",
    "param_count", "total_receptive_field", "total_stride",
    "dependency_trace", "path_counts",
]

DEFAULT_MATERIALIZE_BUDGET = 2 ** 20


class BudgetExceeded(ValueError):
    """An instance is larger than the configured size budget."""

    def __init__(self, what: str, required: int, budget: int, unit: str = "entries"):
        super().__init__(f"{what} needs {required} {unit}, budget is {budget}")
        self.required = required
        self.budget = budget


def _check_config(config, n_sites, m):
    c = tuple(int(s) for s in config)
    if len(c) != n_sites:
        raise ValueError(f"configuration has {len(c)} sites, expected {n_sites}")
    if any(not 0 <= s < m for s in c):
        raise ValueError(f"local states must lie in 0..{m - 1}: {c}")
    return c


def all_configs(n_sites: int, m: int) -> np.ndarray:
    """(m**n_sites, n_sites) array of configurations in lexicographic order."""
    if n_sites == 0:
        return np.zeros((1, 0), dtype=np.intp)
    grids = np.unravel_index(np.arange(m ** n_sites), (m,) * n_sites)
    return np.ascontiguousarray(np.stack(grids, axis=1).astype(np.intp))


# --------------------------------------------------------------------------
# convolutional arithmetic circuits


@dataclass(frozen=True)
class Stage:
    """One spatial stage of a CAC: ``table[p, k]`` is the input position read
    by window slot ``k`` of output position ``p`` (-1 = outside the grid)."""

    kind: str  # "conv", "pool" or "global"
    layer: int  # conv layer number (1-based) or the conv layer it follows
    in_side: int
    out_side: int
    table: np.ndarray = field(repr=False)


def _window_1d(n_in, size, stride, centered):
    n_out = n_in if stride == 1 else -(-n_in // stride)
    lo = -((size - 1) // 2) if centered else 0
    rows = []
    for p in range(n_out):
        start = p * stride + lo
        rows.append([q if 0 <= q < n_in else -1 for q in range(start, start + size)])
    return n_out, np.array(rows, dtype=np.intp).reshape(n_out, size)


def _window_table(n_in, d, size, stride, centered):
    n_out, t1 = _window_1d(n_in, size, stride, centered)
    if d == 1:
        return n_out, t1
    # 2D: slot k = ky*size + kx, positions row-major
    rows = []
    for py in range(n_out):
        for px in range(n_out):
            row = []
            for ky in range(size):
                for kx in range(size):
                    y, x = t1[py, ky], t1[px, kx]
                    row.append(y * n_in + x if y >= 0 and x >= 0 else -1)
            rows.append(row)
    return n_out, np.array(rows, dtype=np.intp)


@dataclass(frozen=True)
class ConvSpec:
    """Architecture of a convolutional arithmetic circuit.

    ``r`` lists the channel widths r_0..r_L; r_0 is the input width and must
    equal ``M``.  ``n_sites`` is N (the grid is N**(1/d) on a side).
    """

    n_sites: int
    M: int
    L: int
    K: int
    r: tuple[int, ...]
    S: int = 1
    P: int = 1
    d: int = 1
    pad: str = "one"

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(int(x) for x in self.r))
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if self.K < 1 or self.L < 0 or self.M < 1:
            raise ValueError("K, M must be >= 1 and L >= 0")
        if self.S not in (1, self.K):
            raise ValueError(f"stride must be 1 or K={self.K}, got {self.S}")
        if self.P not in (1, 2):
            raise ValueError(f"pooling size must be 1 or 2, got {self.P}")
        if len(self.r) != self.L + 1 or min(self.r) < 1:
            raise ValueError(f"need L+1={self.L + 1} positive widths, got {self.r}")
        if self.r[0] != self.M:
            raise ValueError(f"input width r_0={self.r[0]} must equal M={self.M}")
        if self.pad not in ("one", "zero"):
            raise ValueError("pad must be 'one' or 'zero'")
        if round(self.side ** self.d) != self.n_sites:
            raise ValueError(f"N={self.n_sites} is not a {self.d}-dimensional square grid")

    @property
    def side(self) -> int:
        return round(self.n_sites ** (1.0 / self.d))

    @property
    def overlapping(self) -> bool:
        return self.S == 1 and self.K > 1

    @property
    def window(self) -> int:
        return self.K ** self.d

    @property
    def pad_value(self) -> float:
        return 1.0 if self.pad == "one" else 0.0

    def stages(self) -> list[Stage]:
        out, side = [], self.side
        centered = self.S == 1
        for l in range(1, self.L + 1):
            if l > 1 and self.P == 2:
                n, t = _window_table(side, self.d, 2, 2, centered=False)
                out.append(Stage("pool", l - 1, side, n, t))
                side = n
            n, t = _window_table(side, self.d, self.K, self.S, centered)
            out.append(Stage("conv", l, side, n, t))
            side = n
        n_pos = side ** self.d
        out.append(Stage("global", self.L, side, 1, np.arange(n_pos, dtype=np.intp)[None, :]))
        return out

    def summary(self) -> dict:
        return dict(family="cac", d=self.d, N=self.n_sites, alpha=self.side, M=self.M,
                    K=self.K, S=self.S, P=self.P, L=self.L, R=max(self.r))


@dataclass(frozen=True)
class ConvWeights:
    """``layers[l-1]`` has shape (K**d, r_l, r_{l-1}); ``head`` has shape (r_L,)."""

    layers: tuple[np.ndarray, ...]
    head: np.ndarray

    @classmethod
    def random(cls, spec: ConvSpec, rng: np.random.Generator) -> "ConvWeights":
        layers = tuple(
            rng.standard_normal((spec.window, spec.r[l], spec.r[l - 1]))
            for l in range(1, spec.L + 1)
        )
        return cls(layers, rng.standard_normal(spec.r[-1]))

    @classmethod
    def identity(cls, spec: ConvSpec) -> "ConvWeights":
        if len(set(spec.r)) != 1:
            raise ValueError("identity weights need constant widths")
        eye = np.eye(spec.r[0])
        return cls(tuple(np.stack([eye] * spec.window) for _ in range(spec.L)),
                   np.ones(spec.r[0]))

    def check(self, spec: ConvSpec) -> None:
        if len(self.layers) != spec.L:
            raise ValueError(f"expected {spec.L} layers of weights, got {len(self.layers)}")
        for l, w in enumerate(self.layers, start=1):
            want = (spec.window, spec.r[l], spec.r[l - 1])
            if np.shape(w) != want:
                raise ValueError(f"layer {l} weights have shape {np.shape(w)}, expected {want}")
        if np.shape(self.head) != (spec.r[-1],):
            raise ValueError(f"head has shape {np.shape(self.head)}, expected ({spec.r[-1]},)")


def cac_forward(spec: ConvSpec, w: ConvWeights, config: Sequence[int]) -> float:
    """Output of the circuit on the one-hot input ``config``."""
    w.check(spec)
    c = _check_config(config, spec.n_sites, spec.M)
    eye = np.eye(spec.M)
    x = [eye[s] for s in c]
    pad = spec.pad_value
    for st in spec.stages():
        if st.kind == "global":
            break
        out = []
        for row in st.table:
            width = spec.r[st.layer]
            v = np.ones(width)
            for k, src in enumerate(row):
                if src < 0:
                    v = v * pad
                elif st.kind == "conv":
                    v = v * (w.layers[st.layer - 1][k] @ x[src])
                else:
                    v = v * x[src]
            out.append(v)
        x = out
    pooled = np.prod(np.stack(x), axis=0)
    return float(w.head @ pooled)


class ConvCircuit:
    """Callable amplitude function of a CAC with a batched ``amplitudes``."""

    def __init__(self, spec: ConvSpec, weights: ConvWeights):
        weights.check(spec)
        self.spec, self.weights = spec, weights
        self.n_sites, self.M = spec.n_sites, spec.M

    def __call__(self, config) -> float:
        return cac_forward(self.spec, self.weights, config)

    def amplitudes(self, configs: np.ndarray | None = None) -> np.ndarray:
        spec, w = self.spec, self.weights
        if configs is None:
            configs = all_configs(spec.n_sites, spec.M)
        pad = spec.pad_value
        x = None
        for st in spec.stages():
            if st.kind == "global":
                break
            if st.kind == "pool":
                x = kernels.pool(x, st.table, pad)
            elif x is None:
                x = kernels.conv_onehot(configs, w.layers[0], st.table, pad)
            else:
                x = kernels.conv(x, w.layers[st.layer - 1], st.table, pad)
        if x is None:  # no conv layers: one-hot inputs go straight to pooling
            x = np.eye(spec.M)[configs]
        return np.prod(x, axis=1) @ w.head


def param_count(spec: ConvSpec) -> int:
    """Number of weights: sum_l K**d * r_l * r_{l-1} plus the head."""
    return sum(spec.window * spec.r[l] * spec.r[l - 1] for l in range(1, spec.L + 1)) + spec.r[-1]


def _rf_stride(spec: ConvSpec, l: int):
    if not 1 <= l <= spec.L:
        raise ValueError(f"layer must be in 1..{spec.L}, got {l}")
    rf, ts = 1, 1
    for layer in range(1, l + 1):
        if layer > 1 and spec.P == 2:
            rf, ts = rf + (2 - 1) * ts, ts * 2
        rf, ts = rf + (spec.K - 1) * ts, ts * spec.S
    return rf, ts


def total_receptive_field(spec: ConvSpec, l: int) -> int:
    """Linear extent of input sites one layer-``l`` output depends on."""
    return _rf_stride(spec, l)[0]


def total_stride(spec: ConvSpec, l: int) -> int:
    """Input-site distance between neighbouring layer-``l`` outputs."""
    return _rf_stride(spec, l)[1]


def dependency_trace(spec: ConvSpec, l: int, position: int = 0) -> set[int]:
    """Input cells reachable from output ``position`` of conv layer ``l``.

    Brute-force walk on an unbounded 1D lattice (no edges), used as an
    independent check of :func:`total_receptive_field`.
    """
    layers = []
    for layer in range(1, l + 1):
        if layer > 1 and spec.P == 2:
            layers.append((2, 2, 0))
        lo = -((spec.K - 1) // 2) if spec.S == 1 else 0
        layers.append((spec.K, spec.S, lo))
    cells = {position}
    for size, stride, lo in reversed(layers):
        cells = {q * stride + lo + k for q in cells for k in range(size)}
    return cells


def path_counts(spec: ConvSpec) -> np.ndarray:
    """Number of dataflow paths from the output to each input site."""
    stages = spec.stages()
    counts = np.ones(stages[-1].table.shape[1], dtype=np.int64)
    for st in reversed(stages[:-1]):
        below = np.zeros(st.in_side ** spec.d, dtype=np.int64)
        for p, row in enumerate(st.table):
            for src in row:
                if src >= 0:
                    below[src] += counts[p]
        counts = below
    return counts


# --------------------------------------------------------------------------
# recurrent arithmetic circuits


@dataclass(frozen=True)
class RacSpec:
    """Stacked RNN with multiplicative integration h_t = (W^H h_{t-1}) * (W^I x_t)."""

    n_sites: int
    M: int
    R: int
    L: int = 1

    def __post_init__(self):
        if self.n_sites < 1 or self.M < 1 or self.R < 1 or self.L < 1:
            raise ValueError("N, M, R, L must all be >= 1")

    def summary(self) -> dict:
        return dict(family="rac", d=1, N=self.n_sites, alpha=self.n_sites, M=self.M,
                    K=0, S=0, P=0, L=self.L, R=self.R)


@dataclass(frozen=True)
class RacWeights:
    hidden: tuple[np.ndarray, ...]  # L matrices R x R
    inputs: tuple[np.ndarray, ...]  # R x M for layer 1, R x R above
    out: np.ndarray  # (R,)
    h0: tuple[np.ndarray, ...]  # L vectors of length R

    @classmethod
    def random(cls, spec: RacSpec, rng: np.random.Generator,
               h0: Sequence[np.ndarray] | None = None) -> "RacWeights":
        hidden, inputs = [], []
        for l in range(spec.L):
            hidden.append(rng.standard_normal((spec.R, spec.R)))
            inputs.append(rng.standard_normal((spec.R, spec.M if l == 0 else spec.R)))
        out = rng.standard_normal(spec.R)
        if h0 is None:
            h0 = [np.ones(spec.R)] * spec.L
        return cls(tuple(hidden), tuple(inputs), out, tuple(np.asarray(h, float) for h in h0))

    def check(self, spec: RacSpec) -> None:
        if not (len(self.hidden) == len(self.inputs) == len(self.h0) == spec.L):
            raise ValueError(f"expected {spec.L} layers of weights")
        for l in range(spec.L):
            if np.shape(self.hidden[l]) != (spec.R, spec.R):
                raise ValueError(f"W^H layer {l + 1} must be {spec.R}x{spec.R}")
            want = (spec.R, spec.M if l == 0 else spec.R)
            if np.shape(self.inputs[l]) != want:
                raise ValueError(f"W^I layer {l + 1} has shape {np.shape(self.inputs[l])}, expected {want}")
            if np.shape(self.h0[l]) != (spec.R,):
                raise ValueError(f"h0 layer {l + 1} must have length {spec.R}")
        if np.shape(self.out) != (spec.R,):
            raise ValueError(f"W^O must have length {spec.R}")


def rac_forward(spec: RacSpec, w: RacWeights, config: Sequence[int]) -> float:
    """Output of the RAC on the one-hot sequence ``config``."""
    w.check(spec)
    c = _check_config(config, spec.n_sites, spec.M)
    h = [np.array(v, dtype=np.float64) for v in w.h0]
    eye = np.eye(spec.M)
    for s in c:
        x = eye[s]
        for l in range(spec.L):
            h[l] = (w.hidden[l] @ h[l]) * (w.inputs[l] @ x)
            x = h[l]
    return float(w.out @ h[-1])


class RacCircuit:
    def __init__(self, spec: RacSpec, weights: RacWeights):
        weights.check(spec)
        self.spec, self.weights = spec, weights
        self.n_sites, self.M = spec.n_sites, spec.M

    def __call__(self, config) -> float:
        return rac_forward(self.spec, self.weights, config)

    def amplitudes(self) -> np.ndarray:
        w = self.weights
        return kernels.rac_amplitudes(list(w.hidden), list(w.inputs), list(w.h0), w.out,
                                      self.spec.n_sites, self.spec.M)


# --------------------------------------------------------------------------
# product states (no coupling between sites)


@dataclass(frozen=True)
class ProductSpec:
    n_sites: int
    M: int

    def summary(self) -> dict:
        return dict(family="product", d=1, N=self.n_sites, alpha=self.n_sites, M=self.M,
                    K=0, S=0, P=0, L=0, R=1)


@dataclass(frozen=True)
class ProductWeights:
    site_vectors: tuple[np.ndarray, ...]

    @classmethod
    def random(cls, spec: ProductSpec, rng: np.random.Generator) -> "ProductWeights":
        return cls(tuple(rng.standard_normal(spec.M) for _ in range(spec.n_sites)))


class ProductCircuit:
    def __init__(self, spec: ProductSpec, weights: ProductWeights):
        self.spec, self.weights = spec, weights
        self.n_sites, self.M = spec.n_sites, spec.M

    def __call__(self, config) -> float:
        c = _check_config(config, self.n_sites, self.M)
        return float(np.prod([v[s] for v, s in zip(self.weights.site_vectors, c)]))

    def amplitudes(self) -> np.ndarray:
        out = np.ones(1)
        for v in self.weights.site_vectors:
            out = np.outer(out, v).ravel()
        return out


# --------------------------------------------------------------------------


def materialize(forward: Callable[[tuple[int, ...]], float], n_sites: int, m: int,
                budget: int = DEFAULT_MATERIALIZE_BUDGET, workers: int = 1) -> np.ndarray:
    """Evaluate ``forward`` on every configuration into an order-N tensor.

    Circuit objects exposing ``amplitudes()`` are evaluated in one batch;
    other callables are called per configuration (optionally on a thread
    pool, assembled in configuration order).
    """
    required = m ** n_sites
    if required > budget:
        raise BudgetExceeded(f"materializing {n_sites} sites of dimension {m}", required, budget)
    shape = (m,) * n_sites
    batched = getattr(forward, "amplitudes", None)
    if batched is not None:
        return np.ascontiguousarray(batched(), dtype=np.float64).reshape(shape)
    configs = list(iter_configs(n_sites, m))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            values = list(ex.map(forward, configs))
    else:
        values = [forward(c) for c in configs]
    return np.asarray(values, dtype=np.float64).reshape(shape)
