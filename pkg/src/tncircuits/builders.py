"""Exact tensor-network equivalents of the arithmetic circuits.

Every builder walks the circuit's dataflow graph from the output down to the
inputs.  A vector that the circuit computes once and feeds to several
consumers cannot be shared inside a tensor network, so each consumer gets its
own freshly built copy of the producing sub-branch.  The inputs reached by
those copies become external legs carrying the site number as label; a site
reached along several paths therefore appears on several raw legs.  When no
vector is consumed twice (stride K convolutions, single-layer RNNs) this
produces the plain Tree TN / MPS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import BudgetExceeded, ConvSpec, ConvWeights, RacSpec, RacWeights, path_counts
from .network import (
    DupGroups, NetworkBuilder, TensorNetwork, contract_dup, contract_network, dup, dup_via_deltas,
)
from .tensor import delta_tensor

__all__ = [
    "BuiltNetwork",
    "DEFAULT_LEG_BUDGET",
    "tree_tn_from_cac",
    "recursive_tree_from_cac",
    "mps_from_rac",
    "recursive_mps_from_rac",
    "rac_leg_count",
    "conv_node_tensor",
    "rac_node_tensor",
]

DEFAULT_LEG_BUDGET = 64


@dataclass(frozen=True)
class BuiltNetwork:
    tn: TensorNetwork
    dup_groups: DupGroups
    provenance: dict = field(default_factory=dict)

    @property
    def n_raw_legs(self) -> int:
        return len(self.tn.external_legs)

    def raw_tensor(self) -> np.ndarray:
        """Contraction with one index per raw (possibly duplicated) leg."""
        return contract_network(self.tn)

    def tensor(self) -> np.ndarray:
        """The order-N tensor, contracting duplicated legs as hyperedges."""
        return contract_dup(self.tn)

    def dup_of_raw(self) -> np.ndarray:
        """The order-N tensor as ``dup`` of the full raw contraction."""
        return dup(self.raw_tensor(), self.dup_groups)

    def dup_of_raw_via_deltas(self) -> np.ndarray:
        return dup_via_deltas(self.raw_tensor(), self.dup_groups)


def _finish(nb: NetworkBuilder, n_sites: int, provenance: dict) -> BuiltNetwork:
    tn = nb.build(sort_external=True)
    groups = tn.dup_groups()
    if groups.unique_order != tuple(range(n_sites)):
        raise AssertionError(f"built network exposes sites {groups.unique_order}")
    return BuiltNetwork(tn, groups, provenance)


# --------------------------------------------------------------------------
# convolutional circuits


def conv_node_tensor(mats) -> np.ndarray:
    """a[i, j_1, ..., j_m] = prod_k mats[k][i, j_k]."""
    r_out = mats[0].shape[0] if mats else None
    t = None
    for w in mats:
        if t is None:
            t = np.array(w, dtype=np.float64)
            continue
        t = t[..., None] * w.reshape((r_out,) + (1,) * (t.ndim - 1) + (w.shape[1],))
    return t


def _build_cac(spec: ConvSpec, w: ConvWeights, budget: int, name: str) -> BuiltNetwork:
    w.check(spec)
    n_raw = int(path_counts(spec).sum())
    if n_raw > budget:
        raise BudgetExceeded(f"{name} for N={spec.n_sites}, K={spec.K}, L={spec.L}", n_raw, budget,
                             "raw external legs")
    stages = spec.stages()
    zero_pad = spec.pad == "zero"
    nb = NetworkBuilder()

    def feed(node, leg, si, src):
        """Connect ``leg`` to output ``src`` of stage ``si`` (-1: the input)."""
        if si < 0:
            nb.expose(node, leg, int(src))
        else:
            child = value(si, src)
            nb.bond(child, 0, node, leg)

    def pad_vector(node, leg, dim):
        z = nb.add(np.zeros(dim), ["pad"])
        nb.bond(z, 0, node, leg)

    def value(si, pos) -> int:
        """Build a fresh node computing output ``pos`` of stage ``si``; its
        leg 0 carries the result."""
        st = stages[si]
        row = st.table[pos]
        kept = [k for k, src in enumerate(row) if src >= 0 or zero_pad]
        if st.kind == "conv":
            W = w.layers[st.layer - 1]
            r_out, r_in = W.shape[1], W.shape[2]
            t = conv_node_tensor([W[k] for k in kept]) if kept else np.ones(r_out)
        else:
            r_out = r_in = spec.r[st.layer]
            t = delta_tensor(len(kept) + 1, r_out)
        node = nb.add(t, ["out"] + [f"k{k}" for k in kept])
        for leg, k in enumerate(kept, start=1):
            if row[k] < 0:
                pad_vector(node, leg, r_in)
            else:
                feed(node, leg, si - 1, row[k])
        return node

    last = len(stages) - 2  # stage feeding the global pooling
    positions = stages[-1].table[0]
    head = nb.add(w.head, ["head"])
    if len(positions) == 1:
        feed(head, 0, last, positions[0])
    else:
        width = spec.r[-1]
        g = nb.add(delta_tensor(len(positions) + 1, width),
                   ["out"] + [f"p{p}" for p in positions])
        nb.bond(head, 0, g, 0)
        for leg, p in enumerate(positions, start=1):
            feed(g, leg, last, p)
    return _finish(nb, spec.n_sites, {"builder": name, **spec.summary()})


def tree_tn_from_cac(spec: ConvSpec, w: ConvWeights,
                     budget: int = DEFAULT_LEG_BUDGET) -> BuiltNetwork:
    """Tree TN of a non-overlapping CAC (stride K, no pooling layers).

    Level-l nodes carry ``a[i, j_1..j_{K^d}] = prod_k W^{(k,l)}[i, j_k]``; the
    grid side must be exactly ``K**L``.
    """
    if spec.S != spec.K or spec.P != 1:
        raise ValueError("tree TN needs a non-overlapping CAC (S == K, P == 1)")
    if spec.L < 1 or spec.side != spec.K ** spec.L:
        raise ValueError(
            f"grid side {spec.side} is not K**L = {spec.K}**{spec.L}; not tree-compatible"
        )
    return _build_cac(spec, w, budget, "tree_tn_from_cac")


def recursive_tree_from_cac(spec: ConvSpec, w: ConvWeights,
                            budget: int = DEFAULT_LEG_BUDGET) -> BuiltNetwork:
    """Recursive-Tree TN of an overlapping (stride 1) CAC."""
    if spec.S != 1:
        raise ValueError("recursive tree needs stride S == 1")
    return _build_cac(spec, w, budget, "recursive_tree_from_cac")


# --------------------------------------------------------------------------
# recurrent circuits


def rac_node_tensor(hidden: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """a[i, j, k] = hidden[i, j] * inputs[i, k]."""
    return hidden[:, :, None] * inputs[:, None, :]


def rac_leg_count(n_sites: int, depth: int) -> int:
    """Raw external legs of the (recursive) MPS: layer l at step t needs its
    own copy of layer l at t-1 and of layer l-1 at t."""
    counts = [1] * (n_sites + 1)  # layer 0: one input per step
    counts[0] = 0
    for _ in range(depth):
        row = [0] * (n_sites + 1)
        for t in range(1, n_sites + 1):
            row[t] = row[t - 1] + counts[t]
        counts = row
    return counts[n_sites]


def _build_rac(spec: RacSpec, w: RacWeights, budget: int, name: str) -> BuiltNetwork:
    w.check(spec)
    n_raw = rac_leg_count(spec.n_sites, spec.L)
    if n_raw > budget:
        raise BudgetExceeded(f"{name} for N={spec.n_sites}, L={spec.L}", n_raw, budget,
                             "raw external legs")
    cores = [rac_node_tensor(w.hidden[l], w.inputs[l]) for l in range(spec.L)]
    nb = NetworkBuilder()

    def value(layer, t) -> int:
        """Fresh node for the layer-``layer`` hidden state after step ``t``."""
        if t == 0:
            return nb.add(w.h0[layer - 1], [f"h0_{layer}"])
        node = nb.add(cores[layer - 1], ["out", "hidden", "input"])
        nb.bond(value(layer, t - 1), 0, node, 1)
        if layer == 1:
            nb.expose(node, 2, t - 1)
        else:
            nb.bond(value(layer - 1, t), 0, node, 2)
        return node

    out = nb.add(w.out, ["W_O"])
    nb.bond(value(spec.L, spec.n_sites), 0, out, 0)
    return _finish(nb, spec.n_sites, {"builder": name, **spec.summary()})


def mps_from_rac(spec: RacSpec, w: RacWeights, budget: int = DEFAULT_LEG_BUDGET) -> BuiltNetwork:
    """Translationally invariant MPS of a shallow RAC, capped by h0 and W^O."""
    if spec.L != 1:
        raise ValueError("mps_from_rac needs a single-layer RAC")
    return _build_rac(spec, w, budget, "mps_from_rac")


def recursive_mps_from_rac(spec: RacSpec, w: RacWeights,
                           budget: int = DEFAULT_LEG_BUDGET) -> BuiltNetwork:
    """Recursive MPS of a deep RAC: every hidden state a layer above consumes
    is rebuilt from its own chain of inputs."""
    if spec.L < 2:
        raise ValueError("recursive_mps_from_rac needs depth L >= 2")
    return _build_rac(spec, w, budget, "recursive_mps_from_rac")
