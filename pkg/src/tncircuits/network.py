"""Tensor networks whose external legs may carry duplicated labels.

A leg is addressed as ``(node, leg)``.  Every leg is either bonded to exactly
one other leg or exposed as an external leg with a label; several external
legs may share a label, which marks them as copies of the same input index.
Contracting such a network yields one index per *raw* external leg; ``dup``
then takes the sub-tensor where copies agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import kernels
from .tensor import as_tensor, delta_tensor

__all__ = [
    "TensorNetwork",
    "NetworkBuilder",
    "DupGroups",
    "contract_network",
    "contract_dup",
    "dup",
    "dup_via_deltas",
    "attach_dup_deltas",
    "NoCloningReport",
    "no_cloning_witness",
    "clone_violation",
]

Leg = tuple[int, int]


@dataclass(frozen=True)
class DupGroups:
    """Raw external positions grouped by label, groups in first-appearance order."""

    groups: tuple[tuple[int, ...], ...]
    unique_order: tuple[Hashable, ...]

    def __post_init__(self):
        flat = sorted(p for g in self.groups for p in g)
        if flat != list(range(len(flat))):
            raise ValueError("groups must cover raw positions 0..n-1 exactly once")
        if any(len(g) == 0 for g in self.groups):
            raise ValueError("empty duplication group")
        if len(self.unique_order) != len(self.groups):
            raise ValueError("one label per group is required")

    @classmethod
    def from_labels(cls, labels: Sequence[Hashable]) -> "DupGroups":
        order: dict[Hashable, list[int]] = {}
        for pos, lab in enumerate(labels):
            order.setdefault(lab, []).append(pos)
        return cls(tuple(tuple(v) for v in order.values()), tuple(order))

    @classmethod
    def singletons(cls, n: int, labels: Sequence[Hashable] | None = None) -> "DupGroups":
        labels = tuple(range(n)) if labels is None else tuple(labels)
        return cls(tuple((i,) for i in range(n)), labels)

    @property
    def n_raw(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def is_trivial(self) -> bool:
        return all(len(g) == 1 for g in self.groups)

    def group_of(self) -> np.ndarray:
        """Map raw position -> group number."""
        out = np.empty(self.n_raw, dtype=np.intp)
        for j, g in enumerate(self.groups):
            out[list(g)] = j
        return out


class TensorNetwork:
    """Immutable graph of dense tensors.

    Parameters
    ----------
    nodes : list of ``(tensor, leg_names)`` pairs; ``leg_names`` may be None.
    bonds : list of ``((node, leg), (node, leg))``.
    external_legs : list of ``(node, leg, label)``.
    """

    def __init__(self, nodes, bonds, external_legs):
        tensors, names = [], []
        for entry in nodes:
            if isinstance(entry, np.ndarray):
                t, nm = entry, None
            else:
                t, nm = entry
            t = as_tensor(t).view()  # freeze a view, not the caller's array
            t.setflags(write=False)
            nm = tuple(f"l{i}" for i in range(t.ndim)) if nm is None else tuple(nm)
            if len(nm) != t.ndim:
                raise ValueError(f"node {len(tensors)}: {len(nm)} leg names for order {t.ndim}")
            tensors.append(t)
            names.append(nm)
        self.tensors: tuple[np.ndarray, ...] = tuple(tensors)
        self.leg_names: tuple[tuple[str, ...], ...] = tuple(names)
        self.bonds: tuple[tuple[Leg, Leg], ...] = tuple(
            ((int(a[0]), int(a[1])), (int(b[0]), int(b[1]))) for a, b in bonds
        )
        self.external_legs: tuple[tuple[int, int, Hashable], ...] = tuple(
            (int(n), int(l), lab) for n, l, lab in external_legs
        )
        self._validate()

    def _extent(self, leg: Leg) -> int:
        n, l = leg
        if not (0 <= n < len(self.tensors)) or not (0 <= l < self.tensors[n].ndim):
            raise ValueError(f"leg {leg} does not exist")
        return self.tensors[n].shape[l]

    def _validate(self):
        if not self.tensors:
            raise ValueError("a tensor network needs at least one node")
        used: dict[Leg, str] = {}

        def claim(leg, what):
            if leg in used:
                raise ValueError(f"leg {leg} used twice ({used[leg]} and {what})")
            used[leg] = what

        for a, b in self.bonds:
            if self._extent(a) != self._extent(b):
                raise ValueError(
                    f"bond {a}-{b} joins extents {self._extent(a)} and {self._extent(b)}"
                )
            claim(a, "bond")
            claim(b, "bond")
        extents: dict[Hashable, int] = {}
        for n, l, lab in self.external_legs:
            e = self._extent((n, l))
            claim((n, l), f"external {lab!r}")
            if extents.setdefault(lab, e) != e:
                raise ValueError(f"external label {lab!r} has inconsistent extents")
        for n, t in enumerate(self.tensors):
            for l in range(t.ndim):
                if (n, l) not in used:
                    raise ValueError(f"dangling leg {(n, l)}")
        # connectivity
        adj: dict[int, set[int]] = {i: set() for i in range(len(self.tensors))}
        for (na, _), (nb, _) in self.bonds:
            adj[na].add(nb)
            adj[nb].add(na)
        seen, stack = {0}, [0]
        while stack:
            for m in adj[stack.pop()] - seen:
                seen.add(m)
                stack.append(m)
        if len(seen) != len(self.tensors):
            raise ValueError(
                f"network is disconnected: node(s) {sorted(set(adj) - seen)} unreachable from node 0"
            )

    @property
    def n_nodes(self) -> int:
        return len(self.tensors)

    @property
    def external_labels(self) -> tuple[Hashable, ...]:
        return tuple(lab for _, _, lab in self.external_legs)

    @property
    def external_shape(self) -> tuple[int, ...]:
        return tuple(self.tensors[n].shape[l] for n, l, _ in self.external_legs)

    def dup_groups(self) -> DupGroups:
        return DupGroups.from_labels(self.external_labels)

    def __repr__(self):
        return (
            f"TensorNetwork(nodes={self.n_nodes}, bonds={len(self.bonds)}, "
            f"external={len(self.external_legs)}, unique={len(set(self.external_labels))})"
        )


class NetworkBuilder:
    """Incremental construction helper; ``build()`` freezes the result."""

    def __init__(self):
        self.nodes: list[tuple[np.ndarray, tuple[str, ...] | None]] = []
        self.bonds: list[tuple[Leg, Leg]] = []
        self.external: list[tuple[int, int, Hashable]] = []

    def add(self, tensor, legs: Sequence[str] | None = None) -> int:
        self.nodes.append((as_tensor(tensor), None if legs is None else tuple(legs)))
        return len(self.nodes) - 1

    def bond(self, a: int, la: int, b: int, lb: int) -> None:
        self.bonds.append(((a, la), (b, lb)))

    def expose(self, node: int, leg: int, label: Hashable) -> None:
        self.external.append((node, leg, label))

    def build(self, sort_external: bool = False) -> TensorNetwork:
        ext = self.external
        if sort_external:
            ext = sorted(ext, key=lambda e: e[2])
        return TensorNetwork(self.nodes, self.bonds, ext)


def _merge(ta, legs_a, tb, legs_b, partner):
    shared_a, shared_b = [], []
    for i, leg in enumerate(legs_a):
        p = partner.get(leg)
        if p is not None and p in legs_b:
            shared_a.append(i)
            shared_b.append(legs_b.index(p))
    out = np.tensordot(ta, tb, axes=(shared_a, shared_b))
    sa, sb = set(shared_a), set(shared_b)
    legs = [lg for i, lg in enumerate(legs_a) if i not in sa] + [
        lg for i, lg in enumerate(legs_b) if i not in sb
    ]
    return out, legs


def _trace_self_bonds(t, legs, partner):
    """Contract bonds that join two legs of the same tensor."""
    while True:
        pos = {lg: i for i, lg in enumerate(legs)}
        hit = next(((i, pos[partner[lg]]) for i, lg in enumerate(legs)
                    if lg in partner and partner[lg] in pos), None)
        if hit is None:
            return t, legs
        i, j = hit
        t = np.trace(t, axis1=i, axis2=j)
        legs = [lg for k, lg in enumerate(legs) if k not in (i, j)]


def contract_network(tn: TensorNetwork, rng: np.random.Generator | None = None) -> np.ndarray:
    """Contract ``tn`` to a dense tensor with one index per raw external leg.

    Pairs are merged greedily by smallest intermediate size, ties broken by
    the lowest node ids.  Passing ``rng`` picks a uniformly random bonded pair
    at every step instead (used to check order independence).
    """
    partner: dict[Leg, Leg] = {}
    for a, b in tn.bonds:
        partner[a] = b
        partner[b] = a
    clusters: dict[int, tuple[np.ndarray, list[Leg]]] = {}
    for n, t in enumerate(tn.tensors):
        clusters[n] = _trace_self_bonds(t, [(n, l) for l in range(t.ndim)], partner)
    owner = {leg: n for n, (_, legs) in clusters.items() for leg in legs}

    def neighbours(cid):
        return {owner[partner[lg]] for lg in clusters[cid][1] if lg in partner} - {cid}

    while len(clusters) > 1:
        candidates = sorted({(min(a, b), max(a, b)) for a in clusters for b in neighbours(a)})
        if rng is not None:
            a, b = candidates[rng.integers(len(candidates))]
        else:
            def result_size(pair):
                a, b = pair
                (ta, la), (tb, lb) = clusters[a], clusters[b]
                sb = set(lb)
                size = 1
                for t, legs, other in ((ta, la, sb), (tb, lb, set(la))):
                    for i, lg in enumerate(legs):
                        if partner.get(lg) not in other:
                            size *= t.shape[i]
                return size, a, b

            _, a, b = min(result_size(p) for p in candidates)
        (ta, la), (tb, lb) = clusters.pop(a), clusters.pop(b)
        t, legs = _merge(ta, la, tb, lb, partner)
        t, legs = _trace_self_bonds(t, legs, partner)
        clusters[a] = (t, legs)
        for lg in legs:
            owner[lg] = a
    (t, legs), = clusters.values()
    pos = {lg: i for i, lg in enumerate(legs)}
    perm = [pos[(n, l)] for n, l, _ in tn.external_legs]
    return np.ascontiguousarray(np.transpose(t, perm)) if perm else np.asarray(t, dtype=np.float64)


def contract_dup(tn: TensorNetwork) -> np.ndarray:
    """``dup(contract_network(tn), tn.dup_groups())`` without the raw tensor.

    External legs sharing a label are treated as one hyperedge that is never
    summed: whenever two clusters both carry it, the merge keeps only their
    diagonal.  Intermediates then never hold more than one index per label.
    Same greedy order rule as :func:`contract_network`.
    """
    partner: dict[Leg, Leg] = {}
    for a, b in tn.bonds:
        partner[a] = b
        partner[b] = a
    ext_label = {(n, l): ("ext", lab) for n, l, lab in tn.external_legs}

    def key(leg):
        return ext_label.get(leg, leg)

    def canon(t, keys):
        """Trace self-bonds and take diagonals of repeated labels."""
        ids: dict = {}
        sub = []
        for k in keys:
            if k[0] == "ext":
                sub.append(ids.setdefault(k, len(ids)))
            else:
                # a bond leg is identified with its partner when both are present
                sub.append(ids.setdefault(frozenset((k, partner[k])), len(ids)))
        counts: dict[int, int] = {}
        for s in sub:
            counts[s] = counts.get(s, 0) + 1
        inv = {v: k for k, v in ids.items()}
        out_sub, out_keys, seen = [], [], set()
        for s, k in zip(sub, keys):
            if s in seen:
                continue
            seen.add(s)
            if isinstance(inv[s], frozenset) and counts[s] == 2:
                continue  # summed self-bond
            out_sub.append(s)
            out_keys.append(k)
        if out_sub == sub:
            return t, list(keys)
        return np.einsum(t, sub, out_sub), out_keys

    clusters: dict[int, tuple[np.ndarray, list]] = {}
    for n, t in enumerate(tn.tensors):
        clusters[n] = canon(t, [key((n, l)) for l in range(t.ndim)])
    owner = {}
    for n, (_, keys) in clusters.items():
        for k in keys:
            if k[0] != "ext":
                owner[k] = n

    def neighbours(cid):
        return {owner[partner[k]] for k in clusters[cid][1] if k[0] != "ext"} - {cid}

    def merged_keys(ka, kb):
        sb = set(kb)
        closed = {k for k in ka if k[0] != "ext" and partner[k] in sb}
        closed |= {partner[k] for k in closed}
        out = [k for k in ka if k not in closed]
        out += [k for k in kb if k not in closed and not (k[0] == "ext" and k in ka)]
        return out

    def shape_of(cid):
        t, keys = clusters[cid]
        return dict(zip(keys, t.shape))

    while len(clusters) > 1:
        candidates = sorted({(min(a, b), max(a, b)) for a in clusters for b in neighbours(a)})

        def result_size(pair):
            a, b = pair
            dims = {**shape_of(a), **shape_of(b)}
            size = 1
            for k in merged_keys(clusters[a][1], clusters[b][1]):
                size *= dims[k]
            return size, a, b

        _, a, b = min(result_size(p) for p in candidates)
        (ta, ka), (tb, kb) = clusters.pop(a), clusters.pop(b)
        ids: dict = {}

        def sid(k):
            if k[0] == "ext":
                return ids.setdefault(k, len(ids))
            return ids.setdefault(frozenset((k, partner[k])), len(ids))

        out = merged_keys(ka, kb)
        t = np.einsum(ta, [sid(k) for k in ka], tb, [sid(k) for k in kb], [sid(k) for k in out])
        clusters[a] = (t, out)
        for k in out:
            if k[0] != "ext":
                owner[k] = a
    (t, keys), = clusters.values()
    g = tn.dup_groups()
    pos = {k: i for i, k in enumerate(keys)}
    perm = [pos[("ext", lab)] for lab in g.unique_order]
    return np.ascontiguousarray(np.transpose(t, perm)) if perm else np.asarray(t, dtype=np.float64)


def _check_groups(shape, g: DupGroups):
    if len(shape) != g.n_raw:
        raise ValueError(f"tensor has order {len(shape)} but groups cover {g.n_raw} positions")
    out = []
    for grp in g.groups:
        ext = {shape[p] for p in grp}
        if len(ext) != 1:
            raise ValueError(f"group {grp} has mismatched extents {sorted(ext)}")
        out.append(ext.pop())
    return tuple(out)


def dup(t: np.ndarray, g: DupGroups) -> np.ndarray:
    """Generalized diagonal: the entries where every group's positions agree.

    Pure index selection; no arithmetic is performed on the values.
    """
    t = as_tensor(t)
    out_shape = _check_groups(t.shape, g)
    flat = kernels.dup_gather(t.ravel(), np.asarray(t.shape, dtype=np.intp),
                              g.group_of(), np.asarray(out_shape, dtype=np.intp))
    return flat.reshape(out_shape)


def attach_dup_deltas(tn: TensorNetwork) -> TensorNetwork:
    """Merge each label's raw legs through one delta tensor.

    A label carried by ``m`` raw legs gets a delta of order ``m + 1``; the
    extra leg becomes the single external leg for that label.
    """
    g = tn.dup_groups()
    nodes = [(t, nm) for t, nm in zip(tn.tensors, tn.leg_names)]
    bonds = list(tn.bonds)
    external = []
    for grp, lab in zip(g.groups, g.unique_order):
        n0, l0, _ = tn.external_legs[grp[0]]
        dim = tn.tensors[n0].shape[l0]
        d = len(nodes)
        nodes.append((delta_tensor(len(grp) + 1, dim),
                      tuple(f"in{k}" for k in range(len(grp))) + ("out",)))
        for k, pos in enumerate(grp):
            n, l, _ = tn.external_legs[pos]
            bonds.append(((n, l), (d, k)))
        external.append((d, len(grp), lab))
    return TensorNetwork(nodes, bonds, external)


def dup_via_deltas(t: np.ndarray, g: DupGroups) -> np.ndarray:
    """``dup`` computed by contracting ``t`` with delta tensors."""
    t = as_tensor(t)
    _check_groups(t.shape, g)
    labels = [None] * g.n_raw
    for grp, lab in zip(g.groups, g.unique_order):
        for p in grp:
            labels[p] = lab
    single = TensorNetwork([t], [], [(0, i, labels[i]) for i in range(t.ndim)])
    return contract_network(attach_dup_deltas(single))


def clone_violation(phi: np.ndarray, v: np.ndarray) -> float:
    """max |sum_i phi_ijk v_i - v_j v_k| for a candidate cloning tensor ``phi``."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.max(np.abs(np.tensordot(v, phi, axes=(0, 0)) - np.outer(v, v))))


@dataclass(frozen=True)
class NoCloningReport:
    dim: int
    basis_cloned: bool
    counterexample_value: np.ndarray
    counterexample_violation: float


def no_cloning_witness(dim: int) -> NoCloningReport:
    """Show that the only tensor cloning every basis vector fails on all-ones.

    Cloning each basis vector pins the candidate down to the order-3 delta
    tensor; applied to the all-ones vector it yields the identity matrix
    rather than the all-ones matrix.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2 (dim 1 is the trivial case where all-ones is a basis vector)")
    phi = delta_tensor(3, dim)
    basis = np.eye(dim)
    cloned = all(
        np.array_equal(np.tensordot(e, phi, axes=(0, 0)), np.outer(e, e)) for e in basis
    )
    ones = np.ones(dim)
    value = np.tensordot(ones, phi, axes=(0, 0))
    return NoCloningReport(dim, bool(cloned), value, clone_violation(phi, ones))
