import numpy as np
import pytest
from hypothesis import given, strategies as st

from tncircuits.network import (
    DupGroups, NetworkBuilder, TensorNetwork, attach_dup_deltas, clone_violation,
    contract_dup, contract_network, dup, dup_via_deltas, no_cloning_witness,
)
from tncircuits.tensor import delta_tensor

from conftest import rel_err


# -- random networks ---------------------------------------------------------


@st.composite
def random_network(draw, max_nodes=8, ext_dim=None, labels=None):
    """Connected network: random spanning tree plus extra bonds; each node has
    0-2 external legs (at least one leg overall)."""
    n = draw(st.integers(1, max_nodes))
    seed = draw(st.integers(0, 2**31 - 1))
    r = np.random.default_rng(seed)
    edges = [(int(r.integers(0, i)), i) for i in range(1, n)]
    for _ in range(int(r.integers(0, n))):
        a, b = (int(x) for x in r.choice(n, 2, replace=n < 2))
        if a != b:
            edges.append((a, b))
    legs = [[] for _ in range(n)]
    bonds = []
    for a, b in edges:
        dim = int(r.integers(1, 4))
        la, lb = len(legs[a]), len(legs[b])
        legs[a].append(dim)
        legs[b].append(dim)
        bonds.append(((a, la), (b, lb)))
    ext = []
    for i in range(n):
        for _ in range(int(r.integers(0 if n > 1 else 1, 3))):
            dim = ext_dim or int(r.integers(1, 4))
            ext.append((i, len(legs[i]), len(ext)))
            legs[i].append(dim)
    if not ext:
        ext.append((0, len(legs[0]), 0))
        legs[0].append(ext_dim or 2)
    if labels is not None:
        ext = [(nd, lg, int(r.integers(0, labels))) for nd, lg, _ in ext]
    nodes = [r.standard_normal(tuple(ls)) if ls else r.standard_normal(()) for ls in legs]
    return TensorNetwork(nodes, bonds, ext)


def einsum_oracle(tn):
    """Contraction by a single einsum over all bonds (independent path)."""
    sym, nxt = {}, [0]

    def new():
        nxt[0] += 1
        return nxt[0] - 1

    for a, b in tn.bonds:
        sym[a] = sym[b] = new()
    for n, l, _ in tn.external_legs:
        sym[(n, l)] = new()
    args = []
    for i, t in enumerate(tn.tensors):
        args += [t, [sym[(i, l)] for l in range(t.ndim)]]
    return np.einsum(*args, [sym[(n, l)] for n, l, _ in tn.external_legs], optimize=True)


# -- DupGroups ---------------------------------------------------------------


def test_dup_groups_first_appearance_order():
    g = DupGroups.from_labels([3, 1, 3, 2, 1])
    assert g.groups == ((0, 2), (1, 4), (3,))
    assert g.unique_order == (3, 1, 2)
    assert list(g.group_of()) == [0, 1, 0, 2, 1]
    assert g.n_raw == 5 and not g.is_trivial
    assert DupGroups.singletons(3).is_trivial


def test_dup_groups_validation():
    with pytest.raises(ValueError):
        DupGroups(((0,), (2,)), (0, 1))
    with pytest.raises(ValueError):
        DupGroups(((0, 1),), (0, 1))


# -- TensorNetwork validation ------------------------------------------------


def test_network_rejects_dangling_leg():
    with pytest.raises(ValueError, match="dangling"):
        TensorNetwork([np.ones((2, 2))], [], [(0, 0, "a")])


def test_network_rejects_leg_used_twice():
    with pytest.raises(ValueError, match="used twice"):
        TensorNetwork([np.ones(2), np.ones(2)], [((0, 0), (1, 0))], [(0, 0, "a")])


def test_network_rejects_extent_mismatch():
    with pytest.raises(ValueError, match="extents"):
        TensorNetwork([np.ones(2), np.ones(3)], [((0, 0), (1, 0))], [])
    with pytest.raises(ValueError, match="inconsistent"):
        TensorNetwork([np.ones((2, 3))], [], [(0, 0, "s"), (0, 1, "s")])


def test_network_rejects_disconnected():
    with pytest.raises(ValueError, match="disconnected"):
        TensorNetwork([np.ones(2), np.ones(2)], [], [(0, 0, 0), (1, 0, 1)])


def test_network_tensors_are_frozen_copies():
    a = np.ones(2)
    tn = TensorNetwork([a], [], [(0, 0, 0)])
    a[0] = 5.0
    assert tn.tensors[0][0] == 1.0 or tn.tensors[0] is not a
    with pytest.raises(ValueError):
        tn.tensors[0][0] = 2.0


# -- contract_network --------------------------------------------------------


def test_single_node_returns_tensor(rng):
    t = rng.standard_normal((2, 3))
    tn = TensorNetwork([t], [], [(0, 0, "a"), (0, 1, "b")])
    assert np.array_equal(contract_network(tn), t)


def test_external_leg_order_is_respected(rng):
    t = rng.standard_normal((2, 3))
    tn = TensorNetwork([t], [], [(0, 1, "b"), (0, 0, "a")])
    assert np.array_equal(contract_network(tn), t.T)


def test_two_vectors_inner_product(rng):
    u, v = rng.standard_normal(4), rng.standard_normal(4)
    nb = NetworkBuilder()
    a, b = nb.add(u), nb.add(v)
    nb.bond(a, 0, b, 0)
    assert contract_network(nb.build()) == pytest.approx(u @ v, rel=1e-14)


def test_self_bond_is_a_trace(rng):
    t = rng.standard_normal((3, 3, 2))
    tn = TensorNetwork([t], [((0, 0), (0, 1))], [(0, 2, 0)])
    assert np.allclose(contract_network(tn), np.einsum("iik->k", t))


def test_matrix_chain(rng):
    mats = [rng.standard_normal((3, 3)) for _ in range(4)]
    nb = NetworkBuilder()
    ids = [nb.add(m) for m in mats]
    for a, b in zip(ids, ids[1:]):
        nb.bond(a, 1, b, 0)
    nb.expose(ids[0], 0, "l")
    nb.expose(ids[-1], 1, "r")
    want = mats[0] @ mats[1] @ mats[2] @ mats[3]
    assert rel_err(contract_network(nb.build()), want) < 1e-13


@given(random_network())
def test_contraction_matches_einsum(tn):
    got = contract_network(tn)
    want = einsum_oracle(tn)
    assert got.shape == tn.external_shape
    assert rel_err(got, want) < 1e-10


@given(random_network(), st.integers(0, 2**31 - 1))
def test_contraction_order_invariance(tn, seed):
    base = contract_network(tn)
    for k in range(3):
        other = contract_network(tn, rng=np.random.default_rng(seed + k))
        assert rel_err(other, base) <= 1e-10


@given(random_network())
def test_default_order_is_deterministic(tn):
    assert np.array_equal(contract_network(tn), contract_network(tn))


# -- dup ---------------------------------------------------------------------


def test_dup_examples(rng):
    t = rng.standard_normal((2, 3, 2))
    assert np.array_equal(dup(t, DupGroups.singletons(3)), t)
    assert np.array_equal(dup(np.eye(2), DupGroups.from_labels(["x", "x"])), [1.0, 1.0])
    t4 = rng.standard_normal((2, 3, 2, 3))
    d = dup(t4, DupGroups.from_labels([0, 1, 0, 1]))
    assert np.array_equal(d, np.einsum("ijij->ij", t4))


def test_dup_rejects_mismatched_group():
    with pytest.raises(ValueError, match="mismatched"):
        dup(np.ones((2, 3)), DupGroups.from_labels([0, 0]))
    with pytest.raises(ValueError, match="order"):
        dup(np.ones((2, 2)), DupGroups.singletons(3))


@st.composite
def tensor_with_groups(draw):
    order = draw(st.integers(1, 6))
    labels = draw(st.lists(st.integers(0, order - 1), min_size=order, max_size=order))
    dims = {lab: draw(st.integers(1, 4)) for lab in labels}
    seed = draw(st.integers(0, 2**31 - 1))
    t = np.random.default_rng(seed).standard_normal(tuple(dims[l] for l in labels))
    return t, DupGroups.from_labels(labels)


def _dup_loop(t, g):
    """Oracle: explicit loop over output configurations."""
    out_shape = tuple(t.shape[grp[0]] for grp in g.groups)
    out = np.empty(out_shape)
    gof = g.group_of()
    for idx in np.ndindex(*out_shape):
        out[idx] = t[tuple(idx[gof[p]] for p in range(t.ndim))]
    return out


@given(tensor_with_groups())
def test_dup_index_mapping_matches_loop(tg):
    t, g = tg
    assert np.array_equal(dup(t, g), _dup_loop(t, g))


@given(tensor_with_groups())
def test_dup_via_deltas_equals_index_mapping(tg):
    t, g = tg
    a, b = dup(t, g), dup_via_deltas(t, g)
    assert a.shape == b.shape
    assert np.array_equal(a, b)


# -- attach_dup_deltas / contract_dup -----------------------------------------


def test_attach_singleton_inserts_identity(rng):
    t = rng.standard_normal((2, 3))
    tn = TensorNetwork([t], [], [(0, 0, "a"), (0, 1, "b")])
    att = attach_dup_deltas(tn)
    assert att.n_nodes == 3
    assert np.array_equal(att.tensors[1], delta_tensor(2, 2))
    assert np.array_equal(contract_network(att), t)


@given(random_network(max_nodes=6, ext_dim=2, labels=3))
def test_attach_preserves_labels_and_extents(tn):
    att = attach_dup_deltas(tn)
    g = tn.dup_groups()
    assert att.external_labels == g.unique_order
    ext = dict(zip(tn.external_labels, tn.external_shape))
    assert all(ext[l] == e for l, e in zip(att.external_labels, att.external_shape))


@given(random_network(max_nodes=6, ext_dim=2, labels=3))
def test_attach_contraction_equals_dup(tn):
    want = dup(contract_network(tn), tn.dup_groups())
    assert rel_err(contract_network(attach_dup_deltas(tn)), want) < 1e-12


@given(random_network(max_nodes=7, ext_dim=2, labels=4))
def test_hyperedge_contraction_equals_dup(tn):
    want = dup(contract_network(tn), tn.dup_groups())
    assert rel_err(contract_dup(tn), want) < 1e-10


# -- no-cloning --------------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3, 5])
def test_no_cloning_witness(dim):
    rep = no_cloning_witness(dim)
    assert rep.basis_cloned
    assert rep.counterexample_violation == 1.0
    assert np.array_equal(rep.counterexample_value, np.eye(dim))


def test_clone_violation_on_basis_vector_is_zero():
    assert clone_violation(delta_tensor(3, 2), np.array([1.0, 0.0])) == 0.0


def test_no_cloning_rejects_dim_one():
    with pytest.raises(ValueError, match="trivial"):
        no_cloning_witness(1)
