import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tncircuits.circuits import ConvCircuit, RacCircuit, materialize
from tncircuits.formats import (
    FormatError, circuit_from_config, dumps_tensor, load_structured, load_tn, loads_tensor,
    save_tensor, save_tn, tn_from_dict, tn_to_dict, weights_to_mapping,
)
from tncircuits.network import TensorNetwork, contract_network
from tncircuits.builders import tree_tn_from_cac

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
shapes = st.lists(st.integers(1, 3), min_size=0, max_size=4).map(tuple)


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)))
def test_dense_tensor_round_trip_is_exact(t):
    back = loads_tensor(dumps_tensor(t))
    assert back.shape == t.shape
    assert np.array_equal(back, t)


def test_dense_tensor_layout():
    text = dumps_tensor(np.arange(6.0).reshape(2, 3))
    assert text.splitlines()[:3] == ["dense-tensor 1", "order 2", "shape 2 3"]
    assert text.splitlines()[3:5] == ["0", "1"]


@pytest.mark.parametrize("text", [
    "", "tensor\norder 1\nshape 2\n1\n2\n", "dense-tensor 1\norder 2\nshape 2\n1\n2\n",
    "dense-tensor 1\norder 1\nshape 3\n1\n2\n", "dense-tensor 1\norder 1\nshape 2\n1\nx\n",
    "dense-tensor 1\nrank 1\nshape 2\n1\n2\n",
])
def test_dense_tensor_rejects_malformed(text):
    with pytest.raises(FormatError):
        loads_tensor(text)


def _small_tn(rng):
    return TensorNetwork([(rng.normal(size=(2, 3)), ["a", "b"]), (rng.normal(size=(3, 2)), None)],
                         [((0, 1), (1, 0))], [(0, 0, 0), (1, 1, 1)])


def test_tn_json_round_trip(tmp_path, rng):
    tn = _small_tn(rng)
    save_tn(tmp_path / "n.json", tn)
    back = load_tn(tmp_path / "n.json")
    assert np.array_equal(contract_network(back), contract_network(tn))
    assert back.external_legs == tn.external_legs
    assert json.loads((tmp_path / "n.json").read_text())["format"] == "tn-graph/1"


def test_tn_file_references_resolve_relative_to_the_description(tmp_path, rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    (tmp_path / "sub").mkdir()
    save_tensor(tmp_path / "sub" / "b.tensor", b)
    d = {"format": "tn-graph/1",
         "nodes": [{"shape": [2, 3], "data": a.ravel().tolist()}, {"file": "sub/b.tensor"}],
         "bonds": [[[0, 1], [1, 0]]],
         "external": [{"node": 0, "leg": 0, "label": 0}, {"node": 1, "leg": 1, "label": 1}]}
    (tmp_path / "n.json").write_text(json.dumps(d))
    np.testing.assert_allclose(contract_network(load_tn(tmp_path / "n.json")), a @ b, rtol=1e-14)


def test_tn_errors(tmp_path, rng):
    good = tn_to_dict(_small_tn(rng))
    with pytest.raises(FormatError, match="format"):
        tn_from_dict({**good, "format": "other"})
    with pytest.raises(FormatError, match="does not exist"):
        tn_from_dict({**good, "nodes": [{"file": "missing.tensor"}, good["nodes"][1]]}, tmp_path)
    with pytest.raises(FormatError, match="invalid network"):
        tn_from_dict({**good, "bonds": [[[0, 0], [1, 0]]]})  # extent 2 vs 3
    with pytest.raises(FormatError):
        tn_from_dict({**good, "nodes": [{"shape": [2, 2], "data": [1, 2, 3]}, good["nodes"][1]]})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_tn(tmp_path / "bad.json")


def test_load_structured(tmp_path):
    (tmp_path / "c.yaml").write_text("kind: rac\nN: 3\n")
    (tmp_path / "c.json").write_text('{"kind": "rac", "N": 3}')
    assert load_structured(tmp_path / "c.yaml") == load_structured(tmp_path / "c.json")
    with pytest.raises(FormatError, match="does not exist"):
        load_structured(tmp_path / "none.yaml")
    (tmp_path / "l.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(FormatError, match="mapping"):
        load_structured(tmp_path / "l.yaml")


CAC = {"kind": "cac", "N": 4, "M": 2, "K": 2, "S": 2, "L": 2, "r": [2, 2, 2]}
RAC = {"kind": "rac", "N": 3, "M": 2, "R": 2, "L": 2}


def test_seeded_configs_are_reproducible():
    a = circuit_from_config({**CAC, "seed": 7})
    b = circuit_from_config(CAC, seed=7)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights.layers, b.weights.layers))
    assert a.source == "seed 7"


def test_seed_or_weights_required():
    with pytest.raises(FormatError, match="seed"):
        circuit_from_config(CAC)


@pytest.mark.parametrize("cfg", [CAC, RAC])
def test_explicit_weights_round_trip(cfg):
    inst = circuit_from_config(cfg, seed=3)
    again = circuit_from_config({**cfg, "weights": weights_to_mapping(inst.weights)})
    assert again.source == "config"
    cls = ConvCircuit if cfg["kind"] == "cac" else RacCircuit
    n, m = inst.spec.n_sites, inst.spec.M
    assert np.array_equal(materialize(cls(inst.spec, inst.weights), n, m),
                          materialize(cls(again.spec, again.weights), n, m))


def test_config_errors():
    with pytest.raises(FormatError, match="kind"):
        circuit_from_config({"kind": "lstm", "seed": 1})
    with pytest.raises(FormatError, match="missing"):
        circuit_from_config({"kind": "cac", "N": 4, "seed": 1})
    with pytest.raises(FormatError, match="invalid"):
        circuit_from_config({**CAC, "r": [2, 2], "seed": 1})
    bad = weights_to_mapping(circuit_from_config(CAC, seed=1).weights)
    bad["head"] = {"shape": [3], "data": [1.0, 2.0, 3.0]}
    with pytest.raises(FormatError, match="do not fit"):
        circuit_from_config({**CAC, "weights": bad})


def test_built_network_survives_serialization(tmp_path):
    inst = circuit_from_config(CAC, seed=5)
    built = tree_tn_from_cac(inst.spec, inst.weights)
    save_tn(tmp_path / "t.json", built.tn)
    assert np.array_equal(contract_network(load_tn(tmp_path / "t.json")), built.raw_tensor())
