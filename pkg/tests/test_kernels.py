import os
import subprocess
import sys

import numpy as np
import pytest

from tncircuits import kernels
from tncircuits.circuits import ConvSpec, ConvWeights, RacSpec, RacWeights, all_configs

py = kernels.load_backend("python")
try:
    cy = kernels.load_backend("cython")
except ImportError:  # extension not built
    cy = None

needs_cython = pytest.mark.skipif(cy is None, reason="compiled extension not built")

CONV_SPECS = [
    ConvSpec(8, 2, 3, 2, (2, 3, 2, 2), S=2),
    ConvSpec(8, 2, 3, 2, (2, 2, 2, 2), S=1),
    ConvSpec(9, 3, 2, 3, (3, 2, 2), S=1, P=2),
    ConvSpec(6, 2, 2, 2, (2, 2, 3), S=1, pad="zero"),
]


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


def test_active_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_cython
@pytest.mark.parametrize("spec", CONV_SPECS, ids=str)
def test_conv_kernels_agree(spec, rng):
    w = ConvWeights.random(spec, rng)
    configs = all_configs(spec.n_sites, spec.M)
    xs = {}
    for name, mod in (("py", py), ("cy", cy)):
        x = None
        for st in spec.stages():
            if st.kind == "global":
                break
            if st.kind == "pool":
                x = mod.pool(x, st.table, spec.pad_value)
            elif x is None:
                x = mod.conv_onehot(configs, w.layers[0], st.table, spec.pad_value)
            else:
                x = mod.conv(x, w.layers[st.layer - 1], st.table, spec.pad_value)
        xs[name] = x
    np.testing.assert_allclose(xs["cy"], xs["py"], rtol=1e-12, atol=0)


@needs_cython
@pytest.mark.parametrize("n,m,r,depth", [(1, 2, 2, 1), (6, 2, 3, 1), (5, 3, 2, 3)])
def test_rac_kernel_agrees(n, m, r, depth, rng):
    spec = RacSpec(n, m, r, depth)
    w = RacWeights.random(spec, rng)
    args = (list(w.hidden), list(w.inputs), list(w.h0), w.out, n, m)
    np.testing.assert_allclose(cy.rac_amplitudes(*args), py.rac_amplitudes(*args),
                               rtol=1e-12, atol=0)


@needs_cython
def test_dup_gather_agrees(rng):
    for _ in range(30):
        order = int(rng.integers(1, 7))
        groups = rng.integers(0, order, size=order)
        _, group_of = np.unique(groups, return_inverse=True)
        m = group_of.max() + 1
        ext = rng.integers(1, 4, size=m)
        raw = ext[group_of]
        flat = rng.normal(size=int(np.prod(raw)))
        a = cy.dup_gather(flat, raw.astype(np.intp), group_of.astype(np.intp), ext.astype(np.intp))
        b = py.dup_gather(flat, raw.astype(np.intp), group_of.astype(np.intp), ext.astype(np.intp))
        assert np.array_equal(a, b)


def test_environment_variable_forces_fallback():
    env = dict(os.environ, TNCIRCUITS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import tncircuits; print(tncircuits.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
