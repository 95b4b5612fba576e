"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is timed on both backends (best of ``--repeat`` runs) and the
results are checked to agree to 1e-12 relative before the timings are shown.
"""

import argparse
import time

import numpy as np

from tncircuits import kernels
from tncircuits.circuits import ConvSpec, ConvWeights, RacSpec, RacWeights, all_configs


def run_cac(k, spec, w, configs, stages):
    """The batched evaluation of ``ConvCircuit.amplitudes`` on backend ``k``."""
    x, pad = None, spec.pad_value
    for st in stages:
        if st.kind == "global":
            break
        if st.kind == "pool":
            x = k.pool(x, st.table, pad)
        elif x is None:
            x = k.conv_onehot(configs, w.layers[0], st.table, pad)
        else:
            x = k.conv(x, w.layers[st.layer - 1], st.table, pad)
    return np.prod(x, axis=1) @ w.head


def run_rac(k, spec, w):
    return k.rac_amplitudes(list(w.hidden), list(w.inputs), list(w.h0), w.out, spec.n_sites, spec.M)


def run_dup(k, t, groups, out_shape):
    return k.dup_gather(t.ravel(), t.shape, groups, out_shape)


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": kernels.load_backend("python")}
    try:
        backends["cython"] = kernels.load_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)

    cases = []
    spec = ConvSpec(14, 2, 3, 2, (2, 2, 2, 2), S=1)
    w = ConvWeights.random(spec, rng)
    configs, stages = all_configs(spec.n_sites, spec.M), spec.stages()
    cases.append(("cac materialize N=14 K=2 L=3", lambda k: run_cac(k, spec, w, configs, stages)))
    rspec = RacSpec(16, 2, 3, 2)
    rw = RacWeights.random(rspec, rng)
    cases.append(("rac materialize N=16 R=3 L=2", lambda k: run_rac(k, rspec, rw)))
    t = rng.standard_normal((3,) * 12)
    groups = np.repeat(np.arange(6), 2)
    cases.append(("dup 3^12 -> 3^6", lambda k: run_dup(k, t, groups, (3,) * 6)))

    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases:
        res = {b: best_of(lambda: fn(k), args.repeat) for b, k in backends.items()}
        ref = res["python"][1]
        for b, (_, out) in res.items():
            if not np.allclose(out, ref, rtol=1e-12, atol=1e-300):
                raise SystemExit(f"{name}: backend {b} disagrees with the numpy fallback")
        line = f"{name:34s}" + "".join(f"{res[b][0] * 1e3:10.2f}ms" for b in backends)
        if "cython" in res:
            line += f"  {res['python'][0] / res['cython'][0]:8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
