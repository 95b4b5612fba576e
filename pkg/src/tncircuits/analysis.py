"""Maximal-entanglement estimation, capacity bounds and scaling sweeps.

``max_ee_estimate`` draws independent weight sets and keeps the largest
entanglement entropy and Schmidt rank seen.  Every value it
reports is witnessed by a concrete set of weights, so it is a lower bound on
the maximum over all weights and never an upper bound.

Random search alone is a noisy estimator of that maximum (the entropy of a
generic draw is often far below the best one).  ``refine=k`` additionally
polishes the k best draws with a quasi-Newton ascent on the entropy.  The
result is still a witnessed lower bound.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Sequence

import numpy as np

from .circuits import (
    DEFAULT_MATERIALIZE_BUDGET, BudgetExceeded, ConvCircuit, ConvSpec, ConvWeights,
    ProductCircuit, ProductSpec, ProductWeights, RacCircuit, RacSpec, RacWeights, materialize,
)
from .tensor import Partition, entanglement_entropy, schmidt_rank

__all__ = [
    "ScalingRecord", "CheckResult", "SweepResult", "CSV_COLUMNS", "DISTRIBUTIONS",
    "draw_weights", "grid_points",
    "theorem1_bound", "theorem_s2_bound", "theorem2_bound", "volume_cap",
    "max_ee_estimate", "scaling_experiment", "partition_from_config", "spec_from_config",
    "check_records", "records_to_csv", "records_to_json", "min_cut_rank_bound",
]


# --------------------------------------------------------------------------
# bound functions


def _check_pos(**kw):
    for k, v in kw.items():
        if v < 1:
            raise ValueError(f"{k} must be >= 1, got {v}")


def theorem1_bound(alpha: float, d: int, L: float, K: float) -> float:
    """Entanglement capacity of an overlapping convolutional circuit,
    ``min(alpha**d, L*K*alpha**(d-1))`` (up to the unspecified constant)."""
    _check_pos(alpha=alpha, L=L, K=K)
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    return float(min(alpha ** d, L * K * alpha ** (d - 1)))


def theorem_s2_bound(alpha: float, d: int, K: float) -> float:
    """Capacity with pooling between convolution layers: depth drops out."""
    _check_pos(alpha=alpha, K=K)
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    return float(min(alpha ** d, K * alpha ** (d - 1)))


def theorem2_bound(a_size: int, R: int, M: int) -> float:
    """``ln C(min(R, M) + a_size - 1, a_size)``: deep recurrent lower bound."""
    _check_pos(a_size=a_size, R=R, M=M)
    return math.log(math.comb(min(R, M) + a_size - 1, a_size))


def volume_cap(p: Partition, M: int) -> float:
    """``ln min(M**|A|, M**|B|)``, the entropy of a maximally entangled cut."""
    return min(len(p.a_indices), len(p.b_indices)) * math.log(M)


# --------------------------------------------------------------------------
# records


@dataclass
class ScalingRecord:
    family: str
    d: int
    N: int
    alpha: int
    M: int
    K: int
    S: int
    P: int
    L: int
    R: int
    partition: str
    a_size: int
    trials: int
    seed: int
    refine: int
    best_ee: float
    best_rank: int
    bound_kind: str
    bound_value: float
    status: str = "ok"
    wall_time: float = 0.0
    trial_ranks: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.status == "ok":
            if self.trials < 1:
                raise ValueError("trials must be >= 1")
            if self.best_ee < 0 or self.best_rank < 1:
                raise ValueError(f"invalid record: ee={self.best_ee}, rank={self.best_rank}")


# trial_ranks stays in memory only; wall_time is written on request
CSV_COLUMNS = tuple(f.name for f in fields(ScalingRecord) if f.name not in ("trial_ranks",))


def _columns(timing: bool) -> tuple[str, ...]:
    return CSV_COLUMNS if timing else tuple(c for c in CSV_COLUMNS if c != "wall_time")


def _row(rec: ScalingRecord, timing: bool, units: str = "nats") -> dict:
    row = {c: getattr(rec, c) for c in _columns(timing)}
    if units == "bits":
        # entropies only; rank bounds are unitless
        row["best_ee"] = rec.best_ee / math.log(2)
        if rec.bound_kind == "theorem2":
            row["bound_value"] = rec.bound_value / math.log(2)
    elif units != "nats":
        raise ValueError(f"units must be 'nats' or 'bits', got {units!r}")
    return row


def records_to_csv(records: Sequence[ScalingRecord], timing: bool = False,
                   units: str = "nats") -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_columns(timing), lineterminator="\n")
    w.writeheader()
    for r in records:
        row = _row(r, timing, units)
        for k, v in row.items():
            if isinstance(v, float):
                row[k] = repr(v)
        w.writerow(row)
    return buf.getvalue()


def records_to_json(records: Sequence[ScalingRecord], timing: bool = False,
                    units: str = "nats") -> str:
    return json.dumps([_row(r, timing, units) for r in records], indent=2) + "\n"


# --------------------------------------------------------------------------
# families


def _family(spec):
    if isinstance(spec, ConvSpec):
        return ConvWeights, ConvCircuit
    if isinstance(spec, RacSpec):
        return RacWeights, RacCircuit
    if isinstance(spec, ProductSpec):
        return ProductWeights, ProductCircuit
    raise TypeError(f"unsupported circuit spec {type(spec).__name__}")


def _bound(spec, p: Partition) -> tuple[str, float]:
    a = len(p.a_indices)
    if isinstance(spec, RacSpec) and spec.L >= 2:
        # the bound is only proved with A entirely to the right of B
        if not p.b_indices or max(p.b_indices) < min(p.a_indices):
            return "theorem2", theorem2_bound(a, spec.R, spec.M)
        return "none", 0.0
    if isinstance(spec, ConvSpec):
        if spec.P == 2:
            return "theorem_s2", theorem_s2_bound(spec.side, spec.d, spec.K)
        return "theorem1", theorem1_bound(spec.side, spec.d, spec.L, spec.K)
    return "none", 0.0


def _params(w) -> list[np.ndarray]:
    if isinstance(w, RacWeights):
        return [*w.hidden, *w.inputs, w.out]
    if isinstance(w, ConvWeights):
        return [*w.layers, w.head]
    return list(w.site_vectors)


def _rebuild(w, arrays):
    if isinstance(w, RacWeights):
        n = len(w.hidden)
        return RacWeights(tuple(arrays[:n]), tuple(arrays[n:2 * n]), arrays[2 * n], w.h0)
    if isinstance(w, ConvWeights):
        return ConvWeights(tuple(arrays[:-1]), arrays[-1])
    return ProductWeights(tuple(arrays))


DISTRIBUTIONS = ("normal", "signed-uniform")


def draw_weights(spec, rng: np.random.Generator, dist: str = "normal"):
    """Random weights with i.i.d. entries.

    ``normal``: standard normal.  ``signed-uniform``: a random sign times a
    magnitude uniform on [0.5, 1.5].  Both are absolutely continuous, so they
    reach the generic rank almost surely.  Products of near-zero normal
    entries make deep circuits badly conditioned, though, and the numerical
    rank then undercounts; magnitudes bounded away from zero avoid most of
    that.
    """
    weights_cls, _ = _family(spec)
    w = weights_cls.random(spec, rng)
    if dist == "normal":
        return w
    if dist != "signed-uniform":
        raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")
    return _rebuild(w, [np.sign(a) * rng.uniform(0.5, 1.5, np.shape(a)) for a in _params(w)])


def _measure(spec, circuit_cls, w, p, budget) -> tuple[float, int]:
    t = materialize(circuit_cls(spec, w), spec.n_sites, spec.M, budget)
    if not np.all(np.isfinite(t)) or not np.any(t):
        return 0.0, 0
    try:
        return entanglement_entropy(t, p), schmidt_rank(t, p)
    except np.linalg.LinAlgError:
        return 0.0, 0


def _refine(spec, circuit_cls, w, p, budget, maxiter):
    """Local ascent of the entropy from ``w``.

    Each weight array is normalized inside the objective.  The entropy does
    not change under rescaling of a single array, and without the projection
    the ascent drifts to overflowing norms.
    """
    from scipy.optimize import minimize

    shapes = [a.shape for a in _params(w)]
    sizes = [a.size for a in _params(w)]

    def unpack(theta):
        out, i = [], 0
        for shp, n in zip(shapes, sizes):
            a = theta[i:i + n].reshape(shp)
            i += n
            nrm = np.linalg.norm(a)
            out.append(a / nrm if nrm > 0 else a)
        return _rebuild(w, out)

    def objective(theta):
        return -_measure(spec, circuit_cls, unpack(theta), p, budget)[0]

    theta0 = np.concatenate([a.ravel() for a in _params(w)])
    res = minimize(objective, theta0, method="L-BFGS-B", options=dict(maxiter=maxiter))
    best = unpack(res.x)
    return best, _measure(spec, circuit_cls, best, p, budget)


def max_ee_estimate(spec, p: Partition, trials: int, seed: int, *, refine: int = 0,
                    refine_maxiter: int = 300, dist: str = "normal", workers: int = 1,
                    budget: int = DEFAULT_MATERIALIZE_BUDGET) -> ScalingRecord:
    """Best entanglement entropy and Schmidt rank over random weight draws.

    Trial ``i`` uses its own generator, spawned from ``seed``, so the result
    does not depend on ``workers``.  With ``refine > 0`` the ``refine`` draws
    of highest entropy (ties by trial index) are each locally optimized and
    the improved values, when better, replace the best.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if refine < 0:
        raise ValueError("refine must be >= 0")
    if p.n_sites != spec.n_sites:
        raise ValueError(f"partition covers {p.n_sites} sites, circuit has {spec.n_sites}")
    required = spec.M ** spec.n_sites
    if required > budget:
        raise BudgetExceeded(f"materializing {spec.n_sites} sites of dimension {spec.M}",
                             required, budget)
    _, circuit_cls = _family(spec)
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")
    t0 = time.perf_counter()
    children = np.random.SeedSequence(seed).spawn(trials)

    def run(i):
        w = draw_weights(spec, np.random.default_rng(children[i]), dist)
        return w, _measure(spec, circuit_cls, w, p, budget)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, range(trials)))
    else:
        results = [run(i) for i in range(trials)]

    ees = [ee for _, (ee, _) in results]
    ranks = tuple(int(r) for _, (_, r) in results)
    best_ee, best_rank = max(ees), max(ranks)
    if refine:
        order = sorted(range(trials), key=lambda i: (-ees[i], i))[:refine]
        for i in order:
            _, (ee, rank) = _refine(spec, circuit_cls, results[i][0], p, budget, refine_maxiter)
            best_ee, best_rank = max(best_ee, ee), max(best_rank, rank)

    summ = spec.summary()
    kind, value = _bound(spec, p)
    return ScalingRecord(
        family=summ["family"], d=summ["d"], N=summ["N"], alpha=summ["alpha"], M=summ["M"],
        K=summ["K"], S=summ["S"], P=summ["P"], L=summ["L"], R=summ["R"],
        partition=_describe(p), a_size=len(p.a_indices), trials=trials, seed=seed,
        refine=refine, best_ee=float(best_ee), best_rank=max(int(best_rank), 1),
        bound_kind=kind, bound_value=float(value),
        wall_time=time.perf_counter() - t0, trial_ranks=ranks,
    )


def _describe(p: Partition) -> str:
    a, n = p.a_indices, p.n_sites
    if a == tuple(range(n - len(a), n)):
        return f"suffix:{len(a)}"
    if a == tuple(range(len(a))):
        return f"prefix:{len(a)}"
    return "A=" + "-".join(map(str, a))


# --------------------------------------------------------------------------
# sweeps


def spec_from_config(family: str, params: dict):
    """Circuit spec from a flat parameter dict (keys as in the config docs)."""
    p = dict(params)
    try:
        if family == "rac":
            return RacSpec(int(p["N"]), int(p.get("M", 2)), int(p.get("R", 2)), int(p.get("L", 1)))
        if family == "product":
            return ProductSpec(int(p["N"]), int(p.get("M", 2)))
        if family == "cac":
            K, L = int(p["K"]), int(p["L"])
            M = int(p.get("M", 2))
            r = p.get("r")
            if r is None:
                width = int(p.get("width", 2))
                r = (M,) + (width,) * L
            return ConvSpec(int(p["N"]), M, L, K, tuple(int(x) for x in r),
                            S=int(p.get("S", 1)), P=int(p.get("P", 1)), d=int(p.get("d", 1)),
                            pad=str(p.get("pad", "one")))
    except KeyError as exc:
        raise ValueError(f"{family} instance is missing parameter {exc.args[0]!r}") from None
    raise ValueError(f"unknown family {family!r} (expected cac, rac or product)")


def partition_from_config(desc: dict, n_sites: int) -> Partition:
    kind = desc.get("kind", "middle")
    if kind == "middle":
        return Partition.middle(n_sites)
    if kind == "suffix":
        return Partition.suffix(int(desc["size"]), n_sites)
    if kind == "prefix":
        return Partition.prefix(int(desc["size"]), n_sites)
    if kind == "rect":
        side = math.isqrt(n_sites)
        return Partition.rect(side, int(desc.get("row", 0)), int(desc.get("col", 0)),
                              int(desc["size"]))
    if kind == "explicit":
        return Partition.from_a(desc["a"], n_sites)
    raise ValueError(f"unknown partition kind {kind!r}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class SweepResult:
    records: list[ScalingRecord]
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def grid_points(config: dict) -> list[dict]:
    """Cartesian product of the ``sweep`` lists, first key varying slowest."""
    sweep = config.get("sweep") or {}
    keys = list(sweep)
    values = [list(sweep[k]) for k in keys]
    if any(len(v) == 0 for v in values):
        return []
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def scaling_experiment(config: dict, *, workers: int = 1,
                       budget: int = DEFAULT_MATERIALIZE_BUDGET,
                       progress: Callable[[ScalingRecord], Any] | None = None) -> SweepResult:
    """Run every grid point of a sweep config and evaluate its checks.

    ``config`` keys: ``family``, ``base`` (instance parameters), ``partition``,
    ``sweep`` (parameter -> list of values; ``a_size`` sets the partition
    size), ``trials``, ``seed``, optional ``refine`` and ``checks``.
    Instances above ``budget`` become rows with status ``skipped``.
    """
    family = config["family"]
    trials, seed = int(config["trials"]), int(config["seed"])
    refine = int(config.get("refine", 0))
    dist = str(config.get("dist", "normal"))
    records = []
    for point in grid_points(config):
        params = {**config.get("base", {}), **{k: v for k, v in point.items() if k != "a_size"}}
        pdesc = dict(config.get("partition", {"kind": "middle"}))
        if "a_size" in point:
            pdesc["size"] = point["a_size"]
            pdesc.setdefault("kind", "suffix")
            if pdesc["kind"] == "middle":
                pdesc["kind"] = "suffix"
        spec = spec_from_config(family, params)
        part = partition_from_config(pdesc, spec.n_sites)
        try:
            rec = max_ee_estimate(spec, part, trials, seed, refine=refine, dist=dist,
                                  workers=workers, budget=budget)
        except BudgetExceeded:
            summ = spec.summary()
            kind, value = _bound(spec, part)
            rec = ScalingRecord(
                family=summ["family"], d=summ["d"], N=summ["N"], alpha=summ["alpha"],
                M=summ["M"], K=summ["K"], S=summ["S"], P=summ["P"], L=summ["L"], R=summ["R"],
                partition=_describe(part), a_size=len(part.a_indices), trials=trials,
                seed=seed, refine=refine, best_ee=0.0, best_rank=0, bound_kind=kind,
                bound_value=value, status="skipped",
            )
        records.append(rec)
        if progress is not None:
            progress(rec)
    return SweepResult(records, check_records(records, config.get("checks", [])))


def check_records(records: Sequence[ScalingRecord], checks: Sequence[dict]) -> list[CheckResult]:
    """Evaluate declarative checks over the ``ok`` rows of a sweep.

    Supported ``check`` kinds: ``nondecreasing`` (field over grid order),
    ``at_most`` / ``at_least`` (field on every row), ``paired_le`` (rows
    with ``by == lower`` against rows with ``by == upper``, paired by grid
    order: max over draws must satisfy lower <= upper, and per-draw ranks
    on at least ``fraction`` of the pairs).
    """
    ok = [r for r in records if r.status == "ok"]
    out = []
    for chk in checks:
        kind, fld = chk["check"], chk.get("field", "best_rank")
        name = chk.get("name", f"{kind}:{fld}")
        if kind == "nondecreasing":
            vals = [getattr(r, fld) for r in ok]
            tol = float(chk.get("tol", 0.0))
            bad = [i for i in range(1, len(vals)) if vals[i] < vals[i - 1] - tol]
            out.append(CheckResult(name, not bad, f"{fld}={_fmt(vals)}"
                                   + (f"; drops at rows {bad}" if bad else "")))
        elif kind in ("at_most", "at_least"):
            lim = chk["value"]
            vals = [getattr(r, fld) for r in ok]
            good = all((v <= lim) if kind == "at_most" else (v >= lim) for v in vals)
            out.append(CheckResult(name, good, f"{fld}={_fmt(vals)} vs {lim}"))
        elif kind == "paired_le":
            by = chk.get("by", "P")
            lo = [r for r in ok if getattr(r, by) == chk.get("lower", 2)]
            hi = [r for r in ok if getattr(r, by) == chk.get("upper", 1)]
            frac_need = float(chk.get("fraction", 0.9))
            if len(lo) != len(hi) or not lo:
                out.append(CheckResult(name, False, f"unpaired rows: {len(lo)} vs {len(hi)}"))
                continue
            good, details = True, []
            for a, b in zip(lo, hi):
                pairs = list(zip(a.trial_ranks, b.trial_ranks))
                frac = sum(x <= y for x, y in pairs) / len(pairs) if pairs else 1.0
                good &= a.best_rank <= b.best_rank and frac >= frac_need
                details.append(f"max {a.best_rank}<={b.best_rank}, paired {frac:.2f}")
            out.append(CheckResult(name, good, "; ".join(details)))
        else:
            raise ValueError(f"unknown check kind {kind!r}")
    return out


def _fmt(vals):
    return "[" + ", ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in vals) + "]"


# --------------------------------------------------------------------------
# graph bound


def min_cut_rank_bound(tn, p: Partition) -> float:
    """Upper bound on the Schmidt rank across ``p`` from a minimum cut.

    Every leg weighs ``ln(extent)``.  External legs join their node to a
    terminal for their site's side, so cutting one costs its extent too and
    duplicated legs of a site all attach to the same terminal.  Returns
    ``exp(min cut)``.
    """
    import networkx as nx

    g = nx.Graph()
    a_side = set(p.a_indices)

    def add(u, v, w):
        if g.has_edge(u, v):
            g[u][v]["capacity"] += w
        else:
            g.add_edge(u, v, capacity=w)

    for (na, la), (nb, lb) in tn.bonds:
        if na != nb:
            add(na, nb, math.log(tn.tensors[na].shape[la]))
    for node, leg, label in tn.external_legs:
        add(node, "A" if label in a_side else "B", math.log(tn.tensors[node].shape[leg]))
    if "A" not in g or "B" not in g:
        return 1.0
    cut, _ = nx.minimum_cut(g, "A", "B")
    return math.exp(cut)
