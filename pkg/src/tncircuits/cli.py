"""Command-line interface: ``tncircuits <subcommand> [options]``.

Exit codes: 0 success, 1 a checked property failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis
from .builders import (
    DEFAULT_LEG_BUDGET, BuiltNetwork, mps_from_rac, recursive_mps_from_rac,
    recursive_tree_from_cac, tree_tn_from_cac,
)
from .circuits import (
    DEFAULT_MATERIALIZE_BUDGET, BudgetExceeded, ConvCircuit, RacCircuit, all_configs, materialize,
)
from .formats import FormatError, circuit_from_config, load_structured, load_tn, save_tn
from .network import contract_dup, dup, contract_network, no_cloning_witness

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_TOLERANCE = 1e-10
# entries below this fraction of the largest amplitude are compared absolutely
REL_FLOOR = 1e-12
RAW_CONTRACTION_LIMIT = 2 ** 22


class UsageError(Exception):
    pass


def preset_names() -> list[str]:
    root = resources.files(__package__) / "presets"
    return sorted(p.name.rsplit(".", 1)[0] for p in root.iterdir()
                  if p.name.endswith((".yaml", ".json")) and not p.name.endswith(".tn.json"))


def _preset_path(name: str) -> Path:
    root = resources.files(__package__) / "presets"
    for ext in (".yaml", ".json"):
        p = root / (name + ext)
        if p.is_file():
            return Path(str(p))
    raise UsageError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")


def _load_config(args) -> tuple[dict, Path]:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.preset:
        path = _preset_path(args.preset)
    elif args.config:
        path = Path(args.config)
    else:
        raise UsageError("this subcommand needs --config FILE or --preset NAME")
    return load_structured(path), path.parent


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------


def build_network(inst, budget: int) -> BuiltNetwork:
    spec = inst.spec
    if inst.kind == "cac":
        if spec.S == spec.K and spec.P == 1:
            return tree_tn_from_cac(spec, inst.weights, budget)
        if spec.S == 1:
            return recursive_tree_from_cac(spec, inst.weights, budget)
        raise UsageError("no tensor-network builder for this convolutional circuit")
    if spec.L == 1:
        return mps_from_rac(spec, inst.weights, budget)
    return recursive_mps_from_rac(spec, inst.weights, budget)


def _forward(inst):
    return (ConvCircuit if inst.kind == "cac" else RacCircuit)(inst.spec, inst.weights)


def relative_deviation(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """|x - ref| / max(|ref|, REL_FLOOR * max|ref|), entrywise."""
    scale = np.maximum(np.abs(ref), REL_FLOOR * max(np.max(np.abs(ref)), np.finfo(float).tiny))
    return np.abs(x - ref) / scale


def _network_tensor(tn, n_sites) -> np.ndarray:
    """DUP of the full raw contraction when it is small enough, else the
    equivalent hyperedge contraction."""
    groups = tn.dup_groups()
    if groups.unique_order != tuple(range(n_sites)):
        raise UsageError(f"network exposes sites {groups.unique_order}, expected 0..{n_sites - 1}")
    if int(np.prod(tn.external_shape, dtype=float)) <= RAW_CONTRACTION_LIMIT:
        return dup(contract_network(tn), groups)
    return contract_dup(tn)


def cmd_verify_equivalence(args) -> int:
    cfg, base = _load_config(args)
    inst = circuit_from_config(cfg, seed=args.seed, base=base)
    tn_path = args.tn or cfg.get("tn")
    if tn_path and not args.tn:
        tn_path = base / tn_path
    budget = args.budget or DEFAULT_LEG_BUDGET
    tol = args.tolerance if args.tolerance is not None else DEFAULT_TOLERANCE
    plan = {"subcommand": "verify-equivalence", "circuit": inst.kind,
            "spec": inst.spec.summary(), "weights": inst.source,
            "network": str(tn_path) if tn_path else "built from circuit",
            "tolerance": tol, "leg_budget": budget}
    if args.dry_run:
        print(json.dumps(plan, indent=2))
        return EXIT_OK
    n, m = inst.spec.n_sites, inst.spec.M
    if tn_path:
        tn = load_tn(tn_path)
    else:
        tn = build_network(inst, budget).tn
    got = _network_tensor(tn, n).ravel().tolist()
    ref = materialize(_forward(inst), n, m).ravel().tolist()
    if len(got) != len(ref):
        raise UsageError(f"network tensor has {len(got)} entries, circuit has {len(ref)}")
    dev = relative_deviation(np.array(got), np.array(ref))
    configs = all_configs(n, m)
    worst = float(dev.max())
    passed = worst <= tol
    lines = [f"# verify-equivalence {inst.kind} N={n} M={m} weights={inst.source}",
             "config,network,circuit,rel_dev"]
    for c, g, r, d in zip(configs, got, ref, dev):
        lines.append(f"{''.join(map(str, c))},{g!r},{r!r},{d:.3e}")
    lines.append(f"# max_rel_dev={worst:.3e} tolerance={tol:.1e} "
                 f"result={'PASS' if passed else 'FAIL'}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"{len(ref)} configurations, max relative deviation {worst:.3e} (tolerance {tol:.1e})")
    if not passed:
        i = int(np.argmax(dev > tol))
        print(f"FAIL: first failing configuration {tuple(int(s) for s in configs[i])}: "
              f"network {got[i]!r} vs circuit {ref[i]!r} (relative deviation {dev[i]:.3e})")
        return EXIT_FAIL
    print("PASS")
    return EXIT_OK


def cmd_no_cloning(args) -> int:
    dims = args.dim or [2]
    if args.dry_run:
        print(json.dumps({"subcommand": "no-cloning", "dims": dims}, indent=2))
        return EXIT_OK
    rows = []
    for dim in dims:
        if dim < 1:
            raise UsageError(f"dim must be >= 1, got {dim}")
        if dim == 1:
            rows.append({"dim": 1, "basis_cloned": True, "counterexample_violation": 0.0,
                         "note": "trivial case: the all-ones vector is the only basis vector, "
                                 "so cloning succeeds"})
            continue
        rep = no_cloning_witness(dim)
        rows.append({"dim": dim, "basis_cloned": bool(rep.basis_cloned),
                     "counterexample_violation": float(rep.counterexample_violation)})
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        text = "".join(
            f"dim={r['dim']} basis_cloned={r['basis_cloned']} "
            f"violation={r['counterexample_violation']!r}"
            + (f" ({r['note']})" if "note" in r else "") + "\n"
            for r in rows
        )
    _emit(text, args.out)
    good = all(r["basis_cloned"] for r in rows) and all(
        r["counterexample_violation"] >= 1 - 1e-12 for r in rows if r["dim"] >= 2)
    return EXIT_OK if good else EXIT_FAIL


def cmd_scaling(args) -> int:
    cfg, _ = _load_config(args)
    for key in ("family", "seed", "trials"):
        if key not in cfg and not (key == "seed" and args.seed is not None) \
                and not (key == "trials" and args.trials is not None):
            raise UsageError(f"sweep config needs {key!r} (seeds are mandatory)")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if int(cfg["trials"]) < 1:
        raise UsageError("trials must be >= 1")
    budget = args.budget or DEFAULT_MATERIALIZE_BUDGET
    points = analysis.grid_points(cfg)
    if args.dry_run:
        print(json.dumps({"subcommand": "scaling", "family": cfg["family"],
                          "base": cfg.get("base", {}), "partition": cfg.get("partition"),
                          "grid": points, "trials": cfg["trials"], "seed": cfg["seed"],
                          "refine": cfg.get("refine", 0), "checks": cfg.get("checks", []),
                          "units": "bits" if args.bits else "nats", "budget": budget}, indent=2, default=str))
        return EXIT_OK
    try:
        result = analysis.scaling_experiment(cfg, workers=args.workers, budget=budget)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep config: {exc}") from None
    writer = analysis.records_to_json if args.format == "json" else analysis.records_to_csv
    units = "bits" if args.bits else "nats"
    _emit(writer(result.records, timing=args.timing, units=units), args.out)
    for c in result.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}",
              file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_build(args) -> int:
    cfg, base = _load_config(args)
    inst = circuit_from_config(cfg, seed=args.seed, base=base)
    budget = args.budget or DEFAULT_LEG_BUDGET
    if args.dry_run:
        print(json.dumps({"subcommand": "build", "circuit": inst.kind,
                          "spec": inst.spec.summary(), "weights": inst.source,
                          "leg_budget": budget, "out": args.out or "-"}, indent=2))
        return EXIT_OK
    built = build_network(inst, budget)
    if args.out:
        save_tn(args.out, built.tn)
        print(f"wrote {built.tn!r} to {args.out}")
    else:
        from .formats import tn_to_dict
        print(json.dumps(tn_to_dict(built.tn)))
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.dry_run:
        print(json.dumps({"subcommand": "presets"}, indent=2))
    else:
        print("\n".join(preset_names()))
    return EXIT_OK


# --------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file")
    common.add_argument("--preset", help="bundled config name (see `presets`)")
    common.add_argument("--seed", type=int, help="override the config's seed")
    common.add_argument("--trials", type=int, help="override the number of random draws")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--tolerance", type=float, help="relative tolerance for checks")
    common.add_argument("--budget", type=int,
                        help="size budget: raw legs for networks, entries for materialization")
    common.add_argument("--dry-run", action="store_true", help="print the plan and exit")

    p = argparse.ArgumentParser(prog="tncircuits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify-equivalence", parents=[common],
                       help="compare a tensor network with its circuit on every input")
    v.add_argument("--tn", help="network description to check instead of the built one")
    v.set_defaults(func=cmd_verify_equivalence)
    n = sub.add_parser("no-cloning", parents=[common], help="no-cloning witness")
    n.add_argument("dim", type=int, nargs="*", help="local dimensions (default 2)")
    n.set_defaults(func=cmd_no_cloning)
    s = sub.add_parser("scaling", parents=[common], help="entanglement scaling sweep")
    s.add_argument("--workers", type=int, default=1, help="threads per experiment")
    s.add_argument("--timing", action="store_true", help="include wall_time in the output")
    s.add_argument("--bits", action="store_true",
                   help="report entropies in bits instead of nats")
    s.set_defaults(func=cmd_scaling)
    b = sub.add_parser("build", parents=[common], help="emit the network description")
    b.set_defaults(func=cmd_build)
    ls = sub.add_parser("presets", help="list bundled configs")
    ls.add_argument("--dry-run", action="store_true", help="print the plan and exit")
    ls.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FormatError, BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
