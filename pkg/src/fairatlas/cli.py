"""Command-line interface.

Exit codes: 0 success, 1 validation failure (validate command), 2 usage or
parse errors.  All JSON outputs carry the tool version and the effective
configuration; warnings (dropped edges, disconnected inputs) go to stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import FairAtlasError, ParameterError
from .landscape import (
    LAYER_NAMES,
    AxisSpec,
    GridSpec,
    operating_region,
    read_grid_csv,
    scan,
    write_grid_csv,
)
from .qoe import SlaPoint, evaluate
from .report import (
    VALIDATE_MODES,
    compare,
    ensure_connected,
    format_comparison_table,
    render_json,
    validate,
    write_pgm_heatmap,
)
from .sensitivity import diagnose, gradient, gradient_fd, hessian
from .topology import (
    TopologySpec,
    generate,
    hop_histogram,
    k_core,
    load_caida,
    load_edge_list,
    moments,
    write_edge_list,
)

log = logging.getLogger("fairatlas")


def _config(args: argparse.Namespace) -> dict:
    return {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func" and v is not None
    }


def _emit(payload: dict, args: argparse.Namespace, out: str | None) -> None:
    text = render_json(payload, _config(args))
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path: str):
    with open(path, "r") as f:
        return load_edge_list(f)


def _load_connected(path: str):
    return ensure_connected(_load(path))


def _histogram(path: str):
    return hop_histogram(_load_connected(path))


def _spec_from_args(args: argparse.Namespace) -> TopologySpec:
    kind = args.type
    if kind == "grid":
        return TopologySpec.grid(args.rows, args.cols)
    if kind in ("complete", "path", "star"):
        return TopologySpec(kind=kind, n=args.n)
    if kind == "er":
        return TopologySpec.er(args.n, args.p, seed=args.seed)
    if kind == "ba":
        return TopologySpec.ba(args.n, args.m, seed=args.seed)
    return TopologySpec.ws(args.n, args.k, args.beta, seed=args.seed)


def _grid_spec_from_args(args: argparse.Namespace, max_cost: float) -> GridSpec:
    h0_max = args.h0_max if args.h0_max is not None else max_cost + 0.5
    return GridSpec(
        a_axis=AxisSpec(
            lo=args.a_min, hi=args.a_max, steps=args.a_steps, spacing=args.a_spacing
        ),
        h0_axis=AxisSpec(lo=args.h0_min, hi=h0_max, steps=args.h0_steps),
    )


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a-min", type=float, default=0.05)
    p.add_argument("--a-max", type=float, default=20.0)
    p.add_argument("--a-steps", type=int, default=64)
    p.add_argument("--a-spacing", choices=("linear", "log"), default="log")
    p.add_argument("--h0-min", type=float, default=0.5)
    p.add_argument("--h0-max", type=float, default=None, help="default: max cost + 0.5")
    p.add_argument("--h0-steps", type=int, default=256)


def cmd_gen(args) -> int:
    g = generate(_spec_from_args(args))
    with open(args.out, "w") as f:
        write_edge_list(g, f)
    _emit({"nodes": g.node_count, "edges": g.edge_count, "out": str(args.out)}, args, None)
    return 0


def cmd_ingest_caida(args) -> int:
    with open(getattr(args, "in"), "r") as f:
        g = load_caida(f)
    stages = {"nodes_raw": g.node_count, "edges_raw": g.edge_count}
    g = ensure_connected(g)
    stages.update(nodes_lcc=g.node_count, edges_lcc=g.edge_count)
    if args.k_core > 0:
        g = k_core(g, args.k_core)
        stages.update(k=args.k_core, nodes_core=g.node_count, edges_core=g.edge_count)
    with open(args.out, "w") as f:
        write_edge_list(g, f)
    stages["out"] = str(args.out)
    _emit(stages, args, None)
    return 0


def cmd_hist(args) -> int:
    h = _histogram(getattr(args, "in"))
    mom = moments(h)
    _emit(
        {
            "pair_total": h.pair_total,
            "classes": [{"cost": c, "count": n} for c, n in h.classes],
            "moments": {
                "mean": mom.mean,
                "variance": mom.variance,
                "m3": mom.m3,
                "m4": mom.m4,
            },
        },
        args,
        args.out,
    )
    return 0


def cmd_eval(args) -> int:
    h = _histogram(getattr(args, "in"))
    snap = evaluate(h, SlaPoint(a=args.a, h0=args.h0))
    _emit(snap.to_dict(), args, args.out)
    return 0


def cmd_grad(args) -> int:
    h = _histogram(getattr(args, "in"))
    sla = SlaPoint(a=args.a, h0=args.h0)
    grad = gradient(h, sla)
    hess = hessian(h, sla)
    payload = {
        "a": args.a,
        "h0": args.h0,
        "gradient": vars(grad).copy(),
        "hessian": vars(hess).copy(),
    }
    if args.fd_step is not None:
        payload["gradient_fd"] = vars(gradient_fd(h, sla, step=args.fd_step)).copy()
    _emit(payload, args, args.out)
    return 0


def cmd_diagnose(args) -> int:
    h = _histogram(getattr(args, "in"))
    rows = diagnose(h, SlaPoint(a=args.a, h0=args.h0), args.param)
    _emit(
        {
            "a": args.a,
            "h0": args.h0,
            "param": args.param,
            "gradient_component": sum(r.contribution for r in rows),
            "rows": [r.to_dict() for r in rows],
        },
        args,
        args.out,
    )
    return 0


def cmd_scan(args) -> int:
    h = _histogram(getattr(args, "in"))
    grid = scan(h, _grid_spec_from_args(args, float(h.costs[-1])))
    with open(args.out, "w", newline="\n") as f:
        write_grid_csv(grid, f)
    payload = {"out": str(args.out), "window": grid.spec.window()}
    if args.pgm_dir:
        outdir = Path(args.pgm_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        images = {}
        for name in LAYER_NAMES:
            target = outdir / f"{name}.pgm"
            write_pgm_heatmap(
                grid.layer(name), target, scaling=args.pgm_scaling, window=grid.spec.window()
            )
            images[name] = str(target)
        payload["images"] = images
    _emit(payload, args, None)
    return 0


def cmd_region(args) -> int:
    with open(args.csv, "r") as f:
        grid = read_grid_csv(f)
    region = operating_region(grid, args.i_max, args.s_min)
    _emit(region.to_dict(grid.spec), args, args.out)
    return 0


def cmd_validate(args) -> int:
    h = _histogram(getattr(args, "in"))
    kwargs = {}
    if args.mode == "small-a" and args.h0 is not None:
        if len(args.h0) != 2:
            raise ParameterError("--h0 takes exactly two values for small-a validation")
        kwargs["h0_pair"] = tuple(args.h0)
    if args.mode == "large-a":
        kwargs["a_lo"] = args.a_lo
        kwargs["a_hi"] = args.a_hi
    report = validate(h, args.mode, seed=args.seed, **kwargs)
    _emit(report, args, args.out)
    return 0 if report["passed"] else 1


def cmd_compare(args) -> int:
    paths = getattr(args, "in")
    if len(paths) < 2:
        raise ParameterError("compare needs at least 2 input topologies")
    named = [(Path(p).stem, _load(p)) for p in paths]
    spec = None
    if args.h0_max is not None:
        spec = _grid_spec_from_args(args, 0.0)
    rows, spec = compare(named, args.i_max, args.s_min, spec=spec)
    sys.stdout.write(format_comparison_table(rows) + "\n")
    if args.out:
        _emit(
            {"window": spec.window(), "rows": [r.to_dict() for r in rows]},
            args,
            args.out,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairatlas",
        description="Fairness-sensitivity landscape toolkit for network topologies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a topology and write it as an edge list")
    p.add_argument("--type", required=True, choices=("complete", "path", "star", "grid", "er", "ba", "ws"))
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--rows", type=int, default=0)
    p.add_argument("--cols", type=int, default=0)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest-caida", help="parse a CAIDA AS-relationship file, keep the largest component, optionally reduce to a k-core")
    p.add_argument("--in", required=True)
    p.add_argument("--k-core", dest="k_core", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest_caida)

    p = sub.add_parser("hist", help="all-pairs hop-count histogram and its moments")
    p.add_argument("--in", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("eval", help="imbalance and mean satisfaction at one SLA point")
    p.add_argument("--in", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--h0", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad", help="analytic gradient and curvature at one SLA point")
    p.add_argument("--in", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--h0", type=float, required=True)
    p.add_argument("--fd-step", type=float, default=None, help="also report central-difference gradients at this step")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grad)

    p = sub.add_parser("diagnose", help="per-cost-class breakdown of one gradient component")
    p.add_argument("--in", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--h0", type=float, required=True)
    p.add_argument("--param", required=True, choices=("a", "h0"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("scan", help="dense (a, h0) scan written as CSV, optionally with PGM heatmaps")
    p.add_argument("--in", required=True)
    _add_grid_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm-dir", default=None)
    p.add_argument("--pgm-scaling", choices=("minmax", "absmax"), default="minmax")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("region", help="operating region (AoR, MCR) from a scan CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--i-max", dest="i_max", type=float, required=True)
    p.add_argument("--s-min", dest="s_min", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("validate", help="run one acceptance suite and exit 1 on failure")
    p.add_argument("--in", required=True)
    p.add_argument("--mode", required=True, choices=VALIDATE_MODES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h0", type=float, nargs=2, default=None, help="two fit thresholds for small-a mode")
    p.add_argument("--a-lo", dest="a_lo", type=float, default=10.0)
    p.add_argument("--a-hi", dest="a_hi", type=float, default=20.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="Var(h), AoR, MCR for several topologies under one window")
    p.add_argument("--in", required=True, nargs="+")
    p.add_argument("--i-max", dest="i_max", type=float, required=True)
    p.add_argument("--s-min", dest="s_min", type=float, required=True)
    _add_grid_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FairAtlasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
