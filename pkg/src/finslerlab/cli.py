"""Command-line entry point: verification sweeps, geodesics, frame dumps."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .checks import run_verification
from .connections import composite_connection, vaisman, vranceanu
from .errors import ChartExitError, ConfigError, FinslerLabError, SingularEvaluationError
from .jets import TangentPoint
from .liouville import frame_pack
from .metrics import load_metric
from .spray import integrate_geodesic


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finslerlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the identity verification sweep")
    v.add_argument("--metric", required=True, help="metric config path or JSON string")
    v.add_argument("--points", type=int, default=1000)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol", type=float, default=None, help="override every tolerance")
    v.add_argument("--tol-profile", default=None, help="JSON file {class: tolerance}")
    v.add_argument("--report", default=None, help="write the JSON report here")
    v.add_argument("--checks", default=None, help="comma-separated ids or prefixes")
    v.add_argument("--threads", type=int, default=1)

    g = sub.add_parser("geodesic", help="integrate a geodesic and write a CSV")
    g.add_argument("--metric", required=True)
    g.add_argument("--x0", required=True, help="comma-separated start position")
    g.add_argument("--y0", required=True, help="comma-separated start velocity")
    g.add_argument("--steps", type=int, default=1000)
    g.add_argument("--dt", type=float, default=1e-3)
    g.add_argument("--out", required=True)

    for name in ("frames", "connections"):
        d = sub.add_parser(name, help=f"dump the {name} data at one point")
        d.add_argument("--metric", required=True)
        d.add_argument("--point", required=True, help='chart point as "x1,..,xn;y1,..,yn"')
        d.add_argument("--out", default=None)
    return parser


def _parse_point(text: str) -> TangentPoint:
    try:
        xs, ys = text.split(";")
        x = np.array([float(v) for v in xs.split(",")])
        y = np.array([float(v) for v in ys.split(",")])
    except ValueError as exc:
        raise ConfigError(f'point must be "x1,..,xn;y1,..,yn": {exc}') from exc
    return TangentPoint(x, y)


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_verify(args) -> int:
    if args.points < 1:
        print("config error: --points must be >= 1", file=sys.stderr)
        return 2
    try:
        metric = load_metric(args.metric)
        tol_profile = None
        if args.tol_profile:
            with open(args.tol_profile, "r", encoding="utf-8") as fh:
                tol_profile = json.load(fh)
        checks = args.checks.split(",") if args.checks else None
        report = run_verification(
            metric,
            points=args.points,
            seed=args.seed,
            checks=checks,
            tolerance=args.tol,
            tol_profile=tol_profile,
            threads=args.threads,
        )
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(report, indent=2) + "\n")
    failed = [c for c in report["checks"] if not c["pass"]]
    for c in report["checks"]:
        status = "pass" if c["pass"] else "FAIL"
        print(f"{status}  {c['id']:40s} max {c['max_residual']:.3e}  tol {c['tolerance']:.1e}")
    print(f"{len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed "
          f"({report['meta']['wall_time_s']:.2f} s)")
    return 0 if report["pass"] else 1


def cmd_geodesic(args) -> int:
    if args.dt <= 0:
        print("usage error: --dt must be positive", file=sys.stderr)
        return 2
    if args.steps < 1:
        print("usage error: --steps must be >= 1", file=sys.stderr)
        return 2
    try:
        metric = load_metric(args.metric)
        x0 = np.array([float(v) for v in args.x0.split(",")])
        y0 = np.array([float(v) for v in args.y0.split(",")])
        p0 = TangentPoint(x0, y0)
    except (ConfigError, SingularEvaluationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        res = integrate_geodesic(metric, p0, args.steps, args.dt)
    except ChartExitError as exc:
        print(f"chart exit: {exc}", file=sys.stderr)
        return 1
    n = metric.n
    header = "t," + ",".join(f"x{i+1}" for i in range(n)) + "," + ",".join(f"y{i+1}" for i in range(n)) + ",F"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(len(res.t)):
            row = [res.t[k]] + list(res.x[k]) + list(res.y[k]) + [res.F[k]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {args.out}; F-drift {res.drift:.3e}")
    return 0


def _point_or_error(args):
    metric = load_metric(args.metric)
    p = _parse_point(args.point)
    if p.n != metric.n:
        raise ConfigError(f"point dimension {p.n} does not match metric dimension {metric.n}")
    return metric, p


def cmd_frames(args) -> int:
    try:
        metric, p = _point_or_error(args)
        pack = frame_pack(metric, p)
    except (ConfigError, SingularEvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(
        {
            "point": {"x": p.x.tolist(), "y": p.y.tolist()},
            "dropped_index": pack.dropped,
            "block_sizes": list(pack.block_sizes),
            "pack_matrix": pack.matrix.tolist(),
            "gram_matrix": pack.gram.tolist(),
            "condition": pack.condition,
        },
        args.out,
    )
    return 0


def cmd_connections(args) -> int:
    try:
        metric, p = _point_or_error(args)
        vt = vranceanu(metric, p)
        va = vaisman(metric, p)
        comp = composite_connection(metric, p)
    except (ConfigError, SingularEvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(
        {
            "point": {"x": p.x.tolist(), "y": p.y.tolist()},
            "vranceanu": {"C": vt.C.tolist(), "Gc": vt.Gc.tolist(), "Fc": vt.Fc.tolist()},
            "vaisman": {
                "dropped_index": va.dropped,
                "kept_indices": list(va.kept),
                "indicatrix_coefficients": va.s_bar.tolist(),
                "mixed_coefficients": va.beta.tolist(),
                "radial_bar": va.radial_bar,
                "bar_radial": va.bar_radial.tolist(),
                "radial_radial": va.radial_radial,
                "horizontal_radial": va.horizontal_radial.tolist(),
            },
            "composite": {
                "bundle": comp.bundle,
                "frame": comp.frame,
                "horizontal": comp.coefficients["horizontal"].tolist(),
                "indicatrix": comp.coefficients["indicatrix"].tolist(),
                "mixed": comp.coefficients["mixed"].tolist(),
                "radial_horizontal": comp.coefficients["radial_horizontal"],
                "radial_indicatrix": comp.coefficients["radial_indicatrix"],
            },
        },
        args.out,
    )
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "geodesic":
            return cmd_geodesic(args)
        if args.command == "frames":
            return cmd_frames(args)
        if args.command == "connections":
            return cmd_connections(args)
    except FinslerLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
