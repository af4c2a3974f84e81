"""Command-line interface.

Subcommands cover curvature evaluation, geodesic shooting with CSV export,
projective parametrization of a stored trajectory, distance estimation with
JSON reports, curvature-condition sweeps, and scenario runs.  Exit codes:
0 success, 1 a check failed, 2 usage or parse errors.  Numeric output uses
repr (17 significant digits) for reproducibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import geodesic, kobayashi, manifold, workbench
from .errors import ExpressionParseError, GeometryError
from .geodesic import ShootSpec, SplineTrajectory
from .projective import projective_parameter

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _parse_point(text, dimension=None):
    values = [float(part) for part in text.split(",")]
    if dimension is not None and len(values) != dimension:
        raise GeometryError(
            f"expected {dimension} comma-separated numbers, got {len(values)}")
    return np.array(values)


def _load_model(path):
    spec = workbench.ModelSpec.load(path)
    return spec, workbench.build_model(spec)


def _fmt(value):
    return repr(float(value))


def cmd_curvature(args):
    spec, model = _load_model(args.model)
    x = _parse_point(args.point, model.dimension)
    ric = manifold.ricci_at(model, x)
    out = {
        "model": spec.to_dict(),
        "point": [float(c) for c in x],
        "metric": [[float(v) for v in row] for row in manifold.metric_at(model, x)],
        "ricci": [[float(v) for v in row] for row in ric],
        "scalar": float(manifold.scalar_curvature_at(model, x)),
        "einstein_residual": float(manifold.einstein_residual_at(model, x)),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_shoot(args):
    spec, model = _load_model(args.model)
    start = _parse_point(args.start, model.dimension)
    direction = _parse_point(args.dir, model.dimension)
    traj = geodesic.shoot(model, ShootSpec(
        start=start, direction=direction, affine_budget=args.budget))
    sidecar = args.out + ".json" if args.out else None
    if args.out:
        geodesic.export_trajectory_csv(traj, args.out, sidecar_path=sidecar,
                                       model_spec=spec.to_dict())
    print(f"domain [{_fmt(traj.s_minus)}, {_fmt(traj.s_plus)}]")
    for side in ("minus", "plus"):
        print(f"{side}: {traj.end_flags[side].value}")
    print(f"null_drift {_fmt(traj.null_drift)}")
    return EXIT_OK


def _trajectory_from_csv(path):
    sidecar_path = path + ".json"
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    model = workbench.build_model(
        workbench.ModelSpec.from_dict(sidecar["model"]))
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    n = model.dimension
    names = [f"x{i + 1}" for i in range(n - 1)] + ["t"]
    # Exit endpoints sit at the edge of the metric's domain; the spline cell
    # next to them is dominated by the boundary blow-up, so drop those rows.
    flags = {k: geodesic.EndFlag(v) for k, v in sidecar["end_flags"].items()}
    if flags["minus"] is geodesic.EndFlag.DOMAIN_EXIT:
        rows = rows[1:]
    if flags["plus"] is geodesic.EndFlag.DOMAIN_EXIT:
        rows = rows[:-1]
    s = np.array([float(r["s"]) for r in rows])
    xs = np.array([[float(r[c]) for c in names] for r in rows])
    vs = np.array([[float(r["d" + c]) for c in names] for r in rows])
    return model, SplineTrajectory(model, s, xs, vs, end_flags=flags,
                                   exit_params=sidecar.get("exit_params"))


def cmd_projparam(args):
    model, traj = _trajectory_from_csv(args.traj)
    param = projective_parameter(model, traj, args.base)
    lo, hi = param.domain
    span = hi - lo
    print("s,u1,u2,p")
    for s in np.linspace(lo + 1e-6 * span, hi - 1e-6 * span, args.samples):
        u1, u2 = param.u(s)
        p = u1 / u2 if u2 != 0.0 else float("inf")
        print(f"{_fmt(s)},{_fmt(u1)},{_fmt(u2)},{_fmt(p)}")
    return EXIT_OK


def _search_config(args):
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields = json.load(fh)
    if args.seed is not None:
        fields["seed"] = args.seed
    return kobayashi.SearchConfig(**fields)


def cmd_distance(args):
    spec, model = _load_model(args.model)
    x = _parse_point(args.source, model.dimension)
    y = _parse_point(args.target, model.dimension)
    config = _search_config(args)
    estimate = kobayashi.estimate_distance(model, x, y, config)
    report = kobayashi.distance_report(spec.to_dict(), x, y, estimate, config)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    print(f"value {_fmt(estimate.value)}")
    print(f"status {estimate.status.value}")
    print(f"mismatch {_fmt(estimate.mismatch)}")
    return EXIT_OK if estimate.status is not kobayashi.EstimateStatus.FAILED \
        else EXIT_CHECK_FAILED


def cmd_conditions(args):
    spec, model = _load_model(args.model)
    sampling = manifold.SampleSpec(
        count=args.samples,
        lo=tuple([-2.0] * (model.dimension - 1) + [0.2]),
        hi=tuple([2.0] * (model.dimension - 1) + [5.0]))
    report = manifold.check_ncc(model, sampling)
    print(f"ncc {'pass' if report.passed else 'fail'}")
    print(f"min_value {_fmt(report.min_value)}")
    print(f"samples {report.samples}")
    if report.witness_point is not None:
        print(f"witness_point {list(report.witness_point)}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_scenario(args):
    report = workbench.run_scenario(args.name)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="confkob",
        description="conformal null-geodesic distance workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", help="curvature tensors at a point")
    p.add_argument("--model", required=True)
    p.add_argument("--point", required=True, metavar="x1,..,t")
    p.set_defaults(fn=cmd_curvature)

    p = sub.add_parser("shoot", help="integrate a null geodesic")
    p.add_argument("--model", required=True)
    p.add_argument("--start", required=True, metavar="x1,..,t")
    p.add_argument("--dir", required=True, metavar="dx1,..,dt")
    p.add_argument("--budget", type=float, default=50.0)
    p.add_argument("--out", help="trajectory CSV path (sidecar JSON added)")
    p.set_defaults(fn=cmd_shoot)

    p = sub.add_parser("projparam",
                       help="projective parameter along a stored trajectory")
    p.add_argument("--traj", required=True, help="trajectory CSV path")
    p.add_argument("--base", type=float, required=True)
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(fn=cmd_projparam)

    p = sub.add_parser("distance", help="pseudodistance upper bound")
    p.add_argument("--model", required=True)
    p.add_argument("--from", dest="source", required=True, metavar="x1,..,t")
    p.add_argument("--to", dest="target", required=True, metavar="x1,..,t")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON file with search settings")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(fn=cmd_distance)

    p = sub.add_parser("conditions", help="curvature condition sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(fn=cmd_conditions)

    p = sub.add_parser("scenario", help="run a named scenario")
    p.add_argument("name")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(fn=cmd_scenario)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ExpressionParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeometryError, OSError, ValueError, json.JSONDecodeError,
            TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
