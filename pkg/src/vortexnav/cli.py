"""Command-line interface.

Every subcommand reads a problem file, writes its delimited/JSON
artifacts into the output directory, and prints a JSON summary on
stdout.  Failures also print JSON: {"error": {"type", "message"}}.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
failure (no convergence, singular system, integration breakdown),
4 violated precondition (e.g. cut construction outside weak drift).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import plots
from .classify import classification_report
from .flow import IntegrationError, exponential, write_trajectory_csv
from .homotopy import EvaluationFailure, splitting_curve, write_splitting_csv
from .jacobi import conjugate_scan, scan_summary, write_scan_csv
from .model import VortexProblem, load_problem
from .shooting import (
    NoConvergence,
    ShootingProblem,
    SingularJacobian,
    shoot,
    solve_all,
)
from .synthesis import (
    NotFound,
    PreconditionError,
    synthesis_report,
    wavefront,
    write_sphere_csv,
    write_wavefront_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexnav",
        description="time-minimal navigation around a planar point vortex",
    )
    parser.add_argument("--problem", required=True, help="problem JSON file (mu, x0, tol)")
    parser.add_argument("--out", default=".", help="output directory for artifacts")
    parser.add_argument("--svg", action="store_true", help="also render SVG figures")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geodesic", help="integrate one geodesic and export it")
    p.add_argument("--alpha", type=float, required=True, help="launch angle in [0, 2pi)")
    p.add_argument("--t", type=float, required=True, help="duration")
    p.add_argument("--n", type=int, default=400, help="number of output samples")

    p = sub.add_parser("classify", help="closed-form fate of a launch angle")
    p.add_argument("--alpha", type=float, required=True)

    p = sub.add_parser("shoot", help="solve the two-point boundary problem")
    p.add_argument("--xf", type=float, nargs=2, metavar=("X1", "X2"), help="target point")
    p.add_argument(
        "--guess", type=float, nargs=2, metavar=("T", "ALPHA"),
        help="refine this single starting guess instead of multistarting",
    )
    p.add_argument("--batch", help="JSON file with a list of [x1, x2] targets")
    p.add_argument("--n-starts", type=int, default=24)

    p = sub.add_parser("conjugate-scan", help="scan directions for conjugate points")
    p.add_argument("--n", type=int, default=1000, help="number of directions")
    p.add_argument("--tmax", type=float, default=50.0)

    p = sub.add_parser("wavefront", help="equal-time front of the geodesic fan")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)

    p = sub.add_parser("splitting", help="continue splitting curves from a seed front")
    p.add_argument("--t", type=float, default=None, help="seed front time (default 1.02|x0|)")
    p.add_argument("--n", type=int, default=400, help="seed front resolution")
    p.add_argument("--t-cap", type=float, default=None, help="stop curves above this time")
    p.add_argument("--max-steps", type=int, default=2000, help="continuation step budget per branch")

    p = sub.add_parser("synthesis", help="cut locus, spheres, and ball types")
    p.add_argument("--times", type=float, nargs="+", default=None, help="sphere snapshot times")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=800, help="continuation step budget per branch")
    return parser


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_geodesic(args, problem: VortexProblem, out: str) -> dict:
    t_eval = np.linspace(0.0, args.t, max(2, args.n)) if args.t > 0 else None
    traj = exponential(problem, args.alpha, args.t, t_eval=t_eval)
    csv_path = os.path.join(out, "geodesic.csv")
    write_trajectory_csv(traj, csv_path)
    artifacts = [csv_path]
    if args.svg:
        svg = os.path.join(out, "geodesic.svg")
        plots.plot_trajectory(csv_path, svg, mu=problem.mu, x0=problem.x0)
        rsvg = os.path.join(out, "geodesic_radius.svg")
        plots.plot_radius_history(csv_path, rsvg)
        artifacts += [svg, rsvg]
    return {
        "artifacts": artifacts,
        "stop_reason": traj.stop_reason.value,
        "t_end": traj.t_end,
    }


def _cmd_classify(args, problem: VortexProblem, out: str) -> dict:
    report = classification_report(args.alpha, problem.r0, problem.mu)
    path = os.path.join(out, "classify.json")
    _write_json(report, path)
    return {"artifacts": [path], **report}


def _cmd_shoot(args, problem: VortexProblem, out: str) -> dict:
    if args.batch is not None:
        with open(args.batch, "r", encoding="utf-8") as fh:
            targets = json.load(fh)
        results = []
        for xf in targets:
            sp = ShootingProblem(problem, (float(xf[0]), float(xf[1])))
            sols = solve_all(sp, args.n_starts)
            results.append({"xf": [float(xf[0]), float(xf[1])],
                            "solutions": [s.as_dict() for s in sols]})
        path = os.path.join(out, "shoot.json")
        _write_json(results, path)
        return {"artifacts": [path], "n_targets": len(results)}

    if args.xf is None:
        raise ValueError("shoot needs --xf X1 X2 (or --batch FILE)")
    sp = ShootingProblem(problem, (args.xf[0], args.xf[1]))
    if args.guess is not None:
        sols = [shoot(sp, (args.guess[0], args.guess[1]))]
    else:
        sols = solve_all(sp, args.n_starts)
    if not sols:
        raise NotFound(f"no boundary extremal found for target {tuple(args.xf)}")
    path = os.path.join(out, "shoot.json")
    _write_json([s.as_dict() for s in sols], path)
    artifacts = [path]
    best = sols[0]
    if best.trajectory is not None and best.T > 0.0:
        csv_path = os.path.join(out, "shoot_best.csv")
        t_eval = np.linspace(0.0, best.T, 400)
        traj = exponential(problem, best.alpha, best.T, t_eval=t_eval)
        write_trajectory_csv(traj, csv_path)
        artifacts.append(csv_path)
        if args.svg:
            svg = os.path.join(out, "shoot_best.svg")
            plots.plot_trajectory(csv_path, svg, mu=problem.mu, x0=problem.x0)
            artifacts.append(svg)
    return {"artifacts": artifacts, "solutions": [s.as_dict() for s in sols]}


def _cmd_conjugate_scan(args, problem: VortexProblem, out: str) -> dict:
    scan = conjugate_scan(problem, args.n, t_max=args.tmax)
    csv_path = os.path.join(out, "conjugate_scan.csv")
    write_scan_csv(scan, csv_path)
    summary = scan_summary(scan)
    json_path = os.path.join(out, "conjugate_scan.json")
    _write_json(summary, json_path)
    artifacts = [csv_path, json_path]
    if args.svg:
        svg = os.path.join(out, "conjugate_scan.svg")
        plots.plot_scan(csv_path, svg)
        artifacts.append(svg)
    return {"artifacts": artifacts, "n_conjugate": summary["n_conjugate"]}


def _cmd_wavefront(args, problem: VortexProblem, out: str) -> dict:
    wf = wavefront(problem, args.t, args.n)
    csv_path = os.path.join(out, "wavefront.csv")
    write_wavefront_csv(wf, csv_path)
    artifacts = [csv_path]
    if args.svg:
        svg = os.path.join(out, "wavefront.svg")
        plots.plot_wavefront(csv_path, svg, mu=problem.mu, x0=problem.x0)
        artifacts.append(svg)
    return {
        "artifacts": artifacts,
        "n_alive": int(wf.alive.sum()),
        "self_intersections": [
            {"t": s.t, "alpha1": s.alpha1, "alpha2": s.alpha2, "x": list(s.x)}
            for s in wf.self_intersections
        ],
    }


def _cmd_splitting(args, problem: VortexProblem, out: str) -> dict:
    t_seed = args.t if args.t is not None else 1.02 * problem.r0
    wf = wavefront(problem, t_seed, args.n)
    if not wf.self_intersections:
        raise NotFound(f"the front at t={t_seed:g} has no self-intersection to continue")
    curves = []
    for k, seed in enumerate(wf.self_intersections):
        try:
            curves.append(
                splitting_curve(
                    problem, seed, t_cap=args.t_cap, max_steps=args.max_steps, label=k + 1
                )
            )
        except (EvaluationFailure, ValueError):
            continue
    if not curves:
        raise NoConvergence("no splitting curve could be continued from the seed front")
    curves.sort(key=lambda c: c.min_t)
    artifacts = []
    summaries = []
    csv_paths = []
    for rank, curve in enumerate(curves):
        curve.label = rank + 1
        csv_path = os.path.join(out, f"splitting_{curve.label}.csv")
        write_splitting_csv(curve, csv_path)
        csv_paths.append(csv_path)
        artifacts.append(csv_path)
        summaries.append({**curve.summary_dict(), "file": csv_path})
    json_path = os.path.join(out, "splitting.json")
    _write_json(summaries, json_path)
    artifacts.append(json_path)
    if args.svg:
        svg = os.path.join(out, "splitting.svg")
        plots.plot_splitting(csv_paths, svg, mu=problem.mu, x0=problem.x0)
        svg_t = os.path.join(out, "splitting_time.svg")
        plots.plot_splitting(csv_paths, svg_t, mu=problem.mu, x0=problem.x0, view="time")
        artifacts += [svg, svg_t]
    return {"artifacts": artifacts, "curves": summaries}


def _cmd_synthesis(args, problem: VortexProblem, out: str) -> dict:
    times = tuple(args.times) if args.times is not None else None
    report = synthesis_report(problem, times, N=args.n, max_steps=args.max_steps)
    cut_path = os.path.join(out, "cut_curve.csv")
    write_splitting_csv(report.cut_curve, cut_path)
    artifacts = [cut_path]
    spheres = {}
    for i, (t, sb) in enumerate(sorted(report.spheres.items()), start=1):
        csv_path = os.path.join(out, f"sphere_{i}.csv")
        write_sphere_csv(sb, csv_path)
        artifacts.append(csv_path)
        spheres[f"{t:.17g}"] = {
            "file": csv_path,
            "ball_type": sb.ball_type.value,
            "truncated": sb.truncated,
            "n_dead": sb.n_dead,
            "singular_points": [list(p) for p in sb.singular_points],
        }
        if args.svg:
            svg = os.path.join(out, f"sphere_{i}.svg")
            plots.plot_sphere(csv_path, svg, mu=problem.mu, x0=problem.x0, cut_csv=cut_path)
            artifacts.append(svg)
    summary = {
        **report.as_dict(),
        "cut_curve_file": cut_path,
        "spheres": spheres,
    }
    json_path = os.path.join(out, "synthesis.json")
    _write_json(summary, json_path)
    artifacts.append(json_path)
    return {"artifacts": artifacts, **summary}


_COMMANDS = {
    "geodesic": _cmd_geodesic,
    "classify": _cmd_classify,
    "shoot": _cmd_shoot,
    "conjugate-scan": _cmd_conjugate_scan,
    "wavefront": _cmd_wavefront,
    "splitting": _cmd_splitting,
    "synthesis": _cmd_synthesis,
}


def _fail(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
    return code


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        problem = load_problem(args.problem)
        os.makedirs(args.out, exist_ok=True)
        summary = _COMMANDS[args.command](args, problem, args.out)
    except PreconditionError as exc:
        return _fail(exc, 4)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(exc, 2)
    except (
        IntegrationError,
        NoConvergence,
        SingularJacobian,
        NotFound,
        EvaluationFailure,
        np.linalg.LinAlgError,
        RuntimeError,
    ) as exc:
        return _fail(exc, 3)
    print(json.dumps({"command": args.command, **summary}, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
