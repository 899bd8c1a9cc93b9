"""Wavefronts, cut locus, spheres/balls, and the transfer-time function.

The construction follows the continuation recipe: integrate a fan of
geodesics to build wavefronts, locate their self-intersections, continue
each intersection as a splitting curve, and keep the lowest curve as the
cut locus.  Spheres are wavefronts truncated at the cut time of each
direction; balls are classified by how the truncation and the loss of
vortex-bound directions change the boundary:

    type A: every direction alive, nothing truncated (t below the
            injectivity radius) - one smooth boundary curve;
    type B: truncation active but all directions alive - the boundary
            gains a second component around the vortex;
    type C: truncation active and some directions already fell into the
            vortex - one boundary curve with a corner on the cut locus.

Everything downstream of the cut selection leans on two pieces of
evidence rather than proof - the empty conjugate locus and the continuity
of the transfer time at weak-drift points - so reports carry that
assumption explicitly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .flow import StopReason, exponential
from .homotopy import (
    EvaluationFailure,
    SplitSeed,
    SplittingCurve,
    polish_split,
    splitting_curve,
)
from .model import DriftRegime, Vec2, VortexProblem, drift_strength, worker_count
from .shooting import BCExtremal, ShootingProblem, solve_all

_ASSUMPTION_NOTE = (
    "cut locus taken as the lowest splitting curve; relies on the scanned "
    "emptiness of the conjugate locus and on continuity of the transfer "
    "time at weak-drift points, neither of which is proved here"
)

# Sphere/ball typing abstains inside this band around the two transition
# times (truncation onset and first vortex capture).
_BOUNDARY_TOL = 2e-3


class PreconditionError(RuntimeError):
    """A documented precondition failed; the caller asked the impossible."""


class NotFound(RuntimeError):
    """No boundary-value extremal was found for the requested target."""


class BallType(Enum):
    A = "A"
    B = "B"
    C = "C"
    UNKNOWN = "Unknown"


# ---------------------------------------------------------------------------
# Wavefronts
# ---------------------------------------------------------------------------

@dataclass
class Wavefront:
    """Endpoints of the geodesic fan at a fixed time.

    points rows are NaN where the geodesic died before t (those angles form
    the gaps); self_intersections hold polished equal-time meeting points.
    """

    t: float
    alphas: np.ndarray
    points: np.ndarray
    alive: np.ndarray
    self_intersections: list[SplitSeed]

    @property
    def gaps(self) -> list[tuple[int, int]]:
        """Half-open index ranges [start, stop) of dead directions."""
        dead = ~self.alive
        if not dead.any():
            return []
        edges = np.nonzero(np.diff(dead.astype(int)))[0] + 1
        idx = np.concatenate([[0], edges, [dead.size]])
        return [
            (int(idx[i]), int(idx[i + 1]))
            for i in range(idx.size - 1)
            if dead[idx[i]]
        ]


def _wavefront_one(args) -> tuple[int, float, float, bool]:
    problem, i, alpha, t, rtol, atol = args
    traj = exponential(problem, alpha, t, rtol=rtol, atol=atol, dense=False)
    if traj.stop_reason is not StopReason.REACHED_TIME:
        return (i, math.nan, math.nan, False)
    x1, x2 = traj.endpoint_cartesian()
    return (i, x1, x2, True)


def _segment_intersections(alphas, points, alive):
    """Rough equal-time self-intersections of the wavefront polyline.

    Returns (x, alpha1, alpha2) triples from non-adjacent segment pairs,
    with alphas linearly interpolated inside each segment.
    """
    n = alphas.size
    d_alpha = 2.0 * math.pi / n
    seg_i = np.nonzero(alive & np.roll(alive, -1))[0]
    if seg_i.size < 4:
        return []
    a = points[seg_i]
    b = points[(seg_i + 1) % n]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    overlap = (
        (lo[:, None, 0] <= hi[None, :, 0])
        & (lo[None, :, 0] <= hi[:, None, 0])
        & (lo[:, None, 1] <= hi[None, :, 1])
        & (lo[None, :, 1] <= hi[:, None, 1])
    )
    ii = seg_i[:, None]
    jj = seg_i[None, :]
    shares_vertex = (
        (ii == jj)
        | ((ii + 1) % n == jj)
        | (ii == (jj + 1) % n)
    )
    upper = ii < jj
    k_idx, l_idx = np.nonzero(overlap & upper & ~shares_vertex)
    hits = []
    for k, l in zip(k_idx, l_idx):
        p, q = a[k], b[k] - a[k]
        r, s = a[l], b[l] - a[l]
        denom = q[0] * s[1] - q[1] * s[0]
        if abs(denom) < 1e-15:
            continue
        w = r - p
        u1 = (w[0] * s[1] - w[1] * s[0]) / denom
        u2 = (w[0] * q[1] - w[1] * q[0]) / denom
        if -1e-12 <= u1 <= 1.0 + 1e-12 and -1e-12 <= u2 <= 1.0 + 1e-12:
            x = p + u1 * q
            a1 = alphas[seg_i[k]] + u1 * d_alpha
            a2 = alphas[seg_i[l]] + u2 * d_alpha
            hits.append(((float(x[0]), float(x[1])), float(a1), float(a2)))
    return hits


def wavefront(
    problem: VortexProblem,
    t: float,
    N: int = 1000,
    *,
    rtol: float | None = 1e-9,
    atol: float | None = 1e-9,
    detect_intersections: bool = True,
) -> Wavefront:
    """Endpoints of N geodesics of duration t on a uniform angle grid.

    Directions whose geodesic dies early become gaps, never failures.
    Self-intersections are located by a segment sweep and polished into
    exact equal-time meeting points.  The default integration tolerance
    is looser than the problem's (front geometry needs far less accuracy
    than a grid step); pass None to use the problem's own tolerances.
    """
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    if N < 8:
        raise ValueError("the grid needs at least 8 directions")
    alphas = np.linspace(0.0, 2.0 * math.pi, N, endpoint=False)
    if t == 0.0:
        points = np.tile(np.asarray(problem.x0, dtype=float), (N, 1))
        return Wavefront(t, alphas, points, np.ones(N, dtype=bool), [])

    jobs = [(problem, i, float(a), t, rtol, atol) for i, a in enumerate(alphas)]
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_wavefront_one, jobs, chunksize=max(1, N // (8 * workers))))
    else:
        rows = [_wavefront_one(job) for job in jobs]
    points = np.full((N, 2), math.nan)
    alive = np.zeros(N, dtype=bool)
    for i, x1, x2, ok in rows:
        points[i] = (x1, x2)
        alive[i] = ok

    intersections: list[SplitSeed] = []
    if detect_intersections:
        for x, a1, a2 in _segment_intersections(alphas, points, alive):
            try:
                seed, _ = polish_split(problem, t, x, a1, a2, rtol=rtol, atol=atol)
            except (EvaluationFailure, np.linalg.LinAlgError):
                continue
            lo_a = min(seed.alpha1, seed.alpha2) % (2.0 * math.pi)
            hi_a = max(seed.alpha1, seed.alpha2) % (2.0 * math.pi)
            seed = SplitSeed(seed.t, lo_a, seed.x, hi_a)
            if any(
                abs(seed.alpha1 - s.alpha1) <= 1e-6 and abs(seed.alpha2 - s.alpha2) <= 1e-6
                for s in intersections
            ):
                continue
            intersections.append(seed)
    return Wavefront(t, alphas, points, alive, intersections)


def write_wavefront_csv(wf: Wavefront, path) -> None:
    """Columns: alpha, x1, x2, alive.  A zero-time front is a single point."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,x1,x2,alive\n")
        if wf.t == 0.0:
            x1, x2 = wf.points[0]
            fh.write(f"0,{x1:.17g},{x2:.17g},1\n")
            return
        for i in range(wf.alphas.size):
            fh.write(
                f"{wf.alphas[i]:.17g},{wf.points[i, 0]:.17g},"
                f"{wf.points[i, 1]:.17g},{int(wf.alive[i])}\n"
            )


# ---------------------------------------------------------------------------
# Cut times
# ---------------------------------------------------------------------------

class CutTimeMap:
    """Interpolated cut time as a function of the launch angle.

    Both branches of the splitting curve (the alpha1 samples and the alpha2
    samples) define cut times; each branch is cut into monotone runs before
    interpolation and queries outside every run return +inf (no cut known).
    """

    def __init__(self, curve: SplittingCurve):
        self._runs: list[tuple[np.ndarray, np.ndarray]] = []
        for branch_alpha in (curve.alpha1s, curve.lams):
            self._add_branch(np.asarray(branch_alpha, float), np.asarray(curve.ts, float))

    def _add_branch(self, alphas: np.ndarray, ts: np.ndarray) -> None:
        if alphas.size < 2:
            return
        direction = np.sign(np.diff(alphas))
        start = 0
        for i in range(1, direction.size):
            if direction[i] != 0.0 and direction[i] == -direction[i - 1]:
                self._append_run(alphas[start : i + 1], ts[start : i + 1])
                start = i
        self._append_run(alphas[start:], ts[start:])

    def _append_run(self, alphas: np.ndarray, ts: np.ndarray) -> None:
        if alphas.size < 2:
            return
        order = np.argsort(alphas)
        self._runs.append((alphas[order], ts[order]))

    def __call__(self, alpha) -> np.ndarray:
        q = np.atleast_1d(np.asarray(alpha, dtype=float)) % (2.0 * math.pi)
        out = np.full(q.shape, np.inf)
        for a_run, t_run in self._runs:
            for shift in (-2.0 * math.pi, 0.0, 2.0 * math.pi):
                qs = q + shift
                inside = (qs >= a_run[0]) & (qs <= a_run[-1])
                if inside.any():
                    vals = np.interp(qs[inside], a_run, t_run)
                    out[inside] = np.minimum(out[inside], vals)
        return out if np.ndim(alpha) else float(out[0])


def cut_locus(
    problem: VortexProblem,
    *,
    N: int = 1000,
    seed_ladder: tuple[float, ...] = (0.98, 1.02, 1.1, 1.2),
    t_cap_factor: float = 2.0,
    max_steps: int = 800,
) -> SplittingCurve:
    """Cut locus as the lowest splitting curve, for weak drift at x0.

    Seeds come from self-intersections of a wavefront taken just below the
    vortex-reach time (climbing the ladder if none appear), each seed is
    continued to a full splitting curve, and the curve with the smallest
    splitting time wins.  Refuses moderate/strong drift at x0: trapped and
    vanishing directions break the construction this function relies on.

    The curve's inner end spirals into the vortex (meeting point to the
    origin, splitting time to the vortex-reach time) with vanishing
    geometric scale, so continuation is truncated at radius 0.02 |x0|;
    directions whose splitting happens inside that disk therefore keep a
    conservative (infinite) cut time in the resulting map.
    """
    if drift_strength(problem.x0, problem.mu) is not DriftRegime.WEAK:
        raise PreconditionError(
            "cut construction requires weak drift at x0 (|mu| < |x0|); "
            f"got mu={problem.mu:g} at radius {problem.r0:g}"
        )
    t_vor = problem.r0
    seeds: list[SplitSeed] = []
    for factor in seed_ladder:
        wf = wavefront(problem, factor * t_vor, N)
        if wf.self_intersections:
            seeds = wf.self_intersections
            break
    if not seeds:
        raise RuntimeError("no wavefront self-intersections along the seeding ladder")
    r_inner = max(0.02 * problem.r0, 2.0 * problem.tol.r_min)
    curves = []
    for k, seed in enumerate(seeds):
        try:
            curves.append(
                splitting_curve(
                    problem, seed,
                    annulus=(r_inner, 100.0),
                    t_cap=t_cap_factor * t_vor,
                    max_steps=max_steps,
                    label=k + 1,
                )
            )
        except (EvaluationFailure, ValueError):
            continue
    if not curves:
        raise RuntimeError("no splitting curve could be continued from the seeds")
    curves.sort(key=lambda c: c.min_t)
    for rank, curve in enumerate(curves):
        curve.label = rank + 1
    return curves[0]


# ---------------------------------------------------------------------------
# Spheres and balls
# ---------------------------------------------------------------------------

@dataclass
class SphereBall:
    """Wavefront truncated at the cut times, with the ball's type."""

    t: float
    alphas: np.ndarray
    points: np.ndarray
    keep: np.ndarray
    polylines: list[np.ndarray]
    ball_type: BallType
    singular_points: list[tuple[float, float]]
    singular_alphas: list[float]
    truncated: bool
    n_dead: int


def _keep_runs(keep: np.ndarray) -> list[np.ndarray]:
    """Contiguous kept index runs, merged across the wrap-around."""
    n = keep.size
    if keep.all():
        return [np.arange(n)]
    if not keep.any():
        return []
    edges = np.nonzero(np.diff(keep.astype(int)))[0] + 1
    idx = np.concatenate([[0], edges, [n]])
    runs = [
        np.arange(idx[i], idx[i + 1])
        for i in range(idx.size - 1)
        if keep[idx[i]]
    ]
    if len(runs) > 1 and keep[0] and keep[-1]:
        runs[0] = np.concatenate([runs[-1], runs[0]])
        runs.pop()
    return runs


def sphere_and_ball(
    problem: VortexProblem,
    t: float,
    cut: SplittingCurve,
    *,
    N: int = 1000,
    boundary_tol: float = _BOUNDARY_TOL,
) -> SphereBall:
    """Truncate the time-t wavefront at the cut times and type the ball.

    Classification abstains (Unknown) within boundary_tol of the two
    transitions: the curve's minimal splitting time, and the first vortex
    capture at |x0| - r_min.
    """
    wf = wavefront(problem, t, N, detect_intersections=False)
    tc = CutTimeMap(cut)
    t_cut_vals = tc(wf.alphas)
    keep = wf.alive & (t <= t_cut_vals + 1e-9)
    truncated = bool(np.any(wf.alive & ~keep))
    n_dead = int(wf.alphas.size - int(wf.alive.sum()))

    runs = _keep_runs(keep)
    polylines = []
    for run in runs:
        pts = wf.points[run]
        if run.size == wf.alphas.size:
            pts = np.vstack([pts, pts[:1]])
        polylines.append(pts)

    # Refine each kept/cut interface to the angle where t_cut crosses t and
    # read the singular sphere point there.  The interpolated crossing is
    # then polished against the splitting map at fixed t (whose zero set
    # at fixed t is exactly the singular points), which removes the chord
    # error of the curve's polyline representation.
    singular_alphas: list[float] = []
    singular_points: list[tuple[float, float]] = []
    n = wf.alphas.size
    d_alpha = 2.0 * math.pi / n
    for i in range(n):
        j = (i + 1) % n
        if not (wf.alive[i] and wf.alive[j]):
            continue
        if keep[i] == keep[j]:
            continue
        g_i = t_cut_vals[i] - t
        g_j = tc(wf.alphas[i] + d_alpha) - t
        if not (np.isfinite(g_i) and np.isfinite(g_j)) or g_i * g_j > 0.0:
            continue
        a_b = float(
            brentq(lambda a: tc(a) - t, wf.alphas[i], wf.alphas[i] + d_alpha, xtol=1e-10)
        )
        traj = exponential(problem, a_b, t, dense=False)
        point = traj.endpoint_cartesian()
        k_near = int(np.argmin(np.abs(cut.ts - t) + np.hypot(
            cut.points[:, 0] - point[0], cut.points[:, 1] - point[1]
        )))
        try:
            seed, _ = polish_split(
                problem, t, point,
                float(cut.alpha1s[k_near]), float(cut.lams[k_near]),
                rtol=1e-9, atol=1e-9,
            )
            point = seed.x
            gap1 = abs((seed.alpha1 - a_b + math.pi) % (2.0 * math.pi) - math.pi)
            gap2 = abs((seed.alpha2 - a_b + math.pi) % (2.0 * math.pi) - math.pi)
            a_b = seed.alpha1 if gap1 <= gap2 else seed.alpha2
        except (EvaluationFailure, np.linalg.LinAlgError):
            pass
        singular_alphas.append(float(a_b % (2.0 * math.pi)))
        singular_points.append((float(point[0]), float(point[1])))

    t_inj = cut.min_t
    capture = problem.r0 - problem.tol.r_min
    near_inj = abs(t - t_inj) <= boundary_tol
    near_vor = (capture - boundary_tol) <= t <= (problem.r0 + boundary_tol)
    if near_inj or near_vor:
        ball_type = BallType.UNKNOWN
    elif n_dead > 0:
        ball_type = BallType.C
    elif truncated:
        ball_type = BallType.B
    else:
        ball_type = BallType.A
    return SphereBall(
        t, wf.alphas, wf.points, keep, polylines, ball_type,
        singular_points, singular_alphas, truncated, n_dead,
    )


def write_sphere_csv(sb: SphereBall, path) -> None:
    """Columns: piece, alpha, x1, x2 over the kept polyline points."""
    runs = _keep_runs(sb.keep)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("piece,alpha,x1,x2\n")
        for piece, run in enumerate(runs):
            for i in run:
                fh.write(
                    f"{piece},{sb.alphas[i]:.17g},"
                    f"{sb.points[i, 0]:.17g},{sb.points[i, 1]:.17g}\n"
                )


# ---------------------------------------------------------------------------
# Transfer-time function
# ---------------------------------------------------------------------------

def value(
    problem: VortexProblem,
    xf: Vec2,
    *,
    cut: SplittingCurve | None = None,
    n_starts: int = 24,
) -> tuple[float, BCExtremal]:
    """Minimal transfer time to xf and the extremal achieving it.

    Runs the multi-start boundary solver; when cut data is available,
    candidates past their direction's cut time are discarded first.
    """
    sp = ShootingProblem(problem, tuple(xf))
    candidates = solve_all(sp, n_starts)
    if cut is not None:
        tc = CutTimeMap(cut)
        kept = [s for s in candidates if s.T <= tc(s.alpha) + 1e-9]
        candidates = kept or candidates
    if not candidates:
        raise NotFound(f"no boundary extremal found for target {tuple(xf)}")
    best = candidates[0]
    return best.T, best


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class SynthesisReport:
    t_inj: float
    t_vor: float
    cut_curve: SplittingCurve
    spheres: dict[float, SphereBall]
    assumption: str = _ASSUMPTION_NOTE

    def as_dict(self) -> dict:
        return {
            "t_inj": self.t_inj,
            "t_vor": self.t_vor,
            "ball_type": {f"{t:.17g}": sb.ball_type.value for t, sb in self.spheres.items()},
            "assumption": self.assumption,
        }


def synthesis_report(
    problem: VortexProblem,
    times: tuple[float, ...] | None = None,
    *,
    N: int = 1000,
    max_steps: int = 800,
) -> SynthesisReport:
    """Cut locus plus sphere/ball snapshots at representative times.

    Default snapshot times show one ball of each type: below the
    injectivity radius, between it and the vortex time, and beyond.
    """
    cut = cut_locus(problem, N=N, max_steps=max_steps)
    t_vor = problem.r0
    t_inj = cut.min_t
    if times is None:
        times = (0.5 * t_inj, 0.5 * (t_inj + t_vor), 1.15 * t_vor)
    spheres = {float(t): sphere_and_ball(problem, float(t), cut, N=N) for t in times}
    return SynthesisReport(t_inj, t_vor, cut, spheres)
