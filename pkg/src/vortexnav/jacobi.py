"""Variational equations and conjugate-point tests along extremals.

A conjugate time is a zero of the 2x2 determinant det(dx(t), xdot(t)),
where dx is the position part of a variation that starts vertical
(dx(0) = 0) with costate perturbation orthogonal to the initial costate.
On the unit cotangent circle that perturbation is exactly the derivative
of the launch covector in the angle alpha, so the variation transported
here is d/dalpha of the exponential map.

Rather than the raw determinant, the scan records the smallest singular
value of the matrix with columns xdot(t) and dx(t)/|dx(t)| in the
Cartesian chart: it vanishes together with the determinant but stays
scale-free, which gives the three asymptotic signatures

    escaping geodesics  -> sigma_min -> 1,
    separating ones     -> sigma_min -> 0.5,
    vortex-bound ones   -> sigma_min -> 0 at the inner stop radius,

none of which touches zero at finite time when the conjugate locus is
empty.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .flow import (
    ExtremalState,
    IntegrationError,
    StopReason,
    cartesian_rhs,
)
from .model import VortexProblem, worker_count

# Variations start exactly vertical, so the determinant vanishes at t = 0
# structurally; zero detection ignores this initial window.
_T_SKIP = 1e-3
_BRENTQ_XTOL = 1e-10

# Scans are qualitative (plateau tolerances are percent-level), so they
# default to a cheaper integration than the problem-wide tolerance.
_SCAN_RTOL = 1e-9
_SCAN_ATOL = 1e-9

# The polar angle and its variation are cyclic: neither feeds back into any
# other equation, and a shared rotation of both matrix columns leaves the
# singular values unchanged.  Their relative error control can therefore be
# much looser than the rest of the state, which is what makes the final
# whirl into the inner stop radius affordable (the angle winds ~ mu/r there).
_ANGLE_RTOL = 1e-6

# A sign change of the determinant only counts when the normalized
# determinant (the sine of the angle between the columns) actually leaves
# the integration-noise band.  Observed noise on degenerate arcs is below
# 1e-8 at scan tolerances, while regular curves reach order one.
_DET_FLOOR = 1e-7

# Along exceptional directions the endpoint differential drops rank on the
# whole arc: the variation stays tangent to the flow and the determinant
# vanishes identically rather than crossing.  Curves whose normalized
# determinant never leaves this band carry no conjugate-time information.
_DEGENERATE_MAX = 1e-5


def variational_rhs(z: ExtremalState, delta_z, mu: float) -> tuple[float, float, float, float]:
    """Linearization of the polar extremal field at z, applied to delta_z.

    The angle theta is cyclic, so its column of the Jacobian vanishes and
    the p_theta row is identically zero.
    """
    dr, _, dpr, dpt = delta_z
    r, p_r, p_th = z.r, z.p_r, z.p_theta
    q = z.costate_norm
    q3 = q * q * q
    r2 = r * r
    r3 = r2 * r
    a_rr = p_r * p_th * p_th / (r3 * q3)
    a_rpr = p_th * p_th / (r2 * q3)
    a_rpt = -p_r * p_th / (r2 * q3)
    a_tr = -2.0 * (mu + p_th / q) / r3 + p_th**3 / (r3 * r2 * q3)
    a_tpr = -p_th * p_r / (r2 * q3)
    a_tpt = p_r * p_r / (r2 * q3)
    a_pr_r = -3.0 * p_th * (2.0 * mu + p_th / q) / (r2 * r2) + p_th**4 / (r3 * r3 * q3)
    a_pr_pr = -p_th * p_th * p_r / (r3 * q3)
    a_pr_pt = (2.0 * mu + p_th / q) / r3 + p_th * p_r * p_r / (r3 * q3)
    return (
        a_rr * dr + a_rpr * dpr + a_rpt * dpt,
        a_tr * dr + a_tpr * dpr + a_tpt * dpt,
        a_pr_r * dr + a_pr_pr * dpr + a_pr_pt * dpt,
        0.0,
    )


def _fused_polar_rhs(mu: float):
    """Extremal field plus its linearization in one flat 8-vector.

    Layout: (r, theta, p_r, p_theta, dr, dtheta, dp_r, dp_theta).  The
    algebra must stay in sync with variational_rhs above; it is inlined
    here because this function runs millions of times per scan.
    """

    def rhs(t, y):
        r, pr, pt = y[0], y[2], y[3]
        dr_, dpr_, dpt_ = y[4], y[6], y[7]
        r2 = r * r
        r3 = r2 * r
        q = math.sqrt(pr * pr + pt * pt / r2)
        q3 = q * q * q
        f_r = pr / q
        f_th = (mu + pt / q) / r2
        f_pr = pt / r3 * (2.0 * mu + pt / q)
        a_rr = pr * pt * pt / (r3 * q3)
        a_rpr = pt * pt / (r2 * q3)
        a_rpt = -pr * pt / (r2 * q3)
        a_tr = -2.0 * (mu + pt / q) / r3 + pt**3 / (r3 * r2 * q3)
        a_tpr = -pt * pr / (r2 * q3)
        a_tpt = pr * pr / (r2 * q3)
        a_pr_r = -3.0 * pt * (2.0 * mu + pt / q) / (r2 * r2) + pt**4 / (r3 * r3 * q3)
        a_pr_pr = -pt * pt * pr / (r3 * q3)
        a_pr_pt = (2.0 * mu + pt / q) / r3 + pt * pr * pr / (r3 * q3)
        return (
            f_r,
            f_th,
            f_pr,
            0.0,
            a_rr * dr_ + a_rpr * dpr_ + a_rpt * dpt_,
            a_tr * dr_ + a_tpr * dpr_ + a_tpt * dpt_,
            a_pr_r * dr_ + a_pr_pr * dpr_ + a_pr_pt * dpt_,
            0.0,
        )

    return rhs


def _polar_radius_events(tol):
    def hit_inner(t, y):
        return y[0] - tol.r_min

    hit_inner.terminal = True
    hit_inner.direction = -1.0

    def hit_outer(t, y):
        return y[0] - tol.r_max

    hit_outer.terminal = True
    hit_outer.direction = 1.0

    return (hit_inner, hit_outer)


def _cartesian_parts(ys: np.ndarray):
    """Polar fused samples (n, 8) -> Cartesian states (n, 4) and dx (n, 2)."""
    r, th, pr, pt = ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3]
    dr, dth = ys[:, 4], ys[:, 5]
    c, s = np.cos(th), np.sin(th)
    zs = np.column_stack([r * c, r * s, c * pr - s * pt / r, s * pr + c * pt / r])
    dxs = np.column_stack([dr * c - r * s * dth, dr * s + r * c * dth])
    return zs, dxs


@dataclass
class SigmaCurve:
    """Sampled sigma_min along one geodesic, with any conjugate time found."""

    alpha: float
    ts: np.ndarray
    sigma: np.ndarray
    first_conjugate: float | None
    stop_reason: StopReason
    t_end: float


def _sigma_from_parts(zs: np.ndarray, dzs: np.ndarray, mu: float):
    """Vectorized sigma_min and fully normalized determinant at each sample.

    The second output divides the determinant by both column norms, so it
    is the sine of the angle between the velocity and the variation: a
    dimensionless, scale-free zero-crossing indicator.
    """
    x1, x2, p1, p2 = zs[:, 0], zs[:, 1], zs[:, 2], zs[:, 3]
    r2 = x1 * x1 + x2 * x2
    pn = np.sqrt(p1 * p1 + p2 * p2)
    a = mu / r2
    f1 = -a * x2 + p1 / pn
    f2 = a * x1 + p2 / pn
    v1, v2 = dzs[:, 0], dzs[:, 1]
    det_raw = f1 * v2 - f2 * v1
    vn = np.hypot(v1, v2)
    vn = np.where(vn > 0.0, vn, np.inf)
    d = det_raw / vn
    e = f1 * f1 + f2 * f2 + 1.0
    disc = np.sqrt(np.maximum(e * e - 4.0 * d * d, 0.0))
    sigma = np.sqrt(np.maximum(0.5 * (e - disc), 0.0))
    det_unit = d / np.hypot(f1, f2)
    return sigma, det_unit


def conjugate_test(
    problem: VortexProblem,
    alpha: float,
    t_max: float,
    *,
    n_samples: int = 401,
    rtol: float | None = None,
    atol: float | None = None,
) -> SigmaCurve:
    """Transport the alpha-variation and look for a conjugate time.

    Samples sigma_min on [t_skip, t_max] (or up to the stop event if the
    geodesic dies first), refines every sign change of the determinant by
    root bracketing, and returns the earliest zero if any.  When the
    geodesic stops early, a final sample at the stop radius itself is
    appended so the end value of sigma is read where the event fired.

    The fused system is integrated in the polar chart: the angle and its
    variation are cyclic there, so their error control can be relaxed
    without touching sigma, which stays affordable through the fast final
    winding of vortex-bound geodesics.
    """
    if t_max <= _T_SKIP:
        raise ValueError("t_max too small to sample past the vertical start")
    tol = problem.tol
    rt = tol.rtol if rtol is None else rtol
    at = tol.atol if atol is None else atol
    angle_rt = max(rt, _ANGLE_RTOL)
    rtol_vec = np.array([rt, angle_rt, rt, rt, rt, angle_rt, rt, rt])
    y0 = (
        problem.r0,
        problem.theta0,
        math.cos(alpha),
        problem.r0 * math.sin(alpha),
        0.0,
        0.0,
        -math.sin(alpha),
        problem.r0 * math.cos(alpha),
    )
    t_eval = np.linspace(_T_SKIP, t_max, n_samples)
    sol = solve_ivp(
        _fused_polar_rhs(problem.mu),
        (0.0, t_max),
        y0,
        method="RK45",
        rtol=rtol_vec,
        atol=at,
        dense_output=True,
        events=_polar_radius_events(tol),
        t_eval=t_eval,
    )
    if sol.status == -1:
        last_r = sol.y[0, -1] if sol.y.size else problem.r0
        if last_r <= 10.0 * tol.r_min:
            reason = StopReason.HIT_INNER_RADIUS
            t_end = float(sol.t[-1]) if sol.t.size else 0.0
        else:
            raise IntegrationError(f"integrator failed at r={last_r:.6g}: {sol.message}")
    elif sol.status == 1:
        inner = sol.t_events[0]
        reason = (
            StopReason.HIT_INNER_RADIUS if inner.size else StopReason.HIT_OUTER_RADIUS
        )
        t_end = float(inner[0] if inner.size else sol.t_events[1][0])
    else:
        reason = StopReason.REACHED_TIME
        t_end = t_max
    ts = sol.t
    if ts.size == 0:
        # Died before the first sample: nothing measurable.
        return SigmaCurve(alpha, ts, np.empty(0), None, reason, t_end)
    zs, dxs = _cartesian_parts(sol.y.T)
    sigma, det_unit = _sigma_from_parts(zs, dxs, problem.mu)

    def det_at(t: float) -> float:
        z_row, dx_row = _cartesian_parts(sol.sol(t)[None, :])
        f = cartesian_rhs(z_row[0], problem.mu)
        return f[0] * dx_row[0, 1] - f[1] * dx_row[0, 0]

    first: float | None = None
    if np.max(np.abs(det_unit)) >= _DEGENERATE_MAX:
        flips = np.diff(np.sign(det_unit)) != 0
        genuine = np.maximum(np.abs(det_unit[:-1]), np.abs(det_unit[1:])) > _DET_FLOOR
        for i in np.nonzero(flips & genuine)[0]:
            root = brentq(det_at, ts[i], ts[i + 1], xtol=_BRENTQ_XTOL)
            if root > _T_SKIP:
                first = float(root)
                break
    if reason is not StopReason.REACHED_TIME and t_end > ts[-1] + 1e-12:
        z_row, dx_row = _cartesian_parts(sol.sol(t_end)[None, :])
        sigma_end, _ = _sigma_from_parts(z_row, dx_row, problem.mu)
        ts = np.append(ts, t_end)
        sigma = np.append(sigma, sigma_end[0])
    return SigmaCurve(alpha, ts, sigma, first, reason, t_end)


def plateau_estimate(curve: SigmaCurve) -> float | None:
    """Estimate the limiting value of sigma_min for a surviving geodesic.

    Escaping geodesics approach their plateau like C/t (the drift term in
    the velocity column decays with the radius), so two tail samples give
    the limit by Richardson extrapolation:  with s(t) = s_inf - C/t,
    s_inf = (t2 s2 - t1 s1) / (t2 - t1).  Returns None when the curve
    stopped early or is too short to have a tail.
    """
    if curve.stop_reason is not StopReason.REACHED_TIME or curve.ts.size < 8:
        return None
    t2 = curve.ts[-1]
    i1 = int(np.searchsorted(curve.ts, 0.6 * t2))
    i1 = min(max(i1, 0), curve.ts.size - 2)
    t1, s1 = curve.ts[i1], curve.sigma[i1]
    s2 = curve.sigma[-1]
    return float((t2 * s2 - t1 * s1) / (t2 - t1))


@dataclass
class ConjugateScan:
    """Conjugate test swept over a uniform grid of launch angles."""

    alpha_grid: np.ndarray
    curves: list[SigmaCurve | None]
    first_zeros: list[float | None]
    errors: dict[int, str]
    t_max: float

    @property
    def n_conjugate(self) -> int:
        return sum(1 for t in self.first_zeros if t is not None)


def _scan_one(args) -> tuple[int, SigmaCurve | None, str | None]:
    i, problem, alpha, t_max, n_samples, rtol, atol = args
    try:
        curve = conjugate_test(
            problem, alpha, t_max, n_samples=n_samples, rtol=rtol, atol=atol
        )
        return (i, curve, None)
    except Exception as exc:  # per-angle isolation: the sweep must finish
        return (i, None, f"{type(exc).__name__}: {exc}")


def conjugate_scan(
    problem: VortexProblem,
    N: int,
    *,
    t_max: float = 50.0,
    n_samples: int = 201,
    rtol: float = _SCAN_RTOL,
    atol: float = _SCAN_ATOL,
) -> ConjugateScan:
    """Run conjugate_test on N angles uniformly covering the circle.

    Angle failures are isolated into the errors map instead of aborting.
    Work is split over processes when more than one worker is configured.
    """
    if N < 2:
        raise ValueError("the grid needs at least two angles")
    alpha_grid = np.linspace(0.0, 2.0 * math.pi, N, endpoint=False)
    jobs = [
        (i, problem, float(a), t_max, n_samples, rtol, atol)
        for i, a in enumerate(alpha_grid)
    ]
    curves: list[SigmaCurve | None] = [None] * N
    errors: dict[int, str] = {}
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_one, jobs, chunksize=max(1, N // (8 * workers))))
    else:
        results = [_scan_one(job) for job in jobs]
    for i, curve, err in results:
        curves[i] = curve
        if err is not None:
            errors[i] = err
    first_zeros = [c.first_conjugate if c is not None else None for c in curves]
    return ConjugateScan(alpha_grid, curves, first_zeros, errors, t_max)


def write_scan_csv(scan: ConjugateScan, path) -> None:
    """Long-format CSV: one row per (alpha, t) sample."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,t,sigma_min\n")
        for curve in scan.curves:
            if curve is None:
                continue
            for t, s in zip(curve.ts, curve.sigma):
                fh.write(f"{curve.alpha:.17g},{t:.17g},{s:.17g}\n")


def scan_summary(scan: ConjugateScan) -> dict:
    """JSON-ready digest: grid size, failures, and any conjugate times."""
    return {
        "n_alpha": int(scan.alpha_grid.size),
        "t_max": scan.t_max,
        "n_conjugate": scan.n_conjugate,
        "first_zeros": {
            f"{scan.alpha_grid[i]:.17g}": t
            for i, t in enumerate(scan.first_zeros)
            if t is not None
        },
        "n_errors": len(scan.errors),
        "errors": {str(i): msg for i, msg in scan.errors.items()},
    }
