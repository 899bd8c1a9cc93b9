"""Predictor-corrector continuation of parameterized zero sets.

follow_path tracks a solution branch of F(y, lambda) = 0 as the scalar
parameter moves: the tangent of the Davidenko flow is computed from a
bordered linear system (which keeps working at folds, where the plain
dy/dlambda parameterization degenerates), an embedded Euler/Heun pair
adapts the predictor step, and a Newton corrector pulls each predicted
point back onto the branch in the hyperplane orthogonal to the tangent.

The concrete client is splitting-curve continuation: the map

    F(t, alpha1, x; alpha2) = (x - exp(t, alpha1), x - exp(t, alpha2))

vanishes exactly on pairs of distinct geodesics that meet at x in equal
time t, and its zero path swept by alpha2 is the locus of splitting
points.  Jacobians are assembled from the transported variations, so no
finite differencing enters the continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .flow import (
    StopReason,
    cartesian_rhs,
    cartesian_start,
    cartesian_start_dalpha,
    exponential,
    integrate_cartesian,
)
from .model import VortexProblem

_CORRECTOR_TOL = 1e-10
_MAX_CORRECTOR_ITER = 10
_PRED_TOL = 1e-3


class PathStop(Enum):
    LEFT_ANNULUS = "LeftAnnulus"
    PARAMETER_BOUND = "ParameterBound"
    STEP_FAILURE = "StepFailure"
    STEP_BUDGET = "StepBudget"


class EvaluationFailure(RuntimeError):
    """The map cannot be evaluated here (e.g. the geodesic dies before t)."""


@dataclass
class ZeroPath:
    """Ordered samples (y, lambda) of one continuation run.

    stop_reason describes the forward end; merged two-sided paths also
    carry the reason their low-lambda end stopped.
    """

    ys: np.ndarray
    lams: np.ndarray
    stop_reason: PathStop
    stop_reason_start: PathStop | None = None

    @property
    def samples(self) -> list[tuple[np.ndarray, float]]:
        return [(self.ys[i], float(self.lams[i])) for i in range(self.lams.size)]


def _tangent(jacobian, y, lam, tau_ref):
    """Unit tangent of the zero path, oriented along tau_ref."""
    j_y, j_lam = jacobian(y, lam)
    n = y.size
    bordered = np.empty((n + 1, n + 1))
    bordered[:n, :n] = j_y
    bordered[:n, n] = j_lam
    bordered[n, :] = tau_ref
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    tau = np.linalg.solve(bordered, rhs)
    tau /= np.linalg.norm(tau)
    return tau if float(tau @ tau_ref) >= 0.0 else -tau


def _correct(F, jacobian, u, tau, tol):
    """Newton iterations in the hyperplane through u orthogonal to tau."""
    n = u.size - 1
    u = u.copy()
    anchor = u.copy()
    for _ in range(_MAX_CORRECTOR_ITER):
        y, lam = u[:n], float(u[n])
        res = F(y, lam)
        if float(np.linalg.norm(res)) <= tol:
            return u
        j_y, j_lam = jacobian(y, lam)
        bordered = np.empty((n + 1, n + 1))
        bordered[:n, :n] = j_y
        bordered[:n, n] = j_lam
        bordered[n, :] = tau
        rhs = np.empty(n + 1)
        rhs[:n] = -res
        rhs[n] = -float(tau @ (u - anchor))
        u = u + np.linalg.solve(bordered, rhs)
    y, lam = u[:n], float(u[n])
    if float(np.linalg.norm(F(y, lam))) <= tol:
        return u
    return None


def _land_on_bound(F, jacobian, y, lam_bound, tol):
    """Fixed-lambda Newton used to finish exactly on a parameter bound."""
    y = y.copy()
    for _ in range(_MAX_CORRECTOR_ITER):
        res = F(y, lam_bound)
        if float(np.linalg.norm(res)) <= tol:
            return y
        j_y, _ = jacobian(y, lam_bound)
        y = y + np.linalg.solve(j_y, -res)
    if float(np.linalg.norm(F(y, lam_bound))) <= tol:
        return y
    return None


def follow_path(
    F: Callable,
    jacobian: Callable,
    seed: tuple[Sequence[float], float],
    lambda_range: tuple[float, float],
    in_domain: Callable | None = None,
    *,
    direction: int = 1,
    corrector_tol: float = _CORRECTOR_TOL,
    h0: float = 1e-2,
    h_min: float = 1e-9,
    h_max: float = 0.1,
    max_steps: int = 20000,
) -> ZeroPath:
    """Continue the zero path of F from the seed in one lambda direction.

    F(y, lam) -> R^n and jacobian(y, lam) -> (dF/dy, dF/dlam).  The path
    stops when lambda reaches its range bound (landing exactly on it), when
    in_domain(y, lam) turns false, when the corrector keeps failing at the
    minimal step, or when max_steps predictor attempts are spent (paths
    that wind into a shrinking feature, e.g. a spiral endpoint, would
    otherwise consume unbounded effort on vanishing arclength).
    """
    y0 = np.asarray(seed[0], dtype=float)
    lam0 = float(seed[1])
    lo, hi = lambda_range
    if not (lo <= lam0 <= hi):
        raise ValueError("seed parameter outside its range")
    res0 = float(np.linalg.norm(F(y0, lam0)))
    if res0 > 100.0 * corrector_tol:
        raise ValueError(f"seed is not on the zero set (|F| = {res0:.3e})")

    n = y0.size
    u = np.concatenate([y0, [lam0]])
    tau_ref = np.zeros(n + 1)
    tau_ref[n] = float(np.sign(direction)) or 1.0

    ys = [u[:n].copy()]
    lams = [float(u[n])]
    h = h0
    stop = PathStop.STEP_FAILURE
    steps = 0
    while steps < max_steps:
        steps += 1
        try:
            tau = _tangent(jacobian, u[:n], float(u[n]), tau_ref)
            # Embedded Euler/Heun predictor pair on the Davidenko flow.
            u_euler = u + h * tau
            tau_mid = _tangent(jacobian, u_euler[:n], float(u_euler[n]), tau)
            u_pred = u + 0.5 * h * (tau + tau_mid)
            err = float(np.linalg.norm(u_pred - u_euler))
            if err > _PRED_TOL:
                h = max(h_min, h * max(0.2, 0.9 * math.sqrt(_PRED_TOL / err)))
                continue
            u_new = _correct(F, jacobian, u_pred, tau, corrector_tol)
        except (EvaluationFailure, np.linalg.LinAlgError):
            u_new = None
        if u_new is None:
            if h <= h_min * (1.0 + 1e-12):
                stop = PathStop.STEP_FAILURE
                break
            h = max(h_min, 0.25 * h)
            continue

        lam_new = float(u_new[n])
        if lam_new < lo or lam_new > hi:
            bound = lo if lam_new < lo else hi
            try:
                y_b = _land_on_bound(F, jacobian, u_new[:n], bound, corrector_tol)
            except (EvaluationFailure, np.linalg.LinAlgError):
                y_b = None
            if y_b is not None and (in_domain is None or in_domain(y_b, bound)):
                ys.append(y_b)
                lams.append(bound)
            stop = PathStop.PARAMETER_BOUND
            break
        if in_domain is not None and not in_domain(u_new[:n], lam_new):
            stop = PathStop.LEFT_ANNULUS
            break

        u = u_new
        ys.append(u[:n].copy())
        lams.append(lam_new)
        tau_ref = tau
        grow = 0.9 * math.sqrt(_PRED_TOL / max(err, 1e-16))
        h = min(h_max, h * min(2.0, max(1.0, grow)))
    else:
        stop = PathStop.STEP_BUDGET

    return ZeroPath(np.asarray(ys), np.asarray(lams), stop)


# ---------------------------------------------------------------------------
# Splitting curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSeed:
    """One equal-time meeting point of two distinct geodesics."""

    t: float
    alpha1: float
    x: tuple[float, float]
    alpha2: float


class _EndpointCache:
    """Memoized endpoint data exp(t, alpha) with optional variation.

    Continuation evaluates F and its Jacobian at identical (t, alpha) pairs
    many times per corrector sweep; caching the integrations roughly halves
    the cost of a step.
    """

    def __init__(
        self,
        problem: VortexProblem,
        *,
        rtol: float | None = None,
        atol: float | None = None,
    ):
        self.problem = problem
        self.rtol = rtol
        self.atol = atol
        self._plain: dict[tuple[float, float], np.ndarray] = {}
        self._full: dict[tuple[float, float], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _run(self, t: float, alpha: float, variation: bool):
        problem = self.problem
        # Survival pre-check in the polar chart, which has no rotational
        # oscillation and so passes through near-vortex dives orders of
        # magnitude faster than the Cartesian integration below would
        # grind toward its inner-radius event.  Accuracy is irrelevant
        # here; only the dead/alive decision is used.
        probe_tol = max(self.rtol or 0.0, 1e-6)
        probe = exponential(problem, alpha, t, rtol=probe_tol, atol=probe_tol, dense=False)
        if probe.stop_reason is not StopReason.REACHED_TIME:
            raise EvaluationFailure(f"geodesic alpha={alpha:.6g} dies before t={t:.6g}")
        z0 = cartesian_start(problem, alpha)
        dz0 = cartesian_start_dalpha(problem, alpha) if variation else None
        run = integrate_cartesian(problem, z0, t, dz0=dz0, rtol=self.rtol, atol=self.atol)
        if run.stop_reason is not StopReason.REACHED_TIME:
            raise EvaluationFailure(f"geodesic alpha={alpha:.6g} dies before t={t:.6g}")
        return run

    def position(self, t: float, alpha: float) -> np.ndarray:
        key = (t, alpha)
        hit = self._full.get(key)
        if hit is not None:
            return hit[0]
        pos = self._plain.get(key)
        if pos is None:
            if len(self._plain) > 4096:
                self._plain.clear()
            pos = self._run(t, alpha, False).zs[-1, :2].copy()
            self._plain[key] = pos
        return pos

    def with_derivatives(self, t: float, alpha: float):
        """(position, d/dt, d/dalpha) of the endpoint."""
        key = (t, alpha)
        hit = self._full.get(key)
        if hit is None:
            if len(self._full) > 4096:
                self._full.clear()
            run = self._run(t, alpha, True)
            z_end = run.zs[-1]
            hit = (
                z_end[:2].copy(),
                cartesian_rhs(z_end, self.problem.mu)[:2],
                run.dzs[-1, :2].copy(),
            )
            self._full[key] = hit
        return hit


def split_map(problem: VortexProblem, cache: _EndpointCache | None = None):
    """Build (F, jacobian) closures of the splitting map in y=(t, a1, x)."""
    cache = cache or _EndpointCache(problem)

    def F(y, lam):
        t, a1 = float(y[0]), float(y[1])
        x = y[2:4]
        e1 = cache.position(t, a1)
        e2 = cache.position(t, float(lam))
        return np.concatenate([x - e1, x - e2])

    def jacobian(y, lam):
        t, a1 = float(y[0]), float(y[1])
        _, de1_dt, de1_da = cache.with_derivatives(t, a1)
        _, de2_dt, de2_da = cache.with_derivatives(t, float(lam))
        j_y = np.zeros((4, 4))
        j_y[0:2, 0] = -de1_dt
        j_y[2:4, 0] = -de2_dt
        j_y[0:2, 1] = -de1_da
        j_y[0:2, 2:4] = np.eye(2)
        j_y[2:4, 2:4] = np.eye(2)
        j_lam = np.zeros(4)
        j_lam[2:4] = -de2_da
        return j_y, j_lam

    return F, jacobian


def polish_split(
    problem: VortexProblem,
    t: float,
    x: Sequence[float],
    alpha1: float,
    alpha2: float,
    *,
    tol: float = 1e-11,
    max_iter: int = 15,
    rtol: float | None = None,
    atol: float | None = None,
) -> tuple[SplitSeed, float]:
    """Newton-polish a rough equal-time intersection at fixed t.

    Unknowns are (x, alpha1, alpha2); returns the polished seed and its
    residual.  Raises EvaluationFailure when the iteration collapses onto
    alpha1 = alpha2 (a tangential, non-splitting contact) or fails.
    rtol/atol control the endpoint integrations (default: the problem's
    tolerances); the residual is measured against those integrations.
    """
    cache = _EndpointCache(problem, rtol=rtol, atol=atol)
    u = np.array([x[0], x[1], alpha1, alpha2], dtype=float)
    for _ in range(max_iter):
        e1, _, d1_da = cache.with_derivatives(t, float(u[2]))
        e2, _, d2_da = cache.with_derivatives(t, float(u[3]))
        res = np.concatenate([u[:2] - e1, u[:2] - e2])
        if float(np.linalg.norm(res)) <= tol:
            break
        jac = np.zeros((4, 4))
        jac[0:2, 0:2] = np.eye(2)
        jac[2:4, 0:2] = np.eye(2)
        jac[0:2, 2] = -d1_da
        jac[2:4, 3] = -d2_da
        try:
            u = u + np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            # Singular exactly when the two directions coincide.
            raise EvaluationFailure(f"singular polish step: {exc}") from exc
    else:
        res = np.concatenate(
            [u[:2] - cache.position(t, float(u[2])), u[:2] - cache.position(t, float(u[3]))]
        )
        if float(np.linalg.norm(res)) > tol:
            raise EvaluationFailure("intersection polish did not converge")
    gap = abs(float(u[2]) - float(u[3])) % (2.0 * math.pi)
    gap = min(gap, 2.0 * math.pi - gap)
    if gap < 1e-8:
        raise EvaluationFailure("intersection degenerates to a single direction")
    residual = float(np.linalg.norm(res))
    return SplitSeed(t, float(u[2]), (float(u[0]), float(u[1])), float(u[3])), residual


@dataclass
class SplittingCurve:
    """Zero path of the splitting map, merged across both sweep directions.

    Samples are ordered by increasing alpha2; y rows are (t, alpha1, x1, x2).
    """

    path: ZeroPath
    label: int

    @property
    def lams(self) -> np.ndarray:
        return self.path.lams

    @property
    def ts(self) -> np.ndarray:
        return self.path.ys[:, 0]

    @property
    def alpha1s(self) -> np.ndarray:
        return self.path.ys[:, 1]

    @property
    def points(self) -> np.ndarray:
        return self.path.ys[:, 2:4]

    @property
    def min_t(self) -> float:
        """Minimum splitting time over the curve, parabola-refined."""
        ts = self.ts
        i = int(np.argmin(ts))
        if 0 < i < ts.size - 1:
            x0, x1, x2 = self.lams[i - 1 : i + 2]
            f0, f1, f2 = ts[i - 1 : i + 2]
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            if denom != 0.0:
                a = (x2 * (f1 - f0) + x1 * (f0 - f2) + x0 * (f2 - f1)) / denom
                b = (x2 * x2 * (f0 - f1) + x1 * x1 * (f2 - f0) + x0 * x0 * (f1 - f2)) / denom
                if a > 0.0:
                    x_v = -b / (2.0 * a)
                    if x0 <= x_v <= x2:
                        c = f1 - a * x1 * x1 - b * x1
                        return min(float(ts[i]), a * x_v * x_v + b * x_v + c)
        return float(ts[i])

    def t_of_alpha2(self, alpha2) -> np.ndarray:
        """Interpolated splitting time at parameter alpha2; inf off-curve."""
        order = np.argsort(self.lams)
        lam_s, t_s = self.lams[order], self.ts[order]
        q = np.atleast_1d(np.asarray(alpha2, dtype=float))
        out = np.full(q.shape, np.inf)
        inside = (q >= lam_s[0]) & (q <= lam_s[-1])
        out[inside] = np.interp(q[inside], lam_s, t_s)
        return out if np.ndim(alpha2) else float(out[0])

    def summary_dict(self) -> dict:
        return {
            "label": self.label,
            "min_t": self.min_t,
            "lambda_range": [float(self.lams.min()), float(self.lams.max())],
            "n_samples": int(self.lams.size),
            "stop_reason": {
                "low": self.path.stop_reason_start.value
                if self.path.stop_reason_start
                else None,
                "high": self.path.stop_reason.value,
            },
        }


def write_splitting_csv(curve: SplittingCurve, path) -> None:
    """Columns: lambda, t, alpha1, x1, x2."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda,t,alpha1,x1,x2\n")
        for i in range(curve.lams.size):
            row = (
                curve.lams[i],
                curve.ts[i],
                curve.alpha1s[i],
                curve.points[i, 0],
                curve.points[i, 1],
            )
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def splitting_curve(
    problem: VortexProblem,
    seed: SplitSeed,
    *,
    annulus: tuple[float, float] = (0.005, 100.0),
    t_cap: float | None = None,
    lambda_span: float = 2.0 * math.pi,
    corrector_tol: float = _CORRECTOR_TOL,
    h_max: float = 0.05,
    label: int = 1,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    max_steps: int = 2000,
) -> SplittingCurve:
    """Continue the splitting map through the seed in both alpha2 directions.

    The sweep stops where the meeting point leaves the annulus, where
    alpha2 has moved by lambda_span from the seed, or (when t_cap is set)
    where the splitting time exceeds t_cap; the two half-paths are merged
    into one curve ordered by alpha2.  The endpoint integrations run at
    rtol/atol: the corrector converges on that discrete map, so the curve
    is self-consistent at corrector_tol while its absolute placement is
    accurate to the integration tolerance, ample for locating minima.
    """
    cache = _EndpointCache(problem, rtol=rtol, atol=atol)
    F, jacobian = split_map(problem, cache)
    r_lo, r_hi = annulus

    def in_domain(y, lam):
        t = y[0]
        if t <= 0.0 or (t_cap is not None and t > t_cap):
            return False
        r = math.hypot(y[2], y[3])
        return r_lo <= r <= r_hi

    y0 = np.array([seed.t, seed.alpha1, seed.x[0], seed.x[1]])
    res0 = float(np.linalg.norm(F(y0, seed.alpha2)))
    if res0 > 100.0 * corrector_tol:
        polished, _ = polish_split(
            problem, seed.t, seed.x, seed.alpha1, seed.alpha2, rtol=rtol, atol=atol
        )
        seed = polished
        y0 = np.array([seed.t, seed.alpha1, seed.x[0], seed.x[1]])
    lam_range = (seed.alpha2 - lambda_span, seed.alpha2 + lambda_span)
    down = follow_path(
        F, jacobian, (y0, seed.alpha2), lam_range, in_domain,
        direction=-1, corrector_tol=corrector_tol, h_max=h_max,
        max_steps=max_steps,
    )
    up = follow_path(
        F, jacobian, (y0, seed.alpha2), lam_range, in_domain,
        direction=1, corrector_tol=corrector_tol, h_max=h_max,
        max_steps=max_steps,
    )
    ys = np.vstack([down.ys[:0:-1], up.ys])
    lams = np.concatenate([down.lams[:0:-1], up.lams])
    merged = ZeroPath(ys, lams, up.stop_reason, down.stop_reason)
    return SplittingCurve(merged, label)


def revalidate_splitting_curve(
    problem: VortexProblem,
    curve: SplittingCurve,
    *,
    rtol: float | None = None,
    atol: float | None = None,
) -> float:
    """Max defining-equation residual over all samples, freshly integrated.

    The fresh integrations here do not share step sequences with the ones
    the corrector converged on, so the residual floor is a few times the
    integration tolerance, not the corrector tolerance; at the problem's
    own (tighter) tolerance this measures the absolute placement accuracy
    of the curve.
    """
    cache = _EndpointCache(problem, rtol=rtol, atol=atol)
    worst = 0.0
    for i in range(curve.lams.size):
        t = float(curve.ts[i])
        x = curve.points[i]
        r1 = x - cache.position(t, float(curve.alpha1s[i]))
        r2 = x - cache.position(t, float(curve.lams[i]))
        worst = max(worst, float(np.linalg.norm(np.concatenate([r1, r2]))))
    return worst
