"""Extremal flow of the time-minimal vortex problem.

The maximum principle reduces the problem to the Hamiltonian system of the
maximized Hamiltonian, written in the polar chart (r, theta, p_r, p_theta) as

    H = mu p_theta / r^2 + |p|_r,        |p|_r = sqrt(p_r^2 + p_theta^2/r^2),

    dr/dt      = p_r / |p|_r
    dtheta/dt  = (mu + p_theta/|p|_r) / r^2
    dp_r/dt    = (p_theta / r^3) (2 mu + p_theta/|p|_r)
    dp_theta/dt = 0                 (theta is cyclic)

and in the Cartesian chart (x1, x2, p1, p2) as

    dx/dt = F0(x) + p/|p|,
    dp1/dt = -(mu/r^4) (2 x1 x2 p1 - (x1^2 - x2^2) p2)
    dp2/dt = +(mu/r^4) ((x1^2 - x2^2) p1 + 2 x1 x2 p2).

This module integrates the flow (the exponential map) with event-based
stopping at the inner/outer radii, optionally transporting a first-order
variation; it also provides the polynomial time-rescaled chart used for
integrability checks and the closed form of the abnormal radius.

Initial covectors are parameterized on the unit cotangent circle by
p0(alpha) = (cos alpha, r0 sin alpha) in the polar chart, i.e.
(cos(theta0+alpha), sin(theta0+alpha)) in the Cartesian one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .model import Tolerances, VortexProblem

_METHOD = "DOP853"


class StopReason(Enum):
    REACHED_TIME = "ReachedTime"
    HIT_INNER_RADIUS = "HitInnerRadius"
    HIT_OUTER_RADIUS = "HitOuterRadius"


class IntegrationError(RuntimeError):
    """Integrator failure away from the inner radius."""


@dataclass(frozen=True)
class ExtremalState:
    """Point of the polar-chart extremal system."""

    r: float
    theta: float
    p_r: float
    p_theta: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0):
            raise ValueError("radius must be positive")
        if self.p_r == 0.0 and self.p_theta == 0.0:
            raise ValueError("extremals carry a nonvanishing costate")

    @property
    def costate_norm(self) -> float:
        return costate_norm(self.r, self.p_r, self.p_theta)


def costate_norm(r: float, p_r: float, p_theta: float) -> float:
    """|p|_r = sqrt(p_r^2 + p_theta^2 / r^2)."""
    return math.sqrt(p_r * p_r + (p_theta / r) ** 2)


def unit_covector(alpha: float, r0: float) -> tuple[float, float]:
    """Covector (p_r, p_theta) of unit |.|_r0 norm at angle alpha."""
    return (math.cos(alpha), r0 * math.sin(alpha))


def hamiltonian(z: ExtremalState, mu: float) -> float:
    """Maximized Hamiltonian; constant along extremals."""
    return mu * z.p_theta / (z.r * z.r) + z.costate_norm


def hamiltonian_of_angle(alpha: float, r0: float, mu: float) -> float:
    """H on the unit cotangent circle at radius r0: mu sin(alpha)/r0 + 1."""
    return mu * math.sin(alpha) / r0 + 1.0


def extremal_rhs(z: ExtremalState, mu: float) -> tuple[float, float, float, float]:
    """Right-hand side of the polar extremal system."""
    r, p_r, p_theta = z.r, z.p_r, z.p_theta
    q = costate_norm(r, p_r, p_theta)
    inv_r2 = 1.0 / (r * r)
    return (
        p_r / q,
        (mu + p_theta / q) * inv_r2,
        (p_theta * inv_r2 / r) * (2.0 * mu + p_theta / q),
        0.0,
    )


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled extremal with its stop event.

    ``states`` rows are (r, theta, p_r, p_theta); the p_theta column holds
    the same float in every row (it is structurally never updated).
    Sample times are strictly monotone: increasing for forward runs,
    decreasing for backward ones.
    """

    ts: np.ndarray
    states: np.ndarray
    mu: float
    stop_reason: StopReason
    alpha: float | None = None
    _dense: object | None = None

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def p_theta(self) -> float:
        return float(self.states[0, 3])

    def state_at(self, t: float) -> ExtremalState:
        if self._dense is None:
            raise ValueError("trajectory was integrated without dense output")
        r, theta, p_r = self._dense(t)
        return ExtremalState(float(r), float(theta), float(p_r), self.p_theta)

    def endpoint(self) -> ExtremalState:
        r, theta, p_r, p_theta = self.states[-1]
        return ExtremalState(float(r), float(theta), float(p_r), float(p_theta))

    def endpoint_cartesian(self) -> tuple[float, float]:
        r, theta = self.states[-1, 0], self.states[-1, 1]
        return (float(r * math.cos(theta)), float(r * math.sin(theta)))

    def cartesian_points(self) -> np.ndarray:
        r, theta = self.states[:, 0], self.states[:, 1]
        return np.column_stack((r * np.cos(theta), r * np.sin(theta)))

    def hamiltonians(self) -> np.ndarray:
        r, p_r, p_th = self.states[:, 0], self.states[:, 2], self.states[:, 3]
        return self.mu * p_th / (r * r) + np.sqrt(p_r * p_r + (p_th / r) ** 2)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns: t, r, theta, p_r, p_theta, x1, x2, H."""
    xy = traj.cartesian_points()
    hs = traj.hamiltonians()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,r,theta,p_r,p_theta,x1,x2,H\n")
        for i, t in enumerate(traj.ts):
            r, theta, p_r, p_th = traj.states[i]
            row = (t, r, theta, p_r, p_th, xy[i, 0], xy[i, 1], hs[i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Polar-chart integration
# ---------------------------------------------------------------------------

def _polar_rhs(mu: float, p_theta: float) -> Callable:
    pt2 = p_theta * p_theta

    def rhs(t, y):
        r = y[0]
        p_r = y[2]
        inv_r = 1.0 / r
        inv_r2 = inv_r * inv_r
        q = math.sqrt(p_r * p_r + pt2 * inv_r2)
        ratio = p_theta / q
        return (
            p_r / q,
            (mu + ratio) * inv_r2,
            (p_theta * inv_r2 * inv_r) * (2.0 * mu + ratio),
        )

    return rhs


def _radius_events(tol: Tolerances):
    def inner(t, y):
        return y[0] - tol.r_min

    def outer(t, y):
        return y[0] - tol.r_max

    inner.terminal = True
    outer.terminal = True
    return inner, outer


def integrate_extremal(
    problem: VortexProblem,
    state0: ExtremalState,
    t: float,
    *,
    alpha: float | None = None,
    rtol: float | None = None,
    atol: float | None = None,
    dense: bool = True,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Integrate the polar extremal system for duration t (t < 0 runs backward)."""
    tol = problem.tol
    p_theta = state0.p_theta
    y0 = (state0.r, state0.theta, state0.p_r)
    if t == 0.0:
        ts = np.array([0.0])
        states = np.array([[state0.r, state0.theta, state0.p_r, p_theta]])
        return Trajectory(ts, states, problem.mu, StopReason.REACHED_TIME, alpha)
    sol = solve_ivp(
        _polar_rhs(problem.mu, p_theta),
        (0.0, t),
        y0,
        method=_METHOD,
        rtol=tol.rtol if rtol is None else rtol,
        atol=tol.atol if atol is None else atol,
        dense_output=dense,
        events=_radius_events(tol),
        t_eval=t_eval,
    )
    reason = _stop_reason(sol, tol)
    ts = sol.t
    states = np.empty((ts.size, 4))
    states[:, :3] = sol.y.T
    states[:, 3] = p_theta
    return Trajectory(ts, states, problem.mu, reason, alpha, sol.sol if dense else None)


def _stop_reason(sol, tol: Tolerances) -> StopReason:
    if sol.status == 1:
        if sol.t_events[0].size:
            return StopReason.HIT_INNER_RADIUS
        return StopReason.HIT_OUTER_RADIUS
    if sol.status == 0:
        return StopReason.REACHED_TIME
    # Step-size underflow: near the vortex this is the expected endgame of a
    # vortex-bound geodesic; report the last valid state as an inner-radius
    # stop.  Anywhere else it is a genuine numeric failure.
    last_r = float(sol.y[0, -1])
    if last_r <= 10.0 * tol.r_min:
        return StopReason.HIT_INNER_RADIUS
    raise IntegrationError(f"integrator failed at r={last_r:.6g}: {sol.message}")


def exponential(
    problem: VortexProblem,
    alpha: float,
    t: float,
    *,
    rtol: float | None = None,
    atol: float | None = None,
    dense: bool = True,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Geodesic from x0 with unit covector at angle alpha, for duration t >= 0.

    Stops early at the inner/outer radius; the stop_reason records which.
    """
    if t < 0.0:
        raise ValueError("duration must be nonnegative")
    p_r0, p_theta0 = unit_covector(alpha, problem.r0)
    state0 = ExtremalState(problem.r0, problem.theta0, p_r0, p_theta0)
    return integrate_extremal(
        problem, state0, t, alpha=alpha, rtol=rtol, atol=atol, dense=dense, t_eval=t_eval
    )


# ---------------------------------------------------------------------------
# Cartesian chart, with optional first variation
# ---------------------------------------------------------------------------

def cartesian_rhs(z: Sequence[float], mu: float) -> np.ndarray:
    """Extremal vector field in the (x1, x2, p1, p2) chart."""
    x1, x2, p1, p2 = z
    r2 = x1 * x1 + x2 * x2
    inv_r2 = 1.0 / r2
    a = mu * inv_r2
    g = a * inv_r2
    pn = math.sqrt(p1 * p1 + p2 * p2)
    d = x1 * x1 - x2 * x2
    m = 2.0 * x1 * x2
    return np.array(
        [
            -a * x2 + p1 / pn,
            a * x1 + p2 / pn,
            -g * (m * p1 - d * p2),
            g * (d * p1 + m * p2),
        ]
    )


def cartesian_rhs_jacobian(z: Sequence[float], mu: float) -> np.ndarray:
    """Derivative of cartesian_rhs with respect to (x1, x2, p1, p2)."""
    x1, x2, p1, p2 = z
    r2 = x1 * x1 + x2 * x2
    inv_r2 = 1.0 / r2
    g = mu * inv_r2 * inv_r2
    d = x1 * x1 - x2 * x2
    m = 2.0 * x1 * x2
    pn2 = p1 * p1 + p2 * p2
    pn3 = pn2 * math.sqrt(pn2)
    q = m * p1 - d * p2
    h = d * p1 + m * p2
    J = np.empty((4, 4))
    J[0, 0] = g * m
    J[0, 1] = -g * d
    J[0, 2] = p2 * p2 / pn3
    J[0, 3] = -p1 * p2 / pn3
    J[1, 0] = -g * d
    J[1, 1] = -g * m
    J[1, 2] = -p1 * p2 / pn3
    J[1, 3] = p1 * p1 / pn3
    J[2, 0] = g * (4.0 * x1 * q * inv_r2 - 2.0 * x2 * p1 + 2.0 * x1 * p2)
    J[2, 1] = g * (4.0 * x2 * q * inv_r2 - 2.0 * x1 * p1 - 2.0 * x2 * p2)
    J[2, 2] = -g * m
    J[2, 3] = g * d
    J[3, 0] = g * (-4.0 * x1 * h * inv_r2 + 2.0 * x1 * p1 + 2.0 * x2 * p2)
    J[3, 1] = g * (-4.0 * x2 * h * inv_r2 - 2.0 * x2 * p1 + 2.0 * x1 * p2)
    J[3, 2] = g * d
    J[3, 3] = g * m
    return J


def cartesian_start(problem: VortexProblem, alpha: float) -> np.ndarray:
    """Initial (x1, x2, p1, p2) for the unit covector at angle alpha."""
    x1, x2 = problem.x0
    beta = problem.theta0 + alpha
    return np.array([x1, x2, math.cos(beta), math.sin(beta)])


def cartesian_start_dalpha(problem: VortexProblem, alpha: float) -> np.ndarray:
    """Derivative of cartesian_start with respect to alpha."""
    beta = problem.theta0 + alpha
    return np.array([0.0, 0.0, -math.sin(beta), math.cos(beta)])


def _cartesian_rhs_func(mu: float) -> Callable:
    def rhs(t, y):
        x1, x2, p1, p2 = y
        r2 = x1 * x1 + x2 * x2
        inv_r2 = 1.0 / r2
        a = mu * inv_r2
        g = a * inv_r2
        pn = math.sqrt(p1 * p1 + p2 * p2)
        d = x1 * x1 - x2 * x2
        m = 2.0 * x1 * x2
        return (
            -a * x2 + p1 / pn,
            a * x1 + p2 / pn,
            -g * (m * p1 - d * p2),
            g * (d * p1 + m * p2),
        )

    return rhs


def _extended_cartesian_rhs(mu: float) -> Callable:
    """Fused flow + first-variation system, 8-dimensional."""

    def rhs(t, y):
        x1, x2, p1, p2, v1, v2, v3, v4 = y
        r2 = x1 * x1 + x2 * x2
        inv_r2 = 1.0 / r2
        a = mu * inv_r2
        g = a * inv_r2
        pn2 = p1 * p1 + p2 * p2
        pn = math.sqrt(pn2)
        pn3 = pn2 * pn
        d = x1 * x1 - x2 * x2
        m = 2.0 * x1 * x2
        q = m * p1 - d * p2
        h = d * p1 + m * p2
        # flow
        f1 = -a * x2 + p1 / pn
        f2 = a * x1 + p2 / pn
        f3 = -g * q
        f4 = g * h
        # variation: dv = J(z) v with J from cartesian_rhs_jacobian
        j02 = p2 * p2 / pn3
        j03 = -p1 * p2 / pn3
        j13 = p1 * p1 / pn3
        gm = g * m
        gd = g * d
        w1 = gm * v1 - gd * v2 + j02 * v3 + j03 * v4
        w2 = -gd * v1 - gm * v2 + j03 * v3 + j13 * v4
        c20 = g * (4.0 * x1 * q * inv_r2 - 2.0 * x2 * p1 + 2.0 * x1 * p2)
        c21 = g * (4.0 * x2 * q * inv_r2 - 2.0 * x1 * p1 - 2.0 * x2 * p2)
        w3 = c20 * v1 + c21 * v2 - gm * v3 + gd * v4
        c30 = g * (-4.0 * x1 * h * inv_r2 + 2.0 * x1 * p1 + 2.0 * x2 * p2)
        c31 = g * (-4.0 * x2 * h * inv_r2 - 2.0 * x2 * p1 + 2.0 * x1 * p2)
        w4 = c30 * v1 + c31 * v2 + gd * v3 + gm * v4
        return (f1, f2, f3, f4, w1, w2, w3, w4)

    return rhs


def _cartesian_radius_events(tol: Tolerances):
    rmin2 = tol.r_min * tol.r_min
    rmax2 = tol.r_max * tol.r_max

    def inner(t, y):
        return y[0] * y[0] + y[1] * y[1] - rmin2

    def outer(t, y):
        return y[0] * y[0] + y[1] * y[1] - rmax2

    inner.terminal = True
    outer.terminal = True
    return inner, outer


@dataclass
class CartesianRun:
    """Cartesian-chart integration output, optionally with a variation."""

    ts: np.ndarray
    zs: np.ndarray              # (n, 4): x1, x2, p1, p2
    dzs: np.ndarray | None      # (n, 4) when a variation was transported
    mu: float
    stop_reason: StopReason
    _dense: object | None = None

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def at(self, t: float) -> np.ndarray:
        if self._dense is None:
            raise ValueError("run was integrated without dense output")
        return np.asarray(self._dense(t))


def integrate_cartesian(
    problem: VortexProblem,
    z0: Sequence[float],
    t: float,
    *,
    dz0: Sequence[float] | None = None,
    rtol: float | None = None,
    atol: float | None = None,
    dense: bool = False,
    t_eval: Sequence[float] | None = None,
) -> CartesianRun:
    """Integrate the Cartesian extremal system, transporting dz0 if given."""
    tol = problem.tol
    if dz0 is None:
        fun = _cartesian_rhs_func(problem.mu)
        y0 = np.asarray(z0, dtype=float)
    else:
        fun = _extended_cartesian_rhs(problem.mu)
        y0 = np.concatenate([np.asarray(z0, float), np.asarray(dz0, float)])
    if t == 0.0:
        zs = np.asarray(z0, float)[None, :]
        dzs = None if dz0 is None else np.asarray(dz0, float)[None, :]
        return CartesianRun(np.array([0.0]), zs, dzs, problem.mu, StopReason.REACHED_TIME)
    sol = solve_ivp(
        fun,
        (0.0, t),
        y0,
        method=_METHOD,
        rtol=tol.rtol if rtol is None else rtol,
        atol=tol.atol if atol is None else atol,
        dense_output=dense,
        events=_cartesian_radius_events(tol),
        t_eval=t_eval,
    )
    if sol.status == -1:
        last = sol.y[:, -1] if sol.y.size else y0
        r_last = math.hypot(last[0], last[1])
        if r_last <= 10.0 * tol.r_min:
            reason = StopReason.HIT_INNER_RADIUS
        else:
            raise IntegrationError(f"integrator failed at r={r_last:.6g}: {sol.message}")
    elif sol.status == 1:
        reason = (
            StopReason.HIT_INNER_RADIUS
            if sol.t_events[0].size
            else StopReason.HIT_OUTER_RADIUS
        )
    else:
        reason = StopReason.REACHED_TIME
    ys = sol.y.T
    zs = ys[:, :4]
    dzs = ys[:, 4:] if dz0 is not None else None
    return CartesianRun(sol.t, zs, dzs, problem.mu, reason, sol.sol if dense else None)


# ---------------------------------------------------------------------------
# Polynomial time-rescaled chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompactifiedState:
    """State of the time-rescaled polynomial system.

    Time is rescaled by dt = r^3 (c r^2 - mu p_theta) ds with c the
    (conserved) Hamiltonian value; the chart fixes x = 1.  The cached
    coefficients are

        lambda1 = (2 mu c + p_theta) p_theta,   lambda2 = 2 (mu p_theta)^2,
        lambda3 = mu c + p_theta,               lambda4 = mu^2 p_theta,

    and k1 is the quadrature constant
    lambda2 x^6/(4 r^4) - lambda1 x^4/(2 r^2) - p_r^2/2.
    """

    r: float
    theta: float
    p_r: float
    x: float
    lambdas: tuple[float, float, float, float]
    k1: float


def compactified_coefficients(mu: float, p_theta: float, c: float) -> tuple[float, float, float, float]:
    return (
        (2.0 * mu * c + p_theta) * p_theta,
        2.0 * (mu * p_theta) ** 2,
        mu * c + p_theta,
        mu * mu * p_theta,
    )


def quadrature_constant(r: float, p_r: float, lambdas, x: float = 1.0) -> float:
    l1, l2 = lambdas[0], lambdas[1]
    x2 = x * x
    x4 = x2 * x2
    return l2 * x4 * x2 / (4.0 * r**4) - l1 * x4 / (2.0 * r * r) - 0.5 * p_r * p_r


def compactified_state(problem: VortexProblem, alpha: float) -> CompactifiedState:
    """Initial compactified state for the unit covector at angle alpha."""
    r0 = problem.r0
    p_r, p_theta = unit_covector(alpha, r0)
    c = hamiltonian_of_angle(alpha, r0, problem.mu)
    lams = compactified_coefficients(problem.mu, p_theta, c)
    return CompactifiedState(
        r0, problem.theta0, p_r, 1.0, lams, quadrature_constant(r0, p_r, lams)
    )


def compactified_rhs(cz: CompactifiedState) -> tuple[float, float, float, float]:
    """(r', theta', p_r', x') of the polynomial system in rescaled time."""
    r, p_r, x = cz.r, cz.p_r, cz.x
    l1, l2, l3, l4 = cz.lambdas
    r2 = r * r
    r3 = r2 * r
    x2 = x * x
    x3 = x2 * x
    x4 = x2 * x2
    return (
        r3 * r2 * p_r,
        l3 * r3 * x3 - l4 * r * x4 * x,
        l1 * r2 * x4 - l2 * x4 * x2,
        0.0,
    )


def integrate_compactified(
    problem: VortexProblem,
    alpha: float,
    s_max: float,
    *,
    rtol: float | None = None,
    atol: float | None = None,
    t_eval: Sequence[float] | None = None,
):
    """Integrate the polynomial system over rescaled time s in [0, s_max].

    Returns (s, states, t): states rows are (r, theta, p_r), and t maps each
    s-sample back to original time via dt = r^3 (c r^2 - mu p_theta) ds.
    """
    mu = problem.mu
    r0 = problem.r0
    p_r0, p_theta = unit_covector(alpha, r0)
    c = hamiltonian_of_angle(alpha, r0, mu)
    l1, l2, l3, l4 = compactified_coefficients(mu, p_theta, c)
    mupt = mu * p_theta

    def rhs(s, y):
        r, _, p_r, t = y
        r2 = r * r
        r3 = r2 * r
        return (
            r3 * r2 * p_r,
            l3 * r3 - l4 * r,
            l1 * r2 - l2,
            r3 * (c * r2 - mupt),
        )

    tol = problem.tol

    def inner(s, y):
        return y[0] - tol.r_min

    def outer(s, y):
        return y[0] - tol.r_max

    inner.terminal = True
    outer.terminal = True
    sol = solve_ivp(
        rhs,
        (0.0, s_max),
        (r0, problem.theta0, p_r0, 0.0),
        method=_METHOD,
        rtol=tol.rtol if rtol is None else rtol,
        atol=tol.atol if atol is None else atol,
        events=(inner, outer),
        t_eval=t_eval,
    )
    if sol.status == -1:
        raise IntegrationError(f"compactified integration failed: {sol.message}")
    return sol.t, sol.y[:3].T, sol.y[3]


# ---------------------------------------------------------------------------
# Abnormal closed form
# ---------------------------------------------------------------------------

def abnormal_domain(r0: float, alpha: float) -> tuple[float, float]:
    """Open time interval around 0 on which the abnormal radius formula holds.

    The closed form involves tan; validity ends where its argument reaches
    +-pi/2, and the radius tends to 0 at both ends (the geodesic falls into
    the vortex in both time directions).
    """
    s, c = math.sin(alpha), math.cos(alpha)
    if s == 0.0:
        raise ValueError("abnormal directions require sin(alpha) != 0")
    k = s / r0
    a0 = math.atan(-c / s)
    lo = (-0.5 * math.pi - a0) / k
    hi = (0.5 * math.pi - a0) / k
    return (min(lo, hi), max(lo, hi))


def abnormal_radius(t, r0: float, alpha: float):
    """Radius along an abnormal geodesic, by the closed form.

    Valid on the open interval abnormal_domain(r0, alpha) containing 0;
    raises a ValueError outside it.  Accepts scalar or array t.
    """
    lo, hi = abnormal_domain(r0, alpha)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr <= lo) | (t_arr >= hi)):
        raise ValueError(f"time outside the formula's domain ({lo:.6g}, {hi:.6g})")
    s_a, c_a = math.sin(alpha), math.cos(alpha)
    k = s_a / r0
    a0 = math.atan(-c_a / s_a)
    s_t = k * np.tan(k * t_arr + a0) + c_a / r0
    val = s_t * s_t - (2.0 * c_a / r0) * s_t + 1.0 / (r0 * r0)
    r = 1.0 / np.sqrt(val)
    return float(r) if np.isscalar(t) or t_arr.ndim == 0 else r
