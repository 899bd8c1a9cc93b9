"""Indirect solver for the two-point boundary value problem.

A candidate optimal transfer from x0 to xf is a zero of the shooting map

    S(T, alpha) = exp_{x0}(T, p0(alpha)) - xf,

with the launch covector normalized on the unit cotangent circle, so the
unknowns are just the transfer time and the launch angle.  Newton steps use
the exact Jacobian columns [xdot(T), d exp/d alpha (T)] obtained from the
fused flow + variation integration, with a backtracking line search for
robustness near the separating directions.  A multi-start wrapper sweeps
the launch circle to enumerate distinct solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import GeodesicClassification, classify
from .flow import (
    StopReason,
    Trajectory,
    cartesian_rhs,
    cartesian_start,
    cartesian_start_dalpha,
    exponential,
    integrate_cartesian,
)
from .model import Vec2, VortexProblem, feasible_transfer_time, to_polar

_MAX_BACKTRACK = 10
_MAX_PULLBACK = 6
_DEDUP_TOL = 1e-6


class NoConvergence(RuntimeError):
    """Newton failed to reach the residual target from this guess."""


class SingularJacobian(RuntimeError):
    """Shooting Jacobian lost rank (the endpoint looks conjugate)."""


@dataclass(frozen=True)
class ShootingProblem:
    problem: VortexProblem
    xf: Vec2

    def __post_init__(self) -> None:
        if math.hypot(*self.xf) <= 0.0:
            raise ValueError("target must avoid the vortex")


@dataclass
class BCExtremal:
    """Converged boundary-value extremal."""

    T: float
    alpha: float
    residual: float
    classification: GeodesicClassification
    trajectory: Trajectory | None = None

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "alpha": self.alpha,
            "residual": self.residual,
            "fate": self.classification.fate.value,
            "type": self.classification.gtype.value,
        }


def _endpoint_gap(
    sp: ShootingProblem,
    T: float,
    alpha: float,
    *,
    variation: bool,
    rtol: float | None = None,
    atol: float | None = None,
):
    """Integrate to T; return (S, run) or (None, run) if the geodesic dies."""
    problem = sp.problem
    z0 = cartesian_start(problem, alpha)
    dz0 = cartesian_start_dalpha(problem, alpha) if variation else None
    run = integrate_cartesian(problem, z0, T, dz0=dz0, rtol=rtol, atol=atol)
    if run.stop_reason is not StopReason.REACHED_TIME:
        return None, run
    S = run.zs[-1, :2] - np.asarray(sp.xf, dtype=float)
    return S, run


def _normalize_angle(alpha: float) -> float:
    a = math.fmod(alpha, 2.0 * math.pi)
    return a + 2.0 * math.pi if a < 0.0 else a


def _newton_phase(
    sp: ShootingProblem,
    T: float,
    alpha: float,
    *,
    rtol: float | None,
    target: float,
    budget: int,
    bail_on_stall: bool,
):
    """Damped Newton at one integration accuracy; returns (T, alpha, norm_s).

    With bail_on_stall, hopeless iterations are cut short: the residual
    must shrink to 60% of its start within 5 steps, to 10% within 10, and
    below 1e-3 within 16, which keeps misfired multistart seeds cheap.  A
    healthy Newton basin beats all three comfortably.
    """
    problem = sp.problem
    S, run = _endpoint_gap(sp, T, alpha, variation=True, rtol=rtol, atol=rtol)
    for _ in range(_MAX_PULLBACK):
        if S is not None:
            break
        T = 0.9 * run.t_end
        if T <= 0.0:
            raise NoConvergence("guess dies immediately at the stop radius")
        S, run = _endpoint_gap(sp, T, alpha, variation=True, rtol=rtol, atol=rtol)
    if S is None:
        raise NoConvergence("could not find a surviving duration near the guess")

    norm_s = norm0 = float(np.hypot(*S))
    for iteration in range(budget):
        if norm_s <= target:
            break
        if bail_on_stall:
            stalled = (
                (iteration >= 5 and norm_s > 0.6 * norm0)
                or (iteration >= 10 and norm_s > 0.1 * norm0)
                or (iteration >= 16 and norm_s > 1e-3)
            )
            if stalled:
                raise NoConvergence(f"stalled at |S|={norm_s:.3e} after {iteration} steps")
        z_end = run.zs[-1]
        col_t = cartesian_rhs(z_end, problem.mu)[:2]
        col_a = run.dzs[-1, :2]
        jac = np.column_stack((col_t, col_a))
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        scale = np.hypot(*col_t) * np.hypot(*col_a)
        if abs(det) <= 1e-14 * max(scale, 1e-300):
            raise SingularJacobian(f"rank loss at T={T:.6g}, alpha={alpha:.6g}")
        step = np.linalg.solve(jac, -S)

        # Line-search trials only compare residual magnitudes, so their
        # integration accuracy can track the current residual.
        base_rtol = rtol if rtol is not None else problem.tol.rtol
        trial_rtol = max(base_rtol, min(1e-6, 1e-2 * norm_s))
        accepted = False
        damping = 1.0
        for _ in range(_MAX_BACKTRACK + 1):
            T_try = T + damping * step[0]
            a_try = alpha + damping * step[1]
            if T_try > 0.0:
                S_try, _ = _endpoint_gap(
                    sp, T_try, a_try, variation=False, rtol=trial_rtol, atol=trial_rtol
                )
                if S_try is not None and np.hypot(*S_try) < norm_s:
                    T, alpha = T_try, a_try
                    accepted = True
                    break
            damping *= 0.5
        if not accepted:
            raise NoConvergence(f"line search stalled at |S|={norm_s:.3e}")
        S, run = _endpoint_gap(sp, T, alpha, variation=True, rtol=rtol, atol=rtol)
        if S is None:
            raise NoConvergence("accepted step left the surviving region")
        norm_s = float(np.hypot(*S))
    else:
        if norm_s > target:
            raise NoConvergence(f"residual {norm_s:.3e} after {budget} iterations")
    return T, alpha, norm_s


def shoot(
    sp: ShootingProblem,
    guess: tuple[float, float],
    *,
    max_iter: int = 40,
    with_trajectory: bool = True,
) -> BCExtremal:
    """Damped Newton on the shooting map from the guess (T, alpha).

    Runs in two phases: a coarse-accuracy descent that does the expensive
    global work, then a short full-accuracy polish down to the Newton
    tolerance.  Raises NoConvergence if the residual target is not reached
    and SingularJacobian if the endpoint Jacobian loses rank on the way.
    """
    problem = sp.problem
    target = problem.tol.newton
    T, alpha = float(guess[0]), float(guess[1])
    if T <= 0.0:
        raise ValueError("guessed transfer time must be positive")

    coarse = max(1e-9, problem.tol.rtol)
    if coarse > problem.tol.rtol:
        T, alpha, _ = _newton_phase(
            sp, T, alpha,
            rtol=coarse, target=max(3e-9, target), budget=max_iter, bail_on_stall=True,
        )
        T, alpha, norm_s = _newton_phase(
            sp, T, alpha, rtol=None, target=target, budget=8, bail_on_stall=False
        )
    else:
        T, alpha, norm_s = _newton_phase(
            sp, T, alpha, rtol=None, target=target, budget=max_iter, bail_on_stall=False
        )

    alpha = _normalize_angle(alpha)
    cls = classify(alpha, problem.r0, problem.mu)
    traj = exponential(problem, alpha, T) if with_trajectory else None
    return BCExtremal(T, alpha, norm_s, cls, traj)


def _wrap_pi(d: float) -> float:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


def _radius_crossings(
    sp: ShootingProblem, alpha: float, t_up: float, n_samples: int, rtol: float,
    rf: float, theta_f: float,
):
    """(t, psi) at every time the geodesic's radius crosses |xf|.

    psi is the angular mismatch to the target, wrapped to (-pi, pi].  The
    radius along an extremal is monotone or swings between two closed-form
    bounds, so sign changes on a uniform sample grid catch every crossing;
    linear interpolation is plenty for seeding.
    """
    traj = exponential(
        sp.problem, alpha, t_up,
        rtol=rtol, atol=rtol, dense=False,
        t_eval=np.linspace(0.0, t_up, n_samples + 1),
    )
    r = traj.states[:, 0]
    theta = traj.states[:, 1]
    ts = traj.ts
    d = r - rf
    idx = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
    crossings = []
    for i in idx:
        denom = d[i] - d[i + 1]
        if denom == 0.0:
            continue
        u = d[i] / denom
        t_c = ts[i] + u * (ts[i + 1] - ts[i])
        if t_c <= 1e-12:
            continue
        th_c = theta[i] + u * (theta[i + 1] - theta[i])
        crossings.append((float(t_c), _wrap_pi(th_c - theta_f)))
    return crossings


def _pair_crossings(lo, hi):
    """Mutually-nearest-in-time pairing between two crossing lists.

    Returns (pairs, n_unpaired); unpaired crossings signal that the number
    of radius passages changes inside the strip (a capture wedge or an
    oscillation bound sliding through |xf|).
    """
    pairs = []
    used = set()
    for i, (t_i, _) in enumerate(lo):
        if not hi:
            break
        j = min(range(len(hi)), key=lambda j: abs(hi[j][0] - t_i))
        back = min(range(len(lo)), key=lambda k: abs(lo[k][0] - hi[j][0]))
        if back == i and j not in used:
            pairs.append((i, j))
            used.add(j)
    return pairs, len(lo) + len(hi) - 2 * len(pairs)


def _strip_roots(a_lo, cr_lo, a_hi, cr_hi, crossings_of, alpha_tol, depth, budget, out):
    """Collect seeds where the angular mismatch vanishes inside the strip.

    Paired crossings whose psi values straddle zero along the shorter arc
    are bisected in alpha.  Two further situations force refinement, since
    a root can hide in them: a change in the crossing count across the
    strip (capture wedges, oscillation bounds sliding through |xf|), and a
    psi step too large to trust the shorter-arc reading (near capture
    boundaries the endpoint angle winds arbitrarily fast, so psi may spin
    through zero between samples).  budget is a single-element list
    counting down the remaining crossings_of evaluations.
    """
    pairs, n_unpaired = _pair_crossings(cr_lo, cr_hi)
    root_pairs = []
    winding_risk = False
    for i, j in pairs:
        t0, p0 = cr_lo[i]
        t1, p1 = cr_hi[j]
        d = _wrap_pi(p1 - p0)
        if p0 * (p0 + d) <= 0.0:
            root_pairs.append((t0, t1))
        elif abs(d) >= 1.6:
            winding_risk = True
    if not root_pairs and not winding_risk and n_unpaired == 0:
        return
    if (a_hi - a_lo) <= alpha_tol or depth <= 0 or budget[0] <= 0:
        for t0, t1 in root_pairs:
            out.append((0.5 * (t0 + t1), 0.5 * (a_lo + a_hi)))
        if not root_pairs and n_unpaired > 0:
            # A root squeezed against a count-change boundary: seed from
            # the nearest surviving crossing and let Newton decide.
            best = min(cr_lo + cr_hi, key=lambda c: abs(c[1]), default=None)
            if best is not None and abs(best[1]) < 0.6:
                out.append((best[0], 0.5 * (a_lo + a_hi)))
        return
    a_mid = 0.5 * (a_lo + a_hi)
    budget[0] -= 1
    cr_mid = crossings_of(a_mid)
    _strip_roots(a_lo, cr_lo, a_mid, cr_mid, crossings_of, alpha_tol, depth - 1, budget, out)
    _strip_roots(a_mid, cr_mid, a_hi, cr_hi, crossings_of, alpha_tol, depth - 1, budget, out)


def solve_all(
    sp: ShootingProblem,
    n_starts: int = 24,
    *,
    scan_rtol: float = 1e-9,
    scan_samples: int = 400,
    max_seeds: int = 64,
    t_window: float | None = None,
) -> list[BCExtremal]:
    """Enumerate distinct BC-extremals by multi-start Newton, sorted by T.

    The search splits along the problem's radial structure.  For each
    launch angle on an n_starts grid, the times where the geodesic's
    radius equals |xf| are found first (a well-conditioned 1-D problem:
    the radius is monotone or oscillates between closed-form bounds); a
    solution exists where the angular mismatch at such a passage changes
    sign between neighbouring angles, which is bisected to a seed and
    polished by Newton.  Strips where the passage count changes (capture
    wedges, oscillation bounds crossing |xf|) are refined adaptively so
    roots cannot hide against them.  The scan covers t up to t_window
    (default: the constructive transfer-time bound, which always contains
    the optimum; pass a larger window to also enumerate slower solutions
    with extra turns).  Solutions are deduplicated by (T, alpha) within
    1e-6; an exact xf = x0 contributes the trivial zero-time transfer.
    """
    if n_starts < 4:
        raise ValueError("n_starts must be at least 4")
    problem = sp.problem
    results: list[BCExtremal] = []
    if tuple(sp.xf) == tuple(problem.x0):
        cls = classify(0.0, problem.r0, problem.mu)
        results.append(BCExtremal(0.0, 0.0, 0.0, cls, exponential(problem, 0.0, 0.0)))

    t_up = t_window if t_window is not None else feasible_transfer_time(
        problem.x0, sp.xf, problem.mu
    )
    rf, theta_f = to_polar(sp.xf)

    def crossings_of(alpha: float):
        return _radius_crossings(sp, alpha, t_up, scan_samples, scan_rtol, rf, theta_f)

    alphas = np.linspace(0.0, 2.0 * math.pi, n_starts, endpoint=False)
    crossing_lists = [crossings_of(float(a)) for a in alphas]
    alpha_tol = (2.0 * math.pi / n_starts) / 64.0
    raw_seeds: list[tuple[float, float]] = []
    refine_budget = [10 * n_starts]
    for k in range(n_starts):
        a_lo = float(alphas[k])
        a_hi = a_lo + 2.0 * math.pi / n_starts
        _strip_roots(
            a_lo, crossing_lists[k],
            a_hi, crossing_lists[(k + 1) % n_starts],
            crossings_of, alpha_tol, 9, refine_budget, raw_seeds,
        )

    seeds: list[tuple[float, float]] = []
    for t_seed, a_seed in raw_seeds:
        if any(
            abs(t_seed - t) <= 0.01 * t_up and abs(a_seed - a) <= 0.02
            for t, a in seeds
        ):
            continue
        seeds.append((t_seed, a_seed))

    for t_seed, a_seed in seeds[:max_seeds]:
        try:
            sol = shoot(sp, (t_seed, a_seed), with_trajectory=False)
        except (NoConvergence, SingularJacobian):
            continue
        duplicate = False
        for known in results:
            d_alpha = abs(sol.alpha - known.alpha)
            d_alpha = min(d_alpha, 2.0 * math.pi - d_alpha)
            if abs(sol.T - known.T) <= _DEDUP_TOL and d_alpha <= _DEDUP_TOL:
                duplicate = True
                break
        if not duplicate:
            results.append(sol)

    results.sort(key=lambda s: s.T)
    for sol in results:
        if sol.trajectory is None:
            sol.trajectory = exponential(problem, sol.alpha, sol.T)
    return results
