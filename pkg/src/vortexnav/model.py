"""Problem setup for time-minimal navigation around a planar point vortex.

A vehicle with unit own-speed moves in the punctured plane while a point
vortex of circulation ``mu`` at the origin induces the current

    F0(x) = mu / r^2 * (-x2, x1),        r = |x|,

whose speed is |mu| / r.  This module holds the problem container (vortex
strength, departure point, numeric tolerances), the polar and Cartesian
charts together with the Mathieu costate transform between them, the
drift-strength trichotomy, and two elementary time bounds used to seed
and sanity-check the solvers:

* ``near_vortex_bounds`` -- at small radii the drift forces any unit-speed
  vehicle to complete a full turn around the vortex faster than it can
  descend a fixed distance toward it.
* ``feasible_transfer_time`` -- duration of an explicit two-phase steering
  strategy (radial leg, then circular leg riding the drift), an upper
  bound for the optimal transfer time.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

Vec2 = tuple[float, float]

TWO_PI = 2.0 * math.pi


class DriftRegime(Enum):
    """Drift speed |mu|/r versus the unit control speed at a point."""

    WEAK = "Weak"
    MODERATE = "Moderate"
    STRONG = "Strong"


# Relative tolerance for the measure-zero equality |mu| = r.
_MODERATE_RTOL = 1e-9


@dataclass(frozen=True)
class Tolerances:
    """Numeric knobs shared by the integrators and solvers.

    rtol/atol feed the adaptive integrator, newton is the target residual
    of the shooting and corrector iterations, r_min/r_max are the stop
    radii of the exponential map.
    """

    rtol: float = 1e-12
    atol: float = 1e-12
    newton: float = 1e-12
    r_min: float = 1e-3
    r_max: float = 100.0

    def __post_init__(self) -> None:
        if not (self.r_min > 0.0):
            raise ValueError("r_min must be positive")
        if not (self.r_max > self.r_min):
            raise ValueError("r_max must exceed r_min")
        for name in ("rtol", "atol", "newton"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class VortexProblem:
    """Departure point, circulation and tolerances of one problem instance.

    The control bound is normalized to 1 at construction; see
    ``normalize_control_bound`` for converting a problem stated with a
    different bound.
    """

    mu: float
    x0: Vec2
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        x1, x2 = self.x0
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise ValueError("x0 must be finite")
        if math.hypot(x1, x2) <= 0.0:
            raise ValueError("x0 must avoid the vortex at the origin")
        object.__setattr__(self, "x0", (float(x1), float(x2)))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def r0(self) -> float:
        return math.hypot(*self.x0)

    @property
    def theta0(self) -> float:
        return math.atan2(self.x0[1], self.x0[0])

    def with_tol(self, **overrides: float) -> "VortexProblem":
        return replace(self, tol=replace(self.tol, **overrides))


def load_problem(path: str | Path) -> VortexProblem:
    """Build a VortexProblem from a JSON file.

    Expected shape: {"mu": number, "x0": [x1, x2], "tol": {...optional...}}.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        mu = float(raw["mu"])
        x0 = raw["x0"]
        x0 = (float(x0[0]), float(x0[1]))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ValueError(f"malformed problem file {path}: {exc}") from exc
    tol_raw = raw.get("tol", {})
    if not isinstance(tol_raw, dict):
        raise ValueError("tol must be an object of tolerance overrides")
    known = {"rtol", "atol", "newton", "r_min", "r_max"}
    unknown = set(tol_raw) - known
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    tol = Tolerances(**{k: float(v) for k, v in tol_raw.items()})
    return VortexProblem(mu=mu, x0=x0, tol=tol)


def normalize_control_bound(mu: float, umax: float) -> tuple[float, float]:
    """Reduce a problem with control bound ``umax`` to the unit-bound one.

    Returns ``(mu_unit, time_scale)``: solve the problem with circulation
    ``mu_unit = mu / umax`` under unit control bound, then multiply the
    resulting transfer times by ``time_scale = 1 / umax``.
    """
    if not (umax > 0.0):
        raise ValueError("umax must be positive")
    return mu / umax, 1.0 / umax


# ---------------------------------------------------------------------------
# Charts and drift
# ---------------------------------------------------------------------------

def drift(x: Vec2, mu: float) -> Vec2:
    """Current induced by the vortex at point x: mu/r^2 * (-x2, x1)."""
    x1, x2 = x
    r2 = x1 * x1 + x2 * x2
    if r2 <= 0.0:
        raise ValueError("drift undefined at the vortex")
    return (-mu * x2 / r2, mu * x1 / r2)


def drift_strength(x: Vec2, mu: float) -> DriftRegime:
    """Compare the drift speed |mu|/|x| with the unit control speed."""
    r = math.hypot(*x)
    if r <= 0.0:
        raise ValueError("drift undefined at the vortex")
    gap = abs(mu) - r
    if abs(gap) <= _MODERATE_RTOL * max(abs(mu), r):
        return DriftRegime.MODERATE
    return DriftRegime.STRONG if gap > 0.0 else DriftRegime.WEAK


def to_polar(x: Vec2) -> Vec2:
    x1, x2 = x
    r = math.hypot(x1, x2)
    if r <= 0.0:
        raise ValueError("polar chart undefined at the vortex")
    return (r, math.atan2(x2, x1))


def to_cartesian(q: Vec2) -> Vec2:
    r, theta = q
    if r <= 0.0:
        raise ValueError("radius must be positive")
    return (r * math.cos(theta), r * math.sin(theta))


def mathieu_costate(theta: float, r: float, p_cartesian: Vec2) -> Vec2:
    """Cartesian costate -> polar costate (p_r, p_theta).

    The transform preserves the costate norm:
    p_r^2 + p_theta^2/r^2 = p1^2 + p2^2.
    """
    if r <= 0.0:
        raise ValueError("radius must be positive")
    p1, p2 = p_cartesian
    c, s = math.cos(theta), math.sin(theta)
    return (c * p1 + s * p2, -r * s * p1 + r * c * p2)


def mathieu_costate_inverse(theta: float, r: float, p_polar: Vec2) -> Vec2:
    """Polar costate (p_r, p_theta) -> Cartesian costate (p1, p2)."""
    if r <= 0.0:
        raise ValueError("radius must be positive")
    p_r, p_theta = p_polar
    c, s = math.cos(theta), math.sin(theta)
    return (c * p_r - s * p_theta / r, s * p_r + c * p_theta / r)


# ---------------------------------------------------------------------------
# Elementary time bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NearVortexBounds:
    """Winding/descent time bounds close to the vortex.

    turn_time       duration of a drift-assisted full circle at radius R
    descent_time    least time to descend from radius R to radius eps
    radius_threshold    largest R for which turning beats descending to 0
    eps_threshold   critical inner radius below which turning still wins
    """

    turn_time: float
    descent_time: float
    radius_threshold: float
    eps_threshold: float


def near_vortex_bounds(eps: float, big_r: float, mu: float) -> NearVortexBounds:
    """Time bounds at radius ``big_r``: full drift-assisted turn vs descent to ``eps``.

    Whenever 0 < R < radius_threshold and 0 <= eps < eps_threshold, the
    full turn is strictly faster than the descent (turn_time < descent_time).
    """
    if not (big_r > 0.0):
        raise ValueError("R must be positive")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if eps > big_r:
        raise ValueError("eps must not exceed R")
    if mu == 0.0:
        raise ValueError("mu must be nonzero")
    turn = TWO_PI * big_r * big_r / (abs(mu) + big_r)
    descent = big_r - eps
    r_crit = abs(mu) / (TWO_PI - 1.0)
    eps_crit = big_r * (1.0 - TWO_PI * big_r / (abs(mu) + big_r))
    return NearVortexBounds(turn, descent, r_crit, eps_crit)


def feasible_transfer_time(x0: Vec2, xf: Vec2, mu: float) -> float:
    """Duration of an explicit two-phase admissible strategy from x0 to xf.

    Phase 1 moves radially at unit speed from r0 to rf (the drift winds the
    angle by mu*(1/min - 1/max), integrated in closed form).  Phase 2 rides
    a circle of radius rf with tangential unit control in the direction of
    the drift, at angular rate |mu|/rf^2 + 1/rf, until the residual angle
    closes.  The result upper-bounds the optimal transfer time.
    """
    r0, th0 = to_polar(x0)
    rf, thf = to_polar(xf)
    radial = abs(rf - r0)
    if r0 == rf:
        wind = 0.0
    else:
        lo, hi = min(r0, rf), max(r0, rf)
        wind = mu * (1.0 / lo - 1.0 / hi)
    th1 = th0 + wind
    rate = abs(mu) / (rf * rf) + 1.0 / rf
    if mu > 0.0:
        residual = (thf - th1) % TWO_PI
    elif mu < 0.0:
        residual = (th1 - thf) % TWO_PI
    else:
        # Degenerate drift-free case: either rotation direction works;
        # take the shorter arc.
        residual = min((thf - th1) % TWO_PI, (th1 - thf) % TWO_PI)
    return radial + residual / rate


# ---------------------------------------------------------------------------
# Worker count for scans (VZ_THREADS caps parallelism)
# ---------------------------------------------------------------------------

def worker_count() -> int:
    """Parallel workers for scans: min(cpu_count, VZ_THREADS if set)."""
    n = os.cpu_count() or 1
    raw = os.environ.get("VZ_THREADS")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"VZ_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise ValueError("VZ_THREADS must be >= 1")
        n = min(n, cap)
    return max(n, 1)
