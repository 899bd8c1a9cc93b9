"""Closed-form classification of geodesics by their initial angle.

Along an extremal the angular momentum p_theta and the Hamiltonian value h
are conserved, which turns the radial motion into a one-dimensional problem:
with X = 1/r^2,

    p_r(t)^2 = P(1/r(t)^2),    P(X) = a X^2 + b X + c,

    a = mu^2 p_theta^2,
    b = -p_theta (2 h mu + p_theta),
    c = h^2.

The sign of the discriminant of P decides whether the radius has turning
points, and sorting the initial angles alpha in [0, 2*pi) by that criterion
splits the cotangent circle into three sets: geodesics that fall into the
vortex, geodesics that escape to infinity, and the two separating
directions that converge to the circle r = 2|mu| (or stay on it when
launched there).  Everything here is algebraic; no integration happens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import DriftRegime, drift_strength

# Absolute angular tolerance for membership in the separating pair, and
# relative tolerance for the coincidence r0 = 2|mu|.
_ALPHA_TOL = 1e-12
_REEB_RTOL = 1e-12
_H_TOL = 1e-12


class Fate(Enum):
    TO_VORTEX = "ToVortex"
    TO_INFINITY = "ToInfinity"
    SEPARATRIX = "Separatrix"
    REEB_CIRCLE = "ReebCircle"


class GeodesicType(Enum):
    HYPERBOLIC = "Hyperbolic"
    ELLIPTIC = "Elliptic"
    EXCEPTIONAL = "Exceptional"


class RadialProfile(Enum):
    STRICTLY_MONOTONE = "StrictlyMonotone"
    ONE_OSCILLATION = "OneOscillation"
    CONSTANT = "Constant"


@dataclass(frozen=True)
class DiscriminantData:
    """Radial polynomial P(X) = a X^2 + b X + c and its root geometry.

    X = 1/r^2, so the larger root X_plus is the *inner* turning radius
    r1 = X_plus^(-1/2) and X_minus the outer one, with X_minus = 0 read as
    r2 = +inf.  Roots are None when P has no real zeros (the radius is then
    globally monotone) or when p_theta = 0 (degenerate: P is constant 1).
    alpha_stars are the two angles whose covector has the critical angular
    momentum p_theta_star (double root).
    """

    a: float
    b: float
    c: float
    delta: float
    p_theta_star: float
    x_minus: float | None
    x_plus: float | None
    r1: float | None
    r2: float | None
    alpha_stars: tuple[float, float]
    degenerate: bool


@dataclass(frozen=True)
class GeodesicClassification:
    fate: Fate
    gtype: GeodesicType
    monotonicity: RadialProfile


def critical_angular_momentum(r0: float, mu: float) -> float:
    """p_theta_star = -4 mu / (1 + 4 mu^2 / r0^2), the double-root value."""
    return -4.0 * mu / (1.0 + 4.0 * (mu / r0) ** 2)


def alpha_stars(r0: float, mu: float) -> tuple[float, float]:
    """The two angles (alpha1*, alpha2*) whose p_theta equals p_theta_star.

    For mu > 0 they lie in (pi, 3*pi/2] and [3*pi/2, 2*pi); for mu < 0 in
    (0, pi/2] and [pi/2, pi).  They coincide exactly when r0 = 2|mu|.
    """
    if mu == 0.0:
        raise ValueError("separating directions require a rotating drift")
    s = critical_angular_momentum(r0, mu) / r0
    s = max(-1.0, min(1.0, s))
    base = math.asin(s)
    if mu > 0.0:
        return (math.pi - base, 2.0 * math.pi + base)
    return (base, math.pi - base)


def abnormal_angles(r0: float, mu: float) -> tuple[float, ...]:
    """Angles with vanishing Hamiltonian, i.e. sin(alpha) = -r0/mu.

    Empty under weak drift, a single tangency under moderate drift
    (3*pi/2 for mu > 0, pi/2 for mu < 0), a pair under strong drift.
    """
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    if mu == 0.0:
        return ()
    regime = drift_strength((r0, 0.0), mu)
    if regime is DriftRegime.WEAK:
        return ()
    if regime is DriftRegime.MODERATE:
        return (1.5 * math.pi,) if mu > 0.0 else (0.5 * math.pi,)
    base = math.asin(-r0 / mu)
    if mu > 0.0:
        a1 = math.pi - base          # in (pi, 3*pi/2)
        return (a1, 3.0 * math.pi - a1)
    return (base, math.pi - base)    # in (0, pi/2) and (pi/2, pi)


def discriminant_data(p_theta: float, r0: float, mu: float) -> DiscriminantData:
    """Coefficients, discriminant and turning radii of the radial polynomial.

    The Hamiltonian value is taken on the unit cotangent circle at r0, i.e.
    h = 1 + mu*p_theta/r0^2 for the angle with r0*sin(alpha) = p_theta.
    """
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    if mu == 0.0:
        raise ValueError("the discriminant analysis requires mu != 0")
    h = 1.0 + mu * p_theta / (r0 * r0)
    a = (mu * p_theta) ** 2
    b = -p_theta * (2.0 * h * mu + p_theta)
    c = h * h
    delta = p_theta**3 * (p_theta * (1.0 + 4.0 * (mu / r0) ** 2) + 4.0 * mu)
    p_star = critical_angular_momentum(r0, mu)
    stars = alpha_stars(r0, mu)
    if p_theta == 0.0:
        return DiscriminantData(a, b, c, delta, p_star, None, None, None, None, stars, True)
    if delta < 0.0:
        return DiscriminantData(a, b, c, delta, p_star, None, None, None, None, stars, False)
    # b < 0 whenever delta >= 0 and p_theta != 0, so this root pairing is
    # cancellation-free and Vieta gives an exact zero for X_minus when c = 0.
    x_plus = (-b + math.sqrt(delta)) / (2.0 * a)
    x_minus = c / (a * x_plus)
    r1 = x_plus ** -0.5
    r2 = math.inf if x_minus == 0.0 else x_minus ** -0.5
    return DiscriminantData(a, b, c, delta, p_star, x_minus, x_plus, r1, r2, stars, False)


def phi(r, p_theta: float, r0: float, mu: float):
    """Square of the radial costate at radius r, anchored at P(1/r0^2).

    phi(r) = a (1/r^4 - 1/r0^4) + b (1/r^2 - 1/r0^2) + 1 - p_theta^2/r0^2,
    which equals P(1/r^2); nonnegative exactly on the reachable radii.
    Accepts scalar or array r.
    """
    data = discriminant_data(p_theta, r0, mu)
    r_arr = np.asarray(r, dtype=float)
    inv2 = 1.0 / (r_arr * r_arr)
    inv2_0 = 1.0 / (r0 * r0)
    out = (
        data.a * (inv2 * inv2 - inv2_0 * inv2_0)
        + data.b * (inv2 - inv2_0)
        + 1.0
        - (p_theta * p_theta) * inv2_0
    )
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def _on_reeb_radius(r0: float, mu: float) -> bool:
    return abs(r0 - 2.0 * abs(mu)) <= _REEB_RTOL * max(r0, 2.0 * abs(mu))


def fate(alpha: float, r0: float, mu: float) -> Fate:
    """Asymptotic destination of the geodesic launched at angle alpha.

    Implements the half-open interval tables for both signs of mu.  The two
    separating angles are matched within 1e-12; on the coincidence circle
    r0 = 2|mu| they merge and the trapped geodesic is the circle itself.
    """
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    if mu == 0.0:
        raise ValueError("fate tables require mu != 0")
    alpha = math.fmod(alpha, 2.0 * math.pi)
    if alpha < 0.0:
        alpha += 2.0 * math.pi
    a1, a2 = alpha_stars(r0, mu)
    on_circle = _on_reeb_radius(r0, mu)
    if min(abs(alpha - a1), abs(alpha - a2)) <= _ALPHA_TOL:
        # Both angles separate, but only the table's representative does so
        # at the coincidence radius; off it the non-separating twin falls
        # through to the interval tests below.
        if mu > 0.0:
            sep = a1 if r0 > 2.0 * mu else a2
        else:
            sep = a2 if r0 > 2.0 * abs(mu) else a1
        if on_circle or abs(alpha - sep) <= _ALPHA_TOL:
            return Fate.REEB_CIRCLE if on_circle else Fate.SEPARATRIX
    if mu > 0.0:
        if r0 >= 2.0 * mu:
            to_vortex = math.pi <= alpha < a1
        else:
            to_vortex = math.pi <= alpha < a2
        return Fate.TO_VORTEX if to_vortex else Fate.TO_INFINITY
    if r0 >= 2.0 * abs(mu):
        to_vortex = a2 < alpha <= math.pi
    else:
        to_vortex = a1 < alpha <= math.pi
    return Fate.TO_VORTEX if to_vortex else Fate.TO_INFINITY


def geodesic_type(alpha: float, r0: float, mu: float) -> GeodesicType:
    """Sign of H(alpha) = 1 + mu sin(alpha)/r0 at the launch covector."""
    h = 1.0 + mu * math.sin(alpha) / r0
    if abs(h) <= _H_TOL:
        return GeodesicType.EXCEPTIONAL
    return GeodesicType.HYPERBOLIC if h > 0.0 else GeodesicType.ELLIPTIC


def radial_profile(alpha: float, r0: float, mu: float) -> RadialProfile:
    """Shape of t -> r(t): constant, strictly monotone, or one oscillation.

    A vortex-bound geodesic launched with p_r(0) > 0 first rises to the
    inner turning radius r1 before falling; an escaping geodesic launched
    with p_r(0) < 0 first dips to the outer turning radius r2.  All other
    combinations are strictly monotone, and the trapped circle is constant.
    """
    f = fate(alpha, r0, mu)
    if f is Fate.REEB_CIRCLE:
        return RadialProfile.CONSTANT
    if f is Fate.SEPARATRIX:
        return RadialProfile.STRICTLY_MONOTONE
    p_r0 = math.cos(alpha)
    if f is Fate.TO_VORTEX and p_r0 > 0.0:
        return RadialProfile.ONE_OSCILLATION
    if f is Fate.TO_INFINITY and p_r0 < 0.0:
        return RadialProfile.ONE_OSCILLATION
    return RadialProfile.STRICTLY_MONOTONE


def classify(alpha: float, r0: float, mu: float) -> GeodesicClassification:
    return GeodesicClassification(
        fate(alpha, r0, mu),
        geodesic_type(alpha, r0, mu),
        radial_profile(alpha, r0, mu),
    )


def classification_report(alpha: float, r0: float, mu: float) -> dict:
    """JSON-ready report for one launch angle."""
    cls = classify(alpha, r0, mu)
    data = discriminant_data(r0 * math.sin(alpha), r0, mu)
    return {
        "alpha": alpha,
        "fate": cls.fate.value,
        "type": cls.gtype.value,
        "monotonicity": cls.monotonicity.value,
        "delta": data.delta,
        "p_theta_star": data.p_theta_star,
        "r1": data.r1,
        "r2": data.r2,
        "r0_on_reeb_circle": _on_reeb_radius(r0, mu),
    }


# ---------------------------------------------------------------------------
# Separating geodesics and the trapped circle (mu > 0 chart)
# ---------------------------------------------------------------------------

def _check_separatrix_domain(r, mu: float) -> None:
    if mu <= 0.0:
        raise ValueError("closed forms are stated on the mu > 0 chart")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0) or np.any(r_arr >= 2.0 * mu):
        raise ValueError("separating radius must lie in (0, 2*mu)")


def separatrix_rhs(r: float, mu: float) -> tuple[float, float]:
    """(dr/dt, dtheta/dt) along a separating geodesic inside r < 2*mu.

    Scale-free in the launch radius: any unit-covector separating geodesic
    satisfies these equations at its current radius.
    """
    _check_separatrix_domain(r, mu)
    four_mu2 = 4.0 * mu * mu
    r2 = r * r
    den = four_mu2 + r2
    return ((four_mu2 - r2) / den, (mu / r2) * (four_mu2 - 3.0 * r2) / den)


def separatrix_time(r, r0: float, mu: float):
    """Time to reach radius r from r0 along the inner separating geodesic.

    t(r) = 4 mu atanh(r/(2 mu)) - r, anchored so t(r0) = 0.  Accepts scalar
    or array r.
    """
    _check_separatrix_domain(r, mu)
    _check_separatrix_domain(r0, mu)
    r_arr = np.asarray(r, dtype=float)
    two_mu = 2.0 * mu

    def t_of(x):
        return 4.0 * mu * np.arctanh(x / two_mu) - x

    out = t_of(r_arr) - t_of(r0)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def separatrix_theta(r, r0: float, mu: float):
    """Polar angle at radius r along the same geodesic, with theta(r0) = 0.

    theta(r) = -atanh(r/(2 mu)) - mu/r, anchored at r0; its derivative in r
    vanishes exactly at r = 2 mu / sqrt(3), where dtheta/dt changes sign.
    """
    _check_separatrix_domain(r, mu)
    _check_separatrix_domain(r0, mu)
    r_arr = np.asarray(r, dtype=float)
    two_mu = 2.0 * mu

    def g_of(x):
        return -np.arctanh(x / two_mu) - mu / x

    out = g_of(r_arr) - g_of(r0)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def reeb_circle_rate(mu: float) -> float:
    """Angular velocity of the trapped circle r = 2|mu|: -1/(4 mu)."""
    if mu == 0.0:
        raise ValueError("no trapped circle without drift")
    return -1.0 / (4.0 * mu)


def reeb_f(r, mu: float):
    """Radial factor f(r) = sqrt((2mu - r)/(2mu + r)) * exp(-mu/r), mu > 0.

    Defined on [0, 2*mu] with f(0) = f(2*mu) = 0 (limits); its maximum sits
    at r = 2*mu/sqrt(3).  Accepts scalar or array r.
    """
    if mu <= 0.0:
        raise ValueError("stated on the mu > 0 chart")
    scalar = np.ndim(r) == 0
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0.0) or np.any(r_arr > 2.0 * mu):
        raise ValueError("radius must lie in [0, 2*mu]")
    out = np.zeros_like(r_arr)
    pos = r_arr > 0.0
    rp = r_arr[pos]
    out[pos] = np.sqrt((2.0 * mu - rp) / (2.0 * mu + rp)) * np.exp(-mu / rp)
    return float(out[0]) if scalar else out


def reeb_F(r, theta, mu: float):
    """Invariant F(r, theta) = f(r) exp(-theta) of the separating foliation.

    Constant along every separating geodesic inside the punctured disk
    r < 2*mu; its level sets through different angles sweep out the
    foliation whose closed leaf is the trapped circle.
    """
    out = reeb_f(r, mu) * np.exp(-np.asarray(theta, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
