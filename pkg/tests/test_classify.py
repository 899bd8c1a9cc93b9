"""Closed-form classification: pinned values, root geometry, and dual-route
checks of every formula against direct integration of the extremal flow."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import assert_close
from vortexnav import VortexProblem
from vortexnav.classify import (
    DriftRegime,
    Fate,
    GeodesicType,
    RadialProfile,
    abnormal_angles,
    alpha_stars,
    classification_report,
    classify,
    critical_angular_momentum,
    discriminant_data,
    fate,
    geodesic_type,
    phi,
    radial_profile,
    reeb_F,
    reeb_circle_rate,
    reeb_f,
    separatrix_rhs,
    separatrix_theta,
    separatrix_time,
)
from vortexnav.flow import StopReason, exponential, extremal_rhs

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Critical angular momentum and the separating angles
# ---------------------------------------------------------------------------

def test_critical_angular_momentum_pinned():
    # -4*mu / (1 + 4*mu^2/r0^2), rederived by hand for three instances.
    assert critical_angular_momentum(2.0, 1.0) == -2.0          # r0 = 2|mu|
    assert critical_angular_momentum(2.0, -1.0) == 2.0
    assert_close(critical_angular_momentum(3.0, 2.0), -72.0 / 25.0, 1e-15)


def test_alpha_stars_coincide_on_trapped_circle():
    a1, a2 = alpha_stars(4.0, 2.0)
    assert a1 == a2 == 1.5 * math.pi
    b1, b2 = alpha_stars(4.0, -2.0)
    assert b1 == b2 == 0.5 * math.pi


def test_alpha_stars_pinned_strong():
    # r0 = 2, mu = 4: sin(alpha*) = p_star/r0 = -8/17.
    a1, a2 = alpha_stars(2.0, 4.0)
    base = math.asin(8.0 / 17.0)
    assert_close(a1, math.pi + base, 1e-14)
    assert_close(a2, TWO_PI - base, 1e-14)
    assert a1 < a2


def test_alpha_stars_mirror_under_drift_reversal():
    for r0, mu in [(2.0, 4.0), (3.0, 1.8), (8.0 / 3.0, 2.0), (5.0, 0.7)]:
        plus = alpha_stars(r0, mu)
        minus = alpha_stars(r0, -mu)
        mirrored = tuple(sorted((TWO_PI - a) % TWO_PI for a in plus))
        assert_close(sorted(minus), mirrored, 1e-13, "mirrored stars")


def test_abnormal_angles_by_regime():
    assert abnormal_angles(2.0, 1.0) == ()                      # weak
    assert abnormal_angles(2.0, 2.0) == (1.5 * math.pi,)        # moderate
    assert abnormal_angles(2.0, -2.0) == (0.5 * math.pi,)
    # strong, mu = 2 r0: sin(alpha) = -1/2.
    a = abnormal_angles(2.0, 4.0)
    assert_close(a, (7.0 * math.pi / 6.0, 11.0 * math.pi / 6.0), 1e-14)
    b = abnormal_angles(2.0, -4.0)
    assert_close(b, (math.pi / 6.0, 5.0 * math.pi / 6.0), 1e-14)


def test_abnormal_pair_sits_inside_separating_wedge():
    # Strong drift, both signs: alpha1* < alpha1_abn <= alpha2_abn < alpha2*.
    for mu in (4.0, -4.0):
        a1, a2 = alpha_stars(2.0, mu)
        b1, b2 = abnormal_angles(2.0, mu)
        assert a1 < b1 <= b2 < a2


# ---------------------------------------------------------------------------
# Discriminant data and the radial polynomial
# ---------------------------------------------------------------------------

def test_discriminant_vanishes_at_critical_momentum():
    for r0, mu in [(3.0, 1.0), (2.0, 4.0), (5.0, -2.0)]:
        p_star = critical_angular_momentum(r0, mu)
        data = discriminant_data(p_star, r0, mu)
        scale = abs(p_star) ** 3 * 4.0 * abs(mu) + 1.0
        assert abs(data.delta) <= 1e-13 * scale
        assert data.p_theta_star == p_star


def test_discriminant_pinned_negative():
    # r0 = 2, mu = 1, p_theta = -1: delta = p^3 (p k + 4 mu) with k = 2.
    data = discriminant_data(-1.0, 2.0, 1.0)
    assert data.delta == -2.0
    assert data.r1 is None and data.r2 is None
    assert not data.degenerate


def test_discriminant_zero_energy_gives_infinite_outer_root():
    # p_theta = -r0^2/mu makes h = 0, hence c = 0 and X_minus = 0 exactly.
    data = discriminant_data(-1.0, 2.0, 4.0)
    assert data.x_minus == 0.0
    assert data.r2 == math.inf
    assert data.r1 is not None and data.r1 > 0.0


def test_discriminant_degenerate_at_zero_momentum():
    data = discriminant_data(0.0, 3.0, 2.0)
    assert data.degenerate
    assert data.r1 is None and data.r2 is None


def test_phi_at_launch_radius_is_radial_speed_squared():
    for alpha in (0.3, 2.0, 4.0, 5.5):
        r0, mu = 8.0 / 3.0, 2.0
        p_theta = r0 * math.sin(alpha)
        got = phi(r0, p_theta, r0, mu)
        assert_close(got, math.cos(alpha) ** 2, 1e-14, "phi(r0)")


def test_phi_vanishes_at_turning_radii():
    # Real-root case: phi must vanish at both turning radii.
    r0, mu = 3.0, 1.0
    p_theta = 2.5
    data = discriminant_data(p_theta, r0, mu)
    assert data.delta > 0.0
    assert_close(phi(data.r1, p_theta, r0, mu), 0.0, 1e-12, "phi(r1)")
    assert_close(phi(data.r2, p_theta, r0, mu), 0.0, 1e-12, "phi(r2)")
    assert data.r1 < data.r2


def test_phi_double_root_sits_on_trapped_circle():
    for r0, mu in [(3.0, 1.0), (8.0 / 3.0, 2.0)]:
        p_star = critical_angular_momentum(r0, mu)
        assert_close(phi(2.0 * abs(mu), p_star, r0, mu), 0.0, 1e-12)


def test_turning_radius_matches_integrated_extremum(prob_scan):
    """Dual route: the closed-form turning radii against the radius at the
    integrated instant where the radial costate crosses zero."""
    r0, mu = 8.0 / 3.0, 2.0
    cases = [
        (5.0, "r1"),   # vortex-bound, rises to the inner turning radius first
        (2.5, "r2"),   # escaping, dips to the outer turning radius first
    ]
    for alpha, which in cases:
        data = discriminant_data(r0 * math.sin(alpha), r0, mu)
        expected = getattr(data, which)
        traj = exponential(prob_scan, alpha, 8.0, rtol=1e-12, atol=1e-12)
        ts = np.linspace(0.0, min(8.0, traj.ts[-1]), 2001)
        prs = np.array([traj.state_at(float(t)).p_r for t in ts])
        flips = np.nonzero(np.sign(prs[:-1]) != np.sign(prs[1:]))[0]
        assert flips.size >= 1
        i = flips[0]
        t_star = brentq(
            lambda t: traj.state_at(float(t)).p_r, ts[i], ts[i + 1], xtol=1e-13
        )
        assert_close(traj.state_at(t_star).r, expected, 1e-9, f"{which} at alpha={alpha}")


# ---------------------------------------------------------------------------
# Fate table
# ---------------------------------------------------------------------------

def test_fate_pinned_directions():
    for r0, mu in [(2.0, 4.0), (3.0, 1.8), (3.0, -1.8), (5.0, 1.0)]:
        assert fate(math.pi, r0, mu) is Fate.TO_VORTEX
        assert fate(0.0, r0, mu) is Fate.TO_INFINITY
    assert fate(0.5 * math.pi, 3.0, -1.0) is Fate.TO_INFINITY


def test_fate_on_trapped_circle():
    assert fate(1.5 * math.pi, 4.0, 2.0) is Fate.REEB_CIRCLE
    assert fate(0.5 * math.pi, 4.0, -2.0) is Fate.REEB_CIRCLE


def test_fate_separating_representative_and_twin():
    # r0 < 2 mu: the outer angle separates, the inner twin dives.
    a1, a2 = alpha_stars(8.0 / 3.0, 2.0)
    assert fate(a2, 8.0 / 3.0, 2.0) is Fate.SEPARATRIX
    assert fate(a1, 8.0 / 3.0, 2.0) is Fate.TO_VORTEX
    # r0 > 2 mu: the inner angle separates, the outer twin escapes.
    b1, b2 = alpha_stars(3.0, 1.0)
    assert fate(b1, 3.0, 1.0) is Fate.SEPARATRIX
    assert fate(b2, 3.0, 1.0) is Fate.TO_INFINITY


def test_fate_halfopen_boundaries():
    r0, mu = 3.0, 1.0
    a1, _ = alpha_stars(r0, mu)
    eps = 1e-6
    assert fate(a1 - eps, r0, mu) is Fate.TO_VORTEX
    assert fate(a1 + eps, r0, mu) is Fate.TO_INFINITY


def test_fate_wraps_angle():
    assert fate(math.pi + 3 * TWO_PI, 3.0, 1.8) is Fate.TO_VORTEX
    assert fate(-0.5 * math.pi, 4.0, 2.0) is Fate.REEB_CIRCLE


def test_fate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        fate(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        fate(1.0, 1.0, 0.0)


def test_fate_matches_integration_light(prob_strong, prob_weak):
    """Dual route on a few interior angles: the table's verdict against the
    integrated stop reason (death at the inner radius vs sustained escape)."""
    for prob in (prob_strong, prob_weak):
        r0, mu = prob.r0, prob.mu
        a1, a2 = alpha_stars(r0, mu)
        # Midpoint of the vortex-bound wedge per the half-open table.
        wedge = 0.5 * (math.pi + (a2 if r0 < 2.0 * mu else a1))
        for alpha, expected in [
            (math.pi, Fate.TO_VORTEX),
            (wedge, Fate.TO_VORTEX),
            (0.0, Fate.TO_INFINITY),
            (0.5 * math.pi, Fate.TO_INFINITY),
        ]:
            assert fate(alpha, r0, mu) is expected
            traj = exponential(prob, alpha, 25.0)
            if expected is Fate.TO_VORTEX:
                assert traj.stop_reason is StopReason.HIT_INNER_RADIUS
            else:
                assert traj.stop_reason in (
                    StopReason.REACHED_TIME,
                    StopReason.HIT_OUTER_RADIUS,
                )
                assert traj.states[-1, 0] > 2.0 * r0


# ---------------------------------------------------------------------------
# Type and radial profile
# ---------------------------------------------------------------------------

def test_geodesic_type_weak_drift_all_hyperbolic():
    for alpha in np.linspace(0.0, TWO_PI, 37):
        assert geodesic_type(float(alpha), 3.0, 1.8) is GeodesicType.HYPERBOLIC


def test_geodesic_type_strong_drift_bands():
    r0, mu = 2.0, 4.0
    assert geodesic_type(7.0 * math.pi / 6.0, r0, mu) is GeodesicType.EXCEPTIONAL
    assert geodesic_type(11.0 * math.pi / 6.0, r0, mu) is GeodesicType.EXCEPTIONAL
    assert geodesic_type(1.5 * math.pi, r0, mu) is GeodesicType.ELLIPTIC
    assert geodesic_type(0.0, r0, mu) is GeodesicType.HYPERBOLIC


def test_elliptic_implies_vortex_bound():
    r0, mu = 2.0, 4.0
    for alpha in np.linspace(0.0, TWO_PI, 721):
        if geodesic_type(float(alpha), r0, mu) is GeodesicType.ELLIPTIC:
            assert fate(float(alpha), r0, mu) is Fate.TO_VORTEX


def test_radial_profile_pinned():
    r0, mu = 8.0 / 3.0, 2.0
    assert radial_profile(math.pi, r0, mu) is RadialProfile.STRICTLY_MONOTONE
    assert radial_profile(0.0, r0, mu) is RadialProfile.STRICTLY_MONOTONE
    assert radial_profile(5.0, r0, mu) is RadialProfile.ONE_OSCILLATION
    assert radial_profile(2.5, r0, mu) is RadialProfile.ONE_OSCILLATION
    assert radial_profile(1.5 * math.pi, 4.0, 2.0) is RadialProfile.CONSTANT
    a1, a2 = alpha_stars(r0, mu)
    assert radial_profile(a2, r0, mu) is RadialProfile.STRICTLY_MONOTONE


def test_radial_profile_matches_integrated_sign_changes(prob_scan):
    # Count radial-speed sign flips along the integrated geodesic.
    for alpha, expected_flips in [(5.0, 1), (2.5, 1), (0.0, 0), (math.pi, 0)]:
        traj = exponential(prob_scan, alpha, 8.0, rtol=1e-12, atol=1e-12)
        ts = np.linspace(0.0, traj.ts[-1], 1501)
        prs = np.array([traj.state_at(float(t)).p_r for t in ts])
        prs = prs[np.abs(prs) > 1e-12]
        flips = int(np.count_nonzero(np.sign(prs[:-1]) != np.sign(prs[1:])))
        assert flips == expected_flips, f"alpha={alpha}"


def test_classify_mirrors_under_drift_reversal():
    for r0, mu in [(2.0, 4.0), (3.0, 1.3), (8.0 / 3.0, 2.0)]:
        for alpha in np.linspace(0.0123, TWO_PI, 97):
            a = classify(float(alpha), r0, mu)
            b = classify((TWO_PI - float(alpha)) % TWO_PI, r0, -mu)
            assert (a.fate, a.gtype, a.monotonicity) == (b.fate, b.gtype, b.monotonicity)


def test_classification_report_shape():
    rep = classification_report(5.0, 8.0 / 3.0, 2.0)
    assert set(rep) == {
        "alpha", "fate", "type", "monotonicity", "delta",
        "p_theta_star", "r1", "r2", "r0_on_reeb_circle",
    }
    assert rep["fate"] == "ToVortex"
    assert rep["monotonicity"] == "OneOscillation"
    assert rep["r1"] > 0.0
    assert not rep["r0_on_reeb_circle"]
    reeb = classification_report(1.5 * math.pi, 4.0, 2.0)
    assert reeb["fate"] == "ReebCircle"
    assert reeb["r0_on_reeb_circle"]


# ---------------------------------------------------------------------------
# Separating geodesics: closed forms vs integration
# ---------------------------------------------------------------------------

def test_separatrix_rhs_matches_extremal_flow(prob_scan):
    a2 = alpha_stars(prob_scan.r0, prob_scan.mu)[1]
    traj = exponential(prob_scan, a2, 4.0, rtol=1e-12, atol=1e-12)
    for t in (0.0, 1.0, 2.5, 4.0):
        z = traj.state_at(t)
        dz = extremal_rhs(z, prob_scan.mu)
        dr, dth = separatrix_rhs(z.r, prob_scan.mu)
        assert_close((dz[0], dz[1]), (dr, dth), 1e-9, f"rhs at t={t}")


def test_separatrix_time_and_theta_match_integration(prob_scan):
    mu = prob_scan.mu
    a2 = alpha_stars(prob_scan.r0, mu)[1]
    traj = exponential(prob_scan, a2, 6.0, rtol=1e-12, atol=1e-12)
    for t in np.linspace(0.0, 6.0, 13):
        z = traj.state_at(float(t))
        assert z.r < 2.0 * mu
        assert_close(separatrix_time(z.r, prob_scan.r0, mu), t, 1e-8, "t(r)")
        assert_close(separatrix_theta(z.r, prob_scan.r0, mu), z.theta, 1e-8, "theta(r)")


def test_separatrix_theta_turns_at_known_radius():
    mu = 2.0
    r_turn = 2.0 * mu / math.sqrt(3.0)
    assert separatrix_rhs(r_turn - 1e-3, mu)[1] > 0.0
    assert separatrix_rhs(r_turn + 1e-3, mu)[1] < 0.0
    assert abs(separatrix_rhs(r_turn, mu)[1]) <= 1e-12


def test_separatrix_domain_errors():
    with pytest.raises(ValueError):
        separatrix_time(4.0, 2.0, 2.0)       # r = 2 mu excluded
    with pytest.raises(ValueError):
        separatrix_theta(0.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        separatrix_rhs(1.0, -2.0)            # stated on the mu > 0 chart


# ---------------------------------------------------------------------------
# Trapped circle and its foliation invariant
# ---------------------------------------------------------------------------

def test_reeb_circle_rate_matches_flow():
    mu = 2.0
    assert reeb_circle_rate(mu) == -0.125
    # Unit covector on the circle: p_r = 0, p_theta = -2 mu.
    from vortexnav.flow import ExtremalState

    z = ExtremalState(r=2.0 * mu, theta=0.3, p_r=0.0, p_theta=-2.0 * mu)
    dz = extremal_rhs(z, mu)
    assert_close(dz[0], 0.0, 1e-15, "dr/dt")
    assert_close(dz[1], reeb_circle_rate(mu), 1e-15, "dtheta/dt")
    assert_close(dz[2], 0.0, 1e-15, "dp_r/dt")


def test_reeb_f_endpoints_and_peak():
    mu = 2.0
    assert reeb_f(0.0, mu) == 0.0
    assert reeb_f(2.0 * mu, mu) == 0.0
    r_peak = 2.0 * mu / math.sqrt(3.0)
    h = 1e-4
    slope = (reeb_f(r_peak + h, mu) - reeb_f(r_peak - h, mu)) / (2.0 * h)
    assert abs(slope) <= 1e-7
    assert reeb_f(r_peak, mu) > reeb_f(r_peak - 0.01, mu)
    assert reeb_f(r_peak, mu) > reeb_f(r_peak + 0.01, mu)
    with pytest.raises(ValueError):
        reeb_f(5.0, mu)
    with pytest.raises(ValueError):
        reeb_f(1.0, -1.0)


def test_reeb_invariant_constant_along_separatrix(prob_scan):
    mu = prob_scan.mu
    a2 = alpha_stars(prob_scan.r0, mu)[1]
    traj = exponential(prob_scan, a2, 6.0, rtol=1e-12, atol=1e-12)
    vals = []
    for t in np.linspace(0.0, 6.0, 25):
        z = traj.state_at(float(t))
        vals.append(reeb_F(z.r, z.theta, mu))
    vals = np.asarray(vals)
    spread = (vals.max() - vals.min()) / abs(vals[0])
    assert spread <= 1e-6, f"invariant drifted by {spread:.2e}"


def test_reeb_invariant_separates_leaves():
    mu = 2.0
    assert reeb_F(2.0, 0.0, mu) != reeb_F(2.0, 0.5, mu)
    assert_close(
        reeb_F(2.0, 0.5, mu), reeb_f(2.0, mu) * math.exp(-0.5), 1e-15
    )


def test_regime_helper_consistency():
    # abnormal_angles branches on the drift regime helper; spot-check the map.
    from vortexnav.model import drift_strength

    assert drift_strength((2.0, 0.0), 1.0) is DriftRegime.WEAK
    assert drift_strength((2.0, 0.0), 4.0) is DriftRegime.STRONG
