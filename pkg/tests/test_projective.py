import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confkob import (
    ArcKind,
    CriticalPoint,
    Moebius,
    PointOffArc,
    ProjectivePoint,
    ShootSpec,
    arc_distance,
    cross_ratio,
    development_arc,
    poincare_distance,
    projective_parameter,
    schwarzian,
    shoot,
    solve_companion,
)
from conftest import photon_projective

finite = st.floats(min_value=-3.0, max_value=3.0,
                   allow_nan=False, allow_infinity=False)


@pytest.fixture(scope="module")
def photon_param(eds):
    traj = shoot(eds, ShootSpec(start=(0.0, 0.0, 3.0, 1.0),
                                direction=(0.0, 0.0, 0.6, 0.6),
                                affine_budget=10.0))
    # trajectory parameter s = sigma - 1 relative to the closed form
    return projective_parameter(eds, traj, 0.0)


def test_poincare_distance_closed_form():
    # rho(0, u) = log((1+u)/(1-u))
    for u in (0.1, 0.5, 0.9):
        assert poincare_distance(0.0, u) == pytest.approx(
            np.log((1 + u) / (1 - u)), rel=1e-14)
    assert poincare_distance(0.3, 0.3) == 0.0
    assert poincare_distance(-0.5, 0.5) == poincare_distance(0.5, -0.5)


def test_projective_point_infinity():
    inf = ProjectivePoint(1.0, 0.0)
    assert np.isinf(inf.affine)
    assert inf.close_to(ProjectivePoint(-2.0, 0.0))
    assert not inf.close_to(ProjectivePoint(1.0, 1.0))


def test_cross_ratio_moebius_invariance():
    pts = [ProjectivePoint(p, 1.0) for p in (0.0, 1.0, 3.0, -2.0)]
    m = Moebius(2.0, 1.0, 1.0, 1.0)
    before = cross_ratio(*pts)
    after = cross_ratio(*(m.apply(p) for p in pts))
    assert after == pytest.approx(before, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(a=finite, b=finite, c=finite, d=finite, u=finite)
def test_moebius_compose_invert(a, b, c, d, u):
    if abs(a * d - b * c) < 1e-6:
        return
    m = Moebius(a, b, c, d)
    p = ProjectivePoint(u, 1.0)
    roundtrip = m.invert().apply(m.apply(p))
    assert roundtrip.close_to(p, tol=1e-9)
    both = m.compose(m.invert())
    q = both.apply(p)
    assert q.close_to(p, tol=1e-9)


def test_moebius_taking_three_points():
    pts = [ProjectivePoint(p, 1.0) for p in (-3.0, 0.5, 2.0)]
    targets = [ProjectivePoint(p, 1.0) for p in (-1.0, 0.0, 1.0)]
    m = Moebius.taking(pts, targets)
    images = [m.apply(p).affine for p in pts]
    assert images == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)


def test_schwarzian_of_moebius_vanishes():
    f = lambda s: (2.0 * s + 1.0) / (s + 3.0)
    assert abs(schwarzian(f, 0.5)) < 1e-5


def test_schwarzian_power_law():
    # {s^a, s} = (1 - a^2) / (2 s^2)
    a = 1.4
    s = 2.0
    expected = (1.0 - a * a) / (2.0 * s * s)
    assert schwarzian(lambda u: u ** a, s) == pytest.approx(expected, rel=1e-5)


def test_schwarzian_critical_point_guard():
    with pytest.raises(CriticalPoint):
        schwarzian(lambda s: s * s, 0.0)


def test_companion_solution_wronskian():
    param = solve_companion(lambda s: 1.0, (-1.0, 1.0), 0.0)
    assert param.wronskian_drift < 1e-9
    # q = 1 gives u1 = sin, u2 = cos, p = tan
    assert param.value(0.5) == pytest.approx(np.tan(0.5), rel=1e-9)


def test_photon_projective_closed_form(photon_param):
    for sigma in (0.5, 2.0, 4.0):
        assert photon_param.value(sigma - 1.0) == pytest.approx(
            photon_projective(sigma), abs=1e-8)
    # the drift diagnostic samples the whole domain, including the
    # near-singular end where the companion potential blows up
    assert photon_param.wronskian_drift < 1e-3


def test_photon_schwarzian_matches_potential(photon_param):
    # the measured Schwarzian of p recovers twice the companion potential
    for sigma in (0.7, 2.0, 4.0):
        s = sigma - 1.0
        measured = schwarzian(photon_param.value, s,
                              h=0.03 * max(abs(s), 1.0))
        assert measured == pytest.approx(-2.0 * (6.0 / 25.0) / sigma ** 2,
                                         rel=2e-4, abs=1e-5)


def test_einstein_shortcut_is_affine(mink):
    traj = shoot(mink, ShootSpec(start=(0.0, 0.0, 0.0, 0.0),
                                 direction=(1.0, 0.0, 0.0, 1.0),
                                 affine_budget=5.0))
    param = projective_parameter(mink, traj, 0.5)
    for s in np.linspace(-4.0, 4.0, 17):
        assert param.value(s) == pytest.approx(s - 0.5, abs=1e-10)


def test_flat_arc_is_full_line(mink):
    traj = shoot(mink, ShootSpec(start=(0.0, 0.0, 0.0, 0.0),
                                 direction=(1.0, 0.0, 0.0, 1.0),
                                 affine_budget=20.0))
    arc = development_arc(projective_parameter(mink, traj, 0.0))
    assert arc.kind is ArcKind.FULL_LINE
    assert arc.conditional


def test_photon_arc_is_proper(photon_param):
    arc = development_arc(photon_param)
    assert arc.kind is ArcKind.PROPER
    # closed-form endpoint images are -5/6 (singularity) and 5 (the
    # infinite-affine limit, extrapolated past the integration budget)
    assert arc.start.affine == pytest.approx(-5.0 / 6.0, abs=1e-6)
    assert arc.end.affine == pytest.approx(5.0, abs=1e-6)
    assert arc.conditional


def test_oscillatory_potential_wraps():
    from confkob import EndFlag

    param = solve_companion(lambda s: 1.0, (-2.5, 2.5), 0.0)
    flags = {"minus": EndFlag.BUDGET_REACHED, "plus": EndFlag.BUDGET_REACHED}
    arc = development_arc(param, end_flags=flags)
    assert arc.kind is ArcKind.WRAPS


def test_arc_distance_matches_chart(photon_param):
    arc = development_arc(photon_param)
    d = arc_distance(arc, photon_param.point(1.0), photon_param.point(3.0))
    assert d > 0.0
    # inserting a middle point is exactly additive
    mid = photon_param.point(2.0)
    d1 = arc_distance(arc, photon_param.point(1.0), mid)
    d2 = arc_distance(arc, mid, photon_param.point(3.0))
    assert d1 + d2 == pytest.approx(d, abs=1e-10)


def test_arc_distance_rejects_outside_points(photon_param):
    arc = development_arc(photon_param)
    with pytest.raises(PointOffArc):
        arc_distance(arc, ProjectivePoint(100.0, 1.0),
                     photon_param.point(1.0))
