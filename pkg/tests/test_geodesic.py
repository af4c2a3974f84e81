import numpy as np
import pytest

from confkob import (
    EndFlag,
    GeometryError,
    ShootSpec,
    SplineTrajectory,
    curve_geodesic_residual,
    export_trajectory_csv,
    geodesic_residual,
    maximal_affine_domain,
    ngc_along,
    shoot,
    shoot_null,
)
from conftest import photon_position


def shoot_photon(eds, budget=10.0):
    return shoot(eds, ShootSpec(start=(0.0, 0.0, 3.0, 1.0),
                                direction=(0.0, 0.0, 0.6, 0.6),
                                affine_budget=budget))


def test_photon_matches_closed_form(eds):
    traj = shoot_photon(eds)
    # trajectory parameter s corresponds to closed-form parameter s + 1
    for sigma in np.linspace(0.2, 5.0, 23):
        assert np.allclose(traj.position(sigma - 1.0),
                           photon_position(sigma), atol=1e-8)
    assert traj.null_drift <= 1e-8


def test_photon_hits_initial_singularity(eds):
    traj = shoot_photon(eds)
    assert traj.end_flags["minus"] is EndFlag.DOMAIN_EXIT
    assert traj.end_flags["plus"] is EndFlag.BUDGET_REACHED
    # the exit happens where the closed-form time coordinate vanishes
    assert traj.s_minus == pytest.approx(-1.0, abs=1e-8)
    assert traj.exit_params["minus"] == pytest.approx(-1.0, abs=1e-8)


def test_flat_rays_are_straight(mink):
    traj = shoot(mink, ShootSpec(start=(0.0, 0.0, 0.0, 0.0),
                                 direction=(1.0, 0.0, 0.0, 1.0),
                                 affine_budget=5.0))
    for s in (-4.0, -1.0, 0.5, 4.0):
        assert np.allclose(traj.position(s), [s, 0.0, 0.0, s], atol=1e-9)
    assert traj.end_flags["minus"] is EndFlag.BUDGET_REACHED
    assert traj.end_flags["plus"] is EndFlag.BUDGET_REACHED


def test_shoot_null_projects_direction(eds):
    traj = shoot_null(eds, (0.0, 0.0, 3.0, 1.0), (0.0, 0.0, 1.0))
    assert traj.null_drift <= 1e-8
    assert traj.velocity(0.0)[-1] > 0.0


def test_non_null_direction_rejected(eds):
    with pytest.raises(GeometryError):
        shoot(eds, ShootSpec(start=(0.0, 0.0, 3.0, 1.0),
                             direction=(0.0, 0.0, 0.0, 1.0)))


def test_geodesic_residual_small(eds):
    traj = shoot_photon(eds)
    # keep clear of the singular end, where differencing the interpolant
    # against the blowing-up connection dominates the residual
    assert geodesic_residual(eds, traj, span=(0.0, 9.0)) < 1e-6


def test_curve_residual_flags_non_geodesics(eds):
    # the closed-form photon is a geodesic; a bent copy of it is not
    good = curve_geodesic_residual(eds, photon_position, (0.5, 4.0))
    bent = curve_geodesic_residual(
        eds, lambda s: photon_position(s) + np.array([0.0, 0.2 * np.sin(s), 0.0, 0.0]),
        (0.5, 4.0))
    assert good < 1e-5
    assert bent > 1e-2


def test_maximal_affine_domain(eds, mink):
    s_minus, s_plus, past, future = maximal_affine_domain(shoot_photon(eds))
    assert s_minus == pytest.approx(-1.0, abs=1e-6)
    assert not past and future
    _, _, past, future = maximal_affine_domain(shoot(mink, ShootSpec(
        start=(0.0, 0.0, 0.0, 0.0), direction=(1.0, 0.0, 0.0, 1.0))))
    assert past and future


def test_ngc_along_photon(eds, mink):
    holds, witness = ngc_along(eds, shoot_photon(eds))
    assert holds and witness is not None
    flat = shoot(mink, ShootSpec(start=(0.0, 0.0, 0.0, 0.0),
                                 direction=(1.0, 0.0, 0.0, 1.0)))
    holds, witness = ngc_along(mink, flat)
    assert not holds and witness is None


def test_spline_trajectory_wraps_closed_form(eds):
    s = np.linspace(0.5, 4.0, 200)
    h = 1e-6
    vel = (photon_position(s + h) - photon_position(s - h)) / (2 * h)
    traj = SplineTrajectory(eds, s, photon_position(s), vel)
    assert np.allclose(traj.position(2.0), photon_position(2.0), atol=1e-9)
    assert geodesic_residual(eds, traj) < 1e-3


def test_export_roundtrip(tmp_path, eds):
    traj = shoot_photon(eds)
    path = tmp_path / "traj.csv"
    side = tmp_path / "traj.csv.json"
    export_trajectory_csv(traj, path, sidecar_path=side, samples=64)
    rows = path.read_text().strip().splitlines()
    assert rows[0].startswith("s,x1,x2,x3,t,")
    assert len(rows) == 65
    assert '"minus": "DomainExit"' in side.read_text()
