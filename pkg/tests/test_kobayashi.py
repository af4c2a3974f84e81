import math

import numpy as np
import pytest

from confkob import (
    ArcKind,
    EstimateStatus,
    InvalidChain,
    KobayashiChain,
    SearchConfig,
    certify_zero,
    chain_length,
    estimate_distance,
    estimate_refine_triangle,
    make_link,
    poincare_distance,
    save_distance_report,
    segment_cost,
    shoot_null,
    validate_chain,
)

FAST = SearchConfig(starts=0)


@pytest.fixture(scope="module")
def photon(eds):
    # velocity (0, 0, 3/5, 3/5) makes the affine parameter match the
    # closed-form ray at s = sigma - 1
    from confkob import ShootSpec, shoot

    return shoot(eds, ShootSpec(start=(0.0, 0.0, 3.0, 1.0),
                                direction=(0.0, 0.0, 0.6, 0.6),
                                affine_budget=10.0))


def test_segment_cost_closed_form(eds, photon):
    # trajectory parameter s = sigma - 1; cost between sigma values a < b
    # is (7/5) log(b / a)
    assert segment_cost(eds, photon, 0.0, 1.0) == pytest.approx(
        1.4 * math.log(2.0), abs=1e-8)
    assert segment_cost(eds, photon, 0.0, 3.0) == pytest.approx(
        1.4 * math.log(4.0), abs=1e-8)
    assert segment_cost(eds, photon, 1.0, 3.0) == pytest.approx(
        1.4 * math.log(2.0), abs=1e-8)


def test_segment_cost_symmetry_and_degeneracy(eds, photon):
    assert segment_cost(eds, photon, 1.0, 3.0) == pytest.approx(
        segment_cost(eds, photon, 3.0, 1.0), abs=1e-10)
    assert segment_cost(eds, photon, 2.0, 2.0) == 0.0


def test_flat_segment_cost_vanishes(mink):
    ray = shoot_null(mink, (0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0),
                     affine_budget=20.0)
    # a complete flat ray develops onto the full line: single-link infimum 0
    assert segment_cost(mink, ray, 0.0, 5.0) == 0.0


def test_make_link_kinds(eds, mink, photon):
    link = make_link(eds, photon, 0.0, 1.0)
    assert link.kind is ArcKind.PROPER
    assert link.cost == pytest.approx(poincare_distance(link.a, link.b))
    ray = shoot_null(mink, (0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0),
                     affine_budget=20.0)
    flat_link = make_link(mink, ray, 0.0, 5.0)
    assert flat_link.kind is ArcKind.FULL_LINE
    assert flat_link.a == 0.0
    assert flat_link.b == pytest.approx(1.0 / 1000.0)


def test_chain_length_sums_links(eds, photon):
    l1 = make_link(eds, photon, 0.0, 1.0)
    l2 = make_link(eds, photon, 1.0, 3.0)
    chain = KobayashiChain((l1, l2), (l1.start, l1.end, l2.end))
    assert chain_length(chain) == pytest.approx(l1.cost + l2.cost, abs=1e-12)
    assert max(chain.joint_gaps()) < 1e-9


def test_chain_rejects_gaps(eds, photon):
    l1 = make_link(eds, photon, 0.0, 1.0)
    l2 = make_link(eds, photon, 2.0, 3.0)
    chain = KobayashiChain((l1, l2), (l1.start, l1.end, l2.end))
    with pytest.raises(InvalidChain):
        chain_length(chain)


def test_chain_reverse_preserves_length(eds, photon):
    l1 = make_link(eds, photon, 0.0, 1.0)
    l2 = make_link(eds, photon, 1.0, 3.0)
    chain = KobayashiChain((l1, l2), (l1.start, l1.end, l2.end))
    assert chain_length(chain.reverse()) == pytest.approx(
        chain_length(chain), abs=1e-12)


def test_validate_chain(eds, photon):
    link = make_link(eds, photon, 0.0, 1.0)
    chain = KobayashiChain((link,), (link.start, link.end))
    report = validate_chain(eds, chain)
    assert report.passed, report


def test_certify_zero_flat(mink):
    # null-separated pair: a single complete link
    direct = certify_zero(mink, np.array([0.0, 0.0, 0.0, 0.0]),
                          np.array([0.0, 0.0, 2.0, 2.0]), FAST)
    assert direct is not None and direct.k == 1
    # spacelike pair: two links through an upper cone vertex
    bent = certify_zero(mink, np.array([0.0, 0.0, 0.0, 0.0]),
                        np.array([1.0, 1.0, 0.0, 0.0]), FAST)
    assert bent is not None and bent.k == 2
    for cert in (direct, bent):
        for i, length in cert.sequence:
            expected = 2 * cert.k * math.log((1 + 1 / i) / (1 - 1 / i))
            assert length == pytest.approx(expected, abs=1e-12)
        assert cert.conditional


def test_certify_zero_eds_declines(eds):
    assert certify_zero(eds, np.array([0.0, 0.0, 3.0, 1.0]),
                        np.array([0.0, 0.0, 6.0, 8.0]), FAST) is None


def test_estimate_trivial_and_failed(eds):
    x = np.array([0.0, 0.0, 3.0, 1.0])
    same = estimate_distance(eds, x, x, FAST)
    assert same.value == 0.0
    assert same.status is EstimateStatus.UPPER_BOUND
    # a timelike pair is out of reach of the deterministic aimed search;
    # few iterations keep the doomed fallback polish cheap
    far = estimate_distance(eds, x, np.array([0.0, 0.0, 3.0, 9.0]),
                            SearchConfig(starts=0, iterations=20))
    assert far.status is EstimateStatus.FAILED
    assert math.isinf(far.value)


def test_estimate_matches_segment_cost(eds, photon):
    x, y = photon.position(0.0), photon.position(3.0)
    est = estimate_distance(eds, x, y, FAST)
    assert est.status is EstimateStatus.UPPER_BOUND
    assert est.value == pytest.approx(1.4 * math.log(4.0), abs=1e-6)
    assert est.mismatch <= 1e-6
    assert est.chain.k == 1


def test_estimate_is_exactly_symmetric(eds, photon):
    x, y = photon.position(0.0), photon.position(3.0)
    a = estimate_distance(eds, x, y, FAST)
    b = estimate_distance(eds, y, x, FAST)
    assert a.value == b.value


def test_estimate_zero_on_flat(mink):
    est = estimate_distance(mink, np.array([0.0, 0.0, 0.0, 0.0]),
                            np.array([0.5, -1.0, 2.0, 0.3]), FAST)
    assert est.status is EstimateStatus.ZERO_CERTIFICATE
    assert est.value == 0.0
    assert est.certificate is not None


def test_refine_triangle_tightens(eds, photon):
    pts = [photon.position(s) for s in (0.0, 1.0, 3.0)]
    est = {}
    for i in range(3):
        for j in range(i + 1, 3):
            est[(i, j)] = estimate_distance(eds, pts[i], pts[j], FAST)
    refined = estimate_refine_triangle(eds, pts, est)
    for (i, j), e in refined.items():
        assert e.value <= est[(i, j)].value + 1e-12
    d01, d12, d02 = (refined[(0, 1)].value, refined[(1, 2)].value,
                     refined[(0, 2)].value)
    assert d02 <= d01 + d12 + 1e-9


def test_distance_report_roundtrip(tmp_path, eds, photon):
    x, y = photon.position(0.0), photon.position(1.0)
    est = estimate_distance(eds, x, y, FAST)
    path = tmp_path / "report.json"
    save_distance_report(path, {"model": "eds"}, x, y, est, FAST)
    import json

    data = json.loads(path.read_text())
    assert data["status"] == "UpperBound"
    assert data["value"] == pytest.approx(est.value)
    assert len(data["chain"]) == est.chain.k
