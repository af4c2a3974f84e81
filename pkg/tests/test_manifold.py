import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confkob import (
    ConformalModel,
    ExpressionParseError,
    SampleSpec,
    SignatureError,
    UnsupportedDimension,
    check_ncc,
    compile_diagonal_metric,
    compile_expression,
    conformal_model,
    einstein_de_sitter,
    einstein_residual_at,
    frw_power,
    inverse_metric,
    metric_at,
    minkowski,
    minkowski_halfspace,
    ncc_at,
    null_project,
    ricci_at,
    scalar_curvature_at,
)


def test_minkowski_metric_signature(mink):
    g = metric_at(mink, np.zeros(4))
    assert np.allclose(g, np.diag([1.0, 1.0, 1.0, -1.0]))


def test_halfspace_domain(halfspace):
    assert halfspace.contains(np.array([0.0, 0.0, 0.0, 1.0]))
    assert not halfspace.contains(np.array([0.0, 0.0, 0.0, -1.0]))
    with pytest.raises(Exception):
        metric_at(halfspace, np.array([0.0, 0.0, 0.0, -1.0]))


def test_eds_metric_values(eds):
    x = np.array([0.3, -1.0, 2.0, 2.0])
    g = metric_at(eds, x)
    warp = 2.0 ** (4.0 / 3.0)
    assert np.allclose(g, np.diag([warp, warp, warp, -1.0]))


def test_eds_ricci_closed_form(eds):
    x = np.array([0.1, 0.2, -0.3, 1.7])
    t = x[-1]
    ric = ricci_at(eds, x)
    expected = np.diag([(2.0 / 3.0) * t ** (-2.0 / 3.0)] * 3
                       + [(2.0 / 3.0) * t ** -2])
    assert np.allclose(ric, expected, rtol=1e-7)
    assert np.isclose(scalar_curvature_at(eds, x), (4.0 / 3.0) * t ** -2,
                      rtol=1e-7)


def test_flat_models_are_ricci_flat(mink, halfspace):
    x = np.array([0.5, -0.5, 1.0, 2.0])
    assert np.max(np.abs(ricci_at(mink, x))) < 1e-10
    assert np.max(np.abs(ricci_at(halfspace, x))) < 1e-10
    assert einstein_residual_at(mink, x) < 1e-10


def test_eds_is_not_einstein(eds):
    assert einstein_residual_at(eds, np.array([0.0, 0.0, 0.0, 1.0])) > 1e-2


def test_frw_power_generalizes_eds(eds):
    frw = frw_power(2.0 / 3.0)
    x = np.array([1.0, 0.0, 0.0, 3.0])
    assert np.allclose(metric_at(frw, x), metric_at(eds, x))


def test_inverse_metric_roundtrip(eds):
    g = metric_at(eds, np.array([0.0, 0.0, 0.0, 0.7]))
    assert np.allclose(g @ inverse_metric(g), np.eye(4), atol=1e-12)


def test_null_project_gives_null_vectors(eds):
    x = np.array([0.2, 0.4, -1.0, 1.5])
    v = null_project(eds, x, np.array([1.0, 2.0, 0.5, 1.0]))
    g = metric_at(eds, x)
    assert abs(v @ g @ v) < 1e-12


def test_ncc_holds_on_eds(eds):
    report = check_ncc(eds, SampleSpec(count=40, seed=3))
    assert report.passed
    assert report.min_value > 0.0


def test_ncc_is_borderline_flat(mink):
    report = check_ncc(mink, SampleSpec(count=40, seed=3))
    assert report.passed
    assert abs(report.min_value) < 1e-10


def test_conformal_model_rescales(eds):
    scaled = conformal_model(eds, lambda x: 4.0)
    x = np.array([0.0, 0.0, 0.0, 1.0])
    assert isinstance(scaled, ConformalModel)
    # the factor enters as omega^2
    assert np.allclose(metric_at(scaled, x), 16.0 * metric_at(eds, x))
    # null directions are shared across the conformal class
    v = null_project(eds, x, np.array([0.0, 0.0, 1.0, 1.0]))
    assert abs(ncc_at(eds, x, v)) >= 0.0
    g = metric_at(scaled, x)
    assert abs(v @ g @ v) < 1e-12


def test_dimension_floor():
    with pytest.raises(UnsupportedDimension):
        minkowski(dimension=2)


def test_signature_guard():
    from confkob import MetricModel

    two_times = MetricModel(name="bad", dimension=4,
                            metric=lambda x: np.diag([1.0, 1.0, -1.0, -1.0]),
                            domain=lambda x: True)
    with pytest.raises(SignatureError):
        metric_at(two_times, np.zeros(4))


def test_expression_parser_basics():
    fn = compile_expression("t^2 + 2*x1", 4)
    assert fn(np.array([3.0, 0.0, 0.0, 2.0])) == pytest.approx(10.0)
    with pytest.raises(ExpressionParseError):
        compile_expression("t +", 4)
    with pytest.raises(ExpressionParseError):
        compile_expression("q * 2", 4)


def test_diagonal_metric_compiler():
    coeff = ["t^(4/3)", "t^(4/3)", "t^(4/3)", "-1"]
    metric = compile_diagonal_metric(coeff, 4)
    x = np.array([0.0, 0.0, 0.0, 2.0])
    assert np.allclose(metric(x), np.diag([2 ** (4 / 3)] * 3 + [-1.0]))
    with pytest.raises(ExpressionParseError):
        compile_diagonal_metric(["1", "1", "-1"], 4)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(min_value=0.3, max_value=9.0))
def test_eds_scalar_curvature_scaling(t):
    eds = einstein_de_sitter()
    x = np.array([0.0, 0.0, 0.0, t])
    assert np.isclose(scalar_curvature_at(eds, x), (4.0 / 3.0) / t ** 2,
                      rtol=1e-6)
