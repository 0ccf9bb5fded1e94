import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedqw.geometry import (
    ETA,
    ConformalMetric,
    CoordinateTransform,
    CustomMetric,
    FlatMetric,
    HomogeneousMetric,
    Metric2p1,
    MetricError,
    SpacetimePoint,
    Tetrad,
    build_tetrad,
    deformation_at,
    deformation_field,
    inverse_residual,
    orthonormality_residual,
    regauge,
    sqrt_det_factor,
    tetrad_field,
    transform_metric,
)

MINKOWSKI = Metric2p1(ETA)


def test_minkowski_tetrad_is_identity():
    e = build_tetrad(MINKOWSKI, SpacetimePoint(0, 0, 0))
    np.testing.assert_array_equal(e.e, np.eye(3))


def test_conformal_tetrad():
    g = Metric2p1(np.diag([1.0, -4.0, -4.0]))
    e = build_tetrad(g).e
    np.testing.assert_allclose(e, np.diag([1.0, 0.5, 0.5]), atol=0)
    assert orthonormality_residual(g.g, e) < 1e-12
    np.testing.assert_allclose(deformation_at(Tetrad(e))[:, 1:], np.diag([0.5, 0.5]))


def test_flat_deformation():
    lam = deformation_at(build_tetrad(MINKOWSKI))
    np.testing.assert_array_equal(lam, [[0, 1, 0], [0, 0, 1]])


def test_deformation_divides_by_lapse():
    e = np.diag([2.0, 1.0, 1.0])
    assert deformation_at(Tetrad(e))[0, 1] == 0.5


def test_transformed_minkowski():
    gam = CoordinateTransform(np.array([[2.0, 0.0], [0.0, 1.0]]))
    g2, e2 = transform_metric(gam, MINKOWSKI, build_tetrad(MINKOWSKI))
    np.testing.assert_allclose(g2.g[1:, 1:], np.diag([-0.25, -1.0]))
    assert e2.e[1, 1] == 2.0
    assert orthonormality_residual(g2.g, e2.e) < 1e-12
    # the tetrad rebuilt from g' in the Cholesky gauge also has e^x_1 = 2
    assert build_tetrad(g2).e[1, 1] == pytest.approx(2.0, abs=1e-15)


def test_identity_transform():
    e = build_tetrad(MINKOWSKI)
    g2, e2 = transform_metric(CoordinateTransform(np.eye(2)), MINKOWSKI, e)
    np.testing.assert_array_equal(g2.g, MINKOWSKI.g)
    np.testing.assert_array_equal(e2.e, e.e)


def test_singular_transform_rejected():
    with pytest.raises(MetricError):
        transform_metric(CoordinateTransform(np.array([[1.0, 2.0], [2.0, 4.0]])), MINKOWSKI,
                         build_tetrad(MINKOWSKI))


@pytest.mark.parametrize(
    "g",
    [
        np.diag([-1.0, -1.0, -1.0]),
        np.diag([1.0, 1.0, -1.0]),
        np.diag([1.0, -1.0, 1.0]),
        np.array([[1.0, 0.1, 0.0], [0.1, -1.0, 0.0], [0.0, 0.0, -1.0]]),
        np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.5, -1.0]]),
    ],
)
def test_invalid_metrics(g):
    with pytest.raises(MetricError):
        Metric2p1(g)


def test_tetrad_gauge_structure():
    g = np.array([[2.0, 0, 0], [0, -3.0, 0.7], [0, 0.7, -1.5]])
    e = tetrad_field(g)
    assert e[0, 1] == 0 and e[0, 2] == 0
    assert e[0, 0] > 0
    assert e[2, 1] == 0  # upper-triangular spatial block
    assert orthonormality_residual(g, e) < 1e-12
    assert inverse_residual(e) < 1e-12
    f = Tetrad(e).forward
    np.testing.assert_allclose(np.einsum("ma,na->mn", e, f), np.eye(3), atol=1e-14)


def _random_spd(rng):
    a = rng.normal(size=(2, 2))
    return a @ a.T + 0.2 * np.eye(2)


def test_random_points_all_families():
    rng = np.random.default_rng(11)
    families = [
        FlatMetric(),
        HomogeneousMetric([[1.3, 0.2], ["0.1*t", 0.9]]),
        ConformalMetric("1+0.3*sin(x)*sin(y)"),
        CustomMetric("1+0.2*cos(t)", "-(2+sin(x))", "-(1.5+cos(y))", "0.3*sin(x+y)"),
    ]
    for fam in families:
        t, x, y = rng.uniform(-5, 5, size=(3, 250))
        g = fam.metric_field(t, x, y)
        e = fam.tetrad_field(t, x, y)
        assert orthonormality_residual(g, e) < 1e-12
        assert inverse_residual(e) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transform_then_regauge_matches_direct_build(seed):
    rng = np.random.default_rng(seed)
    s = _random_spd(rng)
    g = np.zeros((3, 3))
    g[0, 0] = rng.uniform(0.3, 3)
    g[1:, 1:] = -s
    metric = Metric2p1(g)
    lam = rng.normal(size=(2, 2))
    if abs(np.linalg.det(lam)) < 0.1:
        lam += np.eye(2)
    gam = CoordinateTransform(lam)
    g2, e2 = transform_metric(gam, metric, build_tetrad(metric))
    assert orthonormality_residual(g2.g, e2.e) < 1e-11
    direct = build_tetrad(g2)
    np.testing.assert_allclose(
        deformation_at(Tetrad(regauge(e2.e))), deformation_at(direct), atol=1e-12
    )


def test_homogeneous_family():
    fam = HomogeneousMetric([[0.8, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(fam.deformation_field(0.0, 1.0, 2.0), [[0, 0.8, 0], [0, 0, 1.0]])
    assert fam.is_static
    assert not HomogeneousMetric([["1+0.1*t", 0], [0, 1]]).is_static
    with pytest.raises(ValueError):
        HomogeneousMetric([["1+x", 0], [0, 1]])
    with pytest.raises(MetricError):
        fam2 = HomogeneousMetric([[1, 2], [2, 4]])
        fam2.metric_field(0.0, 0.0, 0.0)


def test_conformal_family_deformation():
    fam = ConformalMetric("2")
    lam = fam.deformation_field(0.0, 0.3, 0.4)
    np.testing.assert_allclose(lam, [[0, 0.5, 0], [0, 0, 0.5]])
    with pytest.raises(MetricError):
        ConformalMetric("x").metric_field(0.0, 0.0, 0.0)


def test_sqrt_det_factor():
    assert sqrt_det_factor(FlatMetric(), 0.0, 0.0, 0.0) == pytest.approx(1.0)
    assert sqrt_det_factor(ConformalMetric("2"), 0.0, 1.0, 1.0) == pytest.approx(2.0)


def test_spacetime_point_finite():
    with pytest.raises(ValueError):
        SpacetimePoint(0.0, float("nan"), 0.0)


def test_deformation_field_rejects_bad_lapse():
    e = np.eye(3)
    e[0, 0] = -1
    with pytest.raises(MetricError):
        deformation_field(e)
