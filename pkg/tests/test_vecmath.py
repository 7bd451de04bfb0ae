import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from feddpc.vecmath import DEFAULT_EPS, adaptive_scale, dot, norm, project, residual


def vec(*values):
    return np.array(values, dtype=np.float64)


def finite_vectors(dim):
    return arrays(
        np.float64,
        (dim,),
        elements=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
    )


class TestDot:
    def test_orthogonal_basis(self):
        assert dot(vec(1, 0), vec(0, 1)) == 0.0

    def test_self_dot_is_squared_norm(self):
        assert dot(vec(2, 3), vec(2, 3)) == 13.0

    def test_hand_example(self):
        assert dot(vec(3, 4), vec(1, 0)) == 3.0

    def test_dimension_mismatch_names_both_lengths(self):
        with pytest.raises(ValueError, match="2.*3"):
            dot(vec(1, 2), vec(1, 2, 3))


class TestNorm:
    def test_zero_vector(self):
        assert norm(vec(0, 0, 0)) == 0.0

    def test_three_four_five(self):
        assert norm(vec(3, 4)) == 5.0

    def test_unit_components(self):
        assert norm(vec(1, 1, 1, 1)) == 2.0


class TestProject:
    def test_onto_axis(self):
        np.testing.assert_array_equal(project(vec(3, 4), vec(1, 0)), vec(3, 0))

    def test_onto_self_is_identity(self):
        v = vec(1.5, -2.0, 0.25)
        np.testing.assert_allclose(project(v, v), v, rtol=1e-15)

    def test_degenerate_target_gives_zero(self):
        np.testing.assert_array_equal(project(vec(3, 4), vec(0, 0)), vec(0, 0))

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            project(vec(1, 0), vec(0, 1), eps=0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            project(vec(1, 2, 3), vec(1, 2))

    def test_obtuse_angle_gives_negative_coefficient(self):
        # projection is applied literally even when the angle exceeds 90 degrees
        out = project(vec(-3, 4), vec(1, 0))
        np.testing.assert_array_equal(out, vec(-3, 0))


class TestResidual:
    def test_hand_example(self):
        np.testing.assert_allclose(residual(vec(3, 4), vec(1, 0)), vec(0, 4), atol=1e-15)

    def test_parallel_update_vanishes(self):
        v = vec(2, -1, 5)
        np.testing.assert_allclose(residual(v, v), vec(0, 0, 0), atol=1e-15)

    def test_first_round_degenerate_passthrough(self):
        np.testing.assert_array_equal(residual(vec(3, 4), vec(0, 0)), vec(3, 4))


class TestAdaptiveScale:
    def test_hand_example(self):
        out = adaptive_scale(vec(3, 4), vec(0, 4), lam=1.0)
        np.testing.assert_allclose(out, vec(0, 9), rtol=1e-15)

    def test_residual_equal_to_original(self):
        v = vec(3, 4)
        out = adaptive_scale(v, v, lam=0.5)
        np.testing.assert_allclose(out, 1.5 * v, rtol=1e-15)

    def test_zero_residual_gives_zero(self):
        np.testing.assert_array_equal(adaptive_scale(vec(3, 4), vec(0, 0), lam=1.0), vec(0, 0))

    def test_negative_lambda_is_allowed(self):
        out = adaptive_scale(vec(3, 4), vec(0, 4), lam=-0.5)
        np.testing.assert_allclose(out, vec(0, 3), rtol=1e-15)


@given(u=finite_vectors(8), g=finite_vectors(8))
def test_residual_is_orthogonal(u, g):
    if norm(g) <= DEFAULT_EPS:
        np.testing.assert_array_equal(residual(u, g), u)
    elif norm(u) > DEFAULT_EPS:  # below eps the squared norm can underflow
        assert abs(dot(residual(u, g), g)) <= 1e-9 * norm(u) * norm(g)


@given(u=finite_vectors(8), g=finite_vectors(8))
def test_pythagoras(u, g):
    if norm(g) <= DEFAULT_EPS:
        return
    lhs = norm(u) ** 2
    rhs = norm(project(u, g)) ** 2 + norm(residual(u, g)) ** 2
    assert rhs == pytest.approx(lhs, rel=1e-9, abs=1e-300)


@given(u=finite_vectors(8), g=finite_vectors(8))
def test_norm_ratio_at_least_one(u, g):
    r = residual(u, g)
    if norm(g) <= DEFAULT_EPS or norm(r) <= DEFAULT_EPS or norm(u) <= DEFAULT_EPS:
        return
    assert norm(u) / norm(r) >= 1.0 - 1e-12


@given(
    u=finite_vectors(8),
    g=finite_vectors(8),
    lam=st.floats(min_value=-0.99, max_value=5.0),
)
def test_scale_factor_positive_for_lambda_above_minus_one(u, g, lam):
    r = residual(u, g)
    if norm(r) <= DEFAULT_EPS:
        return
    scaled = adaptive_scale(u, r, lam)
    # direction preserved: scaled residual is a positive multiple of the residual
    assert dot(scaled, r) > 0.0


@given(
    u=finite_vectors(8),
    g=finite_vectors(8),
    lam=st.floats(min_value=0.0, max_value=5.0),
)
def test_post_scale_norm_identity(u, g, lam):
    r = residual(u, g)
    if norm(r) <= DEFAULT_EPS:
        return
    assert norm(adaptive_scale(u, r, lam)) == pytest.approx(lam * norm(r) + norm(u), rel=1e-9)


@settings(max_examples=200)
@given(a=finite_vectors(8), b=finite_vectors(8), g=finite_vectors(8))
def test_projection_is_linear(a, b, g):
    if norm(g) <= DEFAULT_EPS:
        return
    combined = project(a + b, g)
    separate = project(a, g) + project(b, g)
    scale = max(norm(a), norm(b), 1e-30)
    np.testing.assert_allclose(combined, separate, rtol=1e-9, atol=1e-9 * scale)


def test_norm_ratio_tracks_cosecant():
    # with |residual| = |u| sin(theta), the ratio |u|/|residual| is cosec(theta)
    g = vec(1, 0)
    for theta_deg in (5, 30, 45, 60, 89, 91, 135, 175):
        theta = np.deg2rad(theta_deg)
        u = vec(np.cos(theta), np.sin(theta))
        ratio = norm(u) / norm(residual(u, g))
        assert ratio == pytest.approx(1.0 / abs(np.sin(theta)), rel=1e-9)
