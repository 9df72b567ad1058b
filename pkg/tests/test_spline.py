import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline

from trajpyramid.errors import InsufficientKnots, NonMonotonicTimes, OutOfRange
from trajpyramid.spline import (
    Knot,
    eval_spline,
    fit_arrays,
    fit_natural_cubic,
    segment_derivatives,
    solve_tridiagonal,
)


def random_knots(rng, n):
    t = np.cumsum(rng.uniform(0.2, 2.0, size=n))
    return t, rng.normal(scale=3.0, size=(n, 2))


def test_two_knots_give_straight_segment():
    s = fit_natural_cubic([Knot(1, (0, 0)), Knot(2, (2, 0))])
    assert s.n_segments == 1
    a, b, c, d = s.segments[0]
    np.testing.assert_array_equal(a, [0, 0])
    np.testing.assert_array_equal(b, [2, 0])
    np.testing.assert_array_equal(c, [0, 0])
    np.testing.assert_array_equal(d, [0, 0])


def test_collinear_knots_reproduce_line():
    s = fit_natural_cubic([(1, (0, 0)), (2, (1, 1)), (3, (2, 2))])
    for a, b, c, d in s.segments:
        np.testing.assert_allclose(b, [1, 1], atol=1e-15)
        np.testing.assert_allclose(c, 0, atol=1e-15)
        np.testing.assert_allclose(d, 0, atol=1e-15)
    np.testing.assert_allclose(eval_spline(s, 1.5), [0.5, 0.5], atol=1e-15)


def test_arch_hand_oracle():
    # unit spacing: 4 M2 = 6 (0 - 2 + 0) -> M2 = -3.
    # first segment: b = 1 - M2/6 = 1.5, c = 0, d = M2/6 = -0.5 -> y(0.5) = 0.75 - 0.0625
    s = fit_natural_cubic([(1, (0, 0)), (2, (0, 1)), (3, (0, 0))])
    assert 2 * s.c[1][1] == pytest.approx(-3.0, abs=1e-15)
    y = eval_spline(s, 1.5)
    assert abs(y[0]) <= 1e-12
    assert abs(y[1] - 0.6875) <= 1e-12


def test_errors():
    with pytest.raises(InsufficientKnots):
        fit_natural_cubic([(1, (0, 0))])
    with pytest.raises(NonMonotonicTimes):
        fit_natural_cubic([(1, (0, 0)), (1, (1, 1))])
    with pytest.raises(NonMonotonicTimes):
        fit_natural_cubic([(2, (0, 0)), (1, (1, 1)), (3, (0, 0))])
    s = fit_natural_cubic([(1, (0, 0)), (2, (1, 1))])
    with pytest.raises(OutOfRange):
        eval_spline(s, 0.5)
    with pytest.raises(OutOfRange):
        eval_spline(s, 2.0001)


def test_thomas_matches_dense_solve():
    rng = np.random.default_rng(3)
    n = 9
    diag = rng.uniform(4, 6, n)
    lower = np.r_[0.0, rng.uniform(-1, 1, n - 1)]
    upper = np.r_[rng.uniform(-1, 1, n - 1), 0.0]
    rhs = rng.normal(size=(n, 2))
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(solve_tridiagonal(lower, diag, upper, rhs), np.linalg.solve(A, rhs), atol=1e-12)


def test_matches_scipy_natural_spline():
    rng = np.random.default_rng(11)
    for n in (3, 5, 17, 30):
        t, p = random_knots(rng, n)
        ref = CubicSpline(t, p, bc_type="natural")
        q = np.linspace(t[0], t[-1], 101)
        np.testing.assert_allclose(eval_spline(fit_arrays(t, p), q), ref(q), atol=1e-9)
        np.testing.assert_allclose(eval_spline(fit_arrays(t, p), q, 1), ref(q, 1), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 30), seed=st.integers(0, 2**31))
def test_interpolation_smoothness_boundary(n, seed):
    t, p = random_knots(np.random.default_rng(seed), n)
    s = fit_arrays(t, p)
    np.testing.assert_allclose(eval_spline(s, t), p, atol=1e-9)
    for k in range(1, n - 1):
        left = segment_derivatives(s, k - 1, t[k] - t[k - 1])
        right = segment_derivatives(s, k, 0.0)
        for lv, rv in zip(left, right):
            np.testing.assert_allclose(lv, rv, atol=1e-7 * max(1.0, np.abs(lv).max()))
    np.testing.assert_allclose(eval_spline(s, [t[0], t[-1]], 2), 0, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 20),
    x0=st.floats(-50, 50), y0=st.floats(-50, 50), vx=st.floats(-3, 3), vy=st.floats(-3, 3),
    seed=st.integers(0, 2**31),
)
def test_linear_reproduction(n, x0, y0, vx, vy, seed):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.3, 1.5, n))
    p = np.stack([x0 + vx * t, y0 + vy * t], axis=1)
    q = rng.uniform(t[0], t[-1], 25)
    np.testing.assert_allclose(eval_spline(fit_arrays(t, p), q), np.stack([x0 + vx * q, y0 + vy * q], 1), atol=1e-9)


def test_coordinate_separability():
    t, p = random_knots(np.random.default_rng(5), 12)
    joint = fit_arrays(t, p)
    q = np.linspace(t[0], t[-1], 50)
    for col in range(2):
        alone = fit_arrays(t, p[:, col])
        np.testing.assert_array_equal(eval_spline(joint, q)[:, col], eval_spline(alone, q)[:, 0])
