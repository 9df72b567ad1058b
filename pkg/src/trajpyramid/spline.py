"""Natural cubic spline interpolation of 2-D (or any-D) positions over time.

The fit solves the tridiagonal system for the knot second derivatives with the
Thomas algorithm, so irregular knot spacing is supported.  Each coordinate
column is fitted independently; the solve simply carries all columns at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InsufficientKnots, NonMonotonicTimes, OutOfRange


class Knot(NamedTuple):
    t: float
    p: tuple[float, float]


@dataclass(frozen=True)
class SplineCoeffs:
    """Piecewise cubic ``a + b s + c s^2 + d s^3`` with ``s = t - knot_times[k]``.

    ``a``, ``b``, ``c`` and ``d`` have shape ``(n_knots - 1, dim)``.  ``end``
    holds the last knot's value so that evaluation there is exact rather than
    a rounded ``a + b h + c h^2 + d h^3``.
    """

    knot_times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    end: np.ndarray | None = None

    @property
    def segments(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
        return [(self.a[k], self.b[k], self.c[k], self.d[k]) for k in range(len(self.a))]

    @property
    def n_segments(self) -> int:
        return len(self.a)


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm. ``lower[i]`` couples row i to i-1 (``lower[0]`` unused),
    ``upper[i]`` couples row i to i+1 (``upper[-1]`` unused). ``rhs`` may be 2-D."""
    n = len(diag)
    cp = np.zeros(n)
    dp = np.zeros_like(rhs, dtype=float)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _check_times(t: np.ndarray) -> None:
    if t.ndim != 1 or len(t) < 2:
        raise InsufficientKnots(f"a spline fit needs at least 2 knots, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTimes("knot times must be strictly increasing")


def second_derivatives(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot second derivatives of the natural spline through ``(t, y)``."""
    n = len(t)
    h = np.diff(t)
    m = np.zeros((n,) + y.shape[1:])
    if n == 2:
        return m
    slopes = np.diff(y, axis=0) / h.reshape((-1,) + (1,) * (y.ndim - 1))
    rhs = 6.0 * (slopes[1:] - slopes[:-1])
    lower = np.concatenate([[0.0], h[1:-1]])
    upper = np.concatenate([h[1:-1], [0.0]])
    diag = 2.0 * (h[:-1] + h[1:])
    m[1:-1] = solve_tridiagonal(lower, diag, upper, rhs)
    return m


def fit_arrays(times, points) -> SplineCoeffs:
    """Fit from a time vector of length n and an ``(n,)`` or ``(n, dim)`` value array."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(points, dtype=float)
    _check_times(t)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if len(y) != len(t):
        raise InsufficientKnots("times and points differ in length")
    m = second_derivatives(t, y)
    h = np.diff(t)[:, None]
    a = y[:-1].copy()
    b = (y[1:] - y[:-1]) / h - h * (2.0 * m[:-1] + m[1:]) / 6.0
    c = m[:-1] / 2.0
    d = (m[1:] - m[:-1]) / (6.0 * h)
    return SplineCoeffs(t.copy(), a, b, c, d, y[-1].copy())


def fit_natural_cubic(knots: Sequence[Knot] | Sequence[tuple[float, Sequence[float]]]) -> SplineCoeffs:
    """Natural cubic spline (zero curvature at both ends) through the knots."""
    if len(knots) < 2:
        raise InsufficientKnots(f"a spline fit needs at least 2 knots, got {len(knots)}")
    times = [float(k[0]) for k in knots]
    points = [tuple(map(float, k[1])) for k in knots]
    return fit_arrays(times, points)


def _locate(s: SplineCoeffs, t: np.ndarray) -> np.ndarray:
    kt = s.knot_times
    # small tolerance so that grid points computed in floating point (e.g. 1 + j/c) stay in range
    tol = 1e-12 * max(1.0, abs(kt[-1]))
    if np.any(t < kt[0] - tol) or np.any(t > kt[-1] + tol):
        raise OutOfRange(f"t outside [{kt[0]}, {kt[-1]}]; the spline does not extrapolate")
    seg = np.searchsorted(kt, t, side="right") - 1
    return np.clip(seg, 0, s.n_segments - 1)


def eval_spline(s: SplineCoeffs, t, derivative: int = 0) -> np.ndarray:
    """Evaluate the spline (or its first/second derivative) at scalar or array ``t``.

    Returns shape ``(dim,)`` for scalar t, ``(len(t), dim)`` otherwise.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    seg = _locate(s, tt)
    u = (tt - s.knot_times[seg])[:, None]
    a, b, c, d = s.a[seg], s.b[seg], s.c[seg], s.d[seg]
    if derivative == 0:
        out = a + u * (b + u * (c + u * d))
        if s.end is not None:
            out[tt == s.knot_times[-1]] = s.end
    elif derivative == 1:
        out = b + u * (2.0 * c + 3.0 * u * d)
    elif derivative == 2:
        out = 2.0 * c + 6.0 * u * d
    else:
        raise ValueError("derivative must be 0, 1 or 2")
    return out[0] if scalar else out


def segment_derivatives(s: SplineCoeffs, k: int, u: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, first and second derivative of segment ``k`` at local offset ``u``.

    Used to compare one-sided limits at interior knots.
    """
    a, b, c, d = s.a[k], s.b[k], s.c[k], s.d[k]
    return (a + u * (b + u * (c + u * d)), b + u * (2.0 * c + 3.0 * u * d), 2.0 * c + 6.0 * u * d)
