import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajpyramid import pyramid as P
from trajpyramid.errors import ConfigError, EmptySequence, InsufficientKnots, InvalidLength, ShapeError

DEFAULT = P.PyramidConfig()


def seq8(rng=None):
    rng = rng or np.random.default_rng(0)
    return rng.normal(size=(8, 2))


def test_squeeze_index_rule():
    s = np.arange(1, 9, dtype=float)[:, None].repeat(2, 1)
    np.testing.assert_array_equal(P.squeeze_level(s, 1)[:, 0], [1, 3, 5, 7])
    np.testing.assert_array_equal(P.squeeze_level(s, 2)[:, 0], [1, 5])
    np.testing.assert_array_equal(P.squeeze_level(s, 0), s)
    with pytest.raises(EmptySequence):
        P.squeeze_level(np.zeros((0, 2)), 1)


def test_dilate_examples():
    s = seq8()
    d = P.dilate_level(s, 2)
    assert d.shape == (15, 2)
    np.testing.assert_allclose(d[::2], s, atol=1e-9)
    np.testing.assert_array_equal(P.dilate_level(s, 1), s)
    line = np.stack([np.arange(8.0) * 0.7 + 1, -0.3 * np.arange(8.0)], 1)
    d = P.dilate_level(line, 2)
    np.testing.assert_allclose(d[1::2], 0.5 * (line[:-1] + line[1:]), atol=1e-12)
    with pytest.raises(InsufficientKnots):
        P.dilate_level(np.zeros((1, 2)), 2)


def test_dilate_batched_matches_single():
    rng = np.random.default_rng(2)
    batch = rng.normal(size=(4, 8, 2))
    out = P.dilate_level(batch, 4)
    for i in range(4):
        np.testing.assert_allclose(out[i], P.dilate_level(batch[i], 4), atol=1e-14)


def test_default_lengths_and_weights():
    assert DEFAULT.obs_lengths == [2, 4, 8, 15, 29]
    assert DEFAULT.target_lengths == [3, 6, 12, 23, 45]
    assert DEFAULT.scale_weights() == [12 / 3, 12 / 6, 1.0, 12 / 23, 12 / 45]
    pyr = P.build_pyramid(seq8(), DEFAULT)
    assert pyr.lengths == [2, 4, 8, 15, 29]
    np.testing.assert_array_equal(pyr[2], seq8())
    tgt = P.build_pyramid(np.zeros((12, 2)), DEFAULT, length=12)
    assert tgt.lengths == [3, 6, 12, 23, 45]


def test_single_scale_is_identity():
    cfg = P.PyramidConfig(1, 1)
    pyr = P.build_pyramid(seq8(), cfg)
    assert len(pyr) == 1
    np.testing.assert_array_equal(pyr[0], seq8())


def test_config_errors():
    with pytest.raises(ConfigError):
        P.PyramidConfig(L=3, k=4)
    with pytest.raises(ConfigError):
        P.PyramidConfig(L=5, k=4, t_o=8)  # ceil(8/8) = 1 point at the top
    with pytest.raises(ShapeError):
        P.build_pyramid(np.zeros((7, 2)), DEFAULT)


def feasible(n, k):
    return k == 1 or math.ceil(n / 2 ** (k - 1)) >= 2


@settings(max_examples=80, deadline=None)
@given(t_o=st.integers(4, 32), t_p=st.integers(4, 32), L=st.integers(1, 6), data=st.data())
def test_length_law_property(t_o, t_p, L, data):
    ks = [k for k in range(1, L + 1) if feasible(t_o, k) and feasible(t_p, k)]
    k = data.draw(st.sampled_from(ks))
    cfg = P.PyramidConfig(L, k, t_o, t_p)
    rng = np.random.default_rng(t_o * 100 + t_p)
    for n in (t_o, t_p):
        pyr = P.build_pyramid(rng.normal(size=(n, 2)), cfg, length=n)
        expect = [
            math.ceil(n / 2 ** (k - ell)) if ell < k else n if ell == k else 2 ** (ell - k) * (n - 1) + 1
            for ell in range(1, L + 1)
        ]
        assert pyr.lengths == expect


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 30), seed=st.integers(0, 2**31), c_exp=st.integers(1, 3))
def test_dilation_consistency_and_squeeze_inverse(n, seed, c_exp):
    s = np.random.default_rng(seed).normal(scale=5, size=(n, 2))
    c = 2**c_exp
    d = P.dilate_level(s, c)
    np.testing.assert_allclose(d[::c], s, atol=1e-9)
    np.testing.assert_array_equal(P.squeeze_level(P.dilate_level(s, 2), 1), s)
    np.testing.assert_array_equal(P.squeeze_level(d, c_exp), s)


def test_resample_examples():
    np.testing.assert_array_equal(P.resample_to_length(np.array([[2.0, 2.0]]), 2), [[2, 2], [2, 2]])
    s = seq8()
    np.testing.assert_array_equal(P.resample_to_length(s, 8), s)
    np.testing.assert_allclose(P.resample_to_length(np.array([[0.0, 0], [4, 4]]), 3), [[0, 0], [2, 2], [4, 4]])
    with pytest.raises(InvalidLength):
        P.resample_to_length(s, 0)


@settings(max_examples=40, deadline=None)
@given(src=st.integers(1, 40), dst=st.integers(1, 40))
def test_resample_matrix_rows_sum_to_one(src, dst):
    R = P.resample_matrix(src, dst)
    assert R.shape == (dst, src)
    np.testing.assert_allclose(R.sum(1), 1.0, atol=1e-15)
    if src >= 2 and dst >= 2:
        assert R[0, 0] == 1.0 and R[-1, -1] == 1.0


def test_fuse_examples():
    out = P.coarse_to_fine_fuse([np.array([[2.0, 2.0]]), np.array([[0.0, 0.0], [4.0, 4.0]])])
    np.testing.assert_allclose(out[1], [[1, 1], [3, 3]])
    v = np.array([1.5, -2.0])
    consts = [np.tile(v, (m, 1)) for m in DEFAULT.target_lengths]
    for o in P.coarse_to_fine_fuse(consts):
        np.testing.assert_allclose(o, np.tile(v, (len(o), 1)), atol=1e-14)
    s = [seq8()]
    np.testing.assert_array_equal(P.coarse_to_fine_fuse(s)[0], s[0])
    with pytest.raises(ShapeError):
        P.coarse_to_fine_fuse([np.zeros((3, 2)), np.zeros((5, 2))], expected_lengths=[3, 6])


def test_fuse_conserves_lines():
    lens = DEFAULT.target_lengths
    p0, v = np.array([3.0, -1.0]), np.array([0.4, 0.25])
    lines = [p0 + np.linspace(0, 1, m)[:, None] * 11 * v for m in lens]
    for o, ref in zip(P.coarse_to_fine_fuse(lines), lines):
        np.testing.assert_allclose(o, ref, atol=1e-9)


def test_fuse_matches_reference_oracle():
    rng = np.random.default_rng(9)
    lens = DEFAULT.target_lengths
    scales = [rng.normal(size=(m, 2)) for m in lens]

    def interp(a, m):
        # independent oracle: np.interp per coordinate on [0, 1]
        src = np.linspace(0, 1, len(a)) if len(a) > 1 else np.zeros(1)
        return np.stack([np.interp(np.linspace(0, 1, m), src, a[:, j]) for j in range(2)], 1)

    ref = [scales[0]]
    for ell in range(1, len(lens)):
        ref.append(0.5 * (scales[ell] + interp(ref[-1], lens[ell])))
    for o, r in zip(P.coarse_to_fine_fuse(scales, lens), ref):
        np.testing.assert_allclose(o, r, atol=1e-12)
