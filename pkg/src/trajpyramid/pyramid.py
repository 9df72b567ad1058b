"""Temporal pyramid construction, resampling and coarse-to-fine fusion.

Sequences are arrays whose second-to-last axis is time and whose last axis is
the coordinate, i.e. ``(..., n, 2)``; leading axes (pedestrians) are carried
through every operation.  Scale indices are 1-based, scale 1 is the coarsest.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, EmptySequence, InsufficientKnots, InvalidLength, ShapeError
from .spline import fit_arrays, eval_spline

# Instrumentation for tests and the ablation harness (which checks that the
# single-scale variant never squeezes or dilates).
CALLS: Counter = Counter()


@dataclass(frozen=True)
class PyramidConfig:
    L: int = 5
    k: int = 3
    t_o: int = 8
    t_p: int = 12

    def __post_init__(self):
        if self.L < 1 or not 1 <= self.k <= self.L:
            raise ConfigError(f"need 1 <= k <= L, got L={self.L}, k={self.k}")
        if self.t_o < 1 or self.t_p < 1:
            raise ConfigError("t_o and t_p must be positive")
        for n in (self.t_o, self.t_p):
            if self.k > 1 and math.ceil(n / 2 ** (self.k - 1)) < 2:
                raise ConfigError(f"squeeze depth {self.k - 1} infeasible for a length-{n} sequence")
            if self.L > self.k and n < 2:
                raise ConfigError("dilation needs at least 2 points")

    def lengths(self, n: int) -> list[int]:
        return scale_lengths(n, self.L, self.k)

    @property
    def obs_lengths(self) -> list[int]:
        return self.lengths(self.t_o)

    @property
    def target_lengths(self) -> list[int]:
        return self.lengths(self.t_p)

    def scale_weights(self) -> list[float]:
        """Multi-supervision weights ``t_p / m'_l``."""
        return [self.t_p / m for m in self.target_lengths]


@dataclass(frozen=True)
class Pyramid:
    scales: tuple[np.ndarray, ...]

    @property
    def lengths(self) -> list[int]:
        return [s.shape[-2] for s in self.scales]

    def __len__(self) -> int:
        return len(self.scales)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.scales[i]


def scale_lengths(n: int, L: int, k: int) -> list[int]:
    out = []
    for ell in range(1, L + 1):
        if ell < k:
            out.append(math.ceil(n / 2 ** (k - ell)))
        elif ell == k:
            out.append(n)
        else:
            out.append(2 ** (ell - k) * (n - 1) + 1)
    return out


def squeeze_level(seq: np.ndarray, depth: int) -> np.ndarray:
    """Keep every ``2**depth``-th point starting from the first."""
    CALLS["squeeze"] += 1
    seq = np.asarray(seq, dtype=float)
    if seq.ndim < 2 or seq.shape[-2] == 0:
        raise EmptySequence("cannot squeeze an empty sequence")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return seq[..., :: 2**depth, :].copy()


def dilate_level(seq: np.ndarray, c: int) -> np.ndarray:
    """Spline-interpolate onto the grid ``1, 1 + 1/c, ..., n`` (length ``c(n-1)+1``)."""
    CALLS["dilate"] += 1
    seq = np.asarray(seq, dtype=float)
    n = seq.shape[-2]
    if n < 2:
        raise InsufficientKnots(f"dilation needs at least 2 points, got {n}")
    if c < 1:
        raise ValueError("dilation factor must be >= 1")
    if c == 1:
        return seq.copy()
    # fit all pedestrians and coordinates in one solve: columns are independent
    cols = np.moveaxis(seq, -2, 0).reshape(n, -1)
    spline = fit_arrays(np.arange(1, n + 1, dtype=float), cols)
    grid = 1.0 + np.arange(c * (n - 1) + 1) / c
    dense = eval_spline(spline, grid)
    out = dense.reshape((len(grid),) + seq.shape[:-2] + seq.shape[-1:])
    return np.moveaxis(out, 0, -2)


def build_pyramid(seq: np.ndarray, cfg: PyramidConfig, length: int | None = None) -> Pyramid:
    """Build all L scales of ``seq``; ``length`` defaults to ``cfg.t_o``."""
    seq = np.asarray(seq, dtype=float)
    n = cfg.t_o if length is None else length
    if seq.shape[-2] != n:
        raise ShapeError(f"expected a length-{n} sequence, got {seq.shape[-2]}")
    if cfg.k > 1 and math.ceil(n / 2 ** (cfg.k - 1)) < 2:
        raise ConfigError(f"squeeze depth {cfg.k - 1} infeasible for length {n}")
    scales = []
    for ell in range(1, cfg.L + 1):
        if ell < cfg.k:
            scales.append(squeeze_level(seq, cfg.k - ell))
        elif ell == cfg.k:
            scales.append(seq.copy())
        else:
            scales.append(dilate_level(seq, 2 ** (ell - cfg.k)))
    return Pyramid(tuple(scales))


@lru_cache(maxsize=None)
def _resample_matrix(src_len: int, dst_len: int) -> np.ndarray:
    if src_len == 1:
        return np.ones((dst_len, 1))
    dst = np.linspace(0.0, 1.0, dst_len) if dst_len > 1 else np.zeros(1)
    pos = dst * (src_len - 1)
    lo = np.minimum(np.floor(pos).astype(int), src_len - 2)
    w = pos - lo
    R = np.zeros((dst_len, src_len))
    R[np.arange(dst_len), lo] += 1.0 - w
    R[np.arange(dst_len), lo + 1] += w
    R.setflags(write=False)
    return R


def resample_matrix(src_len: int, dst_len: int) -> np.ndarray:
    """Linear-interpolation operator mapping a length-``src_len`` sequence to ``dst_len``.

    Rows sum to one, so affine structure (and translations) are preserved.
    """
    if dst_len < 1:
        raise InvalidLength("target length must be >= 1")
    if src_len < 1:
        raise EmptySequence("cannot resample an empty sequence")
    return _resample_matrix(src_len, dst_len)


def resample_to_length(seq: np.ndarray, target_len: int) -> np.ndarray:
    seq = np.asarray(seq, dtype=float)
    n = seq.shape[-2]
    if n == target_len:
        return seq.copy()
    return resample_matrix(n, target_len) @ seq


def coarse_to_fine_fuse(pred_scales, expected_lengths=None) -> list[np.ndarray]:
    """Top-down fusion: scale l becomes the mean of itself and the upsampled
    (already fused) scale l-1.  Scale 1 is returned unchanged."""
    scales = [np.asarray(s, dtype=float) for s in pred_scales]
    if expected_lengths is not None:
        if [s.shape[-2] for s in scales] != list(expected_lengths):
            raise ShapeError(f"scale lengths {[s.shape[-2] for s in scales]} != {list(expected_lengths)}")
    out = [scales[0].copy()] if scales else []
    for ell in range(1, len(scales)):
        up = resample_to_length(out[ell - 1], scales[ell].shape[-2])
        if up.shape != scales[ell].shape:
            raise ShapeError("scales disagree in leading or coordinate dimensions")
        out.append(0.5 * (scales[ell] + up))
    return out
