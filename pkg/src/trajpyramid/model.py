"""Pyramid generator, trajectory discriminator and loss terms.

Everything the networks see is translation free: each pedestrian's positions
are taken relative to its last observed point (the origin), the recurrent
cells consume per-step displacements, and absolute coordinates are restored
by adding the origin back at the very end.

For speed all L scales of all pedestrians in a batch are stacked into one set
of ``L * B`` rows (scale-major).  Scale lengths never decrease with the scale
index, so the rows still running at any step form a suffix of the row blocks:
the encoder right-aligns the sequences and prepends fresh zero states as each
shorter scale begins, and the decoder drops a block's rows once that scale
has produced its ``m'_l`` points.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import diffcore as dc
from .data import Scene, to_displacements
from .diffcore import Tensor
from .errors import EmptyScene, InvalidLength, ShapeError
from .pyramid import PyramidConfig, build_pyramid, resample_matrix

PROB_FLOOR = 1e-12
SAMPLE_CHUNK = 20  # futures per forward pass when sampling


@dataclass(frozen=True)
class ModelConfig:
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    embed: int = 16
    hidden: int = 32
    noise: int = 8
    pool: int = 32
    pool_hidden: int = 64
    d_hidden: int = 32
    noise_scope: str = "scene"  # or "pedestrian"

    def __post_init__(self):
        for name in ("embed", "hidden", "noise", "pool", "pool_hidden", "d_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.noise_scope not in ("scene", "pedestrian"):
            raise ValueError("noise_scope must be 'scene' or 'pedestrian'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["pyramid"] = PyramidConfig(**d["pyramid"])
        return cls(**d)


# batch preparation ----------------------------------------------------------------

@dataclass
class PreparedScene:
    origin: np.ndarray  # (N, 2)
    obs_rel: np.ndarray  # (N, t_o, 2)
    scales: list[np.ndarray]  # per scale (N, m_l, 2), relative
    fut_rel: np.ndarray | None = None  # (N, t_p, 2)
    targets: list[np.ndarray] | None = None  # per scale (N, m'_l, 2), relative

    @property
    def n(self) -> int:
        return self.origin.shape[0]


def prepare_scene(obs, cfg: PyramidConfig, fut=None) -> PreparedScene:
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 3 or obs.shape[0] == 0:
        raise EmptyScene("a scene needs at least one pedestrian")
    if obs.shape[1:] != (cfg.t_o, 2):
        raise ShapeError(f"observations must be (N, {cfg.t_o}, 2), got {obs.shape}")
    origin = obs[:, -1, :].copy()
    obs_rel = obs - origin[:, None, :]
    scales = list(build_pyramid(obs_rel, cfg).scales)
    prep = PreparedScene(origin, obs_rel, scales)
    if fut is not None:
        fut = np.asarray(fut, dtype=float)
        if fut.shape != (obs.shape[0], cfg.t_p, 2):
            raise ShapeError(f"futures must be (N, {cfg.t_p}, 2), got {fut.shape}")
        prep.fut_rel = fut - origin[:, None, :]
        prep.targets = list(build_pyramid(prep.fut_rel, cfg, length=cfg.t_p).scales)
    return prep


@dataclass
class Batch:
    n_scenes: int
    n_peds: int
    scene_of_ped: np.ndarray  # (B,)
    origin: np.ndarray  # (B, 2)
    obs_rel: np.ndarray  # (B, t_o, 2)
    enc_in: np.ndarray  # (L*B, T_enc, 2) right-aligned displacements, zero padded
    start: np.ndarray  # (L*B, 2) last observed point of each scale
    last_disp: np.ndarray  # (L*B, 2)
    pair_seg: np.ndarray  # pooling: row receiving the message
    pair_src: np.ndarray  # pooling: row sending it
    fut_rel: np.ndarray | None = None
    targets: list[np.ndarray] | None = None


def make_batch(prepared: Sequence[PreparedScene], cfg: PyramidConfig) -> Batch:
    if not prepared:
        raise EmptyScene("empty batch")
    L = cfg.L
    counts = [p.n for p in prepared]
    B = sum(counts)
    scene_of_ped = np.repeat(np.arange(len(prepared)), counts)
    lengths = cfg.obs_lengths
    T_enc = max(lengths)
    enc_in = np.zeros((L * B, T_enc, 2))
    start = np.empty((L * B, 2))
    last_disp = np.empty((L * B, 2))
    for ell in range(L):
        seq = np.concatenate([p.scales[ell] for p in prepared], axis=0)
        disp = to_displacements(seq)
        m = lengths[ell]
        rows = slice(ell * B, (ell + 1) * B)
        enc_in[rows, T_enc - m :] = disp
        start[rows] = seq[:, -1]
        last_disp[rows] = disp[:, -1]
    seg, src = [], []
    offset = 0
    for n in counts:
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        seg.append(offset + ii.ravel())
        src.append(offset + jj.ravel())
        offset += n
    seg1, src1 = np.concatenate(seg), np.concatenate(src)
    pair_seg = np.concatenate([seg1 + ell * B for ell in range(L)])
    pair_src = np.concatenate([src1 + ell * B for ell in range(L)])
    batch = Batch(
        len(prepared), B, scene_of_ped,
        np.concatenate([p.origin for p in prepared]),
        np.concatenate([p.obs_rel for p in prepared]),
        enc_in, start, last_disp, pair_seg, pair_src,
    )
    if all(p.targets is not None for p in prepared):
        batch.fut_rel = np.concatenate([p.fut_rel for p in prepared])
        batch.targets = [np.concatenate([p.targets[ell] for p in prepared]) for ell in range(L)]
    return batch


# networks ----------------------------------------------------------------------------

@dataclass
class GeneratorOutput:
    scales: list[Tensor]  # decoded per-scale positions before fusion, relative
    fused: list[Tensor]  # after coarse-to-fine fusion, relative
    y_rel: Tensor  # (B, t_p, 2) relative to the origin
    origin: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.y_rel.data + self.origin[:, None, :]


class Generator(dc.Module):
    _children = (
        "enc_embed", "enc_lstm", "pool_embed", "pool_mlp", "dec_init",
        "dec_embed", "dec_lstm", "dec_out", "fusion",
    )

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        E, H, P = cfg.embed, cfg.hidden, cfg.pool
        self.enc_embed = dc.Linear(2, E, rng)
        self.enc_lstm = dc.LSTMCell(E, H, rng)
        self.pool_embed = dc.Linear(2, E, rng)
        self.pool_mlp = dc.MLP([E + H, cfg.pool_hidden, P], rng, ["relu", "relu"])
        self.dec_init = dc.Linear(H + P + cfg.noise, H, rng)
        self.dec_embed = dc.Linear(2, E, rng)
        self.dec_lstm = dc.LSTMCell(E, H, rng)
        self.dec_out = dc.Linear(H, 2, rng)
        self.fusion = dc.ChannelMix(cfg.pyramid.L, rng)

    # stages --------------------------------------------------------------
    def encode(self, batch: Batch) -> Tensor:
        """Final hidden state per (scale, pedestrian) row: ``(L*B, H)``."""
        H = self.cfg.hidden
        B = batch.n_peds
        lengths = self.cfg.pyramid.obs_lengths
        T_enc = batch.enc_in.shape[1]
        emb = self.enc_embed(batch.enc_in)
        hc = None
        first = len(lengths) * B  # first active row
        for t in range(T_enc):
            joining = sum(1 for m in lengths if T_enc - m == t)
            if joining:
                first -= joining * B
                fresh = np.zeros((joining * B, 2 * H))
                hc = dc.as_tensor(fresh) if hc is None else dc.concat([fresh, hc], axis=0)
            hc = self.enc_lstm.step(emb[first:, t, :], hc)
        return hc[:, :H]

    def pool_social(self, batch: Batch, h: Tensor) -> Tensor:
        """Max over the scene's pedestrians (self included) of an MLP applied
        to [embedded relative end position, that pedestrian's hidden state]."""
        rel = batch.start[batch.pair_src] - batch.start[batch.pair_seg]
        feats = dc.concat([self.pool_embed(rel), dc.take(h, batch.pair_src)], axis=1)
        return dc.segment_max(self.pool_mlp(feats), batch.pair_seg, h.shape[0])

    def noise_rows(self, batch: Batch, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        expect = batch.n_scenes if self.cfg.noise_scope == "scene" else batch.n_peds
        if z.shape != (expect, self.cfg.noise):
            raise ShapeError(f"noise must be ({expect}, {self.cfg.noise}), got {z.shape}")
        per_ped = z[batch.scene_of_ped] if self.cfg.noise_scope == "scene" else z
        return np.tile(per_ped, (self.cfg.pyramid.L, 1))

    def decode_scale(self, h: Tensor, pool: Tensor, z_rows, start, prev_disp, steps: int) -> Tensor:
        """Decode ``steps`` points for every row; returns origin-relative
        positions ``(rows, steps, 2)``."""
        return self.decode_blocks(h, pool, z_rows, start, prev_disp, [steps])[0]

    def decode_blocks(self, h: Tensor, pool: Tensor, z_rows, start, prev_disp, steps: Sequence[int]) -> list[Tensor]:
        """Decode equal-sized row blocks where block ``b`` needs ``steps[b]``
        points; ``steps`` must be non-decreasing.  Returns one
        ``(rows_b, steps[b], 2)`` position tensor per block."""
        if min(steps) < 1:
            raise InvalidLength("decoder needs at least one step")
        if list(steps) != sorted(steps):
            raise ValueError("block step counts must be non-decreasing")
        H = self.cfg.hidden
        nb = len(steps)
        B = h.shape[0] // nb
        h0 = self.dec_init(dc.concat([h, pool, dc.as_tensor(z_rows)], axis=1))
        hc = dc.concat([h0, np.zeros(h0.shape)], axis=1)
        prev = dc.as_tensor(prev_disp)
        first_block = 0
        segments: list[tuple[int, Tensor]] = []  # (first block, (rows, seg_len, 2))
        outs: list[Tensor] = []
        for t in range(max(steps)):
            done = sum(1 for s_ in steps if s_ <= t)
            if done != first_block:
                segments.append((first_block, dc.stack(outs, axis=1)))
                outs = []
                drop = (done - first_block) * B
                hc, prev = hc[drop:], prev[drop:]
                first_block = done
            hc = self.dec_lstm.step(self.dec_embed(prev), hc)
            prev = self.dec_out(hc[:, :H])
            outs.append(prev)
        segments.append((first_block, dc.stack(outs, axis=1)))
        start = np.asarray(start)
        result = []
        for b in range(nb):
            pieces = [seg[(b - fb) * B : (b - fb + 1) * B] for fb, seg in segments if fb <= b]
            disp = pieces[0] if len(pieces) == 1 else dc.concat(pieces, axis=1)
            result.append(dc.cumsum(disp, axis=1) + start[b * B : (b + 1) * B, None, :])
        return result

    def fuse(self, scales: list[Tensor]) -> list[Tensor]:
        out = [scales[0]]
        for ell in range(1, len(scales)):
            R = resample_matrix(out[-1].shape[1], scales[ell].shape[1])
            out.append(dc.scale(scales[ell] + dc.matmul(R, out[-1]), 0.5))
        return out

    def fusion_head(self, fused: list[Tensor]) -> Tensor:
        t_p = self.cfg.pyramid.t_p
        planes = [dc.matmul(resample_matrix(f.shape[1], t_p), f) for f in fused]
        x = dc.stack(planes, axis=-1)  # (B, t_p, 2, L)
        y = self.fusion(x)
        return dc.reshape(y, y.shape[:3])

    def forward(self, batch: Batch, z) -> GeneratorOutput:
        pc = self.cfg.pyramid
        h = self.encode(batch)
        pool = self.pool_social(batch, h)
        scales = self.decode_blocks(h, pool, self.noise_rows(batch, z), batch.start, batch.last_disp, pc.target_lengths)
        fused = self.fuse(scales)
        return GeneratorOutput(scales, fused, self.fusion_head(fused), batch.origin)

    __call__ = forward

    # convenience -------------------------------------------------------------
    def sample_noise(self, rng: np.random.Generator, n_scenes: int, n_peds: int) -> np.ndarray:
        rows = n_scenes if self.cfg.noise_scope == "scene" else n_peds
        return rng.standard_normal((rows, self.cfg.noise))

    def generate(self, obs, z) -> tuple[list[np.ndarray], np.ndarray]:
        """One scene: returns (fused per-scale predictions, final trajectories),
        both in absolute coordinates."""
        batch = make_batch([prepare_scene(obs, self.cfg.pyramid)], self.cfg.pyramid)
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[None, :]
        with dc.no_grad():
            out = self.forward(batch, z)
        o = batch.origin[:, None, :]
        return [f.data + o for f in out.fused], out.y

    def sample(self, obs, k: int, rng: np.random.Generator) -> np.ndarray:
        """``k`` futures for one scene, shape ``(k, N, t_p, 2)``.

        Samples run in fixed chunks of ``SAMPLE_CHUNK`` (the last one padded
        with extra draws) and noise is drawn chunk by chunk, so sample ``j`` is
        bitwise the same for every ``k > j``.  Equal matrix shapes matter here:
        BLAS may round a row differently when the row count changes.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        prep = prepare_scene(obs, self.cfg.pyramid)
        batch = make_batch([prep] * SAMPLE_CHUNK, self.cfg.pyramid)
        chunks = []
        for _ in range(-(-k // SAMPLE_CHUNK)):
            z = self.sample_noise(rng, SAMPLE_CHUNK, batch.n_peds)
            with dc.no_grad():
                chunks.append(self.forward(batch, z).y)
        y = np.concatenate(chunks)[: k * prep.n]
        return y.reshape(k, prep.n, self.cfg.pyramid.t_p, 2)


class Discriminator(dc.Module):
    _children = ("embed", "lstm", "mlp")

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.embed = dc.Linear(2, cfg.embed, rng)
        self.lstm = dc.LSTMCell(cfg.embed, cfg.d_hidden, rng)
        self.mlp = dc.MLP([cfg.d_hidden, cfg.d_hidden, 1], rng, ["relu", "linear"])

    def __call__(self, traj) -> Tensor:
        """Scores in (0, 1) for trajectories ``(B, t_o + t_p, 2)``."""
        traj = dc.as_tensor(traj)
        n_total = self.cfg.pyramid.t_o + self.cfg.pyramid.t_p
        if traj.ndim != 3 or traj.shape[1:] != (n_total, 2):
            raise ShapeError(f"discriminator expects (B, {n_total}, 2), got {traj.shape}")
        disp = dc.concat([np.zeros((traj.shape[0], 1, 2)), traj[:, 1:, :] - traj[:, :-1, :]], axis=1)
        emb = self.embed(disp)
        hc = self.lstm.zero_state(traj.shape[0])
        for t in range(n_total):
            hc = self.lstm.step(emb[:, t, :], hc)
        logit = self.mlp(hc[:, : self.cfg.d_hidden])
        return dc.sigmoid(dc.reshape(logit, (traj.shape[0],)))

    def discriminate(self, observed, future) -> np.ndarray:
        observed = np.asarray(observed, dtype=float)
        future = np.asarray(future, dtype=float)
        pc = self.cfg.pyramid
        if observed.shape[-2] != pc.t_o or future.shape[-2] != pc.t_p:
            raise ShapeError(f"need {pc.t_o} observed and {pc.t_p} future steps")
        traj = np.concatenate([observed, future], axis=-2)
        single = traj.ndim == 2
        if single:
            traj = traj[None]
        traj = traj - traj[:, pc.t_o - 1 : pc.t_o, :]
        with dc.no_grad():
            s = self(traj).data
        return s[0] if single else s


def build_models(cfg: ModelConfig, seed: int) -> tuple[Generator, Discriminator]:
    rng = np.random.default_rng([seed, 0])
    return Generator(cfg, rng), Discriminator(cfg, rng)


# losses -----------------------------------------------------------------------------------

def multi_supervision_loss(fused: Sequence, targets: Sequence, t_p: int) -> Tensor:
    """``1/(N L) * sum_i sum_l (t_p / m'_l) * ||pred_l - target_l||^2``."""
    if len(fused) != len(targets) or not fused:
        raise ShapeError("prediction and target pyramids have different depths")
    total = None
    for pred, tgt in zip(fused, targets):
        pred, tgt = dc.as_tensor(pred), np.asarray(tgt, dtype=float)
        if pred.shape != tgt.shape:
            raise ShapeError(f"scale shapes differ: {pred.shape} vs {tgt.shape}")
        term = dc.scale(dc.sum_sq(pred - tgt), t_p / pred.shape[1])
        total = term if total is None else total + term
    return dc.scale(total, 1.0 / (dc.as_tensor(fused[0]).shape[0] * len(fused)))


def final_loss(y, target) -> Tensor:
    """``1/N * sum_i ||Y_hat_i - Y_i||^2``."""
    y, target = dc.as_tensor(y), np.asarray(target, dtype=float)
    if y.shape != target.shape:
        raise ShapeError(f"prediction {y.shape} and target {target.shape} differ")
    return dc.scale(dc.sum_sq(y - target), 1.0 / y.shape[0])


def discriminator_loss(d_real, d_fake) -> Tensor:
    return dc.scale(
        dc.mean(dc.log(d_real, floor=PROB_FLOOR)) + dc.mean(dc.log(1.0 - dc.as_tensor(d_fake), floor=PROB_FLOOR)),
        -1.0,
    )


def generator_adv_loss(d_fake, mode: str = "non_saturating") -> Tensor:
    if mode == "non_saturating":
        return dc.scale(dc.mean(dc.log(d_fake, floor=PROB_FLOOR)), -1.0)
    if mode == "minimax":
        return dc.mean(dc.log(1.0 - dc.as_tensor(d_fake), floor=PROB_FLOOR))
    raise ValueError(f"unknown adversarial mode {mode!r}")


def scale_weights(cfg: PyramidConfig) -> list[float]:
    return cfg.scale_weights()


def adversarial_losses(scene: Scene, g: Generator, d: Discriminator, z, mode: str = "non_saturating"):
    """(generator adversarial term, discriminator loss) for one scene and noise."""
    pc = g.cfg.pyramid
    batch = make_batch([prepare_scene(scene.obs, pc, scene.fut)], pc)
    out = g(batch, z)
    real = np.concatenate([batch.obs_rel, batch.fut_rel], axis=1)
    fake = dc.concat([batch.obs_rel, out.y_rel], axis=1)
    return generator_adv_loss(d(fake), mode), discriminator_loss(d(real), d(fake))
