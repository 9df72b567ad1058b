"""Alternating adversarial training with checkpoint/resume support."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import diffcore as dc
from .data import Scene
from .diffcore import checkpoint as ckpt
from .errors import CheckpointError, EmptyScene, NumericError
from .model import (
    Discriminator,
    Generator,
    ModelConfig,
    build_models,
    discriminator_loss,
    final_loss,
    generator_adv_loss,
    make_batch,
    multi_supervision_loss,
    prepare_scene,
)

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("L_adv_G", "L_adv_D", "L_s", "L_f")


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 400
    batch_size: int = 64
    lr_g: float = 1e-4
    lr_d: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    ms_weight: float = 1.0  # 0 turns off multi-supervision
    adv_mode: str = "non_saturating"  # or "minimax"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    L_adv_G: float
    L_adv_D: float
    L_s: float
    L_f: float

    def csv_row(self) -> str:
        return ",".join([str(self.epoch)] + [repr(getattr(self, c)) for c in LOSS_COLUMNS])


def format_loss_log(stats: Sequence[EpochStats]) -> str:
    return "epoch," + ",".join(LOSS_COLUMNS) + "\n" + "".join(s.csv_row() + "\n" for s in stats)


def parse_loss_log(text: str) -> list[EpochStats]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return [EpochStats(int(p[0]), *map(float, p[1:])) for p in (ln.split(",") for ln in lines[1:])]


class Trainer:
    """Owns the two networks, their optimizers and the training RNG stream.

    Per batch: one discriminator step on fresh noise, then one generator step
    on ``L_adv + ms_weight * L_s + L_f`` with new noise.
    """

    def __init__(
        self,
        cfg: ModelConfig,
        scenes: Sequence[Scene],
        schedule: TrainSchedule = TrainSchedule(),
        seed: int = 0,
    ):
        if not scenes:
            raise EmptyScene("training set is empty")
        self.cfg = cfg
        self.schedule = schedule
        self.seed = seed
        self.gen, self.disc = build_models(cfg, seed)
        self.rng = np.random.default_rng([seed, 1])
        self.opt_g = dc.Adam(self.gen.parameters(), schedule.lr_g, (schedule.beta1, schedule.beta2), weight_decay=schedule.weight_decay)
        self.opt_d = dc.Adam(self.disc.parameters(), schedule.lr_d, (schedule.beta1, schedule.beta2), weight_decay=schedule.weight_decay)
        self.epoch = 0
        self.history: list[EpochStats] = []
        self.prepared = [prepare_scene(s.obs, cfg.pyramid, s.fut) for s in scenes]
        self.last_good: tuple[dict, dict] | None = None

    # single steps --------------------------------------------------------------
    def train_batch(self, indices: Sequence[int]) -> dict[str, float]:
        pc = self.cfg.pyramid
        batch = make_batch([self.prepared[i] for i in indices], pc)
        real = np.concatenate([batch.obs_rel, batch.fut_rel], axis=1)

        z = self.gen.sample_noise(self.rng, batch.n_scenes, batch.n_peds)
        with dc.no_grad():
            fake = np.concatenate([batch.obs_rel, self.gen(batch, z).y_rel.data], axis=1)
        scores = self.disc(np.concatenate([real, fake]))
        B = batch.n_peds
        loss_d = discriminator_loss(scores[:B], scores[B:])
        self.opt_d.step(dc.backward(loss_d, self.opt_d.params))

        z = self.gen.sample_noise(self.rng, batch.n_scenes, batch.n_peds)
        out = self.gen(batch, z)
        adv = generator_adv_loss(self.disc(dc.concat([batch.obs_rel, out.y_rel], axis=1)), self.schedule.adv_mode)
        ls = dc.scale(multi_supervision_loss(out.fused, batch.targets, pc.t_p), self.schedule.ms_weight)
        lf = final_loss(out.y_rel, batch.fut_rel)
        total = adv + ls + lf
        if not np.isfinite(total.item()):
            raise NumericError("non-finite generator objective")
        self.opt_g.step(dc.backward(total, self.opt_g.params))
        for p in self.opt_g.params + self.opt_d.params:
            if not np.all(np.isfinite(p.data)):
                raise NumericError(f"non-finite parameter {p.name}")
        return {"L_adv_G": adv.item(), "L_adv_D": loss_d.item(), "L_s": ls.item(), "L_f": lf.item()}

    def run_epoch(self) -> EpochStats:
        if self.last_good is None:
            self.last_good = self.state()
        n = len(self.prepared)
        order = self.rng.permutation(n)
        bs = self.schedule.batch_size
        sums = dict.fromkeys(LOSS_COLUMNS, 0.0)
        n_batches = 0
        try:
            for lo in range(0, n, bs):
                losses = self.train_batch(order[lo : lo + bs])
                for key in LOSS_COLUMNS:
                    sums[key] += losses[key]
                n_batches += 1
        except NumericError as e:
            good = self.last_good
            self.load_state(*good)
            raise NumericError(f"training aborted in epoch {self.epoch + 1}: {e}", last_good=good) from e
        self.epoch += 1
        stats = EpochStats(self.epoch, *(sums[k] / n_batches for k in LOSS_COLUMNS))
        self.history.append(stats)
        self.last_good = self.state()
        log.debug("epoch %d %s", self.epoch, stats)
        return stats

    def fit(self, epochs: int | None = None) -> Iterator[EpochStats]:
        """Yield stats after each epoch until ``epochs`` (default: schedule) are done."""
        target = self.schedule.epochs if epochs is None else epochs
        while self.epoch < target:
            yield self.run_epoch()

    # persistence -----------------------------------------------------------------
    def state(self) -> tuple[dict[str, np.ndarray], dict]:
        arrays: dict[str, np.ndarray] = {}
        for prefix, module in (("G/", self.gen), ("D/", self.disc)):
            for name, p in module.named_parameters():
                arrays[prefix + name] = p.data.copy()
        for prefix, opt, module in (("optG/", self.opt_g, self.gen), ("optD/", self.opt_d, self.disc)):
            names = [n for n, _ in module.named_parameters()]
            for name, m, v in zip(names, opt.m, opt.v):
                arrays[f"{prefix}m/{name}"] = m.copy()
                arrays[f"{prefix}v/{name}"] = v.copy()
        meta = {
            "kind": "generator",
            "model": self.cfg.to_dict(),
            "schedule": self.schedule.to_dict(),
            "seed": self.seed,
            "epoch": self.epoch,
            "rng_state": self.rng.bit_generator.state,
            "opt_steps": [self.opt_g.t, self.opt_d.t],
            "history": [asdict(s) for s in self.history],
        }
        return arrays, meta

    def load_state(self, arrays: dict[str, np.ndarray], meta: dict) -> None:
        try:
            for prefix, module in (("G/", self.gen), ("D/", self.disc)):
                for name, p in module.named_parameters():
                    src = arrays[prefix + name]
                    if src.shape != p.shape:
                        raise CheckpointError(f"shape mismatch for {prefix + name}")
                    p.data[...] = src
            for prefix, opt, module, t in (
                ("optG/", self.opt_g, self.gen, meta["opt_steps"][0]),
                ("optD/", self.opt_d, self.disc, meta["opt_steps"][1]),
            ):
                names = [n for n, _ in module.named_parameters()]
                opt.load_state([arrays[f"{prefix}m/{n}"] for n in names], [arrays[f"{prefix}v/{n}"] for n in names], t)
        except KeyError as e:
            raise CheckpointError(f"checkpoint lacks block {e}") from e
        self.rng.bit_generator.state = meta["rng_state"]
        self.epoch = int(meta["epoch"])
        self.history = [EpochStats(**s) for s in meta.get("history", [])]

    def save(self, path) -> None:
        ckpt.save(path, *self.state())

    @classmethod
    def resume(cls, path, scenes: Sequence[Scene]) -> "Trainer":
        arrays, meta = ckpt.load(path)
        if meta.get("kind") != "generator":
            raise CheckpointError("checkpoint does not hold a trainable model")
        trainer = cls(ModelConfig.from_dict(meta["model"]), scenes, TrainSchedule(**meta["schedule"]), meta["seed"])
        trainer.load_state(arrays, meta)
        return trainer


def train(
    cfg: ModelConfig,
    scenes: Sequence[Scene],
    schedule: TrainSchedule = TrainSchedule(),
    seed: int = 0,
    checkpoint_dir=None,
) -> Iterator[tuple[EpochStats, Trainer]]:
    """Run the schedule, yielding after every epoch; writes ``epoch_XXXX.ckpt``
    and ``last.ckpt`` into ``checkpoint_dir`` when given."""
    trainer = Trainer(cfg, scenes, schedule, seed)
    out = Path(checkpoint_dir) if checkpoint_dir is not None else None
    for stats in trainer.fit():
        if out is not None:
            trainer.save(out / f"epoch_{stats.epoch:04d}.ckpt")
            trainer.save(out / "last.ckpt")
        yield stats, trainer


def load_generator(path) -> Generator:
    arrays, meta = ckpt.load(path)
    if meta.get("kind") != "generator":
        raise CheckpointError(f"checkpoint kind {meta.get('kind')!r} is not a generator")
    cfg = ModelConfig.from_dict(meta["model"])
    gen = Generator(cfg, np.random.default_rng(0))
    for name, p in gen.named_parameters():
        key = "G/" + name
        if key not in arrays or arrays[key].shape != p.shape:
            raise CheckpointError(f"checkpoint block {key} missing or mis-shaped")
        p.data[...] = arrays[key]
    return gen
