"""Displacement metrics, best-of-K scoring, baselines and experiment harnesses."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import pyramid as pyr
from .data import Scene
from .diffcore import checkpoint as ckpt
from .errors import CheckpointError, InvalidK, ShapeError
from .model import Generator, ModelConfig
from .pyramid import PyramidConfig
from .training import Trainer, TrainSchedule, load_generator

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("dataset", "variant", "seed", "ade", "fde", "k", "scenes")
VARIANTS = ("single_scale", "pyramid_no_ms", "full")


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[-1] != 2:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} must both be (N, t_p, 2)")
    return pred, gt


def ade(pred, gt) -> float:
    """Mean Euclidean error over all pedestrians and predicted steps."""
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.linalg.norm(pred - gt, axis=-1)))


def fde(pred, gt) -> float:
    """Mean Euclidean error at the final predicted step."""
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.linalg.norm(pred[:, -1] - gt[:, -1], axis=-1)))


def best_of_k(samples: Sequence, gt) -> tuple[float, float]:
    """Minimum ADE and minimum FDE over the samples, minimised independently."""
    if len(samples) == 0:
        raise InvalidK("best-of-K needs at least one sample")
    ades = [ade(s, gt) for s in samples]
    fdes = [fde(s, gt) for s in samples]
    return min(ades), min(fdes)


# baselines -------------------------------------------------------------------------

def baseline_predict(kind: str, obs, t_p: int = 12) -> np.ndarray:
    """``linear``: per-coordinate least-squares line in time through the
    observed points, extrapolated.  ``constant_velocity``: last observed
    displacement repeated."""
    obs = np.asarray(obs, dtype=float)
    t_o = obs.shape[1]
    if kind == "constant_velocity":
        v = obs[:, -1] - obs[:, -2] if t_o > 1 else np.zeros_like(obs[:, -1])
        steps = np.arange(1, t_p + 1, dtype=float)
        return obs[:, -1][:, None, :] + steps[None, :, None] * v[:, None, :]
    if kind == "linear":
        t = np.arange(1, t_o + 1, dtype=float)
        A = np.stack([np.ones_like(t), t], axis=1)
        coef, *_ = np.linalg.lstsq(A, obs.transpose(1, 0, 2).reshape(t_o, -1), rcond=None)
        tf = np.arange(t_o + 1, t_o + t_p + 1, dtype=float)
        fut = np.stack([np.ones_like(tf), tf], axis=1) @ coef
        return fut.reshape(t_p, obs.shape[0], 2).transpose(1, 0, 2)
    raise ValueError(f"unknown baseline {kind!r}")


class Predictor(Protocol):
    def sample(self, obs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        """``k`` futures, shape ``(k, N, t_p, 2)``."""


class BaselinePredictor:
    def __init__(self, kind: str, t_p: int = 12):
        baseline_predict(kind, np.zeros((1, 2, 2)), 1)  # validates kind
        self.kind = kind
        self.t_p = t_p

    def sample(self, obs, k, rng):
        return np.repeat(baseline_predict(self.kind, obs, self.t_p)[None], k, axis=0)


class GeneratorPredictor:
    def __init__(self, gen: Generator):
        self.gen = gen

    def sample(self, obs, k, rng):
        return self.gen.sample(obs, k, rng)


def save_baseline_checkpoint(path, kind: str, pyramid: PyramidConfig = PyramidConfig()) -> None:
    BaselinePredictor(kind)
    ckpt.save(path, {}, {"kind": "baseline", "baseline": kind, "t_o": pyramid.t_o, "t_p": pyramid.t_p})


def load_predictor(path) -> tuple[Predictor, PyramidConfig]:
    """Predictor stored in a checkpoint file (trained generator or baseline)."""
    _, meta = ckpt.load(path)
    kind = meta.get("kind")
    if kind == "generator":
        gen = load_generator(path)
        return GeneratorPredictor(gen), gen.cfg.pyramid
    if kind == "baseline":
        pc = PyramidConfig(L=1, k=1, t_o=meta["t_o"], t_p=meta["t_p"])
        return BaselinePredictor(meta["baseline"], pc.t_p), pc
    raise CheckpointError(f"unknown checkpoint kind {kind!r}")


# benchmark ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    dataset: str
    ade: float
    fde: float
    k: int
    scenes: int
    variant: str = ""
    seed: int = 0

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in RESULT_COLUMNS}


def scene_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, order-free stream per evaluated scene."""
    return np.random.default_rng([seed, index])


def score_scenes(predictor: Predictor, scenes: Sequence[Scene], k: int, seed: int = 0, workers: int = 1):
    """Per-scene (min-ADE, min-FDE, N) triples."""
    if k < 1:
        raise InvalidK("k must be >= 1")

    def one(i: int):
        s = scenes[i]
        samples = predictor.sample(s.obs, k, scene_rng(seed, i))
        a, f = best_of_k(list(samples), s.fut)
        return a, f, s.n

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, range(len(scenes))))
    return [one(i) for i in range(len(scenes))]


def aggregate(per_scene: Iterable[tuple[float, float, int]]) -> tuple[float, float]:
    """Pedestrian-weighted mean of per-scene metrics."""
    per_scene = list(per_scene)
    n = sum(c for _, _, c in per_scene)
    if n == 0:
        return float("nan"), float("nan")
    return (sum(a * c for a, _, c in per_scene) / n, sum(f * c for _, f, c in per_scene) / n)


def run_benchmark(
    predictor: Predictor, scenes: Sequence[Scene], k: int = 20, seed: int = 0,
    dataset: str = "", workers: int = 1, variant: str = "",
) -> MetricsRow:
    a, f = aggregate(score_scenes(predictor, scenes, k, seed, workers))
    return MetricsRow(dataset, a, f, k, len(scenes), variant, seed)


def run_checkpoint_benchmark(path, scenes: Sequence[Scene], k: int = 20, seed: int = 0, dataset: str = "", workers: int = 1) -> MetricsRow:
    if not Path(path).is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    predictor, _ = load_predictor(path)
    return run_benchmark(predictor, scenes, k, seed, dataset, workers)


# ablation -----------------------------------------------------------------------------

def variant_setup(variant: str, cfg: ModelConfig, schedule: TrainSchedule) -> tuple[ModelConfig, TrainSchedule]:
    """Model/schedule for an ablation row: ``single_scale`` (L=1, no pyramid,
    no multi-supervision), ``pyramid_no_ms`` (pyramid, L_s weight 0) or ``full``."""
    pc = cfg.pyramid
    if variant == "single_scale":
        return replace(cfg, pyramid=PyramidConfig(1, 1, pc.t_o, pc.t_p)), replace(schedule, ms_weight=0.0)
    if variant == "pyramid_no_ms":
        return cfg, replace(schedule, ms_weight=0.0)
    if variant == "full":
        return cfg, replace(schedule, ms_weight=1.0 if schedule.ms_weight == 0 else schedule.ms_weight)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@dataclass
class AblationRun:
    row: MetricsRow
    trainer: Trainer
    pyramid_calls: dict


def run_ablation(
    variants: Sequence[str],
    train_scenes: Sequence[Scene],
    test_scenes: Sequence[Scene],
    seeds: Sequence[int],
    cfg: ModelConfig = ModelConfig(),
    schedule: TrainSchedule = TrainSchedule(),
    k: int = 20,
    dataset: str = "",
    eval_seed: int = 0,
) -> list[AblationRun]:
    """Train every (variant, seed) under the same budget and score best-of-k."""
    if not seeds:
        raise ValueError("need at least one seed")
    runs = []
    for variant in variants:
        vcfg, vsched = variant_setup(variant, cfg, schedule)
        for seed in seeds:
            before = dict(pyr.CALLS)
            trainer = Trainer(vcfg, train_scenes, vsched, seed)
            for _ in trainer.fit():
                pass
            row = run_benchmark(GeneratorPredictor(trainer.gen), test_scenes, k, eval_seed, dataset, variant=variant)
            row = replace(row, seed=seed)
            calls = {key: pyr.CALLS[key] - before.get(key, 0) for key in ("squeeze", "dilate")}
            log.info("%s seed %d: ADE %.4f FDE %.4f", variant, seed, row.ade, row.fde)
            runs.append(AblationRun(row, trainer, calls))
    return runs


def summarize(rows: Sequence[MetricsRow]) -> dict[str, dict[str, float]]:
    """Mean and standard deviation of ADE/FDE per variant."""
    out: dict[str, dict[str, float]] = {}
    for variant in dict.fromkeys(r.variant for r in rows):
        sel = [r for r in rows if r.variant == variant]
        a = np.array([r.ade for r in sel])
        f = np.array([r.fde for r in sel])
        out[variant] = {"ade_mean": float(a.mean()), "ade_std": float(a.std()), "fde_mean": float(f.mean()), "fde_std": float(f.std()), "runs": len(sel)}
    return out


def format_results(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([r.dataset, r.variant, r.seed, repr(r.ade), repr(r.fde), r.k, r.scenes])
    return buf.getvalue()


def parse_results(text: str) -> list[MetricsRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(MetricsRow(rec["dataset"], float(rec["ade"]), float(rec["fde"]), int(rec["k"]), int(rec["scenes"]), rec["variant"], int(rec["seed"])))
    return rows
