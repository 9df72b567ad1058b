"""Temporal-pyramid pedestrian trajectory prediction.

Observed tracks are turned into a pyramid of time scales (squeezed for coarse
scales, spline-dilated for fine ones), encoded and decoded per scale with
social pooling, fused coarse-to-fine, and trained adversarially with
per-scale supervision.
"""
from .data import Scene, gen_synthetic, parse_dataset_file, read_dataset
from .evaluation import ade, best_of_k, fde, run_ablation, run_benchmark
from .model import Discriminator, Generator, ModelConfig
from .pyramid import PyramidConfig, build_pyramid
from .spline import eval_spline, fit_natural_cubic
from .training import Trainer, TrainSchedule

__version__ = "0.1.0"

__all__ = [
    "Scene", "gen_synthetic", "parse_dataset_file", "read_dataset",
    "ade", "fde", "best_of_k", "run_benchmark", "run_ablation",
    "Generator", "Discriminator", "ModelConfig", "PyramidConfig", "build_pyramid",
    "fit_natural_cubic", "eval_spline", "Trainer", "TrainSchedule",
]
