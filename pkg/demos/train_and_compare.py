"""Train a small pyramid model on synthetic sine walkers and compare it with
the constant-velocity and least-squares baselines.

Takes about half a minute on one core.

    python3 demos/train_and_compare.py [epochs]
"""
import sys

from trajpyramid.data import gen_synthetic
from trajpyramid.evaluation import BaselinePredictor, GeneratorPredictor, run_benchmark
from trajpyramid.model import ModelConfig
from trajpyramid.training import Trainer, TrainSchedule

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 50
train = gen_synthetic("sinusoidal", 120, seed=0)
test = gen_synthetic("sinusoidal", 40, seed=1)

trainer = Trainer(ModelConfig(), train, TrainSchedule(epochs=epochs, batch_size=16, lr_g=1e-2, lr_d=1e-2), seed=0)
for stats in trainer.fit():
    if stats.epoch % 5 == 0 or stats.epoch == epochs:
        print(f"epoch {stats.epoch:3d}  L_f {stats.L_f:8.3f}  L_s {stats.L_s:8.3f}  D {stats.L_adv_D:.3f}")

rows = [
    ("pyramid GAN, best of 20", run_benchmark(GeneratorPredictor(trainer.gen), test, k=20)),
    ("pyramid GAN, single draw", run_benchmark(GeneratorPredictor(trainer.gen), test, k=1)),
    ("constant velocity", run_benchmark(BaselinePredictor("constant_velocity"), test, k=1)),
    ("least-squares line", run_benchmark(BaselinePredictor("linear"), test, k=1)),
]
for name, row in rows:
    print(f"{name:26s} ADE {row.ade:.3f}  FDE {row.fde:.3f}")
