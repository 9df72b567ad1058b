"""Command-line entry point: ``train``, ``eval``, ``predict``, ``ablate``, ``synth``.

Exit codes: 0 success, 2 usage or configuration, 3 numeric abort,
4 checkpoint problem, 5 data problem.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config as C
from . import data as D
from . import evaluation as E
from .errors import (
    CheckpointError,
    ConfigError,
    DuplicateObservation,
    EmptyScene,
    InvalidK,
    NumericError,
    ParseError,
)
from .pyramid import PyramidConfig
from .training import Trainer, format_loss_log

log = logging.getLogger("trajpyramid")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECKPOINT, EXIT_DATA = 0, 2, 3, 4, 5


class DataProblem(Exception):
    """Input data is readable but unusable (no scenes, no full window)."""


# flags ---------------------------------------------------------------------------

# Config keys whose natural flag would be ambiguous get an explicit spelling.
_FLAG_OVERRIDES = {("pyramid", "L"): "--pyramid-L", ("pyramid", "k"): "--pyramid-k", ("eval", "k"): "--k"}


def _flag(section: str, key: str) -> str:
    return _FLAG_OVERRIDES.get((section, key), C.flag_name(section, key))


def _add_config_flags(p: argparse.ArgumentParser, sections: Sequence[str]) -> None:
    p.add_argument("--config", help="INI run configuration; flags override its values")
    for (section, key), (_, _, conv) in C.KEYS.items():
        if section not in sections:
            continue
        typ = str if conv is C._split_list else conv
        p.add_argument(
            _flag(section, key), dest=f"cfg__{section}__{key}", type=typ, default=argparse.SUPPRESS,
            help=f"[{section}] {key}",
        )


def resolve_config(args: argparse.Namespace) -> C.RunConfig:
    """Config file first, then every flag that was given on the command line."""
    values = {}
    if getattr(args, "config", None):
        if not Path(args.config).is_file():
            raise ConfigError(f"config file not found: {args.config}")
        values = C.parse_text(Path(args.config).read_text(), args.config)
    for name, raw in vars(args).items():
        if name.startswith("cfg__"):
            _, section, key = name.split("__")
            conv = C.KEYS[(section, key)][2]
            values[(section, key)] = conv(raw) if conv is C._split_list else raw
    args.given_keys = set(values)
    return C.build(values)


# data ------------------------------------------------------------------------------

def _read_files(paths: Sequence[str], cfg: C.RunConfig, pc: PyramidConfig | None = None) -> list[D.Scene]:
    pc = pc or cfg.pyramid
    scenes = []
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"dataset file not found: {p}")
    for p in paths:
        scenes += D.extract_scenes(D.read_dataset(p), pc.t_o, pc.t_p, cfg.data.stride)
    return scenes


def training_scenes(cfg: C.RunConfig) -> list[D.Scene]:
    if cfg.data.train_files:
        return _read_files(cfg.data.train_files, cfg)
    if cfg.data.root and cfg.data.test_set:
        plan = D.leave_one_out(cfg.data.test_set)
        return _read_files([str(Path(cfg.data.root) / f"{n}.txt") for n in plan.train_sets], cfg)
    raise ConfigError("no training data: set [data] train_files, or root and test_set")


def test_scenes(cfg: C.RunConfig, pc: PyramidConfig | None = None) -> list[D.Scene]:
    if cfg.data.test_files:
        return _read_files(cfg.data.test_files, cfg, pc)
    if cfg.data.root and cfg.data.test_set:
        return _read_files([str(Path(cfg.data.root) / f"{cfg.data.test_set}.txt")], cfg, pc)
    raise ConfigError("no test data: set [data] test_files, or root and test_set")


def _dataset_name(cfg: C.RunConfig) -> str:
    if cfg.data.test_set:
        return cfg.data.test_set
    return "+".join(Path(p).stem for p in cfg.data.test_files) or "synthetic"


# commands ----------------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    scenes = training_scenes(cfg)
    if not scenes:
        raise DataProblem("training data holds no complete window")
    out = Path(cfg.checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"# train {cfg.header()} scenes={len(scenes)}", flush=True)
    epochs = cfg.schedule.epochs
    if args.resume:
        trainer = Trainer.resume(args.resume, scenes)
        if ("train", "epochs") not in args.given_keys:
            epochs = trainer.schedule.epochs  # finish the run the checkpoint was started with
        print(f"# resumed at epoch {trainer.epoch}", flush=True)
    else:
        trainer = Trainer(cfg.model, scenes, cfg.schedule, cfg.seed)
    log_path = Path(args.loss_log) if args.loss_log else out / "loss_log.csv"
    status = EXIT_OK
    try:
        for stats in trainer.fit(epochs):
            trainer.save(out / f"epoch_{stats.epoch:04d}.ckpt")
            trainer.save(out / "last.ckpt")
            log_path.write_text(format_loss_log(trainer.history))
            print(stats.csv_row(), flush=True)
    except NumericError as e:
        print(f"error: {e}; last checkpoint kept in {out}", file=sys.stderr)
        status = EXIT_NUMERIC
    log_path.write_text(format_loss_log(trainer.history))
    if status == EXIT_OK:
        trainer.save(out / "last.ckpt")
    return status


def cmd_eval(args: argparse.Namespace) -> int:
    if not Path(args.checkpoint).is_file():
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    predictor, pc = E.load_predictor(args.checkpoint)
    cfg = resolve_config(args)
    scenes = test_scenes(cfg, pc)
    if not scenes:
        raise DataProblem("test data holds no complete window")
    row = E.run_benchmark(predictor, scenes, cfg.eval.k, cfg.eval.samples_seed, _dataset_name(cfg), cfg.eval.workers, args.variant)
    text = E.format_results([row])
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    if args.samples < 1:
        raise InvalidK("--samples must be >= 1")
    if not Path(args.checkpoint).is_file():
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    if not Path(args.input).is_file():
        raise FileNotFoundError(f"input file not found: {args.input}")
    predictor, pc = E.load_predictor(args.checkpoint)
    window = D.observation_window(D.read_dataset(args.input), pc.t_o)
    if window is None:
        raise DataProblem(f"{args.input}: no pedestrian has a complete {pc.t_o}-step observation window")
    pos, ids, last_frame, step = window
    samples = predictor.sample(pos, args.samples, np.random.default_rng(args.seed))
    lines = []
    for s in range(samples.shape[0]):
        for i, pid in enumerate(ids):
            for j in range(samples.shape[2]):
                x, y = samples[s, i, j]
                lines.append(f"{last_frame + (j + 1) * step}\t{pid}\t{float(x)!r}\t{float(y)!r}\t{s}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in E.VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; expected some of {', '.join(E.VARIANTS)}")
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    if args.synthetic:
        train = D.gen_synthetic(args.synthetic, args.count, cfg.seed, cfg.pyramid.t_o, cfg.pyramid.t_p)
        test = D.gen_synthetic(args.synthetic, args.test_count, cfg.seed + 1, cfg.pyramid.t_o, cfg.pyramid.t_p)
        name = args.synthetic
    else:
        train, test, name = training_scenes(cfg), test_scenes(cfg), _dataset_name(cfg)
    if not train or not test:
        raise DataProblem("ablation needs non-empty training and test sets")
    seeds = [cfg.seed + i for i in range(args.seeds)]
    print(f"# ablate {cfg.header()} variants={','.join(variants)} seeds={seeds}", file=sys.stderr, flush=True)
    runs = E.run_ablation(variants, train, test, seeds, cfg.model, cfg.schedule, cfg.eval.k, name, cfg.eval.samples_seed)
    rows = [r.row for r in runs]
    text = E.format_results(rows)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    for variant, st in E.summarize(rows).items():
        print(
            f"# {variant}: ADE {st['ade_mean']:.4f} ± {st['ade_std']:.4f}  FDE {st['fde_mean']:.4f} ± {st['fde_std']:.4f}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    scenes = D.gen_synthetic(args.scenario, args.count, args.seed, args.t_o, args.t_p, args.max_peds)
    text = D.format_observations(D.scenes_to_observations(scenes))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    E.save_baseline_checkpoint(args.out, args.kind, PyramidConfig(1, 1, args.t_o, args.t_p))
    return EXIT_OK


# parser ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trajpyramid", description="Temporal-pyramid trajectory prediction.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model; writes checkpoints and a loss log")
    _add_config_flags(t, ("pyramid", "model", "optim", "train", "data"))
    t.add_argument("--resume", help="continue from this checkpoint")
    t.add_argument("--loss-log", help="loss log path (default <checkpoint_dir>/loss_log.csv)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="best-of-K ADE/FDE of a checkpoint on a test set")
    e.add_argument("checkpoint")
    _add_config_flags(e, ("data", "eval"))
    e.add_argument("--variant", default="", help="label written to the variant column")
    e.add_argument("--out", help="also write the CSV table here")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="sample future trajectories for the last observed window")
    r.add_argument("checkpoint")
    r.add_argument("input", help="dataset-format file with the observed history")
    r.add_argument("--samples", type=int, default=20, help="futures per pedestrian (K)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="output file (default stdout)")
    r.set_defaults(func=cmd_predict)

    a = sub.add_parser("ablate", help="train and score model variants over several seeds")
    _add_config_flags(a, ("pyramid", "model", "optim", "train", "data", "eval"))
    a.add_argument("--variants", default=",".join(E.VARIANTS), help="comma-separated subset of " + ",".join(E.VARIANTS))
    a.add_argument("--seeds", type=int, default=5, help="number of training seeds, counted up from [train] seed")
    a.add_argument("--synthetic", choices=D.SCENARIOS, help="use generated scenes instead of dataset files")
    a.add_argument("--count", type=int, default=200, help="synthetic training scenes")
    a.add_argument("--test-count", type=int, default=50, help="synthetic test scenes")
    a.add_argument("--out", help="also write the CSV table here")
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("synth", help="write synthetic scenes in the dataset text format")
    s.add_argument("scenario", choices=D.SCENARIOS)
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--t-o", type=int, default=8)
    s.add_argument("--t-p", type=int, default=12)
    s.add_argument("--max-peds", type=int, default=3)
    s.add_argument("--out", help="output file (default stdout)")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("baseline", help="write a checkpoint wrapping a non-learned predictor")
    b.add_argument("kind", choices=("linear", "constant_velocity"))
    b.add_argument("out")
    b.add_argument("--t-o", type=int, default=8)
    b.add_argument("--t-p", type=int, default=12)
    b.set_defaults(func=cmd_baseline)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidK, FileNotFoundError) as e:
        msg, code = e, EXIT_USAGE
    except NumericError as e:
        msg, code = e, EXIT_NUMERIC
    except CheckpointError as e:
        msg, code = e, EXIT_CHECKPOINT
    except (DataProblem, ParseError, DuplicateObservation, EmptyScene) as e:
        msg, code = e, EXIT_DATA
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
