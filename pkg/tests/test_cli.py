import struct
import subprocess
import sys

import pytest

from trajpyramid.cli import main
from trajpyramid.data import gen_synthetic, write_scenes
from trajpyramid.evaluation import parse_results


@pytest.fixture
def synth(tmp_path):
    """Tiny train/test files in the dataset text format."""
    write_scenes(tmp_path / "train.txt", gen_synthetic("sinusoidal", 6, 0))
    write_scenes(tmp_path / "test.txt", gen_synthetic("sinusoidal", 4, 1))
    write_scenes(tmp_path / "cv.txt", gen_synthetic("constant_velocity", 4, 2))
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def train_args(d, name, *extra):
    return ["train", "--train-files", d / "train.txt", "--checkpoint-dir", d / name, "--batch-size", 3, *extra]


# train --------------------------------------------------------------------------------

def test_train_missing_dataset_names_file(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--train-files", tmp_path / "absent.txt", "--checkpoint-dir", tmp_path / "c")
    assert code == 2 and "absent.txt" in err


def test_train_header_and_identical_logs(capsys, synth):
    code, out, _ = run(capsys, *train_args(synth, "a", "--epochs", 1, "--seed", 7))
    assert code == 0
    header = out.splitlines()[0]
    assert header.startswith("# train") and "L=5" in header and "hidden=32" in header
    assert run(capsys, *train_args(synth, "b", "--epochs", 1, "--seed", 7))[0] == 0
    a = (synth / "a" / "loss_log.csv").read_bytes()
    assert a == (synth / "b" / "loss_log.csv").read_bytes()
    assert sorted(p.name for p in (synth / "a").iterdir()) == ["epoch_0001.ckpt", "last.ckpt", "loss_log.csv"]


def test_flag_overrides_config(capsys, synth):
    ini = synth / "run.ini"
    ini.write_text(f"[pyramid]\nL = 3\nk = 2\n[train]\nepochs = 1\nbatch_size = 3\n[data]\ntrain_files = {synth / 'train.txt'}\n")
    code, out, _ = run(capsys, "train", "--config", ini, "--pyramid-L", 4, "--checkpoint-dir", synth / "c")
    assert code == 0
    assert "L=4 k=2" in out and "epochs=1" in out
    code, _, err = run(capsys, "train", "--config", synth / "missing.ini")
    assert code == 2 and "missing.ini" in err
    code, _, _ = run(capsys, "train", "--config", ini, "--pyramid-k", 9)
    assert code == 2


def test_train_resume(capsys, synth):
    run(capsys, *train_args(synth, "full", "--epochs", 2, "--seed", 3))
    run(capsys, *train_args(synth, "half", "--epochs", 1, "--seed", 3))
    code, out, _ = run(capsys, *train_args(synth, "half", "--epochs", 2, "--resume", synth / "half" / "last.ckpt"))
    assert code == 0 and "# resumed at epoch 1" in out
    assert (synth / "half" / "loss_log.csv").read_bytes() == (synth / "full" / "loss_log.csv").read_bytes()


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_train_numeric_abort_keeps_checkpoint(capsys, synth):
    code, _, err = run(capsys, *train_args(synth, "n", "--epochs", 3, "--lr-g", 1e300, "--lr-d", 1e300))
    assert code == 3 and "last checkpoint kept" in err


# eval -------------------------------------------------------------------------------------

def test_eval_k_monotone_and_csv(capsys, synth):
    run(capsys, *train_args(synth, "m", "--epochs", 1))
    ckpt = synth / "m" / "last.ckpt"
    code, out1, _ = run(capsys, "eval", ckpt, "--test-files", synth / "test.txt", "--k", 1)
    assert code == 0
    code, out20, _ = run(capsys, "eval", ckpt, "--test-files", synth / "test.txt", "--k", 20, "--out", synth / "r.csv")
    r1, r20 = parse_results(out1)[0], parse_results(out20)[0]
    assert r20.ade <= r1.ade and r20.fde <= r1.fde and r20.k == 20
    assert parse_results((synth / "r.csv").read_text()) == [r20]


def test_eval_oracle_checkpoint(capsys, synth):
    assert run(capsys, "baseline", "constant_velocity", synth / "cv.ckpt")[0] == 0
    code, out, _ = run(capsys, "eval", synth / "cv.ckpt", "--test-files", synth / "cv.txt", "--k", 1)
    row = parse_results(out)[0]
    assert code == 0 and row.ade <= 1e-12 and row.fde <= 1e-12 and row.scenes == 4


def test_eval_checkpoint_errors(capsys, synth):
    code, _, err = run(capsys, "eval", synth / "none.ckpt", "--test-files", synth / "test.txt")
    assert code == 4 and "none.ckpt" in err
    run(capsys, "baseline", "linear", synth / "lin.ckpt")
    raw = bytearray((synth / "lin.ckpt").read_bytes())
    raw[8:12] = struct.pack("<I", 2)
    (synth / "v2.ckpt").write_bytes(bytes(raw))
    code, _, err = run(capsys, "eval", synth / "v2.ckpt", "--test-files", synth / "test.txt")
    assert code == 4 and "version" in err


# predict -------------------------------------------------------------------------------------

def one_ped_input(path):
    path.write_text("".join(f"{10 * j}\t5\t{0.4 * j!r}\t1.0\n" for j in range(8)))
    return path


def test_predict_rows_and_determinism(capsys, synth):
    run(capsys, *train_args(synth, "p", "--epochs", 1))
    ckpt, inp = synth / "p" / "last.ckpt", one_ped_input(synth / "in.txt")
    code, out, _ = run(capsys, "predict", ckpt, inp, "--samples", 3, "--seed", 4)
    rows = [ln.split("\t") for ln in out.splitlines()]
    assert code == 0 and len(rows) == 36
    assert {r[1] for r in rows} == {"5"} and sorted({r[4] for r in rows}) == ["0", "1", "2"]
    assert [int(r[0]) for r in rows[:12]] == [80 + 10 * j for j in range(12)]
    run(capsys, "predict", ckpt, inp, "--samples", 3, "--seed", 4, "--out", synth / "o1.txt")
    run(capsys, "predict", ckpt, inp, "--samples", 3, "--seed", 4, "--out", synth / "o2.txt")
    assert (synth / "o1.txt").read_bytes() == (synth / "o2.txt").read_bytes() == out.encode()


def test_predict_errors(capsys, synth):
    run(capsys, "baseline", "constant_velocity", synth / "cv.ckpt")
    inp = one_ped_input(synth / "in.txt")
    assert run(capsys, "predict", synth / "cv.ckpt", inp, "--samples", 0)[0] == 2
    short = synth / "short.txt"
    short.write_text("".join(f"{10 * j}\t5\t0.0\t0.0\n" for j in range(7)))
    code, _, err = run(capsys, "predict", synth / "cv.ckpt", short)
    assert code == 5 and "window" in err
    bad = synth / "bad.txt"
    bad.write_text("0 1 2\n")
    assert run(capsys, "predict", synth / "cv.ckpt", bad)[0] == 5


# ablate / synth --------------------------------------------------------------------------------

def test_ablate_rows(capsys, synth):
    code, out, err = run(
        capsys, "ablate", "--synthetic", "sinusoidal", "--count", 4, "--test-count", 2,
        "--variants", "single_scale,full", "--seeds", 3, "--epochs", 1, "--batch-size", 4, "--k", 2,
    )
    rows = parse_results(out)
    assert code == 0 and len(rows) == 6
    assert [(r.variant, r.seed) for r in rows] == [(v, s) for v in ("single_scale", "full") for s in (0, 1, 2)]
    assert "# full: ADE" in err
    assert run(capsys, "ablate", "--variants", "huge", "--synthetic", "sinusoidal")[0] == 2


def test_ablate_default_variants():
    from trajpyramid.cli import build_parser

    args = build_parser().parse_args(["ablate"])
    assert args.variants.split(",") == ["single_scale", "pyramid_no_ms", "full"]


def test_synth_is_deterministic(capsys, tmp_path):
    for name in ("a.txt", "b.txt"):
        assert run(capsys, "synth", "constant_velocity", "--count", 10, "--seed", 1, "--out", tmp_path / name)[0] == 0
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    code, out, _ = run(capsys, "synth", "opposing_pair", "--count", 1)
    assert code == 0 and len(out.splitlines()) == 40


def test_usage_errors_and_module_entry(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "synth", "constant_velocity", "--count", 0)[0] == 2
    done = subprocess.run([sys.executable, "-m", "trajpyramid", "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    for cmd in ("train", "eval", "predict", "ablate", "synth"):
        assert cmd in done.stdout
