from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajpyramid.data import (
    DATASETS,
    Observation,
    Scene,
    extract_scenes,
    format_observations,
    from_displacements,
    gen_synthetic,
    leave_one_out,
    load_split,
    observation_window,
    parse_dataset_file,
    read_dataset,
    scenes_to_observations,
    to_displacements,
    validate_scenes,
    write_scenes,
)
from trajpyramid.errors import DuplicateObservation, EmptySequence, ParseError

FIX = Path(__file__).parent / "fixtures"


# parsing ----------------------------------------------------------------------

def test_well_formed_fixture():
    obs = read_dataset(FIX / "well_formed.txt")
    assert obs[0] == Observation(10, 3, 4.5, -2.0)
    assert [(o.frame, o.ped_id) for o in obs] == [(10, 3), (10, 4), (20, 3)]
    assert parse_dataset_file("") == []
    assert parse_dataset_file("10.0 3.0 1e-3 2") == [Observation(10, 3, 0.001, 2.0)]


def test_malformed_fixture_reports_line():
    with pytest.raises(ParseError) as info:
        read_dataset(FIX / "malformed.txt")
    assert info.value.line == 2 and "line 2" in str(info.value)
    for bad in ("10 3 4.5", "10 3 x 1", "10.5 3 1 1", "10 3 nan 1", "1 2 3 4 5"):
        with pytest.raises(ParseError) as info:
            parse_dataset_file("0 1 0 0\n" + bad)
        assert info.value.line == 2


def test_duplicate_fixture():
    with pytest.raises(DuplicateObservation, match="line 3"):
        read_dataset(FIX / "duplicate.txt")


coords = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 500), coords, coords), max_size=40, unique_by=lambda r: r[:2]))
def test_parse_format_round_trip(rows):
    obs = sorted((Observation(*r) for r in rows), key=lambda o: (o.frame, o.ped_id))
    assert parse_dataset_file(format_observations(obs)) == obs


# scenes -------------------------------------------------------------------------

def test_window_fixtures():
    one = extract_scenes(read_dataset(FIX / "one_ped_20.txt"))
    assert len(one) == 1 and one[0].n == 1 and one[0].positions.shape == (1, 20, 2)
    assert extract_scenes(read_dataset(FIX / "one_ped_19.txt")) == []
    three = extract_scenes(read_dataset(FIX / "three_ped_21.txt"))
    assert [s.n for s in three] == [3, 3]
    assert [s.window_start_frame for s in three] == [0, 10]
    sparse = extract_scenes(read_dataset(FIX / "three_ped_21.txt"), stride=20)
    assert len(sparse) == 1 and np.array_equal(sparse[0].positions, three[0].positions)
    assert extract_scenes([]) == []


def test_gap_excludes_only_that_pedestrian():
    obs = [o for o in read_dataset(FIX / "three_ped_21.txt") if not (o.ped_id == 2 and o.frame == 50)]
    scenes = extract_scenes(obs)
    assert [s.ped_ids for s in scenes] == [(1, 3), (1, 3)]
    off_grid = obs + [Observation(55, 9, 0.0, 0.0)]
    assert [s.ped_ids for s in extract_scenes(off_grid, step=10)] == [(1, 3), (1, 3)]


def test_scene_serialization_round_trip(tmp_path):
    scenes = gen_synthetic("parallel_pair", 3, 0)
    write_scenes(tmp_path / "s.txt", scenes)
    back = extract_scenes(read_dataset(tmp_path / "s.txt"))
    # windows are separated by 5 empty frames, so exactly the original scenes come back
    assert len(back) == 3
    for a, b in zip(scenes, back):
        np.testing.assert_array_equal(a.positions, b.positions)
        assert a.ped_ids == b.ped_ids and a.window_start_frame == b.window_start_frame
    assert scenes_to_observations(back) == read_dataset(tmp_path / "s.txt")


def test_observation_window():
    obs = read_dataset(FIX / "three_ped_21.txt")
    pos, ids, last, step = observation_window(obs)
    assert ids == (1, 2, 3) and last == 200 and step == 10 and pos.shape == (3, 8, 2)
    assert observation_window(obs[:3 * 7]) is None
    assert observation_window([]) is None


def test_validator():
    good = gen_synthetic("sinusoidal", 10, 0) + extract_scenes(read_dataset(FIX / "three_ped_21.txt"))
    assert validate_scenes(good) == []
    bad = [
        Scene(np.zeros((2, 20, 2)), (1, 1)),
        Scene(np.zeros((1, 19, 2)), (1,)),
        Scene(np.full((1, 20, 2), np.nan), (1,)),
    ]
    problems = validate_scenes(bad)
    assert len(problems) == 3 and "scene 0" in problems[0] and "scene 2" in problems[2]


# displacements ----------------------------------------------------------------------

def test_displacement_examples():
    np.testing.assert_array_equal(to_displacements([[0, 0], [1, 0], [2, 0]]), [[0, 0], [1, 0], [1, 0]])
    np.testing.assert_array_equal(to_displacements(np.full((5, 2), 3.0)), 0)
    with pytest.raises(EmptySequence):
        to_displacements(np.zeros((0, 2)))
    with pytest.raises(EmptySequence):
        from_displacements([0, 0], np.zeros((0, 2)))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), seed=st.integers(0, 2**31))
def test_displacements_invert(n, seed):
    traj = np.random.default_rng(seed).normal(scale=4, size=(3, n, 2))
    back = from_displacements(traj[:, 0], to_displacements(traj))
    np.testing.assert_allclose(back, traj, atol=1e-12)


# synthetic -----------------------------------------------------------------------------

def test_constant_velocity_is_collinear_and_uniform():
    for s in gen_synthetic("constant_velocity", 30, 4):
        d = np.diff(s.positions, axis=1)
        np.testing.assert_allclose(d, np.broadcast_to(d[:, :1], d.shape), atol=1e-12)


def test_synthetic_is_deterministic():
    for name in ("constant_velocity", "sinusoidal", "parallel_pair", "opposing_pair"):
        a, b = gen_synthetic(name, 5, 9), gen_synthetic(name, 5, 9)
        assert all(np.array_equal(x.positions, y.positions) and x.ped_ids == y.ped_ids for x, y in zip(a, b))
        assert validate_scenes(a) == []
    with pytest.raises(ValueError):
        gen_synthetic("spiral", 1, 0)
    with pytest.raises(ValueError):
        gen_synthetic("sinusoidal", 0, 0)


def test_opposing_pair_geometry():
    for s in gen_synthetic("opposing_pair", 20, 1):
        a, b = s.positions
        np.testing.assert_allclose(a[0], b[-1], atol=1e-12)
        np.testing.assert_allclose(b[0], a[-1], atol=1e-12)
        gap = np.linalg.norm(a - b, axis=1)
        k = int(np.argmin(gap))
        assert 0 < k < len(gap) - 1
        assert np.all(np.diff(gap[: k + 1]) < 0) and np.all(np.diff(gap[k:]) > 0)


# splits ----------------------------------------------------------------------------------

def test_leave_one_out_plans():
    for name in DATASETS:
        plan = leave_one_out(name)
        assert plan.test_set == name and len(plan.train_sets) == 4 and name not in plan.train_sets
    with pytest.raises(ValueError):
        leave_one_out("mall")


def test_load_split(tmp_path):
    for i, name in enumerate(DATASETS):
        write_scenes(tmp_path / f"{name}.txt", gen_synthetic("parallel_pair", i + 1, i))
    train, test = load_split(tmp_path, leave_one_out("hotel"))
    assert len(test) == 2 and len(train) == 1 + 3 + 4 + 5
    (tmp_path / "eth.txt").unlink()
    with pytest.raises(FileNotFoundError, match="eth.txt"):
        load_split(tmp_path, leave_one_out("hotel"))
