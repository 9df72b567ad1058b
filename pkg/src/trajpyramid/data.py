"""Annotation parsing, scene windows, coordinate helpers, leave-one-out splits
and synthetic scenario generation.

The on-disk format is the usual ETH/UCY release layout: one observation per
line, ``frame ped_id x y`` separated by whitespace, coordinates in meters.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DuplicateObservation, EmptySequence, ParseError, ShapeError

DATASETS = ("eth", "hotel", "univ", "zara1", "zara2")
FRAME_STEP = 10


class Observation(NamedTuple):
    frame: int
    ped_id: int
    x: float
    y: float

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Scene:
    """N pedestrians observed over one ``t_o + t_p`` window.

    ``positions`` has shape ``(N, t_o + t_p, 2)``.
    """

    positions: np.ndarray
    ped_ids: tuple[int, ...]
    window_start_frame: int = 0
    step: int = FRAME_STEP
    t_o: int = 8

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ShapeError(f"positions must be (N, T, 2), got {pos.shape}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "ped_ids", tuple(int(i) for i in self.ped_ids))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def obs(self) -> np.ndarray:
        return self.positions[:, : self.t_o]

    @property
    def fut(self) -> np.ndarray:
        return self.positions[:, self.t_o :]

    @property
    def t_p(self) -> int:
        return self.positions.shape[1] - self.t_o

    def frames(self) -> np.ndarray:
        return self.window_start_frame + self.step * np.arange(self.positions.shape[1])

    def translated(self, offset) -> "Scene":
        return Scene(self.positions + np.asarray(offset, dtype=float), self.ped_ids, self.window_start_frame, self.step, self.t_o)


def validate_scenes(scenes: Iterable[Scene], t_o: int = 8, t_p: int = 12) -> list[str]:
    """Return a list of human-readable invariant violations (empty when clean)."""
    problems = []
    for k, s in enumerate(scenes):
        if s.n < 1:
            problems.append(f"scene {k}: no pedestrians")
        if s.positions.shape[1] != t_o + t_p or s.t_o != t_o:
            problems.append(f"scene {k}: window length {s.positions.shape[1]} != {t_o + t_p}")
        if len(set(s.ped_ids)) != len(s.ped_ids) or len(s.ped_ids) != s.n:
            problems.append(f"scene {k}: pedestrian ids not unique")
        if not np.all(np.isfinite(s.positions)):
            problems.append(f"scene {k}: non-finite coordinate")
    return problems


# parsing ----------------------------------------------------------------------

def _to_int(tok: str) -> int:
    v = float(tok)
    if not v.is_integer():
        raise ValueError(f"{tok!r} is not an integer")
    return int(v)


def parse_dataset_file(text: str) -> list[Observation]:
    obs: list[Observation] = []
    seen: set[tuple[int, int]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", lineno)
        try:
            frame, ped = _to_int(fields[0]), _to_int(fields[1])
            x, y = float(fields[2]), float(fields[3])
        except ValueError as e:
            raise ParseError(str(e), lineno) from e
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", lineno)
        if (frame, ped) in seen:
            raise DuplicateObservation(f"line {lineno}: frame {frame} pedestrian {ped} appears twice")
        seen.add((frame, ped))
        obs.append(Observation(frame, ped, x, y))
    obs.sort(key=lambda o: (o.frame, o.ped_id))
    return obs


def read_dataset(path) -> list[Observation]:
    return parse_dataset_file(Path(path).read_text())


def format_observations(obs: Iterable[Observation]) -> str:
    # repr keeps float round-trips exact
    return "".join(f"{o.frame}\t{o.ped_id}\t{o.x!r}\t{o.y!r}\n" for o in obs)


def scenes_to_observations(scenes: Sequence[Scene]) -> list[Observation]:
    out = []
    for s in scenes:
        for frame_idx, frame in enumerate(s.frames()):
            for i, pid in enumerate(s.ped_ids):
                x, y = s.positions[i, frame_idx]
                out.append(Observation(int(frame), pid, float(x), float(y)))
    out.sort(key=lambda o: (o.frame, o.ped_id))
    return out


def write_scenes(path, scenes: Sequence[Scene]) -> None:
    Path(path).write_text(format_observations(scenes_to_observations(scenes)))


# scene extraction ----------------------------------------------------------------

def frame_step(obs: Sequence[Observation]) -> int:
    """Most common gap between consecutive distinct frames."""
    frames = sorted({o.frame for o in obs})
    gaps = Counter(np.diff(frames).tolist())
    return gaps.most_common(1)[0][0] if gaps else FRAME_STEP


def extract_scenes(
    obs: Sequence[Observation], t_o: int = 8, t_p: int = 12, stride: int = 1, step: int | None = None
) -> list[Scene]:
    """Slide a ``t_o + t_p`` window over the frame grid.

    Window starts walk the distinct frames with the given stride; a window
    covers ``start + j * step``.  A pedestrian joins iff observed at every one
    of those frames, so gaps or off-grid samples simply exclude them.
    """
    if not obs:
        return []
    step = frame_step(obs) if step is None else step
    total = t_o + t_p
    by_frame: dict[int, dict[int, tuple[float, float]]] = {}
    for o in obs:
        by_frame.setdefault(o.frame, {})[o.ped_id] = (o.x, o.y)
    frames = sorted(by_frame)
    scenes = []
    for start in frames[::stride]:
        window = [start + j * step for j in range(total)]
        if window[-1] > frames[-1]:
            break
        if any(f not in by_frame for f in window):
            continue
        peds = set(by_frame[window[0]])
        for f in window[1:]:
            peds &= by_frame[f].keys()
            if not peds:
                break
        if not peds:
            continue
        ids = sorted(peds)
        pos = np.array([[by_frame[f][p] for f in window] for p in ids])
        scenes.append(Scene(pos, tuple(ids), start, step, t_o))
    return scenes


def observation_window(obs: Sequence[Observation], t_o: int = 8, step: int | None = None):
    """Last ``t_o`` grid frames and the pedestrians present in all of them.

    Returns ``(positions (N, t_o, 2), ped_ids, last_frame, step)`` or ``None``.
    """
    if not obs:
        return None
    step = frame_step(obs) if step is None else step
    by_frame: dict[int, dict[int, tuple[float, float]]] = {}
    for o in obs:
        by_frame.setdefault(o.frame, {})[o.ped_id] = (o.x, o.y)
    frames = sorted(by_frame)
    for end in reversed(frames):
        window = [end - (t_o - 1 - j) * step for j in range(t_o)]
        if any(f not in by_frame for f in window):
            continue
        peds = set(by_frame[window[0]])
        for f in window[1:]:
            peds &= by_frame[f].keys()
        if peds:
            ids = sorted(peds)
            pos = np.array([[by_frame[f][p] for f in window] for p in ids])
            return pos, tuple(ids), end, step
    return None


# coordinates ---------------------------------------------------------------------

def to_displacements(traj) -> np.ndarray:
    """Consecutive differences along the time axis, prefixed by a zero step."""
    traj = np.asarray(traj, dtype=float)
    if traj.ndim < 2 or traj.shape[-2] == 0:
        raise EmptySequence("empty trajectory")
    disp = np.zeros_like(traj)
    disp[..., 1:, :] = np.diff(traj, axis=-2)
    return disp


def from_displacements(start, disp) -> np.ndarray:
    disp = np.asarray(disp, dtype=float)
    if disp.ndim < 2 or disp.shape[-2] == 0:
        raise EmptySequence("empty displacement sequence")
    start = np.asarray(start, dtype=float)
    return start[..., None, :] + np.cumsum(disp, axis=-2)


# splits --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    train_sets: tuple[str, ...]
    test_set: str

    def __post_init__(self):
        if self.test_set in self.train_sets:
            raise ValueError("test set must not be part of the training sets")


def leave_one_out(test_set: str, names: Sequence[str] = DATASETS) -> SplitPlan:
    if test_set not in names:
        raise ValueError(f"unknown dataset {test_set!r}; expected one of {list(names)}")
    return SplitPlan(tuple(n for n in names if n != test_set), test_set)


def all_splits(names: Sequence[str] = DATASETS) -> list[SplitPlan]:
    return [leave_one_out(n, names) for n in names]


def load_split(root, plan: SplitPlan, t_o: int = 8, t_p: int = 12, stride: int = 1):
    """Read ``<root>/<name>.txt`` for every dataset of the plan.

    Returns ``(train_scenes, test_scenes)``.
    """
    root = Path(root)

    def scenes_of(name: str) -> list[Scene]:
        path = root / f"{name}.txt"
        if not path.is_file():
            raise FileNotFoundError(f"dataset file not found: {path}")
        return extract_scenes(read_dataset(path), t_o, t_p, stride)

    train = [s for name in plan.train_sets for s in scenes_of(name)]
    return train, scenes_of(plan.test_set)


# synthetic scenarios -------------------------------------------------------------

SCENARIOS = ("constant_velocity", "sinusoidal", "parallel_pair", "opposing_pair")


def gen_synthetic(
    scenario: str, count: int, seed: int, t_o: int = 8, t_p: int = 12, max_peds: int = 3
) -> list[Scene]:
    """Deterministic synthetic scenes.  Units: meters per 0.4 s step.

    - ``constant_velocity``: straight lines at uniform speed, 1..max_peds walkers.
    - ``sinusoidal``: ``x = v t``, ``y = A sin(w t + phase)`` in a random rotated
      frame, 1..max_peds walkers.
    - ``parallel_pair``: two walkers side by side with a shared heading.
    - ``opposing_pair``: two walkers swapping start and end points, passing
      each other with a lateral offset.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    T = t_o + t_p
    t = np.arange(T, dtype=float)
    scenes = []
    next_id = 1
    for k in range(count):
        if scenario == "constant_velocity":
            n = int(rng.integers(1, max_peds + 1))
            start = rng.uniform(-10, 10, size=(n, 1, 2))
            vel = rng.uniform(-0.6, 0.6, size=(n, 1, 2))
            pos = start + vel * t[None, :, None]
        elif scenario == "sinusoidal":
            n = int(rng.integers(1, max_peds + 1))
            pos = np.empty((n, T, 2))
            for i in range(n):
                v = rng.uniform(0.3, 0.6)
                amp = rng.uniform(0.5, 1.5)
                omega = rng.uniform(0.25, 0.5)
                phase = rng.uniform(0, 2 * np.pi)
                theta = rng.uniform(0, 2 * np.pi)
                local = np.stack([v * t, amp * np.sin(omega * t + phase)], axis=1)
                rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
                pos[i] = local @ rot.T + rng.uniform(-10, 10, size=2)
        elif scenario == "parallel_pair":
            n = 2
            start = rng.uniform(-10, 10, size=2)
            heading = rng.uniform(0, 2 * np.pi)
            speed = rng.uniform(0.3, 0.6)
            d = np.array([np.cos(heading), np.sin(heading)])
            normal = np.array([-d[1], d[0]])
            gap = rng.uniform(0.5, 1.0)
            base = start + speed * t[:, None] * d
            pos = np.stack([base, base + gap * normal])
        else:
            n = 2
            a = rng.uniform(-10, 10, size=2)
            heading = rng.uniform(0, 2 * np.pi)
            length = rng.uniform(6.0, 12.0)
            d = np.array([np.cos(heading), np.sin(heading)])
            normal = np.array([-d[1], d[0]])
            b = a + length * d
            frac = (t / (T - 1))[:, None]
            # lateral sidestep that vanishes at both ends, so endpoints swap exactly
            bump = rng.uniform(0.2, 0.5) * np.sin(np.pi * frac) * normal
            pos = np.stack([a + frac * (b - a) + bump, b + frac * (a - b) - bump])
        ids = tuple(range(next_id, next_id + n))
        next_id += n
        start_frame = k * (T + 5) * FRAME_STEP
        scenes.append(Scene(pos, ids, start_frame, FRAME_STEP, t_o))
    return scenes
