"""Synthetic Gaussian-blob streams with scheduled concept changes.

Every sample is drawn from its own counter-based Philox stream keyed by
``(seed, index)``, so any sample can be produced in isolation and the whole
stream is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InvalidSchedule
from .solver import MiniBatch


@dataclass(frozen=True)
class ConceptSpec:
    """Class-conditional isotropic Gaussians, one centroid row per class."""

    centroids: np.ndarray
    spread: float = 1.0
    label_noise: float = 0.0

    def __post_init__(self):
        c = np.array(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] < 1:
            raise ConfigError("centroids must be a Kc x d matrix with Kc >= 2")
        if not np.all(np.isfinite(c)):
            raise ConfigError("centroids must be finite")
        if np.unique(c, axis=0).shape[0] != c.shape[0]:
            raise ConfigError("centroids must be distinct")
        if not (math.isfinite(self.spread) and self.spread > 0):
            raise ConfigError("spread must be > 0")
        if not 0.0 <= self.label_noise < 1.0:
            raise ConfigError("label_noise must lie in [0, 1)")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {"centroids": self.centroids.tolist(), "spread": self.spread, "label_noise": self.label_noise}

    @classmethod
    def from_dict(cls, d: dict) -> "ConceptSpec":
        return cls(np.asarray(d["centroids"], dtype=float), float(d.get("spread", 1.0)), float(d.get("label_noise", 0.0)))


@dataclass(frozen=True)
class Stationary:
    pass


@dataclass(frozen=True)
class Abrupt:
    at: int


@dataclass(frozen=True)
class Incremental:
    """Centroids move in equal steps at ``start, start + every, ..., stop``."""

    every: int
    start: int
    stop: int

    def step_indices(self) -> List[int]:
        return list(range(self.start, self.stop + 1, self.every))


@dataclass(frozen=True)
class Gradual:
    """Whole segments alternating between concepts; id 0 is concept a, 1 is b."""

    segments: Tuple[Tuple[int, int], ...]


DriftSchedule = Union[Stationary, Abrupt, Incremental, Gradual]


@dataclass(frozen=True)
class StreamSpec:
    n_points: int
    concept_a: ConceptSpec
    concept_b: Optional[ConceptSpec] = None
    schedule: DriftSchedule = field(default_factory=Stationary)
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ConfigError("n_points must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.schedule, Stationary):
            b = self.concept_b
            if b is None:
                raise InvalidSchedule("a drifting schedule needs concept_b")
            if b.centroids.shape != self.concept_a.centroids.shape:
                raise InvalidSchedule("both concepts need the same number of classes and features")
        _validate_schedule(self.schedule, self.n_points)

    @property
    def d(self) -> int:
        return self.concept_a.dim

    @property
    def n_classes(self) -> int:
        return self.concept_a.n_classes

    def with_seed(self, seed: int) -> "StreamSpec":
        return StreamSpec(self.n_points, self.concept_a, self.concept_b, self.schedule, seed)

    def to_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "seed": self.seed,
            "concept_a": self.concept_a.to_dict(),
            "concept_b": None if self.concept_b is None else self.concept_b.to_dict(),
            "schedule": schedule_to_dict(self.schedule),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSpec":
        b = d.get("concept_b")
        return cls(
            n_points=int(d["n_points"]),
            concept_a=ConceptSpec.from_dict(d["concept_a"]),
            concept_b=None if b is None else ConceptSpec.from_dict(b),
            schedule=schedule_from_dict(d.get("schedule", {"kind": "stationary"})),
            seed=int(d.get("seed", 0)),
        )


def schedule_to_dict(s: DriftSchedule) -> dict:
    if isinstance(s, Stationary):
        return {"kind": "stationary"}
    if isinstance(s, Abrupt):
        return {"kind": "abrupt", "at": s.at}
    if isinstance(s, Incremental):
        return {"kind": "incremental", "every": s.every, "start": s.start, "stop": s.stop}
    return {"kind": "gradual", "segments": [list(seg) for seg in s.segments]}


def schedule_from_dict(d: dict) -> DriftSchedule:
    kind = d.get("kind")
    if kind == "stationary":
        return Stationary()
    if kind == "abrupt":
        return Abrupt(int(d["at"]))
    if kind == "incremental":
        return Incremental(int(d["every"]), int(d["start"]), int(d["stop"]))
    if kind == "gradual":
        return Gradual(tuple((int(a), int(b)) for a, b in d["segments"]))
    raise InvalidSchedule(f"unknown schedule kind {kind!r}")


def _validate_schedule(s: DriftSchedule, n: int):
    if isinstance(s, Stationary):
        return
    if isinstance(s, Abrupt):
        if not 0 <= s.at < n:
            raise InvalidSchedule(f"abrupt drift index {s.at} outside [0, {n})")
    elif isinstance(s, Incremental):
        if s.every < 1:
            raise InvalidSchedule("incremental step spacing must be >= 1")
        if not 0 <= s.start <= s.stop < n:
            raise InvalidSchedule(f"incremental range [{s.start}, {s.stop}] outside [0, {n})")
    elif isinstance(s, Gradual):
        if not s.segments:
            raise InvalidSchedule("gradual schedule has no segments")
        for length, cid in s.segments:
            if length < 1 or cid not in (0, 1):
                raise InvalidSchedule(f"bad segment ({length}, {cid})")
        if sum(length for length, _ in s.segments) != n:
            raise InvalidSchedule("gradual segment lengths must sum to n_points")
    else:
        raise InvalidSchedule(f"unknown schedule {s!r}")


def concept_weights(schedule: DriftSchedule, n: int) -> np.ndarray:
    """Fraction of the way from concept a to concept b, per sample index."""
    idx = np.arange(n)
    if isinstance(schedule, Stationary):
        return np.zeros(n)
    if isinstance(schedule, Abrupt):
        return (idx >= schedule.at).astype(float)
    if isinstance(schedule, Incremental):
        steps = np.asarray(schedule.step_indices())
        return np.searchsorted(steps, idx, side="right") / steps.size
    out = np.empty(n)
    pos = 0
    for length, cid in schedule.segments:
        out[pos:pos + length] = cid
        pos += length
    return out


def _sample_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, i, 0, 0]))


def generate(spec: StreamSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Draw the full stream as ``(features, labels)`` in stream order."""
    a = spec.concept_a
    b = spec.concept_b if spec.concept_b is not None else a
    n, d, kc = spec.n_points, spec.d, spec.n_classes
    frac = concept_weights(spec.schedule, n)
    X = np.empty((n, d))
    y = np.empty(n, dtype=int)
    for i in range(n):
        rng = _sample_rng(spec.seed, i)
        u_label, u_flip, u_other = rng.random(3)
        z = rng.standard_normal(d)
        f = frac[i]
        c = int(u_label * kc)
        centre = (1.0 - f) * a.centroids[c] + f * b.centroids[c]
        spread = (1.0 - f) * a.spread + f * b.spread
        noise = (1.0 - f) * a.label_noise + f * b.label_noise
        X[i] = centre + spread * z
        if u_flip < noise:
            # move to one of the other classes, uniformly
            c = (c + 1 + int(u_other * (kc - 1))) % kc
        y[i] = c
    return X, y


def drift_magnitude(c1: ConceptSpec, c2: ConceptSpec) -> float:
    if c1.centroids.shape != c2.centroids.shape:
        raise ConfigError("concepts must share their centroid shape")
    return float(np.linalg.norm((c1.centroids - c2.centroids).ravel()))


def batch_iter(X: np.ndarray, y: np.ndarray, K: int) -> Iterator[MiniBatch]:
    """Consecutive non-overlapping mini-batches; the last may be short."""
    if K < 1:
        raise ConfigError("batch size K must be >= 1")
    n = len(y)
    for lo in range(0, n, K):
        yield MiniBatch(X[lo:lo + K], y[lo:lo + K])


def write_csv(path, X: np.ndarray, y: np.ndarray):
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(X.shape[1])] + ["y"])
        for row, label in zip(X, y):
            w.writerow([format(v, ".17g") for v in row] + [int(label)])


def read_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if not header or header[-1] != "y" or any(h != f"f{j}" for j, h in enumerate(header[:-1])):
            raise ConfigError(f"{path}: expected header f0,...,f{{d-1}},y")
        rows = [row for row in r if row]
    if not rows:
        raise ConfigError(f"{path}: no samples")
    data = np.array([[float(v) for v in row[:-1]] for row in rows])
    labels = np.array([int(row[-1]) for row in rows])
    return data.reshape(len(rows), len(header) - 1), labels


# ---------------------------------------------------------------------------
# desk-scale replicas of the benchmark shapes


def _diag(*pts) -> np.ndarray:
    """Points on the main diagonal of the plane, given by their coordinate."""
    return np.array([[p, p] for p in pts], dtype=float)


def ds1(seed: int = 0) -> StreamSpec:
    """Stationary, 1k points, 2 features, 2 classes, 10% label noise."""
    a = ConceptSpec(_diag(0.0, 2.0), spread=1.0, label_noise=0.10)
    return StreamSpec(1000, a, seed=seed)


def ds7(seed: int = 0) -> StreamSpec:
    """Stationary, 1k points, 5 features, 3 classes, 10% label noise."""
    c = np.zeros((3, 5))
    c[1, 0] = c[2, 1] = 4.0
    a = ConceptSpec(c, spread=1.0, label_noise=0.10)
    return StreamSpec(1000, a, seed=seed)


def ds15(seed: int = 0) -> StreamSpec:
    """Abrupt drift at 500: the classes swap sides and move apart.

    Start separation 4.24, end separation 6.90, drift magnitude 15.52.
    """
    a = ConceptSpec(_diag(0.0, 3.0), spread=1.0)
    b = ConceptSpec(_diag(10.62, 5.74), spread=1.0)
    return StreamSpec(1000, a, b, Abrupt(500), seed)


def ds19(seed: int = 0) -> StreamSpec:
    """Incremental drift, 2.8k points, nine equal steps every 200 in [600, 2200].

    The separation grows from 4.12 to 5.51 while both classes slide and the
    boundary normal keeps its direction; the total drift magnitude is 43.08.
    """
    a = ConceptSpec(_diag(0.0, 2.9133), spread=1.0)
    b = ConceptSpec(DS19_END, spread=1.0)
    return StreamSpec(2800, a, b, Incremental(200, 600, 2200), seed)


# class 0 moves 20 along the diagonal and 22.34 across it
DS19_END = np.array([[29.9405, -1.6562], [33.8367, 2.2399]])


def ds23(seed: int = 0) -> StreamSpec:
    """Gradual drift: alternating segments, both classes shifted by 15."""
    a = ConceptSpec(_diag(0.0, 1.916), spread=1.0)
    b = ConceptSpec(_diag(10.607, 12.544), spread=1.0)
    segs = ((800, 0), (200, 1), (200, 0), (400, 1), (200, 0), (800, 1))
    return StreamSpec(2600, a, b, Gradual(segs), seed)


PRESETS = {"DS1": ds1, "DS7": ds7, "DS15": ds15, "DS19": ds19, "DS23": ds23}


def preset(name: str, seed: int = 0) -> StreamSpec:
    try:
        return PRESETS[name.upper()](seed)
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
