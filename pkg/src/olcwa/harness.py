"""Evaluation drivers: prequential runs, k-fold scoring, regret and runtime.

Learners are wrapped in small adapters with a common surface
(``partial_fit``, ``predict_proba``, ``predict``) so the drivers never need
to know which algorithm they are running.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold
from sklearn.multiclass import OneVsRestClassifier

from . import datagen
from . import drift as dr
from .baselines import BaselineConfig, BaselineKind, baseline_init
from .errors import ConfigError, EmptyInput
from .model import OlcwaConfig, OvrModel, init as olcwa_init, ovr_init
from .solver import PROBA_CLAMP, MiniBatch, SolverConfig, sigmoid

logger = logging.getLogger(__name__)

ONLINE_KINDS = ("olcwa",) + tuple(k.value for k in BaselineKind)
BATCH_KIND = "batch"
COMPARATOR_BISECTIONS = 30
RECORD_FIELDS = ("learner", "seed", "t", "kpi_acc", "kpi_loss", "verdict", "alpha", "cum_regret")


# ---------------------------------------------------------------------------
# learners


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ONLINE_KINDS + (BATCH_KIND,):
            raise ConfigError(f"unknown learner kind {self.kind!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        kind = d["kind"]
        return cls(d.get("name", kind), kind, dict(d.get("params", {})))


def _uniform(n: int, n_classes: int) -> np.ndarray:
    return np.full((n, n_classes), 1.0 / n_classes)


def _normalize_rows(p: np.ndarray) -> np.ndarray:
    s = p.sum(axis=1, keepdims=True)
    out = np.divide(p, s, out=np.full_like(p, 1.0 / p.shape[1]), where=s > 0)
    return out


class OlcwaLearner:
    """Binary model for two classes, one-vs-rest otherwise."""

    def __init__(self, cfg: OlcwaConfig, n_classes: int):
        self.cfg = cfg
        self.n_classes = n_classes
        self.model = None
        self.verdict = dr.STABLE
        self.alpha = cfg.alpha0

    def partial_fit(self, X, y):
        batch = MiniBatch(X, y)
        if self.model is None:
            if self.n_classes == 2:
                self.model = olcwa_init(batch, self.cfg)
            else:
                self.model = ovr_init(batch, self.cfg, classes=range(self.n_classes))
            return self
        if isinstance(self.model, OvrModel):
            reports = [m.step(batch.relabel(c)) for c, m in zip(self.model.classes, self.model.learners)]
            # the most severe per-class verdict summarizes the step
            worst = max(reports, key=lambda r: r.verdict.kind.severity)
            self.verdict = worst.verdict
            self.alpha = float(np.mean([r.alpha_applied for r in reports]))
        else:
            r = self.model.step(batch)
            self.verdict, self.alpha = r.verdict, r.alpha_applied
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.model is None:
            return _uniform(X.shape[0], self.n_classes)
        p = self.model.predict_proba(X)
        if isinstance(self.model, OvrModel):
            return _normalize_rows(p)
        return np.column_stack([1.0 - p, p])


class BaselineLearner:
    """Binary baseline, or one binary baseline per class for more classes.

    Learners without a native probability map their score through a logistic
    link (PLA, PA) or clip it to [0, 1] (LMS) so log loss is defined.
    """

    def __init__(self, cfg: BaselineConfig, n_classes: int, d: int):
        self.cfg = cfg
        self.n_classes = n_classes
        n_models = 1 if n_classes == 2 else n_classes
        self.models = [baseline_init(cfg.kind, d, cfg) for _ in range(n_models)]
        self.verdict = None
        self.alpha = None

    def partial_fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y).reshape(-1)
        if len(self.models) == 1:
            self.models[0].partial_fit(X, y)
        else:
            for c, m in enumerate(self.models):
                m.partial_fit(X, (y == c).astype(int))
        return self

    def _score(self, m, X) -> np.ndarray:
        kind = self.cfg.kind
        if kind in (BaselineKind.OLR, BaselineKind.ONB):
            return m.predict_proba(X)
        if kind is BaselineKind.LMS:
            return np.clip(m.decision(X), 0.0, 1.0)
        return sigmoid(m.decision(X))

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.models) == 1:
            p = self._score(self.models[0], X)
            return np.column_stack([1.0 - p, p])
        return _normalize_rows(np.column_stack([self._score(m, X) for m in self.models]))

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.models) == 1:
            return self.models[0].predict(X)
        return np.argmax(self.predict_proba(X), axis=1)


class BatchLearner:
    """Offline logistic regression (one-vs-rest for more than two classes)."""

    def __init__(self, n_classes: int, C: float = 1.0, max_iter: int = 1000):
        base = LogisticRegression(C=C, max_iter=max_iter)
        self.clf = base if n_classes == 2 else OneVsRestClassifier(base)
        self.n_classes = n_classes

    def fit(self, X, y):
        self.clf.fit(X, y)
        return self

    def predict_proba(self, X) -> np.ndarray:
        p = self.clf.predict_proba(X)
        out = np.zeros((p.shape[0], self.n_classes))
        out[:, self.clf.classes_] = p
        return out


def _predict(learner, X) -> np.ndarray:
    if hasattr(learner, "predict"):
        return np.asarray(learner.predict(X))
    return np.argmax(learner.predict_proba(X), axis=1)


def olcwa_config_from_params(params: Dict[str, Any], n_points: Optional[int] = None, K: Optional[int] = None) -> OlcwaConfig:
    p = dict(params)
    solver = SolverConfig(**p.pop("solver", {}))
    window = p.pop("window_size", dr.DEFAULT_KWS)
    if window == "auto":
        if n_points is None or K is None:
            raise ConfigError("window_size='auto' needs the stream length and batch size")
        window = dr.auto_window_size(n_points, K)
    if "kpis" in p:
        p["kpis"] = tuple(p["kpis"])
    return OlcwaConfig(window_size=int(window), solver=solver, **p)


def make_learner(spec: LearnerSpec, n_classes: int, d: int, n_points: Optional[int] = None, K: Optional[int] = None):
    if n_classes < 2:
        raise ConfigError("need at least two classes")
    if spec.kind == "olcwa":
        return OlcwaLearner(olcwa_config_from_params(spec.params, n_points, K), n_classes)
    if spec.kind == BATCH_KIND:
        return BatchLearner(n_classes, **spec.params)
    return BaselineLearner(BaselineConfig(BaselineKind(spec.kind), **spec.params), n_classes, d)


# ---------------------------------------------------------------------------
# metrics and regret


def batch_accuracy(y: np.ndarray, pred: np.ndarray) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(y)))


def batch_logloss(y: np.ndarray, proba: np.ndarray) -> float:
    """Mean cross-entropy of the true class, probabilities clamped away from 0."""
    p = np.clip(proba[np.arange(len(y)), np.asarray(y)], PROBA_CLAMP, 1.0)
    return float(-np.mean(np.log(p)))


@dataclass
class RegretTracker:
    """Accumulates per-batch online losses; the comparator is fitted afterwards."""

    online_losses: List[float] = field(default_factory=list)
    comparator_losses: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return len(self.online_losses)

    @property
    def cumulative_online_loss(self) -> float:
        return float(np.sum(self.online_losses))

    @property
    def comparator_loss(self) -> float:
        if self.comparator_losses is None:
            raise ConfigError("comparator not fitted yet")
        return float(np.sum(self.comparator_losses))

    @property
    def R_T(self) -> float:
        return self.cumulative_online_loss - self.comparator_loss

    def add(self, loss: float):
        self.online_losses.append(float(loss))

    def finalize(self, comparator_losses: Sequence[float]):
        c = np.asarray(comparator_losses, dtype=float)
        if c.size != self.T:
            raise ConfigError(f"{c.size} comparator losses for {self.T} online batches")
        self.comparator_losses = c

    def curve(self) -> Tuple[np.ndarray, np.ndarray]:
        """``R_t`` and ``R_t / t`` for t = 1..T."""
        r = np.cumsum(self.online_losses) - np.cumsum(self.comparator_losses)
        return r, r / np.arange(1, self.T + 1)


def hindsight_comparator(X: np.ndarray, y: np.ndarray, n_classes: int, C: float = 1e4, max_norm: Optional[float] = None):
    """Batch logistic fit on the full stream (weak regularization).

    With ``max_norm`` the fit is the best one whose coefficient vector has
    norm at most ``max_norm`` (binary only). The norm grows monotonically
    with the inverse penalty C, so C is found by bisection in log space.
    """
    comp = BatchLearner(n_classes, C=C).fit(X, y)
    if max_norm is None:
        return comp
    if n_classes != 2:
        raise ConfigError("a norm-bounded comparator needs a binary stream")
    if max_norm <= 0:
        raise ConfigError("max_norm must be positive")
    if np.linalg.norm(comp.clf.coef_) <= max_norm:
        return comp
    lo, hi = -8.0, float(np.log10(C))
    for _ in range(COMPARATOR_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(BatchLearner(2, C=10.0**mid).fit(X, y).clf.coef_) > max_norm:
            hi = mid
        else:
            lo = mid
    return BatchLearner(2, C=10.0**lo).fit(X, y)


def comparator_batch_losses(comparator, batches: Sequence[MiniBatch]) -> List[float]:
    return [batch_logloss(b.labels, comparator.predict_proba(b.features)) for b in batches]


def track_regret(
    tracker: RegretTracker,
    X: np.ndarray,
    y: np.ndarray,
    batches: Sequence[MiniBatch],
    n_classes: int,
    max_norm: Optional[float] = None,
):
    """Fit the hindsight comparator on the whole stream and close the tracker."""
    comp = hindsight_comparator(X, y, n_classes, max_norm=max_norm)
    tracker.finalize(comparator_batch_losses(comp, batches))
    return tracker.curve()


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    learners: List[LearnerSpec]
    stream: Union[datagen.StreamSpec, str, None] = None
    K: int = 50
    folds: int = 5
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output: Optional[str] = None
    n_jobs: int = 1
    regret: bool = True

    def __post_init__(self):
        if not self.learners:
            raise ConfigError("at least one learner is required")
        if self.K < 1:
            raise ConfigError("batch size K must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        names = [l.name for l in self.learners]
        if len(set(names)) != len(names):
            raise ConfigError("learner names must be unique")

    def load_stream(self, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        if isinstance(self.stream, datagen.StreamSpec):
            return datagen.generate(self.stream.with_seed(seed))
        if isinstance(self.stream, (str, Path)):
            return datagen.read_csv(self.stream)
        raise ConfigError("no stream configured")

    def to_dict(self) -> dict:
        stream = self.stream.to_dict() if isinstance(self.stream, datagen.StreamSpec) else self.stream
        return {
            "stream": stream,
            "learners": [asdict(l) for l in self.learners],
            "K": self.K,
            "folds": self.folds,
            "seeds": list(self.seeds),
            "output": self.output,
            "n_jobs": self.n_jobs,
            "regret": self.regret,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        stream = d.get("stream")
        if isinstance(stream, dict):
            stream = datagen.preset(stream["preset"], 0) if "preset" in stream else datagen.StreamSpec.from_dict(stream)
        elif isinstance(stream, str) and stream.upper() in datagen.PRESETS:
            stream = datagen.preset(stream)
        return cls(
            learners=[LearnerSpec.from_dict(l) for l in d.get("learners", [])],
            stream=stream,
            K=int(d.get("K", 50)),
            folds=int(d.get("folds", 5)),
            seeds=[int(s) for s in d.get("seeds", [0, 1, 2, 3, 4])],
            output=d.get("output"),
            n_jobs=int(d.get("n_jobs", 1)),
            regret=bool(d.get("regret", True)),
        )


@dataclass
class BatchRecord:
    learner: str
    seed: int
    t: int
    kpi_acc: float
    kpi_loss: float
    verdict: str
    alpha: Optional[float]
    cum_regret: Optional[float]


@dataclass
class RunSummary:
    learner: str
    seed: int
    final_accuracy: float
    mean_accuracy: float
    seconds: float


@dataclass
class RunResult:
    records: List[BatchRecord]
    summaries: List[RunSummary]

    def accuracy_curve(self, learner: str, seed: int) -> np.ndarray:
        return np.array([r.kpi_acc for r in self.records if r.learner == learner and r.seed == seed])

    def mean_curve(self, learner: str) -> np.ndarray:
        """Per-batch accuracy averaged across seeds."""
        seeds = sorted({r.seed for r in self.records if r.learner == learner})
        return np.mean([self.accuracy_curve(learner, s) for s in seeds], axis=0)

    def verdicts(self, learner: str, seed: int) -> List[str]:
        return [r.verdict for r in self.records if r.learner == learner and r.seed == seed]


# ---------------------------------------------------------------------------
# prequential evaluation


def prequential(learner, batches: Sequence[MiniBatch]):
    """Test-then-train over the batches; yields per-batch metrics.

    Each batch is scored before the learner sees its labels.
    """
    for t, b in enumerate(batches):
        proba = learner.predict_proba(b.features)
        pred = learner.predict(b.features) if hasattr(learner, "predict") else np.argmax(proba, axis=1)
        acc = batch_accuracy(b.labels, pred)
        loss = batch_logloss(b.labels, proba)
        learner.partial_fit(b.features, b.labels)
        verdict = getattr(learner, "verdict", None)
        yield t, acc, loss, (verdict.kind.value if verdict is not None else ""), getattr(learner, "alpha", None)


def _run_one(args) -> Tuple[List[BatchRecord], RunSummary]:
    cfg, spec, seed = args
    X, y = cfg.load_stream(seed)
    n_classes = int(max(2, y.max() + 1))
    batches = list(datagen.batch_iter(X, y, cfg.K))
    learner = make_learner(spec, n_classes, X.shape[1], len(y), cfg.K)
    tracker = RegretTracker()
    rows = []
    start = time.perf_counter()
    for t, acc, loss, verdict, alpha in prequential(learner, batches):
        tracker.add(loss)
        rows.append([t, acc, loss, verdict, alpha])
    seconds = time.perf_counter() - start
    if cfg.regret:
        r, _ = track_regret(tracker, X, y, batches, n_classes)
    else:
        r = [None] * len(rows)
    records = [
        BatchRecord(spec.name, seed, t, acc, loss, verdict, alpha, None if ri is None else float(ri))
        for (t, acc, loss, verdict, alpha), ri in zip(rows, r)
    ]
    accs = [row[1] for row in rows]
    return records, RunSummary(spec.name, seed, accs[-1], float(np.mean(accs)), seconds)


def run_prequential(cfg: RunConfig) -> RunResult:
    offline = [spec.name for spec in cfg.learners if spec.kind == BATCH_KIND]
    if offline:
        raise ConfigError(f"batch learners {offline} have no prequential run; use k-fold or bench")
    jobs = [(cfg, spec, seed) for spec in cfg.learners for seed in cfg.seeds]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as ex:
            outs = list(ex.map(_run_one, jobs))
    else:
        outs = [_run_one(j) for j in jobs]
    # merge by key so parallel arrival order never matters
    order = {spec.name: i for i, spec in enumerate(cfg.learners)}
    outs.sort(key=lambda o: (order[o[1].learner], o[1].seed))
    records = [rec for recs, _ in outs for rec in recs]
    summaries = [s for _, s in outs]
    if cfg.output:
        write_results(cfg.output, cfg, records, summaries)
    return RunResult(records, summaries)


# ---------------------------------------------------------------------------
# k-fold evaluation


def run_kfold(cfg: RunConfig) -> Dict[str, float]:
    """Mean test accuracy per learner over stratified folds and seeds.

    Online learners stream the training fold once in order, in batches of K.
    """
    scores: Dict[str, List[float]] = {spec.name: [] for spec in cfg.learners}
    for seed in cfg.seeds:
        X, y = cfg.load_stream(seed)
        if cfg.folds > len(y):
            raise ConfigError(f"{cfg.folds} folds for {len(y)} samples")
        n_classes = int(max(2, y.max() + 1))
        skf = StratifiedKFold(n_splits=cfg.folds, shuffle=True, random_state=seed)
        for train, test in skf.split(X, y):
            # keep stream order inside the training fold
            train = np.sort(train)
            for spec in cfg.learners:
                learner = make_learner(spec, n_classes, X.shape[1], len(train), cfg.K)
                if spec.kind == BATCH_KIND:
                    learner.fit(X[train], y[train])
                else:
                    for b in datagen.batch_iter(X[train], y[train], cfg.K):
                        learner.partial_fit(b.features, b.labels)
                scores[spec.name].append(batch_accuracy(y[test], _predict(learner, X[test])))
    return {name: float(np.mean(v)) for name, v in scores.items()}


# ---------------------------------------------------------------------------
# runtime


def measure_runtime(cfg: RunConfig, repeats: int = 3, seed: Optional[int] = None) -> Dict[str, float]:
    """Median training seconds per learner; generation and IO are excluded."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    X, y = cfg.load_stream(cfg.seeds[0] if seed is None else seed)
    if len(y) == 0:
        raise EmptyInput("stream holds no samples")
    n_classes = int(max(2, y.max() + 1))
    batches = list(datagen.batch_iter(X, y, cfg.K))
    out = {}
    for spec in cfg.learners:
        times = []
        for _ in range(repeats):
            learner = make_learner(spec, n_classes, X.shape[1], len(y), cfg.K)
            start = time.perf_counter()
            if spec.kind == BATCH_KIND:
                learner.fit(X, y)
            else:
                for b in batches:
                    learner.partial_fit(b.features, b.labels)
            times.append(time.perf_counter() - start)
        out[spec.name] = statistics.median(times)
    return out


# ---------------------------------------------------------------------------
# output


def write_results(out_dir, cfg: RunConfig, records: Sequence[BatchRecord], summaries: Sequence[RunSummary]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([
                r.learner, r.seed, r.t, format(r.kpi_acc, ".17g"), format(r.kpi_loss, ".17g"), r.verdict,
                "" if r.alpha is None else format(r.alpha, ".17g"),
                "" if r.cum_regret is None else format(r.cum_regret, ".17g"),
            ])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["learner", "seed", "final_accuracy", "mean_accuracy", "seconds"])
        for s in summaries:
            w.writerow([s.learner, s.seed, s.final_accuracy, s.mean_accuracy, s.seconds])
    with open(out / "mean_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["learner", "t", "mean_kpi_acc"])
        res = RunResult(list(records), list(summaries))
        for spec in cfg.learners:
            for t, a in enumerate(res.mean_curve(spec.name)):
                w.writerow([spec.name, t, format(a, ".17g")])
    manifest = {"config": cfg.to_dict(), "files": ["records.csv", "summary.csv", "mean_curves.csv"]}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
