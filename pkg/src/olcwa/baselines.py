"""Classical online binary classifiers used as comparison points.

All learners update one sample at a time and take labels in {0, 1}.
Perceptron and passive-aggressive work on {-1, +1} internally. Scores of
exactly zero (and probabilities of exactly 0.5) predict class 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .solver import sigmoid


class BaselineKind(Enum):
    PLA = "pla"
    LMS = "lms"
    OLR = "olr"
    ONB = "onb"
    PA = "pa"


_DEFAULT_RATE = {BaselineKind.LMS: 0.01, BaselineKind.OLR: 0.1}


@dataclass(frozen=True)
class BaselineConfig:
    kind: BaselineKind
    learning_rate: Optional[float] = None
    C: float = 0.1
    variance_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "kind", BaselineKind(self.kind))
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be > 0")

    @property
    def rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return _DEFAULT_RATE.get(self.kind, 0.1)


class _Linear:
    """Shared state for the linear learners: weights plus a separate bias."""

    def __init__(self, d: int, cfg: BaselineConfig):
        if d < 1:
            raise ValueError("need at least one feature")
        self.cfg = cfg
        self.w = np.zeros(d)
        self.b = 0.0

    @property
    def dim(self) -> int:
        return self.w.size

    def decision(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) >= 0).astype(int)

    def partial_fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        for xi, yi in zip(X, np.asarray(y).reshape(-1)):
            self.update(xi, int(yi))
        return self


class Perceptron(_Linear):
    def update(self, x: np.ndarray, y: int):
        s = 1.0 if y == 1 else -1.0
        pred = 1.0 if float(x @ self.w) + self.b >= 0 else -1.0
        if pred != s:
            self.w += s * x
            self.b += s


class LMS(_Linear):
    """Widrow-Hoff rule on {0, 1} targets; predicts 1 when the output >= 0.5."""

    def update(self, x: np.ndarray, y: int):
        err = y - (float(x @ self.w) + self.b)
        step = self.cfg.rate * err
        self.w += step * x
        self.b += step

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) >= 0.5).astype(int)


class OnlineLogistic(_Linear):
    def update(self, x: np.ndarray, y: int):
        p = 1.0 / (1.0 + math.exp(-np.clip(float(x @ self.w) + self.b, -500, 500)))
        g = p - y
        self.w -= self.cfg.rate * g * x
        self.b -= self.cfg.rate * g

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision(X))


class PassiveAggressive(_Linear):
    """PA-I: hinge-loss step clipped at C. The bias acts as a constant feature."""

    last_step: float = 0.0

    def update(self, x: np.ndarray, y: int):
        s = 1.0 if y == 1 else -1.0
        loss = max(0.0, 1.0 - s * (float(x @ self.w) + self.b))
        if loss == 0.0:
            self.last_step = 0.0
            return
        sq = float(x @ x) + 1.0
        step = min(self.cfg.C, loss / sq)
        self.w += step * s * x
        self.b += step * s
        self.last_step = step


class OnlineNaiveBayes:
    """Gaussian naive Bayes with Welford running moments per class."""

    def __init__(self, d: int, cfg: BaselineConfig):
        if d < 1:
            raise ValueError("need at least one feature")
        self.cfg = cfg
        self.count = np.zeros(2)
        self.mean = np.zeros((2, d))
        self.m2 = np.zeros((2, d))

    @property
    def dim(self) -> int:
        return self.mean.shape[1]

    def update(self, x: np.ndarray, y: int):
        c = int(y)
        self.count[c] += 1
        delta = x - self.mean[c]
        self.mean[c] += delta / self.count[c]
        self.m2[c] += delta * (x - self.mean[c])

    def partial_fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        for xi, yi in zip(X, np.asarray(y).reshape(-1)):
            self.update(xi, int(yi))
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_total = self.count.sum()
        jll = np.full((X.shape[0], 2), -np.inf)
        if n_total == 0:
            return np.zeros((X.shape[0], 2))
        for c in range(2):
            if self.count[c] == 0:
                continue
            var = self.m2[c] / self.count[c] + self.cfg.variance_floor
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + (X - self.mean[c]) ** 2 / var, axis=1)
            jll[:, c] = math.log(self.count[c] / n_total) + ll
        return jll

    def predict_proba(self, X) -> np.ndarray:
        """Posterior probability of class 1."""
        jll = self.joint_log_likelihood(X)
        m = jll.max(axis=1, keepdims=True)
        e = np.exp(jll - m)
        post = e / e.sum(axis=1, keepdims=True)
        return post[:, 1]

    def predict_proba_both(self, X) -> np.ndarray:
        p1 = self.predict_proba(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)


_CLASSES = {
    BaselineKind.PLA: Perceptron,
    BaselineKind.LMS: LMS,
    BaselineKind.OLR: OnlineLogistic,
    BaselineKind.ONB: OnlineNaiveBayes,
    BaselineKind.PA: PassiveAggressive,
}


def baseline_init(kind, d: int, cfg: Optional[BaselineConfig] = None):
    kind = BaselineKind(kind)
    if cfg is None:
        cfg = BaselineConfig(kind)
    elif cfg.kind is not kind:
        raise ValueError(f"config is for {cfg.kind.value}, asked for {kind.value}")
    return _CLASSES[kind](d, cfg)


def baseline_update(model, x, y: int):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dim:
        raise ValueError(f"model expects {model.dim} features, got {x.size}")
    if y not in (0, 1):
        raise ValueError(f"labels must be 0 or 1, got {y}")
    model.update(x, int(y))


def baseline_predict(model, x) -> int:
    return int(model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])
