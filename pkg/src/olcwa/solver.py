"""Mini-batch logistic regression and the two built-in KPIs.

The fit is plain full-batch gradient descent with an Armijo backtracking line
search. Descent runs in standardized feature coordinates (an affine change of
variables), which leaves the objective and its minimizer unchanged but keeps
the iteration count sane on uncentered data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DegenerateBatch, DimensionMismatch, EmptyBatch
from .geometry import ParamVector

PROBA_CLAMP = 1e-15
_P_LO = np.finfo(float).tiny
_P_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class MiniBatch:
    """One stream increment: an ``n x d`` feature matrix and ``n`` integer labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.labels).reshape(-1)
        if X.ndim != 2:
            raise DimensionMismatch("features must be a 2-D array")
        if X.shape[0] == 0:
            raise EmptyBatch("mini-batch holds no samples")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.isfinite(y.astype(float))) or np.any(y != np.round(y)):
                raise ValueError("labels must be integers")
            y = y.astype(int)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def is_binary(self) -> bool:
        return bool(np.all((self.labels == 0) | (self.labels == 1)))

    def relabel(self, target) -> "MiniBatch":
        """One-vs-rest view: ``target`` becomes 1, every other class 0."""
        return MiniBatch(self.features, (self.labels == target).astype(int))


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200
    step_size: float = 4.0
    grad_tol: float = 1e-6
    l2_reg: float = 1e-4
    armijo_c: float = 1e-4
    shrink: float = 0.5

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be >= 0")


@dataclass
class SolveResult:
    w: np.ndarray  # augmented [V; b]
    n_iter: int
    converged: bool
    history: List[float] = field(default_factory=list)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log1pexp(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def nll_objective(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2_reg: float) -> float:
    """Mean negative log-likelihood plus ``l2_reg/2 * ||w||^2`` (bias included)."""
    z = X @ w[:-1] + w[-1]
    data = float(np.mean(_log1pexp(z) - y * z))
    return data + 0.5 * l2_reg * float(w @ w)


def nll_gradient(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2_reg: float) -> np.ndarray:
    z = X @ w[:-1] + w[-1]
    r = sigmoid(z) - y
    n = X.shape[0]
    g = np.empty_like(w)
    g[:-1] = X.T @ r / n
    g[-1] = r.sum() / n
    return g + l2_reg * w


def minimize_nll(
    X: np.ndarray,
    y: np.ndarray,
    cfg: SolverConfig = SolverConfig(),
    w0: Optional[np.ndarray] = None,
) -> SolveResult:
    """Regularized logistic fit returning the raw augmented vector.

    Unlike :func:`fit_logistic` this accepts solutions with a zero norm
    vector (e.g. all-zero features), which callers may want to inspect.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if np.all(y == y[0]) and cfg.l2_reg == 0:
        raise DegenerateBatch("single-class batch has no finite optimum without l2_reg")

    # W = T u with V = u_V / s and b = u_b - (m / s) . u_V
    m = X.mean(axis=0)
    s = X.std(axis=0)
    s[s < 1e-12] = 1.0
    Z = (X - m) / s
    ms = m / s

    def to_w(u):
        w = np.empty_like(u)
        w[:-1] = u[:-1] / s
        w[-1] = u[-1] - float(ms @ u[:-1])
        return w

    def to_u(w):
        u = np.empty_like(w)
        u[:-1] = w[:-1] * s
        u[-1] = w[-1] + float(m @ w[:-1])
        return u

    def objective(u):
        w = to_w(u)
        z = Z @ u[:-1] + u[-1]
        return float(np.mean(_log1pexp(z) - y * z)) + 0.5 * cfg.l2_reg * float(w @ w)

    def gradients(u):
        w = to_w(u)
        z = Z @ u[:-1] + u[-1]
        r = sigmoid(z) - y
        gu = np.empty_like(u)
        gu[:-1] = Z.T @ r / n
        gu[-1] = r.sum() / n
        gw_pen = cfg.l2_reg * w
        # chain rule for the penalty through W = T u
        gu[:-1] += gw_pen[:-1] / s - ms * gw_pen[-1]
        gu[-1] += gw_pen[-1]
        # gradient with respect to W itself, for the stopping rule
        gw = np.empty_like(u)
        gw[:-1] = X.T @ r / n + gw_pen[:-1]
        gw[-1] = r.sum() / n + gw_pen[-1]
        return gu, gw

    if w0 is None:
        u = np.zeros(d + 1)
    else:
        w0 = np.asarray(w0, dtype=float).reshape(-1)
        if w0.size != d + 1:
            raise DimensionMismatch(f"warm start has {w0.size - 1} weights, batch has {d} features")
        u = to_u(w0)

    f = objective(u)
    history = [f]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gu, gw = gradients(u)
        if np.max(np.abs(gw)) <= cfg.grad_tol:
            converged = True
            it -= 1
            break
        gg = float(gu @ gu)
        eta = cfg.step_size
        while True:
            u_new = u - eta * gu
            f_new = objective(u_new)
            if f_new <= f - cfg.armijo_c * eta * gg:
                break
            eta *= cfg.shrink
            if eta < 1e-20:
                u_new, f_new = u, f
                break
        if f_new == f and np.array_equal(u_new, u):
            break
        u, f = u_new, f_new
        history.append(f)
    else:
        _, gw = gradients(u)
        converged = bool(np.max(np.abs(gw)) <= cfg.grad_tol)
    return SolveResult(to_w(u), it, converged, history)


def _as_binary(batch: MiniBatch):
    if not batch.is_binary():
        raise ValueError("logistic fit needs labels in {0, 1}")
    return batch.features, batch.labels.astype(float)


def fit_logistic(
    batch: MiniBatch,
    cfg: SolverConfig = SolverConfig(),
    warm_start: Optional[ParamVector] = None,
) -> ParamVector:
    X, y = _as_binary(batch)
    w0 = None
    if warm_start is not None:
        if warm_start.dim != batch.dim:
            raise DimensionMismatch(f"warm start has {warm_start.dim} weights, batch has {batch.dim} features")
        w0 = warm_start.as_array()
    res = minimize_nll(X, y, cfg, w0)
    return ParamVector.from_array(res.w)


def predict_proba(w: ParamVector, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == w.dim else X.reshape(-1, 1)
    if X.shape[1] != w.dim:
        raise DimensionMismatch(f"model expects {w.dim} features, got {X.shape[1]}")
    p = sigmoid(X @ w.weights + w.bias)
    return np.clip(p, _P_LO, _P_HI)


def accuracy(y_true: np.ndarray, proba: np.ndarray) -> float:
    y_true = np.asarray(y_true)
    if y_true.size == 0:
        raise EmptyBatch("accuracy of an empty batch")
    return float(np.mean((np.asarray(proba) >= 0.5).astype(int) == y_true))


def logloss(y_true: np.ndarray, proba: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=float)
    if y_true.size == 0:
        raise EmptyBatch("log loss of an empty batch")
    p = np.clip(np.asarray(proba, dtype=float), PROBA_CLAMP, 1.0 - PROBA_CLAMP)
    return float(-np.mean(y_true * np.log(p) + (1.0 - y_true) * np.log1p(-p)))


def kpi_accuracy(w: ParamVector, batch: MiniBatch) -> float:
    return accuracy(batch.labels, predict_proba(w, batch.features))


def kpi_logloss(w: ParamVector, batch: MiniBatch) -> float:
    return logloss(batch.labels, predict_proba(w, batch.features))
