"""Hyperplane algebra for the weighted-average update.

A hyperplane is stored as ``V . x + b = 0``. Everything here is a pure
function of its inputs; no state is kept between calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, SingularSystem, ZeroVector

EPS_NORM = 1e-12
EPS_PARALLEL = 1e-9
COINCIDENT_OFFSET_TOL = 1e-9


@dataclass(frozen=True)
class ParamVector:
    """Augmented weight vector ``W = [V; b]`` of a linear decision boundary."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        b = float(self.bias)
        if w.size < 1:
            raise DimensionMismatch("a hyperplane needs at least one feature weight")
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ValueError("hyperplane parameters must be finite")
        if np.linalg.norm(w) <= EPS_NORM:
            raise ZeroVector("weights have zero norm; not a valid decision boundary")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return self.weights.size

    def as_array(self) -> np.ndarray:
        return np.append(self.weights, self.bias)

    @classmethod
    def from_array(cls, w: np.ndarray) -> "ParamVector":
        w = np.asarray(w, dtype=float).reshape(-1)
        return cls(w[:-1], w[-1])

    def offset(self) -> float:
        """Signed offset ``b / ||V||`` of the plane along its unit normal."""
        return self.bias / float(np.linalg.norm(self.weights))

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.weights.tobytes(), self.bias))


class Relation(Enum):
    INTERSECTING = "intersecting"
    PARALLEL = "parallel"
    COINCIDENT = "coincident"


@dataclass(frozen=True)
class PlaneRelation:
    kind: Relation
    point: Optional[np.ndarray] = None


def _check_dims(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def extract_direction(w: ParamVector) -> np.ndarray:
    """Return the norm vector V of ``w`` (unnormalized)."""
    return w.weights.copy()


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if not n > EPS_NORM:
        raise ZeroVector(f"cannot normalize a vector of norm {n:g}")
    return v / n


def blend_directions(v_base: np.ndarray, v_inc: np.ndarray, alpha: float) -> np.ndarray:
    """EWMA of two unit directions: ``(1 - alpha) * v_base + alpha * v_inc``.

    The result is deliberately left unnormalized.
    """
    v_base = np.asarray(v_base, dtype=float)
    v_inc = np.asarray(v_inc, dtype=float)
    _check_dims(v_base, v_inc)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return v_inc.copy()
    return (1.0 - alpha) * v_base + alpha * v_inc


def find_intersection_point(w1: ParamVector, w2: ParamVector) -> np.ndarray:
    """Minimum-norm point lying on both hyperplanes.

    The two normalized rows are orthonormalized (Gram-Schmidt, applied twice)
    so the solution lives in their span, which makes it the minimum-norm
    solution of the underdetermined 2 x d system. Working in the orthonormal
    basis keeps the residual small even when the planes are close to
    parallel.
    """
    _check_dims(w1.weights, w2.weights)
    n1 = float(np.linalg.norm(w1.weights))
    n2 = float(np.linalg.norm(w2.weights))
    u1 = w1.weights / n1
    u2 = w2.weights / n2
    r1 = -w1.bias / n1
    r2 = -w2.bias / n2

    c = float(u1 @ u2)
    q = u2 - c * u1
    q = q - float(u1 @ q) * u1
    s = float(np.linalg.norm(q))
    if s <= 1e-14:
        raise SingularSystem("hyperplanes are numerically parallel")
    q = q / s
    # u2 = c*u1 + (u2 . q)*q; the projection is recomputed after normalizing
    a2 = (r2 - c * r1) / float(u2 @ q)
    return r1 * u1 + a2 * q


def relate_planes(w1: ParamVector, w2: ParamVector, eps_parallel: float = EPS_PARALLEL) -> PlaneRelation:
    _check_dims(w1.weights, w2.weights)
    u1 = normalize(w1.weights)
    u2 = normalize(w2.weights)
    cos = float(u1 @ u2)
    if abs(cos) >= 1.0 - eps_parallel:
        # orient the second offset to the first normal before comparing
        off1 = w1.offset()
        off2 = w2.offset() * (1.0 if cos > 0 else -1.0)
        if abs(off1 - off2) <= COINCIDENT_OFFSET_TOL:
            return PlaneRelation(Relation.COINCIDENT)
        return PlaneRelation(Relation.PARALLEL)
    try:
        p = find_intersection_point(w1, w2)
    except SingularSystem:
        return PlaneRelation(Relation.PARALLEL)
    return PlaneRelation(Relation.INTERSECTING, p)


def closest_point_to_origin(w: ParamVector) -> np.ndarray:
    v = w.weights
    return -(w.bias / float(v @ v)) * v


def fallback_anchor(w_base: ParamVector, w_inc: ParamVector, alpha: float) -> np.ndarray:
    """Weighted midpoint between two parallel planes.

    Each plane is represented by its point closest to the origin; alpha = 0.5
    gives the geometric midpoint, alpha = 1 lands on the incremental plane.
    """
    _check_dims(w_base.weights, w_inc.weights)
    p_base = closest_point_to_origin(w_base)
    p_inc = closest_point_to_origin(w_inc)
    return (1.0 - alpha) * p_base + alpha * p_inc


def define_hyperplane(v_avg: np.ndarray, p: np.ndarray) -> ParamVector:
    """Hyperplane with normal ``v_avg`` passing through ``p``."""
    v_avg = np.asarray(v_avg, dtype=float)
    p = np.asarray(p, dtype=float)
    _check_dims(v_avg, p)
    if not np.linalg.norm(v_avg) > EPS_NORM:
        raise ZeroVector("averaged direction vanished")
    return ParamVector(v_avg, -float(v_avg @ p))


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in radians, accurate for nearly aligned vectors."""
    u = normalize(u)
    v = normalize(v)
    return float(2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))
