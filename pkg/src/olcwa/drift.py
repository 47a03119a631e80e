"""KPI-window drift detection with CFAR-calibrated limits.

Each tracked KPI keeps a bounded FIFO window. The newest reading is tested
against baseline statistics computed from the older readings; the outer limit
sits ``tau = z * sigma`` beyond the safe band, with ``z`` chosen from a
target false-alarm probability.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInput, InsufficientHistory, NotDrifting, OutOfDomain

DEFAULT_KWS = 31
DEFAULT_ZETA = 0.005
DEFAULT_RHO = 0.01
DEFAULT_N_BINS = 10
ALPHA_NEAR_SAFE = 0.55
ALPHA_NEAR_LIMIT = 0.95
ALPHA_ABRUPT = 1.0


class KpiOrientation(Enum):
    HIGHER_IS_BETTER = "higher"
    LOWER_IS_BETTER = "lower"


# ---------------------------------------------------------------------------
# inverse normal CDF

# Acklam's rational approximation coefficients
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _acklam(q: float) -> float:
    if q < _P_LOW:
        r = math.sqrt(-2.0 * math.log(q))
        return (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0)
    if q > 1.0 - _P_LOW:
        r = math.sqrt(-2.0 * math.log1p(-q))
        return -(((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0)
    s = q - 0.5
    r = s * s
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


@lru_cache(maxsize=256)
def inv_norm_cdf(q: float) -> float:
    """Standard normal quantile: rational approximation plus one Halley step."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise OutOfDomain(f"quantile level must lie in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    x = _acklam(q)
    # Halley refinement against the erfc-based CDF
    if q < 0.5:
        e = norm_cdf(x) - q
    else:
        # upper-tail form avoids cancellation near q = 1
        e = (1.0 - q) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


# ---------------------------------------------------------------------------
# KPI window


def auto_window_size(n_points: int, batch_size: int, gamma: float = 0.05, lb: int = 8, ub: int = 31) -> int:
    """Window size ``clamp(round(n_points / batch_size * gamma), lb, ub)``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if lb < 3 or ub < lb:
        raise ValueError("need 3 <= lb <= ub")
    raw = int(round(n_points / batch_size * gamma))
    return max(lb, min(ub, raw))


class KpiWindow:
    """Bounded rolling sequence of KPI readings.

    Running sums (about a fixed shift, refreshed periodically) make
    calibration O(1) regardless of capacity.
    """

    def __init__(
        self,
        capacity: int = DEFAULT_KWS,
        orientation: KpiOrientation = KpiOrientation.HIGHER_IS_BETTER,
        zeta: float = DEFAULT_ZETA,
        rho: float = DEFAULT_RHO,
    ):
        if capacity < 3:
            raise ValueError("window capacity must be >= 3 (two baseline readings plus the candidate)")
        if zeta < 0:
            raise ValueError("zeta must be >= 0")
        if not 0.0 < rho < 1.0:
            raise OutOfDomain(f"rho must lie in (0, 1), got {rho}")
        self.capacity = int(capacity)
        self.orientation = orientation
        self.zeta = float(zeta)
        self.rho = float(rho)
        self.z = inv_norm_cdf(1.0 - self.rho)
        self._buf = deque(maxlen=self.capacity)
        self._shift = None
        self._s1 = 0.0
        self._s2 = 0.0
        self._ops = 0
        self._evicted = None

    def __len__(self):
        return len(self._buf)

    @property
    def readings(self) -> tuple:
        return tuple(self._buf)

    def is_full(self) -> bool:
        return len(self._buf) >= self.capacity

    def newest(self) -> float:
        return self._buf[-1]

    def _resum(self):
        if not self._buf:
            self._shift = None
            self._s1 = self._s2 = 0.0
            return
        self._shift = self._buf[0]
        arr = np.fromiter(self._buf, dtype=float) - self._shift
        self._s1 = float(arr.sum())
        self._s2 = float(arr @ arr)

    def _tick(self):
        self._ops += 1
        if self._ops >= self.capacity:
            self._ops = 0
            self._resum()

    def append(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("KPI readings must be finite")
        if self._shift is None:
            self._shift = value
        self._evicted = None
        if len(self._buf) == self.capacity:
            self._evicted = self._buf[0]
            old = self._evicted - self._shift
            self._s1 -= old
            self._s2 -= old * old
        self._buf.append(value)
        v = value - self._shift
        self._s1 += v
        self._s2 += v * v
        self._tick()

    def remove_newest(self) -> float:
        """Drop the newest reading, restoring any reading its append evicted."""
        value = self._buf.pop()
        v = value - self._shift
        self._s1 -= v
        self._s2 -= v * v
        if self._evicted is not None:
            self._buf.appendleft(self._evicted)
            old = self._evicted - self._shift
            self._s1 += old
            self._s2 += old * old
            self._evicted = None
        self._tick()
        return value

    def baseline_stats(self):
        """Mean and population std of every reading except the newest."""
        n = len(self._buf) - 1
        if n < 2:
            raise InsufficientHistory(f"need at least 2 baseline readings, have {max(n, 0)}")
        v = self._buf[-1] - self._shift
        s1 = self._s1 - v
        s2 = self._s2 - v * v
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0)
        return self._shift + mean, math.sqrt(var)


@dataclass(frozen=True)
class Calibration:
    mu: float
    sigma: float
    z: float
    tau: float
    low: float
    high: float


def calibration_from_stats(mu: float, sigma: float, zeta: float, rho: float) -> Calibration:
    z = inv_norm_cdf(1.0 - rho)
    tau = max(z * sigma, 0.0)
    return Calibration(mu, sigma, z, tau, mu - zeta - tau, mu + zeta + tau)


def calibrate(window: KpiWindow) -> Calibration:
    mu, sigma = window.baseline_stats()
    tau = max(window.z * sigma, 0.0)
    return Calibration(mu, sigma, window.z, tau, mu - window.zeta - tau, mu + window.zeta + tau)


# ---------------------------------------------------------------------------
# verdicts


class DriftKind(Enum):
    STABLE = "stable"
    IMPROVEMENT = "improvement"
    INCREMENTAL = "incremental"
    ABRUPT = "abrupt"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]


_SEVERITY = {
    DriftKind.STABLE: 0,
    DriftKind.IMPROVEMENT: 0,
    DriftKind.INCREMENTAL: 1,
    DriftKind.ABRUPT: 2,
}


@dataclass(frozen=True)
class DriftVerdict:
    kind: DriftKind
    dm: Optional[float] = None

    @property
    def is_drift(self) -> bool:
        return self.kind in (DriftKind.INCREMENTAL, DriftKind.ABRUPT)

    def __str__(self):
        return self.kind.value


STABLE = DriftVerdict(DriftKind.STABLE)


def classify(cal: Calibration, current: float, orientation: KpiOrientation, zeta: float) -> DriftVerdict:
    if orientation is KpiOrientation.HIGHER_IS_BETTER:
        dm = cal.mu - current
    else:
        dm = current - cal.mu
    if dm < -zeta:
        return DriftVerdict(DriftKind.IMPROVEMENT, dm)
    if dm <= zeta:
        return DriftVerdict(DriftKind.STABLE, dm)
    if dm <= zeta + cal.tau:
        return DriftVerdict(DriftKind.INCREMENTAL, dm)
    return DriftVerdict(DriftKind.ABRUPT, dm)


# ---------------------------------------------------------------------------
# scale map


@dataclass(frozen=True)
class ScaleMap:
    """Lookup from drift magnitude to smoothing factor.

    ``upper_bounds[j]`` is the inclusive upper edge of bin ``j`` over
    ``(zeta, zeta + tau]``; ``alphas[j]`` is its smoothing factor.
    """

    lower: float
    upper_bounds: tuple
    alphas: tuple
    alpha_abrupt: float = ALPHA_ABRUPT

    @property
    def n_bins(self) -> int:
        return len(self.alphas)

    def lookup(self, dm: float) -> float:
        if dm > (self.upper_bounds[-1] if self.upper_bounds else self.lower):
            return self.alpha_abrupt
        if dm <= self.lower:
            raise NotDrifting(f"drift magnitude {dm:g} lies inside the safe band")
        j = int(np.searchsorted(self.upper_bounds, dm, side="left"))
        return self.alphas[min(j, self.n_bins - 1)]


def build_scale_map(cal: Calibration, zeta: float, n_bins: int = DEFAULT_N_BINS) -> ScaleMap:
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if cal.tau <= 0:
        return ScaleMap(zeta, (), (), ALPHA_ABRUPT)
    width = ALPHA_NEAR_LIMIT - ALPHA_NEAR_SAFE
    bounds = [zeta + cal.tau * j / n_bins for j in range(1, n_bins)]
    bounds.append(zeta + cal.tau)
    alphas = [ALPHA_NEAR_SAFE + width * j / n_bins for j in range(1, n_bins + 1)]
    return ScaleMap(zeta, tuple(bounds), tuple(alphas), ALPHA_ABRUPT)


def tune_alpha(scale_map: ScaleMap, verdict: DriftVerdict) -> float:
    if verdict.kind is DriftKind.ABRUPT:
        return scale_map.alpha_abrupt
    if verdict.kind is DriftKind.INCREMENTAL:
        return scale_map.lookup(verdict.dm)
    raise NotDrifting(f"no smoothing factor for a {verdict.kind.value} verdict")


# ---------------------------------------------------------------------------
# multi-KPI voting


def vote(verdicts: Sequence[DriftVerdict]) -> DriftVerdict:
    """Majority vote over severity classes; ties go to the milder class."""
    if not verdicts:
        raise EmptyInput("vote needs at least one verdict")
    counts = {0: 0, 1: 0, 2: 0}
    for v in verdicts:
        counts[v.kind.severity] += 1
    best = max(counts.values())
    winner = min(sev for sev, c in counts.items() if c == best)
    agreeing = [v for v in verdicts if v.kind.severity == winner]
    if winner == 0:
        n_imp = sum(v.kind is DriftKind.IMPROVEMENT for v in agreeing)
        kind = DriftKind.IMPROVEMENT if n_imp > len(agreeing) - n_imp else DriftKind.STABLE
        dms = [v.dm for v in agreeing if v.kind is kind and v.dm is not None]
        return DriftVerdict(kind, float(np.median(dms)) if dms else None)
    kind = DriftKind.INCREMENTAL if winner == 1 else DriftKind.ABRUPT
    return DriftVerdict(kind, float(np.median([v.dm for v in agreeing])))
