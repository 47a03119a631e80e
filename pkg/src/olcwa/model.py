"""Online classification with a weighted-average hyperplane update.

Per mini-batch the learner fits an incremental hyperplane, blends its unit
normal with the base normal (EWMA with factor alpha), re-anchors the blended
plane at the intersection of the two planes, and then checks the batch KPI
against its rolling window. On detected drift the blend is redone with a
retuned alpha taken from the scale map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import drift as dr
from .errors import DimensionMismatch, OlcwaError, ZeroVector
from .geometry import (
    EPS_PARALLEL,
    ParamVector,
    Relation,
    blend_directions,
    define_hyperplane,
    extract_direction,
    fallback_anchor,
    normalize,
    relate_planes,
)
from .solver import MiniBatch, SolverConfig, fit_logistic, kpi_accuracy, kpi_logloss, predict_proba

logger = logging.getLogger(__name__)

KPI_FUNCTIONS = {
    "accuracy": (kpi_accuracy, dr.KpiOrientation.HIGHER_IS_BETTER),
    "logloss": (kpi_logloss, dr.KpiOrientation.LOWER_IS_BETTER),
}


class AlphaSchedule(Enum):
    """How the resting smoothing factor evolves with the step count."""

    CONSTANT = "constant"
    INV_SQRT = "inv_sqrt"  # alpha0 / sqrt(t)

    def at(self, alpha0: float, t: int) -> float:
        if self is AlphaSchedule.INV_SQRT:
            return alpha0 / np.sqrt(max(t, 1))
        return alpha0


@dataclass(frozen=True)
class OlcwaConfig:
    alpha0: float = 0.5
    rho: float = dr.DEFAULT_RHO
    zeta: Union[float, Mapping[str, float]] = dr.DEFAULT_ZETA
    kpis: Tuple[str, ...] = ("accuracy",)
    window_size: int = dr.DEFAULT_KWS
    solver: SolverConfig = SolverConfig()
    n_bins: int = dr.DEFAULT_N_BINS
    eps_parallel: float = EPS_PARALLEL
    tuner_enabled: bool = True
    warm_start: bool = True
    alpha_schedule: Union[str, AlphaSchedule] = AlphaSchedule.CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "alpha_schedule", AlphaSchedule(self.alpha_schedule))
        if not 0.0 < self.alpha0 <= 1.0:
            raise ValueError(f"alpha0 must lie in (0, 1], got {self.alpha0}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        kpis = tuple(self.kpis)
        if not kpis:
            raise ValueError("at least one KPI is required")
        for k in kpis:
            if k not in KPI_FUNCTIONS:
                raise ValueError(f"unknown KPI {k!r}; choose from {sorted(KPI_FUNCTIONS)}")
        object.__setattr__(self, "kpis", kpis)
        if self.window_size < 3:
            raise ValueError("window_size must be >= 3")

    def zeta_for(self, kpi: str) -> float:
        if isinstance(self.zeta, Mapping):
            return float(self.zeta.get(kpi, dr.DEFAULT_ZETA))
        return float(self.zeta)


@dataclass
class StepReport:
    t: int
    kpi_values: Dict[str, float]
    verdict: dr.DriftVerdict
    alpha_applied: float
    relation: Relation
    w_inc: Optional[ParamVector] = None
    anchor: Optional[np.ndarray] = None


class OlcwaModel:
    """Binary learner state: base hyperplane, KPI windows, step counter."""

    def __init__(self, w_base: ParamVector, cfg: OlcwaConfig):
        self.w_base = w_base
        self.cfg = cfg
        self.t = 0
        self.last_alpha = cfg.alpha0
        self.windows: Dict[str, dr.KpiWindow] = {
            k: dr.KpiWindow(cfg.window_size, KPI_FUNCTIONS[k][1], cfg.zeta_for(k), cfg.rho)
            for k in cfg.kpis
        }

    @property
    def dim(self) -> int:
        return self.w_base.dim

    def predict_proba(self, features) -> np.ndarray:
        return predict_proba(self.w_base, features)

    def _fit_incremental(self, batch: MiniBatch) -> ParamVector:
        warm = self.w_base if self.cfg.warm_start else None
        return fit_logistic(batch, self.cfg.solver, warm_start=warm)

    def step(self, batch: MiniBatch) -> StepReport:
        if batch.dim != self.dim:
            raise DimensionMismatch(f"model has {self.dim} features, batch has {batch.dim}")
        cfg = self.cfg
        w_prev = self.w_base
        w_inc = self._fit_incremental(batch)
        rel = relate_planes(w_prev, w_inc, cfg.eps_parallel)

        # retuning on drift overrides the schedule
        alpha = cfg.alpha_schedule.at(cfg.alpha0, self.t + 1)
        anchor = None
        v_base = v_inc = None
        if rel.kind is not Relation.COINCIDENT:
            anchor = rel.point if rel.kind is Relation.INTERSECTING else fallback_anchor(w_prev, w_inc, alpha)
            v_base = normalize(extract_direction(w_prev))
            v_inc = normalize(extract_direction(w_inc))
            self.w_base = self._reblend(v_base, v_inc, alpha, anchor, w_prev)

        values = {}
        for name, window in self.windows.items():
            fn = KPI_FUNCTIONS[name][0]
            values[name] = fn(self.w_base, batch)
            window.append(values[name])

        verdict = dr.STABLE
        if all(w.is_full() for w in self.windows.values()):
            per_kpi = {}
            for name, window in self.windows.items():
                cal = dr.calibrate(window)
                per_kpi[name] = (cal, dr.classify(cal, values[name], window.orientation, window.zeta))
            verdict = dr.vote([v for _, v in per_kpi.values()])
            if verdict.is_drift and cfg.tuner_enabled:
                for window in self.windows.values():
                    window.remove_newest()
                alpha = self._retuned_alpha(per_kpi, verdict)
                if v_base is not None:
                    if rel.kind is Relation.PARALLEL:
                        # the weighted midpoint moves with alpha
                        anchor = fallback_anchor(w_prev, w_inc, alpha)
                    self.w_base = self._reblend(v_base, v_inc, alpha, anchor, w_prev)

        self.t += 1
        self.last_alpha = alpha
        return StepReport(self.t, values, verdict, alpha, rel.kind, w_inc, anchor)

    def _retuned_alpha(self, per_kpi, verdict: dr.DriftVerdict) -> float:
        # each KPI maps its own drift magnitude through its own scale map;
        # the agreeing KPIs' factors are combined by median
        alphas = []
        for name, (cal, v) in per_kpi.items():
            if v.kind is verdict.kind:
                smap = dr.build_scale_map(cal, self.windows[name].zeta, self.cfg.n_bins)
                alphas.append(dr.tune_alpha(smap, v))
        return float(np.median(alphas))

    def _reblend(self, v_base, v_inc, alpha, anchor, w_prev: ParamVector) -> ParamVector:
        v_avg = blend_directions(v_base, v_inc, alpha)
        try:
            return define_hyperplane(v_avg, anchor)
        except ZeroVector:
            # opposite normals cancelled out; keep the pre-step plane
            logger.debug("blended direction vanished at t=%d (alpha=%g)", self.t, alpha)
            return w_prev


def init(first_batch: MiniBatch, cfg: OlcwaConfig = OlcwaConfig()) -> OlcwaModel:
    """Fit the initial base hyperplane on the first mini-batch."""
    w_base = fit_logistic(first_batch, cfg.solver)
    return OlcwaModel(w_base, cfg)


def step(model: OlcwaModel, batch: MiniBatch) -> StepReport:
    return model.step(batch)


def predict(model: OlcwaModel, features) -> np.ndarray:
    return model.predict_proba(features)


# ---------------------------------------------------------------------------
# one-vs-rest


class OvrModel:
    """One independent binary learner per class; prediction by argmax."""

    def __init__(self, classes: Sequence, learners: List[OlcwaModel]):
        self.classes = np.asarray(classes)
        self.learners = learners

    def predict_proba(self, features) -> np.ndarray:
        """Per-class probabilities, one column per class (not normalized)."""
        return np.column_stack([m.predict_proba(features) for m in self.learners])

    def predict(self, features) -> np.ndarray:
        return ovr_predict(self, features)


def ovr_init(first_batch: MiniBatch, cfg: OlcwaConfig = OlcwaConfig(), classes: Optional[Sequence] = None) -> OvrModel:
    if classes is None:
        classes = np.unique(first_batch.labels)
    classes = np.asarray(sorted(set(np.asarray(classes).tolist())))
    if classes.size < 2:
        raise OlcwaError("one-vs-rest needs at least two classes")
    learners = [init(first_batch.relabel(c), cfg) for c in classes]
    return OvrModel(classes, learners)


def ovr_step(model: OvrModel, batch: MiniBatch) -> List[StepReport]:
    return [m.step(batch.relabel(c)) for c, m in zip(model.classes, model.learners)]


def ovr_predict(model: OvrModel, features) -> np.ndarray:
    proba = model.predict_proba(features)
    # np.argmax returns the first maximum, so ties go to the lowest class index
    return model.classes[np.argmax(proba, axis=1)]
