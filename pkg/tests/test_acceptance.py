"""Acceptance criteria, one test each; every test reports a PASS/FAIL line."""

import math
import time

import numpy as np

from olcwa import datagen as g
from olcwa import drift as dr
from olcwa import harness as h
from olcwa.geometry import (
    ParamVector,
    Relation,
    angle_between,
    define_hyperplane,
    fallback_anchor,
    normalize,
    relate_planes,
)
from olcwa.model import OlcwaConfig, OlcwaModel, ovr_init, ovr_step
from olcwa.solver import MiniBatch, SolverConfig, fit_logistic, nll_gradient, nll_objective, sigmoid

SEEDS = range(5)
K = 50


def online_accuracy(spec, params, seeds=SEEDS):
    """Per-seed prequential accuracy curves and verdict lists."""
    params = dict(params)
    learner_spec = h.LearnerSpec("m", params.pop("kind", "olcwa"), params)
    out = {}
    for seed in seeds:
        X, y = g.generate(spec.with_seed(seed))
        learner = h.make_learner(learner_spec, 2, X.shape[1], len(y), K)
        rows = list(h.prequential(learner, list(g.batch_iter(X, y, K))))
        out[seed] = (np.array([r[1] for r in rows]), [r[3] for r in rows])
    return out


# ---------------------------------------------------------------------------


def test_c01_worked_example(acceptance_report):
    start = time.perf_counter()
    cal = dr.calibration_from_stats(0.921, 0.010, 0.020, 0.01)
    kinds = [dr.classify(cal, r, dr.KpiOrientation.HIGHER_IS_BETTER, 0.020).kind for r in (0.910, 0.890, 0.870, 0.950)]
    seconds = time.perf_counter() - start
    expect = [dr.DriftKind.STABLE, dr.DriftKind.INCREMENTAL, dr.DriftKind.ABRUPT, dr.DriftKind.IMPROVEMENT]
    acceptance_report(
        1,
        "worked example",
        {"z": abs(cal.z - 2.326) <= 0.001, "tau": abs(cal.tau - 0.0233) <= 0.0005, "verdicts": kinds == expect},
        f"z={cal.z:.4f} tau={cal.tau:.5f} verdicts={[k.value for k in kinds]}",
        seconds,
        1e-3,
    )


def test_c02_cfar_false_alarm_rate(acceptance_report):
    # plug-in statistics from a W-reading window follow a Student-t tail; a
    # large window makes that excess negligible next to the binomial band
    start = time.perf_counter()
    n, capacity = 100_000, 5001
    checks, parts = {}, []
    for rho, seed in ((0.01, 0), (0.05, 1)):
        x = np.random.default_rng(seed).normal(size=n + capacity - 1)
        w = dr.KpiWindow(capacity, dr.KpiOrientation.HIGHER_IS_BETTER, zeta=0.0, rho=rho)
        for v in x[: capacity - 1]:
            w.append(float(v))
        abrupt = 0
        for v in x[capacity - 1 :]:
            w.append(float(v))
            verdict = dr.classify(dr.calibrate(w), float(v), w.orientation, 0.0)
            abrupt += verdict.kind is dr.DriftKind.ABRUPT
        rate = abrupt / n
        band = 3 * math.sqrt(rho * (1 - rho) / n)
        checks[f"rho={rho}"] = abs(rate - rho) <= band
        parts.append(f"rho={rho}: rate={rate:.5f} band=+-{band:.5f}")
    acceptance_report(2, "CFAR false-alarm rate", checks, "; ".join(parts), time.perf_counter() - start, 5.0)


def test_c03_stationary_parity(acceptance_report):
    start = time.perf_counter()
    learners = [h.LearnerSpec("olcwa", "olcwa"), h.LearnerSpec("batch", "batch")]
    table = h.run_kfold(h.RunConfig(learners, g.ds1(0), K=K, folds=5, seeds=[0]))
    acceptance_report(
        3,
        "stationary parity (DS1, 5-fold)",
        {"within 0.03": table["olcwa"] >= table["batch"] - 0.03},
        f"olcwa={table['olcwa']:.4f} batch={table['batch']:.4f}",
        time.perf_counter() - start,
        30.0,
    )


def test_c04_abrupt_recovery(acceptance_report):
    start = time.perf_counter()
    spec = g.ds15()
    drift_batch = spec.schedule.at // K
    runs = {
        name: online_accuracy(spec, params)
        for name, params in {
            "olcwa": {"window_size": "auto"},
            "ablation": {"window_size": "auto", "tuner_enabled": False},
            "onb": {"kind": "onb"},
            "pla": {"kind": "pla"},
        }.items()
    }
    detected = sum(
        any(v == dr.DriftKind.ABRUPT.value for v in runs["olcwa"][s][1][drift_batch : drift_batch + 3]) for s in SEEDS
    )
    post = {name: np.mean([r[s][0][drift_batch:].mean() for s in SEEDS]) for name, r in runs.items()}
    acceptance_report(
        4,
        "abrupt-drift recovery (DS15)",
        {
            "a detect": detected >= 4,
            "b vs ablation": post["olcwa"] - post["ablation"] >= 0.05,
            "c vs onb,pla": post["olcwa"] > max(post["onb"], post["pla"]),
        },
        f"detected {detected}/5; post-drift " + " ".join(f"{k}={v:.3f}" for k, v in post.items()),
        time.perf_counter() - start,
        60.0,
    )


def test_c05_incremental_tracking(acceptance_report):
    start = time.perf_counter()
    spec = g.ds19()
    steps = spec.schedule.step_indices()
    ends = list(steps[1:]) + [steps[-1] + spec.schedule.every]
    tuned = online_accuracy(spec, {"window_size": 12})
    fixed = online_accuracy(spec, {"window_size": 12, "tuner_enabled": False})
    hits = []
    for s in SEEDS:
        verdicts = tuned[s][1]
        hits.append(sum(dr.DriftKind.INCREMENTAL.value in verdicts[a // K : b // K] for a, b in zip(steps, ends)))
    covered = sum(h_ == len(steps) for h_ in hits)
    mean_tuned = np.mean([tuned[s][0].mean() for s in SEEDS])
    mean_fixed = np.mean([fixed[s][0].mean() for s in SEEDS])
    acceptance_report(
        5,
        "incremental-drift tracking (DS19)",
        {"every step window hit in >=4/5 seeds": covered >= 4, "mean >= ablation": mean_tuned >= mean_fixed},
        f"windows hit per seed={hits} of {len(steps)}; accuracy olcwa={mean_tuned:.4f} ablation={mean_fixed:.4f}",
        time.perf_counter() - start,
        60.0,
    )


def test_c06_ewma_convergence(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    y = rng.integers(0, 2, size=200)
    X = rng.normal(size=(200, 3)) + 2.0 * y[:, None]
    y = np.where(rng.random(200) < 0.1, 1 - y, y)
    batch = MiniBatch(X, y)
    checks, parts = {}, []
    for alpha in (0.25, 0.5, 0.9):
        cfg = OlcwaConfig(alpha0=alpha, tuner_enabled=False, warm_start=False)
        m = OlcwaModel(ParamVector([1.0, -1.0, 0.5], 0.0), cfg)
        angles, moved = [], []
        for _ in range(200):
            r = m.step(batch)
            angles.append(angle_between(m.w_base.weights, r.w_inc.weights))
            moved.append(r.relation is not Relation.COINCIDENT)
        angles = np.array(angles)
        # coincident planes are left alone, so contraction is measured only on moving steps
        small = [i for i in range(1, 200) if moved[i] and angles[i - 1] < 1e-3]
        ratios = angles[small] / angles[np.subtract(small, 1)]
        checks[f"monotone a={alpha}"] = bool(np.all(np.diff(angles) <= 1e-12))
        checks[f"<1e-6 a={alpha}"] = bool(angles.min() < 1e-6)
        checks[f"ratio a={alpha}"] = len(ratios) > 0 and bool(np.all(np.abs(ratios / (1 - alpha) - 1) <= 0.05))
        first = int(np.argmax(angles < 1e-6))
        parts.append(f"a={alpha}: <1e-6 at step {first + 1}, ratio {np.median(ratios):.4f} vs {1 - alpha:.2f}")
    acceptance_report(6, "EWMA convergence", checks, "; ".join(parts), time.perf_counter() - start, 5.0)


def test_c07_regret_sublinearity(acceptance_report):
    # diminishing alpha; comparator restricted to the learner's unit-norm domain
    start = time.perf_counter()
    spec = g.StreamSpec(2000 * K, g.ds1().concept_a, seed=0)
    X, y = g.generate(spec)
    batches = list(g.batch_iter(X, y, K))
    learner = h.make_learner(h.LearnerSpec("o", "olcwa", {"tuner_enabled": False, "alpha_schedule": "inv_sqrt"}), 2, 2)
    tracker = h.RegretTracker()
    for _, _, loss, _, _ in h.prequential(learner, batches):
        tracker.add(loss)
    _, avg = h.track_regret(tracker, X, y, batches, 2, max_norm=1.0)
    ratio = avg[1999] / avg[199]
    acceptance_report(
        7,
        "regret sublinearity",
        {"ratio<=0.5": ratio <= 0.5},
        f"R/T at 200={avg[199]:.5f} at 2000={avg[1999]:.5f} ratio={ratio:.3f}",
        time.perf_counter() - start,
        60.0,
    )


def test_c08_geometry(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_res, worst_sym, worst_anchor = 0.0, 0.0, 0.0
    for d in (2, 3, 20, 200):
        for _ in range(1000):
            a = ParamVector(rng.normal(size=d), float(rng.normal()))
            b = ParamVector(rng.normal(size=d), float(rng.normal()))
            rel = relate_planes(a, b)
            if rel.kind is Relation.INTERSECTING:
                p = rel.point
                for w in (a, b):
                    scale = 1.0 + np.linalg.norm(w.weights) * np.linalg.norm(p)
                    worst_res = max(worst_res, abs(w.weights @ p + w.bias) / scale)
            # parallel copy of a shifted by a random offset
            shifted = ParamVector(a.weights * rng.uniform(0.5, 2.0), float(rng.normal()))
            m_ab, m_ba = fallback_anchor(a, shifted, 0.5), fallback_anchor(shifted, a, 0.5)
            da = abs(a.weights @ m_ab + a.bias) / np.linalg.norm(a.weights)
            ds = abs(shifted.weights @ m_ab + shifted.bias) / np.linalg.norm(shifted.weights)
            worst_sym = max(worst_sym, np.linalg.norm(m_ab - m_ba), abs(da - ds))
            v, q = rng.normal(size=d), rng.normal(size=d) * 10
            plane = define_hyperplane(v, q)
            worst_anchor = max(
                worst_anchor, abs(plane.weights @ q + plane.bias) / (np.linalg.norm(v) * np.linalg.norm(q))
            )
    acceptance_report(
        8,
        "geometry suite",
        {"residual": worst_res <= 1e-9, "midpoint symmetric": worst_sym <= 1e-9, "anchor": worst_anchor <= 1e-12},
        f"max residual={worst_res:.2e} midpoint asymmetry={worst_sym:.2e} anchor={worst_anchor:.2e}",
        time.perf_counter() - start,
        10.0,
    )


def irls(X, y, l2, iters=50):
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    for _ in range(iters):
        p = sigmoid(A @ w)
        grad = A.T @ (p - y) / n + l2 * w
        H = (A * (p * (1 - p))[:, None]).T @ A / n + l2 * np.eye(d + 1)
        w = w - np.linalg.solve(H, grad)
    return w


def test_c09_gradient_and_oracle(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    cfg = SolverConfig()
    worst_grad, worst_cos = 0.0, 0.0
    for _ in range(20):
        d = int(rng.integers(2, 6))
        X = rng.normal(size=(60, d))
        y = (X @ rng.normal(size=d) + rng.normal(scale=1.5, size=60) > 0).astype(int)
        w = rng.normal(size=d + 1)
        grad = nll_gradient(w, X, y, cfg.l2_reg)
        step = 1e-6
        num = np.array([
            (nll_objective(w + step * e, X, y, cfg.l2_reg) - nll_objective(w - step * e, X, y, cfg.l2_reg)) / (2 * step)
            for e in np.eye(d + 1)
        ])
        worst_grad = max(worst_grad, np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12))
        fit = fit_logistic(MiniBatch(X, y), cfg)
        ref = irls(X, y.astype(float), cfg.l2_reg)[:-1]
        worst_cos = max(worst_cos, 1.0 - float(normalize(fit.weights) @ normalize(ref)))
    acceptance_report(
        9,
        "gradient and IRLS oracle",
        {"gradient": worst_grad <= 1e-5, "direction": worst_cos <= 1e-3},
        f"max gradient rel err={worst_grad:.2e} max 1-cos={worst_cos:.2e}",
        time.perf_counter() - start,
        10.0,
    )


def test_c10_multiclass(acceptance_report):
    start = time.perf_counter()
    spec = g.ds7(0)
    learners = [h.LearnerSpec("olcwa", "olcwa"), h.LearnerSpec("batch", "batch")]
    table = h.run_kfold(h.RunConfig(learners, spec, K=K, folds=5, seeds=[0]))
    X, y = g.generate(spec)
    batches = list(g.batch_iter(X, y, K))
    m = ovr_init(batches[0], classes=range(3))
    for b in batches[1:]:
        ovr_step(m, b)
    per_class = np.column_stack([learner.predict_proba(X) for learner in m.learners])
    brute = np.array([max(range(3), key=lambda k: per_class[i, k]) for i in range(len(X))])
    argmax_ok = bool(np.array_equal(m.predict(X), brute))
    acceptance_report(
        10,
        "multiclass OvR (DS7, 5-fold)",
        {"within 0.03": abs(table["olcwa"] - table["batch"]) <= 0.03, "argmax": argmax_ok},
        f"olcwa={table['olcwa']:.4f} batch={table['batch']:.4f} argmax exact={argmax_ok}",
        time.perf_counter() - start,
        30.0,
    )


def test_c11_runtime_scaling(acceptance_report):
    start = time.perf_counter()
    per_batch = {}
    for d in (20, 200):
        c = np.zeros((2, d))
        c[1] = 3.0 / math.sqrt(d)
        spec = g.StreamSpec(2000, g.ConceptSpec(c, label_noise=0.1), seed=0)
        cfg = h.RunConfig([h.LearnerSpec("olcwa", "olcwa")], spec, K=K, seeds=[0], regret=False)
        per_batch[d] = h.measure_runtime(cfg, repeats=3)["olcwa"] / (2000 // K)
    ratio = per_batch[200] / per_batch[20]
    acceptance_report(
        11,
        "runtime scaling d=200 vs d=20",
        {"ratio<=30": ratio <= 30},
        f"per batch d=20 {per_batch[20] * 1e3:.2f}ms d=200 {per_batch[200] * 1e3:.2f}ms ratio={ratio:.2f}",
        time.perf_counter() - start,
        60.0,
    )
