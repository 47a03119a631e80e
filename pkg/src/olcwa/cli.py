"""Command line entry point: ``olcwa {generate,run,bench,calibrate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import datagen, drift, harness
from .errors import OlcwaError

logger = logging.getLogger("olcwa")


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def cmd_generate(args) -> int:
    if args.preset:
        spec = datagen.preset(args.preset, args.seed if args.seed is not None else 0)
    elif args.spec:
        spec = datagen.StreamSpec.from_dict(_load_json(args.spec))
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
    else:
        raise OlcwaError("generate needs --spec or --preset")
    X, y = datagen.generate(spec)
    datagen.write_csv(args.out, X, y)
    print(f"wrote {len(y)} samples with {X.shape[1]} features to {args.out}")
    return 0


def _run_config(args) -> harness.RunConfig:
    raw = _load_json(args.config)
    if getattr(args, "out", None):
        raw["output"] = args.out
    if getattr(args, "jobs", None):
        raw["n_jobs"] = args.jobs
    if getattr(args, "kfold", None):
        raw["folds"] = args.kfold
    return harness.RunConfig.from_dict(raw)


def cmd_run(args) -> int:
    cfg = _run_config(args)
    if args.kfold:
        table = harness.run_kfold(cfg)
        print("learner,mean_accuracy")
        for name, acc in table.items():
            print(f"{name},{acc:.4f}")
        if cfg.output:
            from pathlib import Path

            out = Path(cfg.output)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "kfold.json", "w") as fh:
                json.dump({"config": cfg.to_dict(), "mean_accuracy": table}, fh, indent=2)
        return 0
    result = harness.run_prequential(cfg)
    print("learner,seed,final_accuracy,mean_accuracy,seconds")
    for s in result.summaries:
        print(f"{s.learner},{s.seed},{s.final_accuracy:.4f},{s.mean_accuracy:.4f},{s.seconds:.3f}")
    return 0


def cmd_bench(args) -> int:
    cfg = _run_config(args)
    table = harness.measure_runtime(cfg, repeats=args.repeats)
    print("learner,median_seconds")
    for name, sec in table.items():
        print(f"{name},{sec:.6f}")
    return 0


def cmd_calibrate(args) -> int:
    z = drift.inv_norm_cdf(1.0 - args.rho)
    print(f"rho={args.rho:g} z={z:.6f}")
    cal = drift.calibration_from_stats(args.mu, args.sigma, args.zeta, args.rho)
    print(f"mu={cal.mu:g} sigma={cal.sigma:g} zeta={args.zeta:g} tau={cal.tau:.6f}")
    print(f"safe band=[{cal.mu - args.zeta:.6f}, {cal.mu + args.zeta:.6f}] low={cal.low:.6f} high={cal.high:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="olcwa", description="Online classification with drift-aware weighted averaging.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic stream to CSV")
    g.add_argument("--spec", help="stream spec JSON")
    g.add_argument("--preset", choices=sorted(datagen.PRESETS), help="built-in replica instead of --spec")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="prequential or k-fold evaluation")
    r.add_argument("--config", required=True, help="run config JSON")
    r.add_argument("--out", help="output directory")
    r.add_argument("--kfold", type=int, default=0, metavar="K", help="stratified K-fold instead of prequential")
    r.add_argument("--jobs", type=int, default=None, help="parallel (learner, seed) runs")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="median wall-clock training time per learner")
    b.add_argument("--config", required=True)
    b.add_argument("--repeats", type=int, default=3)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("calibrate", help="print z and demo limits for a false-alarm rate")
    c.add_argument("--rho", type=float, required=True)
    c.add_argument("--mu", type=float, default=0.921)
    c.add_argument("--sigma", type=float, default=0.010)
    c.add_argument("--zeta", type=float, default=0.020)
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OlcwaError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
