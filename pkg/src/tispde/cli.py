"""Simulate Levy-driven SDEs and verify their translation-invariant SPDE lifts.

    tispde simulate|verify|inequalities|hypotheses --config FILE --out DIR [--threads K] [--seed S]

Exit codes: 0 success, 1 tolerance failure (or numerical blowup),
2 configuration error.  Every output file carries the config hash and
seed; reruns with the same config and seed are byte-identical.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from .coefficients import hypothesis_report
from .config import ExperimentConfig
from .errors import ConfigError, NumericalBlowupError
from .experiments import SUITES, run_inequalities, simulate

log = logging.getLogger("tispde")

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG = 0, 1, 2


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def _write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _stamp(cfg):
    return {"config_hash": cfg.hash, "seed": cfg.seed}


def cmd_simulate(cfg, out, threads):
    results, summary = simulate(cfg, threads)
    stamp = _stamp(cfg)
    for i, (noise, traj, path, _) in enumerate(results):
        head = f"# config_hash={cfg.hash} seed={cfg.seed} path={i}\n"
        _write(os.path.join(out, "trajectories", f"path_{i:04d}.csv"), head + traj.to_csv())
        noise_head = json.dumps({"type": "meta", **stamp, "path": i}, sort_keys=True) + "\n"
        _write(os.path.join(out, "noise", f"path_{i:04d}.jsonl"), noise_head + noise.to_jsonl())
        snap = {**stamp, "path": i, "d": cfg.d, "N": cfg.N, "times": path.times.tolist(),
                "coeffs": path.coeffs.tolist(), "tail_mass": path.tails.tolist(),
                "stopped": path.stopped, "theta": path.theta}
        _write(os.path.join(out, "snapshots", f"path_{i:04d}.json"), _dump(snap))
    for w in summary["hypothesis_warnings"]:
        log.warning("hypothesis (%s) not certified for this configuration", w)
    _write(os.path.join(out, "summary.json"), _dump({**stamp, **summary}))
    return EXIT_OK


def cmd_verify(cfg, out, threads, suites):
    reports = {}
    for name in suites:
        reports[name] = SUITES[name](cfg, threads)
        log.info("suite %s: %s", name, "pass" if reports[name]["passed"] else "FAIL")
    passed = all(r["passed"] for r in reports.values())
    _write(os.path.join(out, "verify.json"), _dump({**_stamp(cfg), "suites": reports, "passed": passed}))
    return EXIT_OK if passed else EXIT_TOLERANCE


def cmd_inequalities(cfg, out, threads):
    reports = run_inequalities(cfg)
    passed = all(r["passed"] for r in reports)
    _write(os.path.join(out, "inequalities.json"), _dump({**_stamp(cfg), "reports": reports, "passed": passed}))
    return EXIT_OK if passed else EXIT_TOLERANCE


def cmd_hypotheses(cfg, out, threads):
    rep = hypothesis_report(cfg.cset, [cfg.xi], cfg.model, seed=cfg.seed)
    for w in rep["violations"]:
        log.warning("hypothesis (%s) violated", w)
    _write(os.path.join(out, "hypotheses.json"), _dump({**_stamp(cfg), **rep}))
    return EXIT_OK if rep["ok"] else EXIT_TOLERANCE


def build_parser():
    ap = argparse.ArgumentParser(prog="tispde", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "inequalities", "hypotheses"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None)
        if name == "verify":
            sp.add_argument("--suite", action="append", choices=sorted(SUITES),
                            help="repeatable; default: correspondence, ito, uniqueness")
    return ap


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigError as exc:
        log.error("config error at %s", exc)
        return EXIT_CONFIG
    threads = max(1, args.threads)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, threads)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, threads, args.suite or ["correspondence", "ito", "uniqueness"])
        if args.command == "inequalities":
            return cmd_inequalities(cfg, args.out, threads)
        return cmd_hypotheses(cfg, args.out, threads)
    except NumericalBlowupError as exc:
        log.error("numerical blowup at t=%s: %s", exc.time, exc)
        return EXIT_TOLERANCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
