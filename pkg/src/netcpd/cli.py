"""Command line interface: simulate, detect, np-detect, calibrate, experiment."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import calibration, harness, io
from .detector import DetectorConfig, run, run_multi
from .generators import ScenarioSpec, change_scenario, iter_stream, scenario

log = logging.getLogger("netcpd")


def _dump(obj, fh) -> None:
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector")
    g.add_argument("--config", help="JSON config written by 'calibrate'; flags below override it")
    g.add_argument("--mode", choices=("alpha", "arl"))
    g.add_argument("--alpha", type=float)
    g.add_argument("--gamma", type=int)
    g.add_argument("--c1", type=float)
    g.add_argument("--c-gate", type=float)
    g.add_argument("--tau-rule", choices=("theoretical", "practical"))
    g.add_argument("--rho-hat", help="sparsity estimate, or 'auto'")
    g.add_argument("--train-length", type=int, default=50, help="snapshots used by --rho-hat auto (default 50)")
    g.add_argument("--abs-score", action="store_true", default=None, help="use |<A, B>| as the score")
    g.add_argument("--eig-method", choices=("jacobi", "lapack"))
    g.add_argument("--horizon", type=int, help="stop after this many raw snapshots")


def _add_np_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r0", type=int, default=None, help="number of blocks in the block-model fit")
    p.add_argument("--strategy", default=None, help="'exhaustive' or 'alt:<restarts>,<iters>'")


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), default=1)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--delta", type=int, help="last pre-change raw index (default horizon // 2)")
    g.add_argument("--no-change", action="store_true", help="sample the pre-change law throughout")
    g.add_argument("--horizon", type=int, default=300)
    g.add_argument("--rho", type=float, default=0.02, help="sparsity of scenarios 1 and 2")
    g.add_argument("--latent-seed", type=int, default=0, help="latent positions of scenario 4")


def _scenario_from(args) -> ScenarioSpec:
    if args.no_change:
        delta = None
    else:
        delta = args.horizon // 2 if args.delta is None else args.delta
    return scenario(args.scenario, args.n, delta, args.horizon, seed=args.seed, rho=args.rho, latent_seed=args.latent_seed)


def _config_from(args, snapshots=None) -> DetectorConfig:
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
    cfg = DetectorConfig.from_dict(base) if base else DetectorConfig()
    changes = {}
    for flag, name in [
        ("mode", "mode"),
        ("alpha", "alpha"),
        ("gamma", "gamma"),
        ("c1", "c1"),
        ("c_gate", "c_gate"),
        ("tau_rule", "tau_rule"),
        ("abs_score", "use_absolute_inner_product"),
        ("eig_method", "eig_method"),
        ("r0", "r0"),
        ("strategy", "np_strategy"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "max_time", None) is not None:
        changes["max_time"] = args.max_time
    rho = getattr(args, "rho_hat", None)
    if rho is not None:
        if rho == "auto":
            if snapshots is None:
                raise SystemExit("--rho-hat auto needs an input stream")
            changes["rho_hat"] = calibration.estimate_rho(snapshots[: args.train_length])
        else:
            changes["rho_hat"] = float(rho)
    return cfg.replace(**changes)


def cmd_simulate(args) -> int:
    spec = _scenario_from(args)
    snaps = list(iter_stream(spec))
    io.write_snapshots(args.out, snaps, fmt=args.format)
    truth = {"scenario": spec.to_dict(), "ground_truth": change_scenario(spec).to_dict()}
    with open(args.out + ".json", "w") as fh:
        _dump(truth, fh)
    print(f"wrote {len(snaps)} snapshots of {spec.n} nodes to {args.out}", file=sys.stderr)
    return 0


def _detect(args, estimator: str) -> int:
    snaps = io.read_snapshots(args.input, args.format)
    args.max_time = args.horizon
    cfg = _config_from(args, snaps).replace(estimator=estimator)
    outcomes = run_multi(snaps, cfg) if args.restart else [run(snaps, cfg)]
    for o in outcomes:
        print(json.dumps(o.to_dict(), sort_keys=True))
    fired = [o.t_raw for o in outcomes if o.fired]
    if fired:
        print(f"{len(fired)} change point(s) declared at raw time(s) {fired}", file=sys.stderr)
    else:
        print(f"no change point declared in {len(snaps)} snapshots", file=sys.stderr)
    return 0


def cmd_detect(args) -> int:
    return _detect(args, "usvt")


def cmd_np_detect(args) -> int:
    return _detect(args, "np")


def _training_spec(path: str, fmt: Optional[str]) -> tuple[ScenarioSpec, float]:
    """Null law fitted to a training file: its empirical edge frequencies."""
    snaps = io.read_snapshots(path, fmt)
    freq = np.mean([s.entries for s in snaps], axis=0)
    spec = ScenarioSpec("custom", freq.shape[0], None, len(snaps), theta_before=freq, theta_after=freq)
    return spec, calibration.estimate_rho(snaps)


def cmd_calibrate(args) -> int:
    args.max_time = None
    target = calibration.CalibrationTarget(
        regime=args.regime,
        alpha=args.alpha if args.alpha is not None else 0.05,
        t_train=args.t_train,
        gamma=args.gamma if args.gamma is not None else 150,
        reps=args.reps,
        c1_low=args.c1_low,
        c1_high=args.c1_high,
    )
    cfg = _config_from(args).replace(estimator=args.detector)
    if args.training_file:
        spec, rho_hat = _training_spec(args.training_file, args.format)
        cfg = cfg.replace(rho_hat=rho_hat)
        if target.regime == "pfa":
            cfg = cfg.replace(mode="alpha", alpha=target.alpha)
        else:
            cfg = cfg.replace(mode="arl", gamma=target.gamma)
        result = calibration.calibrate_c1(spec, cfg, target, seed=args.seed)
        cfg = cfg.replace(c1=result.c1)
    else:
        spec = scenario(args.scenario, args.n, None, max(args.t_train, 2), seed=args.seed, rho=args.rho, latent_seed=args.latent_seed)
        cfg, result = calibration.calibrated_config(spec, cfg, target, seed=args.seed)
    with open(args.out, "w") as fh:
        _dump(cfg.to_dict(), fh)
    print(
        f"c1 = {result.c1:.6g} ({args.regime} achieved {result.achieved:.4g}, "
        f"{'converged' if result.converged else 'not converged'} after {result.steps} steps)",
        file=sys.stderr,
    )
    return 0


def cmd_experiment(args) -> int:
    spec = _scenario_from(args)
    args.max_time = None
    cfg = _config_from(args).replace(estimator=args.detector)
    result = harness.run_experiment(spec, cfg, args.reps, base_seed=args.seed)
    harness.write_results(result, args.out_dir)
    delay = "undefined" if result.delay is None else f"{result.delay:.2f}"
    print(f"delay {delay}, pfa {result.pfa:.3f} over {result.n_reps} replicates", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netcpd", description="Online change-point detection for network streams")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a scenario stream to a snapshot file")
    _add_scenario_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("dense", "edges"), default="dense")
    p.set_defaults(func=cmd_simulate)

    for name, func, np_flags in (("detect", cmd_detect, False), ("np-detect", cmd_np_detect, True)):
        p = sub.add_parser(name, help="run the detector on a snapshot file")
        p.add_argument("--input", required=True)
        p.add_argument("--format", choices=("dense", "edges"), default=None)
        p.add_argument("--restart", action="store_true", help="restart after every alarm")
        _add_detector_flags(p)
        if np_flags:
            _add_np_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("calibrate", help="Monte Carlo calibration of c1")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), default=1)
    src.add_argument("--training-file")
    p.add_argument("--format", choices=("dense", "edges"), default=None)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--rho", type=float, default=0.02)
    p.add_argument("--latent-seed", type=int, default=0)
    p.add_argument("--regime", choices=("pfa", "arl"), default="pfa")
    p.add_argument("--t-train", type=int, default=200)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c1-low", type=float, default=0.0)
    p.add_argument("--c1-high", type=float, default=50.0)
    p.add_argument("--out", required=True, help="config file for 'detect --config'")
    for flag, kind in (("--alpha", float), ("--gamma", int), ("--c-gate", float), ("--eig-method", str)):
        p.add_argument(flag, type=kind)
    p.add_argument("--tau-rule", choices=("theoretical", "practical"))
    p.add_argument("--detector", choices=("usvt", "np"), default="usvt")
    _add_np_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("experiment", help="replicated detection experiment")
    _add_scenario_flags(p)
    p.add_argument("--detector", choices=("usvt", "np"), default="usvt")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    for flag, kind in (("--mode", str), ("--alpha", float), ("--gamma", int), ("--c1", float), ("--c-gate", float), ("--rho-hat", str), ("--eig-method", str)):
        p.add_argument(flag, type=kind)
    p.add_argument("--tau-rule", choices=("theoretical", "practical"))
    _add_np_flags(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        parser.exit(2, f"netcpd {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
