"""Command-line front end.

Subcommands
-----------
run            one experiment, results as CSV (or JSON with ``--json``)
sweep          one experiment per point of the ``[sweep]`` grid
oracle-check   sphere decoder vs exhaustive search and EP vs SD self-checks
ep-diagnostic  residual samples ``c - G p`` at the WF precoder

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""
import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys

import numpy as np

from .channel import draw_channel
from .config import ConfigError, apply_overrides, config_from_dict, config_to_dict, load_config
from .eval import run_experiment
from .oracles import EP_EXCESS_BOUND, check_ep, check_sd, oracle_problems
from .wmmse import WmmseConfig, initial_state, reduce_all, to_real, wf_init

__all__ = ["main", "run_cli", "CSV_HEADER"]

CSV_HEADER = [
    "scheme",
    "snr_db",
    "mean_sum_rate",
    "std_error",
    "trials",
    "converged_fraction",
    "mean_iterations",
]

log = logging.getLogger("qprecoding")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--output", help="output file (run) or directory (sweep)")
    common.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    common.add_argument("--trace", help="directory for per-iteration traces of trial 0")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, e.g. --set trials=20 --set csi.mode=ls_estimate",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qprecoding", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("sweep", parents=[common], help="run the [sweep] grid")
    oc = sub.add_parser("oracle-check", parents=[common], help="solver self-checks")
    oc.add_argument("--instances", type=int, default=200)
    sub.add_parser("ep-diagnostic", parents=[common], help="residual samples for the EP noise model")
    return p


def _load(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(args.config, overrides)


def _rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [
                r.scheme,
                repr(float(r.snr_db)),
                repr(float(r.mean_sum_rate)),
                repr(float(r.std_error)),
                r.trials,
                repr(float(r.converged_fraction)),
                repr(float(r.mean_iterations)),
            ]
        )
    return buf.getvalue()


def _rows_json(rows, cfg, metadata):
    doc = {
        "config": config_to_dict(cfg, metadata),
        "results": [dict(r.as_dict(), flagged=r.flagged) for r in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_traces(directory, records):
    os.makedirs(directory, exist_ok=True)
    for r in records:
        if r.objective_trace is None:
            continue
        name = f"trace_{r.scheme}_{r.snr_db:g}dB.csv"
        with open(os.path.join(directory, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "sum_rate"])
            for i, (f, rate) in enumerate(zip(r.objective_trace, r.sum_rate_trace)):
                w.writerow([i, repr(float(f)), repr(float(rate))])


def _cmd_run(args):
    cfg, metadata, _ = _load(args)
    trace_trial = 0 if args.trace else None
    rows, records = run_experiment(cfg, return_records=True, trace_trial=trace_trial)
    text = _rows_json(rows, cfg, metadata) if args.json else _rows_csv(rows)
    _emit(text, args.output)
    if args.trace:
        _write_traces(args.trace, records)
    return 0


def _sweep_points(sweep):
    if not sweep:
        raise ConfigError("the config has no [sweep] table")
    keys = list(sweep)
    for k in keys:
        if not isinstance(sweep[k], list) or not sweep[k]:
            raise ConfigError(f"sweep entry {k!r} must be a non-empty list")
    return keys, list(itertools.product(*(sweep[k] for k in keys)))


def _cmd_sweep(args):
    cfg, metadata, sweep = _load(args)
    keys, points = _sweep_points(sweep)
    base = config_to_dict(cfg, metadata)
    base.pop("sweep", None)
    out_dir = args.output or "sweep_results"
    os.makedirs(out_dir, exist_ok=True)
    ext = "json" if args.json else "csv"
    # validate every point before running any
    point_cfgs = []
    for values in points:
        overrides = [f"{k}={json.dumps(v)}" for k, v in zip(keys, values)]
        point_cfgs.append(config_from_dict(apply_overrides(base, overrides))[0])
    index = io.StringIO()
    w = csv.writer(index, lineterminator="\n")
    w.writerow(["point", "file", *keys])
    for i, (values, pcfg) in enumerate(zip(points, point_cfgs)):
        name = f"point_{i:03d}.{ext}"
        trace_trial = 0 if args.trace else None
        rows, records = run_experiment(pcfg, return_records=True, trace_trial=trace_trial)
        text = _rows_json(rows, pcfg, metadata) if args.json else _rows_csv(rows)
        _emit(text, os.path.join(out_dir, name))
        if args.trace:
            _write_traces(os.path.join(args.trace, f"point_{i:03d}"), records)
        w.writerow([i, name, *values])
    _emit(index.getvalue(), os.path.join(out_dir, "index.csv"))
    return 0


def _cmd_oracle_check(args):
    seed = 0 if args.seed is None else args.seed
    if args.overrides or args.config:
        # the oracle set is fixed; the config is only checked for validity
        _load(args)
    if args.instances < 1:
        raise ConfigError("--instances must be >= 1")
    problems = oracle_problems(n=args.instances, seed=seed)
    sd = check_sd(problems)
    ep = check_ep(problems, bound=EP_EXCESS_BOUND)
    lines = [
        f"{'PASS' if sd.passed else 'FAIL'} sd-exactness: {sd.mismatches}/{sd.instances} "
        f"mismatches, max objective gap {sd.max_gap:.3g}",
        f"{'PASS' if ep.passed else 'FAIL'} ep-quality: mean relative excess "
        f"{ep.mean_relative_excess:.4f} (bound {ep.bound}), EP below SD {ep.ep_beats_sd}, "
        f"non-finite {ep.nonfinite}, non-PD {ep.not_pd}, clamp fraction {ep.clamp_fraction:.4f}",
    ]
    if args.json:
        doc = {
            "sd": dict(sd.__dict__, passed=sd.passed),
            "ep": dict(ep.__dict__, passed=ep.passed),
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    else:
        text = "\n".join(lines) + "\n"
        _emit(text, args.output)
        if args.output:
            sys.stdout.write(text)
    return 0 if sd.passed and ep.passed else 1


def _cmd_ep_diagnostic(args):
    cfg, _, _ = _load(args)
    snr = float(cfg.snr_grid_db[0])
    noise = cfg.power / 10.0 ** (snr / 10.0)
    wcfg = WmmseConfig(power=cfg.power, noise_power=noise)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "ue", "index", "residual"])
    samples = []
    for t in range(int(cfg.trials)):
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), t]))
        H = draw_channel(cfg.channel, rng).H
        st = initial_state(H, wcfg)
        P = wf_init(H, cfg.power, noise)
        probs = reduce_all(H, st.d, st.beta, 1.0, np.zeros(1))
        for k, prob in enumerate(probs):
            r = prob.c - prob.G @ to_real(P[:, k])
            samples.append(r)
            for i, v in enumerate(r):
                w.writerow([t, k, i, repr(float(v))])
    _emit(buf.getvalue(), args.output)
    r = np.concatenate(samples)
    z = (r - r.mean()) / r.std()
    sys.stderr.write(
        f"{r.size} residual samples at {snr:g} dB: mean {r.mean():.4g}, std {r.std():.4g}, "
        f"excess kurtosis {np.mean(z ** 4) - 3:.3f}\n"
    )
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle_check,
    "ep-diagnostic": _cmd_ep_diagnostic,
}


def run_cli(argv=None):
    """Parse ``argv`` and dispatch; returns the process exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config-error code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
