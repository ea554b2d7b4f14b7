"""Command-line interface.

Subcommands::

    run        scenario file -> result table (CSV or JSON)
    threshold  distribution parameters -> decision threshold
    tail       distribution parameters -> survival probability
    estimate   file of time samples -> multipath amplitude/delay estimates
    selftest   run the built-in invariant suite

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 numerical-precision warning escalated by ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import load_scenario
from .exceptions import BlastnullError, PrecisionWarning
from .harness import rows_to_csv, rows_to_json, run_sweep
from .selftest import run_selftest
from .tails import ChiSqParams, DncFParams, survival_function, threshold_for_pfa


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blastnull",
        description="GLRT detection toolkit for bistatic sonar under direct-blast interference",
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        help="exit with code 3 if any numerical-precision warning is raised",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo sweep from a scenario file")
    p_run.add_argument("scenario", help="path to a scenario TOML file")
    p_run.add_argument("--trials", type=int, help="override the scenario trial count")
    p_run.add_argument("--seed", type=int, help="override the scenario master seed")
    p_run.add_argument("--out", help="write results to this path instead of stdout")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")

    def add_dist_args(p, needs_x=False, needs_pfa=False):
        p.add_argument("--dist", choices=("chi2", "dncf"), required=True)
        p.add_argument("--dof", type=float, help="chi2 degrees of freedom (real convention)")
        p.add_argument("--delta", type=float, default=0.0, help="numerator noncentrality")
        p.add_argument("--num-dof", type=float, help="F numerator dof (real convention)")
        p.add_argument("--den-dof", type=float, help="F denominator dof (real convention)")
        p.add_argument("--lam", type=float, default=0.0, help="denominator noncentrality")
        if needs_x:
            p.add_argument("--x", type=float, required=True, help="evaluation point")
        if needs_pfa:
            p.add_argument("--pfa", type=float, required=True, help="false-alarm target")

    p_thr = sub.add_parser("threshold", help="invert a tail for a decision threshold")
    add_dist_args(p_thr, needs_pfa=True)

    p_tail = sub.add_parser("tail", help="evaluate a survival function")
    add_dist_args(p_tail, needs_x=True)

    p_est = sub.add_parser("estimate", help="estimate multipath parameters from samples")
    p_est.add_argument("--input", required=True, help=".npy or two-column text of complex samples")
    p_est.add_argument("--fs", type=float, required=True, help="sample rate in Hz")
    p_est.add_argument("--fft-size", type=int, required=True)
    p_est.add_argument("--paths", type=int, required=True, help="number of paths to estimate")
    p_est.add_argument("--duration", type=float, required=True, help="reference pulse length (s)")
    p_est.add_argument("--center-frequency", type=float, required=True)
    p_est.add_argument("--bandwidth", type=float, required=True)
    p_est.add_argument("--out", help="write the JSON path set here instead of stdout")

    sub.add_parser("selftest", help="run the built-in invariant suite")
    return parser


def _dist_from_args(args):
    if args.dist == "chi2":
        if args.dof is None:
            raise BlastnullError("--dof is required for --dist chi2")
        return ChiSqParams(dof=args.dof, delta=args.delta)
    if args.num_dof is None or args.den_dof is None:
        raise BlastnullError("--num-dof and --den-dof are required for --dist dncf")
    return DncFParams(v=args.num_dof, r=args.den_dof, delta=args.delta, lam=args.lam)


def _load_samples(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise BlastnullError(f"input file not found: {path}")
    if p.suffix == ".npy":
        data = np.load(p)
        return np.asarray(data, dtype=np.complex128).ravel()
    raw = np.loadtxt(p, delimiter=None, dtype=float, ndmin=2)
    if raw.shape[1] == 2:
        return raw[:, 0] + 1j * raw[:, 1]
    if raw.shape[1] == 1:
        return raw[:, 0].astype(np.complex128)
    raise BlastnullError("text input must have one (real) or two (re, im) columns")


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    from dataclasses import replace

    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        scenario = replace(scenario, **overrides)
    rows = run_sweep(scenario)
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} result rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_threshold(args) -> int:
    eta = threshold_for_pfa(args.pfa, _dist_from_args(args))
    print(f"{eta:.10g}")
    return 0


def _cmd_tail(args) -> int:
    prob = survival_function(args.x, _dist_from_args(args))
    print(f"{prob:.12g}")
    return 0


def _cmd_estimate(args) -> int:
    from .estimation import WrelaxConfig, wrelax
    from .signalmodel import Spectrum, generate_lfm, spectrum_of

    samples = _load_samples(args.input)
    if len(samples) > args.fft_size:
        raise BlastnullError(
            f"{len(samples)} samples exceed --fft-size {args.fft_size}; "
            "truncation is not applied"
        )
    reference = spectrum_of(
        generate_lfm(args.duration, args.center_frequency, args.bandwidth, args.fs),
        args.fft_size,
    )
    received = Spectrum(np.fft.fft(samples, n=args.fft_size), args.fft_size, args.fs)
    result = wrelax(received, reference, WrelaxConfig(max_paths=args.paths))
    payload = {
        "amplitudes": [[float(a.real), float(a.imag)] for a in result.amplitudes],
        "delays": [float(t) for t in result.delays],
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote estimates to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    handlers = {
        "run": _cmd_run,
        "threshold": _cmd_threshold,
        "tail": _cmd_tail,
        "estimate": _cmd_estimate,
        "selftest": lambda a: run_selftest(),
    }

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = handlers[args.command](args)
        except BlastnullError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for warning in caught:
            print(f"warning: {warning.message}", file=sys.stderr)
        if args.strict and any(
            issubclass(w.category, PrecisionWarning) for w in caught
        ):
            print("error: precision warning escalated by --strict", file=sys.stderr)
            return 3
    return code


if __name__ == "__main__":
    raise SystemExit(main())
