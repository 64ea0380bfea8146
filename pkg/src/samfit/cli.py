"""Command-line interface.

Exit codes: 0 success, 1 self-check failure, 2 usage or input error,
3 numeric degeneracy (zero noise level without ``--tau2``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .errors import NumericDegeneracy, SamfitError
from .fourier import forward_dft
from .map_estimator import PriorConfig, estimate_tau, map_fit, validate_priors
from .simulation import ScenarioConfig, check_equivalence, run_scenario

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3


def _floats(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text: str):
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" not in text:
        return _floats(text)
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def _add_prior_flags(p: argparse.ArgumentParser, energy_default=None):
    p.add_argument("--gamma", type=float, default=None, help="prior variance ratio (default 5)")
    p.add_argument("--q", type=float, default=None, help="geometric parameter of the axis-count prior (default 0.5)")
    p.add_argument("--qj", type=_floats, default=None, help="cut-point prior parameter, one value or one per axis")
    p.add_argument(
        "--energy-weight", type=float, choices=(1.0, 2.0), default=energy_default,
        help="1 counts positive frequencies once, 2 counts each +-k pair",
    )


def _prior_from(args, base: PriorConfig) -> PriorConfig:
    qj = base.q_axis
    if args.qj is not None:
        qj = args.qj[0] if len(args.qj) == 1 else args.qj
    return PriorConfig(
        gamma=base.gamma if args.gamma is None else args.gamma,
        q=base.q if args.q is None else args.q,
        q_axis=qj,
        energy_weight=base.energy_weight if args.energy_weight is None else args.energy_weight,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the MAP estimator to a marginal dataset")
    fit.add_argument("--data", required=True, help="dataset (.json or .csv)")
    fit.add_argument("--overall-mean", type=float, default=None, help="overall mean for CSV input")
    fit.add_argument("--tau2", type=float, default=None, help="effective noise variance sigma^2/N")
    fit.add_argument("--out", default=None, help="write the fit as JSON here")
    _add_prior_flags(fit)

    noise = sub.add_parser("estimate-noise", help="robust noise-level estimate of a dataset")
    noise.add_argument("--data", required=True)
    noise.add_argument("--overall-mean", type=float, default=None)

    for name, helptext in (("simulate", "run the simulation study"), ("compare", "MAP vs SPAM with oracle lambda")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="scenario JSON; flags override its fields")
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--snr", type=_floats, default=None, help="comma-separated SNR levels")
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tau2", type=float, default=None, help="fixed noise variance instead of the MAD estimate")
        p.add_argument("--lambda", dest="lam", type=_floats, default=None,
                       help="SPAM threshold per SNR level (comma list)")
        p.add_argument("--lambda-grid", type=_grid, default=None, help="oracle grid, start:stop:step")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", required=True, help="report CSV")
        p.add_argument("--json", default=None, help="JSON mirror of the report")
        p.add_argument("--detail", action="store_true", help="include per-replication records in the JSON")
        if name == "simulate":
            p.add_argument("--spam", action="store_true", help="add SPAM rows")
        _add_prior_flags(p)

    check = sub.add_parser("check", help="compare the MAP search with exhaustive enumeration")
    check.add_argument("--instances", type=int, default=200)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def cmd_fit(args) -> int:
    data = io.load_dataset(args.data, args.overall_mean)
    cfg = _prior_from(args, PriorConfig())
    report = validate_priors(cfg, data.design)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    fit = map_fit(data, cfg, tau2_override=args.tau2)
    if args.out:
        io.write_json(fit.to_json(), args.out)
    print(f"selected axes: {sorted(fit.selected)}")
    print(f"cut-points: {fit.cutpoints}")
    print(f"tau_hat: {math.sqrt(fit.tau2):.6g}  (tau2 {fit.tau2:.6g})")
    print(f"objective: {fit.objective:.6g}")
    return EXIT_OK


def cmd_estimate_noise(args) -> int:
    data = io.load_dataset(args.data, args.overall_mean)
    tau = estimate_tau([forward_dft(m) for m in data.marginals])
    print(f"tau_hat: {tau:.6g}")
    print(f"tau2_hat: {tau * tau:.6g}")
    return EXIT_OK


def scenario_from(args, command: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if args.config:
        cfg = ScenarioConfig.from_json(json.loads(Path(args.config).read_text()))
    updates = {}
    for flag, fld in (("d", "d"), ("n", "n"), ("reps", "reps"), ("seed", "seed"),
                      ("tau2", "tau2"), ("workers", "workers")):
        if getattr(args, flag) is not None:
            updates[fld] = getattr(args, flag)
    if args.snr is not None:
        updates["snr_levels"] = args.snr
    if args.lambda_grid is not None:
        updates["lambda_grid"] = args.lambda_grid
    updates["prior"] = _prior_from(args, cfg.prior)
    spam = command == "compare" or getattr(args, "spam", False) or cfg.spam
    updates["spam"] = spam
    snrs = updates.get("snr_levels", cfg.snr_levels)
    if command == "compare":
        updates["spam_lambdas"] = {}
    elif args.lam is not None:
        if len(args.lam) not in (1, len(snrs)):
            raise SamfitError(f"--lambda needs 1 or {len(snrs)} values, got {len(args.lam)}")
        lams = args.lam * len(snrs) if len(args.lam) == 1 else args.lam
        updates["spam_lambdas"] = dict(zip((float(s) for s in snrs), lams))
    return replace(cfg, **updates)


def cmd_simulate(args, command: str = "simulate") -> int:
    cfg = scenario_from(args, command)
    table = run_scenario(cfg, detail=args.detail)
    io.write_report_csv(table, args.out)
    if args.json:
        io.write_json(io.report_to_json(table, detail=args.detail), args.json)
    for r in table.rows:
        lam = "" if r.lam is None else f" lambda={r.lam:g}"
        print(f"snr={r.snr:g} {r.method}{lam}: amse={r.amse_global:.4f} d0_hat={r.d0_hat_mean:.2f}")
    return EXIT_OK


def cmd_check(args) -> int:
    tie_break = "last" if args.inject_fault else "first"
    failures = check_equivalence(args.instances, args.seed, tie_break)
    if not failures:
        print(f"all {args.instances} instances match exhaustive enumeration")
        return EXIT_OK
    inst, fit, (sel, cut, value) = failures[0]
    print(f"{len(failures)} of {args.instances} instances differ; first counterexample:")
    print(json.dumps(inst.to_json()))
    print(f"  MAP search : selected={sorted(fit.selected)} cutpoints={fit.cutpoints} objective={fit.objective!r}")
    print(f"  exhaustive : selected={sorted(sel)} cutpoints={cut} objective={value!r}")
    return EXIT_CHECK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "estimate-noise":
            return cmd_estimate_noise(args)
        if args.command in ("simulate", "compare"):
            return cmd_simulate(args, args.command)
        return cmd_check(args)
    except NumericDegeneracy as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SamfitError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
