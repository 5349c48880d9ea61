"""Command-line front end.

Angles cross the boundary in degrees (theta, tau and the surface gamma grid);
gamma truth values also accept radians, either with a ``rad`` suffix or as a
pi expression such as ``pi/9``. Everything downstream works in radians.

A ``--config`` file holds one ``key = value`` pair per line (``#`` starts a
comment); keys are flag names without the leading dashes. Flags given on the
command line override the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import asdict

import numpy as np

from . import bounds, model
from .bayes import DEFAULT_GRID_RES, HANDOFF_MODES, LIKELIHOOD_MODES
from .errors import QubitStepError, SingularInformation
from .model import ORDERINGS, ParamPoint
from .sim import CLASSICAL_VT, CampaignConfig, ConfigError, run_campaign
from .table import FORMATS, OutputTable

EXIT_USAGE = 2
EXIT_STRICT = 3

SURFACE_COLUMNS = [
    "theta",
    "gamma",
    "r_beta_theta_first",
    "r_beta_gamma_first",
    "r_opt_theta_first",
    "r_opt_gamma_first",
    "beta_star_theta_first",
    "beta_star_gamma_first",
    "c_holevo",
    "det_q",
    "status",
]
STEPWISE_COLUMNS = [
    "theta_true_deg",
    "gamma_true_rad",
    "gamma_hat",
    "d_gamma",
    "theta_hat",
    "d_theta",
    "vt_classical_gamma",
    "vt_classical_theta",
    "sigma_total",
    "reps",
    "seed",
    "status",
]
COMPARE_COLUMNS = [
    "tau_deg",
    "ordering",
    "theta_true_deg",
    "sigma_total_mean",
    "sigma_total_std",
    "vt_quantum_je_trace",
    "ratio",
    "status",
]

# campaign config fields as they are spelled on the command line
FIELD_FLAGS = {
    "points": "--theta",
    "n_total": "--n-per-batch",
    "beta": "--beta",
    "taus": "--tau",
    "orderings": "--order",
    "mode": "--likelihood",
    "repetitions": "--reps",
    "grid_res": "--grid-res",
    "handoff": "--handoff",
    "classical_vt": "--vt-method",
    "workers": "--workers",
}

log = logging.getLogger("qubitstep")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsing

_PI_EXPR = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


def parse_angle(text: str, default_unit: str = "deg") -> float:
    """Angle in radians from ``20``, ``20deg``, ``0.35rad`` or ``2pi/9``.

    Bare numbers are read in ``default_unit``.
    """
    s = text.strip().lower()
    m = _PI_EXPR.match(s)
    if m:
        coef = m.group(1)
        coef = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
        return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    unit = default_unit
    for suffix in ("rad", "deg"):
        if s.endswith(suffix):
            s, unit = s[: -len(suffix)], suffix
            break
    try:
        value = float(s)
    except ValueError:
        raise ValueError(f"not an angle: {text!r}") from None
    return value if unit == "rad" else math.radians(value)


def parse_range(text: str, default_unit: str = "deg") -> np.ndarray:
    """``start:stop:count`` (inclusive, like linspace) or a single angle, in radians."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([parse_angle(parts[0], default_unit)])
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:count, got {text!r}")
    start, stop = (parse_angle(p, default_unit) for p in parts[:2])
    try:
        count = int(parts[2])
    except ValueError:
        raise ValueError(f"count must be an integer in {text!r}") from None
    if count < 1:
        raise ValueError(f"count must be >= 1 in {text!r}")
    return np.linspace(start, stop, count)


def parse_list(text: str) -> list[float]:
    """Comma-separated angles in degrees, returned in radians."""
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return [parse_angle(t) for t in items]


def _flag_type(parser, name):
    """argparse type wrapper; argparse prefixes the message with the flag."""

    def convert(text):
        try:
            return parser(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    convert.__name__ = name
    return convert


def read_config(path: str) -> list[tuple[str, str]]:
    pairs = []
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path!r}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs.append((key.replace("_", "-"), value))
    return pairs


def config_argv(pairs, sub: argparse.ArgumentParser) -> list[str]:
    """Turn config pairs into flag tokens that precede the real command line."""
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    argv = []
    for key, value in pairs:
        if key in ("config", "help") or key not in known:
            raise UsageError(f"--config: unknown key {key!r}")
        action = known[key]
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"--config: {key} expects true or false, got {value!r}")
        else:
            argv.append(f"--{key}={value}")
    return argv


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *, campaign: bool) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value file; command-line flags override it")
    p.add_argument("--out", default="-", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv", help="output format (default: csv)")
    p.add_argument("--beta", type=_flag_type(float, "--beta"), default=0.5,
                   help="fraction of shots spent on the first parameter, in (0, 1) (default: 0.5)")
    p.add_argument("--strict", action="store_true", help="exit with status 3 if any row has status != ok")
    if not campaign:
        return
    p.add_argument("--seed", type=_flag_type(int, "--seed"), default=0, help="root RNG seed, u64 (default: 0)")
    p.add_argument("--grid-res", type=_flag_type(int, "--grid-res"), default=DEFAULT_GRID_RES,
                   help=f"posterior grid points per axis (default: {DEFAULT_GRID_RES})")
    p.add_argument("--likelihood", choices=LIKELIHOOD_MODES, default="gaussian",
                   help="binomial likelihood or its normal approximation (default: gaussian)")
    p.add_argument("--n-per-batch", type=_flag_type(int, "--n-per-batch"), default=10_000,
                   help="shots per batch at beta = 0.5; the total budget is twice this (default: 10000)")
    p.add_argument("--reps", type=_flag_type(int, "--reps"), default=200,
                   help="Monte Carlo repetitions per point (default: 200)")
    p.add_argument("--theta", type=_flag_type(parse_range, "--theta"), default="10:80:15",
                   help="theta sweep start:stop:count in degrees (default: 10:80:15)")
    p.add_argument("--gamma", type=_flag_type(parse_angle, "--gamma"), default="pi/9",
                   help="gamma truth; degrees, or radians as 0.35rad or pi/9 (default: pi/9)")
    p.add_argument("--handoff", choices=HANDOFF_MODES, default="gaussian",
                   help="stage-two prior: Gaussian refit or the full stage-one marginal (default: gaussian)")
    p.add_argument("--prior-offset", type=_flag_type(parse_list, "--prior-offset"), default=None,
                   metavar="DTHETA,DGAMMA",
                   help="shift prior centres away from the truth, degrees (default: centred)")
    p.add_argument("--workers", type=_flag_type(int, "--workers"), default=1,
                   help="worker threads; output does not depend on it (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubitstep",
        description="Stepwise vs joint estimation of a qubit rotation (theta, gamma). "
        "Angles on the command line are in degrees unless marked; internal units are radians.",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = subs.add_parser("surface", help="asymptotic ratios r_beta, r_opt and beta* over a (theta, gamma) grid")
    p.add_argument("--theta", type=_flag_type(parse_range, "--theta"), default="5:85:41",
                   help="theta grid start:stop:count in degrees (default: 5:85:41)")
    p.add_argument("--gamma", type=_flag_type(parse_range, "--gamma"), default="2:40:39",
                   help="gamma grid start:stop:count in degrees, or radians with a rad suffix (default: 2:40:39)")
    p.add_argument("--restarts", type=_flag_type(int, "--restarts"), default=8,
                   help="Holevo optimizer restarts per point (default: 8)")
    _common(p, campaign=False)
    p.set_defaults(func=cmd_surface)

    p = subs.add_parser("stepwise", help="Monte Carlo stepwise estimation over a theta sweep, one tau and ordering")
    _common(p, campaign=True)
    p.add_argument("--tau", type=_flag_type(parse_angle, "--tau"), default="5",
                   help="prior width in degrees (default: 5)")
    p.add_argument("--order", choices=ORDERINGS, default="gamma-first",
                   help="which parameter the first batch estimates (default: gamma-first)")
    p.add_argument("--vt-method", choices=CLASSICAL_VT, default="marginal",
                   help="classical stepwise Van Trees construction (default: marginal)")
    p.set_defaults(func=cmd_stepwise)

    p = subs.add_parser("compare", help="mean total error vs the joint quantum Van Trees bound, truths drawn from the prior")
    _common(p, campaign=True)
    p.add_argument("--tau", type=_flag_type(parse_list, "--tau"), default="2.5,5,10",
                   help="comma-separated prior widths in degrees (default: 2.5,5,10)")
    p.add_argument("--order", choices=ORDERINGS + ("both",), default="both",
                   help="ordering(s) to run (default: both)")
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("bounds", help="single-point bound report as JSON")
    p.add_argument("--theta", type=_flag_type(parse_angle, "--theta"), required=True, help="theta in degrees")
    p.add_argument("--gamma", type=_flag_type(parse_angle, "--gamma"), required=True,
                   help="gamma in degrees, or radians as 0.35rad or pi/9")
    p.add_argument("--order", choices=ORDERINGS, default="gamma-first",
                   help="which parameter is estimated first (default: gamma-first)")
    p.add_argument("--config", metavar="PATH", help="key = value file; command-line flags override it")
    p.add_argument("--out", default="-", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--beta", type=_flag_type(float, "--beta"), default=0.5,
                   help="fraction of shots spent on the first parameter, in (0, 1) (default: 0.5)")
    p.set_defaults(func=cmd_bounds)
    return parser


# ---------------------------------------------------------------------------
# subcommands


def _deg(x: float) -> float:
    return math.degrees(x)


def cmd_surface(args) -> OutputTable:
    if not 0.0 < args.beta < 1.0:
        raise UsageError(f"--beta: must lie in (0, 1), got {args.beta}")
    if args.restarts < 1:
        raise UsageError(f"--restarts: must be >= 1, got {args.restarts}")
    table = OutputTable(SURFACE_COLUMNS)
    for theta in args.theta:
        for gamma in args.gamma:
            p = ParamPoint(float(theta), float(gamma))
            q = model.qfim(p)
            row = dict.fromkeys(SURFACE_COLUMNS, math.nan)
            row.update(theta=_deg(p.theta), gamma=_deg(p.gamma), det_q=q.det, status="ok")
            try:
                c_h = bounds.holevo_bound(p, restarts=args.restarts)
                row["c_holevo"] = c_h
                for ordering in ORDERINGS:
                    tag = ordering.replace("-", "_")
                    r_beta, r_opt, beta_star = bounds.ratio_r(p, args.beta, ordering, c_holevo=c_h)
                    row[f"r_beta_{tag}"] = r_beta
                    row[f"r_opt_{tag}"] = r_opt
                    row[f"beta_star_{tag}"] = beta_star
            except SingularInformation as exc:
                # masked: C_H has no finite value and the ratios are undefined
                row["c_holevo"] = math.inf
                row["status"] = type(exc).__name__
            except QubitStepError as exc:
                row["status"] = type(exc).__name__
            table.append(row)
    return table


def _campaign_config(args, taus, orderings, **kw) -> CampaignConfig:
    offset = args.prior_offset
    if offset is not None and len(offset) != 2:
        raise UsageError("--prior-offset: expected two angles DTHETA,DGAMMA")
    return CampaignConfig.theta_sweep(
        args.theta,
        args.gamma,
        n_total=2 * args.n_per_batch,
        beta=args.beta,
        taus=tuple(taus),
        orderings=tuple(orderings),
        mode=args.likelihood,
        repetitions=args.reps,
        seed=args.seed,
        prior_policy="offset" if offset is not None else "at-truth",
        prior_offset=tuple(offset) if offset is not None else (0.0, 0.0),
        grid_res=args.grid_res,
        handoff=args.handoff,
        workers=args.workers,
        **kw,
    )


def cmd_stepwise(args) -> OutputTable:
    cfg = _campaign_config(args, [args.tau], [args.order], classical_vt=args.vt_method)
    result = run_campaign(cfg)
    table = OutputTable(STEPWISE_COLUMNS)
    for r in result.records:
        table.append(
            [
                _deg(r.theta_true),
                r.gamma_true,
                r.gamma_hat,
                r.d_gamma,
                r.theta_hat,
                r.d_theta,
                r.vt_classical_gamma,
                r.vt_classical_theta,
                r.sigma_total_mean,
                r.reps,
                r.seed,
                r.status,
            ]
        )
    return table


def cmd_compare(args) -> OutputTable:
    orderings = ORDERINGS if args.order == "both" else (args.order,)
    cfg = _campaign_config(args, args.tau, orderings, truth_from_prior=True, classical_vt="off")
    result = run_campaign(cfg)
    table = OutputTable(COMPARE_COLUMNS)
    for r in result.records:
        table.append(
            [
                _deg(r.tau),
                r.ordering,
                _deg(r.theta_true),
                r.sigma_total_mean,
                r.sigma_total_std,
                r.vt_quantum_je_trace,
                r.ratio,
                r.status,
            ]
        )
    return table


def cmd_bounds(args) -> dict:
    if not 0.0 < args.beta < 1.0:
        raise UsageError(f"--beta: must lie in (0, 1), got {args.beta}")
    p = ParamPoint(args.theta, args.gamma)
    try:
        report = asdict(bounds.bound_report(p, args.beta, args.order))
        report["status"] = "ok"
    except QubitStepError as exc:
        report = {"theta": p.theta, "gamma": p.gamma, "ordering": args.order, "beta": args.beta,
                  "det_q": model.qfim(p).det, "status": type(exc).__name__}
    return report


# ---------------------------------------------------------------------------
# entry point


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _round_json(v):
    if isinstance(v, float) and math.isfinite(v):
        return float(f"{v:.9g}")
    return v


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            extra = config_argv(read_config(args.config), sub)
            args = parser.parse_args([args.command] + extra + argv[1:])
        result = args.func(args)
    except SystemExit as exc:  # argparse already printed its message
        return EXIT_USAGE if exc.code else 0
    except ConfigError as exc:
        lines = []
        for problem in exc.problems:
            name, _, msg = problem.partition(": ")
            lines.append(f"  {FIELD_FLAGS.get(name, name)}: {msg}")
        print(f"qubitstep {argv[0]}: error: invalid configuration:\n" + "\n".join(lines), file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"qubitstep {argv[0] if argv else ''}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if isinstance(result, dict):
        text = json.dumps({k: _round_json(v) for k, v in result.items()}, indent=2) + "\n"
        statuses = [result["status"]]
    else:
        text = result.emit(args.format)
        statuses = result.column("status")
    _write(text, args.out)
    bad = [s for s in statuses if s != "ok"]
    if bad and getattr(args, "strict", False):
        print(f"qubitstep: {len(bad)} row(s) with status != ok", file=sys.stderr)
        return EXIT_STRICT
    return 0


if __name__ == "__main__":
    sys.exit(main())
