"""Command-line front end.

Exit codes: 0 success, 2 usage/input error, 3 verification failure,
4 resource guardrail (codebook too large).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys

import numpy as np
import yaml

from . import capacity_engine as cap
from .channel import ChannelConfig
from .coding import DEFAULT_EPSILON, DEFAULT_N, DEFAULT_POWER_SLACK, MAX_SCALARS, simulate
from .errors import ConfigError, SingularMatrix, SizeOverflow
from .gaussian import build_joint_spec
from .mc import estimate_mi, estimate_rate_gap, verify_tightness

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RESOURCE = 0, 2, 3, 4
FORMAT_ENV = "NOISYDPC_FORMAT"
SWEEP_HEADER = ["param", "value", "capacity_bits", "mu"]

_NOMINAL = {"p": 10.0, "q": 5.0, "n0": 1.0}
DEFAULTS = {
    "capacity": {**_NOMINAL, "tx_noise": "", "rx_noise": "", "tol": 1e-9, "mc_tol": 0.01},
    "sweep": {**_NOMINAL, "tx_noise": "", "rx_noise": "", "steps": 11},
    "alpha": {**_NOMINAL, "n1": 2.0, "n2": 3.0, "tol": 1e-8},
    "fuse": {},
    "mc": {**_NOMINAL, "tx_noise": "2", "rx_noise": "3", "samples": 1_000_000, "tol": 0.01, "workers": 1},
    "simulate": {
        **_NOMINAL, "tx_noise": "2", "rx_noise": "3", "n": DEFAULT_N, "rate_frac": 0.5,
        "trials": 1000, "epsilon": DEFAULT_EPSILON, "power_slack": DEFAULT_POWER_SLACK,
        "max_scalars": MAX_SCALARS,
    },
}
# options that only steer the CLI itself and never come from a config file
_META = {"command", "config", "format", "verify"}


def parse_list(text) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _channel_args(p):
    p.add_argument("--p", type=float, help="transmit power P")
    p.add_argument("--q", type=float, help="interference power Q")
    p.add_argument("--n0", type=float, help="channel noise variance N0")
    p.add_argument("--tx-noise", help="comma list of transmitter observation noise variances")
    p.add_argument("--rx-noise", help="comma list of receiver observation noise variances")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisydpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML file of option values (flags win)")
        p.add_argument("--format", choices=["json", "csv", "text"])
        return p

    p = add("capacity", "capacity and residual interference fraction")
    _channel_args(p)
    p.add_argument("--verify", action="store_true", help="cross-check with the determinant (and Monte Carlo) paths")
    p.add_argument("--mc-samples", type=int, help="add a Monte Carlo estimate with this many samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="closed form vs determinant tolerance in bits")
    p.add_argument("--mc-tol", type=float, help="Monte Carlo tolerance in bits")

    p = add("sweep", "capacity (or R(alpha)) over a parameter range, as CSV")
    _channel_args(p)
    p.add_argument("--param", help="p, q, n0, tx-noise[i], rx-noise[i] or alpha")
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--steps", type=int)

    p = add("alpha", "optimal inflation coefficient, closed form and numeric")
    for name in ("p", "q", "n0", "n1", "n2"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--tol", type=float)

    p = add("fuse", "ML fusion of independent observations")
    p.add_argument("--noises", help="comma list of observation noise variances")

    p = add("mc", "Monte Carlo check of the mutual informations")
    _channel_args(p)
    p.add_argument("--alpha", type=float, help="inflation coefficient (default: optimal)")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--workers", type=int)

    p = add("simulate", "random-binning coding simulation")
    _channel_args(p)
    p.add_argument("--n", type=int, help="block length")
    p.add_argument("--rate-frac", type=float, help="rate as a fraction of capacity")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--power-slack", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-scalars", type=int)
    return parser


def _dests(parser, command):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return {a.dest for a in sub.choices[command]._actions if a.dest != "help"} - _META


def load_config_file(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def merge_options(args, parser) -> argparse.Namespace:
    allowed = _dests(parser, args.command)
    from_file = load_config_file(args.config) if args.config else {}
    # config keys are named like flags; --from/--to map to start/stop
    aliases = {"from": "start", "to": "stop"}
    from_file = {aliases.get(k, k): v for k, v in from_file.items()}
    for key in from_file:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
    defaults = DEFAULTS[args.command]
    for dest in allowed:
        if getattr(args, dest, None) is None:
            setattr(args, dest, from_file.get(dest, defaults.get(dest)))
    if args.format is None:
        args.format = os.environ.get(FORMAT_ENV, "csv" if args.command == "sweep" else "text")
    return args


def _config(args) -> ChannelConfig:
    return ChannelConfig(args.p, args.q, args.n0, parse_list(args.tx_noise), parse_list(args.rx_noise))


def _require_seed(args):
    if args.seed is None:
        raise ConfigError(f"'{args.command}' is randomized and requires --seed")


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def emit(result, fmt, out):
    rows = result if isinstance(result, list) else [result]
    if fmt == "json":
        clean = [{k: _num(v) for k, v in r.items()} for r in rows]
        json.dump(clean if isinstance(result, list) else clean[0], out, indent=2)
        out.write("\n")
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()})
        out.write(buf.getvalue())
    else:
        for i, r in enumerate(rows):
            if i:
                out.write("\n")
            width = max(len(k) for k in r)
            for k, v in r.items():
                out.write(f"{k:<{width}}  {v}\n")


def cmd_capacity(args):
    cfg = _config(args)
    report = cap.capacity(cfg)
    result = {"capacity_bits": report.value, "mu": report.detail["mu"], **cfg.to_dict()}
    if args.mc_samples is not None:
        _require_seed(args)
    if not args.verify:
        return result, True
    ok = True
    try:
        det = cap.capacity_via_determinants(cfg).value
        result["determinant_bits"] = det
        ok &= abs(det - report.value) <= args.tol
    except SingularMatrix as exc:
        result["determinant_bits"] = None
        result["determinant_note"] = f"skipped: {exc}"
    result["tol"] = args.tol
    if args.mc_samples is not None:
        spec = build_joint_spec(cfg)
        est = estimate_mi(spec, "X", ("Y",) + cfg.tx_labels + cfg.rx_labels, args.mc_samples, args.seed)
        result.update(mc_bits=est.value, mc_std_error=est.std_error, mc_samples=est.samples,
                      seed=est.seed, mc_tol=args.mc_tol)
        ok &= abs(est.value - report.value) <= args.mc_tol
    result["verified"] = bool(ok)
    return result, ok


_SWEEP_PARAM = re.compile(r"^(p|q|n0|alpha|(tx|rx)-noise\[(\d+)\])$")


def cmd_sweep(args):
    cfg = _config(args)
    m = _SWEEP_PARAM.match(args.param or "")
    if not m:
        raise ConfigError(f"bad --param {args.param!r}; expected p, q, n0, tx-noise[i], rx-noise[i] or alpha")
    if args.start is None or args.stop is None or args.steps is None or args.steps < 1:
        raise ConfigError("sweep needs --from, --to and --steps >= 1")
    if not (math.isfinite(args.start) and math.isfinite(args.stop)):
        raise ConfigError("sweep range must be finite")
    values = [args.start] if args.steps == 1 else np.linspace(args.start, args.stop, args.steps).tolist()
    name = args.param
    rows = []
    for v in values:
        row_cfg, extra = cfg, {}
        if name in ("p", "q", "n0"):
            row_cfg = cfg.with_(**{name: v})
        elif name == "alpha":
            extra["rate_bits"] = cap.achievable_rate(cfg, v).value
        else:
            side = "tx_noise" if m.group(2) == "tx" else "rx_noise"
            i = int(m.group(3))
            noises = list(getattr(cfg, side))
            if i >= len(noises):
                raise ConfigError(f"{name}: configuration has only {len(noises)} {side} entries")
            noises[i] = v
            row_cfg = cfg.with_(**{side: noises})
        report = cap.capacity(row_cfg)
        rows.append({"param": name, "value": v, "capacity_bits": report.value,
                     "mu": report.detail["mu"], **extra})
    return rows, True


def cmd_alpha(args):
    closed = cap.optimal_alpha_closed_form(args.p, args.q, args.n0, args.n1, args.n2)
    numeric = cap.optimal_alpha_numeric(args.p, args.q, args.n0, args.n1, args.n2, tol=min(args.tol, 1e-9))
    ok = abs(closed.alpha_star - numeric.alpha_star) <= args.tol
    result = {
        "alpha_closed_form": closed.alpha_star,
        "alpha_numeric": numeric.alpha_star,
        "rate_bits": closed.rate_at_alpha_star,
        "capacity_bits": cap.capacity(ChannelConfig(args.p, args.q, args.n0, (args.n1,), (args.n2,))).value,
        "tol": args.tol,
        "agree": bool(ok),
    }
    return result, ok


def cmd_fuse(args):
    noises = parse_list(args.noises)
    fused = cap.fuse_observations(noises)
    return {"noises": noises, "weights": list(fused.weights), "effective_variance": fused.effective_variance}, True


def cmd_mc(args):
    _require_seed(args)
    cfg = _config(args)
    full = cfg
    cfg = cap.reduce_config(cfg)
    n1, n2 = cap._single_pair(cfg)
    alpha = args.alpha
    if alpha is None:
        alpha = cap.optimal_alpha_closed_form(cfg.p, cfg.q, cfg.n0, n1, n2).alpha_star
    spec = build_joint_spec(cfg, alpha)
    seeds = np.random.SeedSequence(args.seed).generate_state(3)
    i1 = estimate_mi(spec, "U", ("Y", "M2"), args.samples, int(seeds[0]), args.workers)
    i2 = estimate_mi(spec, "U", "M1", args.samples, int(seeds[1]), args.workers)
    gap = estimate_rate_gap(cfg, alpha, args.samples, args.seed, args.workers)
    tight = verify_tightness(full, min(args.samples, 100_000), int(seeds[2]), workers=args.workers)
    analytic_gap = cap.achievable_rate(cfg, alpha).value
    checks = {
        "i_u_ym2": abs(i1.value - cap.mi_u_y_m2(cfg.p, cfg.q, cfg.n0, n1, n2, alpha)) <= args.tol,
        "i_u_m1": abs(i2.value - cap.mi_u_m1(cfg.p, cfg.q, n1, alpha)) <= args.tol,
        "rate_gap": abs(gap.value - analytic_gap) <= args.tol,
        "tightness": bool(tight.passed),
    }
    ok = all(checks.values())
    result = {
        "alpha": alpha,
        "i_u_ym2_mc": i1.value, "i_u_ym2_se": i1.std_error,
        "i_u_ym2_analytic": cap.mi_u_y_m2(cfg.p, cfg.q, cfg.n0, n1, n2, alpha),
        "i_u_m1_mc": i2.value, "i_u_m1_se": i2.std_error,
        "i_u_m1_analytic": cap.mi_u_m1(cfg.p, cfg.q, n1, alpha),
        "rate_gap_mc": gap.value, "rate_gap_se": gap.std_error, "rate_gap_analytic": analytic_gap,
        "capacity_bits": cap.capacity(full).value,
        "tightness_i_x_obs": tight.value, "tightness_se": tight.std_error,
        "samples": args.samples, "seed": args.seed, "tol": args.tol,
        **{f"pass_{k}": v for k, v in checks.items()},
    }
    return result, ok


def cmd_simulate(args):
    _require_seed(args)
    cfg = cap.reduce_config(_config(args))
    report = simulate(cfg, args.rate_frac, args.trials, args.seed, n=args.n, epsilon=args.epsilon,
                      power_slack=args.power_slack, alpha=args.alpha, max_scalars=args.max_scalars)
    result = report.to_dict()
    result["rate_frac"] = args.rate_frac
    result["capacity_bits"] = cap.capacity(cfg).value
    return result, True


COMMANDS = {
    "capacity": cmd_capacity,
    "sweep": cmd_sweep,
    "alpha": cmd_alpha,
    "fuse": cmd_fuse,
    "mc": cmd_mc,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = merge_options(args, parser)
        result, ok = COMMANDS[args.command](args)
    except SizeOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    emit(result, args.format, out)
    if not ok:
        print("verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
