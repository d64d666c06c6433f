"""Command-line entry point.

Exit status: 0 on success, 2 when inputs fail validation, 1 when a
computation fails.  Results go to stdout (or --output); diagnostics go to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import equilibria, regimes, sensitivity, sweep, thresholds
from .dynamics import IntegrationError, Schedule, integrate
from .params import (
    FIELDS,
    PARAM_RANGES,
    PRESETS,
    ValidationError,
    derived_quantities,
    load_preset_file,
    parse_key_values,
    preset_mapping,
    params_from_mapping,
)
from .workers import WORKERS_ENV


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def to_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _parse_sets(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got '{item}'")
        key, value = (part.strip() for part in item.split("=", 1))
        if key in out:
            raise ValidationError(f"--set given twice for '{key}'")
        out[key] = value
    return out


def load_params(args):
    """Preset or parameter file, then --set overrides, then validation."""
    if getattr(args, "config", None) and args.command != "sweep":
        base = load_preset_file(args.config).as_dict()
    else:
        base = preset_mapping(args.preset)
    overrides = _parse_sets(args.set)
    if "K" in overrides:
        base.pop("mu_A2", None)
    base.update(overrides)
    return params_from_mapping(base)


def _write(args, text):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _write_metadata(args, meta):
    text = to_json(meta)
    if args.output:
        Path(str(args.output) + ".meta.json").write_text(text)
    else:
        sys.stderr.write(text)


def cmd_thresholds(args):
    p = load_params(args)
    out = thresholds.threshold_bundle(p).as_dict()
    out["derived"] = derived_quantities(p).as_dict()
    _write(args, to_json(out))


def cmd_equilibria(args):
    p = load_params(args)
    eqs = equilibria.all_equilibria(p)
    if args.check_stability:
        eqs = [regimes.label_stability(p, e) for e in eqs]
    out = {"equilibria": [e.as_dict() for e in eqs]}
    if p.mu_I > p.mu_S and not equilibria.close(p.mu_I, p.mu_S):
        c = equilibria.endemic_root_classification(p).as_dict()
        c.pop("equilibria")
        out["endemic_cubic"] = c
    _write(args, to_json(out))


def cmd_classify(args):
    p = load_params(args)
    report = regimes.classify_with_stability(p) if args.check_stability else regimes.classify(p)
    _write(args, to_json(report.as_dict()))


def cmd_simulate(args):
    p = load_params(args)
    schedule = Schedule(
        t_sit_start=args.t_sit_start,
        t_denv=args.t_denv,
        i0=args.i0,
        horizon=args.horizon,
        use_reduced=not args.full,
    )
    traj = integrate(p, schedule, rtol=args.rtol, atol=args.atol, dt_out=args.dt_out)
    names = list(traj.names)
    if args.format == "json":
        cols = {"t": traj.times, "R_eff": traj.r_eff}
        cols.update({n: traj.states[:, i] for i, n in enumerate(names)})
        _write(args, to_json(cols))
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + names + ["R_eff"])
    for t, row, r in zip(traj.times, traj.states, traj.r_eff):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in row] + [repr(float(r))])
    _write(args, buf.getvalue())


def cmd_sweep(args):
    entries = parse_key_values(Path(args.config).read_text(), source=args.config)
    for key, value in _parse_sets(args.set).items():
        entries[key] = value
    cfg = sweep.config_from_mapping(entries)
    result = sweep.run_sweep(cfg)
    if args.format == "json":
        _write(args, to_json({"values": result.values, "grid": result.grid, **result.metadata()}))
    else:
        _write(args, result.to_csv())
    _write_metadata(args, result.metadata())


def _parse_ranges(items):
    ranges = dict(PARAM_RANGES)
    for item in items or []:
        try:
            key, span = item.split("=", 1)
            lo, hi = (float(v) for v in span.split(":"))
        except ValueError:
            raise ValidationError(f"--range expects name=low:high, got '{item}'") from None
        key = key.strip()
        if key not in FIELDS:
            raise ValidationError(f"unknown parameter '{key}' in --range")
        ranges[key] = (lo, hi)
    return ranges


def cmd_sensitivity(args):
    p = load_params(args)
    report = sensitivity.sensitivity_run(
        p_ranges=_parse_ranges(args.range),
        output_selector=args.selector,
        window=(args.window_start, args.window_end),
        n=args.n,
        n_boot=args.n_boot,
        seed=args.seed,
        base=p.as_dict(),
    )
    if args.format == "json":
        rows = [dict(zip(("parameter", "prcc", "ci_low", "ci_high"), r)) for r in report.ordered()]
        _write(args, to_json({"rows": rows, **report.metadata()}))
    else:
        _write(args, report.to_csv())
    _write_metadata(args, report.metadata())


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sitdengue",
        description="Sterile insect releases and dengue risk: thresholds, equilibria, simulations.",
        epilog=f"Worker processes for sweep and sensitivity: ${WORKERS_ENV} (default: CPU count).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="json", formats=("json",)):
        p.add_argument("--preset", default="baseline", choices=sorted(PRESETS),
                       help="named parameter set (default: baseline)")
        p.add_argument("--config", help="parameter file of `name = value` lines")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one parameter; repeatable")
        p.add_argument("--output", "-o", help="write results here instead of stdout")
        p.add_argument("--format", choices=formats, default=default_format)
        p.add_argument("--seed", type=int, default=0, help="random seed (sensitivity only)")
        return p

    common(sub.add_parser("thresholds", help="critical release rates and reproduction numbers"))
    eq = common(sub.add_parser("equilibria", help="all equilibria with residuals"))
    eq.add_argument("--check-stability", action="store_true", help="label each by its Jacobian spectrum")
    cl = common(sub.add_parser("classify", help="qualitative outcome of the release programme"))
    cl.add_argument("--check-stability", action="store_true", help="also label every equilibrium")

    sim = common(sub.add_parser("simulate", help="integrate the model and write a time series"),
                 "csv", ("csv", "json"))
    sim.add_argument("--t-sit-start", type=float, default=0.0, help="day releases begin")
    sim.add_argument("--t-denv", type=float, default=0.0, help="day the virus is introduced")
    sim.add_argument("--i0", type=float, default=1.0, help="infected humans introduced")
    sim.add_argument("--horizon", type=float, default=1000.0, help="days to simulate")
    sim.add_argument("--full", action="store_true", help="track released males explicitly")
    sim.add_argument("--dt-out", type=float, default=1.0, help="output spacing in days")
    sim.add_argument("--rtol", type=float, default=1e-8)
    sim.add_argument("--atol", type=float, default=None, help="default 1e-10 * N_h")

    sw = sub.add_parser("sweep", help="grid scan from a sweep config file")
    sw.add_argument("--config", required=True, help="flat sweep config (axis1.*, axis2.*, metric, ...)")
    sw.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    sw.add_argument("--output", "-o", help="CSV path; metadata goes to <output>.meta.json")
    sw.add_argument("--format", choices=("json", "csv"), default="csv")

    se = common(sub.add_parser("sensitivity", help="LHS sampling with PRCC"), "csv", ("csv", "json"))
    se.add_argument("--selector", default="F_wild_total", choices=sorted(sensitivity.SELECTORS))
    se.add_argument("--n", type=int, default=500, help="LHS sample size")
    se.add_argument("--n-boot", type=int, default=1000, help="bootstrap replicates")
    se.add_argument("--window-start", type=float, default=800.0)
    se.add_argument("--window-end", type=float, default=1000.0)
    se.add_argument("--range", action="append", metavar="NAME=LOW:HIGH",
                    help="sampling range for one parameter; LOW=HIGH fixes it")
    return parser


COMMANDS = {
    "thresholds": cmd_thresholds,
    "equilibria": cmd_equilibria,
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "sensitivity": cmd_sensitivity,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, sweep.SweepError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
