"""One- and two-dimensional parameter scans of simulation metrics.

A sweep config is a flat `key = value` file:

    preset = baseline
    eps = 0.01
    eps_F = 0.03
    schedule.t_denv = 400
    schedule.horizon = 1000
    axis1.param = schedule.t_sit_start
    axis1.min = 0
    axis1.max = 400
    axis1.steps = 20
    axis2.param = lambda_tot
    axis2.min = 0
    axis2.max = 20000
    axis2.steps = 20
    metric = r_eff_at_tdenv

Axis parameters are model parameters or `schedule.<field>`.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import thresholds
from .dynamics import (
    IntegrationError,
    Schedule,
    default_initial_conditions,
    effective_reproduction_number,
    integrate,
)
from .params import FIELDS, ValidationError, params_from_mapping, parse_key_values, preset_mapping
from .workers import map_jobs

METRICS = ("r_eff_at_tdenv", "r0_sit_sq", "final_A", "time_to_reff_below")
SCHEDULE_FIELDS = tuple(f.name for f in dataclasses.fields(Schedule))
MAX_FAILED_FRACTION = 0.05


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class Axis:
    param: str
    min: float
    max: float
    steps: int

    def values(self):
        return np.linspace(self.min, self.max, self.steps)


@dataclass
class SweepConfig:
    axes: list
    params: dict = field(default_factory=lambda: preset_mapping("baseline"))
    schedule: dict = field(default_factory=dict)
    metric: str = "r_eff_at_tdenv"
    threshold: float = 0.5
    rtol: float = 1e-6

    def validate(self):
        problems = []
        if not 1 <= len(self.axes) <= 2:
            problems.append("a sweep needs one or two axes")
        names = [a.param for a in self.axes]
        if len(set(names)) != len(names):
            problems.append("axes must reference distinct parameters")
        for a in self.axes:
            if a.steps < 2:
                problems.append(f"{a.param}: steps must be >= 2")
            if not _known_param(a.param):
                problems.append(f"unknown axis parameter '{a.param}'")
        if self.metric not in METRICS:
            problems.append(f"unknown metric '{self.metric}' (known: {', '.join(METRICS)})")
        if self.rtol <= 0:
            problems.append("rtol must be > 0")
        if problems:
            raise ValidationError(problems)
        # fail early on a bad base point rather than in every cell
        p, schedule = _cell_inputs(self, {})
        schedule.validate()
        return self


def _known_param(name):
    if name.startswith("schedule."):
        return name.split(".", 1)[1] in SCHEDULE_FIELDS
    return name in FIELDS or name == "K"


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes"):
        return True
    if value in ("0", "false", "no"):
        return False
    raise ValidationError(f"cannot parse {text!r} as a boolean")


def config_from_mapping(entries):
    """Build a SweepConfig from flat `key -> text` entries."""
    entries = dict(entries)
    base = entries.pop("preset", "baseline")
    params = preset_mapping(base)
    schedule = {}
    axes = {}
    metric = entries.pop("metric", "r_eff_at_tdenv")
    threshold = float(entries.pop("threshold", 0.5))
    rtol = float(entries.pop("rtol", 1e-6))
    for key, value in entries.items():
        if key.startswith(("axis1.", "axis2.")):
            axis, attr = key.split(".", 1)
            if attr not in ("param", "min", "max", "steps"):
                raise ValidationError(f"unknown axis field '{key}'")
            axes.setdefault(axis, {})[attr] = value
        elif key.startswith("schedule."):
            name = key.split(".", 1)[1]
            if name not in SCHEDULE_FIELDS:
                raise ValidationError(f"unknown schedule field '{name}'")
            schedule[name] = value
        elif key in FIELDS or key == "K":
            params[key] = value
        else:
            raise ValidationError(f"unknown config key '{key}'")
    if "axis2" in axes and "axis1" not in axes:
        raise ValidationError("axis2 given without axis1")
    parsed = []
    for name in sorted(axes):
        spec = axes[name]
        missing = [k for k in ("param", "min", "max", "steps") if k not in spec]
        if missing:
            raise ValidationError(f"{name}: missing {', '.join(missing)}")
        try:
            parsed.append(Axis(spec["param"], float(spec["min"]), float(spec["max"]), int(spec["steps"])))
        except ValueError as exc:
            raise ValidationError(f"{name}: {exc}") from None
    cfg = SweepConfig(parsed, params, schedule, metric, threshold, rtol)
    return cfg.validate()


def load_config(path):
    path = Path(path)
    return config_from_mapping(parse_key_values(path.read_text(), source=str(path)))


def _schedule_from(values):
    kwargs = {}
    for name, value in values.items():
        kwargs[name] = _parse_bool(value) if name == "use_reduced" else float(value)
    return Schedule(**kwargs)


def _cell_inputs(cfg, point):
    params = dict(cfg.params)
    schedule = dict(cfg.schedule)
    for name, value in point.items():
        if name.startswith("schedule."):
            schedule[name.split(".", 1)[1]] = value
        else:
            params[name] = value
    return params_from_mapping(params), _schedule_from(schedule)


def evaluate_metric(p, schedule, metric, threshold=0.5, rtol=1e-6):
    if metric == "r0_sit_sq":
        return thresholds.r0_sit_squared(p).total
    if metric == "r_eff_at_tdenv":
        if schedule.t_denv == 0:
            return effective_reproduction_number(default_initial_conditions(p, schedule), p)
        # nothing after the introduction matters, so stop there
        short = dataclasses.replace(schedule, horizon=schedule.t_denv)
        short = dataclasses.replace(short, t_sit_start=min(short.t_sit_start, short.horizon))
        return float(integrate(p, short, rtol=rtol).r_eff[-1])
    traj = integrate(p, schedule, rtol=rtol)
    if metric == "final_A":
        return float(traj.final[3])
    below = np.nonzero(traj.r_eff < threshold)[0]
    return float(traj.times[below[0]]) if len(below) else schedule.horizon + 1


def _cell(job):
    cfg, point = job
    try:
        p, schedule = _cell_inputs(cfg, point)
        return evaluate_metric(p, schedule, cfg.metric, cfg.threshold, cfg.rtol)
    except (IntegrationError, ValidationError):
        return math.nan


@dataclass
class SweepResult:
    axes: list
    values: list
    grid: np.ndarray
    metric: str
    n_failed: int

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if len(self.axes) == 1:
            w.writerow(["axis1", "metric"])
            for x, v in zip(self.values[0], self.grid):
                w.writerow([repr(float(x)), repr(float(v))])
        else:
            w.writerow(["axis1", "axis2", "metric"])
            for i, x in enumerate(self.values[0]):
                for j, y in enumerate(self.values[1]):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(self.grid[i, j]))])
        return buf.getvalue()

    def metadata(self):
        return {
            "axes": [dataclasses.asdict(a) for a in self.axes],
            "metric": self.metric,
            "n_failed": self.n_failed,
            "cells": int(self.grid.size),
        }


def run_sweep(cfg, workers=None):
    """Evaluate cfg.metric on every grid node; failed cells hold NaN."""
    cfg.validate()
    values = [a.values() for a in cfg.axes]
    names = [a.param for a in cfg.axes]
    nodes = np.stack(np.meshgrid(*values, indexing="ij"), axis=-1).reshape(-1, len(values))
    points = [dict(zip(names, map(float, node))) for node in nodes]
    results = map_jobs(_cell, [(cfg, pt) for pt in points], workers)
    grid = np.array(results, dtype=float).reshape([len(v) for v in values])
    n_failed = int(np.isnan(grid).sum())
    if n_failed > MAX_FAILED_FRACTION * grid.size:
        raise SweepError(f"{n_failed} of {grid.size} cells failed")
    return SweepResult(list(cfg.axes), values, grid, cfg.metric, n_failed)
