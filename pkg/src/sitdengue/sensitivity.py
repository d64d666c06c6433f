"""Latin hypercube sampling and partial rank correlation coefficients."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc, rankdata

from .dynamics import INDEX, IntegrationError, Schedule, integrate
from .params import PARAM_RANGES, ValidationError, params_from_mapping, preset_mapping
from .workers import map_jobs

SELECTORS = {
    "F_wild_total": ("F_WS", "F_WE", "F_WI"),
    "S_I": ("S_I",),
    "F_WI": ("F_WI",),
    "I_h": ("I_h",),
}
MAX_FAILED_FRACTION = 0.01


def lhs_sample(ranges, n, seed=None):
    """n x k Latin hypercube over the (low, high) pairs in ranges.

    Every column has exactly one point in each of its n equal-width strata.
    """
    ranges = [tuple(map(float, r)) for r in ranges]
    bad = [i for i, (lo, hi) in enumerate(ranges) if not lo < hi]
    if bad:
        raise ValidationError([f"range {i} must satisfy low < high, got {ranges[i]}" for i in bad])
    if n < 2:
        raise ValidationError("n must be >= 2")
    unit = qmc.LatinHypercube(d=len(ranges), seed=np.random.default_rng(seed)).random(n)
    lows = np.array([lo for lo, _ in ranges])
    highs = np.array([hi for _, hi in ranges])
    return lows + unit * (highs - lows)


def _residuals(target, design):
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return target - design @ coef


def _check_design(ranks, names):
    const = [names[j] for j in range(ranks.shape[1]) if np.ptp(ranks[:, j]) == 0]
    if const:
        raise ValidationError(f"constant input columns: {', '.join(const)}")
    design = np.column_stack([np.ones(len(ranks)), ranks])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        # name the columns that are explained by the others
        culprits = []
        for j in range(ranks.shape[1]):
            others = np.delete(design, j + 1, axis=1)
            res = _residuals(ranks[:, j], others)
            if np.linalg.norm(res) <= 1e-9 * np.linalg.norm(ranks[:, j]):
                culprits.append(names[j])
        raise ValidationError(f"collinear input columns: {', '.join(culprits)}")


def _prcc_ranked(ranks, y_ranks):
    n, k = ranks.shape
    ones = np.ones((n, 1))
    out = np.zeros(k)
    for j in range(k):
        design = np.hstack([ones, np.delete(ranks, j, axis=1)])
        rx = _residuals(ranks[:, j], design)
        ry = _residuals(y_ranks, design)
        denom = np.sqrt((rx @ rx) * (ry @ ry))
        out[j] = rx @ ry / denom if denom > 0 else 0.0
    return np.clip(out, -1.0, 1.0)


def _rank_columns(x):
    return np.column_stack([rankdata(c) for c in x.T]) if x.size else x


def prcc_values(inputs, output):
    """Point PRCC of each input column against output."""
    x = np.asarray(inputs, dtype=float)
    return _prcc_ranked(_rank_columns(x), rankdata(np.asarray(output, dtype=float)))


@dataclass
class SensitivityReport:
    names: list
    prcc: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int
    output_name: str = ""
    window: tuple | None = None
    level: float = 0.95
    n_boot: int = 0
    seed: int | None = None
    n_failed: int = 0

    def ordered(self):
        """(name, prcc, low, high) rows from the most negative to the most positive."""
        order = np.argsort(self.prcc, kind="stable")
        return [(self.names[i], float(self.prcc[i]), float(self.ci_low[i]), float(self.ci_high[i]))
                for i in order]

    def top(self, count):
        """Names of the count parameters with the largest |PRCC|."""
        order = np.argsort(-np.abs(self.prcc), kind="stable")
        return [self.names[i] for i in order[:count]]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "prcc", "ci_low", "ci_high"])
        for name, v, lo, hi in self.ordered():
            w.writerow([name, repr(v), repr(lo), repr(hi)])
        return buf.getvalue()

    def metadata(self):
        return {
            "n": self.n,
            "n_failed": self.n_failed,
            "n_boot": self.n_boot,
            "level": self.level,
            "seed": self.seed,
            "window": list(self.window) if self.window is not None else None,
            "selector": self.output_name,
        }


def prcc(inputs, output, n_boot=1000, level=0.95, seed=None, names=None, output_name=""):
    """PRCC of every input column with bootstrap percentile intervals.

    The interval is widened when needed so it always contains the point
    estimate.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(output, dtype=float)
    if x.ndim != 2 or len(x) != len(y):
        raise ValidationError("inputs must be n x k and match the output length")
    n, k = x.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if n <= k + 2:
        raise ValidationError(f"need more than k+2={k + 2} samples, got {n}")
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")
    ranks = _rank_columns(x)
    _check_design(ranks, names)
    point = _prcc_ranked(ranks, rankdata(y))

    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        xb = _rank_columns(x[idx])
        if np.any(np.ptp(xb, axis=0) == 0):
            continue
        boots.append(_prcc_ranked(xb, rankdata(y[idx])))
    if boots:
        boots = np.array(boots)
        tail = 100 * (1 - level) / 2
        low = np.percentile(boots, tail, axis=0)
        high = np.percentile(boots, 100 - tail, axis=0)
    else:
        low = high = point.copy()
    low = np.minimum(low, point)
    high = np.maximum(high, point)
    return SensitivityReport(names, point, low, high, n, output_name, None, level, n_boot, seed)


def _window_mean(traj, columns, window):
    t = traj.times
    mask = (t >= window[0]) & (t <= window[1])
    values = sum(traj.states[mask, INDEX[c]] for c in columns)
    return float(np.mean(values))


def _row_output(job):
    mapping, selector, window, rtol = job
    try:
        p = params_from_mapping(mapping)
    except ValidationError:
        return None
    i0 = 0.0 if selector == "F_wild_total" else 1.0
    schedule = Schedule(t_sit_start=0.0, t_denv=0.0, i0=i0, horizon=float(window[1]))
    try:
        traj = integrate(p, schedule, rtol=rtol)
    except IntegrationError:
        return None
    return _window_mean(traj, SELECTORS[selector], window)


def sensitivity_run(p_ranges=None, output_selector="F_wild_total", window=(800.0, 1000.0),
                    n=500, n_boot=1000, seed=0, base="baseline", level=0.95,
                    rtol=1e-6, workers=None):
    """LHS over p_ranges, simulate each row, PRCC of the window mean.

    Parameters not in p_ranges, or with a zero-width range, stay at their
    base value and are reported with PRCC 0.  mu_I is raised to mu_S when
    a draw puts it below.  Rows whose integration fails are dropped; more
    than 1% failures is an error.
    """
    if output_selector not in SELECTORS:
        raise ValidationError(f"unknown selector '{output_selector}' (known: {', '.join(SELECTORS)})")
    window = (float(window[0]), float(window[1]))
    if not 0 <= window[0] < window[1]:
        raise ValidationError("window must satisfy 0 <= start < end")
    p_ranges = dict(PARAM_RANGES if p_ranges is None else p_ranges)
    base_map = preset_mapping(base) if isinstance(base, str) else dict(base)
    varied = [k for k, (lo, hi) in p_ranges.items() if hi > lo]
    fixed = {k: lo for k, (lo, hi) in p_ranges.items() if hi == lo}
    bad = [k for k, (lo, hi) in p_ranges.items() if hi < lo]
    if bad:
        raise ValidationError([f"{k}: range low > high" for k in bad])

    sample = lhs_sample([p_ranges[k] for k in varied], n, seed)
    jobs = []
    for row in sample:
        mapping = dict(base_map, **fixed)
        mapping.update(zip(varied, map(float, row)))
        if "mu_I" in mapping and "mu_S" in mapping:
            mapping["mu_I"] = max(mapping["mu_I"], mapping["mu_S"])
        jobs.append((mapping, output_selector, window, rtol))
    outputs = map_jobs(_row_output, jobs, workers)

    ok = np.array([v is not None for v in outputs])
    n_failed = int((~ok).sum())
    if n_failed > MAX_FAILED_FRACTION * n:
        raise RuntimeError(f"{n_failed} of {n} simulations failed")
    y = np.array([v for v in outputs if v is not None])
    report = prcc(sample[ok], y, n_boot=n_boot, level=level, seed=seed, names=varied,
                  output_name=output_selector)
    names = list(p_ranges)
    full = {k: (0.0, 0.0, 0.0) for k in names}
    for j, k in enumerate(varied):
        full[k] = (report.prcc[j], report.ci_low[j], report.ci_high[j])
    return SensitivityReport(
        names=names,
        prcc=np.array([full[k][0] for k in names]),
        ci_low=np.array([full[k][1] for k in names]),
        ci_high=np.array([full[k][2] for k in names]),
        n=int(ok.sum()),
        output_name=output_selector,
        window=window,
        level=level,
        n_boot=n_boot,
        seed=seed,
        n_failed=n_failed,
    )
