"""Acceptance checks, one reported line per check.

Every check records PASS or FAIL with the measured value and the target
before asserting, and the lines are printed together at the end of the run.
"""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from sitdengue import equilibria, regimes, sensitivity, sweep, thresholds
from sitdengue.dynamics import (
    INDEX,
    Schedule,
    default_initial_conditions,
    equilibrium_rhs,
    integrate,
    jacobian,
)
from sitdengue.params import derived_quantities, preset

from oracles import (
    draw,
    finite_jacobian,
    gamma_bounds,
    offspring,
    q_value,
    ratio_roots_by_bisection,
    scan_roots,
)


def record(criterion, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  C{criterion:<2} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def within(got, want, rel):
    if want == 0:
        return abs(got) <= 1e-12
    return abs(got - want) <= rel * abs(want)


def near(criterion, name, got, want, rel):
    record(criterion, name, within(got, want, rel), f"got {got:.6g}, want {want:g} ±{rel:.0%}")


def sample(seed, n, accept, max_tries=200_000, **fixed):
    """n uniform draws from the sampling ranges that satisfy accept(p)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        p = draw(rng, **fixed)
        if accept(p):
            out.append(p)
            if len(out) == n:
                return out
    raise RuntimeError(f"only {len(out)} of {n} draws accepted")


# -- 1-3: scalar thresholds at the baseline ------------------------------------

def test_offspring_number():
    near(1, "baseline N", derived_quantities(preset()).N, 86.75, 0.01)


def test_basic_reproduction_number():
    near(2, "baseline R0^2", thresholds.r0_squared(preset()), 7.298, 0.01)


def test_critical_female_release():
    near(3, "Lambda_F^crit", thresholds.lambda_F_crit(preset()), 391, 0.02)


def test_critical_male_release():
    near(3, "Lambda_M^crit (eps=0.01)", thresholds.lambda_M_crit(preset(eps=0.01)), 3653, 0.02)


# -- 4: wild / sterile split of the reproduction number, eps = 0.01 ------------

SPLIT = {
    0.0: (0.0, 0.0, 0.0, 3.51),
    0.01: (0.0, 0.095, 0.095, 3.314),
    0.02: (0.422, 0.189, 0.61, 3.143),
    0.03: (0.527, 0.284, 0.81, 2.99),
    0.05: (0.701, 0.406, 1.17, 2.72),
}


@pytest.mark.parametrize("eps_F", sorted(SPLIT))
@pytest.mark.parametrize("part", ["wild", "sterile", "total", "r0_NElt1"])
def test_release_split(eps_F, part):
    p = preset(eps=0.01, eps_F=eps_F, lambda_tot=3700)
    sit = thresholds.r0_sit_squared(p)
    got = {
        "wild": sit.wild_part,
        "sterile": sit.sterile_part,
        "total": sit.total,
        "r0_NElt1": thresholds.r0_regime_thresholds(p)["r0_NElt1_sq"],
    }[part]
    want = SPLIT[eps_F][["wild", "sterile", "total", "r0_NElt1"].index(part)]
    near(4, f"eps=0.01 Lambda=3700 eps_F={eps_F} {part}", got, want, 0.03)


# -- 5: thresholds above N eps = 1, eps = 0.02 -----------------------------------

ABOVE = {
    0.0: (116.7, 2869, 3638, 0.925),
    0.01: (105.6, 2971, 3718, 1.064),
    0.02: (94.58, 3074, 3806, 1.20),
    0.03: (83.53, 3176, 3905, 1.34),
}


@pytest.mark.parametrize("eps_F", sorted(ABOVE))
@pytest.mark.parametrize("part, rel", [("r0_NEgt1", 0.02), ("crit_sharp", 0.02),
                                       ("crit_NEgt1", 0.02), ("r0_sit", 0.03)])
def test_thresholds_above_unit_N_eps(eps_F, part, rel):
    p = preset(eps=0.02, eps_F=eps_F, lambda_tot=3700)
    reg = thresholds.r0_regime_thresholds(p)
    got = {
        "r0_NEgt1": reg["r0_NEgt1_sq"],
        "crit_sharp": reg["lambda_M_crit_sharp"],
        "crit_NEgt1": reg["lambda_M_NEgt1_crit"],
        "r0_sit": thresholds.r0_sit_squared(p).total,
    }[part]
    want = ABOVE[eps_F][["r0_NEgt1", "crit_sharp", "crit_NEgt1", "r0_sit"].index(part)]
    near(5, f"eps=0.02 Lambda=3700 eps_F={eps_F} {part}", got, want, rel)


# -- 6-7: equilibria over random draws -------------------------------------------

@pytest.fixture(scope="module")
def random_draws():
    rng = np.random.default_rng(20240601)
    return [draw(rng) for _ in range(1000)]


def test_equilibrium_residuals(random_draws):
    worst, count = 0.0, 0
    for p in random_draws:
        for eq in equilibria.all_equilibria(p):
            worst = max(worst, eq.residual_norm)
            count += 1
    record(6, "max scaled residual over 1000 draws", worst < 1e-8,
           f"{worst:.2e} over {count} equilibria, want < 1e-8")


def predicted_positive_count(p):
    """Positive entomological equilibria expected from N eps and the release rate."""
    n = offspring(p)
    if n <= 1:
        return 0
    lam_m = p.lambda_M
    if lam_m == 0:
        return 1
    n_eps = n * p.eps
    scale = p.mu_MS / q_value(p)
    if math.isclose(n_eps, 1.0, rel_tol=1e-12):
        return 1 if lam_m < scale * (n - 1) else 0
    if n_eps > 1:
        return 1
    crit = scale * (math.sqrt(n * (1 - p.eps)) - math.sqrt(1 - n_eps)) ** 2
    if math.isclose(lam_m, crit, rel_tol=1e-12):
        return 1
    return 2 if lam_m < crit else 0


def test_entomological_equilibrium_structure(random_draws):
    count_mismatch, root_err, roots = 0, 0.0, 0
    for p in random_draws:
        found = [e for e in equilibria.sit_entomological_equilibria(p) if e.tag != "E0"]
        if len(found) != predicted_positive_count(p):
            count_mismatch += 1
        if p.lambda_M == 0 or offspring(p) <= 1:
            continue
        ratios = sorted(x for _, x in equilibria.positive_ratio_roots(p))
        oracle = sorted(ratio_roots_by_bisection(p))
        if len(oracle) != len(ratios):
            count_mismatch += 1
            continue
        for a, b in zip(ratios, oracle):
            root_err = max(root_err, abs(a - b) / b)
            roots += 1
    ok = count_mismatch == 0 and root_err < 1e-10
    record(7, "equilibrium counts and bisection roots", ok,
           f"{count_mismatch} count mismatches; max relative root gap {root_err:.1e} "
           f"over {roots} roots, want 0 and < 1e-10")


# -- 8: spectra --------------------------------------------------------------

def _below_unit(p):
    return offspring(p) > 1 and offspring(p) * p.eps < 1


def _has_lower_equilibrium(p):
    return _below_unit(p) and 0 < p.lambda_M < thresholds.lambda_M_crit(p) * (1 - 1e-9)


def _bistable_window(p):
    return _has_lower_equilibrium(p) and thresholds.r0_sit_squared(p).total < 1


def _label(p, tag):
    eq = next(e for e in equilibria.disease_free_equilibria(p) if e.tag == tag)
    return regimes.label_stability(p, eq).stability


def test_tdfe_stability_threshold():
    bad = 0
    for p in sample(81, 200, _below_unit):
        stable = _label(p, "TDFE") == "LAS"
        if stable != (thresholds.r0_tdfe_squared(p) < 1):
            bad += 1
    record(8, "TDFE LAS iff R0_TDFE^2 < 1 (N eps < 1)", bad == 0, f"{bad}/200 disagree")


def test_lower_equilibrium_unstable():
    bad = sum(_label(p, "DFE1") != "unstable" for p in sample(82, 200, _has_lower_equilibrium))
    record(8, "DFE1 unstable", bad == 0, f"{bad}/200 not unstable")


def test_bistability():
    bad = 0
    for p in sample(83, 200, _bistable_window):
        if _label(p, "TDFE") != "LAS" or _label(p, "DFE2") != "LAS":
            bad += 1
    record(8, "TDFE and DFE2 both LAS in the bistable window", bad == 0, f"{bad}/200 disagree")


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(84)
    worst = 0.0
    for _ in range(100):
        p = draw(rng, capacity=True)
        a, m, f, s = gamma_bounds(p)
        x = np.concatenate([rng.dirichlet([1, 1, 1]) * p.N_h,
                            rng.uniform(0, 1, 8) * [a, m, f / 3, f / 3, f / 3, s / 3, s / 3, s / 3]])
        J = jacobian(p, x)
        fd, noise = finite_jacobian(lambda y: equilibrium_rhs(y, p), x)
        # relative gap beyond the rounding noise of the differences themselves
        gap = np.maximum(np.abs(J - fd) - 10 * noise, 0) / np.maximum(np.abs(J), 1e-300)
        worst = max(worst, float(gap[np.abs(J - fd) > 10 * noise].max(initial=0.0)))
    record(8, "analytic Jacobian vs central differences, 100 states", worst < 1e-6,
           f"max relative gap {worst:.1e}, want < 1e-6")


# -- 9: dynamics ----------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.0, 0.01])
def test_elimination_within_1000_days(eps):
    lm = 1.1 * thresholds.lambda_M_crit(preset(eps=eps))
    p = preset(eps=eps, lambda_tot=lm)
    traj = integrate(p, Schedule(i0=0.0, horizon=1000))
    ratio = traj.final[INDEX["A"]] / derived_quantities(p).A_star
    record(9, f"(a) elimination, eps={eps}, Lambda_M=1.1 crit", ratio < 1e-3,
           f"A(1000)/A* = {ratio:.2e}, want < 1e-3")


@pytest.mark.parametrize("lam", [1e4, 1e5, 1e6])
def test_floor_above_unit_N_eps(lam):
    p = preset(eps=0.02, lambda_tot=lam)
    a_dagger = equilibria.sit_entomological_equilibria(p)[1].state[0]
    traj = integrate(p, Schedule(i0=0.0, horizon=3000))
    gap = abs(traj.final[INDEX["A"]] - a_dagger) / a_dagger
    record(9, f"(b) wild floor, eps=0.02, Lambda={lam:g}", gap < 1e-3,
           f"|A(3000) - A_dagger|/A_dagger = {gap:.1e}, want < 1e-3")


def _interior_start(rng, p):
    a, m, f, s = gamma_bounds(p)
    humans = rng.dirichlet([1, 1, 1]) * p.N_h
    wild = [rng.uniform(0, a), rng.uniform(0, m)]
    females = rng.dirichlet([1, 1, 1]) * rng.uniform(0, f)
    sterile = rng.dirichlet([1, 1, 1]) * rng.uniform(0, s)
    return np.concatenate([humans, wild, females, sterile])


def test_infection_persists():
    p = preset(eps=0.02, eps_F=0.05, lambda_tot=10000)
    assert derived_quantities(p).N * p.eps > 1 and thresholds.r0_tdfe_squared(p) > 1
    ee = equilibria.endemic_equilibria(p)[0].state
    infected = [INDEX["I_h"], INDEX["F_WI"], INDEX["S_I"]]
    floor = 1e-3 * ee[infected]
    rng = np.random.default_rng(91)
    lows = []
    for _ in range(5):
        traj = integrate(p, Schedule(i0=0.0, horizon=1000), ic=_interior_start(rng, p))
        late = traj.states[traj.times >= 500][:, infected]
        lows.append(float(np.min(late.min(axis=0) / ee[infected])))
    ok = all(low > 1e-3 for low in lows)
    record(9, "(c) persistence, 5 interior starts", ok,
           f"min infected / endemic level over [500,1000] d = {min(lows):.1e}, want > 1e-3 "
           "(floor " + ", ".join(f"{v:.2e}" for v in floor) + ")")


# -- 10: endemic cubic ------------------------------------------------------------

def test_endemic_cubic_root_counts():
    rng = np.random.default_rng(100)
    bad_rule = bad_scan = bad_lead = checked = 0
    while checked < 1000:
        p = draw(rng, capacity=True)
        if not p.mu_S < p.mu_I or derived_quantities(p).N <= 1:
            continue
        cls = equilibria.endemic_root_classification(p)
        coeffs = cls.coefficients
        bad_lead += coeffs[0] >= 0
        bad_rule += cls.count not in cls.descartes_counts
        top = 10 * max(derived_quantities(p).A_star, max(cls.roots, default=0.0))
        grid = np.union1d(np.linspace(0, top, 20001)[1:], np.geomspace(1e-9 * top, top, 20001))
        scanned = scan_roots(lambda x: np.polyval(coeffs, x), list(grid), vectorized=True)
        bad_scan += len(scanned) != cls.count
        checked += 1
    ok = bad_rule == bad_scan == bad_lead == 0
    record(10, "cubic roots vs sign rule and dense scan, 1000 draws", ok,
           f"sign-rule misses {bad_rule}, scan misses {bad_scan}, a3 >= 0 in {bad_lead}")


# -- 11: release timing heatmap and mechanical control --------------------------

@pytest.fixture(scope="module")
def heatmap():
    cfg = sweep.config_from_mapping({
        "eps": "0.01", "eps_F": "0.03",
        "schedule.t_denv": "400", "schedule.horizon": "400",
        "axis1.param": "schedule.t_sit_start", "axis1.min": "0", "axis1.max": "400", "axis1.steps": "20",
        "axis2.param": "lambda_tot", "axis2.min": "0", "axis2.max": "20000", "axis2.steps": "20",
        "metric": "r_eff_at_tdenv",
    })
    return sweep.run_sweep(cfg)


def test_early_start_lowers_risk(heatmap):
    # rows: start day ascending; columns: release rate, skipping Lambda = 0
    grid = heatmap.grid[:, 1:]
    earliest_lowest = np.all(grid[0] <= grid.min(axis=0))
    below_latest = np.all(grid[0] < grid[-1])
    record(11, "earliest release start gives the lowest R_eff(t_denv)", bool(earliest_lowest and below_latest),
           f"R_eff at start=0: {grid[0].min():.3g}..{grid[0].max():.3g}; "
           f"at start=400: {grid[-1].min():.3g}..{grid[-1].max():.3g}")


def test_female_contamination_at_top_of_axis(heatmap):
    top = heatmap.values[1][-1]
    crossed = 0.03 * top > thresholds.lambda_F_crit(preset())
    top_row = heatmap.grid[:, -1]
    ok = crossed and np.all(top_row > 1)
    record(11, "eps_F*Lambda > Lambda_F^crit at Lambda=20000 gives R_eff > 1", bool(ok),
           f"eps_F*Lambda = {0.03 * top:.0f}; min R_eff on that column {top_row.min():.3g}")


def test_mechanical_control_speeds_up():
    base = preset(eps=0.01, eps_F=0.01, lambda_tot=6000)
    ic = default_initial_conditions(base, Schedule(i0=0.0))
    times = {}
    for p_mc in (0.0, 0.4):
        traj = integrate(base.replace(p_mc=p_mc), Schedule(i0=0.0, horizon=1000), ic=ic)
        below = np.nonzero(traj.r_eff < 0.5)[0]
        times[p_mc] = float(traj.times[below[0]]) if len(below) else 1001.0
    record(11, "40% mechanical control shortens time to R_eff < 0.5", times[0.4] < times[0.0],
           f"{times[0.4]:.0f} d with control vs {times[0.0]:.0f} d without")


# -- 12: sensitivity ----------------------------------------------------------------

def test_prcc_unit_oracles():
    rng = np.random.default_rng(120)
    x = rng.uniform(size=(200, 1))
    perfect = sensitivity.prcc(x, x[:, 0], n_boot=200, seed=1).prcc[0]
    noise = sensitivity.prcc(rng.uniform(size=(1000, 3)), rng.normal(size=1000), n_boot=200, seed=2)
    null_ok = np.all(np.abs(noise.prcc) < 0.1) and np.all((noise.ci_low < 0) & (noise.ci_high > 0))
    xs = rng.uniform(size=(500, 2))
    signs = sensitivity.prcc(xs, 2 * xs[:, 0] - xs[:, 1] + 0.1 * rng.normal(size=500), n_boot=200, seed=3).prcc
    ok = perfect > 0.999 and null_ok and signs[0] > 0 and signs[1] < 0
    record(12, "PRCC oracles", bool(ok),
           f"perfect {perfect:.4f}; null |PRCC| max {np.abs(noise.prcc).max():.3f}; "
           f"signs {np.sign(signs).astype(int).tolist()}")


def test_lhs_stratification():
    s = sensitivity.lhs_sample([(0, 1)] * 5, 500, seed=0)
    exact = all(sorted(np.floor(s[:, j] * 500).astype(int)) == list(range(500)) for j in range(5))
    record(12, "LHS one point per stratum", exact, "500 strata x 5 columns")


@pytest.fixture(scope="module")
def entomological_run():
    return sensitivity.sensitivity_run(output_selector="F_wild_total", n=500, n_boot=200, seed=0)


TOP_GROUP = 6


@pytest.mark.parametrize("name", ["phi", "eps", "mu_MS", "mu_A1"])
def test_entomological_top_group(entomological_run, name):
    ranked = entomological_run.top(len(entomological_run.names))
    rank = ranked.index(name) + 1
    value = entomological_run.prcc[entomological_run.names.index(name)]
    record(12, f"{name} in top {TOP_GROUP} |PRCC| for wild females", rank <= TOP_GROUP,
           f"rank {rank}, PRCC {value:+.2f}; top {TOP_GROUP}: {', '.join(ranked[:TOP_GROUP])}")
