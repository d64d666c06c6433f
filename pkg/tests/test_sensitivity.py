import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest, rankdata

from sitdengue import sensitivity
from sitdengue.params import PARAM_RANGES, ValidationError, preset


def precision_prcc(x, y):
    """PRCC read off the inverse rank-correlation matrix."""
    ranks = np.column_stack([rankdata(c) for c in x.T] + [rankdata(y)])
    P = np.linalg.inv(np.corrcoef(ranks, rowvar=False))
    k = x.shape[1]
    return np.array([-P[j, k] / np.sqrt(P[j, j] * P[k, k]) for j in range(k)])


def test_lhs_one_point_per_decile():
    s = sensitivity.lhs_sample([(0.0, 1.0)], 10, seed=3)
    counts = np.bincount(np.floor(s[:, 0] * 10).astype(int), minlength=10)
    assert counts.tolist() == [1] * 10


def test_lhs_stratified_in_every_column():
    ranges = [(0, 1), (-5, 5), (100, 200)]
    s = sensitivity.lhs_sample(ranges, 50, seed=1)
    for j, (lo, hi) in enumerate(ranges):
        strata = np.floor((s[:, j] - lo) / (hi - lo) * 50).astype(int)
        assert sorted(strata) == list(range(50))


def test_lhs_deterministic():
    a = sensitivity.lhs_sample([(0, 1), (2, 3)], 20, seed=7)
    b = sensitivity.lhs_sample([(0, 1), (2, 3)], 20, seed=7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sensitivity.lhs_sample([(0, 1), (2, 3)], 20, seed=8))


def test_lhs_marginals_uniform():
    ranges = list(PARAM_RANGES.values())
    s = sensitivity.lhs_sample(ranges, 1000, seed=0)
    critical = 1.36 / np.sqrt(1000)
    for j, (lo, hi) in enumerate(ranges):
        assert kstest((s[:, j] - lo) / (hi - lo), "uniform").statistic < critical


def test_lhs_rejects_bad_ranges():
    with pytest.raises(ValidationError):
        sensitivity.lhs_sample([(1, 1)], 10)
    with pytest.raises(ValidationError):
        sensitivity.lhs_sample([(0, 1)], 1)


def test_prcc_perfect_dependence():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(100, 1))
    rep = sensitivity.prcc(x, x[:, 0], n_boot=200, seed=0)
    assert rep.prcc[0] == pytest.approx(1.0, abs=1e-12)


def test_prcc_null_model():
    # 95% intervals miss zero 5% of the time, so coverage is judged over
    # many seeds: 80 intervals, expected 76 hits, sd about 2
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=(1000, 4))
        y = rng.normal(size=1000)
        rep = sensitivity.prcc(x, y, n_boot=200, seed=seed)
        assert np.all(np.abs(rep.prcc) < 0.1)
        hits += int(np.sum((rep.ci_low < 0) & (rep.ci_high > 0)))
    assert hits >= 70


def test_prcc_synthetic_signs():
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(300, 3))
    y = 2 * x[:, 0] - x[:, 1] + 0.1 * rng.normal(size=300)
    rep = sensitivity.prcc(x, y, n_boot=200, seed=1)
    assert rep.prcc[0] > 0.5 and rep.prcc[1] < -0.5
    assert abs(rep.prcc[2]) < 0.2


def test_prcc_matches_precision_matrix():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(200, 5))
    y = np.exp(x[:, 0]) - x[:, 3] ** 3 + 0.5 * rng.normal(size=200)
    np.testing.assert_allclose(sensitivity.prcc_values(x, y), precision_prcc(x, y), atol=1e-10)


@given(st.integers(0, 10_000), st.integers(0, 2), st.sampled_from(["exp", "cube", "affine"]))
def test_prcc_invariant_under_monotone_transform(seed, column, kind):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 2.0, size=(60, 3))
    y = x[:, 0] - 2 * x[:, 1] + rng.normal(size=60)
    z = x.copy()
    f = {"exp": np.exp, "cube": lambda v: v ** 3, "affine": lambda v: 3 * v - 7}[kind]
    z[:, column] = f(z[:, column])
    np.testing.assert_allclose(sensitivity.prcc_values(z, y), sensitivity.prcc_values(x, y), atol=1e-12)


def test_ci_contains_point_estimate():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(40, 3))
    y = x[:, 0] + rng.normal(size=40)
    rep = sensitivity.prcc(x, y, n_boot=100, seed=4)
    assert np.all(rep.ci_low <= rep.prcc) and np.all(rep.prcc <= rep.ci_high)


def test_ci_shrinks_with_sample_size():
    widths = {200: [], 1000: []}
    for seed in range(10):
        for n in widths:
            rng = np.random.default_rng(seed)
            x = rng.uniform(size=(n, 3))
            y = x[:, 0] - x[:, 1] + rng.normal(size=n)
            rep = sensitivity.prcc(x, y, n_boot=200, seed=seed)
            widths[n].append(np.median(rep.ci_high - rep.ci_low))
    assert np.median(widths[1000]) < np.median(widths[200])


def test_collinear_inputs_rejected():
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(50, 3))
    x[:, 2] = x[:, 0]
    with pytest.raises(ValidationError, match="x0.*x2|x2.*x0"):
        sensitivity.prcc(x, rng.normal(size=50), n_boot=10)
    x[:, 2] = 1.0
    with pytest.raises(ValidationError, match="constant"):
        sensitivity.prcc(x, rng.normal(size=50), n_boot=10)


def test_zero_width_ranges_fix_parameters():
    base = preset().as_dict()
    ranges = {k: (base[k], base[k]) for k in PARAM_RANGES}
    ranges["phi"] = (5.0, 11.0)
    ranges["lambda_tot"] = (0.0, 0.0)
    rep = sensitivity.sensitivity_run(p_ranges=ranges, n=30, n_boot=50, seed=0,
                                      window=(200, 300), workers=1)
    nonzero = [name for name, v in zip(rep.names, rep.prcc) if v != 0]
    assert nonzero == ["phi"]
    assert rep.prcc[rep.names.index("phi")] > 0.9


def test_unknown_selector():
    with pytest.raises(ValidationError, match="selector"):
        sensitivity.sensitivity_run(output_selector="nope", n=5)


@pytest.fixture(scope="module")
def large_run():
    return sensitivity.sensitivity_run(n=1000, n_boot=100, seed=0)


def test_top_ranking_stable_across_sample_sizes(large_run):
    small = sensitivity.sensitivity_run(n=100, n_boot=100, seed=0)
    assert small.top(3) == large_run.top(3)


def test_report_csv_and_metadata(large_run):
    lines = large_run.to_csv().splitlines()
    assert lines[0] == "parameter,prcc,ci_low,ci_high"
    assert len(lines) == len(PARAM_RANGES) + 1
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert values == sorted(values)
    meta = large_run.metadata()
    assert meta["seed"] == 0 and meta["selector"] == "F_wild_total" and meta["window"] == [800.0, 1000.0]
    assert meta["n"] + meta["n_failed"] == 1000


def test_parallel_matches_serial():
    a = sensitivity.sensitivity_run(n=40, n_boot=20, seed=3, workers=1, window=(100, 200))
    b = sensitivity.sensitivity_run(n=40, n_boot=20, seed=3, workers=2, window=(100, 200))
    assert a.to_csv() == b.to_csv()
