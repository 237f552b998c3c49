import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from glmboot import BootstrapDistribution, GlmBootError, SingularMatrixError
from glmboot.inference import (
    CoverageAccumulator,
    ball_diagnostic,
    format_report,
    gaussian_region_covers,
    order_stat_index,
    percentile_ci,
    quantile,
    region_covers,
    region_radius,
    reports_from_csv,
    reports_to_csv,
)


def dist_from(col, n=100):
    piv = np.asarray(col, dtype=float)
    piv = piv[:, None] if piv.ndim == 1 else piv
    return BootstrapDistribution(piv, n, piv.shape[0], 0)


def test_worked_interval():
    ci = percentile_ci(dist_from(np.arange(1, 101)), [0.0], 0, 0.9)
    assert (ci.lower, ci.upper) == (-9.5, -0.5)
    assert ci.width == pytest.approx(9.0)


def test_one_sided_intervals():
    d = dist_from(np.arange(1, 101))
    right = percentile_ci(d, [0.0], 0, 0.9, "right_sided")
    left = percentile_ci(d, [0.0], 0, 0.9, "left_sided")
    assert right.lower == -math.inf and right.upper == -1.0
    assert left.upper == math.inf and left.lower == -9.0


def test_symmetric_pivots_give_symmetric_interval():
    ci = percentile_ci(dist_from(np.arange(-50, 51)), [0.0], 0, 0.9)
    assert ci.lower == -ci.upper


def test_zero_pivots_give_degenerate_interval():
    for side in ("two_sided", "left_sided", "right_sided"):
        ci = percentile_ci(dist_from(np.zeros(20)), [1.7], 0, 0.9, side)
        assert 1.7 in (ci.lower, ci.upper)
        assert ci.contains(1.7)


def test_order_statistic_guard():
    assert order_stat_index(0.95, 100) == 94
    assert order_stat_index(0.05, 100) == 4
    assert order_stat_index(1e-9, 10) == 0 and order_stat_index(1.0, 10) == 9


def test_region_examples():
    d = dist_from(np.arange(1, 101))
    assert region_covers(d, [3.0], [3.0], 100, 0.9)
    assert not region_covers(dist_from(np.zeros((30, 2))), [1.0, 0.0], [0.0, 0.0], 100, 0.9)
    # norm 94 against the 90th (level 0.9) and 95th (level 0.95) order statistics
    assert region_radius(d, 0.9) == 90.0
    assert not region_covers(d, [9.4], [0.0], 100, 0.9)
    assert region_covers(d, [9.4], [0.0], 100, 0.95)


def test_empty_distribution_and_bad_inputs():
    empty = BootstrapDistribution(np.empty((0, 1)), 10, 5, 5)
    with pytest.raises(GlmBootError):
        percentile_ci(empty, [0.0], 0, 0.9)
    with pytest.raises(GlmBootError):
        region_radius(empty, 0.9)
    with pytest.raises(ValueError):
        percentile_ci(dist_from([1.0, 2.0]), [0.0], 0, 1.0)
    with pytest.raises(ValueError):
        percentile_ci(dist_from([1.0, 2.0]), [0.0], 0, 0.9, "upper")


@given(arrays(np.float64, st.integers(5, 60), elements=st.floats(-100, 100)), st.floats(0.5, 0.99))
def test_region_matches_abs_interval_in_one_dimension(col, level):
    d = dist_from(col, n=25)
    radius = quantile(np.abs(col), level)
    for t in (0.0, radius / 5.0, radius / 5.0 + 1e-6, -radius / 5.0 - 1e-6):
        assert region_covers(d, [t], [0.0], 25, level) == (abs(t) * 5.0 <= radius)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e3, 1e3)),
       st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_quantile_monotone_with_extremes(v, p1, p2):
    lo, hi = sorted((p1, p2))
    assert quantile(v, lo) <= quantile(v, hi)
    assert quantile(v, 1e-12) == v.min() and quantile(v, 1.0) == v.max()


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-50, 50)), st.floats(0.5, 0.99))
def test_interval_ordered(col, level):
    ci = percentile_ci(dist_from(col), [0.3], 0, level)
    assert ci.lower <= ci.upper


def test_gaussian_region():
    assert gaussian_region_covers([0.0, 0.0], np.eye(2), 0.9)
    assert not gaussian_region_covers([3.0, 0.0], np.eye(2), 0.9)  # 9 > 4.605
    assert gaussian_region_covers([3.0, 0.0], 4 * np.eye(2), 0.9)
    with pytest.raises(SingularMatrixError):
        gaussian_region_covers([1.0, 1.0], np.ones((2, 2)), 0.9)


def test_ball_diagnostic_examples():
    assert ball_diagnostic(np.zeros((500, 3)), np.eye(3)) == pytest.approx(1.0)
    pm = np.r_[np.ones(100), -np.ones(100)][:, None]
    assert ball_diagnostic(pm, 1.0) == pytest.approx(0.6826894921, abs=1e-9)
    sigma = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.5]])
    z = np.random.default_rng(0).multivariate_normal(np.zeros(3), sigma, 100_000)
    # the KS null scale at m = 1e5 is ~0.004, so 0.01 is a comfortable bound
    assert ball_diagnostic(z, sigma) < 0.01
    assert ball_diagnostic(z, sigma, grid=200) <= ball_diagnostic(z, sigma) + 1e-12


def test_ball_diagnostic_rejects():
    with pytest.raises(ValueError):
        ball_diagnostic(np.zeros((50, 2)), np.eye(2))
    with pytest.raises(SingularMatrixError):
        ball_diagnostic(np.zeros((200, 2)), np.zeros((2, 2)))


def _random_report(seed, reps=30):
    rng = np.random.default_rng(seed)
    acc = CoverageAccumulator([1, 2, 3])
    flags = []
    for _ in range(reps):
        if rng.random() < 0.1:
            acc.exclude()
            continue
        ts, rs = rng.random(3) < 0.9, rng.random(3) < 0.9
        w, reg = rng.random(3), bool(rng.random() < 0.9)
        acc.add(ts, rs, w, reg)
        flags.append((ts, rs, w, reg))
    return acc.report("logistic", 100, 3, 3, seed), flags


def test_accumulator_matches_batch_means():
    rep, flags = _random_report(1)
    ts = np.array([f[0] for f in flags])
    assert np.allclose(rep.ts_coverage, ts.mean(axis=0), rtol=0, atol=1e-15)
    assert rep.region_coverage == np.mean([f[3] for f in flags])
    assert rep.reps == rep.successes + rep.excluded == 30
    assert all(0 <= v <= 1 for v in rep.ts_coverage + rep.rs_coverage)


def test_csv_round_trip():
    reports = [_random_report(s)[0] for s in range(3)]
    text = reports_to_csv(reports)
    assert text.splitlines()[0] == "family,n,d,d0,coefficient,ts_coverage,ts_width,rs_coverage,region_coverage,reps,excluded,seed"
    assert reports_from_csv(text) == reports


def test_format_report_layout():
    rep, _ = _random_report(2)
    out = format_report(rep, 0.9)
    assert "b1" in out and "(" in out and "region coverage" in out
