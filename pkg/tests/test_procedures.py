"""Adaptive procedure unit tests: worked examples, sentinels, references."""
import math

import numpy as np
import pytest

from locpar import (
    AggregationKernel,
    CriticalValues,
    Gaussian,
    GridTooSmallError,
    InvalidArgumentError,
    LengthMismatchError,
    StepEstimates,
    build_grid,
    lcp_run,
    lcp_split_statistic,
    lms_select,
    run_method,
    sa_run,
    step_estimates,
)

from _cases import ALL_FAMILIES, interior_window, random_theta
from _reference import ref_lcp, ref_lms, ref_loglik, ref_mle, ref_sa

GAUSS = Gaussian()


def cv(*values):
    return CriticalValues(np.asarray(values, dtype=float))


# ----------------------------------------------------------------------
# step estimates
# ----------------------------------------------------------------------

def test_step_estimates_constant_series():
    grid = build_grid(40, 4, 1.5, 4)
    steps = step_estimates(GAUSS, np.full(40, 3.25), grid)
    np.testing.assert_array_equal(steps.estimates, np.full(4, 3.25))
    np.testing.assert_array_equal(steps.lengths, grid.lengths)


def test_step_estimates_single_scale():
    grid = build_grid(10, 5, 1.5, 1)
    data = np.arange(10, dtype=float)
    steps = step_estimates(GAUSS, data, grid)
    assert steps.estimates[0] == data[5:].mean()


def test_step_estimates_window_by_window():
    rng = np.random.default_rng(0)
    data = rng.normal(0, 1, 60)
    grid = build_grid(60, 5, 1.4, 5)
    steps = step_estimates(GAUSS, data, grid)
    for k in range(1, 6):
        n_k = grid.lengths[k - 1]
        assert steps.estimates[k - 1] == pytest.approx(data[60 - n_k:].mean(), abs=1e-14)


# ----------------------------------------------------------------------
# local model selection
# ----------------------------------------------------------------------

def test_lms_worked_example():
    steps = StepEstimates(np.array([0.0, 0.0, 5.0]), np.array([4, 8, 16]))
    res = lms_select(GAUSS, steps, cv(2.0, 2.0, 2.0))
    assert res.k_hat == 2
    assert res.theta_hat == 0.0
    # step 3: N_1*K(0,5)/z_1 = 25, N_2*K(0,5)/z_2 = 50; max is recorded
    assert res.statistics[2] == pytest.approx(50.0)
    assert list(res.decisions) == [True, True, False]


def test_lms_sentinels():
    steps = StepEstimates(np.array([1.0, 2.0, 3.0]), np.array([4, 8, 16]))
    res = lms_select(GAUSS, steps, cv(np.inf, np.inf, np.inf))
    assert res.k_hat == 3 and res.theta_hat == 3.0
    const = StepEstimates(np.array([2.0, 2.0, 2.0]), np.array([4, 8, 16]))
    res2 = lms_select(GAUSS, const, cv(1.0, 1.0, 1.0))
    assert res2.k_hat == 3  # all statistics are zero
    res3 = lms_select(GAUSS, steps, cv(0.0, 0.0, 0.0))
    assert res3.k_hat == 1 and res3.theta_hat == 1.0


def test_lms_monotone_in_thresholds():
    rng = np.random.default_rng(21)
    for family in ALL_FAMILIES:
        for _ in range(30):
            k_max = int(rng.integers(2, 6))
            lengths = np.cumsum(rng.integers(3, 9, size=k_max))
            estimates = np.array([random_theta(family, rng) for _ in range(k_max)])
            steps = StepEstimates(estimates, lengths)
            z = rng.uniform(0.1, 3.0, size=k_max)
            base = lms_select(family, steps, CriticalValues(z)).k_hat
            bumped = z.copy()
            bumped[rng.integers(0, k_max)] += rng.uniform(0.5, 5.0)
            assert lms_select(family, steps, CriticalValues(bumped)).k_hat >= base


def test_lms_length_mismatch():
    steps = StepEstimates(np.array([0.0, 1.0]), np.array([4, 8]))
    with pytest.raises(LengthMismatchError):
        lms_select(GAUSS, steps, cv(1.0))


# ----------------------------------------------------------------------
# local change point
# ----------------------------------------------------------------------

def test_lcp_constant_series_never_rejects():
    grid = build_grid(30, 4, 1.5, 4)
    res = lcp_run(GAUSS, np.full(30, 1.0), grid, cv(1.0, 1.0, 1.0))
    assert res.k_hat == 4
    np.testing.assert_allclose(res.statistics, 0.0, atol=1e-12)
    assert res.change_point is None


def test_lcp_zero_thresholds_reject_first():
    rng = np.random.default_rng(3)
    grid = build_grid(30, 4, 1.5, 4)
    res = lcp_run(GAUSS, rng.normal(0, 1, 30), grid, cv(0.0, 0.0, 0.0))
    assert res.k_hat == 1


def test_lcp_detects_jump_in_first_tested_set():
    # 16 zeros then 4 fives: the jump sits inside J_1 for lengths (4, 6, ...)
    data = np.concatenate([np.zeros(16), np.full(4, 5.0)])
    grid = build_grid(20, 4, 1.6, 4)  # lengths (4, 6, 10, 16)
    res = lcp_run(GAUSS, data, grid, cv(2.0, 2.0, 2.0))
    assert res.k_hat == 1
    assert res.statistics[0] > 2.0
    assert res.change_point == 16  # last index of the old regime
    assert res.theta_hat == 5.0  # estimate over the accepted window I_1


def test_lcp_statistic_identity_both_forms():
    # continuous families only: discrete ones can produce boundary means on
    # singleton split pieces, where the clamp intentionally perturbs the
    # identity (their scan logic is covered by the brute-force equivalence)
    rng = np.random.default_rng(17)
    for family in [f for f in ALL_FAMILIES if f.name in ("gaussian", "volatility", "exponential")]:
        for _ in range(20):
            theta = random_theta(family, rng)
            grid = build_grid(24, 4, 1.6, 4)
            data = interior_window(family, theta, 24, rng)
            for k in range(1, grid.k_max):
                stat, _tau = lcp_split_statistic(family, data, grid, k)
                # log-likelihood difference form, recomputed independently
                n = len(data)
                full = list(data[n - grid.lengths[k]:])
                theta_full = ref_mle(family.name, full)
                sigma = getattr(family, "sigma", 1.0)
                best = -math.inf
                for split in range(1, grid.lengths[k] - grid.lengths[k - 1] + 1):
                    left, right = full[:split], full[split:]
                    ll = (
                        ref_loglik(family.name, ref_mle(family.name, left), left, sigma)
                        + ref_loglik(family.name, ref_mle(family.name, right), right, sigma)
                        - ref_loglik(family.name, theta_full, full, sigma)
                    )
                    best = max(best, ll)
                assert abs(stat - best) <= 1e-9 * (1.0 + abs(stat))


def test_lcp_needs_two_scales_and_matching_cv():
    grid = build_grid(10, 5, 1.5, 1)
    with pytest.raises(GridTooSmallError):
        lcp_run(GAUSS, np.zeros(10), grid, cv())
    grid2 = build_grid(20, 4, 1.6, 3)
    with pytest.raises(LengthMismatchError):
        lcp_run(GAUSS, np.zeros(20), grid2, cv(1.0, 1.0, 1.0))


# ----------------------------------------------------------------------
# stagewise aggregation
# ----------------------------------------------------------------------

def test_sa_worked_example():
    steps = StepEstimates(np.array([0.0, 1.0]), np.array([4, 8]))
    res = sa_run(GAUSS, steps, cv(np.inf, 8.0), AggregationKernel(0.0))
    assert res.theta_hat == pytest.approx(0.5, abs=1e-15)
    assert res.gammas[1] == pytest.approx(0.5, abs=1e-15)
    assert res.statistics[1] == pytest.approx(4.0, abs=1e-15)


def test_sa_full_acceptance_returns_last_estimate_exactly():
    for family in ALL_FAMILIES:
        rng = np.random.default_rng(5)
        est = np.array([random_theta(family, rng) for _ in range(4)])
        steps = StepEstimates(est, np.array([4, 8, 12, 20]))
        res = sa_run(family, steps, cv(*([np.inf] * 4)))
        assert res.theta_hat == est[-1]  # exact, not just approximately
        assert np.all(res.gammas == 1.0)
        assert res.k_hat == 4


def test_sa_immediate_freeze_returns_first_estimate():
    # tiny thresholds from step 2 on force gamma = 0 everywhere
    steps = StepEstimates(np.array([1.0, 2.0, 3.0]), np.array([4, 8, 16]))
    res = sa_run(GAUSS, steps, cv(np.inf, 1e-12, 1e-12))
    assert res.theta_hat == 1.0
    assert list(res.gammas) == [1.0, 0.0, 0.0]


def test_sa_gaussian_convexity():
    rng = np.random.default_rng(9)
    for _ in range(100):
        k_max = int(rng.integers(2, 7))
        est = rng.normal(0, 3, size=k_max)
        lengths = np.cumsum(rng.integers(3, 9, size=k_max))
        z = rng.uniform(0.05, 5.0, size=k_max)
        res = sa_run(GAUSS, StepEstimates(est, lengths), CriticalValues(z))
        assert est.min() - 1e-12 <= res.theta_hat <= est.max() + 1e-12


def test_natural_scale_round_trip():
    rng = np.random.default_rng(31)
    for family in ALL_FAMILIES:
        for _ in range(100):
            theta = random_theta(family, rng)
            back = family.from_natural(family.to_natural(theta))
            assert back == pytest.approx(theta, rel=1e-12)


def test_kernel_shape():
    kernel = AggregationKernel(0.3)
    assert kernel(0.0) == 1.0 and kernel(0.3) == 1.0
    assert kernel(1.0) == 0.0 and kernel(2.0) == 0.0
    assert kernel(0.65) == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        AggregationKernel(1.0)


# ----------------------------------------------------------------------
# brute-force equivalence (small instances)
# ----------------------------------------------------------------------

def test_procedures_match_reference_implementations():
    rng = np.random.default_rng(101)
    for family in ALL_FAMILIES:
        sigma = getattr(family, "sigma", 1.0)
        for _ in range(30):
            k_max = int(rng.integers(2, 5))
            grid = build_grid(12, 3, float(rng.uniform(1.1, 1.45)), k_max)
            theta = random_theta(family, rng)
            data = family.sample(theta, 12, rng)
            z_full = rng.uniform(0.05, 4.0, size=k_max)

            steps = step_estimates(family, data, grid)
            ref_est = [ref_mle(family.name, list(data[12 - n:])) for n in grid.lengths]
            np.testing.assert_allclose(steps.estimates, ref_est, rtol=1e-12)

            got = lms_select(family, steps, CriticalValues(z_full))
            want_k, want_theta = ref_lms(family.name, ref_est, grid.lengths, z_full, sigma)
            assert got.k_hat == want_k
            assert got.theta_hat == pytest.approx(want_theta, rel=1e-12)

            got = lcp_run(family, data, grid, CriticalValues(z_full[: k_max - 1]))
            want_k, want_theta, _ = ref_lcp(
                family.name, list(data), list(grid.lengths), z_full[: k_max - 1], sigma
            )
            assert got.k_hat == want_k
            assert got.theta_hat == pytest.approx(want_theta, rel=1e-12)

            b = float(rng.uniform(0.0, 0.6))
            got = sa_run(family, steps, CriticalValues(z_full), AggregationKernel(b))
            want_theta, want_gammas = ref_sa(
                family.name, list(steps.estimates), grid.lengths, z_full, b, sigma
            )
            assert got.theta_hat == pytest.approx(want_theta, rel=1e-12)
            np.testing.assert_allclose(got.gammas, want_gammas, rtol=1e-12)


def test_run_method_dispatch():
    grid = build_grid(20, 4, 1.6, 3)
    data = np.full(20, 2.0)
    for method, n_cv in (("lms", 3), ("lcp", 2), ("sa", 3)):
        res = run_method(method, GAUSS, data, grid, cv(*([np.inf] * n_cv)))
        assert res.theta_hat == 2.0
    with pytest.raises(InvalidArgumentError):
        run_method("ici", GAUSS, data, grid, cv(1.0, 1.0, 1.0))
