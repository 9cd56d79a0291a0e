"""Critical-value calibration: feasibility, monotonicity, reproducibility."""
import numpy as np
import pytest

from locpar import (
    AggregationKernel,
    Bernoulli,
    CalibrationConfig,
    CalibrationReport,
    CriticalValues,
    Gaussian,
    InfeasibleError,
    LengthMismatchError,
    Poisson,
    SearchSettings,
    adaptive_risk,
    build_grid,
    calibrate,
    cv_length,
    run_method,
)
from locpar._engine import MultiPathEngine, draw_paths

from _cases import ALL_FAMILIES, random_theta

GAUSS = Gaussian()


def small_config(**overrides):
    defaults = dict(
        family=GAUSS,
        theta_star=0.0,
        grid=build_grid(t=18, n0=6, u=1.35, k_max=4),
        r=0.5,
        alpha=0.25,
        m_reps=800,
        seed=17,
    )
    defaults.update(overrides)
    return CalibrationConfig(**defaults)


# ----------------------------------------------------------------------
# engine consistency with the scalar procedures
# ----------------------------------------------------------------------

def test_engine_matches_scalar_procedures_per_truncation():
    rng = np.random.default_rng(8)
    for family in ALL_FAMILIES:
        theta = random_theta(family, rng)
        grid = build_grid(t=20, n0=5, u=1.4, k_max=4)
        windows = np.stack([family.sample(theta, 20, rng) for _ in range(25)])
        engine = MultiPathEngine(family, grid.lengths, windows[:, -grid.lengths[-1]:])
        z_full = np.array([0.8, 1.4, 2.0, 2.6])
        kernel = AggregationKernel(0.3)
        for method in ("lms", "lcp", "sa"):
            z = z_full[: cv_length(method, 4)]
            div = engine.step_divergences(method, z, kernel)
            for m in range(1, 5):
                if method == "lcp" and m == 1:
                    continue  # scalar lcp needs two scales; divergence is 0 anyway
                sub = build_grid(t=20, n0=5, u=1.4, k_max=m)
                sub_cv = CriticalValues(z_full[: cv_length(method, m)])
                for j in range(windows.shape[0]):
                    res = run_method(method, family, windows[j], sub, sub_cv, kernel)
                    want = grid.lengths[m - 1] * family.kl(
                        float(engine.theta[j, m - 1]), res.theta_hat
                    )
                    assert div[j, m - 1] == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_engine_select_matches_full_run():
    rng = np.random.default_rng(81)
    family = Poisson()
    grid = build_grid(t=24, n0=5, u=1.45, k_max=4)
    windows = np.stack([family.sample(3.0, 24, rng) for _ in range(40)])
    engine = MultiPathEngine(family, grid.lengths, windows[:, -grid.lengths[-1]:])
    kernel = AggregationKernel(0.2)
    for method, z in (
        ("lms", np.array([0.5, 1.0, 1.5, 2.0])),
        ("lcp", np.array([1.0, 1.5, 2.0])),
        ("sa", np.array([0.5, 1.0, 1.5, 2.0])),
    ):
        k_hat, theta_hat, _ = engine.select(method, z, kernel)
        for j in range(40):
            res = run_method(method, family, windows[j], grid, CriticalValues(z), kernel)
            assert k_hat[j] == res.k_hat
            assert theta_hat[j] == pytest.approx(res.theta_hat, rel=1e-12)


# ----------------------------------------------------------------------
# risk functional sentinels
# ----------------------------------------------------------------------

def test_infinite_thresholds_give_zero_risk():
    cfg = small_config()
    for method in ("lms", "lcp", "sa"):
        z = np.full(cv_length(method, 4), np.inf)
        risks = adaptive_risk(method, CriticalValues(z), cfg, fresh_seed=5)
        np.testing.assert_allclose(risks, 0.0, atol=1e-14)


def test_zero_thresholds_pin_first_estimate():
    cfg = small_config()
    paths = draw_paths(GAUSS, 0.0, cfg.grid.lengths[-1], 300, 99)
    engine = MultiPathEngine(GAUSS, cfg.grid.lengths, paths)
    lengths = np.asarray(cfg.grid.lengths)
    expected = np.zeros(4)
    for m in range(2, 5):
        div = lengths[m - 1] * GAUSS.kl(engine.theta[:, m - 1], engine.theta[:, 0])
        expected[m - 1] = np.mean(div**0.5)
    for method in ("lms", "lcp"):
        z = np.zeros(cv_length(method, 4))
        div = engine.step_divergences(method, z)
        risks = (div**0.5).mean(axis=0)
        np.testing.assert_allclose(risks, expected, rtol=1e-12)


def test_stage_risk_monotone_in_threshold():
    # K=2 model selection: pointwise monotone by construction
    grid = build_grid(t=15, n0=6, u=1.8, k_max=2)
    paths = draw_paths(GAUSS, 0.0, grid.lengths[-1], 500, 3)
    engine = MultiPathEngine(GAUSS, grid.lengths, paths)
    ladder = np.linspace(0.0, 6.0, 25)
    risks = []
    for z1 in ladder:
        div = engine.step_divergences("lms", np.array([z1, np.inf]))
        risks.append((div**0.5).mean(axis=0)[1])
    assert all(a >= b for a, b in zip(risks, risks[1:]))

    # K=3, all methods: empirical monotonicity with common random numbers
    grid3 = build_grid(t=20, n0=6, u=1.45, k_max=3)
    paths3 = draw_paths(GAUSS, 0.0, grid3.lengths[-1], 800, 4)
    engine3 = MultiPathEngine(GAUSS, grid3.lengths, paths3)
    for method in ("lms", "lcp", "sa"):
        n = cv_length(method, 3)
        for stage in range(n):
            totals = []
            for value in np.linspace(0.0, 5.0, 15):
                z = np.full(n, np.inf)
                z[:stage] = 1.0
                z[stage] = value
                div = engine3.step_divergences(method, z, AggregationKernel())
                totals.append(float((div**0.5).mean(axis=0).sum()))
            drops = np.diff(totals)
            assert np.all(drops <= 1e-3 * (1.0 + np.abs(totals[:-1])))


# ----------------------------------------------------------------------
# calibrate
# ----------------------------------------------------------------------

def test_calibrate_meets_budget_in_sample():
    cfg = small_config()
    for method in ("lms", "lcp", "sa"):
        rep = calibrate(method, cfg)
        assert len(rep.cv) == cv_length(method, 4)
        assert np.all(rep.achieved_risk <= rep.budget + 1e-12)
        assert np.all(np.isfinite(rep.cv.z))


def test_calibrate_deterministic():
    cfg = small_config()
    for method in ("lms", "lcp", "sa"):
        a = calibrate(method, cfg)
        b = calibrate(method, cfg)
        np.testing.assert_array_equal(a.cv.z, b.cv.z)
        np.testing.assert_array_equal(a.achieved_risk, b.achieved_risk)
        assert a.r_r == b.r_r


def test_calibrate_alpha_monotone_small_m():
    # a near-1 test level admits componentwise smaller critical values
    lo = small_config(alpha=0.05, m_reps=400, r=1.0)
    hi = small_config(alpha=0.9, m_reps=400, r=1.0)
    for method in ("lms", "lcp", "sa"):
        z_lo = calibrate(method, lo).cv.z
        z_hi = calibrate(method, hi).cv.z
        assert np.all(z_hi <= z_lo + 1e-12)


def test_calibrate_gaussian_location_invariance():
    base = small_config(theta_star=0.0, m_reps=600)
    moved = small_config(theta_star=10.0, m_reps=600)
    for method in ("lms", "lcp", "sa"):
        z0 = calibrate(method, base).cv.z
        z10 = calibrate(method, moved).cv.z
        np.testing.assert_allclose(z0, z10, atol=1e-9)


def test_calibrate_degenerate_single_scale():
    grid = build_grid(t=10, n0=6, u=1.5, k_max=1)
    cfg = CalibrationConfig(family=GAUSS, theta_star=0.0, grid=grid, m_reps=300, seed=1)
    for method in ("lms", "sa"):
        rep = calibrate(method, cfg)
        assert rep.cv.z.tolist() == [0.0]
        np.testing.assert_allclose(rep.achieved_risk, [0.0])
    rep = calibrate("lcp", cfg)
    assert len(rep.cv) == 0


def test_calibrate_infeasible_reports_step():
    cfg = small_config(search=SearchSettings(z_max=1e-3, tol=1e-4))
    with pytest.raises(InfeasibleError) as exc:
        calibrate("lms", cfg)
    assert exc.value.step >= 1


def test_calibrate_other_families_smoke():
    for family, theta in ((Poisson(), 3.0), (Bernoulli(), 0.4)):
        cfg = CalibrationConfig(
            family=family,
            theta_star=theta,
            grid=build_grid(t=18, n0=6, u=1.35, k_max=4),
            m_reps=500,
            seed=2,
        )
        for method in ("lms", "lcp", "sa"):
            rep = calibrate(method, cfg)
            assert np.all(rep.achieved_risk <= rep.budget + 1e-12)


# ----------------------------------------------------------------------
# out-of-sample risks and report round trip
# ----------------------------------------------------------------------

def test_adaptive_risk_validates_length():
    cfg = small_config()
    with pytest.raises(LengthMismatchError):
        adaptive_risk("lcp", CriticalValues(np.ones(4)), cfg, fresh_seed=1)


def test_adaptive_risk_out_of_sample_close_to_budget():
    cfg = small_config(m_reps=2000)
    for method in ("lms", "lcp", "sa"):
        rep = calibrate(method, cfg)
        fresh = adaptive_risk(method, rep.cv, cfg, fresh_seed=991)
        assert np.all(fresh <= rep.budget * 1.25 + 1e-12)


def test_report_json_round_trip(tmp_path):
    cfg = small_config(m_reps=400)
    rep = calibrate("sa", cfg)
    path = tmp_path / "cv.json"
    rep.save(path)
    loaded = CalibrationReport.load(path)
    np.testing.assert_array_equal(loaded.cv.z, rep.cv.z)
    np.testing.assert_array_equal(loaded.budget, rep.budget)
    np.testing.assert_array_equal(loaded.achieved_risk, rep.achieved_risk)
    assert loaded.method == "sa"
    assert loaded.config.family == cfg.family
    assert loaded.config.grid.lengths == cfg.grid.lengths
    assert loaded.config.seed == cfg.seed
    assert loaded.r_r == rep.r_r
