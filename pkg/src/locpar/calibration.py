"""Monte Carlo calibration of critical values under homogeneity.

The only tuning parameters of the adaptive procedures are their critical
values.  They are chosen so that a *propagation* condition holds: when the
data are truly homogeneous (one parameter ``theta_star`` throughout), the
adaptive estimate must stay close in risk to every fixed-window estimate
it could have produced.  Concretely, with ``theta_adapt^(m)`` the method's
output restricted to the first ``m`` scales,

    E | N_m * K(theta_m, theta_adapt^(m)) | ** r   <=   alpha * m * rr / K

must hold for every step ``m``, where ``rr`` is the Monte Carlo moment of
the full-window fitted likelihood ratio (``parametric_risk_bound`` at
``N_K``) and ``alpha`` is the test level.  The budget grows linearly in
``m``: each step may spend an equal share of the total allowance.

Critical values are fixed one step at a time.  At stage ``k`` the earlier
entries are frozen, the later ones are set to ``+inf`` (never reject), and
the smallest ``z_k`` in ``[0, z_max]`` keeping *every* step within budget
is found by bisection.  Raising ``z_k`` only ever turns rejections into
acceptances under homogeneity, so every per-step risk is nonincreasing in
``z_k`` and bisection is valid; a very large ``z_k`` recovers the previous
stage's accepted state, which keeps each stage feasible.  One fixed set of
sample paths is reused for all probes (common random numbers), which also
makes the whole search deterministic given the seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._engine import MultiPathEngine, draw_paths
from .errors import InfeasibleError, InvalidArgumentError, LengthMismatchError
from .families import Family, family_from_config
from .intervals import IntervalGrid
from .procedures import METHODS, AggregationKernel, CriticalValues

_FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class SearchSettings:
    """Bisection bounds for the critical-value search."""

    z_max: float = 50.0
    tol: float = 1e-3

    def __post_init__(self):
        if self.z_max <= 0:
            raise InvalidArgumentError("z_max must be positive")
        if self.tol <= 0:
            raise InvalidArgumentError("bisection tolerance must be positive")


@dataclass(frozen=True)
class CalibrationConfig:
    """Everything a calibration run depends on.

    ``m_reps`` of 500+ is recommended for production use; smaller values
    are fine for smoke tests.  The kernel only matters for method "sa".
    """

    family: Family
    theta_star: float
    grid: IntervalGrid
    r: float = 0.5
    alpha: float = 0.25
    m_reps: int = 5000
    search: SearchSettings = field(default_factory=SearchSettings)
    seed: int = 0
    kernel: AggregationKernel = field(default_factory=AggregationKernel)

    def __post_init__(self):
        self.family.check_theta(self.theta_star)
        if self.r <= 0:
            raise InvalidArgumentError("risk power r must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentError("test level alpha must lie in (0, 1)")
        if self.m_reps < 1:
            raise InvalidArgumentError("m_reps must be >= 1")


@dataclass(frozen=True)
class CalibrationReport:
    """Calibrated critical values plus the achieved risk profile."""

    method: str
    cv: CriticalValues
    budget: np.ndarray
    achieved_risk: np.ndarray
    risk_se: np.ndarray
    r_r: float
    config: CalibrationConfig

    # --- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "method": self.method,
            "family": cfg.family.to_config(),
            "theta_star": cfg.theta_star,
            "grid": {
                "n0": cfg.grid.n0,
                "ratio": cfg.grid.ratio,
                "k_max": cfg.grid.k_max,
                "lengths": [int(n) for n in cfg.grid.lengths],
            },
            "r": cfg.r,
            "alpha": cfg.alpha,
            "m_reps": cfg.m_reps,
            "search": {"z_max": cfg.search.z_max, "tol": cfg.search.tol},
            "seed": cfg.seed,
            "kernel_b": cfg.kernel.b,
            "z": [float(v) for v in self.cv.z],
            "budget": [float(v) for v in self.budget],
            "achieved_risk": [float(v) for v in self.achieved_risk],
            "risk_se": [float(v) for v in self.risk_se],
            "r_r": self.r_r,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationReport":
        family = family_from_config(doc["family"])
        lengths = tuple(int(n) for n in doc["grid"]["lengths"])
        grid = IntervalGrid(
            right_edge=max(lengths),
            lengths=lengths,
            ratio=doc["grid"]["ratio"],
            n0=doc["grid"]["n0"],
        )
        config = CalibrationConfig(
            family=family,
            theta_star=doc["theta_star"],
            grid=grid,
            r=doc["r"],
            alpha=doc["alpha"],
            m_reps=doc["m_reps"],
            search=SearchSettings(**doc["search"]),
            seed=doc["seed"],
            kernel=AggregationKernel(doc["kernel_b"]),
        )
        cv = CriticalValues(np.asarray(doc["z"], float), r=doc["r"], alpha=doc["alpha"])
        return cls(
            method=doc["method"],
            cv=cv,
            budget=np.asarray(doc["budget"], float),
            achieved_risk=np.asarray(doc["achieved_risk"], float),
            risk_se=np.asarray(doc["risk_se"], float),
            r_r=doc["r_r"],
            config=config,
        )

    @classmethod
    def load(cls, path) -> "CalibrationReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def cv_length(method: str, k_max: int) -> int:
    """Number of critical values a method consumes on a K-scale ladder."""
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; use {METHODS}")
    return k_max - 1 if method == "lcp" else k_max


def _risk_profile(div: np.ndarray, r: float):
    """Mean and standard error of |divergence|^r per step."""
    powered = div**r
    risks = powered.mean(axis=0)
    if powered.shape[0] > 1:
        se = powered.std(axis=0, ddof=1) / np.sqrt(powered.shape[0])
    else:
        se = np.zeros_like(risks)
    return risks, se


def calibrate(method: str, config: CalibrationConfig) -> CalibrationReport:
    """Choose the smallest critical values meeting the propagation budgets.

    Raises :class:`InfeasibleError` (carrying the offending step) when even
    ``z_max`` cannot satisfy a stage's budget.
    """
    n_cv = cv_length(method, config.grid.k_max)
    k_max = config.grid.k_max
    lengths = np.asarray(config.grid.lengths, int)

    paths = draw_paths(
        config.family, config.theta_star, int(lengths[-1]), config.m_reps, config.seed
    )
    engine = MultiPathEngine(config.family, lengths, paths)

    # normalizer: moment of the full-window fitted LR against theta_star
    lr_full = lengths[-1] * np.asarray(
        config.family.kl(engine.theta[:, -1], config.theta_star), float
    )
    r_r = float(np.mean(lr_full**config.r))
    budget = config.alpha * np.arange(1, k_max + 1) * r_r / k_max

    z = np.full(n_cv, np.inf)

    def all_risks() -> np.ndarray:
        div = engine.step_divergences(method, z, config.kernel)
        return (div**config.r).mean(axis=0)

    for stage in range(n_cv):
        # Every step already reachable through z[:stage+1] must stay within
        # budget; later thresholds are still +inf, so their rejections are
        # absent and the corresponding risks only grow at later stages,
        # where the then-current threshold brings them back under budget.
        def feasible(candidate: float) -> bool:
            z[stage] = candidate
            return bool(np.all(all_risks() <= budget))

        if feasible(0.0):
            z[stage] = 0.0
            continue
        if not feasible(config.search.z_max):
            over = int(np.argmax(all_risks() > budget))
            z[stage] = np.inf
            raise InfeasibleError(step=over + 1)
        lo, hi = 0.0, config.search.z_max
        while hi - lo > config.search.tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        z[stage] = hi

    div = engine.step_divergences(method, z, config.kernel)
    achieved, se = _risk_profile(div, config.r)
    cv = CriticalValues(z, r=config.r, alpha=config.alpha)
    return CalibrationReport(
        method=method,
        cv=cv,
        budget=budget,
        achieved_risk=achieved,
        risk_se=se,
        r_r=r_r,
        config=config,
    )


def adaptive_risk(
    method: str,
    cv: CriticalValues,
    config: CalibrationConfig,
    fresh_seed,
) -> np.ndarray:
    """Out-of-sample per-step risks of a calibrated vector on fresh paths."""
    n_cv = cv_length(method, config.grid.k_max)
    if len(cv) != n_cv:
        raise LengthMismatchError(
            f"{method} on a {config.grid.k_max}-scale ladder needs {n_cv} "
            f"critical values, got {len(cv)}"
        )
    lengths = np.asarray(config.grid.lengths, int)
    paths = draw_paths(
        config.family, config.theta_star, int(lengths[-1]), config.m_reps, fresh_seed
    )
    engine = MultiPathEngine(config.family, lengths, paths)
    div = engine.step_divergences(method, cv.z, config.kernel)
    risks, _ = _risk_profile(div, config.r)
    return risks
