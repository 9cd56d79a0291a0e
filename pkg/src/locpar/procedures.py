"""Adaptive window selection and aggregation over an interval ladder.

Three estimators share the same ingredients: per-interval maximum
likelihood estimates ``theta_1..theta_K`` on the nested windows of an
:class:`~locpar.intervals.IntervalGrid`, and a vector of positive critical
values gating how far the procedure trusts larger windows.

``lms_select``
    Local model selection (intersection of confidence intervals): accept
    window ``k`` while the fitted likelihood ratio between every smaller
    window's estimate and ``theta_k`` stays below that smaller window's
    critical value; stop at the first failure and keep the last accepted
    estimate.

``lcp_run``
    Local change point: grow the window while a likelihood-ratio
    change-point test over the freshly added stretch accepts.  The test
    statistic at step ``k`` is the best split of the testing interval
    ``I_{k+1}``, i.e. ``max_tau [N' K(theta', theta) + N'' K(theta'',
    theta)]``, which equals the maximized log-likelihood ratio of a
    two-piece against a one-piece fit.

``sa_run``
    Stagewise aggregation: mix successive estimates on the family's
    natural-parameter scale with data-driven weights ``gamma_k`` produced
    by a piecewise-linear kernel applied to the divergence between the new
    estimate and the running aggregate.

Critical-value entries of ``+inf`` disable a test ("never reject"); zeros
make it maximally strict.  Selection always returns the recorded per-step
statistics and decisions for telemetry.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridTooSmallError,
    InvalidArgumentError,
    LengthMismatchError,
)
from .families import Family
from .intervals import IntervalGrid

#: Canonical method names, in reporting order.
METHODS = ("lms", "lcp", "sa")


@dataclass(frozen=True)
class CriticalValues:
    """Per-step thresholds ``z_1..z_K`` with their calibration settings."""

    z: np.ndarray
    r: float = 0.5
    alpha: float = 0.25

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.z, dtype=float))
        if arr.ndim != 1:
            raise InvalidArgumentError("critical values must be a 1-D vector")
        # zeros are legitimate (maximally strict step, degenerate ladder)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise InvalidArgumentError("critical values must be >= 0")
        object.__setattr__(self, "z", arr)

    def __len__(self) -> int:
        return self.z.size


@dataclass(frozen=True)
class StepEstimates:
    """Per-interval MLEs theta_1..theta_K and the window lengths N_1..N_K."""

    estimates: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        est = np.atleast_1d(np.asarray(self.estimates, dtype=float))
        lens = np.atleast_1d(np.asarray(self.lengths, dtype=int))
        if est.shape != lens.shape:
            raise LengthMismatchError("estimates and lengths differ in shape")
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "lengths", lens)

    @property
    def k_max(self) -> int:
        return self.estimates.size


@dataclass(frozen=True)
class AggregationKernel:
    """Piecewise-linear mixing kernel: 1 up to ``b``, 0 from 1 on."""

    b: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.b < 1.0:
            raise InvalidArgumentError("kernel knee b must lie in [0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(
            x <= self.b, 1.0, np.where(x >= 1.0, 0.0, (1.0 - x) / (1.0 - self.b))
        )
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AdaptiveResult:
    """Outcome of one adaptive run at a fixed right edge."""

    k_hat: int
    theta_hat: float
    statistics: np.ndarray
    decisions: np.ndarray
    gammas: np.ndarray = field(default_factory=lambda: np.empty(0))
    change_point: int | None = None


def step_estimates(family: Family, data, grid: IntervalGrid) -> StepEstimates:
    """MLE per candidate window of ``grid`` over the series ``data``."""
    arr = np.asarray(data, dtype=float)
    if grid.right_edge > arr.size:
        raise InvalidArgumentError(
            f"grid right edge {grid.right_edge} beyond series of {arr.size}"
        )
    est = [family.mle(arr[grid.interval(k).slice]) for k in range(1, grid.k_max + 1)]
    return StepEstimates(np.asarray(est), np.asarray(grid.lengths))


def _check_cv(cv: CriticalValues, expected: int, method: str) -> None:
    if len(cv) != expected:
        raise LengthMismatchError(
            f"{method} needs {expected} critical values, got {len(cv)}"
        )


def lms_select(
    family: Family, steps: StepEstimates, cv: CriticalValues
) -> AdaptiveResult:
    """Sequential model selection over the ladder.

    Window ``k`` is accepted when ``N_m * K(theta_m, theta_k) <= z_m`` for
    every ``m < k``; the scan stops at the first failing window and the
    last accepted index wins.  The statistic recorded at step ``k`` is the
    largest threshold-normalized divergence over ``m < k``.
    """
    k_max = steps.k_max
    _check_cv(cv, k_max, "lms")
    est, lens, z = steps.estimates, steps.lengths, cv.z

    stats = np.full(k_max, np.nan)
    decisions = np.zeros(k_max, dtype=bool)
    stats[0] = 0.0
    decisions[0] = True
    k_hat = 1
    for k in range(2, k_max + 1):
        div = lens[: k - 1] * family.kl(est[: k - 1], est[k - 1])
        accept = bool(np.all(div <= z[: k - 1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(div == 0.0, 0.0, div / z[: k - 1])
        stats[k - 1] = float(np.max(ratio))
        decisions[k - 1] = accept
        if not accept:
            break
        k_hat = k
    return AdaptiveResult(
        k_hat=k_hat,
        theta_hat=float(est[k_hat - 1]),
        statistics=stats,
        decisions=decisions,
    )


def lcp_split_statistic(
    family: Family, data, grid: IntervalGrid, k: int
) -> tuple[float, int]:
    """Best two-piece fit of the testing interval I_{k+1}.

    Returns ``(T_k, tau)`` where ``tau`` is the smallest split point
    achieving the maximum.
    """
    arr = np.asarray(data, dtype=float)
    testing = grid.interval(k + 1)
    theta_full = family.mle(arr[testing.slice])
    best, best_tau = -np.inf, -1
    for tau in grid.tested_set(k):
        left = arr[testing.start - 1 : tau]
        right = arr[tau : grid.right_edge]
        theta_l = family.mle(left)
        theta_r = family.mle(right)
        stat = left.size * family.kl(theta_l, theta_full) + right.size * family.kl(
            theta_r, theta_full
        )
        if stat > best:
            best, best_tau = float(stat), tau
    return best, best_tau


def lcp_run(
    family: Family, data, grid: IntervalGrid, cv: CriticalValues
) -> AdaptiveResult:
    """Grow the window until the change-point test rejects.

    Steps ``k = 1..K-1`` test the interval ``I_{k+1}``; on the first
    ``T_k > z_k`` the procedure stops with ``k_hat = k`` (the last interval
    that passed) and reports the maximizing split point as the detected
    change location.  With no rejection ``k_hat = K``.
    """
    if grid.k_max < 2:
        raise GridTooSmallError("change-point testing needs at least 2 scales")
    _check_cv(cv, grid.k_max - 1, "lcp")
    arr = np.asarray(data, dtype=float)
    if grid.right_edge > arr.size:
        raise InvalidArgumentError(
            f"grid right edge {grid.right_edge} beyond series of {arr.size}"
        )

    steps = step_estimates(family, arr, grid)
    stats = np.full(grid.k_max - 1, np.nan)
    decisions = np.zeros(grid.k_max - 1, dtype=bool)
    k_hat = grid.k_max
    change_point = None
    for k in range(1, grid.k_max):
        t_k, tau = lcp_split_statistic(family, arr, grid, k)
        stats[k - 1] = t_k
        if t_k > cv.z[k - 1]:
            k_hat = k
            change_point = tau
            break
        decisions[k - 1] = True
    return AdaptiveResult(
        k_hat=k_hat,
        theta_hat=float(steps.estimates[k_hat - 1]),
        statistics=stats,
        decisions=decisions,
        change_point=change_point,
    )


def sa_run(
    family: Family,
    steps: StepEstimates,
    cv: CriticalValues,
    kernel: AggregationKernel = AggregationKernel(),
) -> AdaptiveResult:
    """Stagewise aggregation on the natural-parameter scale.

    The running aggregate starts at ``theta_1``.  At step ``k`` the
    divergence ``m_k = N_k * K(theta_k, aggregate)`` is compared to ``z_k``
    through the kernel; weight ``gamma_k = kernel(m_k / z_k)`` mixes the
    new estimate into the aggregate on the natural scale.  The plateaus of
    the kernel are honored exactly: ``gamma = 1`` adopts ``theta_k``
    bitwise, ``gamma = 0`` keeps the previous aggregate bitwise.
    """
    k_max = steps.k_max
    _check_cv(cv, k_max, "sa")
    est, lens, z = steps.estimates, steps.lengths, cv.z

    stats = np.zeros(k_max)
    gammas = np.ones(k_max)
    agg_theta = float(est[0])
    v = family.to_natural(agg_theta)
    for k in range(2, k_max + 1):
        theta_k = float(est[k - 1])
        m_k = lens[k - 1] * family.kl(theta_k, agg_theta)
        stats[k - 1] = m_k
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = 0.0 if m_k == 0.0 else m_k / z[k - 1]
        gamma = kernel(ratio)
        gammas[k - 1] = gamma
        if gamma == 1.0:
            agg_theta = theta_k
            v = family.to_natural(theta_k)
        elif gamma > 0.0:
            v = gamma * family.to_natural(theta_k) + (1.0 - gamma) * v
            agg_theta = float(family.from_natural(v))
    return AdaptiveResult(
        k_hat=k_max,
        theta_hat=agg_theta,
        statistics=stats,
        decisions=gammas > 0.0,
        gammas=gammas,
    )


def run_method(
    method: str,
    family: Family,
    data,
    grid: IntervalGrid,
    cv: CriticalValues,
    kernel: AggregationKernel | None = None,
) -> AdaptiveResult:
    """Dispatch one adaptive run by method name ("lms", "lcp" or "sa")."""
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; use {METHODS}")
    if method == "lcp":
        return lcp_run(family, data, grid, cv)
    steps = step_estimates(family, data, grid)
    if method == "lms":
        return lms_select(family, steps, cv)
    return sa_run(family, steps, cv, kernel or AggregationKernel())
