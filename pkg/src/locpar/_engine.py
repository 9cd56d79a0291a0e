"""Vectorized evaluation of the adaptive procedures over many series.

Monte Carlo calibration and scenario studies run the same selection logic
on thousands of windows at once.  This module exploits two structural
facts to avoid per-path Python loops:

* every candidate interval is a suffix of the window, so all interval
  MLEs come from one cumulative sum;
* for model selection and change-point testing the per-step statistics do
  not depend on the critical values; thresholds only gate a first-crossing
  scan, so one precomputed statistic tensor serves every probe of a
  critical-value search.

Results agree with the scalar procedures in :mod:`locpar.procedures`
(equality of selected indices, estimates to floating precision); the test
suite enforces this.
"""
from __future__ import annotations

import numpy as np

from .families import Family
from .procedures import AggregationKernel, METHODS
from .rng import spawn_generators


def draw_paths(family: Family, theta: float, n: int, m: int, seed) -> np.ndarray:
    """(m, n) matrix of i.i.d. draws, one child generator per replication."""
    family.check_theta(theta)
    gens = spawn_generators(seed, m)
    rows = [np.asarray(family._sample(g, float(theta), n), float) for g in gens]
    return np.stack(rows)


class MultiPathEngine:
    """Adaptive selection on an (m_paths, N_K) matrix of windows.

    Column ``N_K - 1`` is the common right edge; the k-th candidate
    interval is the trailing ``N_k`` columns.
    """

    def __init__(self, family: Family, lengths, windows: np.ndarray):
        self.family = family
        self.lengths = np.asarray(lengths, dtype=int)
        win = np.asarray(windows, dtype=float)
        if win.ndim != 2 or win.shape[1] != self.lengths[-1]:
            raise ValueError("windows must be (m, N_K)")
        self.windows = win
        self.m_paths = win.shape[0]
        self.k_max = self.lengths.size

        # prefix sums with a leading zero: sum of cols [a, b) = P[:, b] - P[:, a]
        self._prefix = np.concatenate(
            [np.zeros((self.m_paths, 1)), np.cumsum(win, axis=1)], axis=1
        )
        n_k = self.lengths[-1]
        sums = self._prefix[:, n_k, None] - self._prefix[:, n_k - self.lengths]
        self.theta = family.clamp(sums / self.lengths)  # (m, K)

        self._divergence = None
        self._lcp_stats = None

    # ------------------------------------------------------------------
    # cv-independent statistics
    # ------------------------------------------------------------------

    @property
    def divergence(self) -> np.ndarray:
        """D[:, i, j] = N_{i+1} * K(theta_{i+1}, theta_{j+1}) for all pairs."""
        if self._divergence is None:
            k = self.k_max
            d = np.zeros((self.m_paths, k, k))
            for i in range(k):
                for j in range(k):
                    if i != j:
                        d[:, i, j] = self.lengths[i] * self.family.kl(
                            self.theta[:, i], self.theta[:, j]
                        )
            self._divergence = d
        return self._divergence

    @property
    def lcp_stats(self) -> np.ndarray:
        """T[:, k-1] = best split statistic of I_{k+1}, k = 1..K-1."""
        if self._lcp_stats is None:
            fam, lens, p = self.family, self.lengths, self._prefix
            n_k = lens[-1]
            t = np.full((self.m_paths, self.k_max - 1), -np.inf)
            for k in range(1, self.k_max):
                full_len = lens[k]
                a = n_k - full_len  # 0-based start of I_{k+1} in the window
                theta_full = self.theta[:, k]
                for s in range(1, full_len - lens[k - 1] + 1):
                    left = fam.clamp((p[:, a + s] - p[:, a]) / s)
                    right = fam.clamp((p[:, n_k] - p[:, a + s]) / (full_len - s))
                    stat = s * fam.kl(left, theta_full) + (full_len - s) * fam.kl(
                        right, theta_full
                    )
                    t[:, k - 1] = np.maximum(t[:, k - 1], stat)
            self._lcp_stats = t
        return self._lcp_stats

    # ------------------------------------------------------------------
    # first-crossing scans
    # ------------------------------------------------------------------

    def _lms_first_fail(self, z: np.ndarray) -> np.ndarray:
        """Smallest failing candidate (1-based), K+1 when none fails."""
        d = self.divergence
        viol = d > z[None, :, None]  # viol[:, m, k]: test m fails candidate k
        mask = np.tril(np.ones((self.k_max, self.k_max), dtype=bool), k=-1).T
        anyviol = np.any(viol & mask[None, :, :], axis=1)  # (m, K)
        has = anyviol.any(axis=1)
        first = np.argmax(anyviol, axis=1) + 1  # 1-based candidate index
        return np.where(has, first, self.k_max + 1)

    def _lcp_first_reject(self, z: np.ndarray) -> np.ndarray:
        """Smallest rejecting test (1-based), K when none rejects."""
        if self.k_max == 1:
            return np.ones(self.m_paths, dtype=int)
        rej = self.lcp_stats > z[None, :]
        has = rej.any(axis=1)
        first = np.argmax(rej, axis=1) + 1
        return np.where(has, first, self.k_max)

    def _sa_pass(self, z: np.ndarray, kernel: AggregationKernel):
        """Aggregates after each step (mean scale), plus gammas.

        Mirrors the scalar recursion in :func:`locpar.procedures.sa_run`,
        including exact adopt/keep behavior on the kernel plateaus.
        """
        fam, lens = self.family, self.lengths
        agg = np.empty((self.m_paths, self.k_max))
        gammas = np.ones((self.m_paths, self.k_max))
        stats = np.zeros((self.m_paths, self.k_max))
        agg_theta = self.theta[:, 0].copy()
        v = np.asarray(fam.to_natural(agg_theta), float)
        agg[:, 0] = agg_theta
        for k in range(2, self.k_max + 1):
            theta_k = self.theta[:, k - 1]
            m_k = lens[k - 1] * np.asarray(fam.kl(theta_k, agg_theta), float)
            stats[:, k - 1] = m_k
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(m_k == 0.0, 0.0, m_k / z[k - 1])
            gamma = np.asarray(kernel(ratio), float)
            gammas[:, k - 1] = gamma
            nat_k = np.asarray(fam.to_natural(theta_k), float)
            v_mix = gamma * nat_k + (1.0 - gamma) * v
            v = np.where(gamma == 1.0, nat_k, np.where(gamma == 0.0, v, v_mix))
            theta_mix = np.asarray(fam.from_natural(v_mix), float)
            agg_theta = np.where(
                gamma == 1.0, theta_k, np.where(gamma == 0.0, agg_theta, theta_mix)
            )
            agg[:, k - 1] = agg_theta
        return agg, gammas, stats

    # ------------------------------------------------------------------
    # public evaluations
    # ------------------------------------------------------------------

    def step_divergences(
        self, method: str, z: np.ndarray, kernel: AggregationKernel | None = None
    ) -> np.ndarray:
        """(m, K) matrix of N_m * K(theta_m, adaptive estimate after m steps).

        Column ``m-1`` is the divergence between the m-th window estimate
        and the method's output when run on the first ``m`` scales only;
        this is the propagation functional that calibration controls.
        """
        z = np.asarray(z, dtype=float)
        rows = np.arange(self.m_paths)
        out = np.zeros((self.m_paths, self.k_max))
        if method == "lms":
            f = self._lms_first_fail(z)
            for m in range(2, self.k_max + 1):
                k_hat = np.minimum(f - 1, m)
                out[:, m - 1] = self.divergence[rows, m - 1, k_hat - 1]
        elif method == "lcp":
            rej = self._lcp_first_reject(z[: self.k_max - 1])
            for m in range(2, self.k_max + 1):
                k_hat = np.minimum(rej, m)
                out[:, m - 1] = self.divergence[rows, m - 1, k_hat - 1]
        elif method == "sa":
            agg, _, _ = self._sa_pass(z, kernel or AggregationKernel())
            for m in range(2, self.k_max + 1):
                out[:, m - 1] = self.lengths[m - 1] * np.asarray(
                    self.family.kl(self.theta[:, m - 1], agg[:, m - 1]), float
                )
        else:
            raise ValueError(f"unknown method {method!r}; use {METHODS}")
        return out

    def select(
        self, method: str, z: np.ndarray, kernel: AggregationKernel | None = None
    ):
        """Full-ladder run per path.

        Returns ``(k_hat, theta_hat, k_eff)`` arrays.  ``k_eff`` equals
        ``k_hat`` for lms/lcp; for sa (whose ``k_hat`` is always K) it is
        the last step before the first zero mixing weight, a proxy for the
        effective window used by detection-delay metrics.
        """
        z = np.asarray(z, dtype=float)
        rows = np.arange(self.m_paths)
        if method == "lms":
            k_hat = np.minimum(self._lms_first_fail(z) - 1, self.k_max)
            theta = self.theta[rows, k_hat - 1]
            return k_hat, theta, k_hat
        if method == "lcp":
            k_hat = np.minimum(self._lcp_first_reject(z), self.k_max)
            theta = self.theta[rows, k_hat - 1]
            return k_hat, theta, k_hat
        if method == "sa":
            agg, gammas, _ = self._sa_pass(z, kernel or AggregationKernel())
            k_hat = np.full(self.m_paths, self.k_max)
            zero = gammas == 0.0
            has_zero = zero.any(axis=1)
            first_zero = np.argmax(zero, axis=1)  # 0-based step of first gamma=0
            k_eff = np.where(has_zero, first_zero, self.k_max)
            return k_hat, agg[:, -1], k_eff
        raise ValueError(f"unknown method {method!r}; use {METHODS}")
