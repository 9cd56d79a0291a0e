"""Scenario studies: piecewise-constant truth, Monte Carlo metrics.

A :class:`Scenario` fixes a family, a piecewise-constant parameter path
(list of ``(segment_length, theta)`` pairs), the replication count and the
evaluation points.  :func:`run_scenario` draws the replications once, runs
all three adaptive procedures on identical data, and reports

* per eval point and method: mean absolute error, mean KL risk
  ``K(theta_true, theta_hat)`` and the mean selected step;
* the same metrics for the *oracle* step index, the best fixed window
  chosen with knowledge of the true path (a bias-plus-variance proxy,
  see :func:`oracle_index`);
* per parameter jump and method: the detection-delay distribution, i.e.
  how many observations pass until the selected step first drops below
  its pre-jump level.  Stagewise aggregation always reports the full
  ladder as selected, so its delay uses the effective step instead (last
  step before the first zero mixing weight).  Undetected jumps are
  right-censored at the scan horizon, keeping every metric finite.

Replications use per-replication child generators spawned from the
scenario seed; reports are byte-stable across reruns.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._engine import MultiPathEngine
from .errors import GridTooLongError, InvalidArgumentError, LengthMismatchError
from .families import Family, family_from_config, get_family
from .intervals import IntervalGrid
from .procedures import METHODS, AggregationKernel, CriticalValues
from .calibration import cv_length
from .rng import spawn_generators

_FLOAT_FMT = ".17g"

#: Per eval point metrics, in reporting order.
EVAL_METRICS = ("mae", "kl_risk", "mean_k_hat")
DELAY_METRICS = ("delay_mean", "delay_median", "detect_rate")


@dataclass(frozen=True)
class Scenario:
    """A piecewise-constant simulation design."""

    family: Family
    segments: tuple[tuple[int, float], ...]
    m_reps: int
    eval_points: tuple[int, ...]
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.m_reps < 1:
            raise InvalidArgumentError("m_reps must be >= 1")
        if not self.segments:
            raise InvalidArgumentError("scenario needs at least one segment")
        for length, theta in self.segments:
            if length < 1:
                raise InvalidArgumentError("segment lengths must be >= 1")
            self.family.check_theta(theta)
        n = self.n_obs
        for t in self.eval_points:
            if not 1 <= t <= n:
                raise InvalidArgumentError(f"eval point {t} outside series 1..{n}")

    @property
    def n_obs(self) -> int:
        return sum(length for length, _ in self.segments)

    def theta_path(self) -> np.ndarray:
        """True parameter value at every time index (length n_obs)."""
        return np.concatenate(
            [np.full(length, theta) for length, theta in self.segments]
        )

    def jumps(self) -> list[tuple[int, float, float]]:
        """(position of last pre-jump point, theta before, theta after)."""
        out = []
        pos = 0
        for (len_a, th_a), (_, th_b) in zip(self.segments, self.segments[1:]):
            pos += len_a
            if th_a != th_b:
                out.append((pos, th_a, th_b))
        return out

    def draw(self) -> np.ndarray:
        """(m_reps, n_obs) data matrix; replication j uses child seed j."""
        gens = spawn_generators(self.seed, self.m_reps)
        rows = []
        for g in gens:
            parts = [
                np.asarray(self.family._sample(g, float(theta), length), float)
                for length, theta in self.segments
            ]
            rows.append(np.concatenate(parts))
        return np.stack(rows)

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "family": self.family.to_config(),
            "segments": [[int(n), float(th)] for n, th in self.segments],
            "m_reps": self.m_reps,
            "eval_points": [int(t) for t in self.eval_points],
            "seed": self.seed,
        }


def scenario_from_config(doc: dict) -> Scenario:
    cfg = dict(doc)
    family = family_from_config(cfg.pop("family"))
    return Scenario(
        family=family,
        segments=tuple((int(n), float(th)) for n, th in cfg["segments"]),
        m_reps=int(cfg["m_reps"]),
        eval_points=tuple(int(t) for t in cfg["eval_points"]),
        seed=int(cfg.get("seed", 0)),
        name=str(cfg.get("name", "")),
    )


def oracle_index(family: Family, theta_path, grid: IntervalGrid, t: int) -> int:
    """Best fixed step at ``t`` given the true path.

    Minimizes a risk proxy: the mean KL contamination of the window
    (each point's divergence from the window-average parameter) plus the
    variance proxy ``1/N_k``.  Ties go to the larger step.
    """
    path = np.asarray(theta_path, dtype=float)
    anchored = grid.at(t)
    best_k, best_crit = 1, np.inf
    for k in range(1, anchored.k_max + 1):
        iv = anchored.interval(k)
        segment = path[iv.slice]
        center = float(segment.mean())
        bias = float(np.mean(family.kl(segment, center)))
        crit = bias + 1.0 / iv.length
        if crit <= best_crit:
            best_k, best_crit = k, crit
    return best_k


@dataclass(frozen=True)
class ScenarioReport:
    """Long-format metric rows plus the run configuration."""

    config: dict
    eval_rows: tuple  # (method, eval_point, metric, value)
    delay_rows: tuple  # (method, jump_position, metric, value)

    def rows(self) -> list[tuple]:
        return list(self.eval_rows) + list(self.delay_rows)

    def value(self, method: str, point: int, metric: str) -> float:
        for m, t, name, v in self.rows():
            if m == method and t == point and name == metric:
                return v
        raise KeyError((method, point, metric))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("method,eval_point,metric,value\n")
            for method, point, metric, value in self.rows():
                fh.write(f"{method},{point},{metric},{value:{_FLOAT_FMT}}\n")

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "metrics": [
                {"method": m, "eval_point": t, "metric": name, "value": v}
                for m, t, name, v in self.rows()
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def run_scenario(
    scenario: Scenario,
    grid: IntervalGrid,
    cvs: dict[str, CriticalValues],
    kernel: AggregationKernel = AggregationKernel(),
    delay_horizon: int | None = None,
) -> ScenarioReport:
    """Monte Carlo evaluation of all supplied methods on one scenario."""
    family = scenario.family
    lengths = np.asarray(grid.lengths, int)
    n_k = int(lengths[-1])
    methods = [m for m in METHODS if m in cvs]
    if not methods:
        raise InvalidArgumentError("no critical values supplied")
    for method in methods:
        if len(cvs[method]) != cv_length(method, grid.k_max):
            raise LengthMismatchError(
                f"{method} critical values do not fit a {grid.k_max}-scale ladder"
            )
    for t in scenario.eval_points:
        if t < n_k:
            raise GridTooLongError(
                f"eval point {t} has less history than the largest window {n_k}"
            )

    data = scenario.draw()
    path = scenario.theta_path()

    def engine_at(t: int) -> MultiPathEngine:
        return MultiPathEngine(family, lengths, data[:, t - n_k : t])

    eval_rows = []
    oracle_rows = []
    for t in sorted(scenario.eval_points):
        theta_true = float(path[t - 1])
        engine = engine_at(t)
        for method in methods:
            k_hat, theta_hat, _ = engine.select(method, cvs[method].z, kernel)
            mae = float(np.mean(np.abs(theta_hat - theta_true)))
            kl_risk = float(np.mean(family.kl(theta_true, theta_hat)))
            eval_rows += [
                (method, t, "mae", mae),
                (method, t, "kl_risk", kl_risk),
                (method, t, "mean_k_hat", float(np.mean(k_hat))),
            ]
        k_star = oracle_index(family, path, grid, t)
        theta_star_hat = engine.theta[:, k_star - 1]
        oracle_rows += [
            ("oracle", t, "mae", float(np.mean(np.abs(theta_star_hat - theta_true)))),
            ("oracle", t, "kl_risk", float(np.mean(family.kl(theta_true, theta_star_hat)))),
            ("oracle", t, "mean_k_hat", float(k_star)),
        ]

    delay_rows = []
    for jump_pos, _, _ in scenario.jumps():
        if jump_pos < n_k:
            continue  # not enough pre-jump history to define a baseline
        horizon = delay_horizon or min(2 * n_k, scenario.n_obs - jump_pos)
        horizon = min(horizon, scenario.n_obs - jump_pos)
        if horizon < 1:
            continue
        pre = {}
        engine = engine_at(jump_pos)
        for method in methods:
            _, _, eff = engine.select(method, cvs[method].z, kernel)
            pre[method] = eff
        delay = {m: np.full(scenario.m_reps, horizon, dtype=float) for m in methods}
        found = {m: np.zeros(scenario.m_reps, dtype=bool) for m in methods}
        for s in range(1, horizon + 1):
            engine = engine_at(jump_pos + s)
            for method in methods:
                _, _, eff = engine.select(method, cvs[method].z, kernel)
                newly = ~found[method] & (eff < pre[method])
                delay[method][newly] = s
                found[method] |= newly
            if all(found[m].all() for m in methods):
                break
        for method in methods:
            delay_rows += [
                (method, jump_pos, "delay_mean", float(delay[method].mean())),
                (method, jump_pos, "delay_median", float(np.median(delay[method]))),
                (method, jump_pos, "detect_rate", float(found[method].mean())),
            ]

    config = {
        "scenario": scenario.to_config(),
        "grid": {
            "n0": grid.n0,
            "ratio": grid.ratio,
            "k_max": grid.k_max,
            "lengths": [int(n) for n in grid.lengths],
        },
        "critical_values": {
            m: [float(v) for v in cvs[m].z] for m in methods
        },
        "kernel_b": kernel.b,
        "delay_horizon": delay_horizon,
    }
    return ScenarioReport(
        config=config,
        eval_rows=tuple(eval_rows + oracle_rows),
        delay_rows=tuple(delay_rows),
    )


# ----------------------------------------------------------------------
# bundled designs
# ----------------------------------------------------------------------

_JUMP_THETAS = {
    # family: (base, moderate jump target, large jump target)
    "gaussian": (0.0, 1.0, 3.0),
    "volatility": (1.0, 3.0, 8.0),
    "poisson": (2.0, 4.0, 8.0),
    "exponential": (1.0, 2.5, 6.0),
}

_LADDER_THETAS = {
    "gaussian": (0.0, (0.7, 1.5, 3.0)),
    "volatility": (1.0, (2.5, 5.0, 12.0)),
    "poisson": (2.0, (3.2, 5.0, 9.0)),
    "exponential": (1.0, (2.0, 3.5, 7.0)),
    "bernoulli": (0.4, (0.55, 0.7, 0.85)),
}

_SERIES_LEN = 500
_JUMP_AT = 250


def _jump_scenario(kind, base, target, m_reps, seed, name):
    family = get_family(kind)
    evals = tuple(range(_JUMP_AT + 10, _JUMP_AT + 101, 10))
    return Scenario(
        family=family,
        segments=((_JUMP_AT, base), (_SERIES_LEN - _JUMP_AT, target)),
        m_reps=m_reps,
        eval_points=evals,
        seed=seed,
        name=name,
    )


def bundled_scenarios(m_reps: int = 200, seed: int = 2024) -> dict[str, Scenario]:
    """One homogeneous and two jump designs per family, length 500."""
    out = {}
    for kind, (base, moderate, large) in _JUMP_THETAS.items():
        family = get_family(kind)
        name = f"{kind}-homog"
        out[name] = Scenario(
            family=family,
            segments=((_SERIES_LEN, base),),
            m_reps=m_reps,
            eval_points=tuple(range(100, _SERIES_LEN + 1, 50)),
            seed=seed,
            name=name,
        )
        out[f"{kind}-jump-moderate"] = _jump_scenario(
            kind, base, moderate, m_reps, seed, f"{kind}-jump-moderate"
        )
        out[f"{kind}-jump-large"] = _jump_scenario(
            kind, base, large, m_reps, seed, f"{kind}-jump-large"
        )
    # bernoulli uses its own parameter levels
    name = "bernoulli-homog"
    out[name] = Scenario(
        family=get_family("bernoulli"),
        segments=((_SERIES_LEN, 0.5),),
        m_reps=m_reps,
        eval_points=tuple(range(100, _SERIES_LEN + 1, 50)),
        seed=seed,
        name=name,
    )
    out["bernoulli-jump-moderate"] = _jump_scenario(
        "bernoulli", 0.3, 0.6, m_reps, seed, "bernoulli-jump-moderate"
    )
    out["bernoulli-jump-large"] = _jump_scenario(
        "bernoulli", 0.2, 0.8, m_reps, seed, "bernoulli-jump-large"
    )
    return out


def contrast_ladder(kind: str, m_reps: int = 200, seed: int = 77) -> list[Scenario]:
    """Three jump designs of increasing contrast, sharing one seed.

    The shared seed pairs the replications across levels, so delay
    comparisons across the ladder are common-random-number comparisons.
    """
    base, targets = _LADDER_THETAS[kind]
    out = []
    for i, target in enumerate(targets, start=1):
        out.append(
            Scenario(
                family=get_family(kind),
                segments=((_JUMP_AT, base), (70, target)),
                m_reps=m_reps,
                eval_points=(_JUMP_AT + 10,),
                seed=seed,
                name=f"{kind}-ladder-{i}",
            )
        )
    return out
