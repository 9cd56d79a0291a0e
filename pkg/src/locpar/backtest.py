"""Price ingestion, squared log-returns and rolling volatility backtests.

``load_prices`` reads a two-column CSV (timestamp, price; header optional),
``to_returns`` turns it into squared log-returns ``Y_t = (ln S_t - ln
S_{t-1})^2`` — the observations of the volatility family — and
``backtest`` rolls an adaptive estimator along the series: at each
evaluated right edge the current estimate is the flat h-step-ahead
forecast of ``E[Y]``, paired with the realization ``Y_{t+h}``.

Evaluated edges are the multiples of the stride that leave enough history
for the full interval ladder and still have a realization ahead; the whole
pass is deterministic (no randomness in the estimation path).

Exact zeros are legal squared returns; only the estimate clamp (and the
clamp on the realized value inside the predictive KL loss) keeps
divergences finite.  Note the clamp floor is absolute (1e-6), so very low
volatility series are best rescaled, e.g. to percent returns.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidArgumentError,
    NonpositivePriceError,
    ParseError,
    TooShortError,
)
from .intervals import build_grid
from .procedures import AggregationKernel, CriticalValues, run_method
from .families import Volatility

_FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class PriceSeries:
    """Strictly increasing timestamps with positive prices."""

    timestamps: tuple
    prices: np.ndarray

    def __len__(self) -> int:
        return self.prices.size


@dataclass(frozen=True)
class ReturnSeries:
    """Squared log-returns and the forecast horizon in steps."""

    sq_log_returns: np.ndarray
    horizon: int = 1

    def __len__(self) -> int:
        return self.sq_log_returns.size


def load_prices(path) -> PriceSeries:
    """Parse a (timestamp, price) CSV; rejects nonpositive prices.

    Timestamps must be strictly increasing; they are compared numerically
    when every label parses as a number and lexicographically otherwise.
    """
    timestamps: list = []
    prices: list[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(0, f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError(i, "expected two columns (timestamp, price)")
            ts, price_str = row[0].strip(), row[1].strip()
            try:
                price = float(price_str)
            except ValueError:
                if i == 1:
                    continue  # header row
                raise ParseError(i, f"price {price_str!r} is not a number") from None
            if not math.isfinite(price):
                raise ParseError(i, f"price {price_str!r} is not finite")
            if price <= 0:
                raise NonpositivePriceError(f"row {i}: price {price} <= 0")
            timestamps.append(ts)
            prices.append(price)
    if not prices:
        raise ParseError(0, "no data rows found")

    def _key(label):
        try:
            return float(label)
        except ValueError:
            return None

    numeric = [_key(ts) for ts in timestamps]
    keys = numeric if all(k is not None for k in numeric) else timestamps
    for i in range(1, len(keys)):
        if keys[i] <= keys[i - 1]:
            raise ParseError(i + 1, f"timestamps not strictly increasing at {timestamps[i]!r}")
    return PriceSeries(tuple(timestamps), np.asarray(prices, dtype=float))


def to_returns(prices: PriceSeries, horizon: int = 1) -> ReturnSeries:
    """Squared log-returns of a price series (length shrinks by one)."""
    if len(prices) < 2:
        raise TooShortError("need at least two prices for a return")
    if horizon < 1:
        raise InvalidArgumentError("forecast horizon must be >= 1")
    log_p = np.log(prices.prices)
    return ReturnSeries(np.diff(log_p) ** 2, horizon=horizon)


@dataclass(frozen=True)
class BacktestResult:
    """Rolling forecast/realization pairs plus the mean predictive loss."""

    t: np.ndarray
    k_hat: np.ndarray
    theta_hat: np.ndarray
    realized: np.ndarray
    mean_kl_loss: float
    config: dict

    def __len__(self) -> int:
        return self.t.size

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,k_hat,theta_hat,realized\n")
            for t, k, th, y in zip(self.t, self.k_hat, self.theta_hat, self.realized):
                fh.write(f"{t},{k},{th:{_FLOAT_FMT}},{y:{_FLOAT_FMT}}\n")


def backtest(
    returns: ReturnSeries,
    method: str,
    n0: int,
    ratio: float,
    k_max: int,
    cv: CriticalValues,
    kernel: AggregationKernel = AggregationKernel(),
    stride: int = 1,
) -> BacktestResult:
    """Roll the adaptive volatility estimate along a return series.

    Edges are ``t = stride, 2*stride, ...`` restricted to those with full
    ladder history (``t >= N_K``) and a realization (``t + horizon``
    inside the series); a stride beyond the series yields an empty table.
    """
    if stride < 1:
        raise InvalidArgumentError("stride must be >= 1")
    family = Volatility()
    y = np.asarray(returns.sq_log_returns, dtype=float)
    family.check_support(y)
    h = returns.horizon
    template = build_grid(t=max(n0, len(y)), n0=n0, u=ratio, k_max=k_max)
    n_k = template.lengths[-1]

    first = ((n_k + stride - 1) // stride) * stride  # first multiple >= N_K
    eval_ts = list(range(first, len(y) - h + 1, stride))

    ts, ks, thetas, realized = [], [], [], []
    for t in eval_ts:
        grid = template.at(t)
        result = run_method(method, family, y, grid, cv, kernel)
        ts.append(t)
        ks.append(result.k_hat)
        thetas.append(result.theta_hat)
        realized.append(float(y[t + h - 1]))
    thetas_arr = np.asarray(thetas, dtype=float)
    realized_arr = np.asarray(realized, dtype=float)
    if len(ts):
        losses = family.kl(family.clamp(realized_arr), thetas_arr)
        mean_loss = float(np.mean(losses))
    else:
        mean_loss = float("nan")
    config = {
        "method": method,
        "grid": {"n0": n0, "ratio": ratio, "k_max": k_max},
        "cv": [float(v) for v in cv.z],
        "kernel_b": kernel.b,
        "stride": stride,
        "horizon": h,
        "n_returns": int(len(y)),
    }
    return BacktestResult(
        t=np.asarray(ts, dtype=int),
        k_hat=np.asarray(ks, dtype=int),
        theta_hat=thetas_arr,
        realized=realized_arr,
        mean_kl_loss=mean_loss,
        config=config,
    )
