"""Locally parametric adaptive estimation for univariate time series.

The package estimates a one-parameter exponential-family model on a
data-driven window ending at the point of interest.  Three adaptive
procedures (local change point, local model selection / intersection of
confidence intervals, stagewise aggregation) share one interval ladder and
one set of Monte Carlo calibrated critical values; a simulation harness
and a squared-return backtest exercise them end to end.
"""

from .errors import (
    BadRatioError,
    DomainViolationError,
    EmptyWindowError,
    GridTooLongError,
    GridTooSmallError,
    IndexOutOfRangeError,
    InfeasibleError,
    InvalidArgumentError,
    LengthMismatchError,
    LocparError,
    NonpositivePriceError,
    ParseError,
    SupportViolationError,
    TooShortError,
)
from .families import (
    EPS_CLAMP,
    FAMILIES,
    Bernoulli,
    Exponential,
    Family,
    Gaussian,
    Poisson,
    Volatility,
    family_from_config,
    get_family,
    parametric_risk_bound,
)
from .intervals import Interval, IntervalGrid, build_grid, ladder_lengths, max_scales
from .procedures import (
    METHODS,
    AdaptiveResult,
    AggregationKernel,
    CriticalValues,
    StepEstimates,
    lcp_run,
    lcp_split_statistic,
    lms_select,
    run_method,
    sa_run,
    step_estimates,
)
from .calibration import (
    CalibrationConfig,
    CalibrationReport,
    SearchSettings,
    adaptive_risk,
    calibrate,
    cv_length,
)
from .simulate import (
    Scenario,
    ScenarioReport,
    bundled_scenarios,
    contrast_ladder,
    oracle_index,
    run_scenario,
)
from .backtest import (
    BacktestResult,
    PriceSeries,
    ReturnSeries,
    backtest,
    load_prices,
    to_returns,
)

__version__ = "0.1.0"
