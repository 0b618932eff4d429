"""Risk-limited asset allocation with a budget-threshold utility.

The investor's utility is ``min(W, beta)`` with the budget ``beta`` set to the
expected profit, and returns follow a Generalized Error distribution. Under a
position limit ``L`` the optimal holding is ``L * sign(alpha)`` when
``|alpha|`` exceeds the risk cost ``sigma * tau(kappa)``, and zero otherwise.
"""

from .allocator import (
    AllocationQuery,
    HoldingDecision,
    Rule,
    decide,
    expected_utility_closed,
    holding_curve,
    optimal_holding,
    risk_cost_factor,
    risk_cost_sigma,
    risk_cost_std,
    semi_empirical_holding,
    sigma_from_std,
    tau,
)
from .backtest import (
    BacktestReport,
    Calibration,
    ReturnSeries,
    StrategyConfig,
    calibrate_k,
    estimate_conditional_moments,
    read_series_csv,
    run_strategy,
    simulate_conditional_series,
    simulate_series,
)
from .ged_dist import (
    GedParams,
    KappaRangeWarning,
    ParameterError,
    QuadratureError,
    QuadratureSpec,
    cdf,
    log_pdf,
    lower_partial_moment_1,
    mean_abs_dev,
    pdf,
    sample,
    std_dev,
    upper_partial_moment_0,
    variance,
)
from .utility_core import (
    BudgetUtility,
    WealthModel,
    expected_utility_monte_carlo,
    expected_utility_quadrature,
    partial_moment_decomposition,
    utility,
)

__version__ = "0.1.0"
