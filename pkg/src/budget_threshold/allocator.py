"""Risk cost and optimal holdings for the budget-threshold investor.

With the budget set to the expected profit ``h * alpha`` the expected utility
of a holding ``h`` is ``h * (alpha - sigma * tau(kappa) * sign(h))``. It is
linear on each side of zero, so under a risk limit ``|h| <= L`` the optimum is
one of ``-L``, ``0`` or ``+L``: take the full position in the direction of
``alpha`` when ``|alpha|`` beats the risk cost ``sigma * tau(kappa)``, and stay
flat otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import special

from .ged_dist import ParameterError, check_kappa, check_positive

__all__ = [
    "AllocationQuery",
    "HoldingDecision",
    "Rule",
    "decide",
    "expected_utility_closed",
    "holding_curve",
    "optimal_holding",
    "risk_cost_factor",
    "risk_cost_sigma",
    "risk_cost_std",
    "semi_empirical_holding",
    "sigma_from_std",
    "tau",
]

LOG2 = math.log(2.0)


def tau(kappa: float) -> float:
    """Risk scaling ``Gamma(2k+1) / (2**(2-k) Gamma(k+1))``.

    Equals half the mean absolute deviation of a unit-scale GED. Runs from
    ``1/sqrt(2 pi)`` at ``kappa = 0.5`` to ``1`` at ``kappa = 1``.
    """
    k = check_kappa(kappa)
    return math.exp(special.gammaln(2.0 * k + 1.0) - special.gammaln(k + 1.0) - (2.0 - k) * LOG2)


def risk_cost_sigma(sigma: float, kappa: float) -> float:
    """Risk cost ``sigma * tau(kappa)`` in return units."""
    return check_positive("sigma", sigma) * tau(kappa)


def risk_cost_factor(kappa: float) -> float:
    """Risk cost per unit standard deviation.

    ``(1/4) sqrt(Gamma(k) / Gamma(3k)) Gamma(2k+1) / Gamma(k+1)``, evaluated
    directly rather than as ``tau`` divided by the standard-deviation ratio.
    """
    k = check_kappa(kappa)
    log_f = (
        0.5 * (special.gammaln(k) - special.gammaln(3.0 * k))
        + special.gammaln(2.0 * k + 1.0)
        - special.gammaln(k + 1.0)
    )
    return 0.25 * math.exp(log_f)


def risk_cost_std(s: float, kappa: float) -> float:
    """Risk cost expressed through the standard deviation ``s`` of returns."""
    return check_positive("s", s) * risk_cost_factor(kappa)


def sigma_from_std(s: float, kappa: float) -> float:
    """GED scale with standard deviation ``s``."""
    k = check_kappa(kappa)
    log_ratio = 2.0 * k * LOG2 + special.gammaln(3.0 * k) - special.gammaln(k)
    return check_positive("s", s) * math.exp(-0.5 * log_ratio)


def expected_utility_closed(
    h: npt.ArrayLike, alpha: float, sigma: float, kappa: float
) -> np.ndarray | float:
    """``h * (alpha - sigma * tau(kappa) * sign(h))``, with ``sign(0) = 0``."""
    cost = risk_cost_sigma(sigma, kappa)
    h = np.asarray(h, dtype=float)
    out = h * (float(alpha) - cost * np.sign(h))
    return out if out.ndim else float(out)


class Rule(str, enum.Enum):
    parametric = "parametric"
    semi_empirical = "semi_empirical"


@dataclass(frozen=True)
class AllocationQuery:
    """Inputs to the holding rules.

    Exactly one of ``sigma`` (GED scale) and ``s`` (standard deviation) is
    given. ``k_const`` selects the semi-empirical rule in :func:`decide`.
    """

    alpha: float
    kappa: float
    limit: float
    sigma: float | None = None
    s: float | None = None
    k_const: float | None = None

    def __post_init__(self) -> None:
        if (self.sigma is None) == (self.s is None):
            raise ParameterError("supply exactly one of sigma and s")
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise ParameterError(f"alpha must be finite, got {alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kappa", check_kappa(self.kappa))
        object.__setattr__(self, "limit", check_positive("limit", self.limit))
        if self.sigma is not None:
            object.__setattr__(self, "sigma", check_positive("sigma", self.sigma))
        if self.s is not None:
            object.__setattr__(self, "s", check_positive("s", self.s))
        if self.k_const is not None:
            object.__setattr__(self, "k_const", check_k_const(self.k_const))

    @property
    def scale(self) -> float:
        """GED scale, converted from ``s`` when needed."""
        return self.sigma if self.sigma is not None else sigma_from_std(self.s, self.kappa)

    @property
    def std(self) -> float:
        if self.s is not None:
            return self.s
        return self.sigma * math.exp(
            self.kappa * LOG2
            + 0.5 * (special.gammaln(3.0 * self.kappa) - special.gammaln(self.kappa))
        )


@dataclass(frozen=True)
class HoldingDecision:
    holding: float
    risk_cost: float
    margin: float
    rule: Rule

    def as_dict(self) -> dict:
        return {
            "holding": self.holding,
            "risk_cost": self.risk_cost,
            "margin": self.margin,
            "rule": self.rule.value,
        }


def check_k_const(k: float) -> float:
    # K = 0 is the binary long/short rule and K = inf is always flat; both
    # serve as backtest baselines.
    k = float(k)
    if math.isnan(k) or k < 0.0:
        raise ParameterError(f"k_const must be non-negative, got {k!r}")
    return k


def _three_state(alpha: float, cost: float, limit: float, rule: Rule) -> HoldingDecision:
    # strict inequality: a tie stays flat
    margin = abs(alpha) - cost
    holding = math.copysign(limit, alpha) if margin > 0.0 else 0.0
    return HoldingDecision(holding=holding, risk_cost=cost, margin=margin, rule=rule)


def optimal_holding(q: AllocationQuery) -> HoldingDecision:
    """Exact maximizer of expected utility over ``[-L, L]``.

    Returns ``L * sign(alpha)`` when ``|alpha| > sigma * tau(kappa)`` and ``0``
    otherwise, including at the tie.
    """
    return _three_state(q.alpha, risk_cost_sigma(q.scale, q.kappa), q.limit, Rule.parametric)


def semi_empirical_holding(alpha: float, s: float, limit: float, k_const: float) -> HoldingDecision:
    """Trader's rule: ``L * sign(alpha)`` when ``|alpha| > K * s``, else flat."""
    s = check_positive("s", s)
    limit = check_positive("limit", limit)
    k = check_k_const(k_const)
    return _three_state(float(alpha), k * s, limit, Rule.semi_empirical)


def decide(q: AllocationQuery) -> HoldingDecision:
    """Apply the semi-empirical rule when ``q.k_const`` is set, else the exact one."""
    if q.k_const is None:
        return optimal_holding(q)
    return semi_empirical_holding(q.alpha, q.std, q.limit, q.k_const)


def holding_curve(alphas_over_s: npt.ArrayLike, k_const: float) -> np.ndarray:
    """Relative position ``h / L`` against standardized alpha ``alpha / s``.

    Returns an ``(n, 2)`` array of ``(x, h/L)`` rows with ``h/L`` in
    ``{-1, 0, 1}``.
    """
    x = np.asarray(alphas_over_s, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ParameterError("holding curve grid must be finite")
    k = check_k_const(k_const)
    rel = np.where(np.abs(x) > k, np.sign(x), 0.0)
    return np.column_stack([x, rel + 0.0])
