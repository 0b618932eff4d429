"""Budget-threshold utility and numerical expected-utility oracles.

``U(W, beta) = min(W, beta)``: wealth above the budget earns nothing extra and
wealth below it counts linearly. With zero initial wealth, a holding ``h`` and
return ``r`` give ``W = h * r``, and the budget is the expected profit
``h * alpha``.

The functions here evaluate ``E[U(h r, h alpha)]`` without using the closed
form, either by adaptive quadrature or by Monte Carlo, so that the closed form
in :mod:`budget_threshold.allocator` can be checked against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from .ged_dist import (
    DEFAULT_QUAD,
    GedParams,
    ParameterError,
    QuadratureSpec,
    integrate_ged,
    lower_partial_moment_1,
    sample,
    upper_partial_moment_0,
)

__all__ = [
    "BudgetUtility",
    "Decomposition",
    "MonteCarloEstimate",
    "WealthModel",
    "expected_utility_monte_carlo",
    "expected_utility_quadrature",
    "partial_moment_decomposition",
    "utility",
]


@dataclass(frozen=True)
class BudgetUtility:
    """Utility that is flat at ``budget`` and linear below it.

    The budget may be negative (a short position against positive alpha).
    """

    budget: float

    def __post_init__(self) -> None:
        if not math.isfinite(float(self.budget)):
            raise ParameterError(f"budget must be finite, got {self.budget!r}")
        object.__setattr__(self, "budget", float(self.budget))

    def __call__(self, wealth: npt.ArrayLike) -> np.ndarray | float:
        return utility(self, wealth)


def utility(u: BudgetUtility, wealth: npt.ArrayLike) -> np.ndarray | float:
    """``U(W) = beta if W >= beta else W``."""
    out = np.minimum(np.asarray(wealth, dtype=float), u.budget)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WealthModel:
    """Zero initial wealth, position ``holding``, budget ``holding * alpha``."""

    holding: float
    alpha: float

    @property
    def budget(self) -> float:
        return self.holding * self.alpha

    def wealth(self, r: npt.ArrayLike) -> np.ndarray | float:
        return self.holding * np.asarray(r, dtype=float)

    def utility(self) -> BudgetUtility:
        return BudgetUtility(self.budget)


def expected_utility_quadrature(
    h: npt.ArrayLike, p: GedParams, spec: QuadratureSpec = DEFAULT_QUAD
) -> np.ndarray | float:
    """``integral of min(h r, h alpha) f(r | alpha, sigma, kappa) dr``.

    The location of ``p`` is the alpha. An array of holdings is integrated in
    a single vector-valued adaptive pass.
    """
    alpha = p.mu
    hs = np.asarray(h, dtype=float)
    if hs.ndim == 0:
        h0 = float(hs)
        if h0 == 0.0:
            return 0.0
        return integrate_ged(lambda r: min(h0 * r, h0 * alpha), p, spec=spec)
    flat = hs.ravel()
    budget = flat * alpha
    val = integrate_ged(
        lambda r: np.minimum(flat * r, budget), p, spec=spec, vector=True
    )
    return np.asarray(val, dtype=float).reshape(hs.shape)


class MonteCarloEstimate(NamedTuple):
    estimate: float
    std_error: float


def expected_utility_monte_carlo(h: float, p: GedParams, n: int, seed: int) -> MonteCarloEstimate:
    """Sample mean and standard error of ``min(h r_i, h alpha)``."""
    if int(n) < 2:
        raise ParameterError(f"n must be at least 2, got {n}")
    h = float(h)
    r = sample(p, n, seed)
    u = np.minimum(h * r, h * p.mu)
    return MonteCarloEstimate(float(u.mean()), float(u.std(ddof=1) / math.sqrt(u.size)))


class Decomposition(NamedTuple):
    lpm1: float
    upm0: float


def partial_moment_decomposition(
    h: float, p: GedParams, spec: QuadratureSpec = DEFAULT_QUAD
) -> Decomposition:
    """Partial moments of the wealth ``W = h r`` about the budget ``h alpha``.

    ``lpm1`` is the partial expectation ``E[(W - b) 1{W <= b}]`` and ``upm0``
    is ``P(W > b)``. The expected utility equals ``b + lpm1``; ``upm0`` on its
    own carries probability units and is reported for inspection only.
    """
    h = float(h)
    if h == 0.0:
        raise ParameterError("decomposition needs a non-zero holding")
    budget = h * p.mu
    wealth = GedParams(budget, abs(h) * p.sigma, p.kappa)
    return Decomposition(
        lower_partial_moment_1(wealth, budget, spec),
        upper_partial_moment_0(wealth, budget, spec),
    )
