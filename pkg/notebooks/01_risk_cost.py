"""
The risk cost of a budget-threshold investor
============================================

An investor who cannot spend more than the expected gain of a position
takes that position only when the expected excess return clears a risk
cost. This script shows how that cost depends on the tail shape.
"""

import numpy as np

from budget_threshold import GedParams, mean_abs_dev, std_dev
from budget_threshold.allocator import risk_cost_sigma, risk_cost_std, tau

# tau moves from 1/sqrt(2 pi) at the Normal end to 1 at the Laplace end
for kappa in (0.5, 0.75, 1.0):
    print(f"kappa={kappa:<5} tau={tau(kappa):.7f}")

# In scale units the cost is sigma * tau, half the mean absolute deviation
p = GedParams(0.0, 0.01, 0.75)
print("sigma*tau  :", risk_cost_sigma(p.sigma, p.kappa))
print("MAD / 2    :", mean_abs_dev(p) / 2)

# Per unit of standard deviation the cost barely moves with kappa, so one
# constant K covers a wide range of tail shapes
grid = np.linspace(0.5, 1.0, 11)
factor = np.array([risk_cost_std(1.0, k) for k in grid])
for k, f in zip(grid, factor):
    print(f"kappa={k:.2f}  cost/s={f:.5f}")
print("spread max/min:", factor.max() / factor.min())

# the same number, recovered from the distribution's own standard deviation
print("check:", risk_cost_sigma(p.sigma, p.kappa) / std_dev(p), risk_cost_std(1.0, 0.75))
