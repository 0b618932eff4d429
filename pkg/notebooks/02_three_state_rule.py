"""
Three positions are enough
==========================

Expected utility is piecewise linear in the holding, so the best holding
sits at -L, 0 or L. We compare the closed-form rule with a brute-force
search over a fine grid of holdings.
"""

import numpy as np

from budget_threshold import GedParams
from budget_threshold.allocator import AllocationQuery, expected_utility_closed, optimal_holding
from budget_threshold.utility_core import expected_utility_quadrature

sigma, kappa, limit = 0.02, 0.75, 3.0
hs = np.linspace(-limit, limit, 601)

for alpha in (-0.02, -0.005, 0.0, 0.008, 0.03):
    values = expected_utility_quadrature(hs, GedParams(alpha, sigma, kappa))
    decision = optimal_holding(AllocationQuery(alpha=alpha, sigma=sigma, kappa=kappa, limit=limit))
    print(
        f"alpha={alpha:+.3f}  rule h={decision.holding:+.1f}  "
        f"grid argmax h={hs[values.argmax()]:+.2f}  margin={decision.margin:+.5f}"
    )

# the closed form agrees with numerical integration
h = 1.7
print("closed form:", expected_utility_closed(h, 0.01, sigma, kappa))
print("quadrature :", expected_utility_quadrature(h, GedParams(0.01, sigma, kappa)))
