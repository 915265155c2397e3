"""
Probability models for integer residuals
========================================

Three parametric families share one interface: Gaussian, generalized
Gaussian, and Gaussian mixture.  Each gives a CDF, an integer PMF over
rounding bins, and the resulting code length in bits.
"""

import numpy as np

from swpc import (
    ProbModel,
    cdf_eval,
    ggm_alpha_for_std,
    model_std,
    pmf_integer,
    rate_bits,
    support_radius,
)

symbols = np.arange(-6, 7)

# A plain Gaussian and a heavier-tailed generalized Gaussian with the
# same standard deviation.
gauss = ProbModel.gaussian(sigma=1.8)
ggm = ProbModel.generalized_gaussian(beta=1.0, alpha=ggm_alpha_for_std(1.0, 1.8))

print("std (gauss, ggm):", model_std(gauss), model_std(ggm))

p_gauss = pmf_integer(gauss, symbols)
p_ggm = pmf_integer(ggm, symbols)
for s, a, b in zip(symbols, p_gauss, p_ggm):
    print(f"  P({s:+d})  gauss {a:.5f}  laplace-like {b:.5f}")

# The Laplace-shaped tail keeps more mass far from zero, so extreme
# symbols cost fewer bits under it.
print("bits for symbol +5:", rate_bits(gauss, 5), "vs", rate_bits(ggm, 5))

# beta = 2 collapses the generalized family onto the Gaussian exactly.
degenerate = ProbModel.generalized_gaussian(beta=2.0, alpha=np.sqrt(2.0) * 1.8)
x = np.linspace(-5, 5, 9)
print("max |CDF gap| at beta=2:", np.max(np.abs(cdf_eval(degenerate, x) - cdf_eval(gauss, x))))

# Mixtures capture multi-modal residuals that no single bump can fit.
mix = ProbModel.mixture(weights=(0.3, 0.7), means=(-4.0, 2.0), sigmas=(0.8, 1.5))
print("mixture P(-4), P(0), P(+2):", pmf_integer(mix, np.array([-4, 0, 2])))
print("mixture support radius:", support_radius(mix))
