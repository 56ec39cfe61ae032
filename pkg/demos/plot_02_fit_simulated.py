"""
Fitting an isotropic test surface
=================================

Simulate noisy observations of sin(2 pi ||x||) on the unit square, run the
Metropolis-within-Gibbs sampler with a scaled Weibull prior on the smoothing
variances, and compare the posterior-mean fit with the truth.
"""

import numpy as np

from bayestps.basis import build_design, make_marginal_basis
from bayestps.penalty import eigenstructure_for
from bayestps.priors import WeibullPrior, prior_scaling
from bayestps.sampler import SamplerConfig, run_chain
from bayestps.simulation import f1

rng = np.random.default_rng(1)
n = 5000
X = rng.uniform(size=(n, 2))
f = f1(X)
y = f + 0.5 * rng.standard_normal(n)

###############################################################################
# Ten basis functions per coordinate give D = 100 coefficients.  The Weibull
# rate is chosen so that prior draws of the function have roughly unit
# standard deviation at the design points, the scale of the standardized
# response.

bases = [make_marginal_basis(10), make_marginal_basis(10)]
design = build_design(bases, X)
es = eigenstructure_for(design.dims)
lam = prior_scaling(design)
print(f"scaled Weibull rate: {lam:.3g}")

###############################################################################
# 1200 iterations with the first 200 discarded.  The first 100 updates of the
# log smoothing variances are damped Newton steps that move the chain quickly
# to the bulk of the posterior.

out = run_chain(design, es, WeibullPrior(lam), SamplerConfig(seed=2), y)
fit = out.posterior_mean_fit(design)
print(f"MSE against the truth: {np.mean((fit - f) ** 2):.5f}   (noise variance 0.25)")
print(f"acceptance rate for rho: {out.acceptance_rate:.2f}")
print("posterior median tau^2:", np.round(np.median(out.tau2, axis=0), 3))
print("posterior mean sigma^2 :", round(float(out.sigma2_original().mean()), 4))
print("seconds per block:", {k: round(v, 2) for k, v in out.timings.items()})
