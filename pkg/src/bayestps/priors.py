"""Priors on the smoothing variances, expressed as log-kernels in ``rho = log tau^2``.

Both kernels include the Jacobian ``exp(rho_j)`` of the log transform and drop
all additive constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import TensorDesign
from .errors import ScalingError, ValidationError
from .penalty import PenaltyEigenstructure, eigenstructure_for


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return arr


@dataclass(frozen=True)
class InverseGammaPrior:
    """``tau_j^2 ~ IG(alpha_j, beta_j)``; scalars broadcast over coordinates."""

    alpha: float | np.ndarray = 0.001
    beta: float | np.ndarray = 0.001

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "beta", _positive("beta", self.beta))

    name = "inverse_gamma"

    def log_kernel(self, rho) -> float:
        rho = np.asarray(rho, dtype=float)
        return float(np.sum(-self.alpha * rho - self.beta * np.exp(-rho)))

    def derivatives(self, rho) -> tuple[np.ndarray, np.ndarray]:
        rho = np.asarray(rho, dtype=float)
        e = self.beta * np.exp(-rho)
        return -self.alpha + e, -e

    def hyperparameters(self) -> dict:
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist()}


@dataclass(frozen=True)
class WeibullPrior:
    """``tau_j^2 ~ Weibull(shape 1/2, rate lambda_j)``, i.e. scale ``1 / lambda_j``.

    Density on ``tau^2``: ``0.5 * sqrt(lam) * (tau^2)^(-1/2) * exp(-sqrt(lam * tau^2))``.
    """

    rate: float | np.ndarray = 1.0

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    name = "weibull"
    shape = 0.5

    def log_kernel(self, rho) -> float:
        rho = np.asarray(rho, dtype=float)
        return float(np.sum(0.5 * rho - np.sqrt(self.rate) * np.exp(0.5 * rho)))

    def derivatives(self, rho) -> tuple[np.ndarray, np.ndarray]:
        rho = np.asarray(rho, dtype=float)
        e = np.sqrt(self.rate) * np.exp(0.5 * rho)
        return 0.5 - 0.5 * e, -0.25 * e

    def hyperparameters(self) -> dict:
        return {"rate": self.rate.tolist(), "shape": self.shape}


SmoothingPrior = InverseGammaPrior | WeibullPrior


def log_kernel_rho(prior: SmoothingPrior, rho) -> float:
    return prior.log_kernel(rho)


def kernel_derivs(prior: SmoothingPrior, rho) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian diagonal of the prior log-kernel (cross terms vanish)."""
    return prior.derivatives(rho)


def _apply_eigenvectors(es: PenaltyEigenstructure, V: np.ndarray) -> np.ndarray:
    """``(Qt_1 (x) ... (x) Qt_p) v`` for every row ``v`` of ``V``."""
    m = V.shape[0]
    T = V.reshape((m,) + es.dims)
    for j, marg in enumerate(es.marginals):
        T = np.moveaxis(np.tensordot(marg.eigenvectors, T, axes=(1, j + 1)), 0, j + 1)
    return T.reshape(m, -1)


class _PriorFunctionScale:
    """Median empirical sd of prior function draws at the design points, as a function of ``lambda``.

    Uses common random numbers: ``tau_j^2 = W_j / lambda`` with fixed Weibull(1/2, 1)
    draws ``W`` and fixed normal draws, so the map is smooth and monotone in ``lambda``.
    """

    def __init__(self, design: TensorDesign, n_draws: int, seed):
        rng = np.random.default_rng(seed)
        es = eigenstructure_for(design.dims)
        self.design = design
        self.es = es
        # Weibull(1/2, scale 1) = Exp(1)^2
        self.w = rng.exponential(size=(n_draws, es.p)) ** 2
        self.z = rng.standard_normal((n_draws, es.n_positive))

    def __call__(self, log_rate: float) -> float:
        es = self.es
        rho = np.log(self.w) - log_rate
        V = np.zeros((len(rho), es.D))
        for s, r in enumerate(rho):
            w = es.weighted(r)
            total = w[0]
            for arr in w[1:]:
                total = total + arr
            prec = np.broadcast_to(total, es.dims).ravel()[es.positive]
            V[s, es.positive] = self.z[s] / np.sqrt(prec)
        b = _apply_eigenvectors(es, V)
        f = self.design.matrix @ b.T
        return float(np.median(np.std(f, axis=0, ddof=1)))


def prior_scaling(
    design: TensorDesign,
    target_sd: float = 1.0,
    *,
    n_draws: int = 200,
    seed=20240101,
    bracket: tuple[float, float] = (-20.0, 20.0),
    tol: float = 1e-10,
) -> float:
    """Shared Weibull rate ``lambda`` so that prior function draws have scale ``target_sd``.

    For each of ``n_draws`` Monte Carlo draws, ``tau^2`` is drawn from the
    Weibull prior and ``b`` from the Gaussian prior restricted to the penalized
    (proper) subspace; the null-space part is set to zero.  The median over
    draws of the empirical standard deviation of ``B b`` is matched to
    ``target_sd`` by bisection on ``log lambda`` over ``bracket``.
    """
    if not target_sd > 0:
        raise ValidationError(f"target_sd must be positive, got {target_sd!r}")
    if design.n < 2:
        raise ScalingError("prior scaling needs at least two design points (sd undefined for n = 1)")
    scale = _PriorFunctionScale(design, n_draws, seed)
    lo, hi = bracket
    g_lo = scale(lo) - target_sd
    g_hi = scale(hi) - target_sd
    if not (np.isfinite(g_lo) and np.isfinite(g_hi)) or g_lo * g_hi > 0:
        raise ScalingError(
            f"target sd {target_sd} not bracketed: median sd is {g_lo + target_sd:.6g} at "
            f"log(lambda)={lo} and {g_hi + target_sd:.6g} at log(lambda)={hi}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = scale(mid) - target_sd
        if g_mid == 0:
            lo = hi = mid
            break
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return float(np.exp(0.5 * (lo + hi)))
