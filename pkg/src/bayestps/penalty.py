"""Kronecker-sum difference penalties and the closed-form log-pseudo-determinant.

The overall penalty is ``K(tau^2) = sum_j K_j / tau_j^2`` with
``K_j = I (x) ... (x) Kt_j (x) ... (x) I``.  All ``K_j`` share the eigenvectors
``Q = Qt_1 (x) ... (x) Qt_p``, so on the eigenbasis the penalty is diagonal with
entries ``sum_j gamma_{j,l} exp(-rho_j)``.  ``Q`` itself is never formed; the
diagonal is rebuilt from the marginal eigenvalues by broadcasting.

Only differences of :func:`log_fcp_rho` are meaningful: the additive constant
of the log full conditional is fixed to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BasisError, ValidationError

ZERO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MarginalPenalty:
    """Second-order difference penalty ``Kt = D2^T D2`` with its eigendecomposition.

    ``eigenvalues`` are ascending; the two null-space eigenvalues are exactly zero.
    """

    matrix: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def second_diff_penalty(d: int) -> MarginalPenalty:
    if int(d) != d or d < 4:
        raise BasisError(f"penalty dimension must be an integer >= 4, got {d!r}")
    d = int(d)
    D2 = np.diff(np.eye(d), n=2, axis=0)
    K = D2.T @ D2
    w, V = np.linalg.eigh(K)
    eps = ZERO_TOL * w.max()
    null = w < eps
    if null.sum() != 2:
        raise ArithmeticError(f"second-difference penalty of size {d} has nullity {null.sum()}, expected 2")
    w = np.where(null, 0.0, w)
    return MarginalPenalty(matrix=K, eigenvectors=V, eigenvalues=w)


@dataclass(frozen=True, eq=False)
class PenaltyEigenstructure:
    """Marginal penalties plus the implicit diagonal table ``gamma_{j,l}``.

    The table index ``l`` is the mixed-radix number with digits
    ``(i_1, ..., i_p)``, coordinate 1 most significant, matching the Kronecker
    ordering of the design.
    """

    marginals: tuple[MarginalPenalty, ...]
    positive: np.ndarray = field(repr=False)  # boolean mask over l, the set D+

    @property
    def p(self) -> int:
        return len(self.marginals)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.d for m in self.marginals)

    @property
    def D(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_positive(self) -> int:
        return int(self.positive.sum())

    def _axis(self, j: int) -> list[int]:
        shape = [1] * self.p
        shape[j] = self.dims[j]
        return shape

    def gamma(self, j: int, l) -> np.ndarray:
        """``gamma_{j,l}`` for (an array of) flat indices ``l``."""
        digits = np.unravel_index(np.asarray(l), self.dims)
        return self.marginals[j].eigenvalues[digits[j]]

    def weighted(self, rho) -> list[np.ndarray]:
        """Per-coordinate broadcastable arrays ``gamma_j * exp(-rho_j)``."""
        rho = np.asarray(rho, dtype=float)
        return [
            (m.eigenvalues * np.exp(-rho[j])).reshape(self._axis(j))
            for j, m in enumerate(self.marginals)
        ]


def build_eigenstructure(penalties: Sequence[MarginalPenalty]) -> PenaltyEigenstructure:
    penalties = tuple(penalties)
    if not penalties:
        raise ValidationError("at least one marginal penalty is required")
    dims = tuple(m.d for m in penalties)
    positive = np.zeros(dims, dtype=bool)
    for j, m in enumerate(penalties):
        shape = [1] * len(dims)
        shape[j] = m.d
        positive |= (m.eigenvalues > 0).reshape(shape)
    return PenaltyEigenstructure(marginals=penalties, positive=positive.ravel())


def eigenstructure_for(dims: Sequence[int]) -> PenaltyEigenstructure:
    """Shortcut: second-difference penalties for every basis size in ``dims``."""
    return build_eigenstructure([second_diff_penalty(d) for d in dims])


def _check_rho(es: PenaltyEigenstructure, rho) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.shape != (es.p,):
        raise ValidationError(f"rho must have length {es.p}, got shape {rho.shape}")
    return rho


def _diag_positive(es: PenaltyEigenstructure, rho) -> tuple[list[np.ndarray], np.ndarray]:
    w = es.weighted(rho)
    total = w[0]
    for arr in w[1:]:
        total = total + arr
    return w, np.broadcast_to(total, es.dims).ravel()[es.positive]


def log_pseudo_det(es: PenaltyEigenstructure, rho) -> float:
    """``log Det K(exp(rho)) = sum_{l in D+} log(sum_j gamma_{j,l} exp(-rho_j))``."""
    rho = _check_rho(es, rho)
    _, s = _diag_positive(es, rho)
    return float(np.sum(np.log(s)))


def quadratic_forms(es: PenaltyEigenstructure, b) -> np.ndarray:
    """``(b^T K_1 b, ..., b^T K_p b)`` without forming any ``K_j``.

    ``b^T K_j b`` is the sum of squared second differences of ``b`` along mode ``j``.
    """
    b = np.asarray(b, dtype=float)
    if b.size != es.D:
        raise ValidationError(f"coefficient vector has length {b.size}, expected {es.D}")
    t = b.reshape(es.dims)
    return np.array([np.sum(np.diff(t, n=2, axis=j) ** 2) for j in range(es.p)])


def log_fcp_rho(es: PenaltyEigenstructure, rho, qf, prior) -> float:
    """Log full conditional of the log-smoothing variances, up to a constant."""
    rho = _check_rho(es, rho)
    qf = np.asarray(qf, dtype=float)
    return (
        0.5 * log_pseudo_det(es, rho)
        - 0.5 * float(np.sum(qf * np.exp(-rho)))
        + float(prior.log_kernel(rho))
    )


def grad_hess_rho(es: PenaltyEigenstructure, rho, qf, prior) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of :func:`log_fcp_rho` in one pass over ``D+``.

    The Hessian is unmodified and includes the prior's second derivatives.
    """
    rho = _check_rho(es, rho)
    qf = np.asarray(qf, dtype=float)
    p = es.p
    w, s = _diag_positive(es, rho)
    inv = 1.0 / s
    # shares a_{j,l} = gamma_{j,l} e^{-rho_j} / s_l, one row per coordinate
    a = np.empty((p, s.size))
    for j in range(p):
        a[j] = np.broadcast_to(w[j], es.dims).ravel()[es.positive] * inv
    sum_a = a.sum(axis=1)
    cross = a @ a.T

    scaled_qf = qf * np.exp(-rho)
    g_prior, h_prior = prior.derivatives(rho)

    u = -0.5 * sum_a + 0.5 * scaled_qf + g_prior
    H = -0.5 * cross
    H[np.diag_indices(p)] = -0.5 * (np.diag(cross) - sum_a) - 0.5 * scaled_qf + h_prior
    return u, H
