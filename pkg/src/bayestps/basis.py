"""Cubic B-spline marginal bases on [0, 1] and tensor-product design matrices.

Knots are equidistant and extended three steps beyond each boundary, so the
``d`` basis functions form a partition of unity on the whole unit interval.

Tensor-product columns follow the Kronecker ordering ``B_1 (x) B_2 (x) ... (x) B_p``:
coordinate 1 is the slowest-varying index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BasisError, DomainError, ValidationError

DEGREE = 3


def _cox_de_boor(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """All B-spline values of ``degree`` on ``knots`` at ``x`` (shape ``(len(x), m)``).

    Plain triangular recurrence; intervals are half-open except that the last
    non-degenerate interval is closed on the right.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = knots
    n0 = len(t) - 1
    N = np.zeros((len(x), n0))
    for i in range(n0):
        N[:, i] = (t[i] <= x) & (x < t[i + 1])
    last = np.nonzero(t[1:] > t[:-1])[0][-1]
    N[x == t[last + 1], last] = 1.0
    for k in range(1, degree + 1):
        M = np.zeros((len(x), n0 - k))
        for i in range(n0 - k):
            den1 = t[i + k] - t[i]
            den2 = t[i + k + 1] - t[i + 1]
            if den1 > 0:
                M[:, i] += (x - t[i]) / den1 * N[:, i]
            if den2 > 0:
                M[:, i] += (t[i + k + 1] - x) / den2 * N[:, i + 1]
        N = M
    return N


@dataclass(frozen=True, eq=False)
class MarginalBasis:
    """Cubic B-spline basis of dimension ``d`` on equidistant knots.

    Attributes
    ----------
    d : int
        Number of basis functions.
    knots : ndarray
        ``d + 4`` equidistant knots; ``knots[3] == 0`` and ``knots[d] == 1``.
    averages : ndarray
        Integrals of each basis function over [0, 1] (the row ``A_j``).
    """

    d: int
    knots: np.ndarray = field(repr=False)
    averages: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.d - DEGREE)

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized de Boor evaluation.

        Returns
        -------
        offsets : ndarray of int, shape (n,)
            Index of the first nonzero basis function at each point.
        values : ndarray, shape (n, 4)
            The four (possibly zero) basis values starting at ``offsets``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        bad = np.nonzero(~((x >= 0.0) & (x <= 1.0)))[0]
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"x[{i}] = {x[i]!r} is outside [0, 1]", row=i)
        t = self.knots
        span = np.minimum(np.floor(x / self.spacing).astype(np.int64), self.d - 4) + DEGREE
        # floor can land one interval high when x sits just below a knot
        span -= x < t[span]
        span += x >= t[np.minimum(span + 1, len(t) - 1)]
        span = np.clip(span, DEGREE, self.d - 1)

        n = len(x)
        vals = np.zeros((n, DEGREE + 1))
        vals[:, 0] = 1.0
        left = np.empty((n, DEGREE + 1))
        right = np.empty((n, DEGREE + 1))
        for j in range(1, DEGREE + 1):
            left[:, j] = x - t[span + 1 - j]
            right[:, j] = t[span + j] - x
            saved = np.zeros(n)
            for r in range(j):
                temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
                vals[:, r] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            vals[:, j] = saved
        return span - DEGREE, vals

    def dense(self, x) -> np.ndarray:
        """Dense ``(n, d)`` basis matrix at ``x``."""
        offsets, vals = self.evaluate(x)
        out = np.zeros((len(offsets), self.d))
        rows = np.arange(len(offsets))[:, None]
        out[rows, offsets[:, None] + np.arange(DEGREE + 1)] = vals
        return out


def make_marginal_basis(d: int) -> MarginalBasis:
    """Build a cubic basis with ``d`` functions covering [0, 1].

    The averages use the integral recurrence
    ``int_{-inf}^x B_{k,3} = h * sum_{i >= k} B_{i,4}(x)`` evaluated at the
    two boundary knots, which is exact.
    """
    if int(d) != d or d < DEGREE + 1:
        raise BasisError(f"basis dimension must be an integer >= 4, got {d!r}")
    d = int(d)
    h = 1.0 / (d - DEGREE)
    knots = (np.arange(d + DEGREE + 1) - DEGREE) * h
    knots[DEGREE] = 0.0
    knots[d] = 1.0

    # two extra knots per side so every quartic touching [0, 1] is defined
    ext = (np.arange(-2, d + DEGREE + 3) - DEGREE) * h
    quartic = _cox_de_boor(ext, DEGREE + 1, np.array([0.0, 1.0]))
    tails = np.cumsum(quartic[:, ::-1], axis=1)[:, ::-1]  # sum_{i >= k}
    cum = tails[:, 2 : 2 + d]
    averages = h * (cum[1] - cum[0])
    return MarginalBasis(d=d, knots=knots, averages=averages)


def eval_marginal(basis: MarginalBasis, x: float) -> tuple[int, np.ndarray]:
    """Offset of the first nonzero basis function at scalar ``x`` and its 4 values."""
    offsets, vals = basis.evaluate(np.array([x], dtype=float))
    return int(offsets[0]), vals[0]


def _strides(dims: Sequence[int]) -> np.ndarray:
    dims = np.asarray(dims, dtype=np.int64)
    return np.concatenate([np.cumprod(dims[::-1])[::-1][1:], [1]])


def _tensor_entries(bases: Sequence[MarginalBasis], X: np.ndarray):
    """Column indices and values of the 4**p nonzeros in every design row."""
    n, p = X.shape
    strides = _strides([b.d for b in bases])
    cols = np.zeros((n, 1), dtype=np.int64)
    vals = np.ones((n, 1))
    local = np.arange(DEGREE + 1)
    for j, basis in enumerate(bases):
        try:
            off, v = basis.evaluate(X[:, j])
        except DomainError as exc:
            raise DomainError(
                f"row {exc.row}, coordinate {j}: value {X[exc.row, j]!r} outside [0, 1]",
                row=exc.row,
            ) from None
        c = (off[:, None] + local) * strides[j]
        cols = (cols[:, :, None] + c[:, None, :]).reshape(n, -1)
        vals = (vals[:, :, None] * v[:, None, :]).reshape(n, -1)
    return cols, vals


def design_row(bases: Sequence[MarginalBasis], x) -> sp.csr_array:
    """Tensor-product design row of length ``D = prod(d_j)`` at one point ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != len(bases):
        raise ValidationError(f"point has {len(x)} coordinates, expected {len(bases)}")
    cols, vals = _tensor_entries(bases, x[None, :])
    D = int(np.prod([b.d for b in bases]))
    return sp.csr_array((vals[0], (np.zeros(cols.shape[1], dtype=np.int64), cols[0])), shape=(1, D))


@dataclass(eq=False)
class TensorDesign:
    """Sparse tensor-product design with cached cross products.

    ``btb`` is the sparse ``D x D`` matrix ``B^T B``; ``bty`` is ``B^T y`` when
    a response was supplied to :func:`build_design`.
    """

    bases: list[MarginalBasis]
    matrix: sp.csr_array = field(repr=False)
    btb: sp.csr_array = field(repr=False)
    bty: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return len(self.bases)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.d for b in self.bases)

    @property
    def D(self) -> int:
        return self.matrix.shape[1]

    def crossprod(self, y) -> np.ndarray:
        return self.matrix.T @ np.asarray(y, dtype=float)

    def fitted(self, b) -> np.ndarray:
        return self.matrix @ np.asarray(b, dtype=float)


def build_design(bases: Sequence[MarginalBasis], X, y=None) -> TensorDesign:
    """Assemble the ``n x D`` design for points ``X`` (shape ``(n, p)``) in [0, 1]^p."""
    bases = list(bases)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and len(bases) == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("design data must be a non-empty (n, p) array")
    if X.shape[1] != len(bases):
        raise ValidationError(f"data has {X.shape[1]} columns but {len(bases)} bases were given")
    n = X.shape[0]
    cols, vals = _tensor_entries(bases, X)
    D = int(np.prod([b.d for b in bases]))
    k = cols.shape[1]
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    B = sp.csr_array((vals.ravel(), cols.ravel(), indptr), shape=(n, D))
    B.sum_duplicates()
    btb = (B.T @ B).tocsr()
    bty = None
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != n:
            raise ValidationError(f"response has length {len(y)}, expected {n}")
        bty = B.T @ y
    return TensorDesign(bases=bases, matrix=B, btb=btb, bty=bty)
