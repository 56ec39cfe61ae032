"""Main effects and two-way interactions of a tensor-product spline.

Integrating coordinate ``k`` out of a tensor spline contracts its coefficient
tensor with the basis averages ``A_k`` along mode ``k``; the result is again a
tensor spline in the remaining coordinates.  Effects are computed per posterior
draw so credible bands carry the full posterior uncertainty.

Coordinate indices are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import MarginalBasis
from .errors import InsufficientSamples, ValidationError

MIN_BAND_SAMPLES = 100


def _check_index(j, p):
    if not (isinstance(j, (int, np.integer)) and 0 <= j < p):
        raise ValidationError(f"coordinate index {j!r} out of range for p = {p}")


def contract(b, bases: Sequence[MarginalBasis], keep: Sequence[int]) -> np.ndarray:
    """Integrate every coordinate not in ``keep`` out of coefficient vector(s) ``b``.

    ``b`` has shape ``(D,)`` or ``(m, D)``; the kept modes stay in their
    original (Kronecker) order.
    """
    dims = tuple(bs.d for bs in bases)
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    T = b.reshape((-1,) + dims)
    # contract from the last mode so earlier axis numbers stay valid
    for k in reversed(range(len(dims))):
        if k not in keep:
            T = np.tensordot(T, bases[k].averages, axes=([k + 1], [0]))
    out = T.reshape(T.shape[0], -1)
    return out[0] if single else out


def main_effect_coefs(b, j: int, bases: Sequence[MarginalBasis]) -> np.ndarray:
    """Coefficients ``(A_1 (x) .. (x) I_{d_j} (x) .. (x) A_p) b`` of the ``j``-th main effect."""
    _check_index(j, len(bases))
    return contract(b, bases, (j,))


def interaction_coefs(b, j: int, k: int, bases: Sequence[MarginalBasis]) -> np.ndarray:
    """Coefficients of the ``(j, k)`` interaction in the basis ``B_j (x) B_k``.

    The first index given is the slowest-varying one in the result.
    """
    p = len(bases)
    _check_index(j, p)
    _check_index(k, p)
    if j == k:
        raise ValidationError("interaction needs two distinct coordinates")
    c = contract(b, bases, (j, k))
    if j < k:
        return c
    dj, dk = bases[j].d, bases[k].d
    if c.ndim == 1:
        return c.reshape(dk, dj).T.ravel()
    return c.reshape(-1, dk, dj).transpose(0, 2, 1).reshape(c.shape[0], -1)


@dataclass(frozen=True)
class Bands:
    mean: np.ndarray
    pointwise_lo: np.ndarray
    pointwise_hi: np.ndarray
    simultaneous_lo: np.ndarray
    simultaneous_hi: np.ndarray
    level: float
    critical_value: float


def credible_bands(samples, level: float = 0.95) -> Bands:
    """Pointwise quantile bands and simultaneous max-statistic bands.

    ``samples`` has shape ``(m, G)`` (one function evaluation per draw).  The
    simultaneous band is ``mean +- q * sd`` with ``q`` the ``level``-quantile of
    ``max_t |f_s(t) - mean(t)| / sd(t)``; it is widened where needed so that it
    always contains the pointwise band.
    """
    S = np.asarray(samples, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[0] < MIN_BAND_SAMPLES:
        raise InsufficientSamples(f"credible bands need >= {MIN_BAND_SAMPLES} draws, got {S.shape[0]}")
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    mean = S.mean(axis=0)
    sd = S.std(axis=0, ddof=1)
    alpha = 1.0 - level
    lo, hi = np.quantile(S, [alpha / 2, 1 - alpha / 2], axis=0, method="median_unbiased")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, np.abs(S - mean) / sd, 0.0)
    q = float(np.quantile(z.max(axis=1), level, method="median_unbiased"))
    return Bands(
        mean=mean,
        pointwise_lo=lo,
        pointwise_hi=hi,
        simultaneous_lo=np.minimum(mean - q * sd, lo),
        simultaneous_hi=np.maximum(mean + q * sd, hi),
        level=level,
        critical_value=q,
    )


@dataclass(eq=False)
class EffectResult:
    """A main effect (one index) or interaction (two indices) with bands on a grid.

    For interactions ``grid`` is a pair of 1-D grids and the band arrays are
    flattened with the first coordinate slowest.
    """

    indices: tuple[int, ...]
    bases: tuple[MarginalBasis, ...] = field(repr=False)
    coefficients: np.ndarray = field(repr=False)  # (m, d_j) or (m, d_j * d_k)
    grid: tuple[np.ndarray, ...] = field(repr=False)
    bands: Bands = field(repr=False)

    @property
    def level(self) -> float:
        return self.bands.level

    @property
    def mean(self) -> np.ndarray:
        return self.bands.mean

    def grid_points(self) -> np.ndarray:
        """Grid as an ``(G, len(indices))`` array in unit-cube coordinates."""
        mesh = np.meshgrid(*self.grid, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def write_csv(self, path, names: Sequence[str] | None = None, transforms=None) -> None:
        """Grid, posterior mean and both bands; ``transforms`` maps unit grids to original units."""
        pts = self.grid_points()
        if transforms is not None:
            pts = np.column_stack([transforms[i](pts[:, i]) for i in range(pts.shape[1])])
        names = list(names) if names else [f"x{j + 1}" for j in self.indices]
        b = self.bands
        cols = [pts[:, i] for i in range(pts.shape[1])] + [
            b.mean, b.pointwise_lo, b.pointwise_hi, b.simultaneous_lo, b.simultaneous_hi
        ]
        header = names + ["mean", "pointwise_lo", "pointwise_hi", "simultaneous_lo", "simultaneous_hi"]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def metadata(self, names: Sequence[str] | None = None) -> dict:
        return {
            "kind": "main_effect" if len(self.indices) == 1 else "interaction",
            "indices": list(self.indices),
            "names": list(names) if names else None,
            "level": self.level,
            "critical_value": self.bands.critical_value,
            "n_draws": int(self.coefficients.shape[0]),
            "grid_sizes": [len(g) for g in self.grid],
        }

    def write(self, stem, names=None, transforms=None) -> tuple[Path, Path]:
        stem = Path(stem)
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        self.write_csv(csv_path, names, transforms)
        json_path.write_text(json.dumps(self.metadata(names), indent=2))
        return csv_path, json_path


def _evaluate(coefs: np.ndarray, bases, grid) -> np.ndarray:
    if len(bases) == 1:
        return coefs @ bases[0].dense(grid[0]).T
    Bj = bases[0].dense(grid[0])
    Bk = bases[1].dense(grid[1])
    C = coefs.reshape(-1, bases[0].d, bases[1].d)
    return np.einsum("ga,mab,hb->mgh", Bj, C, Bk).reshape(coefs.shape[0], -1)


def main_effect(
    b_samples, j: int, bases: Sequence[MarginalBasis], grid=200, level: float = 0.95, center: bool = False
) -> EffectResult:
    """Main effect of coordinate ``j`` for every draw in ``b_samples`` (shape ``(m, D)``).

    ``center=True`` subtracts each draw's average over [0, 1].
    """
    coefs = np.atleast_2d(main_effect_coefs(np.atleast_2d(b_samples), j, bases))
    g = np.linspace(0.0, 1.0, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    vals = _evaluate(coefs, [bases[j]], [g])
    if center:
        vals = vals - (coefs @ bases[j].averages)[:, None]
    return EffectResult((j,), (bases[j],), coefs, (g,), credible_bands(vals, level))


def interaction(
    b_samples, j: int, k: int, bases: Sequence[MarginalBasis], grid=(60, 60), level: float = 0.95, center: bool = False
) -> EffectResult:
    coefs = np.atleast_2d(interaction_coefs(np.atleast_2d(b_samples), j, k, bases))
    grids = tuple(
        np.linspace(0.0, 1.0, g) if np.isscalar(g) else np.asarray(g, dtype=float) for g in grid
    )
    pair = [bases[j], bases[k]]
    vals = _evaluate(coefs, pair, grids)
    if center:
        vals = vals - (coefs @ np.kron(pair[0].averages, pair[1].averages))[:, None]
    return EffectResult((j, k), tuple(pair), coefs, grids, credible_bands(vals, level))
