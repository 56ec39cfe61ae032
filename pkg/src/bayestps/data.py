"""CSV ingestion and affine rescaling of coordinates to the unit cube."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class Rescaling:
    """Per-coordinate affine map ``[min, max] -> [0, 1]``."""

    names: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    dropped_rows: tuple[int, ...] = field(default=(), compare=False)

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = np.array(self.mins), np.array(self.maxs)
        return (X - lo) / (hi - lo)

    def inverse(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        lo, hi = np.array(self.mins), np.array(self.maxs)
        return lo + U * (hi - lo)

    def forward_one(self, j: int, x):
        return (np.asarray(x, dtype=float) - self.mins[j]) / (self.maxs[j] - self.mins[j])

    def inverse_one(self, j: int, u):
        return self.mins[j] + np.asarray(u, dtype=float) * (self.maxs[j] - self.mins[j])

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, d) -> "Rescaling":
        return cls(tuple(d["names"]), tuple(d["mins"]), tuple(d["maxs"]))

    @classmethod
    def fit(cls, X, names: Sequence[str]) -> "Rescaling":
        X = np.asarray(X, dtype=float)
        mins, maxs = [], []
        for j, name in enumerate(names):
            col = X[:, j]
            if len(np.unique(col)) < 2:
                raise ValidationError(f"coordinate {name!r} has fewer than 2 distinct values")
            mins.append(float(col.min()))
            maxs.append(float(col.max()))
        return cls(tuple(names), tuple(mins), tuple(maxs))


def ingest_csv(path, coordinates: Sequence[str], response: str):
    """Read coordinate and response columns from a headed CSV file.

    Rows with a missing value in any used column are dropped (their 0-based
    data-row indices are logged and kept on the returned :class:`Rescaling`).

    Returns
    -------
    X : ndarray, shape (n, p)
        Coordinates mapped to [0, 1].
    y : ndarray, shape (n,)
    rescaling : Rescaling
    """
    coordinates = list(coordinates)
    if not coordinates:
        raise ValidationError("at least one coordinate column is required")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        wanted = coordinates + [response]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}; available {header}")
        idx = [header.index(c) for c in wanted]
        rows, dropped = [], []
        for i, rec in enumerate(reader):
            if not rec or all(not c.strip() for c in rec):
                continue
            cells = [rec[k].strip() if k < len(rec) else "" for k in idx]
            if any(c.lower() in MISSING for c in cells):
                dropped.append(i)
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise ValidationError(f"{path}: non-numeric cell {bad!r} in data row {i}") from None
            if not all(math.isfinite(v) for v in vals):
                dropped.append(i)
                continue
            rows.append(vals)
    if dropped:
        log.warning("dropped %d rows with missing values: %s", len(dropped), dropped[:20])
    if not rows:
        raise ValidationError(f"{path}: no complete data rows")
    data = np.array(rows)
    X_raw, y = data[:, :-1], data[:, -1]
    resc = Rescaling.fit(X_raw, coordinates)
    resc = Rescaling(resc.names, resc.mins, resc.maxs, dropped_rows=tuple(dropped))
    X = np.clip(resc.forward(X_raw), 0.0, 1.0)
    return X, y, resc


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
