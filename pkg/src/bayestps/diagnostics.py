"""Posterior summaries and convergence diagnostics for scalar MCMC traces.

R-hat is the rank-normalized split-R-hat; bulk ESS uses the same
rank-normalized split chains; tail ESS is the smaller ESS of the indicator
chains ``I(x <= q05)`` and ``I(x <= q95)``.  Autocorrelations are summed lag by
lag and truncated with Geyer's initial monotone sequence.  Quantiles use the
median-unbiased interpolation rule throughout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientSamples

MIN_DRAWS = 100
QUANTILE_METHOD = "median_unbiased"


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    median: float
    sd: float
    mad: float
    q05: float
    q95: float
    rhat: float
    ess_bulk: float
    ess_tail: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _as_chains(chains) -> np.ndarray:
    arr = np.asarray(chains, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("chains must be a 1-D trace or a list of equal-length traces")
    return arr


def split_chains(x: np.ndarray) -> np.ndarray:
    """Split every chain in half (dropping the middle draw of odd-length chains)."""
    n = x.shape[1]
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half :]], axis=0)


def rank_normalize(x: np.ndarray) -> np.ndarray:
    """Pooled average ranks mapped through the normal quantile function (Blom offsets)."""
    S = x.size
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((r - 0.375) / (S + 0.25))


def rhat_basic(x: np.ndarray) -> float:
    m, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * W + B / n
    return float(math.sqrt(var_plus / W))


def ess_basic(x: np.ndarray) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation."""
    m, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    W = x.var(axis=1, ddof=1).mean()
    B = n * x.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * W + B / n

    def rho_hat(t):
        if t == 0:
            return 1.0
        acov = np.einsum("ij,ij->i", centered[:, : n - t], centered[:, t:]) / n
        return 1.0 - (W - acov.mean()) / var_plus

    tau = 0.0
    prev_pair = math.inf
    t = 0
    while t + 1 < n:
        pair = rho_hat(t) + rho_hat(t + 1)
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    tau = -1.0 + 2.0 * tau
    S = m * n
    tau = max(tau, 1.0 / math.log10(S))
    return float(S / tau)


def summarize(chains, name: str = "") -> SummaryRow:
    """Table-4-style summary of one scalar parameter from one or more chains."""
    x = _as_chains(chains)
    if x.shape[1] < MIN_DRAWS:
        raise InsufficientSamples(f"need >= {MIN_DRAWS} draws per chain, got {x.shape[1]}")
    flat = x.ravel()
    q05, med, q95 = np.quantile(flat, [0.05, 0.5, 0.95], method=QUANTILE_METHOD)
    common = dict(
        name=name,
        mean=float(flat.mean()),
        median=float(med),
        sd=float(flat.std(ddof=1)),
        mad=float(stats.median_abs_deviation(flat, scale="normal")),
        q05=float(q05),
        q95=float(q95),
    )
    split = split_chains(x)
    if np.ptp(flat) == 0 or np.any(split.var(axis=1) == 0):
        nan = float("nan")
        return SummaryRow(**common, rhat=nan, ess_bulk=nan, ess_tail=nan, degenerate=True)

    z = rank_normalize(split)
    rhat = rhat_basic(z)
    ess_bulk = ess_basic(z)
    tails = []
    for q in (q05, q95):
        ind = (split <= q).astype(float)
        tails.append(ess_basic(ind) if np.ptp(ind) > 0 and np.all(ind.var(axis=1) > 0) else float("nan"))
    ess_tail = float(np.nanmin(tails)) if not all(np.isnan(tails)) else float("nan")
    return SummaryRow(**common, rhat=rhat, ess_bulk=ess_bulk, ess_tail=ess_tail)


def summary_table(traces: dict[str, Sequence]) -> list[SummaryRow]:
    """Summaries for several named parameters; each value is a trace or list of chain traces."""
    return [summarize(v, name=k) for k, v in traces.items()]


COLUMNS = ("mean", "median", "sd", "mad", "q05", "q95", "rhat", "ess_bulk", "ess_tail")


def format_table(rows: Sequence[SummaryRow]) -> str:
    width = max([len(r.name) for r in rows] + [4])
    head = " " * width + " | " + " ".join(f"{c:>10}" for c in COLUMNS)
    lines = [head, "-" * len(head)]
    for r in rows:
        vals = [getattr(r, c) for c in COLUMNS]
        lines.append(f"{r.name:>{width}} | " + " ".join(f"{v:>10.2f}" for v in vals))
    return "\n".join(lines)


def write_table_csv(rows: Sequence[SummaryRow], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(("name",) + COLUMNS + ("degenerate",)) + "\n")
        for r in rows:
            vals = [repr(float(getattr(r, c))) for c in COLUMNS]
            fh.write(",".join([r.name] + vals + [str(r.degenerate).lower()]) + "\n")
