"""Metropolis-within-Gibbs sampler for the anisotropic tensor-product P-spline model.

One iteration draws ``b | rho, sigma^2, y`` (Gaussian, banded Cholesky),
``sigma^2 | b, y`` (inverse gamma, Jeffreys prior) and ``rho | b`` with a
Taylored Metropolis-Hastings step whose Gaussian proposal comes from a Newton
expansion of the log full conditional at the current point.  The first
``newton_steps`` updates of ``rho`` are plain (damped) Newton-Raphson steps.

The response is standardized to mean zero and unit variance before sampling;
all stored draws live on that scale (see :meth:`ChainOutput.coefficients`).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve, lapack, solve_triangular

from .basis import TensorDesign
from .errors import DegenerateFit, NumericalBreakdown, ValidationError
from .penalty import (
    PenaltyEigenstructure,
    grad_hess_rho,
    log_fcp_rho,
    quadratic_forms,
)

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1.0 / math.pi
# lower bound for sigma^2 draws on the standardized scale; stops geometric
# collapse (and underflow) when the data are fitted exactly
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 1200
    burn_in: int = 200
    delta: float = DEFAULT_DELTA
    newton_steps: int = 100
    seed: int = 0
    init_rho: tuple[float, ...] | None = None
    thin: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValidationError(f"burn_in must lie in [0, iterations), got {self.burn_in}")
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.newton_steps < 0:
            raise ValidationError("newton_steps must be >= 0")

    @property
    def n_kept(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thin)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["init_rho"] is not None:
            d["init_rho"] = list(d["init_rho"])
        return d


# --------------------------------------------------------------------------
# precision matrix workspace


def _penalty_component(dims, j: int, marginal_matrix) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for k, d in enumerate(dims):
        out = sp.kron(out, sp.csr_matrix(marginal_matrix) if k == j else sp.identity(d), format="csr")
    return out


def _to_banded_upper(A: sp.spmatrix, u: int) -> np.ndarray:
    A = sp.coo_matrix(A)
    keep = A.row <= A.col
    ab = np.zeros((u + 1, A.shape[0]))
    np.add.at(ab, (u + A.row[keep] - A.col[keep], A.col[keep]), A.data[keep])
    return ab


class PrecisionWorkspace:
    """Symbolic part of the factorization of ``P = B^T B / sigma^2 + sum_j K_j exp(-rho_j)``.

    The ordering is a mode permutation of the Kronecker index (largest basis
    slowest), which minimizes the bandwidth of ``P``; the pattern does not
    depend on ``(rho, sigma^2)`` so the ordering and banded layouts of ``B^T B``
    and every ``K_j`` are computed once.  Each call to :meth:`factor` is a
    LAPACK banded Cholesky (``dpbtrf``).
    """

    def __init__(self, design: TensorDesign, es: PenaltyEigenstructure):
        dims = es.dims
        if tuple(design.dims) != tuple(dims):
            raise ValidationError(f"design dims {design.dims} do not match penalty dims {dims}")
        D = es.D
        self.D = D
        order = sorted(range(len(dims)), key=lambda j: -dims[j])
        # perm[k] = original index stored at permuted position k
        self.perm = np.arange(D).reshape(dims).transpose(order).ravel()
        self.iperm = np.empty(D, dtype=np.int64)
        self.iperm[self.perm] = np.arange(D)

        btb = sp.csr_matrix(design.btb)[self.perm][:, self.perm]
        comps = [
            _penalty_component(dims, j, m.matrix)[self.perm][:, self.perm]
            for j, m in enumerate(es.marginals)
        ]
        pattern = abs(btb) + sum(abs(c) for c in comps)
        pattern = sp.coo_matrix(pattern)
        self.bandwidth = int(np.max(np.abs(pattern.row - pattern.col))) if pattern.nnz else 0
        u = self.bandwidth
        self._btb = _to_banded_upper(btb, u)
        self._k = [_to_banded_upper(c, u) for c in comps]
        self._upper = None
        self.jitter_events = 0

    def assemble(self, sigma2: float, rho) -> np.ndarray:
        ab = self._btb / sigma2
        for j, k in enumerate(self._k):
            ab = ab + math.exp(-rho[j]) * k
        return ab

    def dense(self, sigma2: float, rho) -> np.ndarray:
        """Dense ``P`` in the original ordering (for tests and diagnostics)."""
        ab = self.assemble(sigma2, rho)
        u = self.bandwidth
        M = np.zeros((self.D, self.D))
        for k in range(u + 1):
            idx = np.arange(k, self.D)
            M[idx - k, idx] = ab[u - k, k:]
        M = M + np.triu(M, 1).T
        return M[np.ix_(self.iperm, self.iperm)]

    def factor(self, sigma2: float, rho) -> None:
        ab = self.assemble(sigma2, rho)
        u = self.bandwidth
        upper, info = lapack.dpbtrf(ab, lower=0)
        if info != 0:
            base = 1e-10 * float(np.mean(ab[u]))
            for attempt in range(4):
                jittered = ab.copy()
                jittered[u] += base * 10.0**attempt
                upper, info = lapack.dpbtrf(jittered, lower=0)
                if info == 0:
                    self.jitter_events += 1
                    break
            else:
                raise NumericalBreakdown(
                    "Cholesky factorization of the coefficient precision failed after jitter",
                    rho=np.asarray(rho).tolist(),
                    sigma2=float(sigma2),
                )
        self._upper = upper

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x, info = lapack.dpbtrs(self._upper, rhs[self.perm], lower=0)
        if info != 0:
            raise NumericalBreakdown(f"banded solve failed (info={info})")
        return x[self.iperm]

    def sample_noise(self, z: np.ndarray) -> np.ndarray:
        """``U^{-1} z`` with ``P = U^T U``; has covariance ``P^{-1}`` for standard normal ``z``."""
        x, info = lapack.dtbtrs(self._upper, z[:, None], uplo="U", trans="N")
        if info != 0:
            raise NumericalBreakdown(f"triangular solve failed (info={info})")
        return x[:, 0][self.iperm]


# --------------------------------------------------------------------------
# chain state


@dataclass(eq=False)
class ChainState:
    b: np.ndarray
    rho: np.ndarray
    sigma2: float
    qf: np.ndarray
    workspace: PrecisionWorkspace = field(repr=False)
    bty: np.ndarray = field(repr=False)  # B^T y on the standardized scale
    y: np.ndarray = field(repr=False)

    @classmethod
    def initial(cls, design, es, y, rho=None, sigma2=1.0, workspace=None):
        y = np.asarray(y, dtype=float)
        rho = np.zeros(es.p) if rho is None else np.array(rho, dtype=float)
        b = np.zeros(es.D)
        return cls(
            b=b,
            rho=rho,
            sigma2=float(sigma2),
            qf=quadratic_forms(es, b),
            workspace=workspace if workspace is not None else PrecisionWorkspace(design, es),
            bty=design.crossprod(y),
            y=y,
        )


def gibbs_b(state: ChainState, design: TensorDesign, es: PenaltyEigenstructure, rng) -> np.ndarray:
    """Exact draw from ``N(P^{-1} B^T y / sigma^2, P^{-1})``; also refreshes ``state.qf``."""
    ws = state.workspace
    ws.factor(state.sigma2, state.rho)
    mean = ws.solve(state.bty / state.sigma2)
    b = mean + ws.sample_noise(rng.standard_normal(es.D))
    state.b = b
    state.qf = quadratic_forms(es, b)
    return b


def conditional_mean_b(state: ChainState) -> np.ndarray:
    ws = state.workspace
    ws.factor(state.sigma2, state.rho)
    return ws.solve(state.bty / state.sigma2)


def draw_inverse_gamma(shape: float, scale: float, rng, size=None):
    return scale / rng.gamma(shape, size=size)


def gibbs_sigma2(state: ChainState, design: TensorDesign, y, rng) -> float:
    """One draw from ``IG(n / 2, ||y - B b||^2 / 2)``, floored at ``SIGMA2_FLOOR``."""
    y = np.asarray(y, dtype=float)
    resid = y - design.fitted(state.b)
    rss = float(resid @ resid)
    if not rss > 0:
        raise DegenerateFit("residual sum of squares is zero; sigma^2 conditional is improper")
    state.sigma2 = max(float(draw_inverse_gamma(0.5 * len(y), 0.5 * rss, rng)), SIGMA2_FLOOR)
    return state.sigma2


# --------------------------------------------------------------------------
# smoothing-variance updates


def modify_hessian(H, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Clamp every eigenvalue of symmetric ``H`` to at most ``-delta``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    w = np.minimum(w, -delta)
    return (V * w) @ V.T


@dataclass(frozen=True)
class TaylorProposal:
    """Gaussian ``N(rho - Ht^{-1} u, -Ht^{-1})`` built from a modified Hessian ``Ht``."""

    mean: np.ndarray
    chol: np.ndarray  # lower Cholesky factor of -Ht
    modified: bool

    @classmethod
    def build(cls, rho, u, H, delta):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        modified = w.max() > -delta
        neg_Ht = (V * -np.minimum(w, -delta)) @ V.T
        L = np.linalg.cholesky(neg_Ht)
        step = cho_solve((L, True), u, check_finite=False)
        return cls(mean=np.asarray(rho, dtype=float) + step, chol=L, modified=bool(modified))

    def sample(self, z) -> np.ndarray:
        return self.mean + solve_triangular(self.chol.T, z, lower=False, check_finite=False)

    def logpdf(self, x) -> float:
        v = self.chol.T @ (np.asarray(x) - self.mean)
        p = len(self.mean)
        return float(np.sum(np.log(np.diag(self.chol))) - 0.5 * p * math.log(2 * math.pi) - 0.5 * v @ v)


@dataclass
class MHResult:
    rho: np.ndarray
    accepted: bool
    log_alpha: float
    nonfinite: bool = False
    modified: bool = False


def taylored_mh_step(
    rho,
    log_target: Callable[[np.ndarray], float],
    grad_hess: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    delta: float,
    rng,
    z=None,
) -> MHResult:
    """Generic Taylored MH step on an arbitrary smooth log target.

    ``z`` overrides the standard-normal innovation (used by tests).
    """
    rho = np.asarray(rho, dtype=float)
    fwd = TaylorProposal.build(rho, *grad_hess(rho), delta)
    if z is None:
        z = rng.standard_normal(len(rho))
    prop = fwd.sample(z)
    u_unif = rng.uniform()

    lt_cur = log_target(rho)
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lt_prop = log_target(prop)
            rev = TaylorProposal.build(prop, *grad_hess(prop), delta)
            log_alpha = lt_prop - lt_cur + rev.logpdf(rho) - fwd.logpdf(prop)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        return MHResult(rho, False, -math.inf, nonfinite=True, modified=fwd.modified)
    if not np.isfinite(log_alpha):
        return MHResult(rho, False, -math.inf, nonfinite=True, modified=fwd.modified)
    accepted = math.log(u_unif) < min(0.0, log_alpha)
    return MHResult(prop if accepted else rho, accepted, min(0.0, log_alpha), modified=fwd.modified or rev.modified)


def _rho_target(state, es, prior):
    qf = state.qf
    return (
        lambda r: log_fcp_rho(es, r, qf, prior),
        lambda r: grad_hess_rho(es, r, qf, prior),
    )


def mh_rho(state: ChainState, es, prior, delta, rng, z=None) -> tuple[np.ndarray, bool]:
    """Taylored MH update of ``rho`` given the current coefficients."""
    res = mh_rho_detail(state, es, prior, delta, rng, z=z)
    return res.rho, res.accepted


def mh_rho_detail(state: ChainState, es, prior, delta, rng, z=None) -> MHResult:
    target, gh = _rho_target(state, es, prior)
    res = taylored_mh_step(state.rho, target, gh, delta, rng, z=z)
    if res.nonfinite:
        log.warning("non-finite log density at proposal; rejected")
    state.rho = np.array(res.rho)
    return res


def newton_step_rho(state: ChainState, es, prior, delta, max_halvings: int = 10) -> np.ndarray:
    """Newton-Raphson step with modified Hessian and step halving for monotone ascent."""
    target, gh = _rho_target(state, es, prior)
    rho = state.rho
    u, H = gh(rho)
    step = TaylorProposal.build(rho, u, H, delta).mean - rho
    f0 = target(rho)
    new = rho
    for _ in range(max_halvings + 1):
        cand = rho + step
        with np.errstate(over="ignore", invalid="ignore"):
            f1 = target(cand)
        if np.isfinite(f1) and f1 >= f0:
            new = cand
            break
        step = 0.5 * step
    state.rho = np.array(new)
    return state.rho


# --------------------------------------------------------------------------
# chain orchestration


@dataclass(eq=False)
class ChainOutput:
    """Retained draws (standardized response scale) and run bookkeeping."""

    b: np.ndarray
    rho: np.ndarray
    sigma2: np.ndarray
    y_mean: float
    y_sd: float
    config: SamplerConfig
    prior: dict
    accepted: int = 0
    mh_steps: int = 0
    nonfinite: int = 0
    hessian_modified: int = 0
    jitter_events: int = 0
    dims: tuple[int, ...] = ()
    timings: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.sigma2)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.mh_steps if self.mh_steps else float("nan")

    @property
    def tau2(self) -> np.ndarray:
        return np.exp(self.rho)

    def coefficients(self, original_scale: bool = True) -> np.ndarray:
        """Coefficient draws; on the original scale ``y_mean + y_sd * b`` (partition of unity)."""
        if not original_scale:
            return self.b
        return self.y_mean + self.y_sd * self.b

    def sigma2_original(self) -> np.ndarray:
        return self.y_sd**2 * self.sigma2

    def posterior_mean_fit(self, design: TensorDesign) -> np.ndarray:
        return design.fitted(self.coefficients().mean(axis=0))

    def same_draws(self, other: "ChainOutput") -> bool:
        return (
            np.array_equal(self.b, other.b)
            and np.array_equal(self.rho, other.rho)
            and np.array_equal(self.sigma2, other.sigma2)
            and self.accepted == other.accepted
        )

    # -- persistence ------------------------------------------------------

    def manifest(self) -> dict:
        return {
            "format": "bayestps-samples",
            "version": 1,
            "dims": list(self.dims),
            "n_samples": self.n_samples,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "prior": self.prior,
            "standardization": {"mean": self.y_mean, "sd": self.y_sd},
            "accepted": self.accepted,
            "mh_steps": self.mh_steps,
            "nonfinite": self.nonfinite,
            "hessian_modified": self.hessian_modified,
            "jitter_events": self.jitter_events,
            "files": {"b": "samples_b.npy", "rho": "samples_rho.npy", "sigma2": "samples_sigma2.npy"},
        }

    def save(self, directory, prefix: str = "") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        man = self.manifest()
        man["files"] = {k: prefix + v for k, v in man["files"].items()}
        np.save(directory / man["files"]["b"], self.b)
        np.save(directory / man["files"]["rho"], self.rho)
        np.save(directory / man["files"]["sigma2"], self.sigma2)
        path = directory / f"{prefix}manifest.json"
        path.write_text(json.dumps(man, indent=2, sort_keys=True))
        self.write_traces(directory / f"{prefix}traces.csv")
        return path

    def write_traces(self, path) -> None:
        start = self.config.burn_in
        iters = start + self.config.thin * np.arange(self.n_samples) + 1
        header = ["iteration", "sigma2"] + [f"rho_{j + 1}" for j in range(self.rho.shape[1])]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for t, s2, r in zip(iters, self.sigma2, self.rho):
                fh.write(",".join([str(int(t)), repr(float(s2))] + [repr(float(v)) for v in r]) + "\n")

    @classmethod
    def load(cls, manifest_path) -> "ChainOutput":
        manifest_path = Path(manifest_path)
        man = json.loads(manifest_path.read_text())
        cfg = dict(man["config"])
        if cfg.get("init_rho") is not None:
            cfg["init_rho"] = tuple(cfg["init_rho"])
        base = manifest_path.parent
        return cls(
            b=np.load(base / man["files"]["b"]),
            rho=np.load(base / man["files"]["rho"]),
            sigma2=np.load(base / man["files"]["sigma2"]),
            y_mean=man["standardization"]["mean"],
            y_sd=man["standardization"]["sd"],
            config=SamplerConfig(**cfg),
            prior=man["prior"],
            accepted=man["accepted"],
            mh_steps=man["mh_steps"],
            nonfinite=man.get("nonfinite", 0),
            hessian_modified=man.get("hessian_modified", 0),
            jitter_events=man.get("jitter_events", 0),
            dims=tuple(man["dims"]),
        )


def standardize(y) -> tuple[np.ndarray, float, float]:
    y = np.asarray(y, dtype=float)
    mean = float(np.mean(y))
    sd = float(np.std(y))
    if not sd > 0:
        sd = 1.0
    return (y - mean) / sd, mean, sd


def _prior_record(prior) -> dict:
    return {"name": prior.name, **prior.hyperparameters()}


def run_chain(
    design: TensorDesign,
    es: PenaltyEigenstructure,
    prior,
    config: SamplerConfig,
    y,
    rng=None,
    workspace: PrecisionWorkspace | None = None,
) -> ChainOutput:
    """Run one chain; fully deterministic given ``config.seed`` (or the supplied ``rng``)."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != design.n:
        raise ValidationError(f"response has length {len(y)}, design has {design.n} rows")
    if tuple(design.dims) != es.dims:
        raise ValidationError("design and penalty dimensions differ")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    ys, y_mean, y_sd = standardize(y)

    init_rho = None if config.init_rho is None else np.asarray(config.init_rho, dtype=float)
    if init_rho is not None and init_rho.shape != (es.p,):
        raise ValidationError(f"init_rho must have length {es.p}")
    state = ChainState.initial(design, es, ys, rho=init_rho, workspace=workspace)

    m = config.n_kept
    out_b = np.empty((m, es.D))
    out_rho = np.empty((m, es.p))
    out_s2 = np.empty(m)
    timings = {"b": 0.0, "sigma2": 0.0, "rho": 0.0}
    accepted = mh_steps = nonfinite = modified = 0
    keep = 0
    jitter0 = state.workspace.jitter_events

    for t in range(config.iterations):
        try:
            t0 = time.perf_counter()
            gibbs_b(state, design, es, rng)
            t1 = time.perf_counter()
            gibbs_sigma2(state, design, ys, rng)
            t2 = time.perf_counter()
            if t < config.newton_steps:
                newton_step_rho(state, es, prior, config.delta)
            else:
                res = mh_rho_detail(state, es, prior, config.delta, rng)
                mh_steps += 1
                accepted += res.accepted
                nonfinite += res.nonfinite
                modified += res.modified
            t3 = time.perf_counter()
        except NumericalBreakdown as exc:
            exc.iteration = t
            raise
        timings["b"] += t1 - t0
        timings["sigma2"] += t2 - t1
        timings["rho"] += t3 - t2

        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            out_b[keep] = state.b
            out_rho[keep] = state.rho
            out_s2[keep] = state.sigma2
            keep += 1

    timings["total"] = timings["b"] + timings["sigma2"] + timings["rho"]
    return ChainOutput(
        b=out_b,
        rho=out_rho,
        sigma2=out_s2,
        y_mean=y_mean,
        y_sd=y_sd,
        config=config,
        prior=_prior_record(prior),
        accepted=accepted,
        mh_steps=mh_steps,
        nonfinite=nonfinite,
        hessian_modified=modified,
        jitter_events=state.workspace.jitter_events - jitter0,
        dims=es.dims,
        timings=timings,
    )


def run_chains(design, es, prior, config: SamplerConfig, y, n_chains: int = 4, max_workers: int | None = None):
    """Independent chains with spawned RNG streams; results are in chain order."""
    seeds = np.random.SeedSequence(config.seed).spawn(n_chains)

    def one(seq):
        return run_chain(design, es, prior, config, y, rng=np.random.default_rng(seq))

    if max_workers == 1 or n_chains == 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, seeds))
