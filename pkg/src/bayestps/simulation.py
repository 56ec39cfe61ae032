"""Simulation harness: test functions, uniform random designs, MSE and runtime per replicate."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass

import numpy as np

from .basis import build_design, make_marginal_basis
from .errors import ValidationError
from .penalty import eigenstructure_for
from .priors import InverseGammaPrior, WeibullPrior, prior_scaling
from .sampler import SamplerConfig, run_chain


def f1(X) -> np.ndarray:
    """Isotropic ``sin(2 pi ||x||_2)``."""
    X = np.asarray(X, dtype=float)
    return np.sin(2 * np.pi * np.linalg.norm(X, axis=1))


def f2(X) -> np.ndarray:
    """Anisotropic ``sin(2 pi sqrt(3 x1^2 + x2^2 + x3^2 / 3))``; roughest along x1."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != 3:
        raise ValidationError("f2 is defined on [0, 1]^3")
    return np.sin(2 * np.pi * np.sqrt(3 * X[:, 0] ** 2 + X[:, 1] ** 2 + X[:, 2] ** 2 / 3))


def zero(X) -> np.ndarray:
    return np.zeros(np.asarray(X).shape[0])


TEST_FUNCTIONS = {"f1": f1, "f2": f2, "zero": zero}

# prior settings: inverse gamma, unit-rate Weibull, Weibull with prior scaling
PRIOR_SETTINGS = ("ig", "wb", "wb-ps")


@dataclass(frozen=True)
class SimScenario:
    function: str = "f1"
    p: int = 2
    n: int = 10_000
    d: int = 5
    sigma: float = 0.5
    replicates: int = 1
    seed: int = 0
    prior: str = "wb-ps"
    iterations: int = 1200
    burn_in: int = 200

    def __post_init__(self):
        if self.function not in TEST_FUNCTIONS:
            raise ValidationError(f"unknown test function {self.function!r}")
        if self.function == "f2" and self.p != 3:
            raise ValidationError("f2 requires p = 3")
        if self.prior not in PRIOR_SETTINGS:
            raise ValidationError(f"prior must be one of {PRIOR_SETTINGS}")
        if self.p < 1 or self.n < 1 or self.replicates < 1:
            raise ValidationError("p, n and replicates must be positive")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    mse: float
    seconds: float
    acceptance: float
    prior_rate: float
    rho_median: tuple[float, ...]
    tau2_median: tuple[float, ...]


def make_prior(setting: str, design):
    if setting == "ig":
        return InverseGammaPrior(0.001, 0.001)
    if setting == "wb":
        return WeibullPrior(1.0)
    return WeibullPrior(prior_scaling(design))


def simulate_replicate(scenario: SimScenario, seed_seq, replicate: int = 0):
    """One replicate: returns ``(ReplicateResult, ChainOutput, design, f_true)``."""
    data_seed, chain_seed = seed_seq.spawn(2)
    rng = np.random.default_rng(data_seed)
    X = rng.uniform(size=(scenario.n, scenario.p))
    f = TEST_FUNCTIONS[scenario.function](X)
    y = f + scenario.sigma * rng.standard_normal(scenario.n)

    t0 = time.perf_counter()
    bases = [make_marginal_basis(scenario.d) for _ in range(scenario.p)]
    design = build_design(bases, X)
    es = eigenstructure_for(design.dims)
    prior = make_prior(scenario.prior, design)
    cfg = SamplerConfig(
        iterations=scenario.iterations,
        burn_in=scenario.burn_in,
        seed=int(chain_seed.generate_state(1)[0]),
    )
    out = run_chain(design, es, prior, cfg, y)
    seconds = time.perf_counter() - t0

    fit = out.posterior_mean_fit(design)
    med = np.median(out.rho, axis=0)
    res = ReplicateResult(
        replicate=replicate,
        mse=float(np.mean((fit - f) ** 2)),
        seconds=seconds,
        acceptance=out.acceptance_rate,
        prior_rate=float(np.ravel(getattr(prior, "rate", np.nan))[0]),
        rho_median=tuple(float(v) for v in med),
        tau2_median=tuple(float(v) for v in np.exp(med)),
    )
    return res, out, design, f


def simulate(scenario: SimScenario) -> list[ReplicateResult]:
    seqs = np.random.SeedSequence(scenario.seed).spawn(scenario.replicates)
    return [simulate_replicate(scenario, s, r)[0] for r, s in enumerate(seqs)]


def write_results_csv(results, path, scenario: SimScenario | None = None) -> None:
    p = len(results[0].rho_median) if results else 0
    header = ["replicate", "mse", "seconds", "acceptance", "prior_rate"]
    header += [f"rho_median_{j + 1}" for j in range(p)] + [f"tau2_median_{j + 1}" for j in range(p)]
    extra = asdict(scenario) if scenario is not None else {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(extra) + header)
        for r in results:
            w.writerow(
                list(extra.values())
                + [r.replicate, r.mse, r.seconds, r.acceptance, r.prior_rate]
                + list(r.rho_median)
                + list(r.tau2_median)
            )
