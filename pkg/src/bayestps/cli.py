"""Command-line interface: ``fit``, ``simulate``, ``effects``, ``diagnose``, ``plotdata``.

Configuration for ``fit`` is an INI-style key-value file (section ``[fit]``);
any key can be overridden with ``--set key=value``.  Exit codes: 0 success,
1 validation error, 2 numerical breakdown.  ``BAYESTPS_THREADS`` bounds the
number of chains or replicates run concurrently.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics, effects
from .basis import build_design, make_marginal_basis
from .data import Rescaling, ingest_csv
from .errors import BayesTPSError, NumericalBreakdown, ValidationError
from .penalty import eigenstructure_for
from .priors import InverseGammaPrior, WeibullPrior, prior_scaling
from .sampler import ChainOutput, SamplerConfig, run_chain
from .simulation import SimScenario, simulate_replicate, write_results_csv

log = logging.getLogger("bayestps")

FIT_MANIFEST = "fit.json"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BAYESTPS_THREADS", "1")))
    except ValueError:
        return 1


def _split_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


@dataclass
class FitConfig:
    input: str = ""
    coordinates: list[str] = field(default_factory=list)
    response: str = "y"
    basis_dims: list[int] = field(default_factory=lambda: [10])
    prior: str = "weibull"
    weibull_rate: float | None = None
    ig_alpha: float = 0.001
    ig_beta: float = 0.001
    prior_scaling: bool = True
    scaling_target: float = 1.0
    iterations: int = 1200
    burn_in: int = 200
    thin: int = 1
    seed: int = 0
    chains: int = 1
    delta: float = 1.0 / np.pi
    newton_steps: int = 100
    output: str = "fit_output"
    effects: list[str] = field(default_factory=list)
    level: float = 0.95
    center_effects: bool = False

    _LISTS = {"coordinates": str, "basis_dims": int, "effects": str}

    @classmethod
    def from_mapping(cls, values: dict) -> "FitConfig":
        cfg = cls()
        known = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in known:
                raise ValidationError(f"unknown configuration key {key!r}")
            setattr(cfg, key, cfg._coerce(key, raw))
        cfg.validate()
        return cfg

    def _coerce(self, key, raw):
        if key in self._LISTS:
            return [self._LISTS[key](v) for v in _split_list(raw)]
        default = getattr(type(self)(), key)
        if isinstance(raw, str):
            raw = raw.strip()
            if key == "weibull_rate" and raw.lower() in ("", "none"):
                return None
        try:
            if isinstance(default, bool):
                return raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
            if isinstance(default, int):
                return int(raw)
            if isinstance(default, float) or key == "weibull_rate":
                return float(raw)
        except ValueError:
            raise ValidationError(f"invalid value {raw!r} for {key}") from None
        return raw

    @property
    def p(self) -> int:
        return len(self.coordinates)

    def dims(self) -> list[int]:
        if len(self.basis_dims) == 1:
            return self.basis_dims * self.p
        return list(self.basis_dims)

    def validate(self) -> None:
        if self.p < 1:
            raise ValidationError("at least one coordinate column is required")
        if len(self.basis_dims) not in (1, self.p):
            raise ValidationError(f"basis_dims must have 1 or {self.p} entries")
        if any(d < 4 for d in self.basis_dims):
            raise ValidationError("every basis dimension must be >= 4")
        if self.prior not in ("weibull", "inverse_gamma"):
            raise ValidationError("prior must be 'weibull' or 'inverse_gamma'")
        if self.chains < 1:
            raise ValidationError("chains must be >= 1")
        self.sampler_config()
        for e in self.effects:
            parse_effect(e, self.coordinates)

    def sampler_config(self, seed=None) -> SamplerConfig:
        return SamplerConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            delta=self.delta,
            newton_steps=self.newton_steps,
            seed=self.seed if seed is None else seed,
            thin=self.thin,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path: str | None, overrides: Sequence[str] = ()) -> FitConfig:
    values: dict = {}
    if path:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ValidationError(f"cannot read config file {path}")
        if "fit" not in parser:
            raise ValidationError(f"{path}: missing [fit] section")
        values.update(parser["fit"])
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[k] = v
    return FitConfig.from_mapping(values)


def parse_effect(spec: str, names: Sequence[str]) -> tuple[int, ...]:
    """``"time"`` or ``"2"`` (1-based) for a main effect; ``"lon*lat"`` for an interaction."""
    parts = [s.strip() for s in str(spec).split("*")]
    if len(parts) not in (1, 2):
        raise ValidationError(f"effect {spec!r}: only main effects and two-way interactions are supported")
    out = []
    for part in parts:
        if part in names:
            out.append(list(names).index(part))
        elif part.isdigit() and 1 <= int(part) <= len(names):
            out.append(int(part) - 1)
        else:
            raise ValidationError(f"effect {spec!r}: unknown coordinate {part!r} (p = {len(names)})")
    if len(out) == 2 and out[0] == out[1]:
        raise ValidationError(f"effect {spec!r}: interaction needs two distinct coordinates")
    return tuple(out)


def make_prior(cfg: FitConfig, design):
    if cfg.prior == "inverse_gamma":
        return InverseGammaPrior(cfg.ig_alpha, cfg.ig_beta), None
    if cfg.weibull_rate is not None:
        return WeibullPrior(cfg.weibull_rate), None
    if cfg.prior_scaling:
        lam = prior_scaling(design, cfg.scaling_target, seed=cfg.seed)
        return WeibullPrior(lam), lam
    return WeibullPrior(1.0), None


# --------------------------------------------------------------------------
# fit artifacts


@dataclass
class FitArtifacts:
    directory: Path
    manifest: dict
    chains: list[ChainOutput]
    rescaling: Rescaling

    @property
    def bases(self):
        return [make_marginal_basis(d) for d in self.manifest["dims"]]

    @property
    def names(self) -> list[str]:
        return list(self.rescaling.names)

    def pooled_coefficients(self) -> np.ndarray:
        return np.concatenate([c.coefficients() for c in self.chains], axis=0)

    @classmethod
    def load(cls, directory, expect_hash: str | None = None) -> "FitArtifacts":
        directory = Path(directory)
        path = directory / FIT_MANIFEST
        if not path.exists():
            raise ValidationError(f"{directory}: no {FIT_MANIFEST}; run 'fit' first")
        man = json.loads(path.read_text())
        if expect_hash is not None and man["config_hash"] != expect_hash:
            raise ValidationError(
                f"config drift: fit was produced with config {man['config_hash']}, current config is {expect_hash}"
            )
        chains = [ChainOutput.load(directory / m) for m in man["chain_manifests"]]
        return cls(directory, man, chains, Rescaling.from_dict(man["rescaling"]))


def run_fit(cfg: FitConfig) -> FitArtifacts:
    """Ingest, build, sample and write every artifact into ``cfg.output``."""
    cfg.validate()
    requested = [parse_effect(e, cfg.coordinates) for e in cfg.effects]
    X, y, resc = ingest_csv(cfg.input, cfg.coordinates, cfg.response)
    bases = [make_marginal_basis(d) for d in cfg.dims()]
    design = build_design(bases, X)
    es = eigenstructure_for(design.dims)
    prior, lam = make_prior(cfg, design)

    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)

    def one(k):
        seed = cfg.seed if cfg.chains == 1 else int(seeds[k].generate_state(1)[0])
        return run_chain(design, es, prior, cfg.sampler_config(seed), y)

    if cfg.chains == 1 or _threads() == 1:
        outputs = [one(k) for k in range(cfg.chains)]
    else:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            outputs = list(pool.map(one, range(cfg.chains)))

    chain_manifests = []
    for k, out in enumerate(outputs):
        prefix = "" if cfg.chains == 1 else f"chain{k + 1}_"
        chain_manifests.append(out.save(out_dir, prefix=prefix).name)

    manifest = {
        "format": "bayestps-fit",
        "version": 1,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "dims": list(design.dims),
        "n": design.n,
        "rescaling": resc.to_dict(),
        "dropped_rows": list(resc.dropped_rows),
        "prior": outputs[0].prior,
        "scaled_rate": lam,
        "chain_manifests": chain_manifests,
        "acceptance_rate": [o.acceptance_rate for o in outputs],
    }
    (out_dir / FIT_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    art = FitArtifacts(out_dir, manifest, outputs, resc)

    if art.chains[0].n_samples >= diagnostics.MIN_DRAWS:
        write_diagnostics(art)
    for idx in requested:
        write_effect(art, idx, cfg.level, cfg.center_effects)
    return art


def write_diagnostics(art: FitArtifacts, coefs: Sequence[int] = ()) -> list:
    traces = {"sigma2": [c.sigma2_original() for c in art.chains]}
    for j in range(len(art.names)):
        traces[f"rho_{j + 1}"] = [c.rho[:, j] for c in art.chains]
    for k in coefs:
        if not 1 <= k <= art.chains[0].b.shape[1]:
            raise ValidationError(f"coefficient index b_{k} out of range")
        traces[f"b_{k}"] = [c.coefficients()[:, k - 1] for c in art.chains]
    rows = diagnostics.summary_table(traces)
    diagnostics.write_table_csv(rows, art.directory / "diagnostics.csv")
    (art.directory / "diagnostics.txt").write_text(diagnostics.format_table(rows) + "\n")
    return rows


def write_effect(art: FitArtifacts, idx: tuple[int, ...], level=0.95, center=False, grid=None):
    bases = art.bases
    B = art.pooled_coefficients()
    if len(idx) == 1:
        res = effects.main_effect(B, idx[0], bases, grid=grid or 200, level=level, center=center)
    else:
        res = effects.interaction(B, idx[0], idx[1], bases, grid=grid or (60, 60), level=level, center=center)
    names = [art.names[i] for i in idx]
    transforms = [lambda u, i=i: art.rescaling.inverse_one(i, u) for i in idx]
    stem = art.directory / ("effect_" + "_x_".join(names))
    res.write(stem, names, transforms)
    return res


# --------------------------------------------------------------------------
# plot data


def emit_plotdata(art: FitArtifacts, slices: Sequence[str] = (), traces: Sequence[str] = (), grid: int = 100):
    """Slice curves/surfaces and trace CSVs on original coordinate and response scales.

    A slice is ``"name=value,name=value"`` fixing some coordinates in original
    units; one or two coordinates must remain free.
    """
    written = []
    names = art.names
    p = len(names)
    for spec in traces:
        written.append(_write_trace(art, spec))
    for n_slice, spec in enumerate(slices):
        fixed = {}
        for item in _split_list(spec):
            if "=" not in item:
                raise ValidationError(f"slice item {item!r} is not name=value")
            k, v = item.split("=", 1)
            j = parse_effect(k.strip(), names)[0]
            fixed[j] = float(v)
        free = [j for j in range(p) if j not in fixed]
        if not free:
            raise ValidationError(f"slice {spec!r} fixes every coordinate")
        if len(free) > 2:
            raise ValidationError(f"slice {spec!r} leaves {len(free)} free coordinates; at most 2 are supported")
        written.append(_write_slice(art, fixed, free, grid, n_slice))
    return written


def _write_trace(art: FitArtifacts, name: str) -> Path:
    p = len(art.names)
    name = name.strip()
    if name == "sigma2":
        series = [c.sigma2_original() for c in art.chains]
    elif name.startswith(("rho_", "tau2_")) and name.split("_", 1)[1].isdigit():
        j = int(name.split("_", 1)[1])
        if not 1 <= j <= p:
            raise ValidationError(f"unknown trace parameter {name!r}")
        series = [c.rho[:, j - 1] if name.startswith("rho") else c.tau2[:, j - 1] for c in art.chains]
    elif name.startswith("b_") and name[2:].isdigit():
        k = int(name[2:])
        if not 1 <= k <= art.chains[0].b.shape[1]:
            raise ValidationError(f"unknown trace parameter {name!r}")
        series = [c.coefficients()[:, k - 1] for c in art.chains]
    else:
        raise ValidationError(f"unknown trace parameter {name!r}")
    path = art.directory / f"trace_{name}.csv"
    cfg = art.chains[0].config
    with open(path, "w") as fh:
        fh.write("chain,iteration,value\n")
        for k, s in enumerate(series):
            iters = cfg.burn_in + cfg.thin * np.arange(len(s)) + 1
            for t, v in zip(iters, s):
                fh.write(f"{k + 1},{int(t)},{float(v)!r}\n")
    return path


def _write_slice(art: FitArtifacts, fixed: dict, free: list, grid: int, k: int) -> Path:
    bases = art.bases
    resc = art.rescaling
    unit_grids = [np.linspace(0, 1, grid) for _ in free]
    mesh = np.meshgrid(*unit_grids, indexing="ij")
    G = mesh[0].size
    X = np.empty((G, len(bases)))
    for j, val in fixed.items():
        u = float(resc.forward_one(j, val))
        if not 0 <= u <= 1:
            raise ValidationError(f"slice value {val} for {resc.names[j]!r} is outside the data range")
        X[:, j] = u
    for m, j in zip(mesh, free):
        X[:, j] = m.ravel()
    design = build_design(bases, X)
    vals = design.matrix @ art.pooled_coefficients().T  # (G, m)
    mean = vals.mean(axis=1)
    lo, hi = np.quantile(vals, [0.025, 0.975], axis=1, method="median_unbiased")
    tag = "_".join(f"{resc.names[j]}={v:g}" for j, v in fixed.items())
    path = art.directory / f"slice_{k + 1}_{tag}.csv"
    with open(path, "w") as fh:
        fh.write(",".join([resc.names[j] for j in free] + ["mean", "pointwise_lo", "pointwise_hi"]) + "\n")
        orig = [resc.inverse_one(j, X[:, j]) for j in free]
        for i in range(G):
            row = [o[i] for o in orig] + [mean[i], lo[i], hi[i]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayestps", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a tensor-product smooth to CSV data")
    f.add_argument("--config", help="INI file with a [fit] section")
    f.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    s = sub.add_parser("simulate", help="simulation study replicates")
    s.add_argument("--function", default="f1", choices=["f1", "f2", "zero"])
    s.add_argument("--p", type=int, default=2)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--d", type=int, default=5)
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prior", default="wb-ps", choices=["ig", "wb", "wb-ps"])
    s.add_argument("--iterations", type=int, default=1200)
    s.add_argument("--burn-in", type=int, default=200)
    s.add_argument("--out", default="simulation.csv")

    e = sub.add_parser("effects", help="main effects / interactions from a fit")
    e.add_argument("fit_dir")
    e.add_argument("--effect", action="append", required=True, help="'name', '2' or 'name1*name2'")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--center", action="store_true")
    e.add_argument("--config", help="check the fit against this config (drift detection)")

    d = sub.add_parser("diagnose", help="MCMC summaries and convergence diagnostics")
    d.add_argument("fit_dir")
    d.add_argument("--coef", type=int, action="append", default=[], help="also summarize b_k (1-based)")
    d.add_argument("--config")

    pl = sub.add_parser("plotdata", help="slice and trace data for plotting")
    pl.add_argument("fit_dir")
    pl.add_argument("--slice", action="append", default=[], help="e.g. 'longitude=-95,latitude=30'")
    pl.add_argument("--trace", action="append", default=[], help="sigma2, rho_j, tau2_j or b_k")
    pl.add_argument("--grid", type=int, default=100)
    pl.add_argument("--config")
    return ap


def _expect_hash(config_path):
    return load_config(config_path).hash() if config_path else None


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "fit":
            art = run_fit(load_config(args.config, args.set))
            print(f"wrote {art.directory}")
        elif args.command == "simulate":
            sc = SimScenario(
                function=args.function, p=args.p, n=args.n, d=args.d, sigma=args.sigma,
                replicates=args.replicates, seed=args.seed, prior=args.prior,
                iterations=args.iterations, burn_in=args.burn_in,
            )
            seqs = np.random.SeedSequence(sc.seed).spawn(sc.replicates)
            with ThreadPoolExecutor(max_workers=_threads()) as pool:
                results = list(pool.map(lambda rs: simulate_replicate(sc, rs[1], rs[0])[0], enumerate(seqs)))
            write_results_csv(results, args.out, sc)
            for r in results:
                print(f"replicate {r.replicate}: MSE {r.mse:.5f}  time {r.seconds:.1f}s  acceptance {r.acceptance:.2f}")
        elif args.command == "effects":
            art = FitArtifacts.load(args.fit_dir, _expect_hash(args.config))
            for spec in args.effect:
                write_effect(art, parse_effect(spec, art.names), args.level, args.center)
        elif args.command == "diagnose":
            art = FitArtifacts.load(args.fit_dir, _expect_hash(args.config))
            rows = write_diagnostics(art, args.coef)
            print(diagnostics.format_table(rows))
        elif args.command == "plotdata":
            art = FitArtifacts.load(args.fit_dir, _expect_hash(args.config))
            for path in emit_plotdata(art, args.slice, args.trace, args.grid):
                print(path)
    except NumericalBreakdown as exc:
        print(f"numerical breakdown: {exc} (iteration {exc.iteration}, {exc.context})", file=sys.stderr)
        return 2
    except (BayesTPSError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
