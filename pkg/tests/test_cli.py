import json

import numpy as np
import pytest

from bayestps.cli import FitArtifacts, FitConfig, emit_plotdata, load_config, main, parse_effect, run_fit
from bayestps.data import Rescaling, ingest_csv
from bayestps.errors import ValidationError


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    n = 80
    t = rng.uniform(0, 10, n)
    lon = rng.uniform(-95, -70, n)
    y = np.sin(t) + 0.02 * lon + 0.1 * rng.standard_normal(n)
    path = tmp_path / "data.csv"
    write_csv(path, ["time", "longitude", "temp"], zip(t, lon, y))
    return path


class TestIngest:
    def test_unit_column_identity(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, ["x", "y"], [(0, 1), (0.25, 2), (1, 3)])
        X, y, resc = ingest_csv(path, ["x"], "y")
        assert resc.mins == (0.0,) and resc.maxs == (1.0,)
        np.testing.assert_array_equal(X[:, 0], [0, 0.25, 1])
        np.testing.assert_array_equal(y, [1, 2, 3])

    def test_longitude_like(self, tmp_path):
        path = tmp_path / "a.csv"
        vals = [-95, -80, -70, -77.5]
        write_csv(path, ["lon", "y"], [(v, 0) for v in vals])
        X, _, resc = ingest_csv(path, ["lon"], "y")
        assert (resc.mins[0], resc.maxs[0]) == (-95.0, -70.0)
        assert X.min() == 0 and X.max() == 1
        np.testing.assert_allclose(resc.inverse(X)[:, 0], vals, atol=1e-12)

    def test_missing_rows_dropped(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("x,y\n0,1\n0.5,\nNA,3\n1,4\n")
        X, y, resc = ingest_csv(path, ["x"], "y")
        assert len(y) == 2
        assert resc.dropped_rows == (1, 2)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, ["x", "y"], [(0, 1), (1, 2)])
        with pytest.raises(ValidationError, match="missing columns"):
            ingest_csv(path, ["x", "z"], "y")

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("x,y\n0,1\nabc,2\n1,2\n")
        with pytest.raises(ValidationError, match="non-numeric"):
            ingest_csv(path, ["x"], "y")

    def test_constant_coordinate(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, ["x", "y"], [(2, 1), (2, 2)])
        with pytest.raises(ValidationError, match="distinct"):
            ingest_csv(path, ["x"], "y")

    def test_rescaling_dict_round_trip(self):
        r = Rescaling(("a", "b"), (0.0, -1.0), (2.0, 1.0))
        assert Rescaling.from_dict(r.to_dict()) == r


class TestConfig:
    def test_ini_and_overrides(self, tmp_path, data_csv):
        ini = tmp_path / "fit.ini"
        ini.write_text(f"[fit]\ninput = {data_csv}\ncoordinates = time, longitude\nresponse = temp\nbasis_dims = 6, 5\n")
        cfg = load_config(ini, ["iterations=300", "prior=inverse_gamma"])
        assert cfg.coordinates == ["time", "longitude"] and cfg.dims() == [6, 5]
        assert cfg.iterations == 300 and cfg.prior == "inverse_gamma"

    def test_defaults_follow_best_setting(self):
        cfg = FitConfig(coordinates=["a", "b"])
        assert cfg.dims() == [10, 10] and cfg.prior == "weibull" and cfg.prior_scaling

    @pytest.mark.parametrize(
        "override",
        ["basis_dims=3", "prior=cauchy", "unknown_key=1", "burn_in=5000", "effects=4", "iterations=ten"],
    )
    def test_invalid(self, override):
        with pytest.raises(ValidationError):
            load_config(None, ["coordinates=a,b", override])

    def test_hash_ignores_output(self):
        a = FitConfig.from_mapping({"coordinates": "a", "output": "x"})
        b = FitConfig.from_mapping({"coordinates": "a", "output": "y"})
        c = FitConfig.from_mapping({"coordinates": "a", "seed": "3"})
        assert a.hash() == b.hash() != c.hash()

    def test_parse_effect(self):
        names = ["time", "lon", "lat"]
        assert parse_effect("lon", names) == (1,)
        assert parse_effect("3", names) == (2,)
        assert parse_effect("lat*time", names) == (2, 0)
        for bad in ("4", "0", "depth", "lon*lon", "a*b*c"):
            with pytest.raises(ValidationError):
                parse_effect(bad, names)


@pytest.fixture
def fitted(tmp_path, data_csv):
    cfg = FitConfig.from_mapping(
        dict(
            input=str(data_csv),
            coordinates="time,longitude",
            response="temp",
            basis_dims="5",
            iterations="200",
            burn_in="50",
            newton_steps="20",
            output=str(tmp_path / "out"),
            effects="time,longitude*time",
            seed="4",
        )
    )
    return cfg, run_fit(cfg)


class TestFit:
    def test_outputs(self, fitted):
        cfg, art = fitted
        out = art.directory
        expected = [
            "fit.json", "manifest.json", "samples_b.npy", "samples_rho.npy", "samples_sigma2.npy",
            "traces.csv", "diagnostics.csv", "diagnostics.txt", "effect_time.csv", "effect_time.json",
            "effect_longitude_x_time.csv",
        ]
        for name in expected:
            assert (out / name).exists(), name
        man = json.loads((out / "fit.json").read_text())
        assert man["config_hash"] == cfg.hash()
        assert man["dims"] == [5, 5] and man["n"] == 80
        assert set(man["rescaling"]) == {"names", "mins", "maxs"}
        chain = json.loads((out / "manifest.json").read_text())
        assert chain["n_samples"] == 150 and chain["format"] == "bayestps-samples"

    def test_effect_grid_original_units(self, fitted):
        _, art = fitted
        lines = (art.directory / "effect_time.csv").read_text().splitlines()
        first, last = float(lines[1].split(",")[0]), float(lines[-1].split(",")[0])
        assert first == pytest.approx(art.rescaling.mins[0]) and last == pytest.approx(art.rescaling.maxs[0])

    def test_rerun_identical(self, fitted, tmp_path):
        cfg, art = fitted
        cfg.output = str(tmp_path / "again")
        again = run_fit(cfg)
        for name in ("samples_b.npy", "samples_rho.npy", "samples_sigma2.npy"):
            assert (art.directory / name).read_bytes() == (again.directory / name).read_bytes()

    def test_bad_effect_before_sampling(self, tmp_path, data_csv):
        out = tmp_path / "never"
        with pytest.raises(ValidationError):
            load_config(None, [f"input={data_csv}", "coordinates=time,longitude", "response=temp",
                               "effects=3", f"output={out}"])
        assert not out.exists()

    def test_drift_detection(self, fitted):
        cfg, art = fitted
        FitArtifacts.load(art.directory, cfg.hash())
        with pytest.raises(ValidationError, match="drift"):
            FitArtifacts.load(art.directory, "0" * 16)


class TestPlotData:
    def test_slice_and_traces(self, fitted):
        _, art = fitted
        paths = emit_plotdata(art, slices=["longitude=-80"], traces=["sigma2", "rho_2", "tau2_1", "b_3"], grid=25)
        assert len(paths) == 5
        trace = (art.directory / "trace_sigma2.csv").read_text().splitlines()
        assert trace[0] == "chain,iteration,value" and len(trace) == 151
        sl = [p for p in paths if p.name.startswith("slice")][0].read_text().splitlines()
        assert sl[0] == "time,mean,pointwise_lo,pointwise_hi" and len(sl) == 26
        assert float(sl[-1].split(",")[0]) == pytest.approx(art.rescaling.maxs[0])

    @pytest.mark.parametrize("trace", ["foo", "rho_3", "b_0", "tau2_x"])
    def test_unknown_trace(self, fitted, trace):
        with pytest.raises(ValidationError):
            emit_plotdata(fitted[1], traces=[trace])

    def test_slice_fixing_everything(self, fitted):
        with pytest.raises(ValidationError, match="every coordinate"):
            emit_plotdata(fitted[1], slices=["time=5,longitude=-80"])

    def test_zero_fit_emits_mean(self, fitted):
        _, art = fitted
        for c in art.chains:
            c.b[:] = 0.0
        emit_plotdata(art, slices=["time=5"], grid=10)
        rows = [l.split(",") for l in (art.directory / "slice_1_time=5.csv").read_text().splitlines()[1:]]
        np.testing.assert_allclose([float(r[1]) for r in rows], art.chains[0].y_mean, rtol=1e-12)


class TestMain:
    def test_exit_codes(self, tmp_path, data_csv, capsys):
        ini = tmp_path / "fit.ini"
        out = tmp_path / "o"
        ini.write_text(
            f"[fit]\ninput={data_csv}\ncoordinates=time\nresponse=temp\nbasis_dims=5\n"
            f"iterations=150\nburn_in=20\nnewton_steps=10\noutput={out}\n"
        )
        assert main(["fit", "--config", str(ini)]) == 0
        assert main(["diagnose", str(out), "--config", str(ini)]) == 0
        assert "sigma2" in capsys.readouterr().out
        assert main(["effects", str(out), "--effect", "time", "--center"]) == 0
        assert main(["plotdata", str(out), "--trace", "nope"]) == 1
        assert main(["fit", "--config", str(ini), "--set", "basis_dims=2"]) == 1
        assert main(["diagnose", str(tmp_path / "missing")]) == 1

    def test_numerical_breakdown_exit_code(self, tmp_path, monkeypatch, data_csv):
        from bayestps import cli
        from bayestps.errors import NumericalBreakdown

        def boom(cfg):
            raise NumericalBreakdown("factorization failed", iteration=3, sigma2=1.0)

        monkeypatch.setattr(cli, "run_fit", boom)
        assert main(["fit", "--set", "coordinates=time"]) == 2

    def test_simulate(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BAYESTPS_THREADS", "2")
        out = tmp_path / "sim.csv"
        code = main(["simulate", "--function", "f1", "--p", "2", "--n", "300", "--replicates", "2",
                     "--iterations", "60", "--burn-in", "10", "--prior", "wb", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3 and "mse" in lines[0]
