import numpy as np
import pytest

from bayestps.errors import ValidationError
from bayestps.simulation import SimScenario, f1, f2, simulate, write_results_csv


class TestFunctions:
    def test_f1(self):
        np.testing.assert_allclose(f1([[0.0, 0.0], [0.6, 0.8]]), [0.0, 0.0], atol=1e-15)
        assert f1([[0.25, 0.0]])[0] == pytest.approx(1.0)

    def test_f2_roughest_along_first(self):
        x = np.full((1, 3), 0.5)
        grads = []
        for j in range(3):
            e = np.zeros((1, 3))
            e[0, j] = 1e-6
            grads.append(abs(f2(x + e)[0] - f2(x - e)[0]))
        assert grads[0] > grads[1] > grads[2]

    def test_f2_requires_p3(self):
        with pytest.raises(ValidationError):
            f2(np.zeros((2, 2)))


class TestScenario:
    def test_defaults(self):
        sc = SimScenario()
        assert sc.sigma == 0.5 and sc.iterations == 1200 and sc.burn_in == 200

    @pytest.mark.parametrize(
        "kwargs", [dict(function="f3"), dict(function="f2", p=2), dict(prior="x"), dict(sigma=-1), dict(n=0)]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SimScenario(**kwargs)


class TestSimulate:
    @pytest.mark.parametrize("n", [50, 2000])
    def test_noiseless_constant(self, n):
        res = simulate(SimScenario("zero", p=1, n=n, d=5, sigma=0.0, prior="wb"))
        assert res[0].mse < 1e-4

    def test_replicates_deterministic(self, tmp_path):
        sc = SimScenario("f1", p=2, n=400, replicates=2, prior="ig", iterations=80, burn_in=20, seed=3)
        a, b = simulate(sc), simulate(sc)
        assert [r.mse for r in a] == [r.mse for r in b]
        assert a[0].mse != a[1].mse
        write_results_csv(a, tmp_path / "r.csv", sc)
        header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
        assert "mse" in header and "tau2_median_2" in header and "function" in header
