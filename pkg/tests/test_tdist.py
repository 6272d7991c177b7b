import numpy as np
import pytest
from scipy import stats as sps

from ymir.errors import ParameterError
from ymir.tdist import betainc, t_cdf, t_pdf, t_ppf


class TestBetainc:
    def test_against_scipy(self, rng):
        from scipy.special import betainc as sp_betainc

        for _ in range(300):
            a = rng.uniform(0.1, 50.0)
            b = rng.uniform(0.1, 50.0)
            x = rng.uniform(0.0, 1.0)
            assert betainc(a, b, x) == pytest.approx(sp_betainc(a, b, x), abs=1e-12)

    def test_bounds(self):
        assert betainc(2.0, 3.0, 0.0) == 0.0
        assert betainc(2.0, 3.0, 1.0) == 1.0


class TestStudentT:
    def test_cdf_against_scipy(self, rng):
        for _ in range(200):
            df = rng.uniform(1.0, 80.0)
            x = rng.normal(scale=4.0)
            assert t_cdf(x, df) == pytest.approx(sps.t.cdf(x, df), abs=1e-12)

    def test_pdf_against_scipy(self, rng):
        for _ in range(100):
            df = rng.uniform(1.0, 60.0)
            x = rng.normal(scale=3.0)
            assert t_pdf(x, df) == pytest.approx(sps.t.pdf(x, df), abs=1e-12)

    def test_ppf_absolute_accuracy(self, rng):
        # The ESD critical values use extreme upper-tail quantiles; require
        # 1e-8 absolute agreement there.
        for _ in range(200):
            df = float(rng.integers(1, 60))
            p = rng.uniform(0.5, 0.99995)
            assert t_ppf(p, df) == pytest.approx(sps.t.ppf(p, df), abs=1e-8)

    def test_ppf_symmetry(self):
        assert t_ppf(0.25, 7.0) == -t_ppf(0.75, 7.0)
        assert t_ppf(0.5, 7.0) == 0.0

    def test_ppf_roundtrip(self, rng):
        for _ in range(50):
            df = float(rng.integers(2, 40))
            p = rng.uniform(0.001, 0.999)
            assert t_cdf(t_ppf(p, df), df) == pytest.approx(p, abs=1e-10)

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            t_ppf(0.0, 5.0)
        with pytest.raises(ParameterError):
            t_ppf(0.5, -1.0)
        with pytest.raises(ParameterError):
            t_cdf(1.0, 0.0)
