import math

import numpy as np
import pytest
from scipy.optimize import fminbound

from fracprop.contour import SpectralParams
from fracprop.errors import BoundsViolation, NoConvergence
from fracprop.inverse import (
    FitReport,
    ForwardModel,
    Measurements,
    brent_minimize,
    fit_alpha,
    write_trace,
)
from fracprop.operators import diag_operator
from fracprop.problems import eigenmode_exact
from fracprop.propagator import CacheStore

TIMES = np.linspace(0, 1, 41)
PROBE = math.pi / 10
A = diag_operator([2, 4])
U0, U1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def measurements(alpha):
    return Measurements(TIMES, [PROBE], eigenmode_exact(alpha, TIMES, [PROBE], 2, 4))


def model(beta=1.6, u1=U1, **kw):
    choice = "star" if beta is not None else "opc"
    return ForwardModel(A, U0, u1, beta=beta, omega_choice=choice, **kw)


class TestFit:
    def test_recovers_alpha(self):
        report = fit_alpha(measurements(0.75), model(u1=None))
        assert abs(report.alpha_fit - 0.75) <= 1e-6
        assert report.n_resolvent_solves == 129
        assert report.n_model_evals > 5

    def test_solves_with_second_datum(self):
        report = fit_alpha(measurements(1.3), model())
        assert abs(report.alpha_fit - 1.3) <= 1e-6
        assert report.n_resolvent_solves <= 2 * 129

    def test_batch_shares_caches(self):
        store = CacheStore()
        for alpha in (0.3, 0.9, 1.4):
            report = fit_alpha(measurements(alpha), model(), store=store)
            assert abs(report.alpha_fit - alpha) <= 1e-5
        assert store.unique_resolvent_solves == 2 * 129
        assert report.n_resolvent_solves == 2 * 129

    def test_legacy_costs_more(self):
        sub = fit_alpha(measurements(0.6), model(u1=None))
        legacy = fit_alpha(measurements(0.6), model(beta=None, u1=None))
        assert abs(legacy.alpha_fit - 0.6) <= 1e-4
        assert legacy.n_resolvent_solves >= 10 * sub.n_resolvent_solves
        # every trial alpha moves the contour
        assert legacy.n_resolvent_solves == 129 * legacy.n_model_evals

    def test_monotone_trace(self):
        report = fit_alpha(measurements(1.1), model())
        residuals = [row.residual for row in report.trace]
        assert all(b <= a for a, b in zip(residuals, residuals[1:]))
        assert [row.iter for row in report.trace] == list(range(1, report.iterations + 1))

    def test_deterministic(self):
        a = fit_alpha(measurements(0.45), model())
        b = fit_alpha(measurements(0.45), model())
        assert a == b

    def test_iteration_cap(self):
        with pytest.raises(NoConvergence):
            fit_alpha(measurements(0.45), model(), maxiter=3)

    @pytest.mark.parametrize(
        "bounds,seed",
        [((0.0, 1.0), 0.5), ((0.5, 0.4), 0.45), ((0.1, 1.7), 0.85), ((0.1, 1.0), 1.2)],
    )
    def test_bounds(self, bounds, seed):
        with pytest.raises(BoundsViolation):
            fit_alpha(measurements(0.5), model(), bounds=bounds, alpha0=seed)

    def test_legacy_bound_uses_sector(self):
        m = model(beta=None, sp=SpectralParams(varphi_s=math.pi / 4))
        with pytest.raises(BoundsViolation):
            fit_alpha(measurements(0.5), m, bounds=(0.1, 1.6))

    def test_trace_csv(self, tmp_path):
        report = fit_alpha(measurements(0.8), model(u1=None))
        path = tmp_path / "trace.csv"
        write_trace(report, path)
        lines = path.read_bytes().split(b"\n")
        assert lines[0] == b"iter,alpha,residual,n_solves"
        assert len(lines) == len(report.trace) + 2 and lines[-1] == b""
        last = lines[-2].split(b",")
        assert float(last[1]) == report.trace[-1].alpha


class TestMeasurements:
    def test_unsorted(self):
        with pytest.raises(BoundsViolation):
            Measurements([0.0, 0.5, 0.2], [0.1], np.zeros(3))

    def test_negative(self):
        with pytest.raises(BoundsViolation):
            Measurements([-0.1, 0.5], [0.1], np.zeros(2))

    def test_shape(self):
        m = Measurements([0.0, 0.5], [0.1, 0.2], np.arange(4.0))
        assert m.data.shape == (2, 2)


class TestBrent:
    @pytest.mark.parametrize(
        "f,lo,hi,seed",
        [
            (lambda x: (x - 0.3) ** 2, 0.0, 1.0, 0.85),
            (lambda x: math.cos(3 * x) + 0.1 * x, 0.5, 2.0, 0.6),
            (lambda x: abs(x - 1.234567), 0.1, 1.6, 0.85),
            (lambda x: x, 0.1, 1.6, 0.85),
        ],
    )
    def test_matches_scipy(self, f, lo, hi, seed):
        x, fx, _ = brent_minimize(f, lo, hi, seed, xtol=1e-10)
        ref = fminbound(f, lo, hi, xtol=1e-10)
        assert x == pytest.approx(ref, abs=1e-8)
        assert fx == f(x)

    def test_report_type(self):
        assert isinstance(fit_alpha(measurements(0.9), model(u1=None)), FitReport)
