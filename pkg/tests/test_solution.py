import math
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as G

from fracprop.contour import OrderPair, SpectralParams, build_contour
from fracprop.errors import ConfigError, EvalFailure
from fracprop.operators import GridFunction, diag_operator, fd_laplacian
from fracprop.propagator import CacheStore
from fracprop.solution import (
    SchemeParams,
    SingularityWarning,
    SourceTerm,
    homogeneous_solution,
    inhomogeneous_solution,
    mild_solution,
    rl_quadrature,
)

from oracles import ml

PI = math.pi
SP = SpectralParams(varphi_s=PI / 60)


def monomial_rl(p, alpha, t):
    return G(p + 1) / G(p + 1 + alpha) * t ** (p + alpha)


class TestRL:
    def test_constant(self):
        for alpha in (0.3, 1.0, 1.7):
            got = rl_quadrature(alpha, np.ones_like, 0.8, 128)
            assert got == pytest.approx(0.8**alpha / G(alpha + 1), rel=1e-10)

    @pytest.mark.parametrize("p", [1.0, 2.5])
    @pytest.mark.parametrize("alpha", [0.3, 1.5])
    def test_monomial_examples(self, p, alpha):
        for t in (0.1, 1.0, 2.0):
            got = rl_quadrature(alpha, lambda s: s**p, t, 128)
            assert got == pytest.approx(monomial_rl(p, alpha, t), rel=1e-10)

    def test_monomial_family(self):
        worst = 0.0
        for p in (0, 1, 2, 3):
            for alpha in (0.25, 0.5, 1.0, 1.5):
                for t in (0.1, 1.0):
                    ref = monomial_rl(p, alpha, t)
                    got = rl_quadrature(alpha, lambda s: s**p, t, 160)
                    worst = max(worst, abs(got - ref) / ref)
        assert worst <= 1e-9

    def test_zero_time(self):
        assert rl_quadrature(0.4, lambda s: s**-0.5, 0.0, 32) == 0.0

    def test_never_evaluates_zero(self):
        seen = []

        def g(s):
            seen.append(np.min(s))
            return s**-0.5

        got = rl_quadrature(0.6, g, 1.0, 160)
        assert min(seen) > 0
        assert got == pytest.approx(monomial_rl(-0.5, 0.6, 1.0), rel=1e-7)

    def test_vector_valued(self):
        ts = np.array([0.2, 1.0])
        got = rl_quadrature(0.5, lambda s: np.stack([s, s**2], -1), ts, 128)
        assert got.shape == (2, 2)
        assert got[1, 1] == pytest.approx(monomial_rl(2, 0.5, 1.0), rel=1e-10)
        assert got[0, 0] == pytest.approx(monomial_rl(1, 0.5, 0.2), rel=1e-10)

    def test_failures(self):
        def bad(s):
            raise ValueError("boom")

        with pytest.raises(EvalFailure):
            rl_quadrature(0.5, bad, 1.0, 16)
        with pytest.raises(ConfigError):
            rl_quadrature(2.0, np.ones_like, 1.0, 16)
        with pytest.raises(ConfigError):
            rl_quadrature(0.5, np.ones_like, -1.0, 16)

    @settings(max_examples=25, deadline=None)
    @given(alpha=st.floats(0.2, 1.9), t=st.floats(0.01, 3.0), a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linearity(self, alpha, t, a, b):
        f = lambda s: np.sin(s)
        g = lambda s: np.exp(-s)
        lhs = rl_quadrature(alpha, lambda s: a * f(s) + b * g(s), t, 64)
        rhs = a * rl_quadrature(alpha, f, t, 64) + b * rl_quadrature(alpha, g, t, 64)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


class TestCounters:
    def test_decimal_inputs_taken_exactly(self):
        c = SchemeParams(100).inhomogeneous_counters(OrderPair(0.5, 1.01))
        assert (c.N1, c.N4, c.N3) == (101, 101, 100)
        assert c.N0 == c.N2 == c.N5 == 202
        assert SchemeParams(100).homogeneous_counters(OrderPair(0.5, 1.01)).N2 == 101

    def test_counter_law(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            beta = round(float(rng.uniform(0.5, 1.99)), 2)
            alpha = round(float(rng.uniform(0.05, beta)), 2)
            chi = round(float(rng.uniform(0.1, 2.0)), 2)
            N = int(rng.integers(1, 400))
            b, a, x = (Fraction(str(v)) for v in (beta, alpha, chi))
            outer = -(-(b * x * N).numerator // (b * x * N).denominator)
            q = b * x * N / min(Fraction(1), a)
            inner = -(-q.numerator // q.denominator)
            c = SchemeParams(N, chi=chi).inhomogeneous_counters(OrderPair(alpha, beta))
            assert (c.N1, c.N4) == (outer, outer)
            assert c.N3 == N
            assert (c.N0, c.N2, c.N5) == (inner, inner, inner)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            SchemeParams(0)
        with pytest.raises(ConfigError):
            SchemeParams(10, kappa=0.0)
        with pytest.raises(ConfigError):
            SchemeParams(10, chi=-1.0)


def eigen_setup(alpha, beta=1.6, modes=(1, 4)):
    A = diag_operator(modes)
    op = OrderPair(alpha, beta)
    return A, op, build_contour(op, SP, "star")


class TestHomogeneous:
    def test_rejects_second_datum(self):
        A, op, c = eigen_setup(0.8)
        with pytest.raises(ConfigError, match="u1 must vanish"):
            homogeneous_solution(SchemeParams(16), c, None, A, op, [1.0, 0.0], [0.0, 1.0], 0.5)

    def test_eigenmode(self):
        A, op, c = eigen_setup(1.5)
        ts = np.linspace(0, 1, 5)
        u = homogeneous_solution(SchemeParams(128), c, None, A, op, [1.0, 0.0], [0.0, 1.0], ts)
        assert isinstance(u, GridFunction)
        # beta = 1.6 leaves omega_* ~ 0.29, so the scheme's own rate is the tolerance
        tol = 5 * math.exp(-math.sqrt(PI * c.omega * 1.6 * 128))
        for t, row in zip(ts, u.values):
            first = exact_first(PI**2, 1.5, t)
            second = t * ml(-16 * PI**2 * t**1.5, 1.5, 2.0).real
            assert abs(row[0] - first) <= tol
            assert abs(row[1] - second) <= tol

    def test_zero_data(self):
        A, op, c = eigen_setup(1.2)
        u = homogeneous_solution(SchemeParams(16), c, None, A, op, [0.0, 0.0], [0.0, 0.0], 0.3)
        assert np.array_equal(u.values, [0.0, 0.0])

    def test_shares_caches(self):
        A, op, c = eigen_setup(1.2)
        store = CacheStore()
        for alpha in (0.4, 0.9, 1.5):
            homogeneous_solution(SchemeParams(32), c, store, A, OrderPair(alpha, 1.6), [1.0, 0.0], None, 0.3)
        assert store.unique_resolvent_solves == 33


def exact_first(lam, alpha, t):
    return 1.0 if t == 0 else ml(-lam * t**alpha, alpha).real


def example_source():
    # f(t) = sin(pi x) + t sin(4 pi x) in the sine basis over modes (1, 4)
    return SourceTerm(np.array([1.0, 0.0]), lambda ts: np.stack([np.zeros_like(ts), np.ones_like(ts)], -1))


def example_reference(alpha, t):
    if t == 0:
        return np.zeros(2)
    first = (1 - ml(-PI**2 * t**alpha, alpha).real) / PI**2
    # convolution of s^alpha / Gamma(alpha + 1) with E(-16 pi^2 s^alpha)
    second = t ** (alpha + 1) * ml(-16 * PI**2 * t**alpha, alpha, alpha + 2).real
    return np.array([first, second])


def quad_bracket(alpha, t):
    """Adaptive mpmath quadrature of the bracket for alpha in {1/2, 1}."""
    mpmath.mp.dps = 30
    a = mpmath.mpf(alpha)
    lam = 16 * mpmath.pi**2

    def E(z):
        return mpmath.exp(z) if alpha == 1 else mpmath.exp(z * z) * mpmath.erfc(-z)

    def integrand(s):
        return E(-lam * (t - s) ** a) * s**a / mpmath.gamma(a + 1)

    return float(mpmath.quad(integrand, [0, t / 2, t]))


class TestInhomogeneous:
    def test_reference_closed_form_matches_quadrature(self):
        for alpha, t in ((0.5, 0.3), (0.5, 1.0), (1.0, 0.7)):
            assert example_reference(alpha, t)[1] == pytest.approx(quad_bracket(alpha, t), rel=1e-12, abs=1e-15)

    def test_zero_source(self):
        A, op, c = eigen_setup(0.5, 1.01)
        u = inhomogeneous_solution(SchemeParams(16), c, None, A, op, SourceTerm.zero(2), [0.0, 0.5, 1.0])
        assert np.array_equal(u.values, np.zeros((3, 2)))

    def test_example(self):
        A, op, c = eigen_setup(0.5, 1.01)
        ts = np.linspace(0, 1, 11)
        u = inhomogeneous_solution(SchemeParams(128), c, None, A, op, example_source(), ts)
        err = max(np.max(np.abs(row - example_reference(0.5, t))) for t, row in zip(ts, u.values))
        assert err <= 1e-10

    def test_zero_time(self):
        A, op, c = eigen_setup(0.3, 1.01)
        u = inhomogeneous_solution(SchemeParams(32), c, None, A, op, example_source(), 0.0)
        assert np.max(np.abs(u.values)) <= 1e-12

    def test_alpha_independent_rate(self):
        Ns = np.array([16, 32, 64])
        ts = np.linspace(0, 1, 6)
        slopes = []
        for alpha in (0.1, 0.5, 1.0):
            A, op, c = eigen_setup(alpha, 1.01)
            ref = np.array([example_reference(alpha, t) for t in ts])
            errs = []
            for N in Ns:
                u = inhomogeneous_solution(SchemeParams(int(N)), c, None, A, op, example_source(), ts)
                errs.append(np.max(np.abs(u.values - ref)))
            slopes.append(np.polyfit(np.sqrt(Ns), np.log(errs), 1)[0])
        assert max(slopes) - min(slopes) <= 0.15 * abs(max(slopes))

    def test_complex_source_linearity(self):
        A, op, c = eigen_setup(0.6, 1.01)
        ts = [0.4, 1.0]
        re = example_source()
        im = SourceTerm(np.array([0.0, 1.0]), lambda t: np.stack([np.ones_like(t), -np.ones_like(t)], -1))
        both = SourceTerm(re.f0 + 1j * im.f0, lambda t: re.fprime(t) + 1j * im.fprime(t))
        p = SchemeParams(24)
        u = inhomogeneous_solution(p, c, None, A, op, both, ts).values
        ur = inhomogeneous_solution(p, c, None, A, op, re, ts).values
        ui = inhomogeneous_solution(p, c, None, A, op, im, ts).values
        assert np.allclose(u, ur + 1j * ui, rtol=0, atol=1e-13)

    def test_singularity_declarations(self):
        with pytest.raises(ConfigError):
            SourceTerm(np.zeros(2), lambda t: 0 * t, s=1.0)
        A, op, c = eigen_setup(0.5, 1.01)
        src = SourceTerm(np.zeros(2), lambda t: np.zeros(np.shape(t) + (2,)), s=0.7)
        with pytest.warns(SingularityWarning):
            inhomogeneous_solution(SchemeParams(8), c, None, A, op, src, 0.5)
        ok = SourceTerm(np.zeros(2), lambda t: np.zeros(np.shape(t) + (2,)), s=0.5)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            inhomogeneous_solution(SchemeParams(8), c, None, A, op, ok, 0.5)

    def test_thread_invariance(self, monkeypatch):
        A, op, c = eigen_setup(0.5, 1.01)
        ts = np.linspace(0, 1, 5)
        serial = inhomogeneous_solution(SchemeParams(24), c, None, A, op, example_source(), ts).values
        monkeypatch.setenv("FRACPROP_THREADS", "3")
        threaded = inhomogeneous_solution(SchemeParams(24), c, None, A, op, example_source(), ts).values
        assert np.array_equal(serial, threaded)


def polynomial_problem(m, alpha):
    A = fd_laplacian(m)
    x = A.grid.nodes
    u0 = x**2 * (x - 1) * (x + 0.5)

    def fprime(ts):
        t = np.asarray(ts)[..., None]
        return 12 * x * t - 4 * t - 2 * x**2 * (x - 1) / G(2 - alpha) * t ** (1 - alpha)

    src = SourceTerm(1 + 3 * x - 12 * x**2, fprime)
    exact = lambda t: x**2 * (x - 1) * (x - t**2 + 0.5)
    return A, u0, src, exact


class TestMild:
    def test_reduces_to_parts(self):
        A, op, c = eigen_setup(0.5, 1.01)
        p, ts = SchemeParams(16), [0.0, 0.5]
        u0 = np.array([1.0, 0.3])
        hom = homogeneous_solution(p, c, None, A, op, u0, None, ts).values
        assert np.array_equal(mild_solution(p, c, A, op, ts, u0=u0).values, hom)
        inh = inhomogeneous_solution(p, c, None, A, op, example_source(), ts).values
        assert np.array_equal(mild_solution(p, c, A, op, ts, src=example_source()).values, inh)

    def test_polynomial_solution(self):
        alpha = 0.7
        A, u0, src, exact = polynomial_problem(100, alpha)
        op = OrderPair(alpha, 1.0)
        c = build_contour(op, A.spectral_hint, "star")
        ts = np.linspace(0, 1, 6)
        u = mild_solution(SchemeParams(64), c, A, op, ts, u0=u0, src=src).values
        err = max(np.max(np.abs(row - exact(t))) for t, row in zip(ts, u))
        # the three-point stencil misses x^4 by 2 dx^2, which sets the floor here
        assert err <= 5e-5
