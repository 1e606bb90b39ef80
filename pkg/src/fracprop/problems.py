"""Benchmark problems with exact or reference solutions.

All problems live on (0, 1) with A = -d^2/dx^2 and Dirichlet conditions.

* eigenmode: u0 = sin(k0 pi x), u1 = sin(k1 pi x), f = 0;
* source: u0 = u1 = 0, f(t) = sin(pi x) + t sin(4 pi x);
* polynomial: exact solution x^2 (x - 1) (x - t^2 + 1/2);
* regularity: u0 = (x - x^2)^(2 delta) sin(k0 pi x), normalized in the sup norm.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as gamma_fn, rgamma

from .mlf import mittag_leffler
from .operators import FDLaplacian, SpectralBasis
from .solution import SourceTerm


def _ml_lowered(w: np.ndarray, g: float, s: float) -> np.ndarray:
    """E_{g,s}(w) for g <= 1 and any s >= 1.

    Parameters s >= 2 are brought back into [1, 2) with
    E_{g,s}(w) = (E_{g,s-g}(w) - 1/Gamma(s-g)) / w, or summed directly for |w| <= 1.
    """
    if s < 2:
        return mittag_leffler(w, g, s)
    out = np.empty(w.shape, dtype=complex)
    small = np.abs(w) <= 1
    if small.any():
        k = np.arange(_series_terms(g, s))
        coef = rgamma(g * k + s)
        out[small] = np.polynomial.polynomial.polyval(w[small], coef)
    if (~small).any():
        wl = w[~small]
        out[~small] = (_ml_lowered(wl, g, s - g) - rgamma(s - g)) / wl
    return out


def _series_terms(g: float, s: float) -> int:
    # 1/Gamma(g k + s) below 1e-17 ends the series for |w| <= 1
    k = 1
    while rgamma(g * k + s) > 1e-17 or k < 8:
        k += 1
    return k + 1


def ml_real(z, alpha: float, sigma: float = 1.0) -> np.ndarray:
    """E_{alpha,sigma}(z) for real z <= 0, alpha in (0, 2) and sigma >= 1.

    Orders above 1 use E_{a,s}(-x) = Re E_{a/2,s}(i sqrt(x)).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if alpha <= 1:
        return _ml_lowered(z.astype(complex), alpha, sigma).real
    return _ml_lowered(1j * np.sqrt(-z), alpha / 2, sigma).real


def eigenmode_exact(alpha: float, ts, xs, k0: int = 1, k1: int = 4) -> np.ndarray:
    """E(-pi^2 k0^2 t^a) sin(k0 pi x) + H(a - 1) t E_{a,2}(-pi^2 k1^2 t^a) sin(k1 pi x).

    Returns shape (len(ts), len(xs)).
    """
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ta = ts**alpha
    first = ml_real(-(math.pi * k0) ** 2 * ta, alpha)
    out = np.outer(first, np.sin(k0 * math.pi * xs))
    if alpha > 1:
        second = ts * ml_real(-(math.pi * k1) ** 2 * ta, alpha, 2.0)
        out += np.outer(second, np.sin(k1 * math.pi * xs))
    return out


def eigenmode_data(k0: int = 1, k1: int = 4) -> tuple[SpectralBasis, np.ndarray, np.ndarray]:
    """Sine basis over (k0, k1) with the coefficient vectors of u0 and u1."""
    if k0 == k1:
        raise ValueError("k0 and k1 must differ")
    return SpectralBasis((k0, k1)), np.array([1.0, 0.0]), np.array([0.0, 1.0])


def source_problem() -> SourceTerm:
    """f(t) = sin(pi x) + t sin(4 pi x) as coefficients over modes (1, 4)."""
    return SourceTerm(
        np.array([1.0, 0.0]),
        lambda ts: np.stack([np.zeros_like(ts), np.ones_like(ts)], axis=-1),
    )


def source_exact(alpha: float, ts) -> np.ndarray:
    """Coefficients over modes (1, 4) of the solution driven by :func:`source_problem`.

    The sin(4 pi x) coefficient is the convolution of s^a / Gamma(a + 1) with
    E_a(-16 pi^2 s^a), which equals t^(a + 1) E_{a, a + 2}(-16 pi^2 t^a).
    """
    ts = np.asarray(ts, dtype=float)
    ta = ts**alpha
    first = (1.0 - ml_real(-math.pi**2 * ta, alpha)) / math.pi**2
    second = ts ** (alpha + 1) * ml_real(-16 * math.pi**2 * ta, alpha, alpha + 2.0)
    return np.stack([first, second], axis=-1)


def polynomial_problem(A: FDLaplacian, alpha: float) -> tuple[np.ndarray, SourceTerm]:
    """u0 and the source for the exact solution x^2 (x - 1) (x - t^2 + 1/2)."""
    x = A.grid.nodes
    u0 = x**2 * (x - 1) * (x + 0.5)
    coef = -2.0 * x**2 * (x - 1) / gamma_fn(2.0 - alpha)

    def fprime(ts):
        t = np.asarray(ts, dtype=float)[..., None]
        return 12 * x * t - 4 * t + coef * t ** (1.0 - alpha)

    # f'(t) ~ t^(1 - alpha) is singular at 0 only for alpha > 1
    s = max(0.0, alpha - 1.0)
    return u0, SourceTerm(1 + 3 * x - 12 * x**2, fprime, s=s)


def polynomial_exact(ts, xs) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)[:, None]
    xs = np.asarray(xs, dtype=float)[None, :]
    return xs**2 * (xs - 1) * (xs - ts**2 + 0.5)


def regularity_initial(A: FDLaplacian, delta: float, k0: int = 3) -> np.ndarray:
    x = A.grid.nodes
    u0 = (x - x**2) ** (2 * delta) * np.sin(k0 * math.pi * x)
    return u0 / np.max(np.abs(u0))


def semidiscrete_exact(A: FDLaplacian, alpha: float, u0, ts) -> np.ndarray:
    """S(t) u0 for the discrete operator, through its sine eigenbasis."""
    coeff = A.to_eigenbasis(u0)
    lam = A.eigenvalues
    ts = np.asarray(ts, dtype=float)
    rows = []
    for t in ts:
        decay = np.ones_like(lam) if t == 0 else ml_real(-lam * t**alpha, alpha)
        rows.append(A.from_eigenbasis(coeff * decay))
    return np.array(rows)
