r"""Two-parameter Mittag-Leffler function.

.. math::

    E_{\gamma,\sigma}(z) = \sum_{k=0}^\infty \frac{z^k}{\Gamma(\gamma k + \sigma)},
    \qquad 0 < \gamma \le 1, \quad 1 \le \sigma < 2.

Evaluation switches between three regimes by :math:`|z|`:

* ``|z| <= 1``: Taylor series summed by Horner's rule with a remainder-controlled
  number of terms;
* ``|z| >= r(gamma, sigma)``: exponentially weighted asymptotic expansion,
  truncated where its terms reach the double precision floor;
* otherwise: inversion of the Laplace transform
  :math:`s^{\gamma-\sigma}/(s^\gamma - z)` on an optimal parabolic contour,
  with the pole of the transform (when it lies right of the contour)
  added as a residue.

Every routine works on whole arrays; the scalar entry points are thin wrappers
so that a batch is elementwise identical to a loop of scalar calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import rgamma

from . import _parallel
from .errors import EvalFailure, InvalidOrder

EPS = float(np.finfo(float).eps)
LOG_EPS = math.log(EPS)
EPS_LD = float(np.finfo(np.longdouble).eps)

TAYLOR_RADIUS = 1.0
CUT_GUARD = 1e-8

# parabolic contour inversion
_LOG_TOL = math.log(1e-15)
_MAX_NODES = 200
_ROW_BLOCK = 2_000_000

# asymptotic expansion
_ASYM_TERMS = 120
_ASYM_FLOOR = 1e-16
_STOKES_EXPONENT = 50.0

_PARALLEL_MIN = 4096

_PI_LD = np.longdouble("3.14159265358979323846264338327950288")


@dataclass(frozen=True)
class MlParams:
    gamma: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        g, s = self.gamma, self.sigma
        if not (math.isfinite(g) and 0.0 < g <= 1.0):
            raise InvalidOrder(f"gamma must lie in (0, 1], got {g!r}")
        if not (math.isfinite(s) and 1.0 <= s < 2.0):
            raise InvalidOrder(f"sigma must lie in [1, 2), got {s!r}")


@dataclass(frozen=True)
class MlValue:
    value: complex
    est_abs_err: float


# {{{ regime constants


@lru_cache(maxsize=256)
def _taylor_coefficients(g: float, s: float) -> np.ndarray:
    """1/Gamma(g k + s) up to the first index whose tail is below 1e-18."""
    k = 0
    coeffs = []
    while True:
        c = float(rgamma(g * k + s))
        coeffs.append(c)
        # Gamma is increasing past 1.4616, so terms only shrink from there on
        if g * k + s > 1.5 and abs(c) < 1e-20:
            break
        k += 1
    return np.array(coeffs)


@lru_cache(maxsize=256)
def _asymptotic_setup(g: float, s: float) -> tuple[float, np.ndarray, float]:
    """Return (radius, coefficients, envelope of the first omitted term).

    The coefficients are 1/Gamma(s - g k), k = 1..K.  The radius is the
    smallest |z| at which the first omitted term drops below the floor and
    the Stokes switching of the exponential part is invisible.
    """
    k = np.arange(1, _ASYM_TERMS + 1)
    x = s - g * k
    coeffs = rgamma(x)
    # |1/Gamma(x)| <= Gamma(1 - x)/pi for x < 1, which has no zeros
    env = np.where(x < 1.0, np.abs(gamma_fn(1.0 - x)) / np.pi, np.abs(coeffs))
    r_min = max(1.0 + 1e-12, _STOKES_EXPONENT**g)
    for j in range(0, 400):
        r = r_min * 2.0 ** (j / 8)
        mags = env * r ** (-k.astype(float))
        kmin = int(np.argmin(mags))
        if mags[kmin] <= _ASYM_FLOOR:
            return r, np.ascontiguousarray(coeffs[:kmin]), float(env[kmin]) if kmin < len(env) else 0.0
    raise RuntimeError(f"no asymptotic radius found for gamma={g}, sigma={s}")


def asymptotic_radius(g: float, s: float = 1.0) -> float:
    """Modulus above which the asymptotic expansion is used."""
    return _asymptotic_setup(float(g), float(s))[0]


# }}}


# {{{ exponential part


def _exp_part(z: np.ndarray, g: float, s: float, sheet=0.0) -> np.ndarray:
    """(1/g) w^(1-s) exp(w) with w = z^(1/g) taken on the given sheet of log z.

    |w| may be in the thousands, where a rounding error in w is amplified by
    |w| in the result; the exponent is therefore formed in extended precision.
    """
    lz = np.log(z.astype(np.clongdouble)) + 2j * _PI_LD * np.asarray(sheet, dtype=np.longdouble)
    lz = lz / np.longdouble(g)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        part = np.exp(np.exp(lz) + np.longdouble(1.0 - s) * lz) / np.longdouble(g)
        return part.astype(complex)


# }}}


# {{{ Taylor regime


def _taylor(z: np.ndarray, g: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    c = _taylor_coefficients(g, s)
    az = np.abs(z)
    acc = np.full(z.shape, c[-1], dtype=complex)
    mag = np.full(z.shape, abs(c[-1]))
    for ck in c[-2::-1]:
        acc = acc * z + ck
        mag = mag * az + abs(ck)
    k = len(c)
    tail = abs(float(rgamma(g * k + s))) * az**k * 2.0
    return acc, tail + 4.0 * EPS * mag


# }}}


# {{{ asymptotic regime


def _asymptotic(z: np.ndarray, g: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    _, coeffs, env_next = _asymptotic_setup(g, s)
    w = 1.0 / z
    total = np.zeros(z.shape, dtype=complex)
    mag = np.zeros(z.shape)
    wk = np.ones(z.shape, dtype=complex)
    for ck in coeffs:
        wk = wk * w
        term = ck * wk
        total = total - term
        mag = mag + np.abs(term)
    err = env_next * np.abs(w) ** (len(coeffs) + 1)

    logz = np.log(z)
    inside = np.abs(logz.imag) < np.pi * g
    if inside.any():
        part = _exp_part(z[inside], g, s)
        with np.errstate(over="ignore", invalid="ignore"):
            total[inside] += part
            mag[inside] += np.abs(part)
    # the Stokes smoothing of the exponential part is below exp(-|z|^(1/g))
    with np.errstate(over="ignore"):
        err = err + np.exp(-(np.abs(z) ** (1.0 / g)))
    return total, err + 4.0 * EPS * mag


# }}}


# {{{ optimal parabolic contour regime


def _rb_params(phi_j, phi_j1, pj: float, qj: float, log_tol):
    """Contour parameters for the region between two singularities (t = 1)."""
    fac = 1.01
    f_max = np.exp(log_tol - LOG_EPS)
    sq_j = np.sqrt(phi_j)
    threshold = 2.0 * np.sqrt(log_tol - LOG_EPS)
    sq_j1 = np.minimum(np.sqrt(phi_j1), threshold - sq_j)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if pj < 1e-14 and qj < 1e-14:
            sqb_j, sqb_j1 = sq_j, sq_j1
            f_bar = np.ones_like(sq_j)
            adm = np.ones(sq_j.shape, dtype=bool)
        elif pj < 1e-14:
            sqb_j = sq_j
            f_min = np.where(sq_j > 0, fac * (sq_j / (sq_j1 - sq_j)) ** qj, fac)
            adm = f_min < f_max
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fq = f_bar ** (-1.0 / qj)
            sqb_j1 = (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq)
        elif qj < 1e-14:
            sqb_j1 = sq_j1
            f_min = fac * (sq_j1 / (sq_j1 - sq_j)) ** pj
            adm = f_min < f_max
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            sqb_j = (2.0 * sq_j + fp * sq_j1) / (2.0 - fp)
        else:
            f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j) ** max(pj, qj)
            adm = f_min < f_max
            f_min = np.maximum(f_min, 1.5)
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            fq = f_bar ** (-1.0 / qj)
            w = -phi_j1 / log_tol
            den = 2.0 + w - (1.0 + w) * fp + fq
            sqb_j = ((2.0 + w + fq) * sq_j + fp * sq_j1) / den
            sqb_j1 = (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den

        le = log_tol - np.log(f_bar)
        w = -(sqb_j1**2) / le
        mu = (((1.0 + w) * sqb_j + sqb_j1) / (2.0 + w)) ** 2
        h = -2.0 * np.pi / le * (sqb_j1 - sqb_j) / ((1.0 + w) * sqb_j + sqb_j1)
        n = np.ceil(np.sqrt(1.0 - le / mu) / h)
    ok = adm & np.isfinite(n) & (h > 0) & (mu > 0)
    return np.where(ok, mu, 0.0), np.where(ok, h, 0.0), np.where(ok, n, np.inf)


def _ru_params(phi_j, pj: float, log_tol):
    """Contour parameters for the unbounded region right of a singularity."""
    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    sq_s = np.sqrt(phi_j)
    phibar = np.where(phi_j > 0, phi_j * 1.01, 0.01)
    sqb = np.sqrt(phibar)

    n = np.zeros_like(phi_j)
    big_a = np.zeros_like(phi_j)
    sq_mu = np.zeros_like(phi_j)
    active = np.ones(phi_j.shape, dtype=bool)
    for _ in range(200):
        lept = log_tol / phibar
        n_new = np.ceil(phibar / np.pi * (1.0 - 1.5 * lept + np.sqrt(1.0 - 2.0 * lept)))
        a_new = np.pi * n_new / phibar
        mu_new = sqb * np.abs(4.0 - a_new) / np.abs(7.0 - np.sqrt(1.0 + 12.0 * a_new))
        n = np.where(active, n_new, n)
        big_a = np.where(active, a_new, big_a)
        sq_mu = np.where(active, mu_new, sq_mu)
        if pj < 1e-14:
            active[:] = False
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            fbar = ((sqb - sq_s) / sq_mu) ** (-pj)
        active &= ~((f_min < fbar) & (fbar < f_max))
        if not active.any():
            break
        sqb = np.where(active, f_tar ** (-1.0 / pj) * sq_mu + sq_s, sqb)
        phibar = sqb**2

    mu = sq_mu**2
    h = (-3.0 * big_a - 2.0 + 2.0 * np.sqrt(1.0 + 12.0 * big_a)) / (4.0 - big_a) / n

    # keep round-off under control for contours reaching far to the right
    threshold = log_tol - LOG_EPS
    over = mu > threshold
    if over.any():
        q = 0.0 if abs(pj) < 1e-14 else f_tar ** (-1.0 / pj)
        phibar2 = (q * np.sqrt(mu) + sq_s) ** 2
        fits = phibar2 < threshold
        w = np.sqrt(LOG_EPS / (LOG_EPS - log_tol))
        u = np.sqrt(-phibar2 / LOG_EPS)
        with np.errstate(divide="ignore", invalid="ignore"):
            n2 = np.ceil(w * log_tol / (2.0 * np.pi * (u * w - 1.0)))
            h2 = w / n2
        mu = np.where(over, np.where(fits, threshold, 0.0), mu)
        n = np.where(over, np.where(fits, n2, np.inf), n)
        h = np.where(over, np.where(fits, h2, 0.0), h)
    n = np.where(active | ~np.isfinite(h) | (h <= 0), np.inf, n)
    return mu, h, n


def _opc(z: np.ndarray, g: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    theta = np.angle(z)
    absz = np.abs(z)

    # at most one pole of s^(g-s)/(s^g - z) sits on the principal sheet
    kmin = np.ceil(-g / 2.0 - theta / (2.0 * np.pi))
    kmax = np.floor(g / 2.0 - theta / (2.0 * np.pi))
    pole = np.zeros(z.shape, dtype=complex)
    sheet = np.zeros(z.shape)
    phi1 = np.zeros(z.shape)
    has_pole = np.zeros(z.shape, dtype=bool)
    for shift in (0.0, 1.0):
        k = kmin + shift
        cand = absz ** (1.0 / g) * np.exp(1j * (theta + 2.0 * np.pi * k) / g)
        phic = (cand.real + np.abs(cand)) / 2.0
        valid = (k <= kmax) & (phic > 1e-15) & ~has_pole
        pole = np.where(valid, cand, pole)
        sheet = np.where(valid, k, sheet)
        phi1 = np.where(valid, phic, phi1)
        has_pole |= valid

    p0 = max(0.0, -2.0 * (g - s + 1.0))
    log_tol = np.full(z.shape, _LOG_TOL)
    mu = np.zeros(z.shape)
    h = np.zeros(z.shape)
    nn = np.zeros(z.shape, dtype=np.int64)
    use_res = np.zeros(z.shape, dtype=bool)
    pending = np.ones(z.shape, dtype=bool)
    while pending.any():
        idx = np.flatnonzero(pending)
        lt = log_tol[idx]
        hp = has_pole[idx]
        ph = phi1[idx]
        zero = np.zeros(len(idx))

        mu_a, h_a, n_a = _ru_params(zero, p0, lt)
        mu_b, h_b, n_b = _rb_params(zero, np.where(hp, ph, 1.0), p0, 1.0, lt)
        mu_c, h_c, n_c = _ru_params(ph, 1.0, lt)
        n_c = np.where(ph < lt - LOG_EPS, n_c, np.inf)

        # without a pole only the region right of the origin exists
        mu1 = np.where(hp, mu_b, mu_a)
        h1 = np.where(hp, h_b, h_a)
        n1 = np.where(hp, n_b, n_a)
        n2 = np.where(hp, n_c, np.inf)
        second = n2 < n1
        nsel = np.where(second, n2, n1)

        done = nsel <= _MAX_NODES
        d = idx[done]
        mu[d] = np.where(second, mu_c, mu1)[done]
        h[d] = np.where(second, h_c, h1)[done]
        nn[d] = nsel[done].astype(np.int64)
        use_res[d] = hp[done] & ~second[done]
        pending[d] = False

        log_tol[idx[~done]] += math.log(10.0)
        if pending.any() and log_tol[pending].max() > math.log(1e-2):
            raise EvalFailure("parabolic contour parameters could not be found")

    total = np.zeros(z.shape, dtype=complex)
    absum = np.zeros(z.shape)
    for n_nodes in np.unique(nn):
        rows = np.flatnonzero(nn == n_nodes)
        k = np.arange(-n_nodes, n_nodes + 1, dtype=float)
        block = max(1, _ROW_BLOCK // (2 * n_nodes + 1))
        for lo in range(0, len(rows), block):
            r = rows[lo : lo + block]
            u = h[r, None] * k[None, :]
            m = mu[r, None]
            zc = m * (1j * u + 1.0) ** 2
            zd = 2.0 * m * (1j - u)
            lz = np.log(zc)
            f = np.exp((g - s) * lz) / (np.exp(g * lz) - z[r, None]) * zd
            sk = np.exp(zc) * f
            total[r] = h[r] * np.sum(sk, axis=1) / (2j * np.pi)
            absum[r] = h[r] * np.sum(np.abs(sk), axis=1) / (2.0 * np.pi)

    res = np.zeros(z.shape, dtype=complex)
    if use_res.any():
        res[use_res] = _exp_part(z[use_res], g, s, sheet[use_res])
    value = total + res
    err = np.exp(log_tol) * (1.0 + np.abs(res)) + 4.0 * EPS * absum
    return value, err


# }}}


# {{{ dispatcher


def _evaluate(z: np.ndarray, g: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    value = np.empty(z.shape, dtype=complex)
    err = np.empty(z.shape)
    if g == 1.0 and s == 1.0:
        with np.errstate(over="ignore"):
            value[:] = np.exp(z)
        err[:] = 2.0 * EPS * np.abs(value) * (1.0 + np.abs(z))
        return value, err

    az = np.abs(z)
    r_asym = asymptotic_radius(g, s)
    regimes = (
        (az <= TAYLOR_RADIUS, _taylor),
        (az >= r_asym, _asymptotic),
        ((az > TAYLOR_RADIUS) & (az < r_asym), _opc),
    )
    for mask, fn in regimes:
        if mask.any():
            v, e = fn(z[mask], g, s)
            value[mask] = v
            err[mask] = e
    # rounding in z^(1/g) is amplified by the condition number ~ |z|^(1/g)/g
    outer = az > TAYLOR_RADIUS
    if outer.any():
        with np.errstate(over="ignore"):
            cond = 1.0 + az[outer] ** (1.0 / g) / g
        err[outer] += np.abs(value[outer]) * (4.0 * EPS + 4.0 * EPS_LD * cond)
    real = z.imag == 0.0
    value[real] = value[real].real
    return value, err


def _guard_cut(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Move points lying within CUT_GUARD (in argument) of the negative real
    axis, but not on it, to exactly that distance."""
    near = (z.imag != 0.0) & (np.pi - np.abs(np.angle(z)) < CUT_GUARD)
    if not near.any():
        return z, near
    z = z.copy()
    zn = z[near]
    side = np.sign(zn.imag)
    z[near] = np.abs(zn) * np.exp(1j * side * (np.pi - CUT_GUARD))
    return z, near


def _evaluate_guarded(z: np.ndarray, g: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    zg, near = _guard_cut(z)
    value, err = _evaluate(zg, g, s)
    if near.any():
        # finite-difference estimate of the change caused by the shift
        zn = zg[near]
        zr = zn * np.exp(-1j * np.sign(zn.imag) * CUT_GUARD)
        v2, _ = _evaluate(zr, g, s)
        err[near] += np.abs(v2 - value[near]) * np.abs(zn - z[near]) / np.maximum(
            np.abs(zr - zn), 1e-300
        ) + np.abs(v2 - value[near])
    return value, err


def mittag_leffler_with_error(
    z, gamma: float, sigma: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Array evaluation of E_{gamma,sigma}(z) and an absolute error estimate.

    Large inputs are split into contiguous chunks that may run on separate
    threads (see ``FRACPROP_THREADS``); the result does not depend on it.
    """
    MlParams(float(gamma), float(sigma))
    g, s = float(gamma), float(sigma)
    zarr = np.asarray(z, dtype=complex)
    shape = zarr.shape
    flat = np.ascontiguousarray(zarr.reshape(-1))
    if not np.all(np.isfinite(flat)):
        raise EvalFailure("Mittag-Leffler argument must be finite")

    n_threads = _parallel.thread_count()
    if n_threads > 1 and flat.size >= _PARALLEL_MIN:
        bounds = _parallel.chunk_bounds(flat.size, n_threads)
        parts = _parallel.ordered_map(
            lambda b: _evaluate_guarded(flat[b[0] : b[1]], g, s), bounds
        )
        value = np.concatenate([p[0] for p in parts])
        err = np.concatenate([p[1] for p in parts])
    else:
        value, err = _evaluate_guarded(flat, g, s)

    bad = ~np.isfinite(value)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvalFailure(
            f"E_{{{g},{s}}}({flat[i]}) is not representable (index {i})"
        )
    return value.reshape(shape), err.reshape(shape)


def mittag_leffler(z, gamma: float, sigma: float = 1.0) -> np.ndarray:
    """Array evaluation of E_{gamma,sigma}(z)."""
    return mittag_leffler_with_error(z, gamma, sigma)[0]


def ml_eval(p: MlParams, z: complex) -> MlValue:
    value, err = mittag_leffler_with_error(np.array([z], dtype=complex), p.gamma, p.sigma)
    return MlValue(complex(value[0]), float(err[0]))


def ml_eval_batch(p: MlParams, zs: Iterable[complex]) -> list[MlValue]:
    zarr = np.asarray(list(zs), dtype=complex)
    if zarr.size == 0:
        return []
    try:
        value, err = mittag_leffler_with_error(zarr, p.gamma, p.sigma)
    except EvalFailure as exc:
        raise EvalFailure(f"batch evaluation failed: {exc}") from exc
    return [MlValue(complex(v), float(e)) for v, e in zip(value, err)]


# }}}
