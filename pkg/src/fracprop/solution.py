r"""Mild solution of the fractional Cauchy problem.

The solution is split as

.. math::

    u(t) = S_\alpha(t) u_0 + \int_0^t S_\alpha(t-s) u_1\,ds
         + J_\alpha S_\alpha(t) f(0) + \int_0^t S_\alpha(t-s) J_\alpha f'(s)\,ds,

where only the propagator S_alpha appears.  The homogeneous part uses the two
propagator approximations on a shared contour.  The inhomogeneous part maps
(0, t) onto the real line with s = t psi(p), psi(p) = e^p / (1 + e^p), and
applies sinc rules in p and along the contour, which yields three terms:

1. the Riemann-Liouville quadrature of s -> S(s) f(0), reusing one cache;
2. h sum_k t psi'(p_k) J f'(t psi_k), the identity part of S(t - s);
3. (h^2 / 2 pi i) sum_l F_l sum_k t psi'_k E(z_l t^g (1 - psi_k)^g) J f'(t psi_k),
   with one resolvent solve per contour node and time.

The Riemann-Liouville integral uses the same substitution:
J_a g(t) = t^a / Gamma(a) * int psi(p) (1 - psi(p))^a g(t psi(p)) dp.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import expit, gamma as gamma_fn

from . import _parallel
from .contour import HyperbolicContour, OrderPair, step_size
from .errors import ConfigError, EvalFailure
from .operators import GridFunction, SectorialOperator, _values
from .propagator import (
    PLAIN,
    CacheStore,
    QuadratureGrid,
    _is_real,
    _ml,
    _time_powers,
    contour_nodes,
    propagator2_values,
    propagator_values,
)

# strip half-width used for the stand-alone RL step; psi is singular at p = +-i pi
RL_STRIP = 0.75 * math.pi

# f' samples held in memory at once while forming J f'
_CHUNK_VALUES = 1 << 22


class SingularityWarning(UserWarning):
    """The declared singularity of f' exceeds what the scheme is proven for."""


@dataclass(frozen=True, eq=False)
class SourceTerm:
    """Right-hand side given through f(0) and f'(t).

    ``fprime`` is vectorized: times of shape S give values of shape S + (n,).
    ``s`` declares the singularity ||f'(t)|| <~ t^(-s) near 0.
    """

    f0: np.ndarray
    fprime: Callable[[np.ndarray], np.ndarray]
    s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.s < 1.0:
            raise ConfigError(f"singularity exponent must lie in [0, 1), got {self.s}")
        object.__setattr__(self, "f0", np.asarray(_values(self.f0)))

    @classmethod
    def zero(cls, n: int) -> "SourceTerm":
        return cls(np.zeros(n), lambda ts: np.zeros(np.shape(ts) + (n,)))

    def fprime_values(self, ts: np.ndarray) -> np.ndarray:
        try:
            out = np.asarray(_values(self.fprime(ts)))
        except (ArithmeticError, ValueError) as exc:
            raise EvalFailure(f"f' failed: {exc}") from exc
        expected = ts.shape + self.f0.shape
        if out.shape != expected:
            out = np.broadcast_to(out, expected)
        if not np.all(np.isfinite(out)):
            raise EvalFailure("f' returned non-finite values")
        return out


def _ceil_exact(*factors: float, divide: float = 1.0) -> int:
    # decimal inputs such as beta = 1.01 are taken at face value, so that
    # ceil(1.01 * 100) is 101 and not 102
    value = Fraction(1)
    for f in factors:
        value *= Fraction(repr(float(f))) if not isinstance(f, int) else Fraction(f)
    value /= Fraction(repr(float(divide)))
    return max(1, math.ceil(value))


@dataclass(frozen=True)
class HomogeneousCounters:
    N1: int
    N2: int


@dataclass(frozen=True)
class InhomogeneousCounters:
    N0: int
    N1: int
    N2: int
    N3: int
    N4: int
    N5: int


@dataclass(frozen=True)
class SchemeParams:
    """Node count N and the smoothness exponents of u0 (kappa) and f (chi).

    The angular size is taken from the contour.
    """

    N: int
    kappa: float = 1.0
    chi: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        for name in ("kappa", "chi"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v!r}")

    def homogeneous_counters(self, op: OrderPair) -> HomogeneousCounters:
        return HomogeneousCounters(N1=self.N, N2=_ceil_exact(self.kappa, op.beta, self.N))

    def inhomogeneous_counters(self, op: OrderPair) -> InhomogeneousCounters:
        outer = _ceil_exact(op.beta, self.chi, self.N)
        inner = _ceil_exact(op.beta, self.chi, self.N, divide=min(1.0, op.alpha))
        return InhomogeneousCounters(N0=inner, N1=outer, N2=inner, N3=self.N, N4=outer, N5=inner)

    def homogeneous_step(self, c: HyperbolicContour) -> float:
        return step_size(c.omega, self.kappa, c.beta, self.N)

    def inhomogeneous_step(self, c: HyperbolicContour) -> float:
        return step_size(c.omega, self.chi, c.beta, self.N)


@dataclass(frozen=True)
class LogisticNodes:
    """psi, 1 - psi and psi' at p_k = k h, k = -N..N."""

    p: np.ndarray
    psi: np.ndarray
    tail: np.ndarray
    dpsi: np.ndarray
    h: float

    @classmethod
    def make(cls, N: int, h: float) -> "LogisticNodes":
        p = np.arange(-N, N + 1) * h
        psi, tail = expit(p), expit(-p)
        return cls(p, psi, tail, psi * tail, h)

    def rl_weights(self, alpha: float) -> np.ndarray:
        # psi' (1 - psi)^(alpha - 1) = psi (1 - psi)^alpha, finite at both ends
        return self.psi * self.tail**alpha


def rl_step(alpha: float, N: int) -> float:
    """Default RL step sqrt(2 pi d / (min(1, alpha) N)) with d = 3 pi / 4."""
    return math.sqrt(2.0 * math.pi * RL_STRIP / (min(1.0, alpha) * N))


def _check_rl(alpha: float, N: int) -> None:
    if not 0 < alpha < 2:
        raise ConfigError(f"alpha must lie in (0, 2), got {alpha}")
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ConfigError(f"N must be a positive integer, got {N!r}")


def _rl_matrix(alpha: float, g_vals: np.ndarray, s: np.ndarray, nodes: LogisticNodes) -> np.ndarray:
    """J_alpha g at times ``s`` from samples g(s_i psi_j) of shape s.shape + (J, n)."""
    w = nodes.rl_weights(alpha)
    pref = _time_powers(s, alpha) * (nodes.h / gamma_fn(alpha))
    return pref[..., None] * np.einsum("...jn,j->...n", g_vals, w)


def rl_quadrature(alpha: float, g: Callable, t, N: int, h: float | None = None):
    """Sinc approximation of J_alpha g(t) = (1/Gamma(alpha)) int_0^t (t-s)^(alpha-1) g(s) ds.

    ``g`` must accept an array of times and return values of the same shape,
    optionally with one trailing spatial axis.  g is never evaluated at 0.
    """
    _check_rl(alpha, N)
    h = rl_step(alpha, N) if h is None else h
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError(f"h must be positive, got {h!r}")
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise ConfigError("t must be finite and nonnegative")
    nodes = LogisticNodes.make(N, h)
    keep = nodes.rl_weights(alpha) > 0
    nodes = LogisticNodes(*(a[keep] for a in (nodes.p, nodes.psi, nodes.tail, nodes.dpsi)), h)
    shape = ts.shape
    ts = ts.reshape(-1)
    args = ts[:, None] * nodes.psi
    try:
        vals = np.asarray(g(np.where(args > 0, args, 1.0)))
    except (ArithmeticError, ValueError) as exc:
        raise EvalFailure(f"integrand failed: {exc}") from exc
    scalar_valued = vals.shape == args.shape
    if scalar_valued:
        vals = vals[..., None]
    out = _rl_matrix(alpha, vals, ts, nodes)
    out = np.where((ts == 0)[:, None], 0.0, out)
    out = out.reshape(shape + out.shape[-1:])
    return out[..., 0] if scalar_valued else out


def _times(t) -> tuple[np.ndarray, bool]:
    ts = np.asarray(t, dtype=float)
    scalar = ts.ndim == 0
    ts = np.atleast_1d(ts)
    if ts.ndim != 1 or np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise ConfigError("times must be a finite nonnegative scalar or 1-d array")
    return ts, scalar


def _wrap(values: np.ndarray, A: SectorialOperator, scalar: bool) -> GridFunction:
    return GridFunction(values[0] if scalar else values, A.grid)


def homogeneous_solution(
    params: SchemeParams,
    contour: HyperbolicContour,
    caches: CacheStore | None,
    A: SectorialOperator,
    op: OrderPair,
    u0,
    u1,
    t,
) -> GridFunction:
    """S(t) u0 + int_0^t S(s) u1 ds with N1 = N and N2 = ceil(kappa beta N)."""
    u0 = np.asarray(_values(u0))
    u1 = np.zeros_like(u0) if u1 is None else np.asarray(_values(u1))
    if op.alpha <= 1 and np.any(u1):
        raise ConfigError(
            f"u1 must vanish for alpha = {op.alpha} <= 1: the problem then has a single initial condition"
        )
    ts, scalar = _times(t)
    caches = caches if caches is not None else CacheStore()
    n = params.homogeneous_counters(op)
    h = params.homogeneous_step(contour)
    if np.any(u0):
        cache0 = caches.get(contour, QuadratureGrid(n.N1, h), A, u0)
        value, _ = propagator_values(cache0, op, ts)
    else:
        value = np.zeros((len(ts), A.size), dtype=u0.dtype if np.iscomplexobj(u0) else float)
    if np.any(u1):
        cache1 = caches.get(contour, QuadratureGrid(n.N2, h), A, u1, PLAIN)
        second, _ = propagator2_values(cache1, op, ts)
        value = value + second
    return _wrap(value, A, scalar)


def _first_term(cache_f0, op: OrderPair, t: float, nodes: LogisticNodes) -> np.ndarray:
    """J_alpha applied to s -> S(s) f(0), evaluated at t."""
    s = t * nodes.psi
    values, _ = propagator_values(cache_f0, op, s)
    return _rl_matrix(op.alpha, values[None], np.array([t]), nodes)[0]


def _rl_fprime(src: SourceTerm, alpha: float, s: np.ndarray, inner: LogisticNodes) -> np.ndarray:
    """J_alpha f'(s_k) for every outer node s_k > 0, chunked over k."""
    n = src.f0.shape[-1]
    rows = max(1, _CHUNK_VALUES // max(1, len(inner.psi) * n))
    parts = []
    for lo in range(0, len(s), rows):
        sk = s[lo : lo + rows]
        args = sk[:, None] * inner.psi[None, :]
        vals = src.fprime_values(args)
        parts.append(_rl_matrix(alpha, vals, sk, inner))
    return np.concatenate(parts)


def _inhomogeneous_at(
    t: float,
    cache_f0,
    A: SectorialOperator,
    op: OrderPair,
    src: SourceTerm,
    counts: InhomogeneousCounters,
    h: float,
) -> np.ndarray:
    n = A.size
    if t == 0.0:
        return np.zeros(n, dtype=float if _is_real(src.f0) else complex)
    n0 = LogisticNodes.make(counts.N0, h)
    outer = LogisticNodes.make(counts.N1, h)
    inner = LogisticNodes.make(counts.N5, h)
    # nodes whose weights underflow would evaluate f' at exactly 0
    inner = _drop_dead(inner, op.alpha)
    n0 = _drop_dead(n0, op.alpha)

    term1 = _first_term(cache_f0, op, t, n0)

    s = t * outer.psi
    live = s > 0
    jf = np.zeros((len(s), n), dtype=complex)
    jf[live] = _rl_fprime(src, op.alpha, s[live], inner)
    real_f = _is_real(jf)
    if real_f:
        jf = jf.real
    weighted = (t * outer.dpsi)[:, None] * jf
    term2 = h * weighted.sum(axis=0)

    c = cache_f0.contour
    symmetric = cache_f0.symmetric and real_f
    z, dz = contour_nodes(c, QuadratureGrid(counts.N3, h), symmetric)
    gamma = op.gamma
    arg = (t * outer.tail) ** gamma
    E = _ml(z[:, None] * arg[None, :], gamma, 1.0)
    y = E @ weighted
    beta = c.beta
    r = A.resolvent_shifted(z**beta, y)
    F = dz[:, None] * (z[:, None] ** (beta - 1.0) * r - y / z[:, None])
    if symmetric:
        w = np.full(len(z), 2.0)
        w[0] = 1.0
        term3 = (h * h / (2.0 * math.pi)) * (w[:, None] * F.imag).sum(axis=0)
    else:
        term3 = (h * h / (2j * math.pi)) * F.sum(axis=0)
    return term1 + term2 + term3


def _drop_dead(nodes: LogisticNodes, alpha: float) -> LogisticNodes:
    keep = (nodes.rl_weights(alpha) > 0) & (nodes.psi > 0)
    if keep.all():
        return nodes
    return LogisticNodes(nodes.p[keep], nodes.psi[keep], nodes.tail[keep], nodes.dpsi[keep], nodes.h)


def inhomogeneous_solution(
    params: SchemeParams,
    contour: HyperbolicContour,
    caches: CacheStore | None,
    A: SectorialOperator,
    op: OrderPair,
    src: SourceTerm,
    t,
) -> GridFunction:
    """J S(t) f(0) + int_0^t S(t-s) J f'(s) ds by the three-term scheme.

    All steps equal sqrt(pi omega / (beta chi N)); the node counters follow
    :meth:`SchemeParams.inhomogeneous_counters`.
    """
    if src.f0.shape != (A.size,):
        raise ConfigError(f"f(0) has shape {src.f0.shape}, operator size is {A.size}")
    if op.alpha < 1 and src.s > 1 - op.alpha:
        warnings.warn(
            f"f' singularity t^-{src.s} is stronger than t^(alpha-1) = t^-{1 - op.alpha}",
            SingularityWarning,
            stacklevel=2,
        )
    ts, scalar = _times(t)
    caches = caches if caches is not None else CacheStore()
    counts = params.inhomogeneous_counters(op)
    h = params.inhomogeneous_step(contour)
    cache_f0 = caches.get(contour, QuadratureGrid(counts.N3, h), A, src.f0)
    rows = _parallel.ordered_map(
        lambda ti: _inhomogeneous_at(float(ti), cache_f0, A, op, src, counts, h), list(ts)
    )
    values = np.stack(rows)
    if _is_real(values):
        values = values.real
    return _wrap(values, A, scalar)


def mild_solution(
    params: SchemeParams,
    contour: HyperbolicContour,
    A: SectorialOperator,
    op: OrderPair,
    t,
    u0=None,
    u1=None,
    src: SourceTerm | None = None,
    caches: CacheStore | None = None,
) -> GridFunction:
    """Homogeneous plus inhomogeneous part; missing data are taken as zero."""
    caches = caches if caches is not None else CacheStore()
    ts, scalar = _times(t)
    u0 = np.zeros(A.size) if u0 is None else u0
    value = homogeneous_solution(params, contour, caches, A, op, u0, u1, ts).values
    if src is not None:
        value = value + inhomogeneous_solution(params, contour, caches, A, op, src, ts).values
    return _wrap(value, A, scalar)
