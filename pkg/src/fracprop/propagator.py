r"""Sinc-quadrature approximations of the fractional propagators.

For a contour z(xi) built for the subordination order beta, the solution
operator of the order-alpha problem is approximated by

.. math::

    \tilde S x = x + \frac{h}{2\pi i} \sum_{k=-N}^{N}
        E_{\gamma,1}(z_k t^\gamma)\, F_k, \qquad
    F_k = z'_k \bigl(z_k^{\beta-1} (z_k^\beta I + A)^{-1} - z_k^{-1}\bigr) x,

with gamma = alpha/beta.  The samples F_k carry all operator work and do not
depend on alpha or t, so a :class:`ResolventCache` holding them serves every
alpha in (0, beta] and every time.  The second propagator, acting on the
initial velocity, uses the plain samples z'_k z_k^{beta-2} (z_k^beta + A)^{-1} u1
weighted by t^{1-gamma} E_{gamma,2-gamma}(z_k t^gamma).

For real operators and real data F_{-k} = -conj(F_k), so only k = 0..N are
solved and the sum collapses to (h/2 pi)(Im T_0 + 2 sum_{k>=1} Im T_k).
Summation runs over ascending k with Kahan compensation.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import _parallel
from .contour import HyperbolicContour, OrderPair, contour_point, step_size
from .errors import CacheMismatch, EvalFailure, MlEvalFailure, NonPositiveInput
from .mlf import mittag_leffler
from .operators import SectorialOperator, _values

CORRECTED = "corrected"
PLAIN = "plain"

# node chunk below which cache construction stays on one thread
_PARALLEL_NODES = 64

# nodes farther out carry samples of relative size below 1 / Z_MAX
Z_MAX = 1e150


@dataclass(frozen=True)
class QuadratureGrid:
    N: int
    h: float

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise NonPositiveInput(f"N must be a positive integer, got {self.N!r}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise NonPositiveInput(f"h must be positive, got {self.h!r}")

    @classmethod
    def for_contour(cls, c: HyperbolicContour, N: int, kappa: float = 1.0) -> "QuadratureGrid":
        return cls(int(N), step_size(c.omega, kappa, c.beta, N))

    def nodes(self, symmetric: bool) -> np.ndarray:
        k = np.arange(0 if symmetric else -self.N, self.N + 1)
        return k * self.h


@dataclass
class CacheStats:
    unique_resolvent_solves: int = 0
    hits: int = 0


@dataclass(frozen=True, eq=False)
class ResolventCache:
    contour: HyperbolicContour
    grid: QuadratureGrid
    operator_key: str
    beta: float
    kind: str
    symmetric: bool
    x: np.ndarray
    z: np.ndarray
    samples: np.ndarray
    contour_id: str
    stats: CacheStats = field(default_factory=CacheStats)

    @property
    def n_nodes(self) -> int:
        return len(self.z)


@dataclass(frozen=True, eq=False)
class PropagatorResult:
    value: np.ndarray
    n_ml_evals: int
    n_resolvent_solves_new: int


def _is_real(x: np.ndarray) -> bool:
    return not np.iscomplexobj(x) or not np.any(x.imag)


def contour_nodes(c: HyperbolicContour, g: QuadratureGrid, symmetric: bool) -> tuple[np.ndarray, np.ndarray]:
    """Contour points and derivatives at the grid nodes with |z| <= Z_MAX.

    Very coarse grids (large h) would otherwise overflow cosh in the tails.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        z, dz = contour_point(c, g.nodes(symmetric))
    keep = np.abs(z) <= Z_MAX
    if keep.all():
        return z, dz
    return z[keep], dz[keep]


def cache_id(c: HyperbolicContour, g: QuadratureGrid, A: SectorialOperator, x, kind: str) -> str:
    x = np.ascontiguousarray(_values(x))
    digest = hashlib.sha256()
    digest.update(f"{c.key}|{g.N}|{g.h!r}|{A.key}|{kind}|{x.dtype}|{x.shape}".encode())
    digest.update(x.tobytes())
    return digest.hexdigest()[:24]


def build_cache(
    c: HyperbolicContour,
    g: QuadratureGrid,
    A: SectorialOperator,
    beta: float,
    x,
    kind: str = CORRECTED,
    reduce: bool | None = None,
) -> ResolventCache:
    """Solve (z_k^beta I + A) r_k = x at every node and store the weighted samples.

    ``kind`` selects the corrected samples of the first propagator or the
    plain samples of the second one.  ``reduce`` forces (True) or disables
    (False) the conjugate-symmetry reduction; by default it is used exactly
    when ``x`` is real.
    """
    if beta != c.beta:
        raise CacheMismatch(f"contour was built for beta={c.beta}, not {beta}")
    if kind not in (CORRECTED, PLAIN):
        raise ValueError(f"unknown cache kind {kind!r}")
    x = np.array(_values(x))
    if x.shape != (A.size,):
        raise CacheMismatch(f"data of shape {x.shape} does not fit an operator of size {A.size}")
    if not np.all(np.isfinite(x)):
        raise EvalFailure("cache data must be finite")
    x.setflags(write=False)
    symmetric = _is_real(x) if reduce is None else bool(reduce)
    if symmetric and not _is_real(x):
        raise CacheMismatch("symmetry reduction needs real data")
    if symmetric:
        x = np.ascontiguousarray(x.real)
        x.setflags(write=False)
    z, dz = contour_nodes(c, g, symmetric)

    def solve(bounds):
        lo, hi = bounds
        zc, dc = z[lo:hi, None], dz[lo:hi, None]
        w = zc[:, 0] ** beta
        r = A.resolvent_shifted(w, x)
        if kind == CORRECTED:
            return dc * (zc ** (beta - 1.0) * r - x / zc)
        return dc * zc ** (beta - 2.0) * r

    n_chunks = max(1, min(_parallel.thread_count(), len(z) // _PARALLEL_NODES))
    parts = _parallel.ordered_map(solve, _parallel.chunk_bounds(len(z), n_chunks))
    samples = np.concatenate(parts)
    samples.setflags(write=False)
    return ResolventCache(
        contour=c,
        grid=g,
        operator_key=A.key,
        beta=beta,
        kind=kind,
        symmetric=symmetric,
        x=x,
        z=z,
        samples=samples,
        contour_id=cache_id(c, g, A, x, kind if symmetric == _is_real(x) else kind + ":full"),
        stats=CacheStats(unique_resolvent_solves=len(z)),
    )


class CacheStore:
    """Caches keyed by contour, grid, operator, data and kind; counts solves."""

    def __init__(self) -> None:
        self._caches: dict[str, ResolventCache] = {}
        self.hits = 0

    def get(
        self,
        c: HyperbolicContour,
        g: QuadratureGrid,
        A: SectorialOperator,
        x,
        kind: str = CORRECTED,
    ) -> ResolventCache:
        key = cache_id(c, g, A, x, kind)
        cache = self._caches.get(key)
        if cache is None:
            cache = build_cache(c, g, A, c.beta, x, kind)
            self._caches[key] = cache
        else:
            cache.stats.hits += 1
            self.hits += 1
        return cache

    @property
    def unique_resolvent_solves(self) -> int:
        return sum(cache.stats.unique_resolvent_solves for cache in self._caches.values())

    def __len__(self) -> int:
        return len(self._caches)

    def __iter__(self):
        return iter(self._caches.values())


def _time_powers(ts: np.ndarray, p: float) -> np.ndarray:
    """t^p with 0^p = 0 for p > 0 and 1 for p = 0."""
    with np.errstate(divide="ignore"):
        out = np.power(ts, p)
    if p > 0:
        out[ts == 0.0] = 0.0
    return out


def _weighted_sum(cache: ResolventCache, coeff: np.ndarray) -> np.ndarray:
    """(h / 2 pi i) sum_k coeff[:, k] F_k over ascending k, Kahan compensated."""
    F = cache.samples
    nt = coeff.shape[0]
    h = cache.grid.h
    if cache.symmetric:
        acc = np.zeros((nt, F.shape[1]))
        comp = np.zeros_like(acc)
        for k in range(cache.n_nodes):
            c = coeff[:, k, None]
            term = c.real * F[k].imag + c.imag * F[k].real
            if k > 0:
                term = 2.0 * term
            y = term - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
        return acc * (h / (2.0 * math.pi))
    acc = np.zeros((nt, F.shape[1]), dtype=complex)
    comp = np.zeros_like(acc)
    for k in range(cache.n_nodes):
        y = coeff[:, k, None] * F[k] - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc * (h / (2j * math.pi))


def _check(cache: ResolventCache, op: OrderPair, kind: str, x=None) -> None:
    if cache.kind != kind:
        raise CacheMismatch(f"expected a {kind} cache, got {cache.kind}")
    if op.beta != cache.beta:
        raise CacheMismatch(f"cache built for beta={cache.beta}, requested beta={op.beta}")
    if not 0 < op.alpha <= op.beta:
        raise CacheMismatch(f"alpha={op.alpha} outside (0, beta={op.beta}]")
    if x is not None:
        xv = np.asarray(_values(x))
        if xv.shape != cache.x.shape or not np.array_equal(xv, cache.x):
            raise CacheMismatch("cache was built for different data")


def _times(t) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if ts.ndim != 1 or np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise NonPositiveInput("times must be finite and nonnegative")
    return ts


def _ml(z: np.ndarray, gamma: float, sigma: float) -> np.ndarray:
    try:
        return mittag_leffler(z, gamma, sigma)
    except EvalFailure as exc:
        raise MlEvalFailure(str(exc)) from exc


def propagator_values(cache: ResolventCache, op: OrderPair, ts) -> tuple[np.ndarray, int]:
    """S(t) x for every t in ``ts``; returns (array of shape (nt, n), ML evals)."""
    _check(cache, op, CORRECTED)
    ts = _times(ts)
    gamma = op.alpha / op.beta
    tg = _time_powers(ts, gamma)
    coeff = _ml(tg[:, None] * cache.z[None, :], gamma, 1.0)
    value = cache.x[None, :] + _weighted_sum(cache, coeff)
    return value, coeff.size


def propagator2_values(cache: ResolventCache, op: OrderPair, ts) -> tuple[np.ndarray, int]:
    """S_2(t) u1 for every t in ``ts`` from a plain cache."""
    _check(cache, op, PLAIN)
    ts = _times(ts)
    gamma = op.alpha / op.beta
    if not np.any(cache.x):
        dtype = float if cache.symmetric else complex
        return np.zeros((len(ts), len(cache.x)), dtype=dtype), 0
    tg = _time_powers(ts, gamma)
    pref = _time_powers(ts, 1.0 - gamma)
    coeff = pref[:, None] * _ml(tg[:, None] * cache.z[None, :], gamma, 2.0 - gamma)
    return _weighted_sum(cache, coeff), coeff.size


def propagator_apply(cache: ResolventCache, op: OrderPair, t: float, x=None) -> PropagatorResult:
    """Approximate S_alpha(t) x from the cached samples.

    ``x`` is optional and, when given, must be the data the cache was built for.
    """
    _check(cache, op, CORRECTED, x)
    value, n_ml = propagator_values(cache, op, [t])
    return PropagatorResult(value[0], n_ml, 0)


def propagator2_apply(
    c: HyperbolicContour,
    g: QuadratureGrid,
    A: SectorialOperator,
    op: OrderPair,
    t: float,
    u1,
    store: CacheStore | None = None,
) -> PropagatorResult:
    """Approximate the second propagator applied to ``u1`` at time ``t``.

    With a ``store`` the plain samples are reused across calls.
    """
    store = store if store is not None else CacheStore()
    before = store.unique_resolvent_solves
    cache = store.get(c, g, A, u1, PLAIN)
    value, n_ml = propagator2_values(cache, op, [t])
    return PropagatorResult(value[0], n_ml, store.unique_resolvent_solves - before)
