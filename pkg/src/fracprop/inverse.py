"""Identification of the fractional order from pointwise measurements.

The forward map alpha -> u(t, x_probe) is the homogeneous scheme.  In the
subordination mode beta is fixed and the contour uses omega_*, so one cache
per data vector serves every trial alpha.  The legacy mode sets beta = alpha,
which moves the contour and forces fresh resolvent solves at every trial.

The misfit sum_t max_x |u(t, x) - data(t, x)|^2 is minimized over a bounded
interval by Brent's method (golden section with parabolic steps) started
from a given seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contour import OrderPair, SpectralParams, build_contour, validate_orders
from .errors import BoundsViolation, FracPropError, NoConvergence
from .operators import GridFunction, SectorialOperator, _values
from .propagator import PLAIN, CacheStore, QuadratureGrid, propagator2_values, propagator_values

GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class Measurements:
    times: np.ndarray
    probe: np.ndarray
    data: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        probe = np.atleast_1d(np.asarray(self.probe, dtype=float))
        data = np.asarray(self.data, dtype=float).reshape(len(times), len(probe))
        if times.ndim != 1 or np.any(np.diff(times) <= 0) or np.any(times < 0):
            raise BoundsViolation("measurement times must be increasing and nonnegative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "probe", probe)
        object.__setattr__(self, "data", data)


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """Homogeneous problem with data u0, u1 on the operator A.

    ``beta=None`` selects the legacy mode beta = alpha.  The sector defaults
    to the operator's own spectral hint.
    """

    A: SectorialOperator
    u0: np.ndarray
    u1: np.ndarray | None = None
    beta: float | None = 1.6
    omega_choice: str = "star"
    N: int = 128
    sp: SpectralParams | None = None

    def __post_init__(self) -> None:
        if self.sp is None:
            object.__setattr__(self, "sp", self.A.spectral_hint)

    @property
    def legacy(self) -> bool:
        return self.beta is None


@dataclass(frozen=True)
class TraceRow:
    iter: int
    alpha: float
    residual: float
    n_solves: int


@dataclass(frozen=True)
class FitReport:
    alpha_fit: float
    residual: float
    n_resolvent_solves: int
    n_model_evals: int
    iterations: int
    trace: tuple[TraceRow, ...] = ()


class _Objective:
    """Misfit as a function of alpha, with solve accounting."""

    def __init__(self, meas: Measurements, model: ForwardModel, store: CacheStore | None = None):
        self.meas = meas
        self.model = model
        self.store = store if store is not None else CacheStore()
        self.legacy_solves = 0
        self.evals = 0
        u0 = np.asarray(_values(model.u0), dtype=float)
        u1 = None if model.u1 is None else np.asarray(_values(model.u1), dtype=float)
        self.u0, self.u1 = u0, (u1 if u1 is not None and np.any(u1) else None)
        if not model.legacy:
            self.contour = build_contour(OrderPair(model.beta, model.beta), model.sp, model.omega_choice)

    @property
    def n_solves(self) -> int:
        return self.store.unique_resolvent_solves + self.legacy_solves

    def forward(self, alpha: float) -> np.ndarray:
        m = self.model
        if m.legacy:
            op = OrderPair(alpha, alpha)
            contour = build_contour(op, m.sp, m.omega_choice)
            store = CacheStore()
        else:
            op = OrderPair(alpha, m.beta)
            contour, store = self.contour, self.store
        # u0 and u1 share N and h, so one subordination fit costs at most 2(N + 1) solves
        grid = QuadratureGrid.for_contour(contour, m.N)
        values, _ = propagator_values(store.get(contour, grid, m.A, self.u0), op, self.meas.times)
        if alpha > 1 and self.u1 is not None:
            second, _ = propagator2_values(store.get(contour, grid, m.A, self.u1, PLAIN), op, self.meas.times)
            values = values + second
        if m.legacy:
            self.legacy_solves += store.unique_resolvent_solves
        return GridFunction(values, m.A.grid).evaluate(self.meas.probe)

    def __call__(self, alpha: float) -> float:
        self.evals += 1
        u = self.forward(alpha)
        return float(np.sum(np.max(np.abs(u - self.meas.data), axis=1) ** 2))


def _check_bounds(model: ForwardModel, bounds, alpha0: float) -> tuple[float, float]:
    lo, hi = (float(b) for b in bounds)
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise BoundsViolation(f"bounds must satisfy 0 < lo < hi, got {bounds}")
    cap = 2.0 * (1.0 - model.sp.varphi_s / math.pi)
    if not model.legacy:
        cap = min(cap, model.beta)
    if hi > cap:
        raise BoundsViolation(f"upper bound {hi} exceeds the admissible {cap}")
    if not lo <= alpha0 <= hi:
        raise BoundsViolation(f"seed {alpha0} outside [{lo}, {hi}]")
    if not model.legacy:
        try:
            validate_orders(OrderPair(hi, model.beta), model.sp)
        except FracPropError as exc:
            raise BoundsViolation(str(exc)) from exc
    return lo, hi


def brent_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    x0: float,
    xtol: float = 1e-10,
    maxiter: int = 200,
    on_iter: Callable[[int, float, float], None] | None = None,
) -> tuple[float, float, int]:
    """Bounded Brent minimization started at ``x0``.

    Returns (x, f(x), iterations); raises NoConvergence after ``maxiter``
    iterations.  ``on_iter`` sees the best point after every iteration.
    """
    a, b = lo, hi
    x = w = v = x0
    fx = fw = fv = f(x)
    d = e = 0.0
    for it in range(1, maxiter + 1):
        mid = 0.5 * (a + b)
        tol1 = math.sqrt(np.finfo(float).eps) * abs(x) / 3.0 + xtol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - mid) <= tol2 - 0.5 * (b - a):
            return x, fx, it - 1
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < mid else -tol1
                golden = False
        if golden:
            e = (b - x) if x < mid else (a - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
        if on_iter is not None:
            on_iter(it, x, fx)
    raise NoConvergence(f"no convergence within {maxiter} iterations (alpha = {x})")


def fit_alpha(
    meas: Measurements,
    model: ForwardModel,
    bounds=(0.1, 1.6),
    alpha0: float = 0.85,
    xtol: float = 1e-10,
    maxiter: int = 200,
    store: CacheStore | None = None,
) -> FitReport:
    """Least-squares estimate of alpha from the measurements.

    Passing one ``store`` to several subordination fits shares the caches
    between them; ``n_resolvent_solves`` then counts the store's solves.
    """
    lo, hi = _check_bounds(model, bounds, alpha0)
    objective = _Objective(meas, model, store)
    trace: list[TraceRow] = []

    def record(it, x, fx):
        trace.append(TraceRow(it, x, fx, objective.n_solves))

    alpha, residual, iterations = brent_minimize(objective, lo, hi, alpha0, xtol, maxiter, record)
    return FitReport(
        alpha_fit=alpha,
        residual=residual,
        n_resolvent_solves=objective.n_solves,
        n_model_evals=objective.evals,
        iterations=iterations,
        trace=tuple(trace),
    )


def write_trace(report: FitReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "alpha", "residual", "n_solves"])
        for row in report.trace:
            writer.writerow([row.iter, repr(row.alpha), repr(row.residual), row.n_solves])
