"""Experiment drivers behind the command line: convergence sweeps, the
regularity table, order identification and solution snapshots.

Every driver takes an :class:`ExperimentConfig` and returns plain rows; the
CSV writers format floats with ``repr`` (shortest round-trip) so that the
same config and seed give byte-identical files, apart from wall times.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .contour import (
    DEFAULT_A0,
    OrderPair,
    SpectralParams,
    build_contour,
    contour_angles,
    validate_orders,
)
from .errors import ConfigError, FracPropError, NotReached
from .inverse import ForwardModel, Measurements, fit_alpha
from .operators import SectorialOperator, diag_operator, fd_laplacian
from .problems import (
    eigenmode_data,
    eigenmode_exact,
    polynomial_exact,
    polynomial_problem,
    regularity_initial,
    semidiscrete_exact,
    source_exact,
    source_problem,
)
from .propagator import CacheStore
from .solution import SchemeParams, SourceTerm, mild_solution

PROBLEMS = ("hom-eigen", "hom-fd", "inhom", "full", "inverse")
BACKENDS = ("diag", "fd")

# natural backend and default first mode of each problem
_DEFAULT_BACKEND = {"hom-eigen": "diag", "hom-fd": "fd", "inhom": "diag", "full": "fd", "inverse": "diag"}
_DEFAULT_K0 = {"hom-eigen": 1, "hom-fd": 3, "inhom": 1, "full": 1, "inverse": 2}

CONVERGENCE_HEADER = ("alpha", "beta", "N", "err_sup", "wall_time_ms", "n_resolvent_solves")
TABLE1_HEADER = ("delta", "kappa", "N_e", "err_at_N_e", "plateau", "status")
INVERSE_HEADER = (
    "trial",
    "alpha",
    "alpha_fit",
    "err_alpha",
    "n_solves",
    "n_evals",
    "alpha_fit_legacy",
    "err_alpha_legacy",
    "n_solves_legacy",
    "n_evals_legacy",
)
SOLUTION_HEADER = ("t", "x", "re", "im")


class ConfigWarning(UserWarning):
    pass


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in _split(raw))


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in _split(raw))


def _split(raw: str) -> list[str]:
    items = [v.strip() for v in str(raw).split(",")]
    if not items or any(not v for v in items):
        raise ConfigError(f"malformed list {raw!r}")
    return items


def _kappas(raw: str) -> tuple[float | str, ...]:
    # "delta" ties kappa to the regularity parameter of the same table cell
    return tuple(v if v == "delta" else float(v) for v in _split(raw))


def _optional_int(raw: str) -> int | None:
    return None if str(raw).strip().lower() in ("", "none") else int(raw)


def _optional_str(raw: str) -> str | None:
    return None if str(raw).strip().lower() in ("", "none") else str(raw).strip()


def _bool(raw: str) -> bool:
    value = str(raw).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _key(parse: Callable, help: str):
    return {"parse": parse, "help": help}


@dataclass(frozen=True)
class ExperimentConfig:
    """All experiment knobs.  Lists are comma separated in files and flags."""

    problem: str = field(default="hom-eigen", metadata=_key(str, "one of " + ", ".join(PROBLEMS)))
    alpha: tuple[float, ...] = field(default=(0.5,), metadata=_key(_floats, "fractional orders"))
    beta: tuple[float, ...] = field(default=(1.01,), metadata=_key(_floats, "subordination orders"))
    varphi_s: float = field(default=math.pi / 60, metadata=_key(float, "sector half-angle of A"))
    omega_choice: str = field(default="star", metadata=_key(str, "max, star, opc or a number"))
    a0: float = field(default=DEFAULT_A0, metadata=_key(float, "contour vertex"))
    kappa: tuple = field(default=(1.0,), metadata=_key(_kappas, "smoothness of u0 (table1 accepts 'delta')"))
    chi: float = field(default=1.0, metadata=_key(float, "smoothness of the source"))
    N: tuple[int, ...] = field(default=(16, 32, 64, 128, 256), metadata=_key(_ints, "node counts"))
    T: float = field(default=1.0, metadata=_key(float, "final time"))
    time_grid_size: int = field(default=40, metadata=_key(int, "intervals of the uniform time grid"))
    backend: str | None = field(default=None, metadata=_key(_optional_str, "diag or fd"))
    m: int = field(default=100, metadata=_key(int, "interior points of the fd grid"))
    k0: int | None = field(default=None, metadata=_key(_optional_int, "mode of u0"))
    k1: int = field(default=4, metadata=_key(int, "mode of u1"))
    x_samples: int = field(default=101, metadata=_key(int, "sample points for spectral sup norms"))
    delta: tuple[float, ...] = field(default=(1.0,), metadata=_key(_floats, "regularity of u0"))
    threshold: float = field(default=1e-13, metadata=_key(float, "table1 error target"))
    n_max: int = field(default=2500, metadata=_key(int, "table1 search limit"))
    trials: int = field(default=10, metadata=_key(int, "inverse trials"))
    alpha_range: tuple[float, ...] = field(default=(0.1, 1.6), metadata=_key(_floats, "inverse draw range"))
    probe: float = field(default=math.pi / 10, metadata=_key(float, "inverse measurement point"))
    legacy: bool = field(default=True, metadata=_key(_bool, "also fit with beta = alpha"))
    seed: int = field(default=0, metadata=_key(int, "random seed"))
    output: str | None = field(default=None, metadata=_key(_optional_str, "CSV path (stdout if unset)"))

    def __post_init__(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.backend is not None and self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        for name in ("alpha", "beta", "kappa", "N", "delta"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be a nonempty list")
        if any(n < 1 for n in self.N):
            raise ConfigError("every N must be positive")
        for name in ("T", "chi", "a0", "threshold"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        for name in ("time_grid_size", "m", "k1", "x_samples", "n_max", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.k0 is not None and self.k0 < 1:
            raise ConfigError("k0 must be positive")
        if any(d < 0 for d in self.delta):
            raise ConfigError("delta must be nonnegative")
        if any(k != "delta" and not k > 0 for k in self.kappa):
            raise ConfigError("kappa must be positive")
        if len(self.alpha_range) != 2 or not 0 < self.alpha_range[0] < self.alpha_range[1]:
            raise ConfigError(f"alpha_range must be two increasing positive values, got {self.alpha_range}")
        try:
            self.spectral()
        except FracPropError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def keys(cls) -> list[dataclasses.Field]:
        return list(dataclasses.fields(cls))

    @classmethod
    def from_mapping(cls, raw: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Parse string values; unknown keys are an error."""
        known = {f.name.lower(): f for f in cls.keys()}
        values = {}
        for key, text in raw.items():
            f = known.get(key.strip().replace("-", "_").lower())
            if f is None:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[f.name] = f.metadata["parse"](text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {f.name}: {text!r}") from exc
        return dataclasses.replace(base or cls(), **values)

    @classmethod
    def from_file(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
        )
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_string("[config]\n" + fh.read())
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_mapping(dict(parser["config"]), base)

    @property
    def k0_value(self) -> int:
        return self.k0 if self.k0 is not None else _DEFAULT_K0[self.problem]

    @property
    def backend_value(self) -> str:
        return self.backend or _DEFAULT_BACKEND[self.problem]

    def spectral(self) -> SpectralParams:
        return SpectralParams(varphi_s=self.varphi_s)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.time_grid_size + 1)

    def single_kappa(self) -> float:
        if len(self.kappa) != 1 or self.kappa[0] == "delta":
            raise ConfigError("this experiment takes a single numeric kappa")
        return float(self.kappa[0])


# {{{ problem set-up


@dataclass
class Problem:
    """Operator, data and exact solution of one convergence experiment."""

    A: SectorialOperator
    u0: np.ndarray
    u1: np.ndarray | None
    src: SourceTerm | None
    exact: Callable[[float, np.ndarray], np.ndarray]
    sample: Callable[[np.ndarray], np.ndarray]
    xs: np.ndarray


def _spectral_sampler(A, xs):
    basis = np.sin(np.pi * np.multiply.outer(xs, np.asarray(A.grid.modes, dtype=float)))
    return lambda values: values @ basis.T


def build_problem(cfg: ExperimentConfig, alpha: float, delta: float | None = None) -> Problem:
    backend = cfg.backend_value
    k0, k1 = cfg.k0_value, cfg.k1
    problem = cfg.problem
    if problem in ("hom-fd", "full") and backend != "fd":
        raise ConfigError(f"problem {problem} needs the fd backend")
    if problem == "inhom" and backend != "diag":
        raise ConfigError("problem inhom needs the diag backend")

    if backend == "fd":
        A = fd_laplacian(cfg.m)
        xs = A.grid.nodes
        if problem == "full":
            u0, src = polynomial_problem(A, alpha)
            return Problem(A, u0, None, src, lambda a, ts: polynomial_exact(ts, xs), lambda v: v, xs)
        if problem == "hom-fd":
            u0 = regularity_initial(A, cfg.delta[0] if delta is None else delta, k0)
        else:
            u0 = np.sin(k0 * math.pi * xs)
        return Problem(A, u0, None, None, lambda a, ts: semidiscrete_exact(A, a, u0, ts), lambda v: v, xs)

    xs = np.linspace(0.0, 1.0, cfg.x_samples)
    if problem == "inhom":
        A = diag_operator([1, 4])
        sample = _spectral_sampler(A, xs)
        return Problem(
            A, np.zeros(2), None, source_problem(), lambda a, ts: sample(source_exact(a, ts)), sample, xs
        )
    basis, u0, u1 = eigenmode_data(k0, k1)
    A = diag_operator(basis.modes)
    sample = _spectral_sampler(A, xs)
    return Problem(
        A,
        u0,
        u1 if alpha > 1 else None,
        None,
        lambda a, ts: eigenmode_exact(a, ts, xs, k0, k1),
        sample,
        xs,
    )


def feasible_orders(cfg: ExperimentConfig, alphas: Iterable[float] | None = None) -> list[OrderPair]:
    """(alpha, beta) pairs of the sweep with alpha <= beta; other violations are errors."""
    sp = cfg.spectral()
    pairs = []
    for beta in cfg.beta:
        for alpha in cfg.alpha if alphas is None else alphas:
            if alpha > beta:
                continue
            op = OrderPair(alpha, beta)
            try:
                validate_orders(op, sp)
            except FracPropError as exc:
                raise ConfigError(str(exc)) from exc
            pairs.append(op)
    if not pairs:
        raise ConfigError("no (alpha, beta) pair with alpha <= beta")
    return pairs


def _contour(cfg: ExperimentConfig, op: OrderPair):
    sp = cfg.spectral()
    try:
        c = build_contour(op, sp, cfg.omega_choice, cfg.a0)
    except FracPropError as exc:
        raise ConfigError(str(exc)) from exc
    omega_c = contour_angles(op, sp).omega_c
    if c.omega > omega_c:
        warnings.warn(
            f"omega = {c.omega} exceeds omega_c = {omega_c} for alpha = {op.alpha}, beta = {op.beta}; "
            "Mittag-Leffler arguments may leave the evaluator's guaranteed range",
            ConfigWarning,
            stacklevel=3,
        )
    return c


def solve_problem(
    cfg: ExperimentConfig,
    prob: Problem,
    op: OrderPair,
    N: int,
    ts: np.ndarray,
    kappa: float,
    store: CacheStore | None = None,
) -> np.ndarray:
    """Approximate solution at ``ts`` sampled on ``prob.xs``, shape (nt, nx)."""
    c = _contour(cfg, op)
    params = SchemeParams(N, kappa=kappa, chi=cfg.chi)
    u = mild_solution(params, c, prob.A, op, ts, prob.u0, prob.u1, prob.src, store)
    return prob.sample(u.values)


def sup_error(cfg, prob, op, N, ts, kappa, store=None) -> float:
    approx = solve_problem(cfg, prob, op, N, ts, kappa, store)
    return float(np.max(np.abs(approx - prob.exact(op.alpha, ts))))


# {{{ drivers


def run_convergence(cfg: ExperimentConfig) -> list[tuple]:
    """Rows (alpha, beta, N, err_sup, wall_time_ms, n_resolvent_solves).

    The error is the maximum over the time grid of the sup norm in x.  One
    cache store serves every alpha at the same (beta, N), so the solve count
    of a row is the number of new solves it triggered.
    """
    if cfg.problem == "inverse":
        raise ConfigError("use run_inverse for the inverse problem")
    kappa = cfg.single_kappa()
    ts = cfg.times()
    pairs = feasible_orders(cfg)
    problems = {a: build_problem(cfg, a) for a in sorted({op.alpha for op in pairs})}
    rows = []
    for beta in cfg.beta:
        for N in cfg.N:
            store = CacheStore()
            for op in (p for p in pairs if p.beta == beta):
                before = store.unique_resolvent_solves
                start = time.perf_counter()
                err = sup_error(cfg, problems[op.alpha], op, N, ts, kappa, store)
                wall = (time.perf_counter() - start) * 1e3
                rows.append((op.alpha, op.beta, N, err, wall, store.unique_resolvent_solves - before))
    return rows


def table1_error(cfg: ExperimentConfig, delta: float, kappa: float, N: int, pairs, problems) -> float:
    ts = cfg.times()
    return max(sup_error(cfg, problems[op.alpha], op, N, ts, kappa) for op in pairs)


def find_ne(err: Callable[[int], float], threshold: float, n_max: int, n_start: int = 16) -> tuple[int, float]:
    """Smallest N with err(N) <= threshold, assuming monotone decay.

    N doubles from ``n_start`` until the target is met, then bisects.  Raises
    NotReached with the smallest error seen once N would exceed ``n_max``.
    """
    seen: dict[int, float] = {}

    def e(n: int) -> float:
        if n not in seen:
            seen[n] = err(n)
        return seen[n]

    lo, hi = 0, min(n_start, n_max)
    while e(hi) > threshold:
        if hi >= n_max:
            raise NotReached(f"error {min(seen.values())} above {threshold} up to N = {n_max}", min(seen.values()))
        lo, hi = hi, min(2 * hi, n_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if e(mid) <= threshold:
            hi = mid
        else:
            lo = mid
    return hi, seen[hi]


def run_table1(cfg: ExperimentConfig) -> list[tuple]:
    """Rows (delta, kappa, N_e, err_at_N_e, plateau, status) on the fd backend.

    The error of a cell is the largest over the configured alpha values;
    cells that never reach the threshold report their plateau instead.
    """
    if cfg.backend not in (None, "fd"):
        raise ConfigError("table1 needs the fd backend")
    if any(a > 1 for a in cfg.alpha):
        raise ConfigError("table1 uses alpha <= 1")
    tcfg = dataclasses.replace(cfg, problem="hom-fd")
    pairs = feasible_orders(tcfg)
    rows = []
    for delta in cfg.delta:
        problems = {op.alpha: build_problem(tcfg, op.alpha, delta) for op in pairs}
        for k in cfg.kappa:
            kappa = delta if k == "delta" else float(k)
            if not kappa > 0:
                raise ConfigError("kappa = delta needs delta > 0")
            try:
                ne, err = find_ne(
                    lambda N: table1_error(tcfg, delta, kappa, N, pairs, problems), cfg.threshold, cfg.n_max
                )
                rows.append((delta, kappa, ne, err, "", "ok"))
            except NotReached as exc:
                rows.append((delta, kappa, "", "", exc.plateau, "not_reached"))
    return rows


def run_inverse(cfg: ExperimentConfig) -> list[tuple]:
    """Seeded batch of order identifications from noiseless eigenmode data.

    The subordination fits share one cache store, so their solve column is
    cumulative over the batch; legacy fits (beta = alpha) count per fit.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.alpha_range
    draws = rng.uniform(lo, hi, size=cfg.trials)
    k0, k1 = cfg.k0_value, cfg.k1
    basis, u0, u1 = eigenmode_data(k0, k1)
    A = diag_operator(basis.modes)
    ts = cfg.times()
    beta = cfg.beta[0]
    N = cfg.N[0]
    store = CacheStore()
    sub = ForwardModel(A, u0, u1, beta=beta, omega_choice=cfg.omega_choice, N=N)
    legacy = ForwardModel(A, u0, u1, beta=None, omega_choice="opc", N=N)
    rows = []
    for i, alpha in enumerate(draws, start=1):
        alpha = float(alpha)
        meas = Measurements(ts, [cfg.probe], eigenmode_exact(alpha, ts, [cfg.probe], k0, k1))
        fit = fit_alpha(meas, sub, bounds=(lo, hi), store=store)
        row = [i, alpha, fit.alpha_fit, abs(fit.alpha_fit - alpha), fit.n_resolvent_solves, fit.n_model_evals]
        if cfg.legacy:
            old = fit_alpha(meas, legacy, bounds=(lo, hi))
            row += [old.alpha_fit, abs(old.alpha_fit - alpha), old.n_resolvent_solves, old.n_model_evals]
        else:
            row += ["", "", "", ""]
        rows.append(tuple(row))
    return rows


def emit_solution(cfg: ExperimentConfig, t_list: Sequence[float]) -> list[tuple]:
    """Rows (t, x, re, im) of the scheme's solution with the first alpha, beta and N.

    Grid problems include the Dirichlet endpoints.
    """
    ts = np.asarray(list(t_list), dtype=float)
    if ts.size == 0:
        return []
    op = feasible_orders(cfg, cfg.alpha[:1])[0]
    prob = build_problem(cfg, op.alpha)
    if cfg.backend_value == "fd":
        xs = np.concatenate([[0.0], prob.xs, [1.0]])
        sample = prob.sample
        prob.sample = lambda v: np.pad(sample(v), [(0, 0), (1, 1)])
    else:
        xs = prob.xs
    u = solve_problem(cfg, prob, op, cfg.N[0], ts, cfg.single_kappa())
    return [(float(t), float(x), float(v.real), float(v.imag)) for t, row in zip(ts, u) for x, v in zip(xs, row)]


# {{{ output


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    write_csv(header, rows, buf)
    return buf.getvalue()
