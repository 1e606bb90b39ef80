"""Sinc-quadrature evaluation of fractional propagators and mild solutions."""
from .contour import HyperbolicContour, OrderPair, SpectralParams, build_contour, step_size
from .errors import (
    BoundsViolation,
    CacheMismatch,
    ConfigError,
    EvalFailure,
    FracPropError,
    NoConvergence,
    NotReached,
)
from .inverse import FitReport, ForwardModel, Measurements, fit_alpha
from .mlf import MlParams, mittag_leffler, ml_eval, ml_eval_batch
from .operators import GridFunction, diag_operator, fd_laplacian
from .propagator import CacheStore, QuadratureGrid, propagator2_apply, propagator_apply
from .solution import (
    SchemeParams,
    SourceTerm,
    homogeneous_solution,
    inhomogeneous_solution,
    mild_solution,
    rl_quadrature,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsViolation",
    "CacheMismatch",
    "CacheStore",
    "ConfigError",
    "EvalFailure",
    "FitReport",
    "ForwardModel",
    "FracPropError",
    "GridFunction",
    "HyperbolicContour",
    "Measurements",
    "MlParams",
    "NoConvergence",
    "NotReached",
    "OrderPair",
    "QuadratureGrid",
    "SchemeParams",
    "SourceTerm",
    "SpectralParams",
    "build_contour",
    "diag_operator",
    "fd_laplacian",
    "fit_alpha",
    "homogeneous_solution",
    "inhomogeneous_solution",
    "mild_solution",
    "mittag_leffler",
    "ml_eval",
    "ml_eval_batch",
    "propagator2_apply",
    "propagator_apply",
    "rl_quadrature",
    "step_size",
]
