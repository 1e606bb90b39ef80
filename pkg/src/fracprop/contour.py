"""Hyperbolic integration contour and its admissible angular sizes.

The contour is

    z(xi) = a0 - aI cosh(xi) + i bI sinh(xi),   xi in R,

and the sinc rule samples it at xi_k = k h.  The strip of analyticity of the
integrand around the real xi axis has half-width d = omega/2, where omega is
the angular size chosen among

* ``max``:  omega_m = phi_s_c - phi_c, the largest admissible value;
* ``star``: omega_* = phi_s_c - (pi/2) max(1, 1/beta), independent of alpha,
  so one resolvent cache serves every alpha in (0, beta];
* ``opc``:  omega_c, small enough that the Mittag-Leffler evaluator never
  sees arguments on the wrong side of its branch cut;
* a custom value in (0, omega_m].
"""
from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyAdmissibleRegion,
    InvalidAngularSize,
    NonPositiveInput,
    OrderConstraintViolated,
)

DEFAULT_A0 = math.pi / 6


@dataclass(frozen=True)
class OrderPair:
    """Fractional order alpha of the problem and subordination order beta."""

    alpha: float
    beta: float

    @property
    def gamma(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class SpectralParams:
    """Sector data of the operator: vertex rho_s, half-angle varphi_s, constant M."""

    rho_s: float = 1.0
    varphi_s: float = 0.0
    M: float = 1.0

    def __post_init__(self) -> None:
        if not (self.rho_s > 0 and math.isfinite(self.rho_s)):
            raise NonPositiveInput(f"rho_s must be positive, got {self.rho_s!r}")
        if not (0.0 <= self.varphi_s < math.pi / 2):
            raise OrderConstraintViolated(
                "varphi_s", f"varphi_s must lie in [0, pi/2), got {self.varphi_s!r}"
            )
        if not (self.M > 0 and math.isfinite(self.M)):
            raise NonPositiveInput(f"M must be positive, got {self.M!r}")


@dataclass(frozen=True)
class ContourAngles:
    phi_s_c: float
    phi_c: float
    omega_m: float
    omega_star: float
    omega_c: float


class OmegaChoice(enum.Enum):
    MAX = "max"
    STAR = "star"
    OPC = "opc"
    CUSTOM = "custom"


@dataclass(frozen=True)
class HyperbolicContour:
    a0: float
    aI: float
    bI: float
    omega: float
    d: float
    a_m: float
    beta: float
    phi_s_c: float

    @property
    def key(self) -> str:
        """Digest of everything the resolvent samples depend on.

        a_m is excluded: it varies with alpha while the nodes do not.
        """
        raw = struct.pack("<6d", self.a0, self.aI, self.bI, self.omega, self.beta, self.phi_s_c)
        return hashlib.sha256(raw).hexdigest()[:16]


def validate_orders(op: OrderPair, sp: SpectralParams) -> None:
    """Raise OrderConstraintViolated unless 0 < alpha <= beta < 2 and
    alpha <= 2 (1 - varphi_s / pi)."""
    a, b = op.alpha, op.beta
    if not (math.isfinite(a) and math.isfinite(b)):
        raise OrderConstraintViolated("finite", f"orders must be finite, got alpha={a}, beta={b}")
    if not a > 0:
        raise OrderConstraintViolated("alpha>0", f"alpha must be positive, got {a}")
    if a > b:
        raise OrderConstraintViolated("alpha<=beta", f"alpha={a} exceeds beta={b}")
    if not b < 2:
        raise OrderConstraintViolated("beta<2", f"beta must be below 2, got {b}")
    bound = 2.0 * (1.0 - sp.varphi_s / math.pi)
    if a > bound:
        raise OrderConstraintViolated(
            "alpha<=2(1-varphi_s/pi)", f"alpha={a} exceeds 2(1 - varphi_s/pi) = {bound}"
        )


def contour_angles(op: OrderPair, sp: SpectralParams) -> ContourAngles:
    validate_orders(op, sp)
    b, g = op.beta, op.gamma
    phi_s_c = min(math.pi, (math.pi - sp.varphi_s) / b)
    phi_c = math.pi * g / 2
    omega_m = phi_s_c - phi_c
    omega_star = phi_s_c - math.pi / 2 * max(1.0, 1.0 / b)
    omega_c = phi_s_c - max(phi_c, math.pi - (math.pi - sp.varphi_s) / b)
    if phi_s_c <= math.pi / 2:
        # beta >= 2 (1 - varphi_s/pi): the curve cannot open to the left
        raise EmptyAdmissibleRegion(
            f"phi_s_c = {phi_s_c} <= pi/2 for beta={b}, varphi_s={sp.varphi_s}; "
            "no hyperbolic contour exists"
        )
    if omega_m <= 0:
        raise EmptyAdmissibleRegion(
            f"no admissible angular size: omega_m = {omega_m} for alpha={op.alpha}, beta={b}"
        )
    return ContourAngles(phi_s_c, phi_c, omega_m, omega_star, omega_c)


def _parse_choice(omega_choice) -> tuple[OmegaChoice, float | None]:
    if isinstance(omega_choice, OmegaChoice):
        return omega_choice, None
    if isinstance(omega_choice, str):
        try:
            return OmegaChoice(omega_choice.lower()), None
        except ValueError:
            pass
        try:
            return OmegaChoice.CUSTOM, float(omega_choice)
        except ValueError:
            raise InvalidAngularSize(f"unknown omega choice {omega_choice!r}") from None
    return OmegaChoice.CUSTOM, float(omega_choice)


def select_omega(angles: ContourAngles, omega_choice) -> float:
    choice, value = _parse_choice(omega_choice)
    if choice is OmegaChoice.CUSTOM:
        if value is None or not (0.0 < value <= angles.omega_m):
            raise InvalidAngularSize(
                f"custom omega must lie in (0, {angles.omega_m}], got {value!r}"
            )
        return value
    omega = {
        OmegaChoice.MAX: angles.omega_m,
        OmegaChoice.STAR: angles.omega_star,
        OmegaChoice.OPC: angles.omega_c,
    }[choice]
    if omega <= 0:
        raise EmptyAdmissibleRegion(f"omega_{choice.value} = {omega} is not positive")
    return omega


def build_contour(
    op: OrderPair,
    sp: SpectralParams,
    omega_choice="star",
    a0: float = DEFAULT_A0,
) -> HyperbolicContour:
    """Hyperbolic contour for the orders ``op`` and the operator sector ``sp``.

    ``omega_choice`` is ``"max"``, ``"star"``, ``"opc"``, an :class:`OmegaChoice`
    or a number (custom angular size).
    """
    if not (a0 > 0 and math.isfinite(a0)):
        raise NonPositiveInput(f"a0 must be positive, got {a0!r}")
    angles = contour_angles(op, sp)
    omega = select_omega(angles, omega_choice)
    psc = angles.phi_s_c
    cos_psc = math.cos(psc)
    aI = a0 * math.cos(omega / 2 - psc) / cos_psc
    bI = a0 * math.sin(omega / 2 - psc) / cos_psc
    # phi_s_c lies in (pi/2, pi], so both ratios are positive for admissible omega
    if not (aI > 0 and bI > 0):
        raise InvalidAngularSize(f"omega={omega} gives a degenerate contour (aI={aI}, bI={bI})")
    a_m = (a0 - a0 * math.cos(angles.phi_c) / cos_psc) ** (op.beta / op.alpha)
    return HyperbolicContour(
        a0=a0, aI=aI, bI=bI, omega=omega, d=omega / 2, a_m=a_m, beta=op.beta, phi_s_c=psc
    )


def contour_point(c: HyperbolicContour, xi):
    """Return z(xi) and z'(xi); ``xi`` may be a scalar or an array."""
    xi = np.asarray(xi, dtype=float)
    ch, sh = np.cosh(xi), np.sinh(xi)
    z = c.a0 - c.aI * ch + 1j * (c.bI * sh)
    dz = -c.aI * sh + 1j * (c.bI * ch)
    if z.ndim == 0:
        return complex(z), complex(dz)
    return z, dz


def step_size(omega: float, kappa: float, beta: float, N: int) -> float:
    """Sinc step h = sqrt(pi omega / (kappa beta N))."""
    for name, v in (("omega", omega), ("kappa", kappa), ("beta", beta), ("N", N)):
        if not (v > 0 and math.isfinite(v)):
            raise NonPositiveInput(f"{name} must be positive, got {v!r}")
    return math.sqrt(math.pi * omega / (kappa * beta * N))
