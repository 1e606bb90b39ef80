"""Extended-precision reference values shared by the test modules.

Nothing here calls into the package under test.
"""
from __future__ import annotations

import mpmath as mp

DPS = 40


def ml_series(z, gamma, sigma=1.0, dps=DPS):
    """E_{gamma,sigma}(z) by a truncated Taylor series with a remainder bound.

    Terms are summed until the geometric tail bound of the remaining terms
    falls below 1e-30 in absolute value.
    """
    # the largest term is about exp(|z|^(1/gamma)); carry enough digits to
    # absorb the cancellation
    growth = abs(complex(z)) ** (1.0 / gamma) / 2.3
    with mp.workdps(dps + 20 + int(growth)):
        z = mp.mpc(z)
        g, s = mp.mpf(gamma), mp.mpf(sigma)
        total = mp.mpc(0)
        k = 0
        while True:
            term = z**k * mp.rgamma(g * k + s)
            total += term
            if k > 10 and g * k + s > 2:
                # successive ratios eventually fall below 1/2, bounding the tail
                nxt = abs(z) ** (k + 1) * abs(mp.rgamma(g * (k + 1) + s))
                if nxt <= abs(term) / 2 and 2 * nxt < mp.mpf(10) ** (-30):
                    break
            k += 1
            if k > 200000:
                raise RuntimeError("series oracle did not converge")
        return complex(total)


def ml_hankel(z, gamma, sigma=1.0, dps=30, phi=None, rho=0.5):
    """E_{gamma,sigma}(z) from the Laplace inversion integral on a fixed
    Hankel contour (two rays at angle +-phi joined by a circle of radius rho)
    plus the residues of the poles lying to its right.

    Independent of the package: fixed contour, adaptive quadrature.
    """
    with mp.workdps(dps):
        z = mp.mpc(z)
        g, s = mp.mpf(gamma), mp.mpf(sigma)
        phi = mp.mpf(phi) if phi is not None else mp.pi * mp.mpf("0.9")
        rho = mp.mpf(rho)

        def f(p):
            return mp.exp(p) * p ** (g - s) / (p**g - z)

        breaks = [rho, 1, 10, 50, mp.inf]
        up = mp.quad(lambda r: f(r * mp.expj(phi)) * mp.expj(phi), breaks)
        lo = mp.quad(lambda r: f(r * mp.expj(-phi)) * mp.expj(-phi), breaks)
        circ = mp.quad(lambda th: f(rho * mp.expj(th)) * 1j * rho * mp.expj(th), [-phi, 0, phi])
        value = (up - lo + circ) / (2j * mp.pi)

        absz, th = abs(z), mp.arg(z)
        kmin = int(mp.ceil(-g / 2 - th / (2 * mp.pi)))
        kmax = int(mp.floor(g / 2 - th / (2 * mp.pi)))
        for k in range(kmin, kmax + 1):
            pole = absz ** (1 / g) * mp.expj((th + 2 * k * mp.pi) / g)
            if abs(pole) > rho and abs(mp.arg(pole)) < phi:
                value += pole ** (1 - s) * mp.exp(pole) / g
        return complex(value)


def ml_half(z):
    """E_{1/2,1}(z) = exp(z^2) erfc(-z)."""
    with mp.workdps(DPS):
        z = mp.mpc(z)
        return complex(mp.exp(z * z) * mp.erfc(-z))


def ml(z, gamma, sigma=1.0):
    """Dispatch to the cheapest reliable oracle for the argument."""
    # the series needs about (2|z|)^(1/gamma)/gamma terms
    if (2.0 * abs(z)) ** (1.0 / gamma) / gamma <= 5000:
        return ml_series(z, gamma, sigma)
    if gamma == 0.5 and sigma == 1.0:
        return ml_half(z)
    return ml_hankel(z, gamma, sigma)
