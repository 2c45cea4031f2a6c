"""
Equianharmonic Weierstrass p with (p')^2 = 4 p^3 - 1
Lattice reduction plus a truncated Laurent series, and the Baker factor pair
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy import integrate

from fermatlab.services.expr_core import (
    TAU_ZERO,
    AnalyticExpr,
    EvalResult,
    FermatLabError,
    Finite,
    Pole,
    WpNode,
    WpPrimeNode,
    Z,
    compose,
)

logger = logging.getLogger(__name__)

E_ROOT = 4.0 ** (-1.0 / 3.0)
LAURENT_TERMS = 20
CUBE_ROOT_OF_UNITY = cmath.exp(2j * math.pi / 3)
INV_SQRT3 = 3.0 ** -0.5


class LatticePoleError(FermatLabError):
    """Point coincides with a lattice point of the period lattice"""
    pass


class ZeroOfWp(FermatLabError):
    """p vanishes at the point, the Baker pair has a pole there"""
    pass


def laurent_coefficients(nonzero_terms: int = LAURENT_TERMS) -> np.ndarray:
    """
    Coefficients c_k of p(z) = z^-2 + sum_{k>=2} c_k z^(2k-2) for g2=0, g3=1.
    Index k of the returned array holds c_k; only k divisible by 3 are nonzero.
    """
    kmax = 3 * nonzero_terms
    c = np.zeros(kmax + 1)
    c[3] = 1.0 / 28.0
    for k in range(4, kmax + 1):
        acc = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c[k] = 3.0 * acc / ((2 * k + 1) * (k - 3))
    return c


def equianharmonic_periods() -> Tuple[complex, complex]:
    """
    Half-periods (omega, e^{i pi/3} omega) of the lattice with g2=0, g3=1.

    omega = int_e^inf dt / sqrt(4t^3 - 1) with e = 4^{-1/3}; the substitution
    t = e/u^2 turns it into 2e int_0^1 du / sqrt(1 - u^6), integrated with an
    algebraic endpoint weight.
    """
    def smooth_part(u: float) -> float:
        return 2.0 * E_ROOT / math.sqrt(1 + u + u**2 + u**3 + u**4 + u**5)

    omega, err = integrate.quad(smooth_part, 0.0, 1.0, weight="alg", wvar=(0.0, -0.5), epsabs=1e-15, epsrel=1e-14)
    logger.debug(f"Real half-period {omega:.15f} (quadrature error {err:.1e})")
    return complex(omega), omega * cmath.exp(1j * math.pi / 3)


@dataclass(frozen=True)
class BakerPair:
    """p^3 + q^3 = 1 wherever defined"""
    p: complex
    q: complex


class EquianharmonicWeierstrass:
    """Evaluation context: periods and Laurent table, immutable after construction"""

    def __init__(self, nonzero_terms: int = LAURENT_TERMS):
        self.half_periods = equianharmonic_periods()
        self.laurent_coeffs = laurent_coefficients(nonzero_terms)
        self.truncation = nonzero_terms
        omega1, omega2 = self.half_periods
        self.basis = (2 * omega1, 2 * omega2)
        self._det = (self.basis[0].conjugate() * self.basis[1]).imag
        self._powers = np.arange(3, 3 * nonzero_terms + 1, 3)
        logger.info("[INFO] EquianharmonicWeierstrass initialized")

    @property
    def real_half_period(self) -> float:
        return self.half_periods[0].real

    def reduce(self, zs) -> np.ndarray:
        """Subtract the nearest lattice point"""
        z = np.asarray(zs, dtype=complex)
        b1, b2 = self.basis
        x = (z.real * b2.imag - z.imag * b2.real) / self._det
        y = (b1.real * z.imag - b1.imag * z.real) / self._det
        x0, y0 = np.round(x), np.round(y)
        best = z - (x0 * b1 + y0 * b2)
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                if i == 0 and j == 0:
                    continue
                cand = z - ((x0 + i) * b1 + (y0 + j) * b2)
                best = np.where(np.abs(cand) < np.abs(best), cand, best)
        return best

    def wp_pair(self, zs) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(p, p', pole mask) at an array of points"""
        u = np.atleast_1d(self.reduce(zs))
        at_pole = np.abs(u) < TAU_ZERO
        u = np.where(at_pole, 1.0, u)
        u2 = u * u
        p = 1.0 / u2
        dp = -2.0 / (u2 * u)
        for k in self._powers:
            ck = self.laurent_coeffs[k]
            p = p + ck * u ** (2 * k - 2)
            dp = dp + (2 * k - 2) * ck * u ** (2 * k - 3)
        p = np.where(at_pole, 0.0, p)
        dp = np.where(at_pole, 0.0, dp)
        return p, dp, at_pole

    def wp(self, z: complex) -> EvalResult:
        p, _, pole = self.wp_pair([z])
        return Pole(2) if pole[0] else Finite(complex(p[0]))

    def wp_prime(self, z: complex) -> EvalResult:
        _, dp, pole = self.wp_pair([z])
        return Pole(3) if pole[0] else Finite(complex(dp[0]))

    def baker_pair(self, z: complex) -> BakerPair:
        p, dp, pole = self.wp_pair([z])
        if pole[0]:
            raise LatticePoleError(f"{z} is a lattice point")
        if abs(p[0]) < TAU_ZERO:
            raise ZeroOfWp(f"p vanishes at {z}")
        wp, dwp = complex(p[0]), complex(dp[0])
        return BakerPair(
            p=(1 - INV_SQRT3 * dwp) / (2 * wp),
            q=CUBE_ROOT_OF_UNITY * (1 + INV_SQRT3 * dwp) / (2 * wp),
        )

    def lattice_points(self, radius: float) -> List[complex]:
        """Lattice points of modulus below radius"""
        b1, b2 = self.basis
        span = int(math.ceil(radius / abs(b1) * 2)) + 1
        points = []
        for i in range(-span, span + 1):
            for j in range(-span, span + 1):
                w = i * b1 + j * b2
                if abs(w) < radius:
                    points.append(complex(w))
        return sorted(points, key=lambda w: (abs(w), cmath.phase(w)))

    def wp_zeros(self, radius: float) -> List[complex]:
        """Zeros of p of modulus below radius; they sit at (b1+b2)/3 and 2(b1+b2)/3 mod the lattice"""
        b1, b2 = self.basis
        seeds = ((b1 + b2) / 3, 2 * (b1 + b2) / 3)
        zeros = []
        for w in self.lattice_points(radius + 2 * abs(b1)):
            for s in seeds:
                candidate = w + s
                if abs(candidate) < radius:
                    zeros.append(complex(candidate))
        return sorted(zeros, key=lambda w: (abs(w), cmath.phase(w)))

    def wp_expr(self, inner: AnalyticExpr = Z) -> AnalyticExpr:
        return compose(WpNode(self), inner)

    def wp_prime_expr(self, inner: AnalyticExpr = Z) -> AnalyticExpr:
        return compose(WpPrimeNode(self), inner)

    def baker_exprs(self) -> Tuple[AnalyticExpr, AnalyticExpr]:
        """gamma_1, gamma_2 as expressions of the variable"""
        wp = WpNode(self)
        dwp = WpPrimeNode(self)
        gamma1 = (1 - INV_SQRT3 * dwp) / (2 * wp)
        gamma2 = CUBE_ROOT_OF_UNITY * (1 + INV_SQRT3 * dwp) / (2 * wp)
        return gamma1, gamma2


@lru_cache(maxsize=1)
def default_context() -> EquianharmonicWeierstrass:
    return EquianharmonicWeierstrass()
