"""
Truncated Laurent series in sigma with an optional short Taylor direction
Coefficient c[i, d] multiplies sigma^(lo + i) * eps^d, eps = xi - xi_0, d <= depth
"""
from __future__ import annotations

import cmath
import logging
import math
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from fermatlab.services.expr_core import EPS_BRANCH, BranchViolationError, FermatLabError

logger = logging.getLogger(__name__)

ORDER_RTOL = 1e-8

Scalar = Union[int, float, complex]
Exponent = Union[int, float, Fraction]


class NeedsRamification(FermatLabError):
    """Leading order is not divisible by the root index; lift t = s^q first"""
    pass


def _eps_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of polynomials in eps truncated at the last-axis length"""
    depth = a.shape[-1] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for i in range(depth + 1):
        out[..., i:] += a[..., i : i + 1] * b[..., : depth + 1 - i]
    return out


def _eps_power(u0: np.ndarray, p: float, lead: complex) -> np.ndarray:
    """u0^p for an eps-polynomial with unit constant term, lead = chosen c^p"""
    c = u0[0]
    delta = u0 / c
    delta[0] = 0.0
    out = np.zeros_like(u0)
    out[0] = 1.0
    term = out.copy()
    binom = 1.0
    for j in range(1, u0.shape[0]):
        binom *= (p - j + 1) / j
        term = _eps_mul(term, delta)
        out = out + binom * term
    return lead * out


class LaurentSeries:
    """
    Immutable truncated series. Rows are valid for orders below `prec`, eps
    columns up to `tdeg`; both shrink under the operations that lose them.
    """

    __slots__ = ("lo", "coeffs", "tdeg")

    def __init__(self, lo: int, coeffs: np.ndarray, tdeg: Optional[int] = None):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if coeffs.shape[0] < 1:
            raise ValueError("a series needs at least one coefficient row")
        self.lo = int(lo)
        self.coeffs = coeffs
        self.coeffs.setflags(write=False)
        self.tdeg = coeffs.shape[1] - 1 if tdeg is None else int(tdeg)

    # construction

    @classmethod
    def constant(cls, value: Scalar, length: int, depth: int = 0) -> "LaurentSeries":
        return cls.monomial(value, 0, length, depth)

    @classmethod
    def monomial(cls, value: Scalar, order: int, length: int, depth: int = 0) -> "LaurentSeries":
        """value * sigma^order, known to `length` orders beyond its own"""
        c = np.zeros((length, depth + 1), dtype=complex)
        c[0, 0] = value
        return cls(order, c)

    @classmethod
    def base_coordinate(cls, base: Scalar, length: int, depth: int = 2) -> "LaurentSeries":
        """The Taylor variable xi = xi_0 + eps, constant in sigma"""
        c = np.zeros((length, depth + 1), dtype=complex)
        c[0, 0] = base
        if depth >= 1:
            c[0, 1] = 1.0
        return cls(0, c)

    @classmethod
    def from_coefficients(cls, values: Sequence[Scalar], lo: int = 0, length: Optional[int] = None) -> "LaurentSeries":
        """Univariate series c_lo + c_{lo+1} t + ..., zero-padded to `length`"""
        values = list(values)
        length = max(len(values), length or 0)
        c = np.zeros((length, 1), dtype=complex)
        c[: len(values), 0] = values
        return cls(lo, c)

    # shape

    @property
    def depth(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def length(self) -> int:
        return self.coeffs.shape[0]

    @property
    def prec(self) -> int:
        """First order that is not known"""
        return self.lo + self.length

    def coefficient(self, order: int, degree: int = 0) -> complex:
        if order >= self.prec:
            raise IndexError(f"order {order} is beyond the precision {self.prec}")
        if order < self.lo:
            return 0j
        return complex(self.coeffs[order - self.lo, degree])

    def values(self, degree: int = 0) -> np.ndarray:
        """Coefficients of eps^degree for orders lo..prec-1"""
        return np.array(self.coeffs[:, degree])

    def __repr__(self) -> str:
        head = ", ".join(f"{c:.4g}" for c in self.coeffs[:4, 0])
        return f"LaurentSeries(lo={self.lo}, prec={self.prec}, [{head}, ...])"

    # arithmetic

    def _coerce(self, other) -> "LaurentSeries":
        if isinstance(other, LaurentSeries):
            if other.depth != self.depth:
                raise ValueError("series with different Taylor depth cannot be combined")
            return other
        return LaurentSeries.constant(complex(other), self.prec if self.prec > 0 else 1, self.depth)

    def __add__(self, other) -> "LaurentSeries":
        other = self._coerce(other)
        lo = min(self.lo, other.lo)
        prec = min(self.prec, other.prec)
        if prec <= lo:
            raise ValueError("sum has no known coefficients")
        out = np.zeros((prec - lo, self.depth + 1), dtype=complex)
        for s in (self, other):
            top = min(s.prec, prec)
            if top > s.lo:
                out[s.lo - lo : top - lo] += s.coeffs[: top - s.lo]
        return LaurentSeries(lo, out, min(self.tdeg, other.tdeg))

    __radd__ = __add__

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(self.lo, -self.coeffs, self.tdeg)

    def __sub__(self, other) -> "LaurentSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LaurentSeries":
        return self._coerce(other) - self

    def scale(self, value: Scalar) -> "LaurentSeries":
        return LaurentSeries(self.lo, self.coeffs * complex(value), self.tdeg)

    def __mul__(self, other) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            return self.scale(other)
        if other.depth != self.depth:
            raise ValueError("series with different Taylor depth cannot be combined")
        n = min(self.length, other.length)
        out = np.zeros((n, self.depth + 1), dtype=complex)
        for i in range(self.depth + 1):
            for j in range(self.depth + 1 - i):
                out[:, i + j] += np.convolve(self.coeffs[:n, i], other.coeffs[:n, j])[:n]
        return LaurentSeries(self.lo + other.lo, out, min(self.tdeg, other.tdeg))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            return self.scale(1.0 / complex(other))
        return self * other.inverse()

    def __rtruediv__(self, other) -> "LaurentSeries":
        return self.inverse().scale(other)

    def __pow__(self, exponent: int) -> "LaurentSeries":
        if not isinstance(exponent, (int, np.integer)):
            raise TypeError("use power() or nth_root() for non-integer exponents")
        exponent = int(exponent)
        if exponent < 0:
            return (self ** (-exponent)).inverse()
        result = LaurentSeries.constant(1.0, self.length, self.depth)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    # normalization

    def trim(self) -> "LaurentSeries":
        """Drop exactly vanishing leading rows"""
        nz = np.flatnonzero(np.any(self.coeffs != 0, axis=1))
        if nz.size == 0 or nz[0] == 0:
            return self
        k = int(nz[0])
        return LaurentSeries(self.lo + k, self.coeffs[k:], self.tdeg)

    def order(self, rtol: float = ORDER_RTOL, scale: Optional[float] = None) -> Optional[int]:
        """
        First order whose value at the base point is numerically non-zero.
        None means zero to the available precision.
        """
        col = np.abs(self.coeffs[:, 0])
        ref = max(1.0, float(col.max())) if scale is None else scale
        hits = np.flatnonzero(col > rtol * ref)
        return self.lo + int(hits[0]) if hits.size else None

    # unit operations

    def _unit_split(self):
        s = self.trim()
        c0 = s.coeffs[0, 0]
        if c0 == 0:
            raise ZeroDivisionError("leading coefficient vanishes at the base point")
        return s, c0

    def power(self, p: Exponent, lead: Optional[complex] = None) -> "LaurentSeries":
        """
        s^p for a series whose valuation times p is an integer. The leading
        constant is `lead` when given (a chosen branch), else the principal one.
        """
        s, c0 = self._unit_split()
        p = Fraction(p).limit_denominator(10**6) if not isinstance(p, Fraction) else p
        val = s.lo * p
        if val.denominator != 1:
            raise NeedsRamification(f"order {s.lo} times {p} is not an integer")
        pf = float(p)
        if lead is None:
            if p.denominator != 1 and c0.real < 0 and abs(c0.imag) <= EPS_BRANCH * abs(c0):
                raise BranchViolationError(f"leading coefficient {c0} lies on the principal cut")
            lead = cmath.exp(pf * cmath.log(c0)) if p.denominator != 1 else c0 ** int(p)
        u = s.coeffs
        n = s.length
        b = np.zeros_like(u)
        b[0] = _eps_power(u[0].copy(), pf, lead)
        inv0 = _eps_power(u[0].copy(), -1.0, 1.0 / c0)
        for k in range(1, n):
            j = np.arange(1, k + 1)
            weights = ((pf + 1) * j - k).reshape(-1, 1)
            acc = np.sum(weights * _eps_mul(u[1 : k + 1], b[k - 1 :: -1]), axis=0)
            b[k] = _eps_mul(acc, inv0) / k
        return LaurentSeries(int(val), b, s.tdeg)

    def inverse(self) -> "LaurentSeries":
        return self.power(-1)

    def nth_root(self, n: int, branch: Optional[int] = None) -> "LaurentSeries":
        """
        n-th root. branch=None takes the principal root of the leading
        coefficient; an integer picks exp(i(arg c + 2 pi branch)/n).
        """
        if n < 1:
            raise ValueError("root index must be positive")
        s = self.trim()
        if s.lo % n:
            raise NeedsRamification(f"leading order {s.lo} is not divisible by {n}")
        if branch is None:
            return s.power(Fraction(1, n))
        c0 = complex(s.coeffs[0, 0])
        lead = abs(c0) ** (1.0 / n) * cmath.exp(1j * (cmath.phase(c0) + 2 * math.pi * branch) / n)
        return s.power(Fraction(1, n), lead=lead)

    # derivations

    def d_sigma(self) -> "LaurentSeries":
        orders = (self.lo + np.arange(self.length)).reshape(-1, 1)
        return LaurentSeries(self.lo - 1, self.coeffs * orders, self.tdeg)

    def d_xi(self) -> "LaurentSeries":
        if self.tdeg < 1:
            raise ValueError("no Taylor degree left to differentiate in xi")
        out = np.zeros_like(self.coeffs)
        for d in range(self.depth):
            out[:, d] = (d + 1) * self.coeffs[:, d + 1]
        return LaurentSeries(self.lo, out, self.tdeg - 1)

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs[:, 0]).max())


def series_nth_root(s: LaurentSeries, n: int, branch: Optional[int] = None) -> LaurentSeries:
    return s.nth_root(n, branch)
