"""
Jet Lab - jet differentials on Fermat curves and surfaces
Charts along divisors, Cramer representations, order tables and threshold sweeps
"""
from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from fermatlab.models import OrderEntry, OrderTable, ThresholdReport, ThresholdRow
from fermatlab.services.expr_core import FermatLabError
from fermatlab.services.series import ORDER_RTOL, LaurentSeries
from fermatlab.services.solutions import ParameterOutOfRange
from fermatlab.services.verdict_engine import VerdictEngine
from fermatlab.utils.helpers import thread_cap

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 24
DEGENERATE_TOL = 1e-8
PUISEUX_MARGIN = 8
BASE_MODULUS = (0.2, 0.6)


class SingularPoint(FermatLabError):
    """The requested divisor point is singular; use the Puiseux branch"""
    pass


class DegenerateBase(FermatLabError):
    """Generic base value lies on an excluded root locus"""
    pass


class TruncationExhausted(FermatLabError):
    """Leading orders cannot be certified at this truncation"""
    pass


class IncompatibleChart(FermatLabError):
    """Jet differential and chart belong to different varieties"""
    pass


class Family(str, Enum):
    C_N = "Cn"
    C_MN = "Cmn"
    S_N = "Sn"
    S_MNL = "Smnl"


class Divisor(str, Enum):
    INFINITY = "infinity"
    V0 = "V0"
    Y0 = "Y0"
    X0 = "X0"
    W0 = "W0"
    Z0 = "Z0"
    SINGULAR = "singular"


class JetId(str, Enum):
    PHI_CURVE = "PHI_CURVE"
    PSI_CURVE = "PSI_CURVE"
    ETA_CURVE = "ETA_CURVE"
    PHI_SURF = "PHI_SURF"
    OMEGA_SURF = "OMEGA_SURF"
    PSI_SURF = "PSI_SURF"
    ETA_SURF = "ETA_SURF"
    PHI1_GEN = "PHI1_GEN"
    PHI2_GEN = "PHI2_GEN"
    OMEGA_GEN = "OMEGA_GEN"
    BLOCK_SURF = "BLOCK_SURF"


CURVE_FAMILIES = (Family.C_N, Family.C_MN)
SURFACE_FAMILIES = (Family.S_N, Family.S_MNL)

JET_FAMILIES: Dict[JetId, Tuple[Family, ...]] = {
    JetId.PHI_CURVE: (Family.C_N,),
    JetId.PSI_CURVE: (Family.C_N,),
    JetId.ETA_CURVE: (Family.C_N,),
    JetId.PHI1_GEN: (Family.C_N, Family.C_MN),
    JetId.PHI_SURF: (Family.S_N,),
    JetId.OMEGA_SURF: (Family.S_N,),
    JetId.PSI_SURF: (Family.S_N,),
    JetId.ETA_SURF: (Family.S_N,),
    JetId.BLOCK_SURF: (Family.S_N,),
    JetId.PHI2_GEN: (Family.S_N, Family.S_MNL),
    JetId.OMEGA_GEN: (Family.S_N, Family.S_MNL),
}

SURFACE_GENERATORS = ("dxi", "dsigma", "d2xi", "d2sigma")
SURFACE_LOG_GENERATORS = ("dxi", "dlogsigma", "d2xi", "d2logsigma")

ANNIHILATION_RELATIONS = ("y=ax", "y^n=ax^n+b", "v^n=au^n+b", "v=au", "generic")


# Jet polynomials

Monomial = Tuple[int, ...]


class JetPolynomial:
    """Polynomial in jet generators with LaurentSeries coefficients"""

    __slots__ = ("generators", "terms")

    def __init__(self, generators: Sequence[str], terms: Optional[Dict[Monomial, LaurentSeries]] = None):
        self.generators = tuple(generators)
        self.terms: Dict[Monomial, LaurentSeries] = dict(terms or {})

    @classmethod
    def scalar(cls, generators: Sequence[str], value: LaurentSeries) -> "JetPolynomial":
        return cls(generators, {(0,) * len(generators): value})

    @classmethod
    def generator(cls, generators: Sequence[str], name: str, unit: LaurentSeries) -> "JetPolynomial":
        generators = tuple(generators)
        exps = [0] * len(generators)
        exps[generators.index(name)] = 1
        return cls(generators, {tuple(exps): unit})

    def _same_ring(self, other: "JetPolynomial") -> None:
        if other.generators != self.generators:
            raise IncompatibleChart(f"generator sets differ: {self.generators} vs {other.generators}")

    def __add__(self, other: "JetPolynomial") -> "JetPolynomial":
        self._same_ring(other)
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            out[key] = out[key] + coeff if key in out else coeff
        return JetPolynomial(self.generators, out)

    def __neg__(self) -> "JetPolynomial":
        return JetPolynomial(self.generators, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "JetPolynomial") -> "JetPolynomial":
        return self + (-other)

    def __mul__(self, other) -> "JetPolynomial":
        if not isinstance(other, JetPolynomial):
            return JetPolynomial(self.generators, {k: c * other for k, c in self.terms.items()})
        self._same_ring(other)
        out: Dict[Monomial, LaurentSeries] = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                key = tuple(a + b for a, b in zip(ka, kb))
                prod = ca * cb
                out[key] = out[key] + prod if key in out else prod
        return JetPolynomial(self.generators, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "JetPolynomial":
        if isinstance(other, LaurentSeries):
            return self * other.inverse()
        return self * (1.0 / complex(other))

    def weight(self, key: Monomial) -> int:
        return sum(e * (2 if g.startswith("d2") else 1) for g, e in zip(self.generators, key))

    def label(self, key: Monomial) -> str:
        parts = []
        for g, e in zip(self.generators, key):
            if e == 1:
                parts.append(g)
            elif e > 1:
                parts.append(f"{g}^{e}")
        return "*".join(parts) or "1"

    def max_abs(self) -> float:
        return max((c.max_abs() for c in self.terms.values()), default=0.0)

    def substitute(self, images: Dict[str, "JetPolynomial"], generators: Sequence[str]) -> "JetPolynomial":
        """Replace each old generator by a polynomial over `generators`"""
        generators = tuple(generators)
        out = JetPolynomial(generators)
        for key, coeff in self.terms.items():
            term = JetPolynomial.scalar(generators, coeff)
            for g, e in zip(self.generators, key):
                for _ in range(e):
                    term = term * images[g]
            out = out + term
        return out


def det2(a: JetPolynomial, b: JetPolynomial, c: JetPolynomial, d: JetPolynomial) -> JetPolynomial:
    """|a b; c d|"""
    return a * d - b * c


def weighted_second(psi: LaurentSeries, d1: JetPolynomial, d2: JetPolynomial, k: int) -> JetPolynomial:
    """d^2 psi + (k - 1) dpsi^2 / psi"""
    if k == 1:
        return d2
    return d2 + (d1 * d1) * (psi.inverse() * float(k - 1))


def coordinate_jets(c: LaurentSeries, generators: Sequence[str]) -> Tuple[JetPolynomial, JetPolynomial]:
    """
    First and second differentials of a coordinate function.
    Curves: d c = c' dt, d^2 c = c' d2t + c'' dt^2.
    Surfaces: d c = c_xi dxi + c_sigma dsigma and
    d^2 c = c_xi d2xi + c_sigma d2sigma + c_xixi dxi^2 + 2 c_xisigma dxi dsigma + c_sigmasigma dsigma^2.
    """
    if len(generators) == 2:
        c1 = c.d_sigma()
        c2 = c1.d_sigma()
        return (
            JetPolynomial(generators, {(1, 0): c1}),
            JetPolynomial(generators, {(0, 1): c1, (2, 0): c2}),
        )
    cx = c.d_xi()
    cs = c.d_sigma()
    d1 = JetPolynomial(generators, {(1, 0, 0, 0): cx, (0, 1, 0, 0): cs})
    d2 = JetPolynomial(
        generators,
        {
            (0, 0, 1, 0): cx,
            (0, 0, 0, 1): cs,
            (2, 0, 0, 0): cx.d_xi(),
            (1, 1, 0, 0): cx.d_sigma() * 2.0,
            (0, 2, 0, 0): cs.d_sigma(),
        },
    )
    return d1, d2


# Charts

@dataclass(frozen=True, eq=False)
class ChartExpansion:
    """Coordinate functions as series in the local parameter vanishing on the divisor"""
    family: Family
    divisor: Divisor
    exponents: Tuple[int, ...]
    branch: int
    base: Optional[complex]
    parameter: str
    coordinates: Dict[str, LaurentSeries]
    truncation: int
    _jets: Dict[str, Tuple[JetPolynomial, JetPolynomial]] = field(default_factory=dict, repr=False)

    @property
    def is_surface(self) -> bool:
        return self.family in SURFACE_FAMILIES

    @property
    def generators(self) -> Tuple[str, ...]:
        if self.is_surface:
            return SURFACE_GENERATORS
        return (f"d{self.parameter}", f"d2{self.parameter}")

    @property
    def log_generators(self) -> Tuple[str, ...]:
        if self.is_surface:
            return SURFACE_LOG_GENERATORS
        return (f"dlog{self.parameter}", f"d2log{self.parameter}")

    @property
    def depth(self) -> int:
        return 2 if self.is_surface else 0

    @property
    def weights(self) -> Tuple[int, ...]:
        """Exponent attached to each of x, y[, z]"""
        if self.family is Family.C_N:
            return (self.exponents[0],) * 2
        if self.family is Family.S_N:
            return (self.exponents[0],) * 3
        return tuple(self.exponents)

    def coordinate(self, name: str) -> LaurentSeries:
        try:
            return self.coordinates[name]
        except KeyError:
            raise IncompatibleChart(f"chart {self.family.value}/{self.divisor.value} has no coordinate {name!r}")

    def value(self, name: str) -> JetPolynomial:
        return JetPolynomial.scalar(self.generators, self.coordinate(name))

    def jets(self, name: str) -> Tuple[JetPolynomial, JetPolynomial]:
        hit = self._jets.get(name)
        if hit is None:
            hit = coordinate_jets(self.coordinate(name), self.generators)
            self._jets[name] = hit
        return hit

    def relation_residual(self) -> float:
        """max |x^m + y^n [+ z^l] - 1| relative to the largest term"""
        names = ("x", "y", "z") if self.is_surface else ("x", "y")
        powers = [self.coordinate(nm) ** k for nm, k in zip(names, self.weights)]
        total = powers[0]
        for p in powers[1:]:
            total = total + p
        total = total - 1.0
        scale = max([1.0] + [p.max_abs() for p in powers])
        return total.max_abs() / scale


def _root_of_unity(index: int, n: int, odd: bool = False) -> complex:
    """exp(2 pi i index / n), or exp(i pi (2 index + 1) / n) with odd=True"""
    k = 2 * index + 1 if odd else 2 * index
    return cmath.exp(1j * math.pi * k / n)


def _check_exponents(exponents: Sequence[int], count: int) -> Tuple[int, ...]:
    exps = tuple(int(e) for e in exponents)
    if len(exps) != count or any(e < 1 for e in exps):
        raise ParameterOutOfRange(f"expected {count} positive exponents, got {list(exponents)}")
    return exps


def _check_unit(value: complex, what: str) -> None:
    if abs(value) < DEGENERATE_TOL:
        raise DegenerateBase(f"{what} vanishes at the base point ({value})")


def chart_curve(
    family: Family,
    divisor: Divisor,
    exponents: Sequence[int],
    branch: int = 0,
    truncation: int = DEFAULT_TRUNCATION,
) -> ChartExpansion:
    """Local expansion of a Fermat curve along a point of the given divisor"""
    family = Family(family)
    divisor = Divisor(divisor)
    if family is Family.C_N:
        (n,) = _check_exponents(exponents, 1)
        m = n
    elif family is Family.C_MN:
        m, n = _check_exponents(exponents, 2)
    else:
        raise IncompatibleChart(f"{family.value} is not a curve family")

    L = truncation
    one = LaurentSeries.constant(1.0, L)

    def mono(order: int) -> LaurentSeries:
        return LaurentSeries.monomial(1.0, order, L)

    coords: Dict[str, LaurentSeries]
    if divisor is Divisor.INFINITY:
        if m != n:
            raise SingularPoint(f"C_{{{m},{n}}} meets infinity only at the singular point [0:1:0]; use puiseux_branch")
        eta = _root_of_unity(branch, n, odd=True)
        x = mono(-1)
        y = (one - mono(n)).nth_root(n, 0) * mono(-1) * eta
        coords = {"x": x, "y": y}
        parameter = "tau"
    elif divisor is Divisor.V0 and family is Family.C_N:
        nu = _root_of_unity(branch, n, odd=True)
        v = mono(1)
        u = (one - mono(n)).nth_root(n, 0) * nu
        coords = {"u": u, "v": v, "x": u / v, "y": v.inverse()}
        parameter = "v"
    elif divisor is Divisor.Y0 and family is Family.C_N:
        mu = _root_of_unity(branch, n)
        u = mono(-1)
        v = (one + mono(n)).nth_root(n, 0) * mono(-1) * mu
        coords = {"u": u, "v": v, "x": u / v, "y": v.inverse()}
        parameter = "s"
    elif divisor is Divisor.X0:
        mu = _root_of_unity(branch, n)
        x = mono(1)
        y = (one - mono(m)).nth_root(n, 0) * mu
        coords = {"x": x, "y": y}
        parameter = "sigma"
    elif divisor is Divisor.Y0:
        mu = _root_of_unity(branch, m)
        y = mono(1)
        x = (one - mono(n)).nth_root(m, 0) * mu
        coords = {"x": x, "y": y}
        parameter = "sigma"
    else:
        raise IncompatibleChart(f"no {divisor.value} chart on {family.value}")

    if family is Family.C_N and "u" not in coords:
        yinv = coords["y"].inverse()
        coords["u"] = coords["x"] * yinv
        coords["v"] = yinv
    exps = (n,) if family is Family.C_N else (m, n)
    return ChartExpansion(family, divisor, exps, branch, None, parameter, coords, L)


def chart_surface(
    family: Family,
    divisor: Divisor,
    base: complex,
    exponents: Sequence[int],
    branch: int = 0,
    truncation: int = DEFAULT_TRUNCATION,
) -> ChartExpansion:
    """
    Expansion of a Fermat surface near a generic point of a divisor.
    xi = base + eps runs along the divisor, sigma vanishes on it.
    """
    family = Family(family)
    divisor = Divisor(divisor)
    if family is Family.S_N:
        (n,) = _check_exponents(exponents, 1)
        m = l = n
    elif family is Family.S_MNL:
        m, n, l = _check_exponents(exponents, 3)
    else:
        raise IncompatibleChart(f"{family.value} is not a surface family")

    L = truncation
    base = complex(base)
    xi = LaurentSeries.base_coordinate(base, L, 2)
    sigma = LaurentSeries.monomial(1.0, 1, L, 2)
    one = LaurentSeries.constant(1.0, L, 2)
    _check_unit(base, "the base coordinate xi_0")

    if divisor is Divisor.W0:
        if family is Family.S_MNL:
            raise SingularPoint("the infinity locus of S_{m,n,l} lies in the singular set")
        _check_unit(1.0 + base ** n, "1 + xi_0^n")
        zeta = (sigma ** n - one - xi ** n).nth_root(n, branch)
        sinv = sigma.inverse()
        coords = {"x": sinv, "y": xi * sinv, "z": zeta * sinv}
    elif divisor is Divisor.X0:
        _check_unit(1.0 - base ** n, "1 - xi_0^n")
        coords = {"x": sigma, "y": xi, "z": (one - sigma ** m - xi ** n).nth_root(l, branch)}
    elif divisor is Divisor.Y0:
        _check_unit(1.0 - base ** m, "1 - xi_0^m")
        coords = {"x": xi, "y": sigma, "z": (one - xi ** m - sigma ** n).nth_root(l, branch)}
    elif divisor is Divisor.Z0:
        _check_unit(1.0 - base ** m, "1 - xi_0^m")
        coords = {"x": xi, "y": (one - xi ** m - sigma ** l).nth_root(n, branch), "z": sigma}
    else:
        raise IncompatibleChart(f"no {divisor.value} chart on {family.value}")

    zinv = coords["z"].inverse()
    coords["u"] = coords["x"] * zinv
    coords["v"] = coords["y"] * zinv
    coords["w"] = zinv
    exps = (n,) if family is Family.S_N else (m, n, l)
    return ChartExpansion(family, divisor, exps, branch, base, "sigma", coords, L)


@dataclass(frozen=True, eq=False)
class PuiseuxGerm:
    """
    Branch of u^m + w^(m-n) - w^m = 0 at the origin, the chart Y = 1 of
    C_{m,n} around [0:1:0]: u = s^q, w = s^(m/g) c(s), q = (m - n)/g.
    """
    m: int
    n: int
    gcd: int
    ramification: int
    epsilon: complex
    u: LaurentSeries
    w: LaurentSeries
    truncation: int
    branch: int = 0

    def residual(self) -> float:
        w = self.w
        total = self.u ** self.m + w ** (self.m - self.n) - w ** self.m
        scale = max(1.0, (w ** (self.m - self.n)).max_abs())
        return total.max_abs() / scale

    def chart(self) -> ChartExpansion:
        winv = self.w.inverse()
        coords = {"u": self.u, "w": self.w, "x": self.u * winv, "y": winv}
        return ChartExpansion(
            Family.C_MN, Divisor.SINGULAR, (self.m, self.n), self.branch, None, "s", coords, self.truncation
        )


def puiseux_branch(m: int, n: int, truncation: int = DEFAULT_TRUNCATION, branch: int = 0) -> PuiseuxGerm:
    """Fixed-point solve of c = eps (1 - s^(bn) c^n)^(-1/(m-n)), eps^(m-n) = -1"""
    if not (m > n >= 1):
        raise ParameterOutOfRange(f"Puiseux branch needs m > n >= 1, got ({m}, {n})")
    g = math.gcd(m, m - n)
    q = (m - n) // g
    b = m // g
    L = max(truncation, m * n // g + PUISEUX_MARGIN)
    eps = _root_of_unity(branch, m - n, odd=True)

    one = LaurentSeries.constant(1.0, L)
    shift = LaurentSeries.monomial(1.0, b * n, L)
    c = LaurentSeries.constant(eps, L)
    for _ in range(math.ceil(L / (b * n)) + 2):
        c = (one - shift * c ** n).power(Fraction(-1, m - n)).scale(eps)
    u = LaurentSeries.monomial(1.0, q, L)
    w = LaurentSeries.monomial(1.0, b, L) * c
    logger.debug(f"Puiseux branch ({m},{n}): g={g}, q={q}, truncation={L}")
    return PuiseuxGerm(m, n, g, q, eps, u, w, L, branch)

# Jet differentials

@dataclass(frozen=True)
class Representation:
    """One member of a Cramer chain: numerator / denominator"""
    label: str
    build: Callable[[], JetPolynomial]
    denominator: Optional[LaurentSeries] = None

    def value(self) -> JetPolynomial:
        numerator = self.build()
        if self.denominator is None:
            return numerator
        return numerator / self.denominator


@dataclass(frozen=True)
class JetForm:
    jd: JetId
    representations: List[Representation]
    prefactor: Optional[LaurentSeries] = None

    @property
    def default(self) -> int:
        """Quotient whose denominator has the lowest order, first on ties"""
        best, best_order = len(self.representations) - 1, None
        for index, rep in enumerate(self.representations):
            if rep.denominator is None:
                continue
            order = rep.denominator.order()
            if order is not None and (best_order is None or order < best_order):
                best, best_order = index, order
        return best

    def value(self, index: Optional[int] = None) -> JetPolynomial:
        index = self.default if index is None else index
        if not 0 <= index < len(self.representations):
            raise ParameterOutOfRange(f"{self.jd.value} has no representation {index}")
        out = self.representations[index].value()
        return out * self.prefactor if self.prefactor is not None else out


def _weighted_pair(chart: ChartExpansion, name: str, k: int) -> Tuple[JetPolynomial, JetPolynomial]:
    d1, d2 = chart.jets(name)
    return d1, weighted_second(chart.coordinate(name), d1, d2, k)


def _curve_chain(
    chart: ChartExpansion,
    names: Tuple[str, str],
    powers: Tuple[int, int],
    factors: Tuple[int, int],
    sign: int,
    labels: Tuple[str, str, str],
) -> List[Representation]:
    """
    dB/(fa A^(pa-1)) = sign dA/(fb B^(pb-1)) and the determinant
    -sign (fb A dB - fa B dA)/(fa fb) of the same chain
    """
    a, b = names
    (pa, pb), (fa, fb) = powers, factors
    dA, _ = chart.jets(a)
    dB, _ = chart.jets(b)

    def determinant() -> JetPolynomial:
        return (chart.value(a) * dB * float(fb) - chart.value(b) * dA * float(fa)) * (-sign / (fa * fb))

    return [
        Representation(labels[0], lambda: dB, chart.coordinate(a) ** (pa - 1) * float(fa)),
        Representation(labels[1], lambda: dA * float(sign), chart.coordinate(b) ** (pb - 1) * float(fb)),
        Representation(labels[2], determinant),
    ]


def _surface_quotients(
    chart: ChartExpansion, names: Tuple[str, str, str], weights: Tuple[int, int, int], scaled: bool, sign: int = 1
) -> List[Representation]:
    """
    Quotients |dB dC; DB DC| / (wa A^(wa-1)) for cyclic (A, B, C) and the
    3x3 determinant with rows (A, B, C), (wa dA, ...), (wa DA, ...).
    sign = -1 takes the (C, B), (A, C), (A, B) chain of u^n + v^n + 1 = w^n.
    """
    pairs = {nm: _weighted_pair(chart, nm, k) for nm, k in zip(names, weights)}
    factors = weights if scaled else (1, 1, 1)
    a, b, c = names

    def block(p: str, q: str) -> JetPolynomial:
        dp, Dp = pairs[p]
        dq, Dq = pairs[q]
        return det2(dp, dq, Dp, Dq)

    def den(nm: str, k: int, f: int) -> LaurentSeries:
        return chart.coordinate(nm) ** (k - 1) * float(f)

    if sign > 0:
        chain = [(b, c), (c, a), (a, b)]
    else:
        chain = [(c, b), (a, c), (a, b)]
    reps = [
        Representation(f"|d{p} d{q}; D{p} D{q}|/{nm}^{k - 1}", (lambda p=p, q=q: block(p, q)), den(nm, k, f))
        for (p, q), nm, k, f in zip(chain, names, weights, factors)
    ]

    def determinant() -> JetPolynomial:
        rows = []
        for nm, f in zip(names, factors):
            d1, D2 = pairs[nm]
            rows.append((chart.value(nm), d1 * float(f), D2 * float(f)))
        (x, dx, Dx), (y, dy, Dy), (z, dz, Dz) = rows
        total = x * det2(dy, dz, Dy, Dz) - y * det2(dx, dz, Dx, Dz) + z * det2(dx, dy, Dx, Dy)
        norm = float(np.prod(factors))
        return total * (1.0 / norm)

    reps.append(Representation(f"det3({a},{b},{c})", determinant))
    return reps


def jet_form(jd: JetId, chart: ChartExpansion) -> JetForm:
    """Every Cramer representation of jd written in the chart coordinates"""
    jd = JetId(jd)
    if chart.family not in JET_FAMILIES[jd]:
        raise IncompatibleChart(f"{jd.value} is not defined on {chart.family.value}")
    weights = chart.weights

    if jd is JetId.PHI_CURVE:
        n = weights[1]
        return JetForm(jd, _curve_chain(
            chart, ("x", "y"), (n, n), (1, 1), -1, ("dy/x^(n-1)", "-dx/y^(n-1)", "x dy - y dx")
        ))
    if jd is JetId.PHI1_GEN:
        m, n = weights
        return JetForm(jd, _curve_chain(
            chart, ("x", "y"), (m, n), (m, n), -1, ("dy/(m x^(m-1))", "-dx/(n y^(n-1))", "(n x dy - m y dx)/(mn)")
        ))
    if jd in (JetId.PSI_CURVE, JetId.ETA_CURVE):
        n = weights[0]
        reps = _curve_chain(chart, ("u", "v"), (n, n), (1, 1), 1, ("dv/u^(n-1)", "du/v^(n-1)", "v du - u dv"))
        prefactor = chart.coordinate("v").inverse() if jd is JetId.ETA_CURVE else None
        return JetForm(jd, reps, prefactor)
    if jd in (JetId.PHI_SURF, JetId.OMEGA_SURF, JetId.PHI2_GEN, JetId.OMEGA_GEN):
        scaled = jd in (JetId.PHI2_GEN, JetId.OMEGA_GEN)
        reps = _surface_quotients(chart, ("x", "y", "z"), weights, scaled)
        prefactor = None
        if jd in (JetId.OMEGA_SURF, JetId.OMEGA_GEN):
            prefactor = chart.coordinate("x") * chart.coordinate("y") * chart.coordinate("z")
        return JetForm(jd, reps, prefactor)
    if jd in (JetId.PSI_SURF, JetId.ETA_SURF):
        reps = _surface_quotients(chart, ("u", "v", "w"), weights, False, sign=-1)
        prefactor = None
        if jd is JetId.ETA_SURF:
            prefactor = chart.coordinate("u") * chart.coordinate("v") * chart.coordinate("w").inverse()
        return JetForm(jd, reps, prefactor)
    # BLOCK_SURF
    def block() -> JetPolynomial:
        dx, d2x = chart.jets("x")
        dy, d2y = chart.jets("y")
        return dx * d2y - dy * d2x

    return JetForm(jd, [Representation("dx d2y - dy d2x", block)])


def to_log_basis(jp: JetPolynomial, chart: ChartExpansion) -> JetPolynomial:
    """dsigma -> sigma dlog, d2sigma -> sigma d2log + sigma dlog^2"""
    old, new = chart.generators, chart.log_generators
    length = max((c.length for c in jp.terms.values()), default=chart.truncation)
    unit = LaurentSeries.constant(1.0, length, chart.depth)
    sigma = LaurentSeries.monomial(1.0, 1, length, chart.depth)
    d_old, d2_old = (old[1], old[3]) if chart.is_surface else old
    images = {g_old: JetPolynomial.generator(new, g_new, unit) for g_old, g_new in zip(old, new)}
    dlog = images[d_old]
    images[d_old] = dlog * sigma
    images[d2_old] = (images[d2_old] + dlog * dlog) * sigma
    return jp.substitute(images, new)


def order_entries(jp: JetPolynomial, rtol: float = ORDER_RTOL) -> Tuple[List[OrderEntry], Optional[int]]:
    """
    Per-monomial orders against one scale for the whole polynomial.
    Raises TruncationExhausted when no entry, or not the minimum, is certified.
    """
    scale = max(1.0, jp.max_abs())
    entries: List[OrderEntry] = []
    certified: List[int] = []
    bounds: List[int] = []
    for key in sorted(jp.terms, reverse=True):
        coeff = jp.terms[key]
        order = coeff.order(rtol, scale)
        if order is None:
            entries.append(OrderEntry(monomial=jp.label(key), lower_bound=coeff.prec))
            bounds.append(coeff.prec)
        else:
            entries.append(OrderEntry(monomial=jp.label(key), order=order))
            certified.append(order)
    if not certified:
        raise TruncationExhausted("every coefficient vanishes to the available precision")
    overall = min(certified)
    if bounds and min(bounds) < overall:
        raise TruncationExhausted(f"an entry is only known to order {min(bounds)} below the minimum {overall}")
    return entries, overall


def expand(
    jd: JetId,
    chart: ChartExpansion,
    basis: str = "regular",
    representation: Optional[int] = None,
    rtol: float = ORDER_RTOL,
) -> OrderTable:
    """Order table of jd along the chart divisor"""
    form = jet_form(jd, chart)
    index = form.default if representation is None else representation
    jp = form.value(index)
    if basis == "log":
        jp = to_log_basis(jp, chart)
    elif basis != "regular":
        raise ParameterOutOfRange(f"unknown basis {basis!r}")
    entries, overall = order_entries(jp, rtol)
    return OrderTable(
        jd=form.jd.value,
        family=chart.family.value,
        exponents=list(chart.exponents),
        divisor=chart.divisor.value,
        basis=basis,
        truncation=chart.truncation,
        entries=entries,
        overall_order=overall,
        certified=True,
        representation=index,
        representation_label=form.representations[index].label,
    )


def representation_consistency(jd: JetId, chart: ChartExpansion) -> float:
    """Largest coefficientwise deviation between representations, relative to the default one"""
    form = jet_form(jd, chart)
    values = [rep.value() for rep in form.representations]
    ref = values[form.default]
    scale = max(1.0, ref.max_abs())
    worst = 0.0
    for other in values:
        for key in set(ref.terms) | set(other.terms):
            a, b = ref.terms.get(key), other.terms.get(key)
            if a is None:
                diff = b
            elif b is None:
                diff = a
            else:
                diff = a - b
            worst = max(worst, diff.max_abs() / scale)
    return worst


def _majorant(s: LaurentSeries) -> LaurentSeries:
    return LaurentSeries(s.lo, np.abs(s.coeffs).astype(complex), s.tdeg)


def lift_to_surface(u: LaurentSeries, v: LaurentSeries, n: int) -> Tuple[LaurentSeries, LaurentSeries, LaurentSeries, float]:
    """
    Lift a germ of the affine coordinates (u, v) = (x/z, y/z) to x^n + y^n + z^n = 1
    through w^n = 1 + u^n + v^n, w = 1/z. The drift measures how far the lift misses
    the surface and how far u, v read back from x, y, z miss the input, both relative
    to coefficient majorants.
    """
    z = (u ** n + v ** n + 1.0).nth_root(n, 0).inverse()
    x, y = u * z, v * z
    on_surface = (x ** n + y ** n + z ** n - 1.0).max_abs()
    bound = (_majorant(x) ** n + _majorant(y) ** n + _majorant(z) ** n).max_abs()
    drift = on_surface / max(1.0, bound)
    zinv = z.inverse()
    for coord, original in ((x, u), (y, v)):
        scale = (_majorant(coord) * _majorant(zinv)).max_abs()
        drift = max(drift, (coord * zinv - original).max_abs() / max(1.0, scale))
    return x, y, z, drift


def annihilation_check(
    relation: str,
    n: int,
    a: complex = 0.7 + 0.1j,
    b: complex = -0.4 + 0.5j,
    seed: int = 0,
    truncation: int = DEFAULT_TRUNCATION,
) -> float:
    """
    Pull the matching determinant back along a germ t -> (p(t), q(t)) inside the
    relation's solution family and return its largest coefficient relative to
    the two products it is the difference of.
    """
    if relation not in ANNIHILATION_RELATIONS:
        raise ParameterOutOfRange(f"unknown relation {relation!r}; expected one of {ANNIHILATION_RELATIONS}")
    if n < 1:
        raise ParameterOutOfRange("exponent must be positive")
    rng = np.random.default_rng(seed)

    def random_complex(lo: float, hi: float) -> complex:
        return complex(rng.uniform(lo, hi) * cmath.exp(2j * math.pi * rng.uniform()))

    L = truncation
    p = LaurentSeries.from_coefficients([random_complex(0.3, 0.7), 1.0, random_complex(0.1, 0.4)], length=L)
    if relation in ("y=ax", "v=au"):
        q = p * complex(a)
    elif relation == "generic":
        q = LaurentSeries.from_coefficients([random_complex(0.3, 0.7) for _ in range(4)], length=L)
    else:
        q = (p ** n * complex(a) + complex(b)).nth_root(n, 0)

    gens = ("dt", "d2t")
    dp, d2p = coordinate_jets(p, gens)
    dq, d2q = coordinate_jets(q, gens)
    if relation in ("y=ax", "v=au"):
        left = JetPolynomial.scalar(gens, p) * dq
        right = JetPolynomial.scalar(gens, q) * dp
    else:
        left = dp * weighted_second(q, dq, d2q, n)
        right = dq * weighted_second(p, dp, d2p, n)
    residual = (left - right).max_abs()
    scale = max(1.0, left.max_abs(), right.max_abs())
    logger.debug(f"annihilation {relation} n={n}: |block|={residual:.3e}, scale={scale:.3e}")
    if relation.startswith("v"):
        # u, v are affine coordinates of S_n; the germ must lift to the surface
        _, _, _, drift = lift_to_surface(p, q, n)
        logger.debug(f"annihilation {relation} n={n}: surface lift drift {drift:.3e}")
        return max(residual / scale, drift)
    return residual / scale


# Threshold sweeps

def sweep_exponents(family: Family, exponent_range: Tuple[int, int]) -> List[Tuple[int, ...]]:
    """Exponent tuples of a sweep; multi-exponent families are ordered m >= n [>= l]"""
    lo, hi = exponent_range
    if lo < 1 or hi < lo:
        raise ParameterOutOfRange(f"invalid exponent range {exponent_range}")
    span = range(lo, hi + 1)
    family = Family(family)
    if family in (Family.C_N, Family.S_N):
        return [(n,) for n in span]
    if family is Family.C_MN:
        return [(m, n) for m in span for n in span if n <= m]
    return [(m, n, l) for m in span for n in span for l in span if l <= n <= m]


class JetAnalyzer:
    """
    Order tables and threshold sweeps
    Measurements are exact integers; a generic base point and branch are drawn per seed
    """

    def __init__(self, truncation: int = DEFAULT_TRUNCATION, rtol: float = ORDER_RTOL):
        self.truncation = truncation
        self.rtol = rtol
        self.verdicts = VerdictEngine()
        logger.info("[INFO] JetAnalyzer initialized")

    def generic_point(self, seed: int, exponents: Sequence[int]) -> Tuple[complex, int]:
        rng = np.random.default_rng([seed, *exponents])
        modulus = rng.uniform(*BASE_MODULUS)
        base = complex(modulus * cmath.exp(2j * math.pi * rng.uniform()))
        branch = int(rng.integers(max(exponents)))
        return base, branch

    def _order(self, jd: JetId, chart: ChartExpansion, basis: str, tables: Optional[List[OrderTable]]) -> int:
        table = expand(jd, chart, basis, rtol=self.rtol)
        if tables is not None:
            tables.append(table)
        return table.overall_order

    def measure(
        self, family: Family, exponents: Tuple[int, ...], seed: int = 0, tables: Optional[List[OrderTable]] = None
    ) -> Dict[str, Optional[int]]:
        """Orders entering the threshold predicates of one exponent tuple"""
        family = Family(family)
        base, branch = self.generic_point(seed, exponents)
        T = self.truncation
        if family is Family.C_N:
            n = exponents[0]
            return {
                "phi_infinity": self._order(JetId.PHI_CURVE, chart_curve(family, Divisor.INFINITY, exponents, branch, T), "regular", tables),
                "eta_v0_log": self._order(JetId.ETA_CURVE, chart_curve(family, Divisor.V0, exponents, branch, T), "log", tables),
                "eta_y0": self._order(JetId.ETA_CURVE, chart_curve(family, Divisor.Y0, exponents, branch % n, T), "regular", tables),
            }
        if family is Family.S_N:
            w0 = chart_surface(family, Divisor.W0, base, exponents, branch, T)
            z0 = chart_surface(family, Divisor.Z0, base, exponents, branch, T)
            x0 = chart_surface(family, Divisor.X0, base, exponents, branch, T)
            return {
                "omega_w0": self._order(JetId.OMEGA_SURF, w0, "regular", tables),
                "block_w0": self._order(JetId.BLOCK_SURF, w0, "regular", tables),
                "eta_w0_log": self._order(JetId.ETA_SURF, w0, "log", tables),
                "eta_z0": self._order(JetId.ETA_SURF, z0, "regular", tables),
                "omega_x0": self._order(JetId.OMEGA_SURF, x0, "regular", tables),
            }
        if family is Family.C_MN:
            m, n = exponents
            if m == n:
                top = chart_curve(family, Divisor.INFINITY, exponents, branch, T)
            else:
                top = puiseux_branch(m, n, T, branch % (m - n)).chart()
            return {
                "phi1_branch": self._order(JetId.PHI1_GEN, top, "regular", tables),
                "phi1_x0": self._order(JetId.PHI1_GEN, chart_curve(family, Divisor.X0, exponents, branch, T), "regular", tables),
                "phi1_y0": self._order(JetId.PHI1_GEN, chart_curve(family, Divisor.Y0, exponents, branch, T), "regular", tables),
            }
        return {
            f"omega_{d.value.lower()}": self._order(
                JetId.OMEGA_GEN, chart_surface(family, d, base, exponents, branch, T), "regular", tables
            )
            for d in (Divisor.X0, Divisor.Y0, Divisor.Z0)
        }

    def _row(self, family: Family, exponents: Tuple[int, ...], seeds: Sequence[int], include_tables: bool) -> ThresholdRow:
        tables: Optional[List[OrderTable]] = [] if include_tables else None
        first = self.measure(family, exponents, seeds[0], tables)
        agree = all(self.measure(family, exponents, s) == first for s in seeds[1:])
        if not agree:
            logger.warning(f"{family.value} {exponents}: measurements depend on the base point seed")
        return ThresholdRow(
            exponents=list(exponents), measurements=first, tables=tables or [], seed_agreement=agree
        )

    def threshold_verify(
        self,
        family: Family,
        exponent_range: Optional[Tuple[int, int]] = None,
        exponents: Optional[Iterable[Sequence[int]]] = None,
        seeds: Sequence[int] = (0, 1, 2),
        include_tables: bool = False,
    ) -> ThresholdReport:
        """Measure every exponent tuple and judge the threshold predicates"""
        family = Family(family)
        if exponents is not None:
            sweep = [tuple(int(e) for e in ex) for ex in exponents]
        elif exponent_range is not None:
            sweep = sweep_exponents(family, exponent_range)
        else:
            raise ParameterOutOfRange("threshold_verify needs an exponent range or explicit exponents")
        if not seeds:
            raise ParameterOutOfRange("at least one seed is required")
        logger.info(f"Threshold sweep {family.value}: {len(sweep)} exponent tuples, seeds {list(seeds)}")

        with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
            rows = list(pool.map(lambda ex: self._row(family, ex, seeds, include_tables), sweep))

        report = ThresholdReport(
            family=family.value, truncation=self.truncation, seeds=list(seeds), rows=rows
        )
        report.verdicts = self.verdicts.judge_thresholds(report)
        passed = sum(v.passed for v in report.verdicts)
        logger.info(f"Threshold sweep {family.value}: {passed}/{len(report.verdicts)} predicates hold")
        return report
