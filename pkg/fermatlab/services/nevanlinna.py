"""
Nevanlinna Analyzer - characteristic, proximity and counting functions
Green-kernel quadratures on centered discs of the complex plane and the Poincare disc
"""
import cmath
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from fermatlab.models import (
    ComplexValue,
    DefectEstimate,
    LemmaReport,
    LogDerivReport,
    LogDerivRow,
    NevanlinnaReport,
    NevanlinnaRow,
    QuadratureConfig,
)
from fermatlab.services.expr_core import (
    BRANCH,
    POLE,
    AnalyticExpr,
    BranchViolationError,
    FermatLabError,
    PoleAtBasePoint,
    SampleAtPole,
    Z,
    as_expr,
    compose,
    evaluate_many,
    exp,
    has_pole_nodes,
    taylor_jet,
    taylor_jets,
)
from fermatlab.utils.helpers import log_plus
from fermatlab.utils.sexpr import to_sexpr

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (2.0, 4.0, 6.0, 8.0)
POWER_SCHEDULE = (8.0, 12.0, 16.0, 20.0)
SMALL_FUNCTION_SCHEDULE = (80.0, 90.0, 100.0, 110.0)
SYZYGY_TOL = 1e-10
RANK_RTOL = 1e-9
CLAMP_SLACK = 1e-3
ORIGIN_TOL = 1e-12
BOUNDARY_TOL = 1e-6
CELL_TOL = 1e-8
NEWTON_CELL = 1e-2
RECENTER = 0.25
SPLIT_RATIOS = (0.5, 0.5137, 0.4871, 0.5311)


class OutsideDisc(FermatLabError):
    """Point lies outside the geodesic disc"""
    pass


class QuadratureBudgetExceeded(FermatLabError):
    """Quadrature did not reach its tolerance within the evaluation budget"""
    pass


class BoundaryZero(FermatLabError):
    """An a-point sits on the disc boundary; nudge the radius"""
    pass


class APointAtOrigin(FermatLabError):
    """An a-point sits at the base point, where the Green kernel has its pole"""
    pass


class PoleOnBoundary(FermatLabError):
    """A pole or a-point lies on the integration circle"""
    pass


class NotASyzygy(FermatLabError):
    """The functions do not sum to zero"""
    pass


class LinearlyDependent(FermatLabError):
    """No independent sub-family carries the relation"""
    pass


class _ContourHit(Exception):
    pass


# Surfaces

class SurfaceKind(str, Enum):
    COMPLEX_PLANE = "C"
    POINCARE_DISC = "D"


@dataclass(frozen=True)
class BaseSurface:
    """Simply connected cover with its complete metric; base point o = 0"""
    kind: SurfaceKind = SurfaceKind.COMPLEX_PLANE

    def radius_to_euclidean(self, r: float) -> float:
        if r <= 0:
            raise OutsideDisc(f"radius must be positive, got {r}")
        return r

    def kappa(self, r: float) -> float:
        return 0.0

    def curvature(self, z) -> np.ndarray:
        return np.zeros_like(np.abs(np.asarray(z, dtype=complex)))

    def metric_density(self, z) -> np.ndarray:
        """ds^2 = density |dz|^2"""
        return np.ones_like(np.abs(np.asarray(z, dtype=complex)))


@dataclass(frozen=True)
class ComplexPlane(BaseSurface):
    kind: SurfaceKind = SurfaceKind.COMPLEX_PLANE


@dataclass(frozen=True)
class PoincareDisc(BaseSurface):
    """ds = 2|dz|/(1 - |z|^2), curvature -1"""
    kind: SurfaceKind = SurfaceKind.POINCARE_DISC

    def radius_to_euclidean(self, r: float) -> float:
        if r <= 0:
            raise OutsideDisc(f"radius must be positive, got {r}")
        return math.tanh(r / 2.0)

    def kappa(self, r: float) -> float:
        return -1.0

    def curvature(self, z) -> np.ndarray:
        return -np.ones_like(np.abs(np.asarray(z, dtype=complex)))

    def metric_density(self, z) -> np.ndarray:
        rho2 = np.abs(np.asarray(z, dtype=complex)) ** 2
        if np.any(rho2 >= 1.0):
            raise OutsideDisc("metric density is only defined inside the unit disc")
        return 4.0 / (1.0 - rho2) ** 2


def surface_for(name: str) -> BaseSurface:
    if name in ("C", SurfaceKind.COMPLEX_PLANE):
        return ComplexPlane()
    if name in ("D", SurfaceKind.POINCARE_DISC):
        return PoincareDisc()
    raise ValueError(f"unknown surface {name!r}; expected 'C' or 'D'")


def green(surface: BaseSurface, r: float, z: complex) -> float:
    """g_r(0, z) = (1/pi) log(R/|z|) with R the Euclidean radius of the geodesic disc"""
    R = surface.radius_to_euclidean(r)
    rho = abs(z)
    if rho > R * (1 + 1e-12):
        raise OutsideDisc(f"|z| = {rho} exceeds the disc radius {R}")
    if rho == 0.0:
        raise PoleAtBasePoint("the Green function is singular at the base point z = 0")
    return max(0.0, math.log(R / rho) / math.pi)


# a-point lists

@dataclass(frozen=True)
class ZeroPoleList:
    points: Tuple[complex, ...] = ()
    multiplicities: Tuple[int, ...] = ()
    provenance: str = "user-supplied"

    def __post_init__(self):
        if len(self.points) != len(self.multiplicities):
            raise ValueError("every point needs a multiplicity")
        if any(int(m) < 1 for m in self.multiplicities):
            raise ValueError("multiplicities must be at least 1")

    @classmethod
    def of(cls, points: Sequence[complex], multiplicities: Optional[Sequence[int]] = None,
           provenance: str = "user-supplied") -> "ZeroPoleList":
        points = tuple(complex(p) for p in points)
        mults = tuple(int(m) for m in multiplicities) if multiplicities is not None else (1,) * len(points)
        return cls(points, mults, provenance)

    def scaled(self, factor: int) -> "ZeroPoleList":
        """Same points with multiplicities times factor (zeros of f^factor)"""
        return ZeroPoleList(self.points, tuple(m * factor for m in self.multiplicities), self.provenance)

    def __len__(self) -> int:
        return len(self.points)


# Numerics

def _log1p_abs2(values: np.ndarray) -> np.ndarray:
    """log(1 + |v|^2) without overflow"""
    a = np.abs(values)
    out = np.empty_like(a)
    big = a > 1.0
    out[~big] = np.log1p(a[~big] ** 2)
    out[big] = 2.0 * np.log(a[big]) + np.log1p(a[big] ** -2.0)
    return out


def _log_plus(values: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.log(np.maximum(values, 1e-300)))


def _spherical_density(f0: np.ndarray, f1: np.ndarray) -> np.ndarray:
    """|f'|^2 / (1 + |f|^2)^2, evaluated through 1/f where |f| > 1"""
    a = np.abs(f0)
    d = np.abs(f1)
    out = np.empty_like(a)
    small = a <= 1.0
    out[small] = d[small] ** 2 / (1.0 + a[small] ** 2) ** 2
    inv = 1.0 / a[~small]
    out[~small] = (d[~small] * inv * inv) ** 2 / (1.0 + inv * inv) ** 2
    return out


def _multi_density(values: np.ndarray, derivs: np.ndarray) -> np.ndarray:
    """
    (1/4) Delta log(h) with h = 1 + sum |f_j|^2, written as
    ([sum |f_j'|^2] + sum_{i<j} |f_i f_j' - f_j f_i'|^2) / h^2 and rescaled by max |f_j|
    """
    s = np.maximum(1.0, np.max(np.abs(values), axis=0))
    v = values / s
    d = derivs / s
    pairs = np.zeros(s.shape)
    for i, j in itertools.combinations(range(values.shape[0]), 2):
        pairs += np.abs(v[i] * d[j] - v[j] * d[i]) ** 2
    S = np.sum(np.abs(v) ** 2, axis=0)
    inv = 1.0 / s ** 2
    return (np.sum(np.abs(d) ** 2, axis=0) * inv + pairs) / (inv + S) ** 2


@dataclass
class _Budget:
    limit: int
    used: int = 0

    def spend(self, count: int, what: str) -> None:
        self.used += count
        if self.used > self.limit:
            raise QuadratureBudgetExceeded(f"{what}: {self.used} evaluations exceed the budget {self.limit}")


class NevanlinnaAnalyzer:
    """Value-distribution quantities of analytic expressions on centered discs"""

    def __init__(self, config: Optional[QuadratureConfig] = None):
        self.config = config or QuadratureConfig()
        logger.info("[INFO] NevanlinnaAnalyzer initialized")

    # Quadrature

    def green_integral(self, density: Callable[[np.ndarray], np.ndarray], surface: BaseSurface, r: float) -> float:
        """
        int_{|z|<R} g_r(0, z) density(z) dA with rho = R t^2, Gauss-Legendre in t
        and the trapezoid rule in theta, doubled until two levels agree
        """
        cfg = self.config
        R = surface.radius_to_euclidean(r)
        budget = _Budget(cfg.max_evaluations)
        nt, nth = 32, 64
        previous = None
        while True:
            budget.spend(nt * nth, "area quadrature")
            t, wt = roots_legendre(nt)
            t = 0.5 * (t + 1.0)
            wt = 0.5 * wt
            theta = 2.0 * math.pi * (np.arange(nth) + 0.5) / nth
            rho = R * t * t
            zs = (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
            ring = density(zs).reshape(nt, nth).mean(axis=1) * 2.0 * math.pi
            # (1/pi) log(R/rho) rho drho = (1/pi)(-2 log t)(R t^2)(2 R t dt)
            total = float(np.sum(wt * (-2.0 * np.log(t)) * 2.0 * R * R * t ** 3 * ring) / math.pi)
            if previous is not None and abs(total - previous) <= cfg.rtol * abs(total) + cfg.atol:
                logger.debug(f"area quadrature r={r}: {total:.10g} after {budget.used} evaluations")
                return total
            previous = total
            nt, nth = 2 * nt, 2 * nth

    def circle_mean(self, values: Callable[[np.ndarray], np.ndarray], R: float) -> float:
        """Mean over |z| = R, uniform angular measure, doubled until converged"""
        cfg = self.config
        n = cfg.boundary_points
        previous = None
        while True:
            theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
            mean = float(np.mean(values(R * np.exp(1j * theta))))
            if previous is not None and abs(mean - previous) <= cfg.rtol * abs(mean) + cfg.atol:
                return mean
            if 2 * n > cfg.max_boundary_points:
                raise QuadratureBudgetExceeded(f"boundary mean on |z|={R} did not converge with {n} points")
            previous = mean
            n *= 2

    def _boundary_values(self, expr: AnalyticExpr, zs: np.ndarray) -> np.ndarray:
        batch = evaluate_many(expr, zs)
        if np.any(batch.status == POLE):
            raise PoleOnBoundary(f"pole of {to_sexpr(expr)} on the circle |z| = {abs(zs[0]):.6g}")
        if np.any(batch.status == BRANCH):
            raise BranchViolationError(f"branch cut crosses the circle |z| = {abs(zs[0]):.6g}")
        return batch.values

    # Characteristic functions

    def spherical_density_sample(self, f: AnalyticExpr, zs, surface: BaseSurface) -> Tuple[np.ndarray, np.ndarray]:
        """Delta_S log(1 + |f|^2) and dV/dA at the sample points; their product is metric-free"""
        coeffs, status = taylor_jets(f, zs, 1)
        density = 4.0 * _spherical_density(coeffs[0], coeffs[1])
        density[status != 0] = 0.0
        volume = surface.metric_density(zs)
        return density / volume, volume

    def char_T(self, f: AnalyticExpr, surface: BaseSurface, r: float,
               method: Optional[str] = None, poles: Optional[ZeroPoleList] = None) -> float:
        """T(r, f) = (1/4) int g_r Delta_S log(1 + |f|^2) dV"""
        f = as_expr(f)
        method = method or self.config.characteristic_method
        if method == "boundary" and (poles is not None or not has_pole_nodes(f)):
            return self._char_T_boundary(f, surface, r, poles)

        skipped = [0]

        def density(zs: np.ndarray) -> np.ndarray:
            coeffs, status = taylor_jets(f, zs, 1)
            out = _spherical_density(coeffs[0], coeffs[1])
            bad = status != 0
            if np.any(bad):
                skipped[0] += int(bad.sum())
                out[bad] = 0.0
            return out

        value = self.green_integral(density, surface, r)
        if skipped[0]:
            logger.warning(f"char_T r={r}: {skipped[0]} samples on poles or branch cuts skipped")
        return value

    def _char_T_boundary(self, f: AnalyticExpr, surface: BaseSurface, r: float,
                         poles: Optional[ZeroPoleList]) -> float:
        """T = (1/2)[mean log(1+|f|^2) - log(1+|f(0)|^2)] + N(r, f)"""
        R = surface.radius_to_euclidean(r)
        at_origin = evaluate_many(f, [0j])
        if at_origin.status[0] == POLE:
            raise APointAtOrigin("f has a pole at the base point")
        mean = self.circle_mean(lambda zs: _log1p_abs2(self._boundary_values(f, zs)), R)
        value = 0.5 * (mean - float(_log1p_abs2(at_origin.values)[0]))
        if poles is not None:
            value += self.counting_N(poles, surface, r)
        return value

    def char_multi(self, fs: Sequence[AnalyticExpr], surface: BaseSurface, r: float) -> float:
        """T_{f_1..f_nu}(r) = (1/4) int g_r Delta log(1 + sum |f_j|^2) dV"""
        fs = [as_expr(f) for f in fs]

        def density(zs: np.ndarray) -> np.ndarray:
            values, derivs = [], []
            for f in fs:
                coeffs, status = taylor_jets(f, zs, 1)
                if np.any(status == POLE):
                    hit = zs[np.flatnonzero(status == POLE)[0]]
                    raise SampleAtPole(f"{to_sexpr(f)} has a pole at sample {hit}")
                values.append(coeffs[0])
                derivs.append(coeffs[1])
            return _multi_density(np.array(values), np.array(derivs))

        return self.green_integral(density, surface, r)

    def char_projective(self, components: Sequence[AnalyticExpr], surface: BaseSurface, r: float) -> float:
        """
        Characteristic of the reduced lift [F_0 : ... : F_q] of entire functions,
        (1/2)[mean log sum |F_j|^2 - log sum |F_j(0)|^2] by Green's identity
        """
        comps = [as_expr(c) for c in components]
        R = surface.radius_to_euclidean(r)

        def log_norm(zs: np.ndarray) -> np.ndarray:
            vals = np.array([self._boundary_values(c, zs) for c in comps])
            scale = np.max(np.abs(vals), axis=0)
            if np.any(scale == 0.0):
                raise PoleOnBoundary("the lift vanishes identically at a boundary point")
            return 2.0 * np.log(scale) + np.log(np.sum(np.abs(vals / scale) ** 2, axis=0))

        origin = log_norm(np.array([0j]))[0]
        return 0.5 * (self.circle_mean(log_norm, R) - origin)

    # a-points

    def locate_a_points(self, f: AnalyticExpr, a: complex, surface: BaseSurface, r: float) -> ZeroPoleList:
        """Zeros of f - a in the disc by argument-principle subdivision and Newton polish"""
        R = surface.radius_to_euclidean(r)
        h = as_expr(f) - complex(a)
        shift = complex(0.00731 * R, -0.00419 * R)
        half = R * 1.0137
        for _ in range(8):
            root = (-half + shift.real, half + shift.real, -half + shift.imag, half + shift.imag)
            try:
                stack = [(root, self._winding(h, root))]
                break
            except _ContourHit:
                half *= 1.0213
        else:
            raise BoundaryZero(f"could not place a contour around |z| < {R} free of a-points")

        points: List[complex] = []
        mults: List[int] = []
        while stack:
            cell, w = stack.pop()
            x0, x1, y0, y1 = cell
            size = max(x1 - x0, y1 - y0)
            # below NEWTON_CELL Newton polishing stands in for finer subdivision;
            # a failed or escaping Newton run keeps splitting down to CELL_TOL
            if size <= NEWTON_CELL:
                center = complex((x0 + x1) / 2, (y0 + y1) / 2)
                z = self._newton(h, center, w)
                inside = z is not None and x0 - CELL_TOL <= z.real <= x1 + CELL_TOL \
                    and y0 - CELL_TOL <= z.imag <= y1 + CELL_TOL
                if inside or size <= CELL_TOL:
                    points.append(z if inside else center)
                    mults.append(w)
                    continue
            for ratio in SPLIT_RATIOS:
                children = self._split(cell, ratio)
                try:
                    windings = [self._winding(h, child) for child in children]
                except _ContourHit:
                    continue
                break
            else:
                raise FermatLabError(f"a-point subdivision stalled in cell {cell}")
            if sum(windings) != w:
                logger.debug(f"winding mismatch in cell {cell}: {w} vs {windings}")
            stack.extend((child, cw) for child, cw in zip(children, windings) if cw > 0)

        kept_points, kept_mults = [], []
        for z, mu in zip(points, mults):
            if abs(abs(z) - R) < BOUNDARY_TOL:
                raise BoundaryZero(f"a-point {z} lies on the circle |z| = {R}")
            if abs(z) < R:
                kept_points.append(z)
                kept_mults.append(mu)
        order = sorted(range(len(kept_points)), key=lambda i: (abs(kept_points[i]), cmath.phase(kept_points[i])))
        logger.debug(f"located {len(order)} a-points of value {a} within |z| < {R}")
        return ZeroPoleList(
            tuple(kept_points[i] for i in order), tuple(kept_mults[i] for i in order), "argument-principle"
        )

    @staticmethod
    def _split(cell, ratio: float):
        x0, x1, y0, y1 = cell
        xm = x0 + ratio * (x1 - x0)
        ym = y0 + ratio * (y1 - y0)
        return [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]

    def _winding(self, h: AnalyticExpr, cell) -> int:
        x0, x1, y0, y1 = cell
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        total = 0.0
        for start, end in zip(corners, corners[1:] + corners[:1]):
            total += self._edge_phase(h, start, end)
        return int(round(total / (2.0 * math.pi)))

    @staticmethod
    def _edge_phase(h: AnalyticExpr, start: complex, end: complex, samples: int = 32) -> float:
        while True:
            zs = start + (end - start) * np.linspace(0.0, 1.0, samples + 1)
            batch = evaluate_many(h, zs)
            vals = batch.values
            if np.any(batch.status != 0) or np.any(vals == 0):
                raise _ContourHit()
            steps = np.angle(vals[1:] / vals[:-1])
            if np.max(np.abs(steps)) < math.pi / 4:
                return float(np.sum(steps))
            if samples >= 2 ** 14:
                # the edge runs through or next to an a-point
                raise _ContourHit()
            samples *= 4

    @staticmethod
    def _newton(h: AnalyticExpr, z: complex, multiplicity: int, steps: int = 60) -> Optional[complex]:
        for _ in range(steps):
            coeffs, status = taylor_jets(h, [z], 1)
            if status[0] != 0:
                return None
            if coeffs[1, 0] == 0:
                # exact hit on a multiple root
                return complex(z) if coeffs[0, 0] == 0 else None
            step = multiplicity * coeffs[0, 0] / coeffs[1, 0]
            z = z - step
            if abs(step) <= 1e-14 * max(1.0, abs(z)):
                return complex(z)
        return complex(z)

    # Counting and proximity

    def counting_N(self, points: ZeroPoleList, surface: BaseSurface, r: float,
                   truncation: Optional[int] = None) -> float:
        """N^[k](r) = pi sum min(mu, k) g_r(0, x) over the points inside the disc"""
        R = surface.radius_to_euclidean(r)
        total = 0.0
        for z, mu in zip(points.points, points.multiplicities):
            rho = abs(z)
            if rho < ORIGIN_TOL:
                raise APointAtOrigin("counting function is undefined for a point at the base point")
            if rho >= R:
                continue
            weight = mu if truncation is None else min(mu, truncation)
            total += weight * math.log(R / rho)
        return total

    def proximity_m(self, f: AnalyticExpr, a: Optional[complex], surface: BaseSurface, r: float) -> float:
        """m(r, f) for a = None, m(r, 1/(f - a)) otherwise"""
        R = surface.radius_to_euclidean(r)
        f = as_expr(f)
        if a is None:
            return self.circle_mean(lambda zs: _log_plus(np.abs(self._boundary_values(f, zs))), R)

        def values(zs: np.ndarray) -> np.ndarray:
            diff = np.abs(self._boundary_values(f, zs) - complex(a))
            if np.any(diff == 0.0):
                raise PoleOnBoundary(f"f takes the value {a} on |z| = {R}")
            return _log_plus(1.0 / diff)

        return self.circle_mean(values, R)

    def fmt_residual(self, f: AnalyticExpr, a: complex, surface: BaseSurface, r: float,
                     points: Optional[ZeroPoleList] = None) -> float:
        """|T(r, f) - m(r, 1/(f-a)) - N(r, 1/(f-a))|"""
        points = points if points is not None else self.locate_a_points(f, a, surface, r)
        T = self.char_T(f, surface, r)
        return abs(T - self.proximity_m(f, a, surface, r) - self.counting_N(points, surface, r))

    # Defects

    def defect_estimate(
        self,
        f: AnalyticExpr,
        a: Optional[complex],
        truncation: Optional[int],
        schedule: Sequence[float] = DEFAULT_SCHEDULE,
        surface: Optional[BaseSurface] = None,
        points: Optional[ZeroPoleList] = None,
        poles: Optional[ZeroPoleList] = None,
    ) -> DefectEstimate:
        """1 - max over the schedule of N^[k](r, a)/T(r), clamped to [0, 1] with a flag"""
        surface = surface or ComplexPlane()
        schedule = [float(r) for r in schedule]
        if len(schedule) < 4 or any(b <= s for s, b in zip(schedule, schedule[1:])):
            raise ValueError("defect schedule needs at least 4 increasing radii")
        f = as_expr(f)
        if a is None:
            points = poles if poles is not None else ZeroPoleList()
            if poles is None and has_pole_nodes(f):
                raise ValueError("defect at infinity of a function with poles needs its pole list")
        elif points is None:
            points = self.locate_a_points(f, a, surface, schedule[-1])

        ratios = []
        for r in schedule:
            T = self.char_T(f, surface, r, method=self.config.defect_method, poles=poles)
            N = self.counting_N(points, surface, r, truncation)
            ratios.append(N / T if T > 0 else 0.0)
        raw = 1.0 - max(ratios)
        value = min(1.0, max(0.0, raw))
        clamped = value != raw
        if clamped:
            level = logging.WARNING if abs(value - raw) > CLAMP_SLACK else logging.DEBUG
            logger.log(level, f"defect estimate {raw:.6f} clamped to {value}")
        return DefectEstimate(
            a=None if a is None else ComplexValue.of(a),
            truncation=truncation,
            schedule=schedule,
            ratios=ratios,
            value=value,
            clamped=clamped,
        )

    def power_rule_check(self, f: AnalyticExpr, m: int, schedule: Sequence[float] = POWER_SCHEDULE,
                         surface: Optional[BaseSurface] = None) -> NevanlinnaReport:
        """delta^[1] and delta^[2] of f^m at 0; zeros of f^m are those of f with m-fold multiplicity"""
        surface = surface or ComplexPlane()
        f = as_expr(f)
        zeros = self.locate_a_points(f, 0.0, surface, max(schedule)).scaled(m)
        fm = f ** m
        defects = [self.defect_estimate(fm, 0.0, k, schedule, surface, points=zeros) for k in (1, 2)]
        return NevanlinnaReport(
            function=to_sexpr(fm),
            surface=surface.kind.value,
            a=ComplexValue.of(0.0),
            defects=defects,
            clamp_flags=sum(d.clamped for d in defects),
            check="power",
            power=m,
        )

    def small_function_check(
        self,
        alphas: Sequence[AnalyticExpr],
        fs: Sequence[AnalyticExpr],
        poles: Optional[Sequence[ZeroPoleList]] = None,
        schedule: Sequence[float] = SMALL_FUNCTION_SCHEDULE,
        surface: Optional[BaseSurface] = None,
    ) -> NevanlinnaReport:
        """delta(alpha_j f_j, inf) for small coefficients alpha_j"""
        surface = surface or ComplexPlane()
        if len(alphas) != len(fs):
            raise ValueError("one coefficient per function")
        poles = list(poles) if poles is not None else [ZeroPoleList()] * len(fs)
        products = [as_expr(al) * as_expr(f) for al, f in zip(alphas, fs)]
        defects = [
            self.defect_estimate(p, None, None, schedule, surface, poles=pl) for p, pl in zip(products, poles)
        ]
        return NevanlinnaReport(
            function="; ".join(to_sexpr(p) for p in products),
            surface=surface.kind.value,
            defects=defects,
            clamp_flags=sum(d.clamped for d in defects),
            check="small-function",
        )

    # Growth

    def growth_ratio(self, fs: Sequence[AnalyticExpr], surface: BaseSurface, r: float) -> float:
        """kappa(r) r^2 / T_{f_1..f_nu}(r)"""
        kappa = surface.kappa(r)
        if kappa == 0.0:
            return 0.0
        frak_T = self.char_multi(fs, surface, r)
        if frak_T <= 0:
            raise ValueError(f"characteristic vanishes at r={r}; the ratio is undefined")
        return kappa * r * r / frak_T

    # Wronskians and the defect inequality

    @staticmethod
    def wronskian_value(psis: Sequence[AnalyticExpr], z: complex) -> complex:
        """det [X^i psi_j], i, j = 0..n with X = d/dz"""
        n = len(psis) - 1
        W = np.array([[taylor_jet(p, z, n).derivative(i) for p in psis] for i in range(n + 1)])
        return complex(np.linalg.det(W))

    @staticmethod
    def _derivative_matrix(psis: Sequence[AnalyticExpr], z: complex, rows: int) -> np.ndarray:
        return np.array([[taylor_jet(p, z, max(rows - 1, 0)).derivative(i) for p in psis] for i in range(rows)])

    @staticmethod
    def _rank(M: np.ndarray) -> int:
        s = np.linalg.svd(M, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > RANK_RTOL * s[0]))

    def syzygy_residual(self, psis: Sequence[AnalyticExpr], radius: float = 1.0, samples: int = 64,
                        seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        zs = radius * np.sqrt(rng.uniform(size=samples)) * np.exp(2j * math.pi * rng.uniform(size=samples))
        vals = np.array([evaluate_many(p, zs).values for p in psis])
        return float(np.max(np.abs(vals.sum(axis=0)) / np.maximum(1.0, np.abs(vals).sum(axis=0))))

    def minimal_circuit(self, psis: Sequence[AnalyticExpr], z: complex) -> Tuple[List[int], np.ndarray]:
        """Smallest dependent sub-family and its relation coefficients"""
        for size in range(2, len(psis) + 1):
            for members in itertools.combinations(range(len(psis)), size):
                M = self._derivative_matrix([psis[i] for i in members], z, size)
                if self._rank(M) < size:
                    _, _, vh = np.linalg.svd(M)
                    return list(members), np.conj(vh[-1])
        raise LinearlyDependent("no dependent sub-family found")

    def cramer_residual(self, psis: Sequence[AnalyticExpr], points: Sequence[complex]) -> float:
        """
        max |psi_i/psi_n - Delta_i/Delta| relative, with Delta = det[X^mu psi_i / psi_i]
        and Delta_i its column i replaced by -X^mu psi_n / psi_n
        """
        n = len(psis) - 1
        worst = 0.0
        for z in points:
            jets = [taylor_jet(p, z, max(n - 1, 0)) for p in psis]
            vals = np.array([j.coeffs[0] for j in jets])
            A = np.array([[jets[i].derivative(mu) / vals[i] for i in range(n)] for mu in range(n)])
            b = np.array([-jets[n].derivative(mu) / vals[n] for mu in range(n)])
            delta = np.linalg.det(A)
            for i in range(n):
                Ai = A.copy()
                Ai[:, i] = b
                ratio = vals[i] / vals[n]
                worst = max(worst, abs(np.linalg.det(Ai) / delta - ratio) / max(1.0, abs(ratio)))
        return worst

    def lemma_defect_check(
        self,
        psis: Sequence[AnalyticExpr],
        surface: Optional[BaseSurface] = None,
        schedule: Sequence[float] = DEFAULT_SCHEDULE,
        recenter: float = RECENTER,
        seed: int = 0,
        samples: int = 20,
    ) -> LemmaReport:
        """sum_j delta^[n](psi_j, 0) <= n for psi_0 + ... + psi_n = 0"""
        surface = surface or ComplexPlane()
        psis = [as_expr(p) for p in psis]
        if len(psis) < 2:
            raise ValueError("a syzygy needs at least two members")
        residual = self.syzygy_residual(psis, radius=min(1.0, surface.radius_to_euclidean(schedule[0])), seed=seed)
        if residual > SYZYGY_TOL:
            raise NotASyzygy(f"sum of the family is not zero (relative residual {residual:.3e})")

        at_origin = np.array([evaluate_many(p, [0j]).values[0] for p in psis])
        if np.any(np.abs(at_origin) < ORIGIN_TOL):
            if surface.kind is not SurfaceKind.COMPLEX_PLANE:
                raise APointAtOrigin("a member vanishes at the base point; recentering needs the flat metric")
            logger.info(f"Recentering the family by z -> z + {recenter}")
            psis = [compose(p, Z + recenter) for p in psis]

        rng = np.random.default_rng(seed)
        anchor = complex(0.3 * cmath.exp(2j * math.pi * rng.uniform()))
        for index, p in enumerate(psis):
            if abs(taylor_jet(p, anchor, 1).derivative(1)) < ORIGIN_TOL:
                raise LinearlyDependent(f"member {index} looks constant")

        n = len(psis) - 1
        head = self._derivative_matrix(psis[:n], anchor, n)
        if self._rank(head) == n:
            case, members, family = "a", list(range(n + 1)), psis
        else:
            members, coeffs = self.minimal_circuit(psis, anchor)
            case = "b"
            family = [psis[i] * complex(c) for i, c in zip(members, coeffs)]
            logger.info(f"Family is linearly dependent; using the circuit {members}")
        k = len(family) - 1

        defects = [self.defect_estimate(p, 0.0, k, schedule, surface) for p in family]
        total = sum(d.value for d in defects)

        cramer = None
        if k >= 1:
            pts: List[complex] = []
            while len(pts) < samples:
                z = complex(0.5 * math.sqrt(rng.uniform()) * cmath.exp(2j * math.pi * rng.uniform()))
                if all(abs(evaluate_many(p, [z]).values[0]) > 1e-3 for p in family):
                    pts.append(z)
            cramer = self.cramer_residual(family, pts)

        return LemmaReport(
            case=case,
            members=members,
            truncation=k,
            syzygy_residual=residual,
            defects=defects,
            defect_sum=total,
            bound=float(k),
            margin=float(k) - total,
            cramer_residual=cramer,
        )

    def logderiv_check(self, psi: AnalyticExpr, k: int, schedule: Sequence[float] = DEFAULT_SCHEDULE,
                       surface: Optional[BaseSurface] = None) -> LogDerivReport:
        """m(r, X^k psi / psi) against (3k/2) log T - kappa r^2 + log+ log r + slack"""
        surface = surface or ComplexPlane()
        psi = as_expr(psi)
        rows = []
        for r in schedule:
            R = surface.radius_to_euclidean(r)

            def values(zs: np.ndarray) -> np.ndarray:
                coeffs, status = taylor_jets(psi, zs, k)
                if np.any(status != 0):
                    raise PoleOnBoundary(f"pole or branch point of psi on |z| = {R}")
                ratio = math.factorial(k) * coeffs[k] / coeffs[0]
                return _log_plus(np.abs(ratio))

            m = self.circle_mean(values, R)
            T = self.char_T(psi, surface, r)
            bound = 1.5 * k * math.log(max(T, 1e-300)) - surface.kappa(r) * r * r + log_plus(math.log(r)) \
                + self.config.logderiv_slack
            rows.append(LogDerivRow(r=r, m=m, T=T, bound=bound, violated=m > bound))
        return LogDerivReport(k=k, rows=rows, violations=sum(row.violated for row in rows))

    # Reports

    def report(
        self,
        f: AnalyticExpr,
        surface: BaseSurface,
        radii: Sequence[float],
        a: Optional[complex] = None,
        truncation: Optional[int] = None,
        components: Optional[Sequence[AnalyticExpr]] = None,
        with_growth_ratio: bool = False,
        points: Optional[ZeroPoleList] = None,
    ) -> NevanlinnaReport:
        """Per-radius T, m, N and the First Main Theorem residual"""
        f = as_expr(f)
        radii = [float(r) for r in radii]
        if a is not None and points is None:
            points = self.locate_a_points(f, a, surface, max(radii))
        if a is None and points is None and not has_pole_nodes(f):
            points = ZeroPoleList()

        rows = []
        for r in radii:
            row = NevanlinnaRow(r=r, T=self.char_T(f, surface, r))
            if components:
                row.frak_T = self.char_multi(components, surface, r)
            row.m = self.proximity_m(f, a, surface, r)
            if points is not None:
                row.N = self.counting_N(points, surface, r)
                if truncation is not None:
                    row.N_truncated = self.counting_N(points, surface, r, truncation)
                row.fmt_residual = abs(row.T - row.m - row.N)
            if with_growth_ratio:
                row.growth_ratio = self.growth_ratio(components or [f], surface, r)
            rows.append(row)
            logger.info(f"r={r:g}: T={row.T:.6f} m={row.m:.6f} N={row.N if row.N is not None else float('nan'):.6f}")

        out = NevanlinnaReport(
            function=to_sexpr(f),
            surface=surface.kind.value,
            a=None if a is None else ComplexValue.of(a),
            truncation=truncation,
            rows=rows,
        )
        residuals = [row.fmt_residual for row in rows if row.fmt_residual is not None]
        if residuals:
            out.fmt_bound = max(residuals)
            out.growth_flag = fmt_growth_flag(rows, self.config.growth_tolerance)
        if len(radii) >= 4 and points is not None:
            estimate = self.defect_estimate(f, a, truncation, radii, surface, points=points if a is not None else None,
                                            poles=points if a is None else None)
            out.defects.append(estimate)
            out.clamp_flags = int(estimate.clamped)
        return out


def fmt_growth_flag(rows: Sequence[NevanlinnaRow], tolerance: float) -> bool:
    """Residual rose by more than tolerance times the rise of T"""
    usable = [row for row in rows if row.fmt_residual is not None and row.T is not None]
    if len(usable) < 2:
        return False
    d_res = usable[-1].fmt_residual - usable[0].fmt_residual
    d_T = usable[-1].T - usable[0].T
    return d_res > tolerance * max(d_T, 0.0) + 1e-6


# Builtins

def builtin_functions() -> Dict[str, AnalyticExpr]:
    return {
        "z": Z,
        "exp": exp(Z),
        "exp-z2": exp(Z * Z),
        "power-test": exp(Z) * (Z - 0.3),
    }


def builtin_tuples() -> Dict[str, List[AnalyticExpr]]:
    e = exp(Z)
    return {
        "exp-syzygy": [e + Z, -e, -Z],
        "exp-dependent": [e - 1.0, (e - 1.0) * 2.0, (e - 1.0) * -3.0],
        "small-functions": [Z + 1.0, Z * Z * 0.5 - 2.0],
        "small-functions-f": [e, exp(Z * 2.0)],
    }
