"""
Solution Factory - explicit solutions of f_1^{n_1} + ... + f_k^{n_k} = 1
Equal-exponent and lcm families, the k=2/k=3 catalog, and residual verification
"""
from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fermatlab.models import ComplexValue, GridSpec, SampleFailure, SolutionSummary, VerifyReport
from fermatlab.services.elliptic import EquianharmonicWeierstrass, default_context
from fermatlab.services.expr_core import (
    BRANCH,
    FINITE,
    POLE,
    AnalyticExpr,
    Compose,
    Exp,
    FermatLabError,
    IntPow,
    LogPrincipal,
    NthRootPrincipal,
    Recip,
    Var,
    WpNode,
    WpPrimeNode,
    Z,
    as_expr,
    compose,
    evaluate_many,
    exp,
    fermat_terms,
    has_pole_nodes,
    log,
    root,
    taylor_jets,
    walk,
)
from fermatlab.utils.helpers import thread_cap
from fermatlab.utils.sexpr import to_sexpr

logger = logging.getLogger(__name__)

POLE_GUARD = 1e-3
ADMISSIBILITY_SLACK = 1e-12
MAX_FAILURES = 20
CHUNK_SIZE = 256
BAKER_POLE_RADIUS = 4.0

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


class ParameterOutOfRange(FermatLabError):
    """Parameters violate the admissibility condition of the family"""
    pass


class UnknownFamily(FermatLabError):
    """No family or catalog entry with this identifier"""
    pass


class Domain(str, Enum):
    UNIT_DISC = "unit-disc"
    COMPLEX_PLANE = "complex-plane"


class SolutionKind(str, Enum):
    HOLOMORPHIC = "holomorphic"
    MEROMORPHIC = "meromorphic"


FACTORY_FAMILIES = ("holo-equal", "mero-equal", "holo-general", "mero-general")
CATALOG_IDS = (
    "K2N2_TRIG",
    "K2N3_BAKER",
    "K3N2_H",
    "K3N2_M",
    "K3N3_H",
    "K3N3_M",
    "K3N4_H",
    "K3N5_H",
    "K3N5_M",
)


@dataclass
class FermatEquation:
    """alpha_1 f_1^{n_1} + ... + alpha_k f_k^{n_k} = 1; coefficients default to 1"""
    exponents: Tuple[int, ...]
    coefficients: Optional[Tuple[AnalyticExpr, ...]] = None

    def __post_init__(self):
        self.exponents = tuple(int(n) for n in self.exponents)
        if len(self.exponents) < 2:
            raise ParameterOutOfRange("an equation needs at least two functions")
        if any(n < 1 for n in self.exponents):
            raise ParameterOutOfRange(f"exponents must be positive, got {self.exponents}")
        if self.coefficients is not None:
            self.coefficients = tuple(as_expr(c) for c in self.coefficients)
            if len(self.coefficients) != len(self.exponents):
                raise ParameterOutOfRange("one coefficient per exponent is required")

    @property
    def k(self) -> int:
        return len(self.exponents)

    def terms(self, exprs: Sequence[AnalyticExpr], zs) -> Tuple[np.ndarray, np.ndarray]:
        return fermat_terms(exprs, self.exponents, zs, self.coefficients)


@dataclass(frozen=True, eq=False)
class SolutionTuple:
    exprs: Tuple[AnalyticExpr, ...]
    exponents: Tuple[int, ...]
    domain: Domain
    kind: SolutionKind
    family_id: str
    params: Dict[str, Any] = field(default_factory=dict)
    coefficients: Optional[Tuple[AnalyticExpr, ...]] = None
    known_poles: Tuple[complex, ...] = ()
    notes: Tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return len(self.exprs)

    @property
    def equation(self) -> FermatEquation:
        return FermatEquation(self.exponents, self.coefficients)


def _check_nonzero(values: Sequence[complex], name: str = "a") -> List[complex]:
    out = [complex(v) for v in values]
    for j, v in enumerate(out, start=2):
        if abs(v) == 0.0:
            raise ParameterOutOfRange(f"{name}_{j} must be non-zero")
    return out


def _principal_root(value: complex, n: int) -> complex:
    if n == 1:
        return complex(value)
    return cmath.exp(cmath.log(complex(value)) / n)


def _params_echo(**values) -> Dict[str, Any]:
    """JSON-friendly copy of the parameters that produced a tuple"""
    echo: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, complex):
            echo[key] = ComplexValue.of(value).model_dump()
        elif isinstance(value, (list, tuple)) and value and isinstance(value[0], complex):
            echo[key] = [ComplexValue.of(v).model_dump() for v in value]
        else:
            echo[key] = value
    return echo


def _is_entire(expr: AnalyticExpr) -> bool:
    return not has_pole_nodes(expr) and not any(
        isinstance(node, (LogPrincipal, NthRootPrincipal)) for node in walk(expr)
    )


def _is_zero_free(expr: AnalyticExpr) -> bool:
    return isinstance(expr, Exp)


class SolutionFactory:
    """Builds solution tuples and checks them on sample grids"""

    def __init__(self, context: Optional[EquianharmonicWeierstrass] = None):
        self._context = context
        logger.info("[INFO] SolutionFactory initialized")

    @property
    def context(self) -> EquianharmonicWeierstrass:
        if self._context is None:
            self._context = default_context()
        return self._context

    # ------------------------------------------------------------------
    # Equal and lcm exponent families
    # ------------------------------------------------------------------

    def holo_equal(self, n: int, k: int, a: Sequence[complex]) -> SolutionTuple:
        """f_1 = e^{phi/n}, f_j = a_j z with phi = log(1 - sum a_j^n z^n)"""
        if len(a) != k - 1:
            raise ParameterOutOfRange(f"holo-equal with k={k} takes {k - 1} parameters, got {len(a)}")
        built = self.holo_general([n] * k, a)
        return replace(built, family_id="holo-equal", params=_params_echo(n=n, k=k, a=list(map(complex, a))))

    def holo_general(self, exponents: Sequence[int], a: Sequence[complex]) -> SolutionTuple:
        exponents = FermatEquation(exponents).exponents
        k = len(exponents)
        if len(a) != k - 1:
            raise ParameterOutOfRange(f"{k} exponents take {k - 1} parameters, got {len(a)}")
        a = _check_nonzero(a)
        total = sum(aj ** nj for aj, nj in zip(a, exponents[1:]))
        if abs(total) > 1.0 + ADMISSIBILITY_SLACK:
            raise ParameterOutOfRange(f"|sum a_j^n_j| = {abs(total):.6g} exceeds 1")

        n = math.lcm(*exponents)
        powers = [n // nj for nj in exponents]
        f1 = exp(log(1 - total * Z ** n) * (1.0 / exponents[0]))
        others = [aj * Z ** pj for aj, pj in zip(a, powers[1:])]
        logger.debug(f"holo-general lcm={n} powers={powers}")
        return SolutionTuple(
            exprs=(f1, *others),
            exponents=exponents,
            domain=Domain.UNIT_DISC,
            kind=SolutionKind.HOLOMORPHIC,
            family_id="holo-general",
            params=_params_echo(exponents=list(exponents), a=a, lcm=n, powers=powers),
        )

    def mero_general(self, exponents: Sequence[int], a: Sequence[complex]) -> SolutionTuple:
        """f_1 = z^{-p_1} e^{psi/n_1}, f_j = a_j z^{-p_j} with e^psi = z^n - sum a_j^{n_j}"""
        exponents = FermatEquation(exponents).exponents
        k = len(exponents)
        if len(a) != k - 1:
            raise ParameterOutOfRange(f"{k} exponents take {k - 1} parameters, got {len(a)}")
        a = _check_nonzero(a)
        total = sum(aj ** nj for aj, nj in zip(a, exponents[1:]))
        if abs(total) < 1.0 - ADMISSIBILITY_SLACK:
            raise ParameterOutOfRange(f"|sum a_j^n_j| = {abs(total):.6g} is below 1")

        n = math.lcm(*exponents)
        powers = [n // nj for nj in exponents]
        n1 = exponents[0]
        # z^n - S = (-S)(1 - z^n/S); the second factor stays off the cut for |z| < 1
        scale = _principal_root(-total, n1)
        f1 = Z ** (-powers[0]) * scale * exp(log(1 - Z ** n * (1.0 / total)) * (1.0 / n1))
        others = [aj * Z ** (-pj) for aj, pj in zip(a, powers[1:])]
        return SolutionTuple(
            exprs=(f1, *others),
            exponents=exponents,
            domain=Domain.UNIT_DISC,
            kind=SolutionKind.MEROMORPHIC,
            family_id="mero-general",
            params=_params_echo(exponents=list(exponents), a=a, lcm=n, powers=powers),
            known_poles=(0j,),
        )

    def mero_equal(
        self,
        n: int,
        k: int,
        a: Sequence[complex],
        b: Optional[complex] = None,
        variant: int = 2,
    ) -> SolutionTuple:
        """
        Meromorphic tuples with equal exponents, poles only at z = 0.

        k=2 takes a single a with |a| >= 1, k=3 takes a_2, a_3 with |a_2^n + a_3^n| >= 1.
        For k >= 4 variant 1 takes b and a single a with |a (k-3)^{1/n}| <= 1;
        variant 2 takes a_2..a_k with |sum a_j^n| >= 1.
        """
        if k < 2:
            raise ParameterOutOfRange("k must be at least 2")
        if k >= 4 and variant == 1:
            return self._mero_equal_cancelling(n, k, a, b)
        if len(a) != k - 1:
            raise ParameterOutOfRange(f"mero-equal with k={k} takes {k - 1} parameters, got {len(a)}")
        built = self.mero_general([n] * k, a)
        return replace(
            built,
            family_id="mero-equal",
            params=_params_echo(n=n, k=k, variant=2 if k >= 4 else None, a=list(map(complex, a))),
        )

    def _mero_equal_cancelling(self, n: int, k: int, a: Sequence[complex], b: Optional[complex]) -> SolutionTuple:
        if b is None or abs(complex(b)) == 0.0:
            raise ParameterOutOfRange("variant 1 needs a non-zero b")
        if len(a) != 1:
            raise ParameterOutOfRange(f"variant 1 takes a single a, got {len(a)}")
        b = complex(b)
        a0 = _check_nonzero(a)[0]
        if abs(a0) * (k - 3) ** (1.0 / n) > 1.0 + ADMISSIBILITY_SLACK:
            raise ParameterOutOfRange(f"|a (k-3)^(1/n)| = {abs(a0) * (k - 3) ** (1.0 / n):.6g} exceeds 1")

        f1 = exp(log(1 - (k - 3) * a0 ** n * Z ** n) * (1.0 / n))
        f2 = _principal_root(b, n) * Z ** (-1)
        f3 = _principal_root(-b, n) * Z ** (-1)
        tail = [a0 * Z for _ in range(k - 3)]
        return SolutionTuple(
            exprs=(f1, f2, f3, *tail),
            exponents=(n,) * k,
            domain=Domain.UNIT_DISC,
            kind=SolutionKind.MEROMORPHIC,
            family_id="mero-equal",
            params=_params_echo(n=n, k=k, variant=1, a=[a0], b=b),
            known_poles=(0j,),
            notes=("f_2^n + f_3^n vanishes identically; f_1 and f_4..f_k are holomorphic",),
        )

    # ------------------------------------------------------------------
    # Catalog
    # ------------------------------------------------------------------

    def catalog(self, family_id: str, inner: AnalyticExpr = Z) -> SolutionTuple:
        builders = {
            "K2N2_TRIG": self._k2n2_trig,
            "K2N3_BAKER": self._k2n3_baker,
            "K3N2_H": self._k3n2,
            "K3N2_M": self._k3n2,
            "K3N3_H": self._k3n3,
            "K3N3_M": self._k3n3,
            "K3N4_H": self._k3n4,
            "K3N5_H": self._k3n5_holo,
            "K3N5_M": self._k3n5_mero,
        }
        builder = builders.get(family_id)
        if builder is None:
            raise UnknownFamily(f"unknown catalog id {family_id!r}; known: {', '.join(CATALOG_IDS)}")
        inner = as_expr(inner)
        exprs, exponents, poles, notes = builder(inner)

        if family_id == "K2N2_TRIG":
            holomorphic = _is_zero_free(inner)
        elif family_id.endswith("_H"):
            holomorphic = not has_pole_nodes(inner)
        else:
            holomorphic = False

        return SolutionTuple(
            exprs=tuple(exprs),
            exponents=tuple(exponents),
            domain=Domain.COMPLEX_PLANE if _is_entire(inner) else Domain.UNIT_DISC,
            kind=SolutionKind.HOLOMORPHIC if holomorphic else SolutionKind.MEROMORPHIC,
            family_id=family_id,
            params={"inner": to_sexpr(inner)},
            known_poles=tuple(poles),
            notes=tuple(notes),
        )

    def _k2n2_trig(self, alpha):
        return [0.5 * (alpha + 1 / alpha), -0.5j * (alpha - 1 / alpha)], [2, 2], [], []

    def _k2n3_baker(self, alpha):
        gamma1, gamma2 = self.context.baker_exprs()
        poles: List[complex] = []
        if isinstance(alpha, Var):
            poles = self.context.lattice_points(BAKER_POLE_RADIUS) + self.context.wp_zeros(BAKER_POLE_RADIUS)
        return [compose(gamma1, alpha), compose(gamma2, alpha)], [3, 3], poles, []

    def _k3n2(self, alpha):
        c = 3.0 ** -0.5
        return [c * (alpha ** 2 - 2), c * 1j * (alpha ** 2 + 1), SQRT2 * alpha], [2, 2, 2], [], []

    def _k3n3(self, alpha):
        return [9 * alpha ** 4, -9 * alpha ** 4 + 3 * alpha, -9 * alpha ** 3 + 1], [3, 3, 3], [], []

    def _k3n4(self, alpha):
        up, down = exp(3 * alpha), exp(-alpha)
        exprs = [
            2.0 ** -0.75 * (up + down),
            complex(-2) ** -0.75 * (up - down),
            cmath.exp(1j * math.pi / 4) * exp(2 * alpha),
        ]
        return exprs, [4, 4, 4], [], []

    def _k3n5_holo(self, alpha):
        # f_3 carries the conjugate coefficients of f_2
        p = complex(SQRT6 - 2, 3 * SQRT2 - 2 * SQRT3)
        q = complex(SQRT6 + 2, -3 * SQRT2 - 2 * SQRT3)
        up, down = exp(alpha), exp(-alpha)
        exprs = [
            ((2 - SQRT6) * up + (2 + SQRT6) * down + 1) * (1.0 / 3),
            (p * up - q * down + 2) * (1.0 / 6),
            (p.conjugate() * up - q.conjugate() * down + 2) * (1.0 / 6),
        ]
        return exprs, [5, 5, 5], [], ["third member uses the conjugate coefficients of the second"]

    def _k3n5_mero(self, alpha):
        p1, p2 = k3n5_constants()
        gamma1 = 1 + 1 / (p1 + p2 * exp(alpha))
        gamma2 = 1 + 1 / (p1 + p2 * exp(-alpha))
        gamma3 = root((gamma1 ** 5 - 1) / (gamma2 ** 5 - 1), 5)
        exprs = [gamma1, cmath.exp(1j * math.pi / 5) * gamma2 * gamma3, gamma3]

        poles: List[complex] = []
        notes = ["gamma_3 is the principal fifth root of (gamma_1^5 - 1)/(gamma_2^5 - 1)"]
        if isinstance(alpha, Var):
            base = cmath.log(-p1 / p2)
            for j in range(-2, 3):
                shift = 2j * math.pi * j
                poles.extend([base + shift, -base - shift])
            radius = branch_consistent_radius(gamma3.arg)
            notes.append(f"principal branch consistent for |z| < {radius:.3f}")
        return exprs, [5, 5, 5], sorted(poles, key=abs), notes

    # ------------------------------------------------------------------
    # Dispatch used by the CLI and the acceptance runner
    # ------------------------------------------------------------------

    def build(
        self,
        family: str,
        n: Optional[int] = None,
        k: Optional[int] = None,
        a: Sequence[complex] = (),
        b: Optional[complex] = None,
        exponents: Sequence[int] = (),
        variant: int = 2,
        inner: AnalyticExpr = Z,
    ) -> SolutionTuple:
        a = [complex(v) for v in a]
        if family in CATALOG_IDS:
            return self.catalog(family, inner)
        if family in ("holo-equal", "mero-equal"):
            if n is None or k is None:
                raise ParameterOutOfRange(f"{family} needs n and k")
            if family == "holo-equal":
                return self.holo_equal(n, k, a)
            return self.mero_equal(n, k, a, b=b, variant=variant)
        if family in ("holo-general", "mero-general"):
            if not exponents:
                raise ParameterOutOfRange(f"{family} needs exponents")
            if family == "holo-general":
                return self.holo_general(exponents, a)
            return self.mero_general(exponents, a)
        raise UnknownFamily(f"unknown family {family!r}")

    def draw_parameters(
        self,
        family: str,
        rng: np.random.Generator,
        n: Optional[int] = None,
        k: Optional[int] = None,
        exponents: Sequence[int] = (),
        variant: int = 2,
    ) -> Dict[str, Any]:
        """Random admissible parameters for a factory family, as keyword arguments of build()"""
        if family in ("holo-equal", "mero-equal"):
            if n is None or k is None:
                raise ParameterOutOfRange(f"{family} needs n and k")
            exps = [n] * k
        elif family in ("holo-general", "mero-general"):
            exps = list(exponents)
        else:
            raise UnknownFamily(f"no random parameters for {family!r}")
        if len(exps) < 2:
            raise ParameterOutOfRange("at least two exponents are required")
        count = len(exps) - 1

        if family == "mero-equal" and len(exps) >= 4 and variant == 1:
            cap = (len(exps) - 3) ** (-1.0 / exps[0])
            a0 = cap * rng.uniform(0.1, 0.95) * cmath.exp(2j * math.pi * rng.uniform())
            b = rng.uniform(0.2, 2.0) * cmath.exp(2j * math.pi * rng.uniform())
            return {"family": family, "n": n, "k": k, "a": [a0], "b": b, "variant": 1}

        if family.startswith("holo"):
            # sum |a_j|^{n_j} <= 1 bounds the modulus of the sum
            a = [
                (1.0 / count) ** (1.0 / nj) * rng.uniform(0.1, 1.0) * cmath.exp(2j * math.pi * rng.uniform())
                for nj in exps[1:]
            ]
        else:
            # aligned a_j^{n_j} so the moduli add up
            theta = 2 * math.pi * rng.uniform()
            a = [
                rng.uniform(1.0, 1.5) * cmath.exp(1j * (theta + 2 * math.pi * rng.integers(nj)) / nj)
                for nj in exps[1:]
            ]
        params: Dict[str, Any] = {"family": family, "a": a}
        if family.endswith("equal"):
            params.update(n=n, k=k, variant=variant)
        else:
            params["exponents"] = exps
        return params

    def perturb(self, solution: SolutionTuple, index: int = 0, eps: complex = 1e-6) -> SolutionTuple:
        """Shift one member by a constant; the result no longer solves the equation"""
        if not 0 <= index < solution.k:
            raise ParameterOutOfRange(f"member index {index} out of range")
        exprs = list(solution.exprs)
        exprs[index] = exprs[index] + eps
        return replace(
            solution,
            exprs=tuple(exprs),
            notes=solution.notes + (f"member {index + 1} shifted by {complex(eps)}",),
        )

    # ------------------------------------------------------------------
    # Verification
    # ------------------------------------------------------------------

    def verify(self, solution: SolutionTuple, grid: Optional[GridSpec] = None, tolerance: float = 1e-9) -> VerifyReport:
        grid = grid or GridSpec()
        if solution.domain == Domain.UNIT_DISC and grid.radius >= 1.0:
            raise ParameterOutOfRange(f"grid radius {grid.radius} leaves the unit disc")
        points = sample_grid(grid)

        near = np.zeros(points.size, dtype=bool)
        for pole in solution.known_poles:
            near |= np.abs(points - pole) < POLE_GUARD
        near |= pole_adjacent(solution.exprs, points)

        chunks = [points[i : i + CHUNK_SIZE] for i in range(0, points.size, CHUNK_SIZE)]
        equation = solution.equation
        with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
            parts = list(pool.map(lambda zs: _chunk_residuals(equation, solution.exprs, zs), chunks))

        scaled = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
        absolute = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
        status = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, dtype=np.int8)

        skipped_pole = near | (status == POLE)
        skipped_branch = ~near & (status == BRANCH)
        accepted = ~skipped_pole & ~skipped_branch & (status == FINITE)

        failures: List[SampleFailure] = []
        for idx in np.flatnonzero(accepted & ~(scaled <= tolerance)):
            if len(failures) >= MAX_FAILURES:
                break
            failures.append(SampleFailure(z=ComplexValue.of(points[idx]), residual=float(scaled[idx])))

        report = VerifyReport(
            samples=int(points.size),
            accepted=int(accepted.sum()),
            max_residual=float(scaled[accepted].max()) if accepted.any() else 0.0,
            max_abs_residual=float(absolute[accepted].max()) if accepted.any() else 0.0,
            skipped_near_pole=int(skipped_pole.sum()),
            skipped_branch=int(skipped_branch.sum()),
            tolerance=tolerance,
            failures=failures,
        )
        if report.skipped_branch:
            logger.warning(f"{solution.family_id}: {report.skipped_branch} samples on a branch cut skipped")
        logger.info(
            f"Verified {solution.family_id}: {report.accepted}/{report.samples} samples, "
            f"max residual {report.max_residual:.3e}"
        )
        return report

    def summarize(self, solution: SolutionTuple) -> SolutionSummary:
        return SolutionSummary(
            family_id=solution.family_id,
            domain=solution.domain.value,
            kind=solution.kind.value,
            exponents=list(solution.exponents),
            exprs=[to_sexpr(f) for f in solution.exprs],
            coefficients=[to_sexpr(c) for c in solution.coefficients] if solution.coefficients else None,
            params=solution.params,
            known_poles=[ComplexValue.of(p) for p in solution.known_poles],
            notes=list(solution.notes),
        )


def _chunk_residuals(equation: FermatEquation, exprs, zs: np.ndarray):
    terms, status = equation.terms(exprs, zs)
    absolute = np.abs(terms.sum(axis=0) - 1.0)
    scale = np.maximum(1.0, np.abs(terms).sum(axis=0))
    return absolute / scale, absolute, status


def pole_sources(exprs: Sequence[AnalyticExpr]) -> Tuple[List[AnalyticExpr], List[Tuple[object, AnalyticExpr]]]:
    """
    Denominators and p-node arguments as functions of the variable.
    Nodes under a composition are pulled back through its inner function.
    """
    denominators: List[AnalyticExpr] = []
    lattice: List[Tuple[object, AnalyticExpr]] = []
    seen = set()
    stack: List[Tuple[AnalyticExpr, Optional[AnalyticExpr]]] = [(as_expr(f), None) for f in exprs]
    while stack:
        node, inner = stack.pop()
        key = (id(node), id(inner))
        if key in seen:
            continue
        seen.add(key)
        lift = (lambda e: compose(e, inner)) if inner is not None else (lambda e: e)
        if isinstance(node, Recip) or (isinstance(node, IntPow) and node.exponent < 0):
            denominators.append(lift(node.arg))
        elif isinstance(node, (WpNode, WpPrimeNode)):
            lattice.append((node.context, inner if inner is not None else Z))
        if isinstance(node, Compose):
            stack.append((node.outer, lift(node.inner)))
            stack.append((node.inner, inner))
        else:
            stack.extend((child, inner) for child in node.children())
    return denominators, lattice


def _newton_distance(value: np.ndarray, slope: np.ndarray) -> np.ndarray:
    # |d / d'| estimates the distance to the nearest zero of d
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.abs(value) / np.abs(slope)
    return np.where(np.abs(value) == 0.0, 0.0, np.nan_to_num(dist, nan=np.inf))


def pole_adjacent(exprs: Sequence[AnalyticExpr], zs: np.ndarray, guard: float = POLE_GUARD) -> np.ndarray:
    """Mask of samples within guard of a pole detected from the expression structure"""
    zs = np.asarray(zs, dtype=complex)
    near = np.zeros(zs.size, dtype=bool)
    denominators, lattice = pole_sources(exprs)
    for d in denominators:
        coeffs, status = taylor_jets(d, zs, 1)
        near |= (status == FINITE) & (_newton_distance(coeffs[0], coeffs[1]) < guard)
    for context, arg in lattice:
        coeffs, status = taylor_jets(arg, zs, 1)
        offset = context.reduce(coeffs[0])
        near |= (status == FINITE) & (_newton_distance(offset, coeffs[1]) < guard)
    if near.any():
        logger.debug(f"{int(near.sum())} samples within {guard:g} of a detected pole")
    return near


def sample_grid(grid: GridSpec) -> np.ndarray:
    """Polar rings with staggered angles, or uniform random points in the disc of the grid radius"""
    if grid.kind == "random":
        rng = np.random.default_rng(grid.seed)
        radii = grid.radius * np.sqrt(rng.uniform(size=grid.points))
        angles = 2 * np.pi * rng.uniform(size=grid.points)
        points = radii * np.exp(1j * angles)
    else:
        rings = max(1, int(round(math.sqrt(grid.points / 8))))
        per_ring = [grid.points // rings + (1 if i < grid.points % rings else 0) for i in range(rings)]
        chunks = []
        for i, count in enumerate(per_ring, start=1):
            r = grid.radius * i / rings
            offset = 0.5 if i % 2 else 0.25
            chunks.append(r * np.exp(2j * np.pi * (np.arange(count) + offset) / count))
        points = np.concatenate(chunks)
    if grid.include_center:
        points = np.concatenate([[0j], points])
    return points.astype(complex)


def k3n5_constants() -> Tuple[complex, complex]:
    """p_1, p_2 built from a_k = 1/(e^{2 k pi i/5} - 1)"""
    a = [1.0 / (cmath.exp(2j * math.pi * k / 5) - 1.0) for k in range(1, 5)]
    p1 = (a[2] * a[3] - a[0] * a[1]) / (a[2] + a[3] - a[0] - a[1])
    p2 = cmath.sqrt((p1 - a[0]) * (p1 - a[1]))
    return p1, p2


def branch_consistent_radius(radicand: AnalyticExpr, max_radius: float = 1.6, rings: int = 128, angles: int = 512) -> float:
    """Largest sampled ring radius below which the radicand does not cross the negative real axis"""
    theta = 2 * np.pi * np.arange(angles + 1) / angles
    for i in range(1, rings + 1):
        r = max_radius * i / rings
        batch = evaluate_many(radicand, r * np.exp(1j * theta))
        values = batch.values
        ok = batch.status == FINITE
        neg = ok[:-1] & ok[1:] & (values.real[:-1] < 0) & (values.real[1:] < 0)
        flips = np.sign(values.imag[:-1]) != np.sign(values.imag[1:])
        if np.any(neg & flips) or np.any(batch.status == BRANCH):
            return max_radius * (i - 1) / rings
    return max_radius
