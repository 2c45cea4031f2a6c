"""
Expression Core - analytic expressions of one complex variable
Immutable DAG, vectorized evaluation, Taylor jets and Fermat residuals
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

TAU_ZERO = 1e-13
EPS_BRANCH = 1e-12
DEFAULT_JET_ORDER = 8

FINITE, POLE, BRANCH = 0, 1, 2


class FermatLabError(Exception):
    """Base class for all fermatlab domain errors"""
    pass


class PoleAtBasePoint(FermatLabError):
    """Expression has a pole at the requested base point"""
    pass


class BranchViolationError(FermatLabError):
    """Principal log/root argument touches the branch cut or zero"""

    def __init__(self, message: str, node: Optional["AnalyticExpr"] = None):
        super().__init__(message)
        self.node = node


class SampleAtPole(FermatLabError):
    """A sample point sits on a pole of one of the functions"""
    pass


# ---------------------------------------------------------------------------
# Expression DAG
# ---------------------------------------------------------------------------

Number = Union[int, float, complex]


class AnalyticExpr:
    """Base node. Subclasses are frozen dataclasses compared by identity."""

    def children(self) -> Tuple["AnalyticExpr", ...]:
        return ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Add(self, Neg(as_expr(other)))

    def __rsub__(self, other):
        return Add(as_expr(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Mul(self, Recip(as_expr(other)))

    def __rtruediv__(self, other):
        return Mul(as_expr(other), Recip(self))

    def __neg__(self):
        return Neg(self)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, (int, np.integer)):
            raise TypeError("only integer powers are expression nodes; use root() for fractional ones")
        exponent = int(exponent)
        if exponent == 0:
            return Const(1.0)
        if exponent == 1:
            return self
        return IntPow(self, exponent)


@dataclass(frozen=True, eq=False)
class Const(AnalyticExpr):
    value: complex

    def __post_init__(self):
        value = complex(self.value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise ValueError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True, eq=False)
class Var(AnalyticExpr):
    pass


@dataclass(frozen=True, eq=False)
class Add(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Mul(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Neg(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Recip(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class IntPow(AnalyticExpr):
    arg: AnalyticExpr
    exponent: int

    def __post_init__(self):
        if self.exponent == 0:
            raise ValueError("IntPow exponent 0 must be folded to Const(1)")

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Exp(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class LogPrincipal(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class NthRootPrincipal(AnalyticExpr):
    arg: AnalyticExpr
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("root index must be a positive integer")

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Compose(AnalyticExpr):
    outer: AnalyticExpr
    inner: AnalyticExpr

    def children(self):
        return (self.outer, self.inner)


@dataclass(frozen=True, eq=False)
class WpNode(AnalyticExpr):
    """Weierstrass p of the variable, bound to an elliptic context"""
    context: object


@dataclass(frozen=True, eq=False)
class WpPrimeNode(AnalyticExpr):
    """Derivative of Weierstrass p, bound to an elliptic context"""
    context: object


Z = Var()


def as_expr(value) -> AnalyticExpr:
    if isinstance(value, AnalyticExpr):
        return value
    return Const(value)


def const(value: Number) -> Const:
    return Const(value)


def exp(arg) -> Exp:
    return Exp(as_expr(arg))


def log(arg) -> LogPrincipal:
    return LogPrincipal(as_expr(arg))


def root(arg, n: int) -> AnalyticExpr:
    if n == 1:
        return as_expr(arg)
    return NthRootPrincipal(as_expr(arg), n)


def compose(outer: AnalyticExpr, inner: AnalyticExpr) -> AnalyticExpr:
    if isinstance(inner, Var):
        return outer
    if isinstance(outer, Var):
        return inner
    return Compose(outer, inner)


def walk(expr: AnalyticExpr):
    """Yield every node reachable from expr once"""
    seen = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(node.children())


def has_pole_nodes(expr: AnalyticExpr) -> bool:
    """True when a reciprocal, negative power or p-node is reachable"""
    for node in walk(expr):
        if isinstance(node, (Recip, WpNode, WpPrimeNode)):
            return True
        if isinstance(node, IntPow) and node.exponent < 0:
            return True
    return False


def _is_affine_in_var(node: AnalyticExpr) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Add):
        parts = (node.left, node.right)
        consts = [p for p in parts if isinstance(p, Const) or (isinstance(p, Neg) and isinstance(p.arg, Const))]
        return len(consts) == 1 and any(isinstance(p, Var) for p in parts)
    return False


# ---------------------------------------------------------------------------
# Evaluation results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finite:
    value: complex


@dataclass(frozen=True)
class Pole:
    order: Optional[int] = None


@dataclass(frozen=True)
class BranchViolation:
    node: AnalyticExpr


EvalResult = Union[Finite, Pole, BranchViolation]


@dataclass(frozen=True)
class EvalBatch:
    """Vectorized evaluation: values are zero wherever status is not FINITE"""
    values: np.ndarray
    status: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return self.status == FINITE


# ---------------------------------------------------------------------------
# Truncated series kernels on arrays of shape (K+1, N)
# ---------------------------------------------------------------------------

def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        out[k] = np.sum(a[: k + 1] * b[k::-1], axis=0)
    return out


def _recip(a: np.ndarray) -> np.ndarray:
    b = np.zeros_like(a)
    inv0 = 1.0 / a[0]
    b[0] = inv0
    for k in range(1, a.shape[0]):
        b[k] = -inv0 * np.sum(a[1 : k + 1] * b[k - 1 :: -1][:k], axis=0)
    return b


def _exp(a: np.ndarray) -> np.ndarray:
    b = np.zeros_like(a)
    b[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        j = np.arange(1, k + 1).reshape(-1, *([1] * (a.ndim - 1)))
        b[k] = np.sum(j * a[1 : k + 1] * b[k - 1 :: -1][:k], axis=0) / k
    return b


def _log(a: np.ndarray) -> np.ndarray:
    b = np.zeros_like(a)
    b[0] = np.log(a[0])
    for k in range(1, a.shape[0]):
        acc = a[k].copy()
        if k > 1:
            j = np.arange(1, k).reshape(-1, *([1] * (a.ndim - 1)))
            acc = acc - np.sum(j * b[1:k] * a[k - 1 : 0 : -1], axis=0) / k
        b[k] = acc / a[0]
    return b


def _power(a: np.ndarray, p: complex) -> np.ndarray:
    """Principal a**p for a series whose constant term is a unit"""
    b = np.zeros_like(a)
    b[0] = np.exp(p * np.log(a[0]))
    for k in range(1, a.shape[0]):
        j = np.arange(1, k + 1).reshape(-1, *([1] * (a.ndim - 1)))
        weights = (p + 1) * j - k
        b[k] = np.sum(weights * a[1 : k + 1] * b[k - 1 :: -1][:k], axis=0) / (k * a[0])
    return b


def _intpow(a: np.ndarray, n: int) -> np.ndarray:
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else _mul(result, base)
        n >>= 1
        if n:
            base = _mul(base, base)
    return result


def _compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Horner evaluation of the outer Taylor jet on inner minus its constant"""
    shift = inner.copy()
    shift[0] = 0.0
    out = np.zeros_like(inner)
    out[0] = outer[-1]
    for k in range(outer.shape[0] - 2, -1, -1):
        out = _mul(out, shift)
        out[0] = out[0] + outer[k]
    return out


def _off_cut(a0: np.ndarray) -> np.ndarray:
    """Mask of arguments safely inside the principal cut plane"""
    mod = np.abs(a0)
    near_zero = mod < TAU_ZERO
    on_cut = (a0.real < 0) & (np.abs(a0.imag) <= EPS_BRANCH * np.maximum(1.0, mod))
    return ~(near_zero | on_cut)


# ---------------------------------------------------------------------------
# Jet engine
# ---------------------------------------------------------------------------

@dataclass
class _JetArray:
    coeffs: np.ndarray
    status: np.ndarray
    order: np.ndarray


class _JetEngine:
    """One pass of Taylor propagation at many base points; memoized per node"""

    def __init__(self, zs: np.ndarray, K: int):
        self.zs = np.asarray(zs, dtype=complex).ravel()
        self.K = K
        self.memo: Dict[int, _JetArray] = {}
        self.culprits: List[Tuple[AnalyticExpr, np.ndarray]] = []

    def _blank(self) -> _JetArray:
        n = self.zs.size
        return _JetArray(
            np.zeros((self.K + 1, n), dtype=complex),
            np.zeros(n, dtype=np.int8),
            np.zeros(n, dtype=np.int64),
        )

    def run(self, node: AnalyticExpr) -> _JetArray:
        key = id(node)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out = self._dispatch(node)
        bad = out.status != FINITE
        if bad.any():
            out.coeffs[:, bad] = 0.0
        self.memo[key] = out
        return out

    def _dispatch(self, node: AnalyticExpr) -> _JetArray:
        if isinstance(node, Const):
            out = self._blank()
            out.coeffs[0] = node.value
            return out
        if isinstance(node, Var):
            out = self._blank()
            out.coeffs[0] = self.zs
            if self.K >= 1:
                out.coeffs[1] = 1.0
            return out
        if isinstance(node, Add):
            return self._add(self.run(node.left), self.run(node.right))
        if isinstance(node, Mul):
            return self._mul(self.run(node.left), self.run(node.right))
        if isinstance(node, Neg):
            a = self.run(node.arg)
            return _JetArray(-a.coeffs, a.status.copy(), a.order.copy())
        if isinstance(node, Recip):
            return self._recip(self.run(node.arg), 1 if _is_affine_in_var(node.arg) else 0)
        if isinstance(node, IntPow):
            return self._intpow(node)
        if isinstance(node, Exp):
            a = self.run(node.arg)
            out = self._unary(a, _exp)
            out.order[a.status == POLE] = 0
            return out
        if isinstance(node, LogPrincipal):
            return self._branch_op(node, self.run(node.arg), _log)
        if isinstance(node, NthRootPrincipal):
            n = node.n
            return self._branch_op(node, self.run(node.arg), lambda c: _power(c, 1.0 / n))
        if isinstance(node, Compose):
            return self._compose(node)
        if isinstance(node, WpNode):
            return self._wp(node.context, derivative=False)
        if isinstance(node, WpPrimeNode):
            return self._wp(node.context, derivative=True)
        raise TypeError(f"unknown expression node {type(node).__name__}")

    def _combine_status(self, a: _JetArray, b: _JetArray) -> Tuple[np.ndarray, np.ndarray]:
        status = np.maximum(a.status, b.status)
        order = np.where(a.status == POLE, a.order, 0)
        order = np.where(b.status == POLE, np.where(a.status == POLE, 0, b.order), order)
        return status, order

    def _add(self, a: _JetArray, b: _JetArray) -> _JetArray:
        status, order = self._combine_status(a, b)
        return _JetArray(a.coeffs + b.coeffs, status, order)

    def _mul(self, a: _JetArray, b: _JetArray) -> _JetArray:
        status, _ = self._combine_status(a, b)
        return _JetArray(_mul(a.coeffs, b.coeffs), status, np.zeros_like(a.order))

    def _unary(self, a: _JetArray, kernel) -> _JetArray:
        return _JetArray(kernel(a.coeffs), a.status.copy(), a.order.copy())

    def _recip(self, a: _JetArray, simple_order: int) -> _JetArray:
        a0 = a.coeffs[0]
        vanishing = (a.status == FINITE) & (np.abs(a0) < TAU_ZERO)
        safe = a.coeffs.copy()
        safe[0] = np.where(vanishing | (a.status != FINITE), 1.0, a0)
        out = _JetArray(_recip(safe), a.status.copy(), np.zeros_like(a.order))
        out.status[vanishing] = POLE
        out.order[vanishing] = simple_order
        if self.K == 0:
            # 1/(pole) is a finite zero value
            back = a.status == POLE
            out.status[back] = FINITE
            out.coeffs[:, back] = 0.0
        return out

    def _intpow(self, node: IntPow) -> _JetArray:
        a = self.run(node.arg)
        n = node.exponent
        raised = _JetArray(_intpow(a.coeffs, abs(n)), a.status.copy(), a.order * abs(n))
        if n > 0:
            return raised
        out = self._recip(raised, abs(n) if _is_affine_in_var(node.arg) else 0)
        return out

    def _branch_op(self, node: AnalyticExpr, a: _JetArray, kernel) -> _JetArray:
        a0 = a.coeffs[0]
        violating = (a.status == FINITE) & ~_off_cut(a0)
        if violating.any():
            self.culprits.append((node, violating))
        safe = a.coeffs.copy()
        safe[0] = np.where(violating | (a.status != FINITE), 1.0, a0)
        out = _JetArray(kernel(safe), a.status.copy(), np.zeros_like(a.order))
        out.status[violating] = BRANCH
        out.status[a.status == POLE] = POLE
        return out

    def _compose(self, node: Compose) -> _JetArray:
        inner = self.run(node.inner)
        base = np.where(inner.status == FINITE, inner.coeffs[0], 0.0)
        sub = _JetEngine(base, self.K)
        outer = sub.run(node.outer)
        self.culprits.extend(sub.culprits)
        coeffs = _compose(outer.coeffs, inner.coeffs)
        status = np.where(inner.status != FINITE, inner.status, outer.status).astype(np.int8)
        order = np.where(inner.status == FINITE, outer.order, 0)
        return _JetArray(coeffs, status, order)

    def _wp(self, context, derivative: bool) -> _JetArray:
        K = self.K + (1 if derivative else 0)
        p, dp, at_pole = context.wp_pair(self.zs)
        c = np.zeros((K + 1, self.zs.size), dtype=complex)
        c[0] = np.where(at_pole, 0.0, p)
        if K >= 1:
            c[1] = np.where(at_pole, 0.0, dp)
        # p'' = 6 p^2 generates the whole jet
        for k in range(0, K - 1):
            c[k + 2] = 6.0 * np.sum(c[: k + 1] * c[k::-1], axis=0) / ((k + 2) * (k + 1))
        if derivative:
            c = c[1:] * np.arange(1, K + 1).reshape(-1, 1)
        out = self._blank()
        out.coeffs = c
        out.status[at_pole] = POLE
        out.order[at_pole] = 3 if derivative else 2
        return out


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaylorJet:
    """Truncated Taylor expansion c_0 + c_1 (z - base) + ... + c_K (z - base)^K"""
    base: complex
    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def derivative(self, k: int) -> complex:
        return complex(math.factorial(k) * self.coeffs[k])

    def _check(self, other: "TaylorJet"):
        if other.order != self.order:
            raise ValueError("jets must share the truncation order")

    def __add__(self, other: "TaylorJet") -> "TaylorJet":
        self._check(other)
        return TaylorJet(self.base, self.coeffs + other.coeffs)

    def __sub__(self, other: "TaylorJet") -> "TaylorJet":
        self._check(other)
        return TaylorJet(self.base, self.coeffs - other.coeffs)

    def __mul__(self, other: "TaylorJet") -> "TaylorJet":
        self._check(other)
        return TaylorJet(self.base, _mul(self.coeffs, other.coeffs))

    def reciprocal(self) -> "TaylorJet":
        if abs(self.coeffs[0]) < TAU_ZERO:
            raise PoleAtBasePoint("reciprocal of a jet with vanishing constant term")
        return TaylorJet(self.base, _recip(self.coeffs))

    def exp(self) -> "TaylorJet":
        return TaylorJet(self.base, _exp(self.coeffs))

    def log(self) -> "TaylorJet":
        if not _off_cut(np.array([self.coeffs[0]]))[0]:
            raise BranchViolationError("log of a jet on the branch cut")
        return TaylorJet(self.base, _log(self.coeffs))

    def power(self, p: complex) -> "TaylorJet":
        if not _off_cut(np.array([self.coeffs[0]]))[0]:
            raise BranchViolationError("power of a jet on the branch cut")
        return TaylorJet(self.base, _power(self.coeffs, p))


def compose_jets(outer: TaylorJet, inner: TaylorJet) -> TaylorJet:
    """Jet of outer(inner(z)); outer must be expanded at inner's value"""
    if outer.order != inner.order:
        raise ValueError("jets must share the truncation order")
    if abs(outer.base - inner.coeffs[0]) > 1e-12 * max(1.0, abs(outer.base)):
        raise ValueError("outer jet is not based at the inner value")
    return TaylorJet(inner.base, _compose(outer.coeffs, inner.coeffs))


def _as_points(zs) -> np.ndarray:
    return np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()


def evaluate_many(expr: AnalyticExpr, zs) -> EvalBatch:
    """Evaluate at an array of points; status marks poles and branch hits"""
    engine = _JetEngine(_as_points(zs), 0)
    out = engine.run(expr)
    return EvalBatch(out.coeffs[0].copy(), out.status.copy())


def evaluate(expr: AnalyticExpr, z: Number) -> EvalResult:
    """Evaluate at a single point"""
    engine = _JetEngine(np.array([complex(z)]), 0)
    out = engine.run(expr)
    status = int(out.status[0])
    if status == FINITE:
        return Finite(complex(out.coeffs[0, 0]))
    if status == POLE:
        order = int(out.order[0])
        return Pole(order if order > 0 else None)
    for node, mask in engine.culprits:
        if mask[0]:
            return BranchViolation(node)
    return BranchViolation(expr)


def taylor_jets(expr: AnalyticExpr, zs, K: int = DEFAULT_JET_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    """Batched jets: coefficient array (K+1, N) and status array (N,)"""
    if K < 0:
        raise ValueError("jet order must be non-negative")
    engine = _JetEngine(_as_points(zs), K)
    out = engine.run(expr)
    return out.coeffs.copy(), out.status.copy()


def taylor_jet(expr: AnalyticExpr, z0: Number, K: int = DEFAULT_JET_ORDER) -> TaylorJet:
    """Taylor coefficients c_0..c_K of expr at z0"""
    coeffs, status = taylor_jets(expr, [z0], K)
    if status[0] == POLE:
        raise PoleAtBasePoint(f"pole at base point {complex(z0)}")
    if status[0] == BRANCH:
        raise BranchViolationError(f"branch cut reached at base point {complex(z0)}")
    return TaylorJet(complex(z0), coeffs[:, 0])


def field_apply(expr: AnalyticExpr, k: int, z: Number) -> complex:
    """k-th derivative along d/dz, read off the Taylor jet"""
    return taylor_jet(expr, z, k).derivative(k)


def fermat_terms(
    exprs: Sequence[AnalyticExpr],
    exponents: Sequence[int],
    zs,
    coefficients: Optional[Sequence[AnalyticExpr]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Terms alpha_j f_j^{n_j} at each point, shape (k, N), plus a combined status"""
    if len(exprs) != len(exponents):
        raise ValueError("one exponent per function is required")
    if coefficients is not None and len(coefficients) != len(exprs):
        raise ValueError("one coefficient per function is required")
    points = _as_points(zs)
    terms = np.zeros((len(exprs), points.size), dtype=complex)
    status = np.zeros(points.size, dtype=np.int8)
    for j, (f, n) in enumerate(zip(exprs, exponents)):
        batch = evaluate_many(f, points)
        status = np.maximum(status, batch.status)
        term = batch.values ** int(n)
        if coefficients is not None:
            alpha = evaluate_many(as_expr(coefficients[j]), points)
            status = np.maximum(status, alpha.status)
            term = term * alpha.values
        terms[j] = term
    terms[:, status != FINITE] = 0.0
    return terms, status


def residual(
    exprs: Sequence[AnalyticExpr],
    exponents: Sequence[int],
    z: Number,
    coefficients: Optional[Sequence[AnalyticExpr]] = None,
) -> float:
    """|sum alpha_j f_j^{n_j} - 1| at a single point"""
    terms, status = fermat_terms(exprs, exponents, [z], coefficients)
    if status[0] == POLE:
        raise SampleAtPole(f"sample {complex(z)} is a pole of the tuple")
    if status[0] == BRANCH:
        raise BranchViolationError(f"sample {complex(z)} reaches a branch cut")
    return float(abs(terms[:, 0].sum() - 1.0))
