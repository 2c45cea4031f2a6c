"""
Prefix S-expression form of analytic expressions

    expr := z | NUMBER | (const RE IM) | (+ e e) | (* e e) | (neg e) | (recip e)
          | (pow e INT) | (exp e) | (log e) | (root e INT) | (compose e e)
          | (wp) | (wp-prime) | (- e e) | (/ e e)
"""
import re
from typing import Dict, List, Optional

from fermatlab.services.expr_core import (
    Add,
    AnalyticExpr,
    Compose,
    Const,
    Exp,
    FermatLabError,
    IntPow,
    LogPrincipal,
    Mul,
    Neg,
    NthRootPrincipal,
    Recip,
    Var,
    WpNode,
    WpPrimeNode,
    Z,
    compose,
)

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


class SExprError(FermatLabError):
    """Malformed S-expression"""
    pass


def _number(value: complex) -> str:
    if value.imag == 0.0:
        return repr(value.real)
    return f"(const {value.real!r} {value.imag!r})"


def to_sexpr(expr: AnalyticExpr) -> str:
    memo: Dict[int, str] = {}

    def emit(node: AnalyticExpr) -> str:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = "z"
        elif isinstance(node, Const):
            out = _number(node.value)
        elif isinstance(node, Add):
            out = f"(+ {emit(node.left)} {emit(node.right)})"
        elif isinstance(node, Mul):
            out = f"(* {emit(node.left)} {emit(node.right)})"
        elif isinstance(node, Neg):
            out = f"(neg {emit(node.arg)})"
        elif isinstance(node, Recip):
            out = f"(recip {emit(node.arg)})"
        elif isinstance(node, IntPow):
            out = f"(pow {emit(node.arg)} {node.exponent})"
        elif isinstance(node, Exp):
            out = f"(exp {emit(node.arg)})"
        elif isinstance(node, LogPrincipal):
            out = f"(log {emit(node.arg)})"
        elif isinstance(node, NthRootPrincipal):
            out = f"(root {emit(node.arg)} {node.n})"
        elif isinstance(node, Compose):
            out = f"(compose {emit(node.outer)} {emit(node.inner)})"
        elif isinstance(node, WpNode):
            out = "(wp)"
        elif isinstance(node, WpPrimeNode):
            out = "(wp-prime)"
        else:
            raise SExprError(f"cannot serialize node {type(node).__name__}")
        memo[id(node)] = out
        return out

    return emit(expr)


def parse_sexpr(text: str, context: Optional[object] = None) -> AnalyticExpr:
    """Inverse of to_sexpr; p-nodes bind to context, or the shared equianharmonic one"""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise SExprError("empty expression")
    pos = 0

    def elliptic():
        if context is not None:
            return context
        from fermatlab.services.elliptic import default_context
        return default_context()

    def integer(token: str) -> int:
        try:
            return int(token)
        except ValueError:
            raise SExprError(f"expected an integer, got {token!r}")

    def atom(token: str) -> AnalyticExpr:
        if token == "z":
            return Z
        try:
            return Const(complex(token.replace("i", "j")))
        except ValueError:
            raise SExprError(f"unknown atom {token!r}")

    def parse() -> AnalyticExpr:
        nonlocal pos
        if pos >= len(tokens):
            raise SExprError("unexpected end of expression")
        token = tokens[pos]
        pos += 1
        if token == ")":
            raise SExprError("unexpected ')'")
        if token != "(":
            return atom(token)
        if pos >= len(tokens):
            raise SExprError("unexpected end of expression")
        head = tokens[pos]
        pos += 1
        args: List[str] = []
        children: List[AnalyticExpr] = []

        if head == "const":
            args = tokens[pos : pos + 2]
            pos += 2
            try:
                node: AnalyticExpr = Const(complex(float(args[0]), float(args[1])))
            except (ValueError, IndexError):
                raise SExprError(f"bad constant {args}")
        elif head in ("pow", "root"):
            base = parse()
            if pos >= len(tokens):
                raise SExprError("unexpected end of expression")
            n = integer(tokens[pos])
            pos += 1
            if head == "pow":
                if n == 0:
                    node = Const(1.0)
                else:
                    node = base if n == 1 else IntPow(base, n)
            else:
                if n < 1:
                    raise SExprError("root index must be positive")
                node = base if n == 1 else NthRootPrincipal(base, n)
        elif head == "wp":
            node = WpNode(elliptic())
        elif head == "wp-prime":
            node = WpPrimeNode(elliptic())
        else:
            while pos < len(tokens) and tokens[pos] != ")":
                children.append(parse())
            node = _combine(head, children)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise SExprError(f"missing ')' after {head!r}")
        pos += 1
        return node

    expr = parse()
    if pos != len(tokens):
        raise SExprError("trailing tokens after expression")
    return expr


def _combine(head: str, children: List[AnalyticExpr]) -> AnalyticExpr:
    unary = {"neg": Neg, "recip": Recip, "exp": Exp, "log": LogPrincipal}
    if head in unary:
        if len(children) != 1:
            raise SExprError(f"{head} takes one argument")
        return unary[head](children[0])
    if head in ("+", "*"):
        if len(children) < 2:
            raise SExprError(f"{head} takes at least two arguments")
        node = children[0]
        for child in children[1:]:
            node = Add(node, child) if head == "+" else Mul(node, child)
        return node
    if head in ("-", "/"):
        if len(children) != 2:
            raise SExprError(f"{head} takes two arguments")
        left, right = children
        return Add(left, Neg(right)) if head == "-" else Mul(left, Recip(right))
    if head == "compose":
        if len(children) != 2:
            raise SExprError("compose takes two arguments")
        return compose(children[0], children[1])
    raise SExprError(f"unknown operator {head!r}")
