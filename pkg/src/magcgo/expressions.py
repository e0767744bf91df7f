"""Closed-form field expressions over x1, x2, x3.

Expressions are parsed with sympy against a fixed whitelist and compiled to
vectorized numpy callables. Derivatives are always taken symbolically.
"""

from __future__ import annotations

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

X1, X2, X3 = sp.symbols("x1 x2 x3", real=True)
COORDS = (X1, X2, X3)


def _gauss(c1, c2, c3, s):
    return sp.exp(-((X1 - c1) ** 2 + (X2 - c2) ** 2 + (X3 - c3) ** 2) / (2 * s**2))


def _r2():
    return X1**2 + X2**2 + X3**2


WHITELIST = {
    "exp": sp.exp,
    "sin": sp.sin,
    "cos": sp.cos,
    "sqrt": sp.sqrt,
    "tanh": sp.tanh,
    "pi": sp.pi,
    "I": sp.I,
    "gauss": _gauss,
    "r2": _r2,
    "x1": X1,
    "x2": X2,
    "x3": X3,
}


class ExpressionError(ValueError):
    """Raised for expression strings outside the whitelist."""


def parse(text) -> sp.Expr:
    """Parse an expression string (or number) into a sympy expression."""
    if isinstance(text, sp.Basic):
        return text
    if isinstance(text, (int, float, complex)):
        return sp.sympify(text)
    try:
        expr = parse_expr(
            str(text),
            local_dict=dict(WHITELIST),
            global_dict={"__builtins__": {}, "Integer": sp.Integer,
                         "Float": sp.Float, "Rational": sp.Rational,
                         "Symbol": _reject_symbol},
            transformations=standard_transformations,
        )
    except ExpressionError:
        raise
    except Exception as exc:  # sympy raises a zoo of exception types
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from exc
    if not isinstance(expr, sp.Basic):
        raise ExpressionError(f"expression {text!r} did not evaluate to a sympy object")
    if not expr.free_symbols <= set(COORDS):
        raise ExpressionError(f"unknown symbols in {text!r}: {expr.free_symbols - set(COORDS)}")
    allowed = {sp.exp, sp.sin, sp.cos, sp.tanh}
    for f in expr.atoms(sp.Function):
        if f.func not in allowed:
            raise ExpressionError(f"function {f.func} not allowed in {text!r}")
    return expr


def _reject_symbol(name):
    raise ExpressionError(f"unknown name {name!r}")


def compile_scalar(expr: sp.Expr):
    """Vectorized evaluator f(points[..., 3]) -> complex array of shape points.shape[:-1]."""
    expr = sp.sympify(expr)
    fn = sp.lambdify(COORDS, expr, modules="numpy", cse=True)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        out = fn(x[..., 0], x[..., 1], x[..., 2])
        return np.broadcast_to(np.asarray(out, dtype=complex), x.shape[:-1]).copy()

    evaluate.expr = expr
    return evaluate


def compile_vector(exprs):
    """Vectorized evaluator for a 3-vector of expressions; returns [..., 3]."""
    exprs = [sp.sympify(e) for e in exprs]
    fn = sp.lambdify(COORDS, exprs, modules="numpy", cse=True)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        comps = fn(x[..., 0], x[..., 1], x[..., 2])
        return np.stack([np.broadcast_to(np.asarray(c, dtype=complex), x.shape[:-1])
                         for c in comps], axis=-1)

    evaluate.exprs = exprs
    return evaluate


def gradient(expr: sp.Expr):
    return [sp.diff(expr, c) for c in COORDS]


def divergence(exprs) -> sp.Expr:
    return sum(sp.diff(e, c) for e, c in zip(exprs, COORDS))


def curl(exprs):
    a1, a2, a3 = exprs
    return [
        sp.diff(a3, X2) - sp.diff(a2, X3),
        sp.diff(a1, X3) - sp.diff(a3, X1),
        sp.diff(a2, X1) - sp.diff(a1, X2),
    ]


def laplacian(expr: sp.Expr) -> sp.Expr:
    return sum(sp.diff(expr, c, 2) for c in COORDS)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1 (numeric, vectorized)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)
