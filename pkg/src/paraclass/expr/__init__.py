"""Symbolic expression kernel."""

from .core import (
    ONE,
    ZERO,
    Expr,
    add,
    const,
    cos,
    diff,
    exp,
    free_params,
    free_vars,
    ln,
    mul,
    node_count,
    param,
    power,
    root5,
    simplify,
    sin,
    sqrt,
    subs,
    to_str,
    var,
)
from .core import T as t_var
from .core import X as x_var
from .evaluate import (
    DEFAULT_PRECISION,
    Evaluator,
    Point,
    Window,
    ZeroState,
    ZeroVerdict,
    context,
    evaluate,
    evaluator,
    is_zero,
    to_mpf,
)
from .parse import parse
from .rational import provably_zero, rational_form

__all__ = [
    "DEFAULT_PRECISION",
    "Evaluator",
    "Expr",
    "ONE",
    "Point",
    "Window",
    "ZERO",
    "ZeroState",
    "ZeroVerdict",
    "add",
    "const",
    "context",
    "cos",
    "diff",
    "evaluate",
    "evaluator",
    "exp",
    "free_params",
    "free_vars",
    "is_zero",
    "ln",
    "mul",
    "node_count",
    "param",
    "parse",
    "power",
    "root5",
    "provably_zero",
    "rational_form",
    "simplify",
    "sin",
    "sqrt",
    "subs",
    "t_var",
    "x_var",
    "to_mpf",
    "to_str",
    "var",
]
