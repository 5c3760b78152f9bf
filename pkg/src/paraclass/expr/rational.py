"""Common-denominator normal form, used to prove rational identities.

An expression is rewritten bottom-up as ``num / prod(b_i^k_i)`` where
``num`` is an expanded polynomial in opaque atoms (variables, parameters,
function calls, fractional powers) and every ``b_i`` is an expanded sum
normalised to leading coefficient one.  No gcds are taken, so the form is
not unique, but a zero numerator proves the expression is zero.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import OverflowBudget
from .core import ADD, CONST, FUNC, MUL, ONE, PARAM, POW, VAR, ZERO, Expr, add, func, mul, node_count, power, walk
from .core import _expand_once, _split_coeff

PROOF_NODE_LIMIT = 4000


class _Expander:
    """Full expansion with a per-call term cap and a cumulative work budget."""

    def __init__(self, limit: int, work: int):
        self.limit = limit
        self.left = work

    def __call__(self, e: Expr) -> Expr:
        for _ in range(8):
            nxt = _expand_once(e, self.limit)
            if nxt is e:
                break
            e = nxt
        self.left -= len(e.args) if e.kind == ADD else 1
        if self.left < 0:
            raise OverflowBudget("rational normalisation ran out of work budget")
        return e


def _leading(poly: Expr) -> tuple[Fraction, Expr]:
    """Split a sum into (leading coefficient, monic sum)."""
    c, _ = _split_coeff(poly.args[0])
    if c == 1:
        return Fraction(1), poly
    return c, mul(Fraction(1) / c, poly)


def _as_expr(r) -> Expr:
    num, den = r
    if not den:
        return num
    return mul(num, *[power(b, -k) for b, k in sorted(den.items(), key=lambda bk: bk[0].sort_key)])


def _invert(r, expand: _Expander):
    num, den = r
    if num is ZERO:
        raise ZeroDivisionError
    new_num = expand(mul(*[power(b, k) for b, k in den.items()])) if den else ONE
    if num.kind != ADD:
        # a monomial inverts in place
        return expand(mul(new_num, power(num, -1))), {}
    c, monic = _leading(num)
    return expand(mul(Fraction(1) / c, new_num)), {monic: 1}


def _pow_int(r, n: int, expand: _Expander):
    if n < 0:
        r = _invert(r, expand)
        n = -n
    num, den = r
    return expand(power(num, n)), {b: k * n for b, k in den.items()}


def rational_form(e: Expr, limit: int = 20000, work: int = 10**9):
    """``(numerator, {base: exponent})`` for ``e``.

    ``limit`` caps the terms of any single expansion and ``work`` the total
    number of terms produced; exceeding either raises OverflowBudget.
    """
    expand = _Expander(limit, work)
    memo: dict[int, tuple] = {}
    for node in walk(e):
        k = node.kind
        if k in (CONST, VAR, PARAM):
            r = (node, {})
        elif k == FUNC:
            r = (func(node.value, _as_expr(memo[id(node.args[0])])), {})
        elif k == POW:
            base = memo[id(node.args[0])]
            q = node.value
            if q.denominator == 1:
                r = _pow_int(base, int(q), expand)
            else:
                r = (power(_as_expr(base), q), {})
        elif k == MUL:
            num, den = ONE, {}
            for a in node.args:
                n2, d2 = memo[id(a)]
                num = expand(mul(num, n2))
                for b, kk in d2.items():
                    den[b] = den.get(b, 0) + kk
            r = (num, den)
        else:  # ADD: bring every term over the least common denominator
            parts = [memo[id(a)] for a in node.args]
            den = {}
            for _, d2 in parts:
                for b, kk in d2.items():
                    den[b] = max(den.get(b, 0), kk)
            terms = []
            for n2, d2 in parts:
                extra = [power(b, den[b] - d2.get(b, 0)) for b in den if den[b] > d2.get(b, 0)]
                terms.append(expand(mul(n2, *extra)) if extra else n2)
            r = (expand(add(*terms)), den)
        memo[id(node)] = r
    return memo[id(e)]


def rational_zero(e: Expr, limit: int = 5000, work: int = 50_000) -> bool:
    """True if the common-denominator numerator of ``e`` expands to zero."""
    try:
        num, _ = rational_form(e, limit, work)
    except (OverflowBudget, ZeroDivisionError):
        return False
    return num is ZERO


def provably_zero(e: Expr, limit: int = 5000, work: int = 50_000) -> bool:
    """Symbolic proof that ``e`` vanishes; ``False`` means "not proven".

    Inputs above ``PROOF_NODE_LIMIT`` nodes are not attempted.
    """
    if e is ZERO:
        return True
    if node_count(e) > PROOF_NODE_LIMIT:
        return False
    return rational_zero(e, limit, work)
