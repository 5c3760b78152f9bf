"""Immutable, hash-consed expression trees in the variables ``t`` and ``x``.

Every node is built through a smart constructor that returns a canonical
form: sums and products are flattened and sorted, rational constants are
merged, like terms and identical power bases are collected.  Nodes are
interned, so structural equality is object identity and the ``==``
operator is cheap.

Canonical form is deliberately shallow.  Distribution of products over
sums only happens in :func:`simplify`, which is what the zero tests use.
"""

from __future__ import annotations

import hashlib
import threading
import weakref
from fractions import Fraction
from typing import Iterable, Mapping, Union

from ..errors import DomainError, OverflowBudget

# Node kinds double as the primary sort rank.
CONST, VAR, PARAM, ADD, MUL, POW, FUNC = range(7)
_KIND_NAMES = ("const", "var", "param", "add", "mul", "pow", "func")

VARIABLES = ("t", "x")
FUNCTIONS = ("exp", "ln", "sin", "cos", "root5")

Number = Union[int, Fraction]


class Expr:
    """A node of the expression DAG.  Never instantiate directly."""

    __slots__ = ("kind", "value", "args", "_hash", "_digest", "_diff", "__weakref__")

    kind: int
    value: object
    args: tuple

    def __hash__(self) -> int:
        return self._hash

    # identity equality is structural equality because nodes are interned
    def __eq__(self, other: object) -> bool:
        return self is other

    def __ne__(self, other: object) -> bool:
        return self is not other

    def __reduce__(self):
        return (parse_canonical, (to_str(self),))

    @property
    def sort_key(self) -> tuple:
        return (self.kind, self._digest)

    def __repr__(self) -> str:
        text = to_str(self)
        if len(text) > 200:
            text = text[:200] + "..."
        return f"Expr({text})"

    def __str__(self) -> str:
        return to_str(self)

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(_coerce(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        if isinstance(exponent, Expr):
            if exponent.kind != CONST:
                raise TypeError("exponent must be a rational constant")
            exponent = exponent.value
        return power(self, exponent)

    def d(self, variable: str) -> "Expr":
        return diff(self, variable)

    @property
    def is_constant(self) -> bool:
        return self.kind == CONST


_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_lock = threading.Lock()


def _make(kind: int, value, args: tuple = ()) -> Expr:
    key = (kind, value, args)
    with _lock:
        node = _table.get(key)
        if node is not None:
            return node
        node = object.__new__(Expr)
        h = hashlib.blake2b(digest_size=16)
        h.update(bytes((kind,)))
        h.update(repr(value).encode())
        for a in args:
            h.update(a._digest)
        node.kind = kind
        node.value = value
        node.args = args
        node._digest = h.digest()
        node._hash = int.from_bytes(node._digest[:8], "little")
        node._diff = {}
        _table[key] = node
        return node


def const(value: Number) -> Expr:
    return _make(CONST, Fraction(value))


ZERO = const(0)
ONE = const(1)
T = _make(VAR, "t")
X = _make(VAR, "x")


def var(name: str) -> Expr:
    if name not in VARIABLES:
        raise ValueError(f"unknown variable {name!r}")
    return T if name == "t" else X


def param(name: str) -> Expr:
    if name in VARIABLES or name in FUNCTIONS:
        raise ValueError(f"{name!r} is reserved")
    return _make(PARAM, name)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return const(value)
    raise TypeError(f"cannot build an expression from {type(value).__name__}")


def _sorted(nodes: Iterable[Expr]) -> tuple:
    return tuple(sorted(nodes, key=lambda n: n.sort_key))


# ---------------------------------------------------------------------------
# smart constructors


def _split_coeff(term: Expr) -> tuple[Fraction, Expr]:
    if term.kind == MUL and term.args[0].kind == CONST:
        rest = term.args[1:]
        return term.args[0].value, rest[0] if len(rest) == 1 else _make(MUL, None, rest)
    return Fraction(1), term


def _scale(term: Expr, coeff: Fraction) -> Expr:
    if coeff == 1:
        return term
    if term.kind == MUL:
        return _make(MUL, None, (const(coeff),) + term.args)
    return _make(MUL, None, (const(coeff), term))


def add(*terms) -> Expr:
    total = Fraction(0)
    coeffs: dict[Expr, Fraction] = {}
    stack = [_coerce(t) for t in terms]
    stack.reverse()
    while stack:
        term = stack.pop()
        if term.kind == CONST:
            total += term.value
        elif term.kind == ADD:
            stack.extend(reversed(term.args))
        else:
            c, rest = _split_coeff(term)
            coeffs[rest] = coeffs.get(rest, 0) + c
    out = [_scale(rest, c) for rest, c in coeffs.items() if c != 0]
    if not out:
        return const(total)
    out = list(_sorted(out))
    if total != 0:
        out.insert(0, const(total))
    if len(out) == 1:
        return out[0]
    return _make(ADD, None, tuple(out))


def mul(*factors) -> Expr:
    coeff = Fraction(1)
    powers: dict[Expr, Fraction] = {}
    exp_args: list[Expr] = []
    stack = [_coerce(f) for f in factors]
    while stack:
        f = stack.pop()
        k = f.kind
        if k == CONST:
            coeff *= f.value
            if coeff == 0:
                return ZERO
        elif k == MUL:
            stack.extend(f.args)
        elif k == FUNC and f.value == "exp":
            exp_args.append(f.args[0])
        elif k == POW:
            base = f.args[0]
            powers[base] = powers.get(base, 0) + f.value
        else:
            powers[f] = powers.get(f, 0) + 1

    out: list[Expr] = []
    regroup = False
    for base, e in powers.items():
        if e == 0:
            continue
        p = power(base, e)
        if p.kind == CONST:
            coeff *= p.value
        elif p.kind == MUL:
            # root5 normalisation may spill into another base
            regroup = True
            out.extend(p.args)
        else:
            out.append(p)
    if exp_args:
        e = exp(add(*exp_args))
        if e.kind == CONST:
            coeff *= e.value
        else:
            out.append(e)
    if regroup:
        return mul(const(coeff), *out)
    if coeff == 0:
        return ZERO
    if not out:
        return const(coeff)
    if len(out) == 1:
        only = out[0]
        if coeff == 1:
            return only
        if only.kind == ADD:
            return add(*(mul(coeff, a) for a in only.args))
        return _make(MUL, None, (const(coeff), only))
    args = _sorted(out)
    if coeff != 1:
        args = (const(coeff),) + args
    return _make(MUL, None, args)


def _int_root(n: int, k: int) -> int | None:
    if n < 0:
        return None
    if n < 2:
        return n
    r = round(n ** (1.0 / k)) if n < 1 << 1000 else None
    if r is None:
        lo, hi = 0, 1 << (n.bit_length() // k + 1)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if mid**k <= n:
                lo = mid
            else:
                hi = mid - 1
        r = lo
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == n:
            return cand
    return None


def _const_power(c: Fraction, q: Fraction) -> Expr:
    if q.denominator == 1:
        if c == 0 and q < 0:
            raise DomainError("zero raised to a negative power")
        return const(c ** int(q))
    if c < 0:
        raise DomainError("non-integer power of a negative constant")
    if c == 0:
        if q > 0:
            return ZERO
        raise DomainError("zero raised to a negative power")
    k = q.denominator
    num, den = _int_root(c.numerator, k), _int_root(c.denominator, k)
    if num is not None and den is not None:
        return const(Fraction(num, den) ** q.numerator)
    return _make(POW, q, (const(c),))


def power(base, exponent: Number) -> Expr:
    base = _coerce(base)
    q = Fraction(exponent)
    if q == 0:
        return ONE
    if q == 1:
        return base
    k = base.kind
    if k == CONST:
        return _const_power(base.value, q)
    if k == POW:
        if q.denominator == 1 or base.value.denominator != 1:
            return power(base.args[0], base.value * q)
    elif k == MUL:
        if q.denominator == 1:
            return mul(*(power(f, q) for f in base.args))
        head = base.args[0]
        if head.kind == CONST and head.value > 0:
            rest = base.args[1:]
            inner = rest[0] if len(rest) == 1 else _make(MUL, None, rest)
            return mul(_const_power(head.value, q), power(inner, q))
    elif k == FUNC:
        if base.value == "exp":
            return exp(mul(q, base.args[0]))
        if base.value == "root5":
            inner = base.args[0]
            if q.denominator != 1:
                return power(inner, q / 5)
            whole, rem = divmod(int(q), 5)
            head = power(inner, whole)
            if rem == 0:
                return head
            tail = base if rem == 1 else _make(POW, Fraction(rem), (base,))
            if head is ONE:
                return tail
            return mul(head, tail)
    return _make(POW, q, (base,))


def func(name: str, arg) -> Expr:
    arg = _coerce(arg)
    if name == "exp":
        return exp(arg)
    if name == "ln":
        return ln(arg)
    if name == "sin":
        return sin(arg)
    if name == "cos":
        return cos(arg)
    if name == "root5":
        return root5(arg)
    if name == "sqrt":
        return power(arg, Fraction(1, 2))
    raise ValueError(f"unknown function {name!r}")


def exp(arg) -> Expr:
    arg = _coerce(arg)
    if arg is ZERO:
        return ONE
    if arg.kind == FUNC and arg.value == "ln":
        return arg.args[0]
    return _make(FUNC, "exp", (arg,))


def ln(arg) -> Expr:
    arg = _coerce(arg)
    if arg.kind == CONST:
        if arg.value <= 0:
            raise DomainError("logarithm of a non-positive constant")
        if arg.value == 1:
            return ZERO
    if arg.kind == FUNC and arg.value == "exp":
        return arg.args[0]
    return _make(FUNC, "ln", (arg,))


def sin(arg) -> Expr:
    arg = _coerce(arg)
    if arg is ZERO:
        return ZERO
    return _make(FUNC, "sin", (arg,))


def cos(arg) -> Expr:
    arg = _coerce(arg)
    if arg is ZERO:
        return ONE
    return _make(FUNC, "cos", (arg,))


def sqrt(arg) -> Expr:
    return power(arg, Fraction(1, 2))


def root5(arg) -> Expr:
    """Real (sign-preserving) fifth root.

    Odd roots are multiplicative over the reals and commute with integer
    powers, so the node is pushed through products and powers eagerly.
    """
    arg = _coerce(arg)
    k = arg.kind
    if k == CONST:
        c = arg.value
        if c < 0:
            return mul(-1, root5(const(-c)))
        num, den = _int_root(c.numerator, 5), _int_root(c.denominator, 5)
        if num is not None and den is not None:
            return const(Fraction(num, den))
        return _make(FUNC, "root5", (arg,))
    if k == MUL:
        return mul(*(root5(f) for f in arg.args))
    if k == POW:
        base, q = arg.args[0], arg.value
        if q.denominator == 1:
            return power(root5(base), q)
        return power(base, q / 5)
    if k == FUNC and arg.value == "exp":
        return exp(mul(Fraction(1, 5), arg.args[0]))
    return _make(FUNC, "root5", (arg,))


# ---------------------------------------------------------------------------
# calculus


def diff(e: Expr, v: str) -> Expr:
    """Exact partial derivative with respect to ``v`` (memoised per node)."""
    if v not in VARIABLES:
        raise ValueError(f"unknown variable {v!r}")
    cached = e._diff.get(v)
    if cached is not None:
        return cached
    # iterative post-order so deep trees do not hit the recursion limit
    stack = [e]
    while stack:
        node = stack[-1]
        pending = [a for a in node.args if v not in a._diff]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        if v not in node._diff:
            node._diff[v] = _diff_node(node, v)
    return e._diff[v]


def _diff_node(e: Expr, v: str) -> Expr:
    k = e.kind
    if k == CONST or k == PARAM:
        return ZERO
    if k == VAR:
        return ONE if e.value == v else ZERO
    if k == ADD:
        return add(*(a._diff[v] for a in e.args))
    if k == MUL:
        terms = []
        args = e.args
        for i, a in enumerate(args):
            da = a._diff[v]
            if da is ZERO:
                continue
            terms.append(mul(da, *args[:i], *args[i + 1 :]))
        return add(*terms)
    if k == POW:
        base = e.args[0]
        db = base._diff[v]
        if db is ZERO:
            return ZERO
        return mul(e.value, power(base, e.value - 1), db)
    a = e.args[0]
    da = a._diff[v]
    if da is ZERO:
        return ZERO
    name = e.value
    if name == "exp":
        return mul(e, da)
    if name == "ln":
        return mul(da, power(a, -1))
    if name == "sin":
        return mul(cos(a), da)
    if name == "cos":
        return mul(-1, sin(a), da)
    if name == "root5":
        return mul(Fraction(1, 5), da, power(e, -4))
    raise AssertionError(name)


# ---------------------------------------------------------------------------
# traversal helpers


def walk(e: Expr):
    """Yield every distinct node of the DAG once, children before parents."""
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not node.args:
            seen.add(id(node))
            yield node
            continue
        stack.append((node, True))
        for a in node.args:
            if id(a) not in seen:
                stack.append((a, False))


def node_count(*exprs: Expr) -> int:
    seen: set[int] = set()
    stack = list(exprs)
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(node.args)
    return len(seen)


def free_params(e: Expr) -> set[str]:
    return {n.value for n in walk(e) if n.kind == PARAM}


def free_vars(e: Expr) -> set[str]:
    return {n.value for n in walk(e) if n.kind == VAR}


def rebuild(e: Expr, leaf) -> Expr:
    """Rebuild ``e`` bottom-up, replacing leaves via ``leaf(node) -> Expr|None``."""
    memo: dict[int, Expr] = {}
    for node in walk(e):
        k = node.kind
        if not node.args:
            new = leaf(node)
            memo[id(node)] = node if new is None else new
        else:
            args = [memo[id(a)] for a in node.args]
            if k == ADD:
                memo[id(node)] = add(*args)
            elif k == MUL:
                memo[id(node)] = mul(*args)
            elif k == POW:
                memo[id(node)] = power(args[0], node.value)
            else:
                memo[id(node)] = func(node.value, args[0])
    return memo[id(e)]


def subs(e: Expr, mapping: Mapping[str, object]) -> Expr:
    """Simultaneous substitution of variables and/or named parameters."""
    repl = {k: _coerce(v) for k, v in mapping.items()}

    def leaf(node):
        if node.kind in (VAR, PARAM):
            return repl.get(node.value)
        return None

    return rebuild(e, leaf)


# ---------------------------------------------------------------------------
# expansion


EXPAND_TERM_LIMIT = 20000


def _expand_node(node: Expr, args: list[Expr], limit: int) -> Expr:
    k = node.kind
    if k == ADD:
        return add(*args)
    if k == MUL:
        terms = [ONE]
        for f in args:
            if f.kind == ADD:
                if len(terms) * len(f.args) > limit:
                    raise OverflowBudget("expansion exceeds term limit")
                terms = [mul(a, b) for a in terms for b in f.args]
            else:
                terms = [mul(a, f) for a in terms]
        return add(*terms)
    if k == POW:
        base = args[0]
        q = node.value
        if base.kind == ADD and q.denominator == 1 and q > 1:
            n = int(q)
            if len(base.args) ** n > limit:
                raise OverflowBudget("expansion exceeds term limit")
            terms = [ONE]
            for _ in range(n):
                terms = [mul(a, b) for a in terms for b in base.args]
            return add(*terms)
        return power(base, q)
    return func(node.value, args[0])


def _expand_once(e: Expr, limit: int) -> Expr:
    memo: dict[int, Expr] = {}
    for node in walk(e):
        if not node.args:
            memo[id(node)] = node
        else:
            memo[id(node)] = _expand_node(node, [memo[id(a)] for a in node.args], limit)
    return memo[id(e)]


def simplify(e: Expr, limit: int = EXPAND_TERM_LIMIT) -> Expr:
    """Expanded canonical form (products distributed over sums).

    Falls back to the constructor-canonical input when the expansion would
    exceed ``limit`` terms, so the result is always mathematically equal.
    """
    e = _coerce(e)
    try:
        for _ in range(8):
            nxt = _expand_once(e, limit)
            if nxt is e:
                return e
            e = nxt
    except OverflowBudget:
        return e
    return e


# ---------------------------------------------------------------------------
# printing


def _fmt_fraction(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def to_str(e: Expr) -> str:
    """Render in the input grammar; ``parse(to_str(e)) is e``."""
    memo: dict[int, tuple[str, int]] = {}
    for node in walk(e):
        memo[id(node)] = _render(node, memo)
    return memo[id(e)][0]


# precedence levels: 1 sum, 2 product, 3 unary minus, 4 power, 5 atom
def _wrap(item: tuple[str, int], level: int) -> str:
    text, prec = item
    return f"({text})" if prec < level else text


def _render(node: Expr, memo) -> tuple[str, int]:
    k = node.kind
    if k == CONST:
        q = node.value
        if q < 0:
            return _fmt_fraction(q), 3 if q.denominator == 1 else 2
        return _fmt_fraction(q), 5 if q.denominator == 1 else 2
    if k in (VAR, PARAM):
        return node.value, 5
    if k == FUNC:
        return f"{node.value}({memo[id(node.args[0])][0]})", 5
    if k == POW:
        base = _wrap(memo[id(node.args[0])], 5)
        q = node.value
        if q.denominator == 1 and q > 0:
            return f"{base}^{q.numerator}", 4
        return f"{base}^({_fmt_fraction(q)})", 4
    if k == MUL:
        args = node.args
        sign = ""
        parts = []
        if args[0].kind == CONST:
            c = args[0].value
            if c < 0:
                sign, c = "-", -c
            if c != 1:
                parts.append(_wrap((_fmt_fraction(c), 5 if c.denominator == 1 else 2), 3))
            args = args[1:]
        parts.extend(_wrap(memo[id(a)], 3) for a in args)
        text = "*".join(parts)
        return (sign + text, 2) if not sign else (sign + text, 2)
    # ADD
    pieces = []
    for i, a in enumerate(node.args):
        text, prec = memo[id(a)]
        if i and text.startswith("-"):
            pieces.append(" - " + (text[1:] if prec >= 2 else f"({text[1:]})"))
        elif i:
            pieces.append(" + " + text)
        else:
            pieces.append(text)
    return "".join(pieces), 1


def parse_canonical(text: str) -> Expr:
    from .parse import parse

    return parse(text)
