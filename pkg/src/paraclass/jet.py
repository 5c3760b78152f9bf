"""Truncated bivariate Taylor series ("jets") at a base point.

A :class:`Jet2` of order ``d`` stores ``c[i][j]`` for ``i + j <= d``, the
coefficient of ``(t - t0)**i (x - x0)**j``.  Arithmetic propagates the
truncated series exactly (up to rounding), so high mixed partials of a
composite expression come out without any symbolic differentiation.  This
module is the independent oracle for :func:`paraclass.expr.diff`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Optional

import mpmath

from .errors import DomainError, OrderExceeded, UnboundParameter
from .expr.core import ADD, CONST, MUL, PARAM, POW, VAR, Expr, walk
from .expr.evaluate import DEFAULT_PRECISION, GUARD_DIGITS, Point, context

MAX_ORDER = 16


class Jet2:
    __slots__ = ("base", "order", "c", "ctx")

    def __init__(self, base: Point, order: int, coeffs, ctx):
        self.base = base
        self.order = order
        self.c = coeffs
        self.ctx = ctx

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, base: Point, order: int, ctx) -> "Jet2":
        c = [[ctx.zero] * (order - i + 1) for i in range(order + 1)]
        c[0][0] = ctx.mpf(value)
        return cls(base, order, c, ctx)

    @classmethod
    def variable(cls, name: str, base: Point, order: int, ctx) -> "Jet2":
        j = cls.constant(base.t if name == "t" else base.x, base, order, ctx)
        if order >= 1:
            if name == "t":
                j.c[1][0] = ctx.one
            else:
                j.c[0][1] = ctx.one
        return j

    def _zeros(self, order: int):
        z = self.ctx.zero
        return [[z] * (order - i + 1) for i in range(order + 1)]

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        if isinstance(other, Fraction):
            other = self.ctx.mpf(other.numerator) / other.denominator
        return Jet2.constant(other, self.base, self.order, self.ctx)

    @property
    def value(self):
        return self.c[0][0]

    @property
    def size(self) -> int:
        return (self.order + 1) * (self.order + 2) // 2

    def coefficient(self, i: int, j: int):
        if i + j > self.order:
            raise OrderExceeded(f"coefficient ({i},{j}) beyond order {self.order}")
        return self.c[i][j]

    def truncate(self, order: int) -> "Jet2":
        order = min(order, self.order)
        return Jet2(self.base, order, [row[: order - i + 1] for i, row in enumerate(self.c[: order + 1])], self.ctx)

    # ring operations --------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        d = min(self.order, other.order)
        c = [[a + b for a, b in zip(self.c[i][: d - i + 1], other.c[i])] for i in range(d + 1)]
        return Jet2(self.base, d, c, self.ctx)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(self.base, self.order, [[-a for a in row] for row in self.c], self.ctx)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def scale(self, k) -> "Jet2":
        k = self.ctx.mpf(k)
        return Jet2(self.base, self.order, [[k * a for a in row] for row in self.c], self.ctx)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            if isinstance(other, Fraction):
                other = self.ctx.mpf(other.numerator) / other.denominator
            return self.scale(other)
        d = min(self.order, other.order)
        a, b = self.c, other.c
        out = self._zeros(d)
        for i1 in range(d + 1):
            arow = a[i1]
            for j1 in range(d - i1 + 1):
                av = arow[j1]
                if not av:
                    continue
                for i2 in range(d - i1 - j1 + 1):
                    brow = b[i2]
                    orow = out[i1 + i2]
                    for j2 in range(d - i1 - i2 - j1 + 1):
                        orow[j1 + j2] += av * brow[j2]
        return Jet2(self.base, d, out, self.ctx)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        """Series of ``1/f`` by the standard division recurrence."""
        f0 = self.c[0][0]
        if not f0:
            raise DomainError("reciprocal of a jet vanishing at its base")
        d = self.order
        f = self.c
        q = self._zeros(d)
        inv = 1 / f0
        for n in range(d + 1):
            for i in range(n + 1):
                j = n - i
                s = self.ctx.one if n == 0 else self.ctx.zero
                for a in range(i + 1):
                    fa = f[a]
                    qa = q[i - a]
                    for b in range(j + 1):
                        if a == 0 and b == 0:
                            continue
                        fv = fa[b]
                        if fv:
                            s -= fv * qa[j - b]
                q[i][j] = s * inv
        return Jet2(self.base, d, q, self.ctx)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            if isinstance(other, Fraction):
                return self * Fraction(other.denominator, other.numerator)
            return self.scale(1 / self.ctx.mpf(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, q):
        q = Fraction(q)
        if q.denominator == 1:
            n = int(q)
            if n < 0:
                return self.reciprocal() ** (-n)
            result = Jet2.constant(1, self.base, self.order, self.ctx)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        f0 = self.c[0][0]
        if f0 <= 0:
            raise DomainError("non-integer power of a non-positive jet")
        qm = self.ctx.mpf(q.numerator) / q.denominator
        derivs = []
        coef = self.ctx.one
        for k in range(self.order + 1):
            derivs.append(coef * self.ctx.power(f0, qm - k))
            coef *= qm - k
        return self._compose(derivs)

    # elementary functions via Taylor composition ---------------------
    def _compose(self, derivs) -> "Jet2":
        """``F(f)`` given ``derivs[k] = F^(k)(f(base))``."""
        d = self.order
        delta = Jet2(self.base, d, [row[:] for row in self.c], self.ctx)
        delta.c[0][0] = self.ctx.zero
        out = Jet2.constant(derivs[0], self.base, d, self.ctx)
        term = Jet2.constant(1, self.base, d, self.ctx)
        for k in range(1, d + 1):
            term = term * delta
            out = out + term.scale(derivs[k] / math.factorial(k))
        return out

    def exp(self) -> "Jet2":
        e0 = self.ctx.exp(self.c[0][0])
        return self._compose([e0] * (self.order + 1))

    def ln(self) -> "Jet2":
        f0 = self.c[0][0]
        if f0 <= 0:
            raise DomainError("logarithm of a non-positive jet")
        derivs = [self.ctx.ln(f0)]
        for k in range(1, self.order + 1):
            derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / f0**k)
        return self._compose(derivs)

    def sin(self) -> "Jet2":
        s, c = self.ctx.sin(self.c[0][0]), self.ctx.cos(self.c[0][0])
        cycle = [s, c, -s, -c]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet2":
        s, c = self.ctx.sin(self.c[0][0]), self.ctx.cos(self.c[0][0])
        cycle = [c, -s, -c, s]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def root5(self) -> "Jet2":
        f0 = self.c[0][0]
        if not f0:
            raise DomainError("fifth root is not analytic at zero")
        sign = 1 if f0 > 0 else -1
        a = abs(f0)
        q = self.ctx.mpf(1) / 5
        derivs = []
        coef = self.ctx.one
        for k in range(self.order + 1):
            derivs.append(sign ** (k + 1) * coef * self.ctx.power(a, q - k))
            coef *= q - k
        return self._compose(derivs)

    # differentiation --------------------------------------------------
    def d(self, variable: str) -> "Jet2":
        """Jet of the partial derivative; the order drops by one."""
        if self.order == 0:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        d = self.order - 1
        if variable == "t":
            c = [[(i + 1) * self.c[i + 1][j] for j in range(d - i + 1)] for i in range(d + 1)]
        elif variable == "x":
            c = [[(j + 1) * self.c[i][j + 1] for j in range(d - i + 1)] for i in range(d + 1)]
        else:
            raise ValueError(f"unknown variable {variable!r}")
        return Jet2(self.base, d, c, self.ctx)

    def __repr__(self) -> str:
        return f"Jet2(order={self.order}, value={mpmath.nstr(self.value, 12)})"


def jet_root5(j: Jet2) -> Jet2:
    return j.root5()


def jet_eval(
    e: Expr,
    p: Point,
    d: int,
    precision: int = DEFAULT_PRECISION,
    params: Optional[Mapping[str, object]] = None,
) -> Jet2:
    """Taylor jet of ``e`` at ``p`` truncated at total order ``d``."""
    if not 0 <= d <= MAX_ORDER:
        raise ValueError(f"jet order must lie in [0, {MAX_ORDER}]")
    ctx = context(precision + GUARD_DIGITS)
    base = Point(ctx.mpf(p.t), ctx.mpf(p.x))
    params = params or {}
    memo: dict[int, Jet2] = {}
    for node in walk(e):
        k = node.kind
        if k == CONST:
            q = node.value
            j = Jet2.constant(ctx.mpf(q.numerator) / q.denominator, base, d, ctx)
        elif k == VAR:
            j = Jet2.variable(node.value, base, d, ctx)
        elif k == PARAM:
            if node.value not in params:
                raise UnboundParameter(node.value)
            v = params[node.value]
            if isinstance(v, Fraction):
                v = ctx.mpf(v.numerator) / v.denominator
            j = Jet2.constant(v, base, d, ctx)
        elif k == ADD:
            args = [memo[id(a)] for a in node.args]
            j = args[0]
            for a in args[1:]:
                j = j + a
        elif k == MUL:
            args = [memo[id(a)] for a in node.args]
            j = args[0]
            for a in args[1:]:
                j = j * a
        elif k == POW:
            j = memo[id(node.args[0])] ** node.value
        else:
            a = memo[id(node.args[0])]
            j = getattr(a, node.value)()
        memo[id(node)] = j
    return memo[id(e)]


def derivative(j: Jet2, i: int, k: int):
    """The mixed partial d^i/dt^i d^k/dx^k at the jet's base point."""
    if i < 0 or k < 0:
        raise ValueError("derivative orders must be non-negative")
    if i + k > j.order:
        raise OrderExceeded(f"derivative ({i},{k}) beyond jet order {j.order}")
    return math.factorial(i) * math.factorial(k) * j.c[i][k]
