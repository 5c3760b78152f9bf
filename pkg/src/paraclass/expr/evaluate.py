"""High-precision point evaluation and the tri-state zero test."""

from __future__ import annotations

import enum
import functools
import math
import random
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import gmpy2
import mpmath

from ..errors import AllPointsRejected, DomainError, UnboundParameter
from .core import ADD, CONST, MUL, PARAM, POW, VAR, Expr, node_count, walk
from .rational import PROOF_NODE_LIMIT, provably_zero

GUARD_DIGITS = 10
DEFAULT_PRECISION = 40


@functools.lru_cache(maxsize=None)
def context(dps: int) -> mpmath.ctx_mp.MPContext:
    """A private mpmath context fixed at ``dps`` decimal digits."""
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def to_mpf(value, dps: int = DEFAULT_PRECISION):
    ctx = context(dps + GUARD_DIGITS)
    if isinstance(value, Fraction):
        return ctx.mpf(value.numerator) / value.denominator
    if isinstance(value, str):
        return ctx.mpf(value)
    return ctx.mpf(value)


@dataclass(frozen=True)
class Point:
    t: object
    x: object

    def __post_init__(self):
        for v in (self.t, self.x):
            if not mpmath.isfinite(v):
                raise ValueError("point coordinates must be finite")

    @classmethod
    def of(cls, t, x, dps: int = DEFAULT_PRECISION) -> "Point":
        return cls(to_mpf(t, dps), to_mpf(x, dps))

    def as_floats(self) -> tuple[float, float]:
        return float(self.t), float(self.x)


@dataclass(frozen=True)
class Window:
    """Axis-aligned sampling rectangle ``t in [t0, t1], x in [x0, x1]``."""

    t: tuple[float, float]
    x: tuple[float, float]

    def __post_init__(self):
        for lo, hi in (self.t, self.x):
            if not (mpmath.isfinite(lo) and mpmath.isfinite(hi)) or not lo < hi:
                raise ValueError(f"invalid window bounds [{lo}, {hi}]")

    def contains(self, t, x) -> bool:
        return self.t[0] <= t <= self.t[1] and self.x[0] <= x <= self.x[1]

    def sample(self, rng: random.Random, dps: int = DEFAULT_PRECISION) -> Point:
        t = self.t[0] + (self.t[1] - self.t[0]) * rng.random()
        x = self.x[0] + (self.x[1] - self.x[0]) * rng.random()
        return Point.of(t, x, dps)

    def to_json(self) -> dict:
        return {"t": [float(self.t[0]), float(self.t[1])], "x": [float(self.x[0]), float(self.x[1])]}

    @classmethod
    def from_json(cls, data: Mapping) -> "Window":
        return cls(tuple(float(v) for v in data["t"]), tuple(float(v) for v in data["x"]))


# ---------------------------------------------------------------------------
# compiled evaluation


def _rpow(ctx, b, q):
    if b > 0:
        return ctx.power(b, q)
    if b == 0 and q > 0:
        return ctx.zero
    raise DomainError("non-integer power of a non-positive base")


def _ln(ctx, a):
    if a <= 0:
        raise DomainError("logarithm of a non-positive value")
    return ctx.ln(a)


def _root5(ctx, a):
    if a == 0:
        return ctx.zero
    r = ctx.root(abs(a), 5)
    return r if a > 0 else -r


class _MpfrContext:
    """The slice of the mpmath context API used by compiled programs, on MPFR.

    gmpy2 numbers cost a fraction of mpmath's per operation; results are
    correctly rounded at the working precision, so runs stay deterministic.
    """

    def __init__(self, dps: int):
        bits = int(dps * 3.3219280948873626) + 8
        self.gmp = gmpy2.context(
            precision=bits, trap_divzero=True, trap_invalid=True, trap_overflow=True
        )
        with gmpy2.context(self.gmp):
            self.zero = gmpy2.mpfr(0)
            self.one = gmpy2.mpfr(1)

    def mpf(self, v):
        with gmpy2.context(self.gmp):
            if hasattr(v, "_mpf_"):
                sign, man, exp, _ = v._mpf_
                if not man:
                    return gmpy2.mpfr(0)
                r = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
                return -r if sign else r
            if isinstance(v, Fraction):
                return gmpy2.mpfr(v.numerator) / v.denominator
            return gmpy2.mpfr(v)

    fsum = staticmethod(gmpy2.fsum)
    exp = staticmethod(gmpy2.exp)
    sin = staticmethod(gmpy2.sin)
    cos = staticmethod(gmpy2.cos)
    ln = staticmethod(gmpy2.log)

    @staticmethod
    def power(b, q):
        return b**q

    @staticmethod
    def root(a, n):
        return gmpy2.root(a, n)


class Evaluator:
    """Straight-line program evaluating several expressions sharing a DAG.

    Calling it returns one mpf per root expression, rounded to ``precision``
    digits after computing with ``GUARD_DIGITS`` extra.
    """

    def __init__(self, exprs: Sequence[Expr], precision: int = DEFAULT_PRECISION):
        self.exprs = tuple(exprs)
        self.precision = precision
        self.ctx = _MpfrContext(precision + GUARD_DIGITS)
        self.guard_ctx = context(precision + GUARD_DIGITS)
        self.out_ctx = context(precision)
        self._fn = self._compile()

    def _compile(self):
        ctx = self.ctx
        index: dict[int, int] = {}
        consts: list = []
        lines = []
        n = 0
        for root in self.exprs:
            for node in walk(root):
                if id(node) in index:
                    continue
                i = n
                n += 1
                index[id(node)] = i
                k = node.kind
                if k == CONST:
                    q = node.value
                    consts.append(ctx.mpf(q))
                    lines.append(f"v{i} = K[{len(consts) - 1}]")
                elif k == VAR:
                    lines.append(f"v{i} = {node.value}")
                elif k == PARAM:
                    lines.append(f"v{i} = P[{node.value!r}]")
                elif k == ADD:
                    refs = ", ".join(f"v{index[id(a)]}" for a in node.args)
                    lines.append(f"v{i} = fsum(({refs},))")
                elif k == MUL:
                    refs = " * ".join(f"v{index[id(a)]}" for a in node.args)
                    lines.append(f"v{i} = {refs}")
                elif k == POW:
                    b = index[id(node.args[0])]
                    q = node.value
                    if q.denominator == 1:
                        lines.append(f"v{i} = v{b} ** {q.numerator}")
                    else:
                        consts.append(ctx.mpf(q))
                        lines.append(f"v{i} = rpow(ctx, v{b}, K[{len(consts) - 1}])")
                else:
                    a = index[id(node.args[0])]
                    name = node.value
                    if name == "exp":
                        lines.append(f"v{i} = ctx.exp(v{a})")
                    elif name == "ln":
                        lines.append(f"v{i} = ln(ctx, v{a})")
                    elif name == "sin":
                        lines.append(f"v{i} = ctx.sin(v{a})")
                    elif name == "cos":
                        lines.append(f"v{i} = ctx.cos(v{a})")
                    else:
                        lines.append(f"v{i} = root5(ctx, v{a})")
        outs = ", ".join(f"v{index[id(r)]}" for r in self.exprs)
        body = "\n    ".join(lines) if lines else "pass"
        src = f"def _program(t, x, P):\n    {body}\n    return ({outs},)\n"
        env = {
            "K": consts,
            "ctx": ctx,
            "fsum": ctx.fsum,
            "rpow": _rpow,
            "ln": _ln,
            "root5": _root5,
        }
        exec(compile(src, "<paraclass-evaluator>", "exec"), env)
        return env["_program"]

    def raw(self, t, x, params: Optional[Mapping[str, object]] = None) -> tuple:
        """Values at guard precision (no final rounding), as mpmath numbers."""
        ctx = self.ctx
        P = _ParamView(params or {}, ctx)
        try:
            with gmpy2.context(ctx.gmp):
                vals = self._fn(ctx.mpf(t), ctx.mpf(x), P)
        except ZeroDivisionError:
            raise DomainError("division by zero") from None
        except (gmpy2.InvalidOperationError, gmpy2.OverflowResultError):
            raise DomainError("value outside the real domain") from None
        mpf = self.guard_ctx.mpf
        return tuple(mpf(tuple(map(int, v.as_mantissa_exp()))) for v in vals)

    def __call__(self, point: Point, params: Optional[Mapping[str, object]] = None) -> tuple:
        vals = self.raw(point.t, point.x, params)
        out = self.out_ctx.mpf
        return tuple(out(v) for v in vals)


class _ParamView(dict):
    def __init__(self, params, ctx):
        super().__init__()
        self._params = params
        self._ctx = ctx

    def __missing__(self, key):
        if key not in self._params:
            raise UnboundParameter(key)
        v = self._params[key]
        v = self._ctx.mpf(v)
        self[key] = v
        return v


class _FloatContext:
    """The slice of the mpmath context API used by compiled programs, in float64."""

    zero = 0.0
    one = 1.0
    @staticmethod
    def mpf(v):
        return float(v)
    fsum = staticmethod(math.fsum)
    exp = staticmethod(math.exp)
    sin = staticmethod(math.sin)
    cos = staticmethod(math.cos)
    ln = staticmethod(math.log)

    @staticmethod
    def power(b, q):
        return b**q

    @staticmethod
    def root(a, n):
        return a ** (1.0 / n)


class FloatEvaluator(Evaluator):
    """The same straight-line program in float64, for fast approximate search."""

    def __init__(self, exprs: Sequence[Expr]):
        self.exprs = tuple(exprs)
        self.precision = 15
        self.ctx = self.out_ctx = _FloatContext()
        self._fn = self._compile()

    def raw(self, t, x, params: Optional[Mapping[str, object]] = None) -> tuple:
        P = {k: float(v) for k, v in (params or {}).items()}
        try:
            return self._fn(float(t), float(x), _FloatParams(P))
        except (ZeroDivisionError, OverflowError, ValueError):
            raise DomainError("float evaluation failed") from None

    def __call__(self, point: Point, params: Optional[Mapping[str, object]] = None) -> tuple:
        return self.raw(point.t, point.x, params)


class _FloatParams(dict):
    def __missing__(self, key):
        raise UnboundParameter(key)


_EVAL_CACHE: dict = {}
_EVAL_LOCK = threading.Lock()


def evaluator(exprs: Sequence[Expr], precision: int = DEFAULT_PRECISION) -> Evaluator:
    """Cached :class:`Evaluator` construction."""
    key = (tuple(exprs), precision)
    with _EVAL_LOCK:
        ev = _EVAL_CACHE.get(key)
    if ev is None:
        ev = Evaluator(exprs, precision)
        with _EVAL_LOCK:
            if len(_EVAL_CACHE) > 512:
                _EVAL_CACHE.clear()
            _EVAL_CACHE[key] = ev
    return ev


def evaluate(e: Expr, p: Point, precision: int = DEFAULT_PRECISION, params=None):
    """Value of ``e`` at ``p``; raises :class:`DomainError` off the real domain."""
    if precision < 30:
        raise ValueError("precision must be at least 30 digits")
    return evaluator((e,), precision)(p, params)[0]


# ---------------------------------------------------------------------------
# zero testing


class ZeroState(str, enum.Enum):
    IDENTICALLY_ZERO = "IdenticallyZero"
    NONZERO = "NonZero"
    UNKNOWN = "Unknown"


@dataclass
class ZeroVerdict:
    state: ZeroState
    witness: Optional[Point] = None
    value: object = None
    max_abs: object = None
    accepted: int = 0
    rejected: int = 0

    @property
    def vanishes(self) -> bool:
        """True for a proof of zero or an all-below-threshold sample set."""
        return self.state is not ZeroState.NONZERO

    def to_json(self) -> dict:
        out = {"verdict": self.state.value, "accepted": self.accepted, "rejected": self.rejected}
        if self.witness is not None:
            out["witness"] = {
                "t": float(self.witness.t),
                "x": float(self.witness.x),
                "value": float(self.value),
            }
        if self.max_abs is not None:
            out["max_abs"] = mpmath.nstr(self.max_abs, 6)
        return out


def is_zero(
    e: Expr,
    window: Window,
    trials: int = 24,
    threshold: float = 1e-20,
    *,
    precision: int = DEFAULT_PRECISION,
    seed: int = 0,
    params: Optional[Mapping[str, object]] = None,
    reject: Optional[Callable[[Point], bool]] = None,
    max_attempts: Optional[int] = None,
    proof_nodes: int = PROOF_NODE_LIMIT,
) -> ZeroVerdict:
    """Decide whether ``e`` vanishes identically on ``window``.

    ``e`` is sampled at ``trials`` seeded points; one value above
    ``threshold`` proves it nonzero.  Points raising :class:`DomainError`
    or flagged by ``reject`` are skipped and counted.  Without a witness,
    a symbolic proof (see :func:`provably_zero`) upgrades the verdict to
    IdenticallyZero; otherwise it stays Unknown.  Expressions larger than
    ``proof_nodes`` nodes skip the proof.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if e.kind == CONST:
        if e.value == 0:
            return ZeroVerdict(ZeroState.IDENTICALLY_ZERO)
    ev = evaluator((e,), precision)
    rng = random.Random(seed)
    limit = max_attempts if max_attempts is not None else 8 * trials
    accepted = rejected = 0
    biggest = None
    thr = mpmath.mpf(threshold)
    while accepted < trials and accepted + rejected < limit:
        p = window.sample(rng, precision)
        if reject is not None and reject(p):
            rejected += 1
            continue
        try:
            (v,) = ev(p, params)
        except DomainError:
            rejected += 1
            continue
        accepted += 1
        if biggest is None or abs(v) > biggest:
            biggest = abs(v)
        if abs(v) > thr:
            return ZeroVerdict(ZeroState.NONZERO, p, v, abs(v), accepted, rejected)
    if node_count(e) <= proof_nodes and provably_zero(e):
        return ZeroVerdict(ZeroState.IDENTICALLY_ZERO, accepted=accepted, rejected=rejected)
    if accepted == 0:
        raise AllPointsRejected(f"all {rejected} sample points were singular")
    return ZeroVerdict(ZeroState.UNKNOWN, None, None, biggest, accepted, rejected)
