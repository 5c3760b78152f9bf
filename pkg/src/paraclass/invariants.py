"""Closed-form contact invariants of  u_xx = T u_t + X u_x + U u.

Every formula is written once against a tiny protocol (``+ - * /``,
integer powers, ``.d(var)``, ``root5``) so the same transcription runs on

* :class:`~paraclass.expr.Expr` -- the production path, exact symbolic
  differentiation;
* :class:`~paraclass.jet.Jet2` -- the numerical oracle;
* :class:`Depth` -- a dry run that reports the jet order a formula needs.

``strict=True`` selects the uncorrected transcription; the default applies
the corrections listed in FORMULAS.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import random
from typing import Any, Callable, Optional

import mpmath

from .config import RunConfig
from .errors import DomainError, Inconclusive, NotConstant, OrderExceeded, OverflowBudget, PreconditionFailed
from .expr import core
from .expr.core import Expr
from .expr.evaluate import FloatEvaluator, Point, Window, ZeroState, context, evaluator, is_zero
from .jet import MAX_ORDER, Jet2, jet_eval

SUBCLASSES = ("P1", "P2", "P3", "P4", "P5")
DEFAULT_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class Equation:
    """Coefficients of u_xx = T u_t + X u_x + U u plus a sampling window.

    ``region`` optionally narrows the window to a non-rectangular domain,
    e.g. the exact image of a window under a point map.
    """

    T: Expr
    X: Expr
    U: Expr
    window: Window
    label: Optional[str] = None
    region: Optional[Callable[[Point], bool]] = field(default=None, compare=False, repr=False)

    def contains(self, p: Point) -> bool:
        if not self.window.contains(p.t, p.x):
            return False
        return self.region is None or self.region(p)

    @property
    def params(self) -> set[str]:
        return core.free_params(self.T) | core.free_params(self.X) | core.free_params(self.U)


HEAT_T, HEAT_X, HEAT_U = core.ONE, core.ZERO, core.ZERO


def heat_equation(window: Window, label: str = "heat") -> Equation:
    return Equation(HEAT_T, HEAT_X, HEAT_U, window, label)


# ---------------------------------------------------------------------------
# generic helpers


def _d(F, spec: str):
    for v in spec:
        F = F.d(v)
    return F


def root5(q):
    if isinstance(q, Expr):
        return core.root5(q)
    return q.root5()


class Depth:
    """Stand-in quantity tracking how many derivatives a formula consumes."""

    __slots__ = ("n",)

    def __init__(self, n: int = 0):
        self.n = n

    @staticmethod
    def _n(other) -> int:
        return other.n if isinstance(other, Depth) else 0

    def _join(self, other) -> "Depth":
        return Depth(max(self.n, self._n(other)))

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _join
    __truediv__ = __rtruediv__ = _join

    def __neg__(self):
        return self

    def __pow__(self, q):
        return self

    def d(self, v: str) -> "Depth":
        return Depth(self.n + 1)

    def root5(self) -> "Depth":
        return self


# ---------------------------------------------------------------------------
# semi-invariant K and the heat obstruction


def _coeffs(T, X, U):
    if isinstance(T, Equation):
        return T.T, T.X, T.U, True
    return T, X, U, False


def kappa(T, X=None, U=None):
    """Gauge semi-invariant K; pass an :class:`Equation` for a simplified Expr."""
    T, X, U, whole = _coeffs(T, X, U)
    if whole:
        return core.simplify(kappa(T, X, U))
    Tx = T.d("x")
    Xx, Xt = X.d("x"), X.d("t")
    num = (
        2 * T * X * Xx
        - X**2 * Tx
        + 2 * Tx * Xx
        + 2 * T**2 * Xt
        - 2 * T * _d(X, "xx")
        + 4 * T * U.d("x")
        - 4 * U * Tx
    )
    return num / (2 * T**4)


def lam(T, X=None, U=None, strict: bool = False):
    """Heat-reducibility obstruction; vanishes iff the equation maps to u_xx = u_t."""
    T, X, U, whole = _coeffs(T, X, U)
    if whole:
        return core.simplify(lam(T, X, U, strict))
    K = kappa(T, X, U)
    Kx = K.d("x")
    Kxx = Kx.d("x")
    Tt, Tx = T.d("t"), T.d("x")
    Ttt, Ttx, Txx = Tt.d("t"), Tt.d("x"), Tx.d("x")
    Txxx = Txx.d("x")
    Txxxx = Txxx.d("x")
    Txxxxx = Txxxx.d("x")
    Tttx = Ttt.d("x")
    Ttxx = Ttx.d("x")
    Ttxxx = Ttxx.d("x")
    if strict:
        txxx_term = 220 * T**2 * Tx * Txxx
        ttxx_term = -8 * T**5 * Ttxx
        ttt_term = 4 * T**5 * Tx * Ttt**2
    else:
        txxx_term = 220 * T**2 * Tx**2 * Txxx
        ttxx_term = -8 * T**5 * Ttxxx
        ttt_term = -4 * T**5 * Tx * Ttt
    num = (
        8 * T**8 * Kxx
        + 20 * T**7 * Tx * Kx
        + 12 * T**7 * Txx * K
        + 288 * T**2 * Tx * Txx**2
        + txxx_term
        - 64 * T**3 * Txx * Txxx
        - 40 * T**3 * Tx * Txxxx
        + 4 * T**4 * Txxxxx
        + 4 * T**6 * Tttx
        + ttxx_term
        + 405 * Tx**5
        - 810 * T * Tx**3 * Txx
        + 4 * T**4 * Tx * Tt**2
        + ttt_term
        + 80 * T**2 * Tt * Tx**3
        - 4 * T**5 * Tt * Ttx
        - 80 * T**3 * Tx**2 * Ttx
        + 28 * T**4 * Ttx * Txx
        + 36 * T**4 * Tx * Ttxx
        + 8 * T**4 * Tt * Txxx
        - 64 * T**3 * Tt * Tx * Txx
    )
    return num / T**10


def fundamental(T, X=None, U=None, strict: bool = False):
    """I: the real fifth root of -lambda T^5 / 16."""
    T, X, U, whole = _coeffs(T, X, U)
    I = root5(-(lam(T, X, U, strict) * T**5) / 16)
    return core.simplify(I) if whole else I


def lambda_inv(eq: "Equation", strict: bool = False) -> Expr:
    return lam(eq, strict=strict)


def fundamental_I(eq: "Equation", strict: bool = False) -> Expr:
    return fundamental(eq, strict=strict)


def j1(T, I):
    return (2 * T * I.d("x") - I * T.d("x")) / (T * I**2)


# ---------------------------------------------------------------------------
# subclass P2


def _p2_j2(T, I, J1):
    J1t, J1x = J1.d("t"), J1.d("x")
    return (
        2 * T * I * J1x * J1t.d("x")
        - 2 * T * I.d("t") * J1x**2
        - 2 * T * I * J1t * J1x.d("x")
        + T * I**2 * J1 * J1t * J1x
        + I * T.d("x") * J1t * J1x
    ) / (2 * J1x**2 * I**3)


def _p2_j3(T, X, U, I, J1, J2):
    Tt, Tx = T.d("t"), T.d("x")
    Txx, Ttx = Tx.d("x"), Tt.d("x")
    Txxx = Txx.d("x")
    Xt, Xx = X.d("t"), X.d("x")
    Xxx = Xx.d("x")
    Ux = U.d("x")
    It = I.d("t")
    J1t, J1x = J1.d("t"), J1.d("x")
    J1x2 = J1x**2
    num = (
        -135 * I**2 * Tx**4 * J1x2
        - 32 * T**6 * It**2 * J1x2
        + 16 * J1x2 * T**3 * I**2 * Txx * Tt
        + 16 * J1x2 * T**5 * I**2 * Xt.d("x")
        + 216 * I**2 * Tx**2 * T * Txx * J1x2
        + 32 * T**4 * I**2 * Ux.d("x") * J1x2
        + 16 * T**3 * I**2 * Xx * Txx * J1x2
        + 8 * T**3 * I**2 * Txxx.d("x") * J1x2
        - 32 * I**2 * U * T**3 * Txx * J1x2
        - 36 * T**2 * I**2 * Txx**2 * J1x2
        - 16 * T**4 * I**2 * Ttx.d("x") * J1x2
        + 16 * J1x2 * T**6 * I * It.d("t")
        + 16 * T**4 * I**2 * Xx**2 * J1x2
        + 8 * T**6 * It * J1x * I**2 * J1t * J1
        - 40 * I**2 * Tx**2 * T**2 * Xx * J1x2
        + 8 * T**6 * I**3 * J1t * J1t.d("x") * J1
        - 8 * J1t**2 * T**6 * J1x * I**3
        - 8 * J1x * T**6 * I**3 * J1t.d("t") * J1
        - 8 * T**5 * I**3 * Tt * J1x * J1t * J1
        - 8 * T**3 * I**2 * X**2 * Txx * J1x2
        + 8 * J1t * T**5 * I**5 * J1 * J1x * J2
        - 4 * J1t**2 * T**6 * I**4 * J1**2
        + 16 * I**2 * T**4 * Xxx * X * J1x2
        + 40 * T**3 * I**2 * Tx * Ttx * J1x2
        + 20 * I**2 * Tx**2 * T**2 * X**2 * J1x2
        - 8 * T**4 * I**2 * Xt * Tx * J1x2
        - 40 * I**2 * T**3 * X * Xx * Tx * J1x2
        - 40 * I**2 * Tx**2 * T**2 * Tt * J1x2
        - 56 * T**2 * I**2 * Txxx * Tx * J1x2
        - 16 * T**4 * I**2 * Xxx.d("x") * J1x2
        + 16 * T**5 * I * Tt * J1x2 * It
        + 40 * I**2 * T**3 * Xxx * Tx * J1x2
        + 80 * I**2 * Tx**2 * U * T**2 * J1x2
        - 80 * I**2 * T**3 * Ux * Tx * J1x2
    )
    return num / (32 * T**4 * J1x2 * I**6)


def _p2_j4(T, X, U, I, J1, J3, strict: bool = False):
    Tt, Tx = T.d("t"), T.d("x")
    Txx, Ttx = Tx.d("x"), Tt.d("x")
    Txxx = Txx.d("x")
    Xt, Xx = X.d("t"), X.d("x")
    Xxx = Xx.d("x")
    Ux = U.d("x")
    It = I.d("t")
    J1t, J1x = J1.d("t"), J1.d("x")
    if strict:
        txx_term = 216 * I**2 * Tx * T**2 * Txx * J1x
    else:
        txx_term = 216 * I**2 * Tx**2 * T * Txx * J1x
    num = (
        -8 * J1t**2 * T**6 * I**3
        - 32 * T**6 * It**2 * J1x
        - 135 * I**2 * Tx**4 * J1x
        + 16 * T**5 * I * Tt * J1x * It
        - 8 * T**4 * I**2 * Xt * Tx * J1x
        + 20 * I**2 * Tx**2 * T**2 * X**2 * J1x
        + 40 * I**2 * T**3 * Xxx * Tx * J1x
        - 8 * I**3 * J1x * T**4 * Xxx * J1
        - 80 * I**2 * T**3 * Ux * Tx * J1x
        - 16 * T**4 * I**2 * Xxx.d("x") * J1x
        - 40 * I**2 * T**3 * X * Xx * Tx * J1x
        - 8 * T**3 * I**2 * X**2 * Txx * J1x
        + 40 * T**3 * I**2 * Tx * Ttx * J1x
        - 40 * I**2 * Tx**2 * T**2 * Tt * J1x
        + 16 * I**2 * T**4 * Xxx * X * J1x
        + 16 * T**4 * I**2 * Xx**2 * J1x
        + 80 * I**2 * Tx**2 * U * T**2 * J1x
        - 40 * I**2 * Tx**2 * T**2 * Xx * J1x
        - 56 * T**2 * I**2 * Txxx * Tx * J1x
        - 32 * T**4 * J1x * I**6 * J3
        + 8 * I**3 * J1x * T**5 * Xt * J1
        + txx_term
        + 8 * T**3 * I**2 * Txxx.d("x") * J1x
        + 8 * I**3 * J1x * T**4 * X * Xx * J1
        - 36 * T**2 * I**2 * Txx**2 * J1x
        + 16 * J1x * T**6 * I * It.d("t")
        + 16 * J1x * T**3 * I**2 * Txx * Tt
        - 8 * J1x * T**4 * Ttx * I**3 * J1
        - 4 * I**3 * J1x * Tx * T**3 * X**2 * J1
        + 15 * I**3 * J1x * Tx**3 * T * J1
        + 4 * I**3 * J1x * T**3 * Txxx * J1
        - 18 * I**3 * J1x * T**2 * Tx * Txx * J1
        - 16 * I**3 * J1x * Tx * U * T**3 * J1
        + 16 * T**3 * I**2 * Xx * Txx * J1x
        - 16 * T**4 * I**2 * Ttx.d("x") * J1x
        + 8 * I**3 * J1x * Tx * T**3 * Xx * J1
        - 32 * I**2 * U * T**3 * Txx * J1x
        + 16 * I**3 * J1x * T**4 * Ux * J1
        + 32 * T**4 * I**2 * Ux.d("x") * J1x
        + 8 * J1x * Tx * T**3 * Tt * I**3 * J1
        + 16 * J1x * T**5 * I**2 * Xt.d("x")
    )
    return num / (8 * J1x * T**4 * I**6 * J1)


# ---------------------------------------------------------------------------
# subclasses P3 and P4 share a long torsion polynomial


def _torsion_sum(T, X, U, I, J, strict: bool = False):
    """The numerator of L0."""
    tx_x2 = -4 if strict else 4
    Tt, Tx = T.d("t"), T.d("x")
    Txx, Ttx = Tx.d("x"), Tt.d("x")
    Txxx = Txx.d("x")
    Xt, Xx = X.d("t"), X.d("x")
    Xxx = Xx.d("x")
    Ux = U.d("x")
    It = I.d("t")
    return (
        135 * Tx**4 * I**2
        + 16 * J * T**3 * I**3 * Tx * U
        - 16 * T**5 * I**2 * Xt.d("x")
        + 16 * T**4 * I**2 * Xxx.d("x")
        - 16 * J * T**4 * I**3 * Ux
        - 8 * J * T**3 * I**3 * Tx * Tt
        + 40 * T**2 * I**2 * Tt * Tx**2
        - 15 * J * T * I**3 * Tx**3
        + tx_x2 * J * T**3 * I**3 * Tx * X**2
        - 20 * T**2 * I**2 * Tx**2 * X**2
        - 80 * T**2 * I**2 * Tx**2 * U
        + 8 * J * T**4 * I**3 * Xxx
        - 16 * T**4 * I**2 * X * Xxx
        + 32 * T**3 * I**2 * U * Txx
        - 216 * T * I**2 * Tx**2 * Txx
        + 18 * J * T**2 * I**3 * Tx * Txx
        + 8 * T**3 * I**2 * X**2 * Txx
        - 40 * T**3 * I**2 * Xxx * Tx
        - 16 * T**4 * I**2 * Xx**2
        - 16 * T**3 * I**2 * Tt * Txx
        + 56 * T**2 * I**2 * Txxx * Tx
        + 80 * T**3 * I**2 * Ux * Tx
        - 4 * J * T**3 * I**3 * Txxx
        + 32 * T**6 * It**2
        + 36 * T**2 * I**2 * Txx**2
        - 8 * J * T**4 * I**3 * X * Xx
        - 8 * J * T**3 * I**3 * Tx * Xx
        + 40 * T**2 * I**2 * Tx**2 * Xx
        - 16 * T**5 * I * Tt * It
        + 40 * T**3 * I**2 * X * Xx * Tx
        - 16 * T**3 * I**2 * Xx * Txx
        - 16 * T**6 * I * It.d("t")
        - 8 * J * T**5 * I**3 * Xt
        + 8 * T**4 * I**2 * Xt * Tx
        - 32 * T**4 * I**2 * Ux.d("x")
        + 8 * J * T**4 * I**3 * Ttx
        - 40 * T**3 * I**2 * Ttx * Tx
        + 16 * T**4 * I**2 * Ttx.d("x")
        - 8 * T**3 * I**2 * Txxx.d("x")
    )


def _m1_sum(T, X, U, I, N):
    """Numerator of M1, transcribed independently of the L0 numerator."""
    Tt, Tx = T.d("t"), T.d("x")
    Txx, Ttx = Tx.d("x"), Tt.d("x")
    Txxx = Txx.d("x")
    Xt, Xx = X.d("t"), X.d("x")
    Xxx = Xx.d("x")
    Ux = U.d("x")
    It = I.d("t")
    return (
        -40 * I**2 * T**3 * X * Xx * Tx
        + 32 * I**2 * T**4 * Ux.d("x")
        - 32 * T**6 * It**2
        + 16 * N * I**3 * T**4 * Ux
        + 8 * I**2 * T**3 * Txxx.d("x")
        + 16 * I**2 * T**4 * X * Xxx
        - 8 * N * I**3 * T**4 * Xxx
        + 8 * N * I**3 * T**4 * X * Xx
        + 8 * N * I**3 * T**5 * Xt
        + 16 * I**2 * T**5 * Xt.d("x")
        - 8 * N * I**3 * T**4 * Ttx
        + 16 * T**5 * I * Tt * It
        + 80 * I**2 * T**2 * Tx**2 * U
        + 20 * I**2 * T**2 * Tx**2 * X**2
        - 16 * N * I**3 * T**3 * Tx * U
        + 15 * N * I**3 * T * Tx**3
        - 56 * I**2 * T**2 * Txxx * Tx
        + 216 * I**2 * T * Tx**2 * Txx
        + 40 * I**2 * T**3 * Xxx * Tx
        - 18 * N * I**3 * T**2 * Tx * Txx
        + 16 * I**2 * T**4 * Xx**2
        + 40 * I**2 * T**3 * Ttx * Tx
        - 135 * I**2 * Tx**4
        + 8 * N * I**3 * T**3 * Tx * Xx
        - 8 * I**2 * T**4 * Xt * Tx
        - 40 * I**2 * T**2 * Tx**2 * Xx
        - 80 * I**2 * T**3 * Ux * Tx
        - 8 * I**2 * T**3 * X**2 * Txx
        - 32 * I**2 * T**3 * U * Txx
        + 16 * I**2 * T**3 * Xx * Txx
        + 4 * N * I**3 * T**3 * Txxx
        + 16 * I**2 * T**3 * Tt * Txx
        + 8 * N * I**3 * T**3 * Tx * Tt
        - 40 * I**2 * T**2 * Tt * Tx**2
        - 4 * N * I**3 * T**3 * Tx * X**2
        - 36 * I**2 * T**2 * Txx**2
        - 16 * I**2 * T**4 * Xxx.d("x")
        - 16 * I**2 * T**4 * Ttx.d("x")
        + 16 * I * T**6 * It.d("t")
    )


def _second_sum(T, X, U, I, A, A_t, B, J, sign_ab: int):
    """Shared numerator of L2 (A=L0, B=L1, J=J1) and M3 (A=M0, B=M2, J=N)."""
    Tt, Tx = T.d("t"), T.d("x")
    Txx, Ttx = Tx.d("x"), Tt.d("x")
    Xx = X.d("x")
    It = I.d("t")
    return (
        8 * I**2 * T**3 * Ttx
        - 8 * I**2 * Tx * T**2 * Xx
        - 15 * I**2 * Tx**3
        + 4 * I**2 * Tx * T**2 * X**2
        + 16 * I**2 * Tx * U * T**2
        - 8 * T**4 * I**2 * X.d("t")
        - 8 * I**2 * Tx * T**2 * Tt
        - 8 * I * T**5 * A_t
        + 18 * T * I**2 * Tx * Txx
        - 8 * A * T**4 * I * Tt
        - 4 * A**2 * T**5 * I * J
        + sign_ab * 8 * T**4 * A * B * I**3
        + 16 * T**5 * It * A
        + 8 * I**2 * T**3 * Xx.d("x")
        - 8 * I**2 * T**3 * X * Xx
        - 4 * T**2 * I**2 * Txx.d("x")
        - 16 * I**2 * T**3 * U.d("x")
    )


# ---------------------------------------------------------------------------
# frames


@dataclass
class DerivationOp:
    """The first-order operator ``a D_t + b D_x``."""

    a: Any
    b: Any

    def __call__(self, F):
        return self.a * F.d("t") + self.b * F.d("x")


def dual_ops(forms):
    """Vector fields dual to the 1-forms ``xi^i = a_i1 dt + a_i2 dx``."""
    (a11, a12), (a21, a22) = forms
    det = a11 * a22 - a12 * a21
    inv = 1 / det
    op1 = DerivationOp(a22 * inv, -a21 * inv)
    op2 = DerivationOp(-a12 * inv, a11 * inv)
    return op1, op2


@dataclass
class InvariantFrame:
    """Invariants, invariant derivations and their commutator for one subclass.

    ``invariants`` holds every named quantity; ``coordinates`` lists those
    that parameterise the classifying manifold.
    """

    tag: str
    invariants: dict
    coordinates: tuple
    forms: tuple
    op1: DerivationOp
    op2: DerivationOp
    commutator: tuple
    I: Any = None
    params: dict = field(default_factory=dict)


def _zero_like(q):
    return 0 * q


def frame_quantities(tag: str, T, X, U, *, N=None, strict: bool = False) -> InvariantFrame:
    """Build the invariant frame of subclass ``tag`` over any quantity type.

    No membership checks happen here; :func:`frame_P2`, :func:`frame_P3`
    and :func:`frame_P4` verify them first.
    """
    I = fundamental(T, X, U, strict)
    J1 = j1(T, I)
    zero = _zero_like(T)
    xi1 = (I**2 / T, zero)
    if tag == "P2":
        J1t, J1x = J1.d("t"), J1.d("x")
        J2 = _p2_j2(T, I, J1)
        J3 = _p2_j3(T, X, U, I, J1, J2)
        J4 = _p2_j4(T, X, U, I, J1, J3, strict)
        forms = (xi1, (I * J1t / J1x, I))
        op1, op2 = dual_ops(forms)
        inv = {"J1": J1, "J2": J2, "J3": J3, "J4": J4}
        return InvariantFrame(tag, inv, ("J1", "J2", "J3", "J4"), forms, op1, op2, (J1, J2), I)
    if tag == "P3":
        J1t = J1.d("t")
        L0 = -_torsion_sum(T, X, U, I, J1, strict) / (16 * T**6 * I**2 * J1t)
        L1 = T * (L0.d("x") - I.d("t")) / I**3
        L2 = -_second_sum(T, X, U, I, L0, L0.d("t"), L1, J1, 1) / (8 * I**5 * T**3)
        forms = (xi1, (L0, I))
        op1, op2 = dual_ops(forms)
        inv = {"J1": J1, "L0": L0, "L1": L1, "L2": L2}
        return InvariantFrame(tag, inv, ("J1", "L1", "L2"), forms, op1, op2, (J1, L1), I)
    if tag in ("P4", "P5"):
        if N is None:
            raise ValueError("subclasses P4 and P5 need the constant N")
        M1 = _m1_sum(T, X, U, I, N) / (32 * I**6 * T**4)
        if tag == "P5":
            forms = None
            inv = {"N": N + zero, "M1": M1}
            return InvariantFrame(tag, inv, (), forms, None, None, (N + zero, zero), I)
        M0 = -2 * M1.d("t") / (3 * N * M1 + 2) ** (2 if strict else 1)
        M2 = T * (M0.d("x") - I.d("t")) / I**3
        M3 = -_second_sum(T, X, U, I, M0, M0.d("t"), M2, N, -1) / (32 * I**5 * T**3)
        forms = (xi1, (M0, I))
        op1, op2 = dual_ops(forms)
        inv = {"N": N + zero, "M0": M0, "M1": M1, "M2": M2, "M3": M3}
        return InvariantFrame(tag, inv, ("M1", "M2", "M3"), forms, op1, op2, (N + zero, M2), I)
    raise ValueError(f"no invariant frame for subclass {tag!r}")


def derived(frame: InvariantFrame, s: int, names=None, node_budget: Optional[int] = None) -> dict:
    """``op1^k op2^l F`` for every coordinate invariant F and k + l <= s."""
    names = frame.coordinates if names is None else tuple(names)
    out = {}
    for name in names:
        F = frame.invariants[name]
        chain = [F]
        for _ in range(s):
            chain.append(frame.op2(chain[-1]))
        for l, G in enumerate(chain):
            cur = G
            for k in range(s - l + 1):
                out[(name, k, l)] = cur
                if node_budget is not None and isinstance(cur, Expr):
                    if core.node_count(*[v for v in out.values() if isinstance(v, Expr)]) > node_budget:
                        raise OverflowBudget(f"derived invariants exceed {node_budget} nodes")
                if k < s - l:
                    cur = frame.op1(cur)
    return {key: out[key] for key in sorted(out, key=lambda k: (names.index(k[0]), k[1] + k[2], k[1]))}


def manifold_layout(tag: str, s: int) -> tuple:
    names = {"P2": ("J1", "J2", "J3", "J4"), "P3": ("J1", "L1", "L2"), "P4": ("M1", "M2", "M3")}[tag]
    keys = []
    for name in names:
        for total in range(s + 1):
            for k in range(total, -1, -1):
                keys.append((name, k, total - k))
    return tuple(keys)


def derived_invariants(frame: InvariantFrame, s: int, node_budget: int = DEFAULT_NODE_BUDGET) -> dict:
    return derived(frame, s, node_budget=node_budget)


# ---------------------------------------------------------------------------
# frames with membership checks


def outside(eq: Equation):
    """Rejection test for window points outside ``eq.region``, or None."""
    if eq.region is None:
        return None
    return lambda p: not eq.region(p)


def regular_filter(I: Expr, config: RunConfig, params=None, eq: Optional[Equation] = None):
    """Reject points where I is singular or smaller than eps_I (or outside ``eq.region``)."""
    ev = evaluator((I,), config.precision)
    eps = mpmath.mpf(config.eps_I)
    out = outside(eq) if eq is not None else None

    def reject(p: Point) -> bool:
        if out is not None and out(p):
            return True
        try:
            (v,) = ev(p, params)
        except DomainError:
            return True
        return abs(v) < eps

    return reject


def _expect(e: Expr, eq: Equation, config: RunConfig, want_nonzero: bool, what: str, reject=None, params=None):
    v = is_zero(e, eq.window, reject=reject, params=params, proof_nodes=400, **config.zero_kw())
    nonzero = v.state is ZeroState.NONZERO
    if want_nonzero and v.state is ZeroState.UNKNOWN:
        raise Inconclusive(what, "below threshold on every sample")
    if nonzero != want_nonzero:
        raise PreconditionFailed(f"{what} {'vanishes' if want_nonzero else 'does not vanish'} on the window")
    return v


def _p_common(eq: Equation, config: RunConfig):
    I = fundamental(eq.T, eq.X, eq.U, config.strict)
    _expect(lam(eq.T, eq.X, eq.U, config.strict), eq, config, True, "I", outside(eq))
    reject = regular_filter(I, config, eq=eq)
    J1 = j1(eq.T, I)
    return I, J1, reject


def frame_P2(eq: Equation, config: RunConfig = RunConfig()) -> InvariantFrame:
    _, J1, reject = _p_common(eq, config)
    _expect(J1.d("x"), eq, config, True, "J1_x", reject)
    return frame_quantities("P2", eq.T, eq.X, eq.U, strict=config.strict)


def frame_P3(eq: Equation, config: RunConfig = RunConfig()) -> InvariantFrame:
    _, J1, reject = _p_common(eq, config)
    _expect(J1.d("x"), eq, config, False, "J1_x", reject)
    _expect(J1.d("t"), eq, config, True, "J1_t", reject)
    return frame_quantities("P3", eq.T, eq.X, eq.U, strict=config.strict)


def _check_constant(J1: Expr, N, eq: Equation, config: RunConfig, reject, params) -> None:
    """J1 must equal N at sampled regular points (relative tolerance 1e-15)."""
    ev = evaluator((J1 - N,), config.precision)
    rng = random.Random(config.seed + 3)
    for _ in range(8 * config.trials):
        p = eq.window.sample(rng, config.precision)
        if reject(p):
            continue
        try:
            (v,) = ev(p, params)
        except DomainError:
            continue
        n = params["N"] if params else evaluator((N,), config.precision)(p)[0]
        if abs(v) > 1e-15 * max(1, abs(n)):
            raise NotConstant(f"J1 - N = {mpmath.nstr(v, 6)} at ({float(p.t)}, {float(p.x)})")


def frame_P4(eq: Equation, N, config: RunConfig = RunConfig(), *, tag: str = "P4") -> InvariantFrame:
    """P4 frame for the constant ``N`` (an Expr, or a number bound as parameter ``N``)."""
    I, J1, reject = _p_common(eq, config)
    params = {}
    if not isinstance(N, Expr):
        params = {"N": mpmath.mpf(N)}
        N = core.param("N")
    _check_constant(J1, N, eq, config, reject, params)
    frame = frame_quantities(tag, eq.T, eq.X, eq.U, N=N, strict=config.strict)
    q = 3 * N * frame.invariants["M1"] + 2
    _expect(q, eq, config, tag == "P4", "3*N*M1+2", reject, params)
    frame.params = params
    return frame


def frame_P5(eq: Equation, N, config: RunConfig = RunConfig()) -> InvariantFrame:
    return frame_P4(eq, N, config, tag="P5")


# ---------------------------------------------------------------------------
# point evaluation of derived invariants


class FrameEvaluator:
    """Values of the derived invariants ``op1^k op2^l F`` at points.

    The symbolic route compiles every derived invariant once.  When the
    expressions exceed ``node_budget`` nodes, the frame is rebuilt at each
    point over jets of T, X, U instead, truncated at the order found by a
    :class:`Depth` dry run.
    """

    def __init__(
        self,
        eq: Equation,
        frame: InvariantFrame,
        s: int,
        *,
        precision: int = 40,
        node_budget: int = DEFAULT_NODE_BUDGET,
        strict: bool = False,
        jets: bool = False,
    ):
        self.eq, self.frame, self.s = eq, frame, s
        self.precision = precision
        self.strict = strict
        self.keys = manifold_layout(frame.tag, s)
        self.params = dict(frame.params)
        self.mode = "jet"
        if not jets:
            try:
                exprs = derived(frame, s, node_budget=node_budget)
                self._exprs = [exprs[k] for k in self.keys]
                self._ev = evaluator(self._exprs, precision)
                self.mode = "symbolic"
            except OverflowBudget:
                pass
        if self.mode == "jet":
            self.order = self.jet_order(frame.tag, s, strict)

    @staticmethod
    def jet_order(tag: str, s: int, strict: bool = False) -> int:
        z = Depth(0)
        dry = frame_quantities(tag, z, z, z, N=z, strict=strict)
        need = max(v.n for v in derived(dry, s).values())
        if need > MAX_ORDER:
            raise OrderExceeded(f"derived invariants need jets of order {need} > {MAX_ORDER}")
        return need

    def float_program(self, indices=None) -> Optional[Callable]:
        """A float64 version of the selected outputs, or None in jet mode."""
        if self.mode != "symbolic":
            return None
        idx = range(len(self.keys)) if indices is None else indices
        ev = FloatEvaluator([self._exprs[i] for i in idx])
        params = {k: float(v) for k, v in self.params.items()}
        return lambda t, x: ev.raw(t, x, params)

    def __call__(self, p: Point) -> tuple:
        if self.mode == "symbolic":
            return self._ev(p, self.params)
        d, prec, eq = self.order, self.precision, self.eq
        T, X, U = (jet_eval(c, p, d, prec, self.params) for c in (eq.T, eq.X, eq.U))
        N = self.frame.invariants.get("N")
        if N is not None:
            N = jet_eval(N, p, d, prec, self.params) if isinstance(N, Expr) else Jet2.constant(N, T.base, d, T.ctx)
        fr = frame_quantities(self.frame.tag, T, X, U, N=N, strict=self.strict)
        vals = derived(fr, self.s)
        out = context(prec).mpf
        return tuple(out(vals[k].value) for k in self.keys)
