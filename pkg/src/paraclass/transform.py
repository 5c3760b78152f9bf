"""Class-preserving maps of  u_xx = T u_t + X u_x + U u.

Both map families use the same convention: the old unknown is written as
``u(t, x) = sigma(t, x) v(tau, y)`` with ``tau = phi(t)`` and
``y = psi(t, x)``; the returned equation is the one satisfied by ``v``.
Substituting and dividing by ``sigma psi_x^2`` gives

    T' = T phi' / psi_x^2
    X' = (T psi_t + X psi_x - psi_xx - 2 psi_x sigma_x / sigma) / psi_x^2
    U' = (T sigma_t + X sigma_x + U sigma - sigma_xx) / (sigma psi_x^2)

evaluated at the preimage of (tau, y).  :func:`verify_pushforward` checks
this derivation on explicit solutions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

import mpmath

from .errors import DegenerateMap, DomainError, SigmaVanishes
from .expr import core, parse
from .expr.core import ONE, ZERO, Expr, simplify, subs
from .expr.evaluate import DEFAULT_PRECISION, Point, Window, ZeroState, evaluator, is_zero
from .invariants import Equation

_T, _X = core.T, core.X


@dataclass(frozen=True)
class GaugeMap:
    sigma: Expr


@dataclass(frozen=True)
class PointMap:
    """``tau = phi(t)``, ``y = psi(t, x)``, ``u = sigma v``.

    ``phi_inv`` (in ``t``, standing for tau) and ``psi_inv`` (in ``t`` and
    ``x``, standing for tau and y) describe the inverse map.  They are
    derived automatically when ``phi`` is affine in ``t`` and ``psi`` is
    affine in ``x``.
    """

    phi: Expr
    psi: Expr
    sigma: Expr = ONE
    phi_inv: Optional[Expr] = None
    psi_inv: Optional[Expr] = None

    def forward(self, p: Point, precision: int = DEFAULT_PRECISION) -> Point:
        tau, y = evaluator((self.phi, self.psi), precision)(p)
        return Point(tau, y)

    def inverse(self) -> tuple[Expr, Expr]:
        if self.phi_inv is not None and self.psi_inv is not None:
            return self.phi_inv, self.psi_inv
        return _affine_inverse(self.phi, self.psi)


def _affine_inverse(phi: Expr, psi: Expr) -> tuple[Expr, Expr]:
    if "x" in core.free_vars(phi):
        raise DegenerateMap("phi must depend on t only")
    a = simplify(phi.d("t"))
    if "t" in core.free_vars(a) or a is ZERO:
        raise DegenerateMap("no explicit inverse: phi is not affine in t (pass phi_inv)")
    phi_inv = simplify((_T - subs(phi, {"t": ZERO})) / a)
    p = simplify(psi.d("x"))
    if "x" in core.free_vars(p) or p is ZERO:
        raise DegenerateMap("no explicit inverse: psi is not affine in x (pass psi_inv)")
    q = subs(psi, {"x": ZERO})
    psi_inv = (_X - q) / p
    return phi_inv, simplify(subs(psi_inv, {"t": phi_inv}))


def _require_nonzero(e: Expr, eq: Equation, exc, what: str, **kw) -> None:
    window = eq.window
    reject = None if eq.region is None else (lambda p: not eq.contains(p))
    try:
        verdict = is_zero(e, window, reject=reject, **kw)
    except Exception as err:  # every sample singular
        raise exc(f"{what} is singular on the window") from err
    if verdict.state is not ZeroState.NONZERO:
        raise exc(f"{what} vanishes on the window")
    # a nonzero verdict only shows the function is not identically zero;
    # also refuse sign changes seen on a coarse grid
    ev = evaluator((e,), 30)
    signs = set()
    for i in range(9):
        for j in range(9):
            t = window.t[0] + (window.t[1] - window.t[0]) * i / 8
            x = window.x[0] + (window.x[1] - window.x[0]) * j / 8
            p = Point.of(t, x, 30)
            if not eq.contains(p):
                continue
            try:
                (v,) = ev(p)
            except DomainError:
                continue
            if v == 0:
                raise exc(f"{what} vanishes at ({t}, {x})")
            signs.add(v > 0)
    if len(signs) > 1:
        raise exc(f"{what} changes sign on the window")


def gauge_transform(eq: Equation, g: GaugeMap, **kw) -> Equation:
    """Equation satisfied by ``v`` where ``u = sigma v``."""
    s = g.sigma
    _require_nonzero(s, eq, SigmaVanishes, "sigma", **kw)
    sx = s.d("x")
    X2 = simplify(eq.X - 2 * sx / s)
    U2 = simplify(eq.U + (eq.T * s.d("t") + eq.X * sx - sx.d("x")) / s)
    return Equation(eq.T, X2, U2, eq.window, eq.label, eq.region)


def _image_window(eq: Equation, m: PointMap, precision: int = 30) -> Window:
    ts, xs = [], []
    n = 8
    for i in range(n + 1):
        for j in range(n + 1):
            t = eq.window.t[0] + (eq.window.t[1] - eq.window.t[0]) * i / n
            x = eq.window.x[0] + (eq.window.x[1] - eq.window.x[0]) * j / n
            p = Point.of(t, x, precision)
            if not eq.contains(p):
                continue
            try:
                q = m.forward(p, precision)
            except DomainError:
                continue
            ts.append(float(q.t))
            xs.append(float(q.x))
    if not ts:
        raise DegenerateMap("the map is undefined on the whole window")
    return Window((min(ts), max(ts)), (min(xs), max(xs)))


def point_transform(eq: Equation, m: PointMap, **kw) -> Equation:
    """Push ``eq`` forward along a fibre-preserving point map with gauge.

    The returned window is the bounding box of the image of ``eq.window``;
    the returned region restricts it to the exact image.
    """
    if "x" in core.free_vars(m.phi):
        raise DegenerateMap("phi must depend on t only")
    dphi = m.phi.d("t")
    psi_x = m.psi.d("x")
    _require_nonzero(dphi, eq, DegenerateMap, "phi'", **kw)
    _require_nonzero(psi_x, eq, DegenerateMap, "psi_x", **kw)
    _require_nonzero(m.sigma, eq, SigmaVanishes, "sigma", **kw)
    s = m.sigma
    sx = s.d("x")
    jac2 = psi_x**2
    T2 = eq.T * dphi / jac2
    X2 = (eq.T * m.psi.d("t") + eq.X * psi_x - psi_x.d("x") - 2 * psi_x * sx / s) / jac2
    U2 = (eq.T * s.d("t") + eq.X * sx + eq.U * s - sx.d("x")) / (s * jac2)
    t_of, x_of = m.inverse()
    back = {"t": t_of, "x": x_of}
    coeffs = [simplify(subs(c, back)) for c in (T2, X2, U2)]
    return Equation(*coeffs, _image_window(eq, m), eq.label, _image_region(eq, t_of, x_of))


def _image_region(eq: Equation, t_of: Expr, x_of: Expr):
    """Membership in the image of ``eq``'s domain, decided through the inverse map."""
    inv = evaluator((t_of, x_of), 30)

    def region(q: Point) -> bool:
        try:
            t, x = inv(q)
        except DomainError:
            return False
        return eq.contains(Point(t, x))

    return region


# ---------------------------------------------------------------------------
# self-test on explicit solutions


@dataclass
class PushforwardReport:
    residuals: list
    source_residuals: list
    points: int

    @property
    def max_residual(self):
        return max(self.residuals, default=mpmath.mpf(0))

    def to_json(self) -> dict:
        return {
            "max_residual": mpmath.nstr(self.max_residual, 6),
            "source_max_residual": mpmath.nstr(max(self.source_residuals, default=0), 6),
            "points": self.points,
        }


def residual(eq: Equation, u: Expr) -> Expr:
    """``u_xx - T u_t - X u_x - U u``."""
    ux = u.d("x")
    return ux.d("x") - eq.T * u.d("t") - eq.X * ux - eq.U * u


def verify_pushforward(
    eq: Equation,
    eq2: Equation,
    m,
    solutions: Sequence[Expr],
    *,
    points: int = 12,
    precision: int = DEFAULT_PRECISION,
    seed: int = 0,
) -> PushforwardReport:
    """Residual of ``v = u / sigma`` (composed with the inverse map) in ``eq2``.

    ``m`` is a :class:`GaugeMap` or a :class:`PointMap`.  Residuals are
    measured in the target coordinates at images of random points of
    ``eq.window``, relative to the size of the terms involved.
    """
    if isinstance(m, GaugeMap):
        m = PointMap(_T, _X, m.sigma, _T, _X)
    t_of, x_of = m.inverse()
    back = {"t": t_of, "x": x_of}
    rng = random.Random(seed)
    res, src = [], []
    for u in solutions:
        v = subs(u / m.sigma, back)
        r_src = residual(eq, u)
        r_dst = residual(eq2, v)
        ev_src = evaluator((r_src, u.d("x").d("x")), precision)
        ev_dst = evaluator((r_dst, v.d("x").d("x"), eq2.T * v.d("t")), precision)
        for _ in range(points):
            p = eq.window.sample(rng, precision)
            try:
                r0, s0 = ev_src(p)
                q = m.forward(p, precision)
                r1, a1, b1 = ev_dst(q)
            except DomainError:
                continue
            src.append(abs(r0) / max(1, abs(s0)))
            res.append(abs(r1) / max(1, abs(a1), abs(b1)))
    return PushforwardReport(res, src, points)


DEFAULT_TESTS = ("exp(t + x)", "x^3 + t^2*x", "sin(x)*exp(-t)")


def intertwining_residual(
    eq: Equation,
    eq2: Equation,
    m,
    tests: Sequence[Expr] = (),
    *,
    points: int = 12,
    precision: int = DEFAULT_PRECISION,
    seed: int = 0,
) -> PushforwardReport:
    """Check  L[sigma v(phi, psi)] = sigma psi_x^2 (L2 v)(phi, psi)  on test functions.

    ``L`` and ``L2`` are the operators of ``eq`` and ``eq2``.  The identity
    holds for every smooth ``v``, so unlike :func:`verify_pushforward` it
    needs no solutions of ``eq``.
    """
    if isinstance(m, GaugeMap):
        m = PointMap(_T, _X, m.sigma, _T, _X)
    tests = [parse(v) if isinstance(v, str) else v for v in (tests or DEFAULT_TESTS)]
    fwd = {"t": m.phi, "x": m.psi}
    scale = m.sigma * m.psi.d("x") ** 2
    rng = random.Random(seed)
    res = []
    for v in tests:
        lhs = residual(eq, m.sigma * subs(v, fwd))
        rhs = scale * subs(residual(eq2, v), fwd)
        ev = evaluator((lhs - rhs, lhs, rhs), precision)
        for _ in range(points):
            p = eq.window.sample(rng, precision)
            if not eq.contains(p):
                continue
            try:
                d, a, b = ev(p)
            except DomainError:
                continue
            res.append(abs(d) / max(1, abs(a), abs(b)))
    return PushforwardReport(res, [], points)
