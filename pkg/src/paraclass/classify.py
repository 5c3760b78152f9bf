"""Decision tree placing an equation in exactly one subclass P1 ... P5.

    lambda == 0                    -> P1 (reducible to the heat equation)
    else J1_x != 0                 -> P2
    else J1_t != 0                 -> P3
    else J1 = N constant:
        3 N M1 + 2 != 0            -> P4
        else                       -> P5

The first predicate only accepts a symbolic proof or a witness; an Unknown
verdict raises :class:`Inconclusive`.  The J1 predicates and the final
one count "every sample below threshold" as vanishing, because their
expressions carry fifth roots that the symbolic zero test rarely
cancels.  The trail keeps the raw verdicts either way.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Optional

import mpmath

from .config import RunConfig
from .errors import DomainError, Inconclusive, PreconditionFailed, UnboundParameter
from .expr import core
from .expr.core import Expr
from .expr.evaluate import Point, ZeroState, ZeroVerdict, context, evaluator, is_zero
from .invariants import Equation, InvariantFrame, frame_quantities, fundamental, j1, lam, outside, regular_filter


@dataclass
class Subclass:
    tag: str
    N: object = None
    N_deviation: object = None
    N_exact: Optional[Expr] = None

    @property
    def N_tilde(self):
        """The coefficient of x^-2 in the model equation u_xx = u_t + Ñ x^-2 u."""
        if self.tag != "P5" or self.N is None:
            return None
        return -mpmath.mpf(4) / (3 * self.N**5)

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if self.N is not None:
            out["N"] = float(self.N)
            out["N_digits"] = mpmath.nstr(self.N, 30)
            out["N_deviation"] = float(self.N_deviation or 0)
            if self.N_exact is not None:
                out["N_exact"] = core.to_str(self.N_exact)
        if self.N_tilde is not None:
            out["N_tilde"] = float(self.N_tilde)
        return out


@dataclass
class TrailEntry:
    predicate: str
    verdict: ZeroVerdict
    note: str = ""

    def to_json(self) -> dict:
        out = {"predicate": self.predicate}
        out.update(self.verdict.to_json())
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class ClassificationReport:
    equation: Equation
    config: RunConfig
    subclass: Optional[Subclass]
    trail: list = field(default_factory=list)
    frame: Optional[InvariantFrame] = None
    params: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    inconclusive: Optional[str] = None

    @property
    def tag(self) -> Optional[str]:
        return self.subclass.tag if self.subclass else None

    def to_json(self) -> dict:
        out = {
            "config": self.config.to_json(),
            "subclass": self.tag,
            "trail": [e.to_json() for e in self.trail],
        }
        if self.inconclusive:
            out["inconclusive"] = self.inconclusive
        if self.subclass and self.subclass.N is not None:
            out["N"] = float(self.subclass.N)
            out["subclass_detail"] = self.subclass.to_json()
        if self.diagnostics:
            out["invariants"] = {"samples": self.diagnostics}
        return out


class HeatAnswer(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    INCONCLUSIVE = "Inconclusive"


def check_bound(eq: Equation) -> None:
    """Classification needs numbers: refuse free parameters."""
    names = sorted(eq.params)
    if names:
        raise UnboundParameter(names[0])


# the J1 and 3*N*M1+2 predicates treat Unknown as vanishing, so a symbolic
# proof only changes the trail; it is attempted on small expressions only
SOFT_PROOF_NODES = 400


def _require_T(eq: Equation, config: RunConfig) -> TrailEntry:
    v = is_zero(eq.T, eq.window, reject=outside(eq), **config.zero_kw())
    if v.state is not ZeroState.NONZERO:
        raise PreconditionFailed("T vanishes on the window; the equation is not parabolic")
    return TrailEntry("T != 0", v)


def heat_reducible(eq: Equation, config: RunConfig = RunConfig()) -> tuple[HeatAnswer, ZeroVerdict]:
    """Whether ``eq`` maps to u_xx = u_t, with the deciding verdict on lambda."""
    check_bound(eq)
    _require_T(eq, config)
    v = is_zero(lam(eq.T, eq.X, eq.U, config.strict), eq.window, reject=outside(eq), **config.zero_kw())
    if v.state is ZeroState.IDENTICALLY_ZERO:
        return HeatAnswer.YES, v
    if v.state is ZeroState.NONZERO:
        return HeatAnswer.NO, v
    return HeatAnswer.INCONCLUSIVE, v


def _constant_J1(J1: Expr, eq: Equation, config: RunConfig, reject) -> Subclass:
    """N from a J1 already known to be constant: exact if possible, else a sample mean."""
    s = core.simplify(J1)
    if not core.free_vars(s):
        ctx = context(config.precision)
        val = evaluator((s,), config.precision)(Point.of(eq.window.t[0], eq.window.x[0]))[0]
        return Subclass("P4", ctx.mpf(val), ctx.mpf(0), s)
    ev = evaluator((J1,), config.precision)
    rng = random.Random(config.seed + 1)
    vals = []
    attempts = 0
    while len(vals) < config.trials and attempts < 8 * config.trials:
        attempts += 1
        p = eq.window.sample(rng, config.precision)
        if reject(p):
            continue
        try:
            vals.append(ev(p)[0])
        except DomainError:
            continue
    if not vals:
        raise Inconclusive("J1 constant", "no regular point to sample J1")
    ctx = context(config.precision)
    mean = ctx.fsum(vals) / len(vals)
    dev = max(abs(v - mean) for v in vals)
    return Subclass("P4", mean, dev, None)


def _diagnostics(report: ClassificationReport, I: Expr, reject, points: int = 3) -> list:
    eq, config = report.equation, report.config
    names = ["I"]
    exprs = [I]
    if report.frame is not None:
        for k, v in report.frame.invariants.items():
            names.append(k)
            exprs.append(v)
    ev = evaluator(exprs, config.precision)
    rng = random.Random(config.seed + 2)
    out = []
    attempts = 0
    while len(out) < points and attempts < 20 * points:
        attempts += 1
        p = eq.window.sample(rng, config.precision)
        if reject(p):
            continue
        try:
            vals = ev(p, report.params)
        except DomainError:
            continue
        row = {"t": float(p.t), "x": float(p.x)}
        row.update({n: float(v) for n, v in zip(names, vals)})
        out.append(row)
    return out


def classify(eq: Equation, config: RunConfig = RunConfig(), *, diagnostics: bool = True) -> ClassificationReport:
    """Run the decision tree; raises :class:`Inconclusive` with ``.report`` attached."""
    check_bound(eq)
    report = ClassificationReport(eq, config, None)
    report.trail.append(_require_T(eq, config))
    kw = config.zero_kw()
    T, X, U = eq.T, eq.X, eq.U

    def give_up(predicate: str, detail: str):
        report.inconclusive = predicate
        exc = Inconclusive(predicate, detail)
        exc.report = report
        raise exc

    lam_v = is_zero(lam(T, X, U, config.strict), eq.window, reject=outside(eq), **kw)
    report.trail.append(TrailEntry("I", lam_v))
    if lam_v.state is ZeroState.IDENTICALLY_ZERO:
        report.subclass = Subclass("P1")
        return report
    if lam_v.state is ZeroState.UNKNOWN:
        give_up("I", "lambda is below threshold on every sample but not provably zero")

    I = fundamental(T, X, U, config.strict)
    reject = regular_filter(I, config, eq=eq)
    J1 = j1(T, I)

    v = is_zero(J1.d("x"), eq.window, reject=reject, proof_nodes=SOFT_PROOF_NODES, **kw)
    report.trail.append(TrailEntry("J1_x", v, "" if v.state is not ZeroState.UNKNOWN else "all samples below threshold"))
    if v.state is ZeroState.NONZERO:
        return _finish(report, Subclass("P2"), "P2", I, reject, diagnostics)

    v = is_zero(J1.d("t"), eq.window, reject=reject, proof_nodes=SOFT_PROOF_NODES, **kw)
    report.trail.append(TrailEntry("J1_t", v, "" if v.state is not ZeroState.UNKNOWN else "all samples below threshold"))
    if v.state is ZeroState.NONZERO:
        return _finish(report, Subclass("P3"), "P3", I, reject, diagnostics)

    sub = _constant_J1(J1, eq, config, reject)
    if sub.N_exact is not None:
        N = sub.N_exact
    else:
        N = core.param("N")
        report.params = {"N": sub.N}
    n_vanishes = sub.N_exact is core.ZERO if sub.N_exact is not None else abs(sub.N) <= config.n_tol
    if n_vanishes:
        report.trail.append(
            TrailEntry("3*N*M1+2", ZeroVerdict(ZeroState.NONZERO), "N = 0, so 3*N*M1+2 = 2")
        )
        return _finish(report, sub, "P4", I, reject, diagnostics, N)
    M1 = frame_quantities("P5", T, X, U, N=N, strict=config.strict).invariants["M1"]
    q = 3 * N * M1 + 2
    v = is_zero(q, eq.window, reject=reject, params=report.params, proof_nodes=SOFT_PROOF_NODES, **kw)
    report.trail.append(TrailEntry("3*N*M1+2", v, "" if v.state is not ZeroState.UNKNOWN else "all samples below threshold"))
    if v.state is ZeroState.NONZERO:
        return _finish(report, sub, "P4", I, reject, diagnostics, N)
    sub.tag = "P5"
    return _finish(report, sub, "P5", I, reject, diagnostics, N)


def _finish(report, sub: Subclass, tag: str, I, reject, diagnostics: bool, N=None) -> ClassificationReport:
    eq, config = report.equation, report.config
    sub.tag = tag
    report.subclass = sub
    report.frame = frame_quantities(tag, eq.T, eq.X, eq.U, N=N, strict=config.strict)
    if report.params:
        report.frame.params = dict(report.params)
    if diagnostics:
        report.diagnostics = _diagnostics(report, I, reject)
    return report
