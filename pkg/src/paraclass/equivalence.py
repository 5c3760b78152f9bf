"""Local equivalence through sampled classifying manifolds.

Two equations of the same subclass P2, P3 or P4 are locally equivalent when
their classifying manifolds, the images of (t, x) under the derived
invariants, overlap.  Overlap is tested numerically: each sampled tuple of
one manifold is matched against the other by a derivative-free search over
(t, x), and the worst match in each direction decides

    both directed distances <= delta_match      -> Equivalent
    some directed distance  >  delta_separate   -> NotEquivalent
    otherwise                                   -> Inconclusive

Distances are Euclidean after scaling every coordinate by
``1 + median |value|`` over both clouds.  The separate threshold applies to
the best distance found, not to a certified lower bound.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy.optimize import minimize

from .classify import ClassificationReport, HeatAnswer, classify, heat_reducible
from .config import RunConfig
from .errors import BudgetExhausted, DomainError, PreconditionFailed
from .expr.evaluate import Point
from .invariants import Equation, FrameEvaluator, regular_filter

PENALTY = 1e6


class EquivalenceState(str, enum.Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ClassifyingManifold:
    tag: str
    order: int
    layout: tuple
    points: list
    tuples: list
    rejected: int = 0
    mode: str = "symbolic"

    @property
    def arity(self) -> int:
        return len(self.layout)

    def array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.tuples])

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "order": self.order,
            "layout": ["%s_%d%d" % k for k in self.layout],
            "samples": len(self.tuples),
            "rejected": self.rejected,
            "mode": self.mode,
        }


@dataclass
class EquivalenceVerdict:
    state: EquivalenceState
    tags: tuple
    distances: Optional[tuple] = None
    residuals: dict = field(default_factory=dict)
    detail: str = ""
    thresholds: Optional[tuple] = None

    def to_json(self) -> dict:
        out = {"state": self.state.value, "tags": list(self.tags)}
        if self.distances is not None:
            out["distances"] = {"a_to_b": self.distances[0], "b_to_a": self.distances[1]}
        if self.thresholds is not None:
            out["delta_match"], out["delta_separate"] = self.thresholds
        if self.residuals:
            out["residuals"] = self.residuals
        if self.detail:
            out["detail"] = self.detail
        return out


def _evaluator(eq: Equation, report: ClassificationReport, s: int, config: RunConfig) -> FrameEvaluator:
    if report.tag not in ("P2", "P3", "P4"):
        raise PreconditionFailed(f"subclass {report.tag} has no classifying manifold")
    return FrameEvaluator(
        eq, report.frame, s, precision=config.precision, node_budget=config.node_budget, strict=config.strict
    )


def sample_manifold(
    eq: Equation,
    report: ClassificationReport,
    s: Optional[int] = None,
    m: Optional[int] = None,
    config: RunConfig = RunConfig(),
    seed_offset: int = 0,
    fe: Optional[FrameEvaluator] = None,
) -> ClassifyingManifold:
    """Derived invariants of order ``s`` at ``m`` regular points of the window."""
    s = config.order if s is None else s
    m = config.samples if m is None else m
    if fe is None or fe.s != s:
        fe = _evaluator(eq, report, s, config)
    reject = regular_filter(report.frame.I, config, report.params, eq)
    rng = random.Random(config.seed * 1000 + 7 + seed_offset)
    points, tuples, rejected = [], [], 0
    while len(tuples) < m:
        if rejected > 10 * m:
            raise BudgetExhausted(f"only {len(tuples)} of {m} regular points after {rejected} rejections")
        p = eq.window.sample(rng, config.precision)
        if reject(p):
            rejected += 1
            continue
        try:
            row = fe(p)
        except (DomainError, ZeroDivisionError, OverflowError):
            rejected += 1
            continue
        points.append(p)
        tuples.append(row)
    return ClassifyingManifold(report.tag, s, fe.keys, points, tuples, rejected, fe.mode)


def numerical_rank(cloud: np.ndarray, rel: float = 1e-6) -> int:
    """Number of singular values of the centred cloud above ``rel`` times the largest."""
    c = cloud - cloud.mean(axis=0)
    sv = np.linalg.svd(c, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel * sv[0]))


def local_rank(
    eq: Equation,
    report: ClassificationReport,
    p: Point,
    config: RunConfig = RunConfig(),
    radius: float = 1e-8,
    points: int = 16,
    rel: float = 1e-6,
) -> int:
    """Numerical rank of the tuple cloud sampled in a tiny box around ``p``.

    Curvature of the manifold contributes singular values of relative size
    about ``radius``, far below ``rel``, so the result is the dimension of
    the classifying manifold near the image of ``p``.
    """
    fe = _evaluator(eq, report, config.order, config)
    rng = random.Random(config.seed + 9)
    wt = (eq.window.t[1] - eq.window.t[0]) * radius
    wx = (eq.window.x[1] - eq.window.x[0]) * radius
    rows = []
    for _ in range(points):
        q = Point(p.t + wt * (2 * rng.random() - 1), p.x + wx * (2 * rng.random() - 1))
        rows.append(fe(q))
    c = mpmath.matrix([[v - m for v, m in zip(row, _mean(rows))] for row in rows])
    sv = sorted((abs(v) for v in mpmath.svd_r(c, compute_uv=False)), reverse=True)
    if not sv or sv[0] == 0:
        return 0
    return sum(1 for v in sv if v > rel * sv[0])


def _mean(rows):
    n = len(rows)
    return [mpmath.fsum(col) / n for col in zip(*rows)]


# ---------------------------------------------------------------------------
# overlap search


class _Target:
    """Normalised distances from fixed tuples to the manifold of one equation.

    The search runs on float64 programs when the invariants are symbolic:
    first on the order-0 coordinates, which are cheap and usually pin the
    point down, then on the whole tuple.  The distance reported for the
    final point is always recomputed at full precision.
    """

    def __init__(self, fe: FrameEvaluator, eq: Equation, reject, scale: np.ndarray):
        self.fe = fe
        self.eq = eq
        self.window = eq.window
        self.reject = reject
        self.scale = scale
        self.calls = 0
        self.base = [i for i, (_, k, l) in enumerate(fe.keys) if k == 0 and l == 0]
        self.fast_full = fe.float_program()
        self.fast_base = fe.float_program(self.base)

    def _inside(self, t: float, x: float) -> bool:
        (t0, t1), (x0, x1) = self.window.t, self.window.x
        if not (t0 <= t <= t1 and x0 <= x <= x1):
            return False
        return self.eq.region is None or self.eq.region(Point.of(t, x, 30))

    def exact(self, t: float, x: float) -> Optional[np.ndarray]:
        if not self._inside(t, x):
            return None
        p = Point.of(t, x, self.fe.precision)
        self.calls += 1
        try:
            if self.reject(p):
                return None
            row = self.fe(p)
        except (DomainError, ZeroDivisionError, OverflowError):
            return None
        return np.array([float(v) for v in row]) / self.scale

    def objective(self, a: np.ndarray, base_only: bool):
        prog = self.fast_base if base_only else self.fast_full
        idx = self.base if base_only else slice(None)
        scale, target = self.scale[idx], a[idx]

        def f(z) -> float:
            t, x = float(z[0]), float(z[1])
            if not self._inside(t, x):
                return PENALTY
            self.calls += 1
            try:
                if prog is None:
                    p = Point.of(t, x, self.fe.precision)
                    if self.reject(p):
                        return PENALTY
                    v = np.array([float(w) for w in self.fe(p)])[idx] / scale
                else:
                    v = np.array(prog(t, x)) / scale
            except (DomainError, ZeroDivisionError, OverflowError):
                return PENALTY
            d = float(np.linalg.norm(v - target))
            return d if math.isfinite(d) else PENALTY

        return f

    def search(self, a: np.ndarray, z0, step, iterations: int, goal: float) -> tuple[float, tuple]:
        z = np.asarray(z0, dtype=float)
        best, best_z = PENALTY, (float(z[0]), float(z[1]))
        stages = [(True, 1.0, goal * 1e-4), (False, 1e-3, goal * 1e-2)]
        if len(self.base) == len(self.fe.keys):
            stages = stages[1:]
        for base_only, size, stop in stages:
            simplex = np.array([z, z + [step[0] * size, 0], z + [0, step[1] * size]])
            z = _nelder_mead(self.objective(a, base_only), z, simplex, iterations, stop)
            v = self.exact(float(z[0]), float(z[1]))
            if v is not None:
                d = float(np.linalg.norm(v - a))
                if d < best:
                    best, best_z = d, (float(z[0]), float(z[1]))
            if best <= goal:
                break
        return best, best_z


class _Reached(Exception):
    def __init__(self, z):
        self.z = z


def _nelder_mead(f, z0, simplex, iterations: int, stop: float) -> np.ndarray:
    """scipy's Nelder-Mead, cut short once the objective drops below ``stop``."""

    def g(z):
        v = f(z)
        if v <= stop:
            raise _Reached(np.array(z, dtype=float))
        return v

    try:
        res = minimize(
            g,
            z0,
            method="Nelder-Mead",
            options={"maxiter": iterations, "initial_simplex": simplex, "xatol": 1e-15, "fatol": 1e-15},
        )
    except _Reached as hit:
        return hit.z
    return res.x if res.fun < PENALTY else np.asarray(z0, dtype=float)


def _directed(
    A: ClassifyingManifold,
    B: ClassifyingManifold,
    target: _Target,
    scale: np.ndarray,
    config: RunConfig,
    starts: int = 3,
) -> tuple[float, list]:
    """max over tuples of A of the smallest distance found to B's manifold."""
    a_arr = A.array() / scale
    b_arr = B.array() / scale
    b_pts = [(float(p.t), float(p.x)) for p in B.points]
    (t0, t1), (x0, x1) = target.window.t, target.window.x
    step = 0.05 * np.array([t1 - t0, x1 - x0])
    worst, per = 0.0, []
    for a in a_arr:
        d_nn = np.linalg.norm(b_arr - a, axis=1)
        order = np.argsort(d_nn, kind="stable")
        best = float(d_nn[order[0]])
        for j in order[:starts]:
            if best <= config.delta_match:
                break
            d, _ = target.search(a, b_pts[j], step, config.search_iterations, config.delta_match)
            best = min(best, d)
        per.append(best)
        worst = max(worst, best)
        if worst > config.delta_separate:
            break
    return worst, per


def _scale(A: ClassifyingManifold, B: ClassifyingManifold) -> np.ndarray:
    both = np.vstack([A.array(), B.array()])
    return 1 + np.median(np.abs(both), axis=0)


def manifold_distance(
    eqA: Equation,
    repA: ClassificationReport,
    eqB: Equation,
    repB: ClassificationReport,
    config: RunConfig = RunConfig(),
) -> tuple[float, float, dict]:
    """Directed distances (A to B, B to A) between the sampled manifolds."""
    feA = _evaluator(eqA, repA, config.order, config)
    feB = _evaluator(eqB, repB, config.order, config)
    A = sample_manifold(eqA, repA, config=config, seed_offset=0, fe=feA)
    B = sample_manifold(eqB, repB, config=config, seed_offset=1, fe=feB)
    scale = _scale(A, B)
    tB = _Target(feB, eqB, regular_filter(repB.frame.I, config, repB.params, eqB), scale)
    dab, per_ab = _directed(A, B, tB, scale, config)
    tA = _Target(feA, eqA, regular_filter(repA.frame.I, config, repA.params, eqA), scale)
    dba, per_ba = _directed(B, A, tA, scale, config)
    evidence = {
        "a_to_b": [_fmt(v) for v in per_ab],
        "b_to_a": [_fmt(v) for v in per_ba],
        "evaluations": tA.calls + tB.calls,
    }
    return dab, dba, evidence


def _fmt(v: float) -> float:
    return float("%.6g" % v)


def _decide(dab: float, dba: float, config: RunConfig) -> EquivalenceState:
    if dab <= config.delta_match and dba <= config.delta_match:
        return EquivalenceState.EQUIVALENT
    if max(dab, dba) > config.delta_separate:
        return EquivalenceState.NOT_EQUIVALENT
    return EquivalenceState.INCONCLUSIVE


def _n_gap(a: ClassificationReport, b: ClassificationReport) -> float:
    return float(abs(a.subclass.N - b.subclass.N))


def compare_reports(
    eqA: Equation,
    repA: ClassificationReport,
    eqB: Equation,
    repB: ClassificationReport,
    config: RunConfig = RunConfig(),
) -> EquivalenceVerdict:
    tags = (repA.tag, repB.tag)
    thresholds = (config.delta_match, config.delta_separate)
    if repA.tag != repB.tag:
        return EquivalenceVerdict(EquivalenceState.NOT_EQUIVALENT, tags, detail="subclass tags differ")
    if repA.tag == "P1":
        return EquivalenceVerdict(EquivalenceState.EQUIVALENT, tags, detail="both reduce to the heat equation")
    if repA.tag in ("P4", "P5"):
        gap = _n_gap(repA, repB)
        if gap > config.n_tol:
            return EquivalenceVerdict(
                EquivalenceState.NOT_EQUIVALENT, tags, residuals={"N_gap": _fmt(gap)}, detail="constants N differ"
            )
        if repA.tag == "P5":
            return EquivalenceVerdict(
                EquivalenceState.EQUIVALENT, tags, residuals={"N_gap": _fmt(gap)}, detail="same constant N"
            )
    dab, dba, evidence = manifold_distance(eqA, repA, eqB, repB, config)
    state = _decide(dab, dba, config)
    return EquivalenceVerdict(state, tags, (_fmt(dab), _fmt(dba)), evidence, "classifying manifolds", thresholds)


def compare(eqA: Equation, eqB: Equation, config: RunConfig = RunConfig()) -> EquivalenceVerdict:
    """Three-way local equivalence verdict; Inconclusive classifications propagate."""
    repA = classify(eqA, config, diagnostics=False)
    repB = classify(eqB, config, diagnostics=False)
    return compare_reports(eqA, repA, eqB, repB, config)


def heat_equivalence(eq: Equation, config: RunConfig = RunConfig()) -> EquivalenceVerdict:
    answer, verdict = heat_reducible(eq, config)
    state = {
        HeatAnswer.YES: EquivalenceState.EQUIVALENT,
        HeatAnswer.NO: EquivalenceState.NOT_EQUIVALENT,
        HeatAnswer.INCONCLUSIVE: EquivalenceState.INCONCLUSIVE,
    }[answer]
    return EquivalenceVerdict(state, ("P1" if answer is HeatAnswer.YES else None, "P1"), residuals={"I": verdict.to_json()})
