import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from paraclass import EquivalenceState, RunConfig, classify, compare, heat_equivalence, parse, sample_manifold
from paraclass.equivalence import local_rank, numerical_rank
from paraclass.errors import PreconditionFailed
from paraclass.transform import GaugeMap, PointMap, gauge_transform, point_transform

from helpers import make

FAST = RunConfig(samples=12)
EQ, NEQ, INC = EquivalenceState.EQUIVALENT, EquivalenceState.NOT_EQUIVALENT, EquivalenceState.INCONCLUSIVE


@pytest.mark.parametrize(
    "A, B, state",
    [
        ("x^4", "t*x^-2", NEQ),
        ("x^4", "x^3", NEQ),
        ("0", "0", EQ),
        ("x^4", "x^6", NEQ),
        ("t*x^-2", "t^2*x^-2", NEQ),
        ("x^-2 + x", "x^-2 + x", EQ),
        ("-4/3*x^-2", "-4/3*x^-2", EQ),
        ("-4/3*x^-2", "-1/24*x^-2", NEQ),
    ],
)
def test_verdicts(A, B, state):
    assert compare(make(A), make(B), FAST).state is state


def test_tag_mismatch_skips_the_search():
    v = compare(make("x^4"), make("t*x^-2"))
    assert v.tags == ("P2", "P3") and v.distances is None


def test_p4_constants_separate():
    v = compare(make("x^-2 + x"), make("-1/3*x^-2 + t*x"))
    assert v.state is NEQ and v.residuals["N_gap"] > 1


def test_p5_gauge_image():
    eq = make("-4/3*x^-2")
    image = gauge_transform(eq, GaugeMap(parse("exp(t + x^2)")))
    assert compare(eq, image).state is EQ


@pytest.mark.parametrize("U", ["x^4", "t*x^-2", "-1/3*x^-2 + t*x"])
def test_reflexive_distances_are_tiny(U):
    v = compare(make(U), make(U), FAST)
    assert v.state is EQ
    assert max(v.distances) <= FAST.delta_match


def test_transformed_pair_both_directions():
    eq = make("x^-2 + x")
    image = point_transform(eq, PointMap(parse("2*t"), parse("x + t^2"), parse("exp(x)")))
    ab, ba = compare(eq, image, FAST), compare(image, eq, FAST)
    assert ab.state is ba.state is EQ


def test_heat_equivalence():
    assert heat_equivalence(make("0", X="1")).state is EQ
    assert heat_equivalence(make("x^4")).state is NEQ


def test_verdict_json_is_deterministic():
    a = json.dumps(compare(make("x^4"), make("exp(x)"), FAST).to_json(), sort_keys=True)
    b = json.dumps(compare(make("x^4"), make("exp(x)"), FAST).to_json(), sort_keys=True)
    assert a == b


def test_sampled_manifold_shape_and_seed():
    eq = make("x^4")
    report = classify(eq, diagnostics=False)
    A = sample_manifold(eq, report, m=8, config=FAST)
    B = sample_manifold(eq, report, m=8, config=FAST)
    assert A.arity == 24 and len(A.tuples) == 8
    assert A.tuples == B.tuples
    assert all(eq.contains(p) for p in A.points)
    C = sample_manifold(eq, report, m=8, config=FAST.with_(seed=1))
    assert C.tuples != A.tuples
    assert sample_manifold(eq, report, s=0, m=3, config=FAST).arity == 4


def test_manifold_needs_a_frame():
    eq = make("-4/3*x^-2")
    with pytest.raises(PreconditionFailed):
        sample_manifold(eq, classify(eq, diagnostics=False), m=2)


@given(st.integers(1, 4), st.integers(6, 20), st.integers(0, 2**16))
def test_numerical_rank_of_linear_clouds(k, n, seed):
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((k, 7))
    cloud = rng.standard_normal((n, k)) @ basis + rng.standard_normal(7)
    assert numerical_rank(cloud) == min(k, n - 1)


@pytest.mark.parametrize("U", ["x^4", "t*x^-2", "x^-2 + x"])
def test_local_rank_is_at_most_two(U):
    eq = make(U)
    report = classify(eq, diagnostics=False)
    for p in sample_manifold(eq, report, m=2, config=FAST).points:
        assert local_rank(eq, report, p) <= 2
