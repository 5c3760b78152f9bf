"""Invariant classification of linear parabolic equations u_xx = T u_t + X u_x + U u."""

__version__ = "0.1.0"

from .classify import ClassificationReport, HeatAnswer, Subclass, classify, heat_reducible
from .config import RunConfig
from .equivalence import (
    ClassifyingManifold,
    EquivalenceState,
    EquivalenceVerdict,
    compare,
    heat_equivalence,
    sample_manifold,
)
from .expr import Point, Window, parse
from .invariants import (
    Equation,
    InvariantFrame,
    derived_invariants,
    frame_P2,
    frame_P3,
    frame_P4,
    frame_P5,
    fundamental_I,
    heat_equation,
    kappa,
    lambda_inv,
)
from .transform import GaugeMap, PointMap, gauge_transform, point_transform, verify_pushforward

__all__ = [
    "ClassificationReport",
    "ClassifyingManifold",
    "Equation",
    "EquivalenceState",
    "EquivalenceVerdict",
    "GaugeMap",
    "HeatAnswer",
    "InvariantFrame",
    "Point",
    "PointMap",
    "RunConfig",
    "Subclass",
    "Window",
    "classify",
    "compare",
    "derived_invariants",
    "frame_P2",
    "frame_P3",
    "frame_P4",
    "frame_P5",
    "fundamental_I",
    "gauge_transform",
    "heat_equation",
    "heat_equivalence",
    "heat_reducible",
    "kappa",
    "lambda_inv",
    "parse",
    "point_transform",
    "sample_manifold",
    "verify_pushforward",
]
