"""Tolerances, budgets and seeds shared by every command."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class RunConfig:
    precision: int = 40
    trials: int = 24
    threshold: float = 1e-20
    eps_I: float = 1e-12
    order: int = 2
    samples: int = 50
    delta_match: float = 1e-8
    delta_separate: float = 1e-3
    seed: int = 0
    n_tol: float = 1e-12
    node_budget: int = 200_000
    search_iterations: int = 200
    strict: bool = False
    allow_high_order: bool = False

    def __post_init__(self):
        if self.precision < 30:
            raise ValueError("precision must be at least 30 digits")
        if self.trials < 1 or self.samples < 1:
            raise ValueError("trials and samples must be positive")
        for name in ("threshold", "eps_I", "delta_match", "delta_separate", "n_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_match > self.delta_separate:
            raise ValueError("delta_match must not exceed delta_separate")
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.order > 2 and not self.allow_high_order:
            raise ValueError("order above 2 needs allow_high_order")
        if self.node_budget < 1 or self.search_iterations < 1:
            raise ValueError("budgets must be positive")

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def zero_kw(self) -> dict:
        """Keyword arguments for :func:`paraclass.expr.is_zero`."""
        return {
            "trials": self.trials,
            "threshold": self.threshold,
            "precision": self.precision,
            "seed": self.seed,
        }

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
