"""Exception hierarchy shared by all modules."""


class ParaclassError(Exception):
    """Base class for library errors."""


class ParseError(ParaclassError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.message = message
        self.offset = offset


class DomainError(ParaclassError, ArithmeticError):
    """Evaluation left the real domain (pole, log of non-positive, ...)."""


class UnboundParameter(ParaclassError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound parameter {self.name!r}"


class OverflowBudget(ParaclassError):
    """Symbolic expression grew past the configured node budget."""


class AllPointsRejected(ParaclassError):
    """Every sample point of a window was singular."""


class BudgetExhausted(ParaclassError):
    """Not enough regular points could be found in a window."""


class OrderExceeded(ParaclassError, ValueError):
    """A jet was asked for a derivative beyond its truncation order."""


class PreconditionFailed(ParaclassError):
    """A frame was requested for an equation outside its subclass."""


class Inconclusive(ParaclassError):
    """A zero test could neither prove nor refute vanishing."""

    def __init__(self, predicate: str, detail: str = ""):
        super().__init__(f"{predicate}: {detail}" if detail else predicate)
        self.predicate = predicate


class NotConstant(PreconditionFailed):
    pass


class SigmaVanishes(ParaclassError):
    pass


class DegenerateMap(ParaclassError):
    pass
