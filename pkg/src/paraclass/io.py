"""Equation files: JSON with expression strings and a sampling window.

    {"label": "x4", "T": "1", "X": "0", "U": "x^4",
     "window": {"t": [1, 2], "x": [1, 2]}}
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Union

from .errors import ParaclassError
from .expr import parse, to_str
from .expr.evaluate import Window
from .invariants import Equation


class EquationFileError(ParaclassError, ValueError):
    """Malformed equation file."""


def _bounds(data: Mapping, key: str) -> tuple[float, float]:
    try:
        lo, hi = data[key]
        lo, hi = float(lo), float(hi)
    except (KeyError, TypeError, ValueError):
        raise EquationFileError(f"window.{key} must be a pair of numbers") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise EquationFileError(f"window.{key} must satisfy lo < hi with finite bounds")
    return lo, hi


def equation_from_json(data: Mapping) -> Equation:
    if not isinstance(data, Mapping):
        raise EquationFileError("an equation file holds a JSON object")
    coeffs = []
    for key in ("T", "X", "U"):
        text = data.get(key)
        if not isinstance(text, str):
            raise EquationFileError(f"{key} must be an expression string")
        coeffs.append(parse(text))
    window = data.get("window")
    if not isinstance(window, Mapping):
        raise EquationFileError("window must be an object with t and x bounds")
    label = data.get("label")
    if label is not None and not isinstance(label, str):
        raise EquationFileError("label must be a string")
    return Equation(*coeffs, Window(_bounds(window, "t"), _bounds(window, "x")), label)


def equation_to_json(eq: Equation) -> dict:
    out = {"T": to_str(eq.T), "X": to_str(eq.X), "U": to_str(eq.U), "window": eq.window.to_json()}
    if eq.label is not None:
        out["label"] = eq.label
    return out


def load_equation(path: Union[str, Path]) -> Equation:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise EquationFileError(f"{path}: invalid JSON ({err.msg} at line {err.lineno})") from None
    except OSError as err:
        raise EquationFileError(f"{path}: {err.strerror}") from None
    return equation_from_json(data)


def save_equation(eq: Equation, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(equation_to_json(eq), indent=2, sort_keys=True) + "\n")
