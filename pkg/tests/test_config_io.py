import json

import pytest

from paraclass import RunConfig
from paraclass.io import EquationFileError, equation_from_json, equation_to_json, load_equation, save_equation

from helpers import corpus_data, corpus_names


def test_defaults():
    c = RunConfig()
    assert (c.precision, c.trials, c.threshold, c.eps_I, c.order, c.samples) == (40, 24, 1e-20, 1e-12, 2, 50)
    assert (c.delta_match, c.delta_separate, c.seed) == (1e-8, 1e-3, 0)


@pytest.mark.parametrize(
    "changes",
    [
        {"precision": 10},
        {"trials": 0},
        {"threshold": 0},
        {"eps_I": -1},
        {"delta_match": 1e-2, "delta_separate": 1e-3},
        {"order": 3},
        {"order": -1},
        {"samples": 0},
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ValueError):
        RunConfig(**changes)


def test_high_order_needs_opt_in():
    assert RunConfig(order=3, allow_high_order=True).order == 3


def test_config_round_trip():
    c = RunConfig(seed=5, samples=9, strict=True)
    assert RunConfig.from_json(json.loads(json.dumps(c.to_json()))) == c


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_round_trip(name, tmp_path):
    eq = equation_from_json(corpus_data(name))
    save_equation(eq, tmp_path / "eq.json")
    again = load_equation(tmp_path / "eq.json")
    assert (again.T, again.X, again.U, again.window, again.label) == (eq.T, eq.X, eq.U, eq.window, eq.label)
    assert equation_to_json(again) == equation_to_json(eq)


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"T": "1", "X": "0", "window": {"t": [1, 2], "x": [1, 2]}},
        {"T": "1", "X": "0", "U": 3, "window": {"t": [1, 2], "x": [1, 2]}},
        {"T": "1", "X": "0", "U": "x", "window": {"t": [1, 2]}},
        {"T": "1", "X": "0", "U": "x", "window": {"t": [1, 2], "x": [2, 2]}},
        {"T": "1", "X": "0", "U": "x", "window": {"t": [1, "inf"], "x": [1, 2]}},
        {"T": "1", "X": "0", "U": "x", "window": [1, 2]},
        {"T": "1", "X": "0", "U": "x", "window": {"t": [1, 2], "x": [1, 2]}, "label": 7},
    ],
)
def test_malformed_equation_files(doc):
    with pytest.raises(EquationFileError):
        equation_from_json(doc)
