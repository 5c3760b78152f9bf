"""Equation builders and the JSON corpus shared by the test modules."""

import json
from pathlib import Path

from paraclass import Equation, Window, parse
from paraclass.io import load_equation

CORPUS = Path(__file__).parent / "corpus"
UNIT = Window((1.0, 2.0), (1.0, 2.0))


def make(U, T="1", X="0", window=UNIT, label=None):
    return Equation(parse(T), parse(X), parse(U), window, label)


def corpus_names():
    return sorted(p.stem for p in CORPUS.glob("*.json"))


def corpus(name):
    return load_equation(CORPUS / f"{name}.json")


def corpus_data(name):
    return json.loads((CORPUS / f"{name}.json").read_text())

