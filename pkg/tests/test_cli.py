import io
import json
import shutil
import subprocess
import sys

import pytest

from paraclass.cli import main

from helpers import CORPUS


def write(tmp_path, name, U, T="1", X="0", window=None):
    path = tmp_path / f"{name}.json"
    doc = {"label": name, "T": T, "X": X, "U": U, "window": window or {"t": [1, 2], "x": [1, 2]}}
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def files(tmp_path):
    return {
        "heat": write(tmp_path, "heat", "0"),
        "heat_gauge": write(tmp_path, "heat_gauge", "-1", X="-2"),
        "x4": write(tmp_path, "x4", "x^4"),
        "p3": write(tmp_path, "p3", "t*x^-2"),
        "p5": write(tmp_path, "p5", "-4/3*x^-2"),
        "unbound": write(tmp_path, "unbound", "K*x^-2"),
        "tiny": write(tmp_path, "tiny", "10^-30*x^4"),
        "singular": write(tmp_path, "singular", "x", T="ln(-x - 5)"),
        "wide": write(tmp_path, "wide", "x^4", window={"t": [1, 2], "x": [-1, 1]}),
    }


@pytest.mark.parametrize(
    "name, code, tag",
    [("heat", 0, "P1"), ("x4", 0, "P2"), ("p3", 0, "P3"), ("p5", 0, "P5"), ("tiny", 3, None)],
)
def test_classify_exit_codes(files, name, code, tag):
    rc, text = run("classify", files[name], "--json")
    assert rc == code
    report = json.loads(text)
    assert report["subclass"] == tag
    assert report["config"]["precision"] == 40


def test_classify_text_report(files):
    rc, text = run("classify", files["p5"])
    assert rc == 0
    assert "subclass: P5" in text and "N = " in text and "N~" in text


def test_unbound_parameter(files, capsys):
    assert run("classify", files["unbound"])[0] == 1
    assert "unbound parameter" in capsys.readouterr().err


def test_all_points_rejected(files):
    assert run("classify", files["singular"])[0] == 2


@pytest.mark.parametrize("argv", [["classify"], ["classify", "a.json", "--precision", "x"], ["frobnicate"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("classify", str(bad))[0] == 1
    assert run("classify", str(tmp_path / "missing.json"))[0] == 1
    assert run("classify", write(tmp_path, "syntax", "x^"))[0] == 1
    assert run("classify", write(tmp_path, "win", "x", window={"t": [2, 1], "x": [1, 2]}))[0] == 1
    assert run("classify", str(bad), "--precision", "10")[0] == 1


@pytest.mark.parametrize("name, code", [("heat_gauge", 0), ("x4", 4)])
def test_heat(files, name, code):
    assert run("heat", files[name])[0] == code


@pytest.mark.parametrize(
    "a, b, code",
    [("heat", "heat_gauge", 0), ("x4", "p3", 4), ("x4", "x4", 0), ("tiny", "x4", 3)],
)
def test_compare_exit_codes(files, a, b, code):
    rc, text = run("compare", files[a], files[b], "--json", "--samples", "12")
    assert rc == code
    assert "verdict" in json.loads(text)


def test_invariants_rows(files):
    rc, text = run("invariants", files["x4"], "--at", "1,1", "--at", "1.5,2", "--json")
    assert rc == 0
    rows = json.loads(text)["invariants"]["points"]
    assert rows[0]["lambda"] == pytest.approx(384, rel=1e-15)
    assert rows[1]["lambda"] == pytest.approx(768, rel=1e-15)
    assert all(r["status"] == "regular" and len(r["derived"]) == 24 for r in rows)


def test_invariants_of_heat(files):
    rc, text = run("invariants", files["heat"], "--at", "1,1", "--json")
    row = json.loads(text)["invariants"]["points"][0]
    assert (row["K"], row["lambda"], row["I"]) == (0, 0, 0)


def test_invariants_singular_row(files):
    rc, text = run("invariants", files["wide"], "--at", "1,0", "--at", "1,0.5")
    assert rc == 0
    assert "(t, x) = (1, 0)  singular" in text
    assert "(t, x) = (1, 0.5)  regular" in text


def test_invariants_outside_window(files):
    assert run("invariants", files["x4"], "--at", "5,5")[0] == 1


def test_transform_gauge(files, tmp_path):
    target = tmp_path / "out.json"
    rc, text = run("transform", files["heat"], "--gauge", "exp(x)", "-o", str(target), "--check")
    assert rc == 0 and "pushforward residual" in text
    doc = json.loads(target.read_text())
    assert (doc["T"], doc["X"], doc["U"]) == ("1", "-2", "-1")
    assert run("classify", str(target))[0] == 0


def test_transform_point_then_classify(files, tmp_path):
    target = tmp_path / "out.json"
    rc, _ = run("transform", files["heat"], "--point", "t", "x + t", "1", "-o", str(target))
    assert rc == 0
    doc = json.loads(target.read_text())
    assert doc["X"] != "0"
    rc, text = run("heat", str(target), "--json")
    assert rc == 0 and json.loads(text)["heat"] == "Yes"


def test_transform_with_inverse_and_check(files):
    rc, text = run("transform", files["x4"], "--point", "t^2", "x", "1", "--inverse", "t^(1/2)", "x", "--check", "--json")
    assert rc == 0
    doc = json.loads(text)
    assert float(doc["check"]["max_residual"]) < 1e-30


@pytest.mark.parametrize(
    "argv",
    [["--gauge", "0"], ["--point", "t", "t", "1"], ["--point", "t^2", "x", "1"], ["--gauge", "exp("]],
)
def test_transform_rejects_bad_maps(files, argv):
    assert run("transform", files["heat"], *argv)[0] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "x4", "--json", "--seed", "3"],
        ["compare", "x4", "x4", "--json", "--samples", "8"],
        ["invariants", "x4", "--at", "1.25,1.75", "--json"],
    ],
)
def test_json_is_byte_identical(files, argv):
    argv = [files.get(a, a) for a in argv]
    assert run(*argv)[1] == run(*argv)[1]


def test_corpus_files_classify():
    for path in sorted(CORPUS.glob("*.json")):
        assert run("classify", str(path))[0] == 0


@pytest.mark.skipif(shutil.which("paraclass") is None, reason="console script not installed")
def test_console_script(files):
    proc = subprocess.run(["paraclass", "classify", files["x4"]], capture_output=True, text=True)
    assert proc.returncode == 0 and "subclass: P2" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "paraclass", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "paraclass" in proc.stdout
