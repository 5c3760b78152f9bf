"""Command-line front end.

    paraclass classify eq.json [--json]
    paraclass heat eq.json
    paraclass compare a.json b.json
    paraclass invariants eq.json --at 1,1 --at 1.5,2
    paraclass transform eq.json --gauge "exp(x)" -o out.json --check
    paraclass transform eq.json --point "2*t" "x+t" "1" -o out.json

Exit codes: 0 success, 1 bad input or inadmissible request, 2 window too
singular, 3 inconclusive, 4 not equivalent.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import mpmath

from . import __version__
from .classify import ClassificationReport, HeatAnswer, classify, heat_reducible
from .config import RunConfig
from .equivalence import EquivalenceState, compare_reports
from .errors import (
    AllPointsRejected,
    BudgetExhausted,
    DegenerateMap,
    DomainError,
    Inconclusive,
    ParaclassError,
    SigmaVanishes,
)
from .expr import parse
from .expr.evaluate import Point, evaluator
from .invariants import FrameEvaluator, fundamental, kappa, lam
from .io import equation_to_json, load_equation, save_equation
from .transform import GaugeMap, PointMap, gauge_transform, intertwining_residual, point_transform

EXIT_OK, EXIT_INPUT, EXIT_SINGULAR, EXIT_INCONCLUSIVE, EXIT_NOT_EQUIVALENT = 0, 1, 2, 3, 4


def _num(v) -> float:
    return float(v)


def _digits(v) -> str:
    return mpmath.nstr(v, 20)


def dump(payload: dict) -> str:
    """Canonical JSON: sorted keys, fixed separators, so equal runs give equal bytes."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


# ---------------------------------------------------------------------------
# commands


def _print_trail(report: ClassificationReport, out) -> None:
    for entry in report.trail:
        v = entry.verdict
        line = f"  {entry.predicate:<10} {v.state.value}"
        if v.witness is not None:
            line += f"  at (t, x) = ({_num(v.witness.t):.6g}, {_num(v.witness.x):.6g}), value {mpmath.nstr(v.value, 8)}"
        elif v.max_abs is not None:
            line += f"  max |value| {mpmath.nstr(v.max_abs, 3)} over {v.accepted} samples"
        if entry.note:
            line += f"  ({entry.note})"
        print(line, file=out)


def cmd_classify(args, config: RunConfig, out) -> int:
    eq = load_equation(args.file)
    try:
        report = classify(eq, config)
    except Inconclusive as exc:
        report = getattr(exc, "report", None)
        if args.json:
            payload = report.to_json() if report else {"config": config.to_json(), "subclass": None, "trail": []}
            payload["inconclusive"] = exc.predicate
            print(dump(payload), file=out)
        else:
            print(f"inconclusive: {exc}", file=out)
            if report:
                _print_trail(report, out)
        return EXIT_INCONCLUSIVE
    if args.json:
        print(dump(report.to_json()), file=out)
        return EXIT_OK
    print(f"subclass: {report.tag}", file=out)
    print("trail:", file=out)
    _print_trail(report, out)
    sub = report.subclass
    if sub.N is not None:
        print(f"N = {_digits(sub.N)}  (sample deviation {mpmath.nstr(sub.N_deviation, 3)})", file=out)
    if sub.N_tilde is not None:
        print(f"equivalent to u_xx = u_t + N~ x^-2 u with N~ = -4/(3 N^5) = {_digits(sub.N_tilde)}", file=out)
    return EXIT_OK


def cmd_heat(args, config: RunConfig, out) -> int:
    eq = load_equation(args.file)
    answer, verdict = heat_reducible(eq, config)
    if args.json:
        print(dump({"config": config.to_json(), "heat": answer.value, "lambda": verdict.to_json()}), file=out)
    else:
        print(f"reducible to u_xx = u_t: {answer.value}", file=out)
        if verdict.witness is not None:
            w = verdict.witness
            print(f"  lambda({_num(w.t):.6g}, {_num(w.x):.6g}) = {mpmath.nstr(verdict.value, 12)}", file=out)
    return {HeatAnswer.YES: EXIT_OK, HeatAnswer.NO: EXIT_NOT_EQUIVALENT}.get(answer, EXIT_INCONCLUSIVE)


def cmd_compare(args, config: RunConfig, out) -> int:
    eqA, eqB = load_equation(args.a), load_equation(args.b)
    reports = []
    for eq in (eqA, eqB):
        try:
            reports.append(classify(eq, config, diagnostics=False))
        except Inconclusive as exc:
            msg = f"{eq.label or 'equation'}: inconclusive ({exc})"
            if args.json:
                print(dump({"config": config.to_json(), "verdict": {"state": "Inconclusive", "detail": msg}}), file=out)
            else:
                print(msg, file=out)
            return EXIT_INCONCLUSIVE
    verdict = compare_reports(eqA, reports[0], eqB, reports[1], config)
    if args.json:
        payload = {"config": config.to_json(), "subclass": [r.tag for r in reports], "verdict": verdict.to_json()}
        print(dump(payload), file=out)
    else:
        print(f"verdict: {verdict.state.value}", file=out)
        print(f"  subclasses: {reports[0].tag} / {reports[1].tag}", file=out)
        if verdict.distances is not None:
            print(f"  directed distances: A->B {verdict.distances[0]:.3g}, B->A {verdict.distances[1]:.3g}", file=out)
            print(f"  thresholds: match {config.delta_match:g}, separate {config.delta_separate:g}", file=out)
        if "N_gap" in verdict.residuals:
            print(f"  |N_A - N_B| = {verdict.residuals['N_gap']:.3g}", file=out)
        if verdict.detail:
            print(f"  {verdict.detail}", file=out)
    return {
        EquivalenceState.EQUIVALENT: EXIT_OK,
        EquivalenceState.NOT_EQUIVALENT: EXIT_NOT_EQUIVALENT,
        EquivalenceState.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    }[verdict.state]


def _parse_point(text: str) -> tuple[float, float]:
    try:
        t, x = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected T,X but got {text!r}") from None
    return t, x


def cmd_invariants(args, config: RunConfig, out) -> int:
    eq = load_equation(args.file)
    for t, x in args.at:
        if not eq.window.contains(t, x):
            raise ValueError(f"point ({t}, {x}) lies outside the window")
    report: Optional[ClassificationReport] = None
    note = None
    try:
        report = classify(eq, config, diagnostics=False)
    except Inconclusive as exc:
        note = f"inconclusive classification ({exc}); frame invariants omitted"
    except AllPointsRejected as exc:
        note = f"classification impossible ({exc}); frame invariants omitted"
    base = evaluator((kappa(eq.T, eq.X, eq.U), lam(eq.T, eq.X, eq.U, config.strict), fundamental(eq.T, eq.X, eq.U, config.strict)), config.precision)
    frame_ev = None
    if report is not None and report.tag in ("P2", "P3", "P4"):
        frame_ev = FrameEvaluator(eq, report.frame, config.order, precision=config.precision, node_budget=config.node_budget, strict=config.strict)
    rows = []
    for t, x in args.at:
        p = Point.of(t, x, config.precision)
        row = {"t": t, "x": x, "status": "regular"}
        try:
            K, L, I = base(p)
            row.update(K=_num(K), lambda_=_num(L), I=_num(I))
        except DomainError:
            row["status"] = "singular"
            rows.append(row)
            continue
        if report is not None and report.tag != "P1":
            if abs(I) < config.eps_I:
                row["status"] = "singular"
            else:
                try:
                    if frame_ev is not None:
                        vals = frame_ev(p)
                        row["derived"] = {"%s_%d%d" % k: _num(v) for k, v in zip(frame_ev.keys, vals)}
                    if report.frame is not None:
                        names = [n for n in report.frame.invariants if n not in ("N",)]
                        ev = evaluator([report.frame.invariants[n] for n in names], config.precision)
                        row["frame"] = {n: _num(v) for n, v in zip(names, ev(p, report.params))}
                except (DomainError, ZeroDivisionError):
                    row["status"] = "singular"
                    row.pop("derived", None)
        rows.append(row)
    for row in rows:
        if "lambda_" in row:
            row["lambda"] = row.pop("lambda_")
    if args.json:
        payload = {"config": config.to_json(), "subclass": report.tag if report else None, "invariants": {"points": rows}}
        if note:
            payload["note"] = note
        print(dump(payload), file=out)
        return EXIT_OK
    print(f"subclass: {report.tag if report else 'unknown'}", file=out)
    if note:
        print(note, file=out)
    for row in rows:
        print(f"(t, x) = ({row['t']:g}, {row['x']:g})  {row['status']}", file=out)
        for key in ("K", "lambda", "I"):
            if key in row:
                print(f"  {key:<8} {row[key]:.15g}", file=out)
        for key, v in row.get("frame", {}).items():
            print(f"  {key:<8} {v:.15g}", file=out)
        for key, v in row.get("derived", {}).items():
            print(f"  {key:<8} {v:.15g}", file=out)
    return EXIT_OK


def cmd_transform(args, config: RunConfig, out) -> int:
    eq = load_equation(args.file)
    kw = config.zero_kw()
    if args.gauge is not None:
        m = GaugeMap(parse(args.gauge))
        eq2 = gauge_transform(eq, m, **kw)
    else:
        phi, psi, sigma = (parse(s) for s in args.point)
        inv = [parse(s) for s in args.inverse] if args.inverse else [None, None]
        m = PointMap(phi, psi, sigma, *inv)
        eq2 = point_transform(eq, m, **kw)
    payload = equation_to_json(eq2)
    if args.output:
        save_equation(eq2, args.output)
    check = None
    if args.check:
        check = intertwining_residual(eq, eq2, m, precision=config.precision, seed=config.seed)
    if args.json or not args.output:
        doc = {"config": config.to_json(), "equation": payload}
        if check is not None:
            doc["check"] = check.to_json()
        print(dump(doc), file=out)
    else:
        print(f"wrote {args.output}", file=out)
        for key in ("T", "X", "U"):
            print(f"  {key} = {payload[key]}", file=out)
        if check is not None:
            print(f"  pushforward residual {check.to_json()['max_residual']}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    p.add_argument("--precision", type=int, default=40, help="working precision in digits (default 40)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=int, default=2, help="order s of derived invariants (default 2)")
    p.add_argument("--samples", type=int, default=50, help="manifold samples per equation (default 50)")
    p.add_argument("--trials", type=int, default=24, help="zero-test sample points (default 24)")
    p.add_argument("--threshold", type=float, default=1e-20, help="zero-test threshold (default 1e-20)")
    p.add_argument("--allow-high-order", action="store_true", help="permit --order above 2")
    p.add_argument(
        "--strict-transcription",
        action="store_true",
        help="use the uncorrected formulas (see FORMULAS.md)",
    )


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 like every other input error (argparse uses 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="paraclass",
        description="Invariant classification of u_xx = T u_t + X u_x + U u.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="subclass P1..P5 with the predicate trail")
    p.add_argument("file")
    _common(p)
    p.set_defaults(run=cmd_classify)

    p = sub.add_parser("heat", help="is the equation equivalent to u_xx = u_t")
    p.add_argument("file")
    _common(p)
    p.set_defaults(run=cmd_heat)

    p = sub.add_parser("compare", help="local equivalence of two equations")
    p.add_argument("a")
    p.add_argument("b")
    _common(p)
    p.set_defaults(run=cmd_compare)

    p = sub.add_parser("invariants", help="tabulate invariants at points")
    p.add_argument("file")
    p.add_argument("--at", type=_parse_point, action="append", required=True, metavar="T,X")
    _common(p)
    p.set_defaults(run=cmd_invariants)

    p = sub.add_parser("transform", help="apply a gauge or point map")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gauge", metavar="SIGMA", help="u = sigma v")
    g.add_argument("--point", nargs=3, metavar=("PHI", "PSI", "SIGMA"), help="tau = phi(t), y = psi(t, x), u = sigma v")
    p.add_argument("--inverse", nargs=2, metavar=("T_OF", "X_OF"), help="inverse map in the new variables (written t, x)")
    p.add_argument("-o", "--output", help="write the transformed equation file here")
    p.add_argument("--check", action="store_true", help="verify the pushforward numerically")
    _common(p)
    p.set_defaults(run=cmd_transform)
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        precision=args.precision,
        seed=args.seed,
        order=args.order,
        samples=args.samples,
        trials=args.trials,
        threshold=args.threshold,
        strict=args.strict_transcription,
        allow_high_order=args.allow_high_order,
    )


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "transform" and args.inverse and args.gauge:
        parser.error("--inverse only applies to --point")
    try:
        config = config_from_args(args)
        return args.run(args, config, out)
    except (AllPointsRejected, BudgetExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except Inconclusive as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (SigmaVanishes, DegenerateMap) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParaclassError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
