"""
Command-line entry point for angleset.

    python main.py construct -d 16 -c 0.3 --out points.json
    python main.py verify points.json --alpha pi/3+0.3 --strict
    python main.py bounds --d 50,100,200 --c 0.2 --aux
    python main.py oracle cube:3 --alpha 70deg --strict --method both
    python main.py history --limit 10

Results go to stdout (JSON, or CSV for ``bounds``); logs go to stderr.
Exit codes: 0 success/pass, 1 verification failure, 2 usage or invalid
input, 3 budget refusal.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from models.database import session_factory
from models.errors import BudgetExceededError, CertificationError, InvalidInputError
from models.schemas import (
    AngleMode,
    EnumerationOrder,
    EuclideanPointSet,
    LatticePointSet,
    PointSetMeta,
    SearchMethod,
    Verdict,
    to_fraction,
)
from services import bounds, ledger
from services.construct import construct_point_set
from services.formats import read_point_set, write_csv, write_point_set, write_text_atomic
from services.oracle import brute_force_max_subset, candidate_set
from services.verify import check_min_max_ratio, distance_stats, max_angle, parse_alpha

logger = logging.getLogger("angleset")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3

Outcome = Tuple[int, Dict[str, Any]]

_DECIMAL = re.compile(r"^\d*\.?\d+$|^\d+\.$")


def _decimal(text: str) -> str:
    if not _DECIMAL.match(text.strip()):
        raise argparse.ArgumentTypeError(f"expected a plain decimal such as 0.3, got {text!r}")
    return text.strip()


def _decimal_list(text: str) -> List[str]:
    return [_decimal(part) for part in text.split(",") if part.strip()]


def _int_range(text: str) -> List[int]:
    """``50,100,200``, ``10-40`` or ``10:40:5`` (inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (int(x) for x in text.split(":"))
            return list(range(start, stop + 1, step))
        if "-" in text:
            start, stop = (int(x) for x in text.split("-"))
            return list(range(start, stop + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from exc


def _mode(args: argparse.Namespace) -> AngleMode:
    return AngleMode.WEAK if args.weak else AngleMode.STRICT


def _json(model: Any) -> Any:
    return model.model_dump(mode="json")


# -------------------------
# Commands
# -------------------------


def _certify(points, c: str) -> Dict[str, Any]:
    threshold = parse_alpha(f"pi/3+{c}")
    certificate = max_angle(points, threshold, AngleMode.STRICT)
    out: Dict[str, Any] = {"certificate": _json(certificate)}
    if to_fraction(c) < bounds.SINE_RATIO_DOMAIN:
        out["ratio_check"] = _json(check_min_max_ratio(points, c))
    return out


def cmd_construct(args: argparse.Namespace) -> Outcome:
    result = construct_point_set(
        args.d,
        args.c,
        k=args.k,
        order=args.order,
        seed=args.seed,
        budget=args.budget,
        delta=args.delta,
        full_scan=args.full_scan,
        allow_partial=args.allow_partial,
    )
    graph, report = result.hypergraph, result.report
    reals = _json(report)
    summary: Dict[str, Any] = {
        "d": report.d,
        "k": report.k,
        "c": args.c,
        "threshold": report.threshold,
        "edges": len(graph),
        "A_ceil": report.A_ceil,
        "A_per_dim_root": reals["A_per_dim_root"],
        "lower_envelope": reals["lower_envelope"],
        "upper_envelope": reals["upper_envelope"],
        "complete": graph.complete,
        "candidates_scanned": graph.candidates_scanned,
    }
    out = Path(args.out or f"points_d{report.d}_c{args.c}.json")
    meta = PointSetMeta(k=report.k, c=args.c, order=EnumerationOrder(args.order).value, seed=args.seed)
    write_point_set(out, result.points, meta)
    summary["out"] = str(out)
    if args.report:
        write_text_atomic(args.report, report.model_dump_json(indent=2) + "\n")
        summary["report"] = str(args.report)

    code = EXIT_OK
    if args.certify and len(result.points) >= 3:
        summary.update(_certify(result.points, args.c))
        verdicts = [summary["certificate"]["verdict"], summary.get("ratio_check", {}).get("verdict", "pass")]
        code = EXIT_OK if all(v == Verdict.PASS.value for v in verdicts) else EXIT_FAILED
    return code, summary


def cmd_verify(args: argparse.Namespace) -> Outcome:
    points, _ = read_point_set(args.points)
    threshold = parse_alpha(args.alpha)
    certificate = max_angle(points, threshold, _mode(args))
    summary: Dict[str, Any] = {
        "points": str(args.points),
        "certificate": _json(certificate),
        "distances": _json(distance_stats(points)),
    }
    passed = certificate.verdict == Verdict.PASS
    c = args.c if args.c is not None else threshold.c
    if c is not None and 0 < to_fraction(c) < bounds.SINE_RATIO_DOMAIN:
        check = check_min_max_ratio(points, c)
        summary["ratio_check"] = _json(check)
        passed = passed and check.verdict == Verdict.PASS
    return (EXIT_OK if passed else EXIT_FAILED), summary


BOUNDS_COLUMNS = [
    "d", "c", "k", "threshold", "A_floor", "A_ceil", "A_root", "lower_envelope", "upper_envelope",
]
AUX_COLUMNS = [
    "jung_radius", "cap_half_angle", "rankin", "cap_count_statement", "cap_count_proof", "ef_lower", "ef_upper",
]


def cmd_bounds(args: argparse.Namespace) -> Outcome:
    rows = []
    for c in args.c:
        for d in args.d:
            report = bounds.bound_report(d, c, k=args.k, delta=args.delta, full_scan=args.full_scan)
            row: List[Any] = [
                d, c, report.k, report.threshold, math.floor(report.A_exact), report.A_ceil,
                report.A_per_dim_root, report.lower_envelope, report.upper_envelope,
            ]
            if args.aux:
                cap = report.cap_count
                ef_lower, ef_upper = bounds.erdos_furedi_envelopes(d, c, report.precision)
                row += [
                    report.jung_radius, report.cap_half_angle, report.rankin,
                    cap.statement_form if cap else None, cap.proof_form if cap else None,
                    ef_lower, ef_upper,
                ]
            rows.append(row)
    columns = BOUNDS_COLUMNS + (AUX_COLUMNS if args.aux else [])
    comment = f"angleset bounds, delta={args.delta}; " + ", ".join(columns)
    write_csv(args.out or sys.stdout, columns, rows, comment)
    return EXIT_OK, {"rows": len(rows), "out": str(args.out) if args.out else "-"}


def cmd_oracle(args: argparse.Namespace) -> Outcome:
    if Path(args.candidates).is_file():
        candidates, _ = read_point_set(args.candidates)
    else:
        candidates = candidate_set(args.candidates)
    result = brute_force_max_subset(candidates, args.alpha, _mode(args), SearchMethod(args.method))
    summary = {"candidates": args.candidates, "alpha": args.alpha, **_json(result)}
    if args.out:
        chosen = [candidates.points[i] for i in result.indices]
        if isinstance(candidates, LatticePointSet):
            subset = LatticePointSet(d=candidates.d, points=chosen)
        else:
            subset = EuclideanPointSet(d=candidates.d, points=chosen, precision=candidates.precision)
        write_point_set(args.out, subset)
        summary["out"] = str(args.out)
    return EXIT_OK, summary


def cmd_history(args: argparse.Namespace) -> Outcome:
    with session_factory(args.database)() as db:
        runs = ledger.list_runs(db, command=args.filter_command, limit=args.limit)
        for run in runs:
            print(json.dumps(ledger.to_dict(run), sort_keys=True))
    return EXIT_OK, {}


# -------------------------
# Parser
# -------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", type=int, help="Working precision in bits (ANGLESET_PRECISION_BITS)")
    common.add_argument("--threads", type=int, help="Worker processes for the triple scan (ANGLESET_THREADS)")
    common.add_argument("--record", action="store_true", help="Append this run to the run ledger")
    common.add_argument("--database", help="Run-ledger database URL (ANGLESET_DATABASE_URL)")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--verbose", "-v", action="store_true")
    noise.add_argument("--quiet", "-q", action="store_true")

    parser = argparse.ArgumentParser(prog="angleset", description="Point sets with all angles below pi/3 + c.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="Greedy hypergraph construction and embedding")
    p.add_argument("-d", type=int, required=True, help="Dimension")
    p.add_argument("-c", type=_decimal, required=True, help="Angle slack c in (0,1), as a decimal")
    p.add_argument("-k", type=int, help="Edge size (default: chosen by maximising A(d,k,c))")
    p.add_argument("--order", choices=[o.value for o in EnumerationOrder], default=EnumerationOrder.COLEX.value)
    p.add_argument("--seed", type=int, help="Seed for --order random")
    p.add_argument("--budget", type=int, help="Candidate budget (ANGLESET_ENUMERATION_BUDGET)")
    p.add_argument("--allow-partial", action="store_true", help="Accept a scan cut short by the budget")
    p.add_argument("--full-scan", action="store_true", help="Choose k over all 1..d instead of a window")
    p.add_argument("--delta", type=_decimal, default="0", help="Slack subtracted from the lower-bound rate")
    p.add_argument("--out", help="Point-set file to write")
    p.add_argument("--report", help="Also write the bound report as JSON")
    p.add_argument("--certify", action="store_true", help="Verify the result at pi/3 + c right away")
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("verify", parents=[common], help="Certify the angles of a point-set file")
    p.add_argument("points", help="Point-set file")
    p.add_argument("--alpha", required=True, help="pi/3+<decimal>, <decimal>rad, <decimal>deg or p*pi/q")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true", help="Angles must be < alpha (default)")
    mode.add_argument("--weak", action="store_true", help="Angles must be <= alpha")
    p.add_argument("-c", type=_decimal, help="Slack for the min/max distance check (default: from alpha)")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("bounds", parents=[common], help="Bound table as CSV")
    p.add_argument("--d", type=_int_range, required=True, help="Dimensions: 50,100,200 or 10-40 or 10:100:10")
    p.add_argument("--c", type=_decimal_list, required=True, help="Comma-separated slacks")
    p.add_argument("-k", type=int, help="Fix k instead of choosing it")
    p.add_argument("--delta", type=_decimal, default="0")
    p.add_argument("--aux", action="store_true", help="Add Jung, cap, Rankin and Erdos-Furedi columns")
    p.add_argument("--full-scan", action="store_true")
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("oracle", parents=[common], help="Largest valid subset of a small candidate set")
    p.add_argument("candidates", help="Point-set file, cube:d, simplex:d or weight:k:d")
    p.add_argument("--alpha", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true")
    mode.add_argument("--weak", action="store_true")
    p.add_argument("--method", choices=[m.value for m in SearchMethod], default=SearchMethod.BNB.value)
    p.add_argument("--out", help="Write the subset as a point-set file")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("history", parents=[common], help="List recorded runs as JSON lines")
    p.add_argument("--command", dest="filter_command", help="Only runs of this command")
    p.add_argument("--limit", type=int)
    p.set_defaults(handler=cmd_history)
    return parser


def _configure(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )
    if args.precision is not None:
        os.environ["ANGLESET_PRECISION_BITS"] = str(args.precision)
    if args.threads is not None:
        os.environ["ANGLESET_THREADS"] = str(args.threads)
    if args.database is not None:
        os.environ["ANGLESET_DATABASE_URL"] = args.database


def _record(args: argparse.Namespace, code: int, summary: Dict[str, Any]) -> None:
    skip = {"handler", "record", "verbose", "quiet", "database"}
    parameters = {key: value for key, value in vars(args).items() if key not in skip}
    outcome = {EXIT_OK: "ok", EXIT_FAILED: "failed", EXIT_USAGE: "invalid", EXIT_BUDGET: "budget"}[code]
    with session_factory(args.database)() as db:
        ledger.record_run(db, args.command, parameters, outcome, summary)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure(args)

    handler: Callable[[argparse.Namespace], Outcome] = args.handler
    try:
        code, summary = handler(args)
    except (InvalidInputError, ValidationError) as exc:
        logger.error("%s", exc)
        code, summary = EXIT_USAGE, {"error": str(exc)}
    except BudgetExceededError as exc:
        logger.error("budget refused: %s", exc)
        code, summary = EXIT_BUDGET, {"error": str(exc)}
    except CertificationError as exc:
        logger.error("certification failed: %s", exc)
        code, summary = EXIT_FAILED, {"error": str(exc)}
    else:
        if summary and args.command != "bounds":
            print(json.dumps(summary, indent=2, sort_keys=True))

    if args.record and args.command != "history":
        _record(args, code, summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
