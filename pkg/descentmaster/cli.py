from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from loguru import logger
from sympy.ntheory import isprime

from descentmaster.datastructures.models_and_schemas import OutputRecord
from descentmaster.solvers.curvemodels import (
    CurveModel,
    DescentException,
    InconsistencyException,
    LocalImageBudgetException,
    PrecisionException,
    RedeiUndefinedException,
    UnsupportedConfigurationException,
)
from descentmaster.solvers.descent import (
    local_image,
    root_number_by_congruence,
    root_number_imag_quad,
    selmer_Q,
    torsion_subgroup,
)
from descentmaster.solvers.quadfield import QuadField
from descentmaster.solvers.redei import RedeiTriple, redei_reciprocity_check, redei_symbol
from descentmaster.solvers.selmerquadratic import selmer_K
from descentmaster.solvers.squareclasses import Place, legendre, squarefree_part, unit_basis_change
from descentmaster.utils.classifier import classify_prime, density_survey, parity_expectation, twist_survey, verify_prime
from descentmaster.utils.configuration import settings, setup_logging
from descentmaster.utils.datapersistence import SurveyHeaderMismatchException, dumps, now

import colorama
from colorama import Fore, Style


EXIT_OK: int = 0
EXIT_UNSUPPORTED: int = 1
EXIT_USAGE: int = 2
EXIT_INCONSISTENT: int = 3

TABLE_PLACES: Tuple[Place, ...] = (Place(2), Place(3), Place(5), Place.real())


def _place(value: str) -> Place:
    if value.lower() in ("inf", "real", "0"):
        return Place.real()
    try:
        return Place.finite(int(value))
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"{value!r} is neither a prime nor 'inf'") from ex


def _int(value: str) -> int:
    try:
        return int(value)
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer") from ex


def _prime(value: str) -> int:
    n: int = _int(value)
    if not isprime(n):
        raise argparse.ArgumentTypeError(f"{n} is not prime")
    return n


def _positive(value: str) -> int:
    n: int = _int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"{n} must be positive")
    return n


def _twist(value: str) -> int:
    n: int = _int(value)
    if n == 0 or squarefree_part(n) != n:
        raise argparse.ArgumentTypeError(f"{n} is not a nonzero squarefree integer")
    return n


def _positive_twist(value: str) -> int:
    n: int = _twist(value)
    if n < 0:
        raise argparse.ArgumentTypeError(f"{n} must be positive")
    return n


def _field(value: str) -> int:
    n: int = _positive_twist(value)
    if n == 1:
        raise argparse.ArgumentTypeError("Q(sqrt 1) is not a quadratic field")
    return n


def cmd_classify(args: argparse.Namespace) -> Dict[str, Any]:
    if args.verify:
        return verify_prime(args.prime, effort=args.effort, q=args.q).dict()
    return classify_prime(args.prime).dict()


def cmd_selmer(args: argparse.Namespace) -> Dict[str, Any]:
    curve: CurveModel = CurveModel.x015(args.d)
    if args.field is None:
        selmer = selmer_Q(curve)
        return {
            "curve": str(curve),
            "dimension": selmer.dimension,
            "rank_bound": selmer.dimension - 2,
            "basis": [t.reprJSON() for t in selmer.basis],
            "labels": selmer.labels,
        }
    K: QuadField = QuadField(args.field)
    sk = selmer_K(curve, K)
    return {
        "curve": str(curve),
        "field": str(K),
        "dimension": sk.dimension,
        "basis": [t.reprJSON() for t in sk.basis],
        "labels": sk.labels,
        "s_primes": sk.s_primes,
        "good_ramified": sk.good_ramified,
    }


def cmd_redei(args: argparse.Namespace) -> Dict[str, Any]:
    triple: RedeiTriple = RedeiTriple.of(args.a, args.b, args.c)
    ret: Dict[str, Any] = {"triple": str(triple), "value": redei_symbol(triple, method=args.method)}
    if args.reciprocity:
        ret["reciprocity"] = redei_reciprocity_check(args.a, args.b, args.c).reprJSON()
        if not ret["reciprocity"]["agree"]:
            raise InconsistencyException(f"argument orders of {triple}", "one value", ret["reciprocity"]["values"])
    return ret


def _local_image_row(d_class: int, place: Place, nonresidue: Optional[int] = None) -> Dict[str, Any]:
    image = local_image(CurveModel.x015(d_class), place)
    ret: Dict[str, Any] = {
        "d_class": d_class,
        "place": str(place),
        "dimension": image.dimension,
        "basis": [list(t.reps()) for t in image.basis],
    }
    if nonresidue is not None:
        # exponents of (l, U) per slot
        change = unit_basis_change(place, nonresidue)
        ret["nonresidue"] = nonresidue
        ret["coordinates"] = [[list(change[rep]) for rep in t.reps()] for t in image.basis]
    return ret


def cmd_local_images(args: argparse.Namespace) -> Dict[str, Any]:
    return _local_image_row(args.d_class, args.place, args.nonresidue)


def cmd_tables(args: argparse.Namespace) -> Dict[str, Any]:
    return {str(place): [_local_image_row(rep, place) for rep in place.canonical_reps()] for place in TABLE_PLACES}


def _survey_paths(args: argparse.Namespace) -> Tuple[Optional[Path], bool]:
    if args.resume is not None:
        return args.resume, True
    return args.out, False


def cmd_survey(args: argparse.Namespace) -> Dict[str, Any]:
    out, resume = _survey_paths(args)
    if args.density:
        result = density_survey(args.bound, jobs=args.jobs, out=out, resume=resume, csv=args.csv)
    else:
        result = twist_survey(args.bound, effort=args.effort, jobs=args.jobs, out=out, resume=resume, csv=args.csv)
    return result.dict()


def cmd_root_number(args: argparse.Namespace) -> Dict[str, Any]:
    w: int = root_number_imag_quad(args.d)
    by_congruence: int = root_number_by_congruence(args.d)
    if w != by_congruence:
        raise InconsistencyException(f"root number over Q(sqrt -{args.d})", by_congruence, w)
    return {"d": args.d, "root_number": w}


def cmd_torsion(args: argparse.Namespace) -> Dict[str, Any]:
    curve: CurveModel = CurveModel.x015(args.d)
    torsion = torsion_subgroup(curve)
    return {
        "curve": str(curve),
        "structure": torsion.structure,
        "order": torsion.order,
        "generators": [str(pt) for pt in torsion.generators],
        "points_of_order_4": [str(pt) for pt in torsion.points_of_order(curve, 4)],
    }


def cmd_parity(args: argparse.Namespace) -> Dict[str, Any]:
    return {"d": args.d, "parity": parity_expectation(args.d), "conjectural": True}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descentmaster", description="2-descent on the quadratic twists of X0(15) over Q and real quadratic fields"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--json", action="store_true", help="deterministic json on stdout")
    parser.add_argument("--timing", action="store_true", help="include wall-clock timing in the output")
    parser.add_argument("--jobs", type=_positive, default=None, help=f"survey worker processes (default {settings.SURVEY_JOBS})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="rank 0 conditions for X0(15) over Q(sqrt -p)")
    p.add_argument("--prime", type=_prime, required=True)
    p.add_argument("--verify", action="store_true", help="recompute and cross-check every Selmer group")
    p.add_argument("--effort", type=_positive, default=None, help="point search height")
    p.add_argument("--q", type=_prime, default=None, help="auxiliary prime for p = 17, 113 mod 120")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="same as classify --verify")
    p.add_argument("--prime", type=_prime, required=True)
    p.add_argument("--effort", type=_positive, default=None)
    p.add_argument("--q", type=_prime, default=None)
    p.set_defaults(func=cmd_classify, verify=True)

    p = sub.add_parser("selmer", help="2-Selmer group of E_d over Q or over Q(sqrt m)")
    p.add_argument("--d", type=_twist, required=True)
    p.add_argument("--field", type=_field, default=None, help="m of the real quadratic field Q(sqrt m)")
    p.set_defaults(func=cmd_selmer)

    p = sub.add_parser("redei", help="Redei symbol [a,b,c]")
    p.add_argument("a", type=int)
    p.add_argument("b", type=int)
    p.add_argument("c", type=int)
    p.add_argument("--method", choices=("auto", "governed", "general"), default="auto")
    p.add_argument("--reciprocity", action="store_true", help="evaluate every argument order")
    p.set_defaults(func=cmd_redei)

    p = sub.add_parser("local-images", help="image of the local Kummer map")
    p.add_argument("--d-class", type=_twist, required=True)
    p.add_argument("--place", type=_place, required=True, help="a prime or 'inf'")
    p.add_argument(
        "--nonresidue", type=int, default=None, metavar="U", help="also give coordinates over <l, U> at an odd prime l"
    )
    p.set_defaults(func=cmd_local_images)

    p = sub.add_parser("tables", help="local images at 2, 3, 5 and the real place for every twist class")
    p.add_argument("--color", action="store_true")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("survey", help="density or twist survey, resumable")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--density", action="store_true")
    kind.add_argument("--twists", action="store_true")
    p.add_argument("--bound", type=_positive, required=True)
    p.add_argument("--effort", type=_positive, default=None)
    p.add_argument("--out", type=Path, default=None, help="record file (default under DESCENT_CACHE_DIR)")
    p.add_argument("--resume", type=Path, default=None, metavar="PATH", help="continue the record file at PATH")
    p.add_argument("--csv", type=Path, default=None)
    p.set_defaults(func=cmd_survey)

    for name, func, twist in (
        ("root-number", cmd_root_number, _positive_twist),
        ("torsion", cmd_torsion, _twist),
        ("parity", cmd_parity, _positive_twist),
    ):
        p = sub.add_parser(name)
        p.add_argument("--d", type=twist, required=True)
        p.set_defaults(func=func)
    return parser


def _check_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """constraints argparse types cannot express"""
    if args.command == "survey":
        minimum: int = 100 if args.density else 15
        if args.bound < minimum:
            parser.error(f"survey --bound must be at least {minimum}")
    if args.command == "local-images" and args.nonresidue is not None:
        place: Place = args.place
        if place.is_real or place.prime == 2:
            parser.error(f"--nonresidue needs an odd prime place, not {place}")
        if legendre(args.nonresidue, place.prime) != -1:
            parser.error(f"{args.nonresidue} is not a nonresidue mod {place.prime}")


def _render(value: Any, indent: int = 0) -> List[str]:
    pad: str = "  " * indent
    lines: List[str] = []
    if isinstance(value, dict):
        for key in sorted(value, key=str):
            item = value[key]
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}{key}:")
                lines.extend(_render(item, indent + 1))
            else:
                lines.append(f"{pad}{key}: {dumps(item)}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, dict):
                lines.append(f"{pad}-")
                lines.extend(_render(item, indent + 1))
            else:
                lines.append(f"{pad}- {dumps(item)}")
    else:
        lines.append(f"{pad}{dumps(value)}")
    return lines


def _render_tables(results: Dict[str, Any], color: bool) -> List[str]:
    head: Callable[[str], str] = (lambda s: f"{Style.BRIGHT}{Fore.CYAN}{s}{Style.RESET_ALL}") if color else (lambda s: s)
    lines: List[str] = []
    for place in sorted(results, key=lambda k: (k == "inf", k.zfill(4))):
        lines.append(head(f"place {place}"))
        for row in results[place]:
            basis: str = ", ".join("({}, {}, {})".format(*t) for t in row["basis"])
            lines.append(f"  d = {row['d_class']:>3}: <{basis}>")
    return lines


def run(argv: Optional[List[str]] = None, out: Any = None) -> int:
    stdout = out or sys.stdout
    parser: argparse.ArgumentParser = build_parser()
    args: argparse.Namespace = parser.parse_args(argv)
    _check_args(parser, args)
    if args.verbose:
        setup_logging("DEBUG")
    color: bool = bool(getattr(args, "color", False)) and not args.json
    if color:
        colorama.init()

    inputs: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "json", "timing", "color")}
    started: float = time.monotonic()
    try:
        results: Dict[str, Any] = args.func(args)
    except (UnsupportedConfigurationException, RedeiUndefinedException, LocalImageBudgetException, PrecisionException) as ex:
        logger.error(f"{args.command}: {ex}")
        print(dumps({"error": type(ex).__name__, "message": str(ex)}), file=stdout)
        return EXIT_UNSUPPORTED
    except SurveyHeaderMismatchException as ex:
        print(f"{parser.prog} {args.command}: error: {ex}", file=sys.stderr)
        return EXIT_USAGE
    except (DescentException, ValueError) as ex:
        logger.exception(f"{args.command} failed", exception=ex)
        print(dumps({"error": type(ex).__name__, "message": str(ex)}), file=stdout)
        return EXIT_INCONSISTENT

    record: OutputRecord = OutputRecord(
        command=args.command,
        inputs=inputs,
        results=results,
        timing={"seconds": round(time.monotonic() - started, 3)} if args.timing else {},
        created_at=now() if args.timing else None,
    )
    if args.json:
        print(dumps(record, indent=2), file=stdout)
    elif args.command == "tables":
        print("\n".join(_render_tables(results, color)), file=stdout)
    else:
        print("\n".join(_render(dumps_ready(record))), file=stdout)
    return EXIT_OK


def dumps_ready(record: OutputRecord) -> Dict[str, Any]:
    """the json view of the record, so both output modes carry the same values"""
    return json.loads(dumps(record))


def main() -> None:
    sys.exit(run())
