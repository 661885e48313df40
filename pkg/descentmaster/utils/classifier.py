from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from threading import Semaphore
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from loguru import logger
from ratelimit import RateLimitException, limits
from sympy import divisors, primerange
from sympy.ntheory import isprime

from descentmaster.datastructures.models_and_schemas import (
    ClassificationReport,
    Condition,
    CrossCheck,
    ParityExpectation,
    RankConclusion,
    Regime,
    Sha4Structure,
    ShaClaim,
    SurveyHeader,
    SurveyKind,
    SurveyRecord,
    SurveyResult,
    VerificationReport,
)
from descentmaster.solvers.curvemodels import (
    CurveModel,
    CurvePoint,
    InconsistencyException,
    KummerTriple,
    UnsupportedConfigurationException,
)
from descentmaster.solvers.descent import (
    rank_lower_bound,
    root_number_imag_quad,
    selmer_contains,
    selmer_Q,
    search_witnesses,
    torsion_subgroup,
)
from descentmaster.solvers.redei import RedeiTriple, redei_symbol
from descentmaster.solvers.selmerquadratic import (
    _auxiliary_q,
    corestriction_surjectivity_check,
    generator_case_table,
    rank_twist_relation,
    regime_of,
    regime_setup,
    selmer_K,
)
from descentmaster.solvers.squareclasses import squarefree_part
from descentmaster.utils.configuration import settings
from descentmaster.utils.datapersistence import SurveyRecordFile, export_csv


CONGRUENCE_CLASSES_MOD_15: Tuple[int, ...] = (0, 1, 2, 3, 4, 5, 8, 12)
REGIME_CLASSES_MOD_15: Tuple[int, ...] = (1, 2, 4, 8)

DENSITY_LIMITS: Dict[str, float] = {
    "i": 3 / 8,
    "ii": 1 / 32,
    "iii": 1 / 32,
    "combined": 7 / 16,
    "relative": 7 / 8,
}

# positive-rank count among the 3158 twists up to 10^4, from a full rank computation
REFERENCE_POSITIVE_RANK_AT_10K: int = 514

# bounds the number of chunks handed to the pool but not yet folded
survey_chunks_max_in_queue: int = 8


@limits(calls=2, period=1.0)
def _progresslog_limit(*args) -> None:  # type: ignore
    logger.info(*args)


def progresslog_limit(*args) -> None:  # type: ignore
    try:
        _progresslog_limit(*args)
    except RateLimitException:
        pass


def parity_expectation(d: int) -> ParityExpectation:
    """conjectural parity of rank(X0(15) / Q(sqrt -d)) from the root number"""
    if d < 1 or squarefree_part(d) != d:
        raise ValueError(f"{d=} must be a positive squarefree integer")
    return ParityExpectation.EVEN if root_number_imag_quad(d) == 1 else ParityExpectation.ODD


def congruences(n: int) -> Dict[str, int]:
    return {"mod8": n % 8, "mod15": n % 15, "mod40": n % 40, "mod120": n % 120}


def _governing_triple(p: int, regime: Regime) -> Optional[RedeiTriple]:
    if regime == Regime.P_1_49_MOD_120:
        return RedeiTriple(-1, 10, p)
    if regime == Regime.P_17_113_MOD_120:
        return RedeiTriple(-1, 2, p)
    return None


def _condition(regime: Regime, redei_values: Dict[str, int]) -> Condition:
    if regime == Regime.NOT_1_MOD_8:
        return Condition.I
    if regime == Regime.P_1_49_MOD_120 and list(redei_values.values()) == [-1]:
        return Condition.II
    if regime == Regime.P_17_113_MOD_120 and list(redei_values.values()) == [1]:
        return Condition.III
    return Condition.NONE


def sha_claims(report: ClassificationReport) -> List[ShaClaim]:
    """4-descent statements on Sha(E_-p / Q), each with the hypotheses it rests on"""
    sha: str = f"Sha(E_-{report.p}/Q)"
    if report.condition == Condition.I:
        return [ShaClaim(statement=f"{sha}[2] = 0", structure=Sha4Structure.NOT_APPLICABLE, computed=True)]
    if report.condition in (Condition.II, Condition.III):
        return [
            ShaClaim(statement=f"{sha}[2] = (Z/2)^2", structure=Sha4Structure.Z2_SQUARED, computed=True),
            ShaClaim(statement=f"{sha}[4] = (Z/2)^2", structure=Sha4Structure.Z2_SQUARED, computed=True),
        ]
    if report.regime in (Regime.P_1_49_MOD_120, Regime.P_17_113_MOD_120):
        return [
            ShaClaim(
                statement=f"multiplication by 2: {sha}[4] -> {sha}[2] is surjective",
                structure=Sha4Structure.UNDETERMINED,
                computed=True,
            ),
            ShaClaim(
                statement=f"{sha}[4] = (Z/4)^2",
                structure=Sha4Structure.Z4_SQUARED,
                hypotheses=[f"rank(E_-{report.p}/Q) = 0", "not decidable by 2-descent over the regime field"],
                computed=False,
            ),
        ]
    return []


def classify_prime(p: int) -> ClassificationReport:
    if not isprime(p):
        raise ValueError(f"{p=} is not prime")
    regime: Regime = regime_of(p)
    redei_values: Dict[str, int] = {}
    triple: Optional[RedeiTriple] = _governing_triple(p, regime)
    if triple is not None:
        redei_values[str(triple)] = redei_symbol(triple)
    condition: Condition = _condition(regime, redei_values)

    rank_upper_bound: Optional[int] = None
    sha2_dim_given_rank: Dict[int, int] = {}
    sha4: Sha4Structure = Sha4Structure.NOT_APPLICABLE
    evidence: Dict[str, object] = {"regime_field": None}
    if condition == Condition.I:
        rank_upper_bound, sha2_dim_given_rank = 0, {0: 0}
        evidence["selmer_q_dimension"] = 2
    elif condition in (Condition.II, Condition.III):
        rank_upper_bound, sha2_dim_given_rank = 0, {0: 2}
        sha4 = Sha4Structure.Z2_SQUARED
        evidence["selmer_q_dimension"] = 4
    elif regime != Regime.OUTSIDE:
        rank_upper_bound, sha2_dim_given_rank = 2, {0: 2, 2: 0}
        sha4 = Sha4Structure.UNDETERMINED
        evidence["selmer_q_dimension"] = 4
    else:
        evidence["expectation"] = "odd root number: positive rank expected, not decided here"

    if regime == Regime.P_1_49_MOD_120:
        evidence["regime_field"] = f"Q(sqrt {p})"
    elif regime == Regime.P_17_113_MOD_120:
        evidence["regime_field"] = f"Q(sqrt {p}*q)"

    report: ClassificationReport = ClassificationReport(
        p=p,
        p_mod_8=p % 8,
        p_mod_15=p % 15,
        p_mod_40=p % 40,
        p_mod_120=p % 120,
        regime=regime,
        condition=condition,
        redei_values=redei_values,
        rank_conclusion=RankConclusion.ZERO if condition != Condition.NONE else RankConclusion.UNDETERMINED,
        rank_upper_bound=rank_upper_bound,
        sha2_dim_given_rank=sha2_dim_given_rank,
        sha4_structure=sha4,
        parity=parity_expectation(p),
        evidence=evidence,
    )
    report.sha_claims = sha_claims(report)
    logger.debug(f"{p=} {regime=} {condition=} {redei_values=}")
    return report


def _expected_selmer_q_dimension(regime: Regime) -> Optional[int]:
    if regime == Regime.NOT_1_MOD_8:
        return 2
    if regime in (Regime.P_1_49_MOD_120, Regime.P_17_113_MOD_120):
        return 4
    return None


def verify_prime(p: int, effort: Optional[int] = None, q: Optional[int] = None, strict: bool = True) -> VerificationReport:
    """recomputes the Selmer groups behind classify_prime and cross-checks them against each other and against points"""
    report: ClassificationReport = classify_prime(p)
    checks: List[CrossCheck] = []

    def check(name: str, expected: object, actual: object) -> None:
        checks.append(CrossCheck(name=name, expected=expected, actual=actual, ok=expected == actual))

    curve: CurveModel = CurveModel.x015(-p)
    selmer = selmer_Q(curve)
    expected_dim: Optional[int] = _expected_selmer_q_dimension(report.regime)
    if expected_dim is not None:
        check("dim S^2(E_-p/Q)", expected_dim, selmer.dimension)
    check("torsion images in S^2(E_-p/Q)", 2, selmer.labels.count("torsion"))
    if p % 8 == 1:
        check("(-1,-1,1) in S^2(E_-p/Q)", True, selmer_contains(selmer, KummerTriple.of(-1, -1, 1), curve))
        if p % 15 in (1, 4):
            check("(15,6,10) in S^2(E_-p/Q)", True, selmer_contains(selmer, KummerTriple.of(15, 6, 10), curve))

    torsion = torsion_subgroup(curve)
    witnesses: List[CurvePoint] = search_witnesses(curve, effort, torsion)
    lower: int = rank_lower_bound(curve, witnesses, torsion)
    upper: int = selmer.dimension - 2
    check("rank lower bound <= Selmer bound", True, lower <= upper)
    if report.rank_conclusion == RankConclusion.ZERO:
        check("rank lower bound under a rank 0 conclusion", 0, lower)
    evidence: Dict[str, object] = dict(report.evidence)
    if lower == upper:
        evidence["sha2_dimension"] = 0
        evidence["rank"] = lower

    selmer_k_dimension: Optional[int] = None
    field_m: Optional[int] = None
    corestriction_ok: Optional[bool] = None
    corestriction_vacuous: Optional[bool] = None
    if report.regime in (Regime.P_1_49_MOD_120, Regime.P_17_113_MOD_120):
        if report.regime == Regime.P_17_113_MOD_120:
            q = q or _auxiliary_q(p)
        curve_k, K, _ = regime_setup(p, q)
        sk = selmer_K(curve_k, K)
        selmer_k_dimension, field_m = sk.dimension, K.m
        evidence["regime_field"] = f"Q(sqrt {K.m})"
        symbol: int = list(report.redei_values.values())[0]
        if report.regime == Regime.P_1_49_MOD_120:
            check("dim S^2(E_-1/Q(sqrt p)) from [-1,10,p]", 4 if symbol == 1 else 2, sk.dimension)
            case = generator_case_table(p, sk)
            evidence["case_table"] = {
                "class_at_2": case.class_at_2,
                "class_at_5": case.class_at_5,
                "place_2": case.place_2,
                "extra": [t.reprJSON() for t in case.extra],
            }
            try:
                product: int = redei_symbol(RedeiTriple(p, -1, 2), method="general") * redei_symbol(
                    RedeiTriple(p, -1, 5), method="general"
                )
                check("[p,-1,2][p,-1,5] = [-1,10,p]", symbol, product)
            except UnsupportedConfigurationException as ex:
                logger.warning(f"norm-path Redei symbols unavailable for {p=}: {ex}")
        else:
            assert q is not None
            symbol_q: int = redei_symbol(RedeiTriple(-1, 2, q))
            evidence["redei_q"] = {str(RedeiTriple(-1, 2, q)): symbol_q}
            check("dim S^2(E_-q/Q(sqrt pq)) from [-1,2,p][-1,2,q]", 6 if symbol * symbol_q == 1 else 4, sk.dimension)

        cert = corestriction_surjectivity_check(sk, selmer, curve)
        corestriction_ok, corestriction_vacuous = cert.ok, cert.vacuous
        evidence["corestriction"] = cert.reprJSON()
        large: int = 4 if report.regime == Regime.P_1_49_MOD_120 else 6
        # Sha[2] over K and over Q only have the same size when the Selmer group over K is the large one
        if report.condition == Condition.NONE and sk.dimension == large:
            check("corestriction surjective onto S^2(E_-p/Q)", True, cert.ok)
        accounting = rank_twist_relation(curve_k.d, K.m, effort, selmer=sk)
        evidence["rank_twist_relation"] = accounting.reprJSON()
        check("rank accounting over the regime field", True, accounting.consistent)

    verified: VerificationReport = VerificationReport(
        **report.dict(exclude={"evidence"}),
        evidence=evidence,
        selmer_q_dimension=selmer.dimension,
        selmer_k_dimension=selmer_k_dimension,
        field_m=field_m,
        rank_lower_bound=lower,
        corestriction_ok=corestriction_ok,
        corestriction_vacuous=corestriction_vacuous,
        witnesses=[[str(pt.x), str(pt.y)] for pt in witnesses],
        checks=checks,
    )
    if strict:
        for c in checks:
            if not c.ok:
                raise InconsistencyException(c.name, c.expected, c.actual)
    return verified


def small_cofactor_twist_bounds(p: int) -> Dict[int, int]:
    """selmer_rank_bound(E_-dp) for the divisors d of 30 with dp in the even-parity classes mod 15"""
    if not isprime(p):
        raise ValueError(f"{p=} is not prime")
    ret: Dict[int, int] = {}
    for d in divisors(30):
        n: int = int(squarefree_part(d * p))
        if n % 15 not in CONGRUENCE_CLASSES_MOD_15:
            continue
        ret[d] = selmer_Q(CurveModel.x015(-n)).dimension - 2
    logger.debug(f"{p=} {ret=}")
    return ret


# -------------------------------------------------------------------------------------------------
# surveys


def density_record(p: int) -> SurveyRecord:
    regime: Regime = regime_of(p)
    redei_values: Dict[str, int] = {}
    triple: Optional[RedeiTriple] = _governing_triple(p, regime)
    if triple is not None:
        redei_values[str(triple)] = redei_symbol(triple)
    return SurveyRecord(input=p, congruences=congruences(p), condition=_condition(regime, redei_values).value, redei_values=redei_values)


def twist_inputs(bound: int) -> Iterator[int]:
    """positive squarefree d <= bound with d = 0,1,2,3,4,5,8,12 mod 15"""
    for d in range(1, bound + 1):
        if d % 15 in CONGRUENCE_CLASSES_MOD_15 and squarefree_part(d) == d:
            yield d


def twist_record(d: int, effort: Optional[int] = None) -> SurveyRecord:
    curve: CurveModel = CurveModel.x015(-d)
    upper: int = selmer_Q(curve).dimension - 2
    lower: int = rank_lower_bound(curve, search_witnesses(curve, effort))
    if lower > upper:
        raise InconsistencyException(f"rank bounds of E_-{d}", f"<= {upper}", lower)
    return SurveyRecord(input=d, congruences=congruences(d), selmer_dim=upper + 2, rank_lb=lower, rank_ub=upper)


def _density_chunk(ps: Sequence[int]) -> List[SurveyRecord]:
    return [density_record(p) for p in ps]


def _twist_chunk(args: Tuple[Sequence[int], Optional[int]]) -> List[SurveyRecord]:
    ds, effort = args
    return [twist_record(d, effort) for d in ds]


def _chunks(values: Sequence[int], size: int) -> Iterator[List[int]]:
    for i in range(0, len(values), size):
        yield list(values[i : i + size])


def _run_pool(
    work: Callable, payloads: Iterable, jobs: int, sink: Callable[[List[SurveyRecord]], None]
) -> None:
    """folds worker results into sink in submission order"""
    if jobs <= 1:
        for payload in payloads:
            sink(work(payload))
        return
    semaphore: Semaphore = Semaphore(survey_chunks_max_in_queue)
    pending: List = []
    with ProcessPoolExecutor(jobs) as executor:
        logger.debug(f"ProcessPoolExecutor with max. {jobs} processes")
        for payload in payloads:
            semaphore.acquire()
            future = executor.submit(work, payload)
            future.add_done_callback(lambda _: semaphore.release())
            pending.append(future)
            while pending and pending[0].done():
                sink(pending.pop(0).result())
        for future in pending:
            try:
                sink(future.result())
            except Exception as ex:
                logger.exception("survey worker failed", exception=ex)
                raise


def _record_path(kind: SurveyKind, bound: int, out: Optional[Path]) -> Optional[Path]:
    if out is not None:
        return out
    directory: Optional[Path] = settings.cache_dir()
    if directory is None:
        return None
    return Path(directory, f"survey_{kind.value.lower()}_{bound}.ndjson")


def _survey(
    kind: SurveyKind,
    params: Dict[str, object],
    inputs: List[int],
    work: Callable,
    payload: Callable[[List[int]], object],
    jobs: Optional[int],
    out: Optional[Path],
    resume: bool,
    csv: Optional[Path],
    chunk_size: int,
) -> List[SurveyRecord]:
    path: Optional[Path] = _record_path(kind, int(params["bound"]), out)  # type: ignore
    header: SurveyHeader = SurveyHeader(kind=kind, params=params)
    records: List[SurveyRecord] = []
    record_file: Optional[SurveyRecordFile] = None
    if path is not None:
        record_file = SurveyRecordFile(path, header, resume=resume)
        records.extend(record_file.records)
    done = record_file.done if record_file is not None else set()
    todo: List[int] = [n for n in inputs if n not in done]
    started: float = time.monotonic()
    total: int = len(inputs)

    def sink(batch: List[SurveyRecord]) -> None:
        for rec in batch:
            records.append(rec)
            if record_file is not None:
                record_file.append(rec)
        progresslog_limit(
            f"(LOOPINFO) {kind.value.lower()} survey: {len(records)}/{total} after {time.monotonic() - started:.1f}s"
        )

    try:
        _run_pool(work, (payload(c) for c in _chunks(todo, chunk_size)), jobs or settings.SURVEY_JOBS, sink)
    finally:
        if record_file is not None:
            record_file.close()
    records.sort(key=lambda r: r.input)
    if csv is not None:
        export_csv(records, csv)
    return records


def fold_density(records: Iterable[SurveyRecord], bound: int) -> SurveyResult:
    counters: Dict[str, int] = {"total": 0, "regime": 0, "I": 0, "II": 0, "III": 0, "NONE": 0, "regime_with_condition": 0}
    for rec in records:
        counters["total"] += 1
        counters[rec.condition or "NONE"] += 1
        if rec.congruences["mod15"] in REGIME_CLASSES_MOD_15:
            counters["regime"] += 1
            if rec.condition != Condition.NONE.value:
                counters["regime_with_condition"] += 1
        key: str = f"mod120={rec.congruences['mod120']}"
        counters[key] = counters.get(key, 0) + 1

    total: int = counters["total"] or 1
    ratios: Dict[str, float] = {
        "i": counters["I"] / total,
        "ii": counters["II"] / total,
        "iii": counters["III"] / total,
        "combined": (counters["I"] + counters["II"] + counters["III"]) / total,
        "relative": counters["regime_with_condition"] / (counters["regime"] or 1),
    }
    return SurveyResult(kind=SurveyKind.DENSITY, bound=bound, total=counters["total"], counters=counters, ratios=ratios, expected=dict(DENSITY_LIMITS))


def density_survey(
    bound: int,
    jobs: Optional[int] = None,
    out: Optional[Path] = None,
    resume: bool = False,
    csv: Optional[Path] = None,
) -> SurveyResult:
    """frequencies of the rank 0 conditions among the primes up to bound"""
    if bound < 100:
        raise ValueError(f"{bound=} must be at least 100")
    primes: List[int] = [int(p) for p in primerange(2, bound + 1)]
    records = _survey(
        SurveyKind.DENSITY, {"bound": bound}, primes, _density_chunk, lambda c: c, jobs, out, resume, csv, chunk_size=5000
    )
    result: SurveyResult = fold_density(records, bound)
    logger.info(f"density survey up to {bound}: {result.ratios}")
    return result


def fold_twists(records: Iterable[SurveyRecord], bound: int, effort: int) -> SurveyResult:
    counters: Dict[str, int] = {"total": 0, "positive_rank": 0, "rank_bound_0": 0, "undecided": 0}
    for rec in records:
        counters["total"] += 1
        if (rec.rank_lb or 0) >= 1:
            counters["positive_rank"] += 1
        if rec.rank_ub == 0:
            counters["rank_bound_0"] += 1
        elif (rec.rank_lb or 0) < (rec.rank_ub or 0):
            counters["undecided"] += 1
        key: str = f"selmer_dim={rec.selmer_dim}"
        counters[key] = counters.get(key, 0) + 1

    total: int = counters["total"] or 1
    notes: List[str] = [f"positive rank is a lower bound from point search with effort {effort}"]
    if bound == 10_000:
        notes.append(
            f"a full rank computation finds {REFERENCE_POSITIVE_RANK_AT_10K} of positive rank;"
            f" shortfall {REFERENCE_POSITIVE_RANK_AT_10K - counters['positive_rank']}"
        )
    return SurveyResult(
        kind=SurveyKind.TWISTS,
        bound=bound,
        total=counters["total"],
        counters=counters,
        ratios={"positive_rank": counters["positive_rank"] / total, "rank_bound_0": counters["rank_bound_0"] / total},
        notes=notes,
    )


def twist_survey(
    bound: int,
    effort: Optional[int] = None,
    jobs: Optional[int] = None,
    out: Optional[Path] = None,
    resume: bool = False,
    csv: Optional[Path] = None,
) -> SurveyResult:
    """Selmer upper and point-search lower rank bounds of E_-d for the even-parity twists d <= bound"""
    if bound < 15:
        raise ValueError(f"{bound=} must be at least 15")
    effort = effort or settings.POINT_SEARCH_EFFORT
    inputs: List[int] = list(twist_inputs(bound))
    records = _survey(
        SurveyKind.TWISTS,
        {"bound": bound, "effort": effort},
        inputs,
        _twist_chunk,
        lambda c: (c, effort),
        jobs,
        out,
        resume,
        csv,
        chunk_size=50,
    )
    result: SurveyResult = fold_twists(records, bound, effort)
    logger.info(f"twist survey up to {bound}: {result.counters}")
    return result
