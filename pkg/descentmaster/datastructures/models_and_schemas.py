from __future__ import annotations

import datetime
from enum import Enum, auto
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, root_validator, validate_model, validator


SCHEMA_VERSION: int = 1


class MStrEnum(str, Enum):
    """StrEnum is introduced in 3.11 and not available in runtime 3.9"""

    @staticmethod
    def _generate_next_value_(name: str, start: int, count: int, last_values: list) -> Any:
        return name.upper()


class SplittingType(MStrEnum):
    """decomposition of a rational prime in a quadratic field"""

    SPLIT = auto()
    INERT = auto()
    RAMIFIED = auto()


class Condition(MStrEnum):
    """which rank-0 condition a prime satisfies"""

    I = auto()  # noqa: E741
    II = auto()
    III = auto()
    NONE = auto()


class Regime(MStrEnum):
    """position of p relative to the congruences p = 1,2,3,4,5,8 mod 15 and p = 1 mod 8"""

    OUTSIDE = auto()
    NOT_1_MOD_8 = auto()
    P_1_49_MOD_120 = auto()
    P_17_113_MOD_120 = auto()


class RankConclusion(MStrEnum):
    ZERO = auto()
    UNDETERMINED = auto()


class Sha4Structure(MStrEnum):
    Z2_SQUARED = auto()
    Z4_SQUARED = auto()
    UNDETERMINED = auto()
    NOT_APPLICABLE = auto()


class ParityExpectation(MStrEnum):
    EVEN = auto()
    ODD = auto()


class SurveyKind(MStrEnum):
    DENSITY = auto()
    TWISTS = auto()


class CheckableBaseModel(BaseModel):
    """
    base-model for pydantic-models being able to call the
    check-method anytime during the runtime/after their instantiation

    extended to be able to use field-name-alias as well as field-names for de-serializing
    """

    def check(self) -> None:
        *_, validation_error = validate_model(self.__class__, self.__dict__)
        if validation_error:
            raise validation_error

    class Config:
        allow_population_by_field_name = True


class ShaClaim(BaseModel):
    """a Sha statement together with what it rests on"""

    statement: str
    structure: Sha4Structure
    hypotheses: List[str] = Field(default_factory=list)
    computed: bool = False  # False: conditional on the listed hypotheses


class CrossCheck(BaseModel):
    name: str
    expected: Any
    actual: Any
    ok: bool


class ClassificationReport(CheckableBaseModel):
    p: int
    p_mod_8: int
    p_mod_15: int
    p_mod_40: int
    p_mod_120: int
    regime: Regime
    condition: Condition
    redei_values: Dict[str, int] = Field(default_factory=dict)
    rank_conclusion: RankConclusion = RankConclusion.UNDETERMINED
    rank_upper_bound: Optional[int] = None
    sha2_dim_given_rank: Dict[int, int] = Field(default_factory=dict)
    sha4_structure: Sha4Structure = Sha4Structure.NOT_APPLICABLE
    sha_claims: List[ShaClaim] = Field(default_factory=list)
    parity: ParityExpectation
    parity_conjectural: bool = True
    evidence: Dict[str, Any] = Field(default_factory=dict)

    @root_validator(skip_on_failure=True)
    def check_condition_consistency(cls, values: dict) -> dict:
        if values.get("condition") == Condition.I and values.get("p_mod_8") == 1:
            raise ValueError("condition (i) needs p != 1 mod 8")
        if values.get("rank_conclusion") == RankConclusion.ZERO and values.get("parity") != ParityExpectation.EVEN:
            raise ValueError("rank 0 conclusion with odd parity expectation")
        return values


class VerificationReport(ClassificationReport):
    selmer_q_dimension: int
    selmer_k_dimension: Optional[int] = None
    field_m: Optional[int] = None
    rank_lower_bound: int = 0
    corestriction_ok: Optional[bool] = None
    corestriction_vacuous: Optional[bool] = None
    witnesses: List[List[str]] = Field(default_factory=list)
    checks: List[CrossCheck] = Field(default_factory=list)

    def all_checks_ok(self) -> bool:
        return all(c.ok for c in self.checks)


class SurveyHeader(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: SurveyKind
    params: Dict[str, Any]


class SurveyRecord(BaseModel):
    input: int
    congruences: Dict[str, int]
    condition: Optional[str] = None
    selmer_dim: Optional[int] = None
    rank_lb: Optional[int] = None
    rank_ub: Optional[int] = None
    redei_values: Dict[str, int] = Field(default_factory=dict)


class SurveyResult(CheckableBaseModel):
    kind: SurveyKind
    bound: int
    total: int
    counters: Dict[str, int] = Field(default_factory=dict)
    ratios: Dict[str, float] = Field(default_factory=dict)
    expected: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)

    @validator("ratios")
    def _ratios_are_frequencies(cls, value: Dict[str, float]) -> Dict[str, float]:
        for k, v in value.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"ratio {k}={v} outside [0,1]")
        return value


class OutputRecord(BaseModel):
    schema_version: int = SCHEMA_VERSION
    command: str
    inputs: Dict[str, Any]
    results: Dict[str, Any]
    timing: Dict[str, float] = Field(default_factory=dict)
    evidence: Dict[str, Any] = Field(default_factory=dict)
    created_at: Optional[datetime.datetime] = None
