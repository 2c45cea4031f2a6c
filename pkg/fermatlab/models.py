"""
Pydantic models for fermatlab reports and run configuration
"""
import math
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ComplexValue(BaseModel):
    """Finite complex scalar"""
    re: float
    im: float = 0.0

    @field_validator("re", "im")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("complex components must be finite")
        return v

    @classmethod
    def of(cls, z: complex) -> "ComplexValue":
        z = complex(z)
        return cls(re=z.real, im=z.imag)

    def to_complex(self) -> complex:
        return complex(self.re, self.im)


# Solutions

class GridSpec(BaseModel):
    """Sample grid for residual verification"""
    kind: Literal["polar", "random"] = "polar"
    radius: float = Field(0.9, gt=0)
    points: int = Field(200, ge=1)
    include_center: bool = False
    seed: int = 0


class SampleFailure(BaseModel):
    z: ComplexValue
    residual: float


class VerifyReport(BaseModel):
    """Residual check of one solution tuple over a grid"""
    samples: int
    accepted: int
    max_residual: float
    max_abs_residual: float
    skipped_near_pole: int
    skipped_branch: int = 0
    tolerance: float
    failures: List[SampleFailure] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and self.accepted > 0


class SolutionSummary(BaseModel):
    """Serialized solution tuple with parameter provenance"""
    family_id: str
    domain: str
    kind: str
    exponents: List[int]
    exprs: List[str]
    coefficients: Optional[List[str]] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    known_poles: List[ComplexValue] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


# Jets

class OrderEntry(BaseModel):
    """Minimum sigma-order of one jet-monomial coefficient"""
    monomial: str
    order: Optional[int] = None
    lower_bound: Optional[int] = None


class OrderTable(BaseModel):
    jd: str
    family: str
    exponents: List[int]
    divisor: str
    basis: Literal["regular", "log"] = "regular"
    truncation: int
    entries: List[OrderEntry] = Field(default_factory=list)
    overall_order: Optional[int] = None
    certified: bool = True
    representation: int = 0
    representation_label: str = ""


class Verdict(BaseModel):
    """Pass/fail of one predicate, with the numbers it was decided on"""
    predicate: str
    passed: bool
    observed: Optional[Any] = None
    expected: str = ""
    signals: List[str] = Field(default_factory=list)
    formula: str = ""


class ThresholdRow(BaseModel):
    exponents: List[int]
    measurements: Dict[str, Optional[int]] = Field(default_factory=dict)
    tables: List[OrderTable] = Field(default_factory=list)
    seed_agreement: bool = True


class ThresholdReport(BaseModel):
    family: str
    truncation: int = 24
    seeds: List[int] = Field(default_factory=list)
    rows: List[ThresholdRow] = Field(default_factory=list)
    verdicts: List[Verdict] = Field(default_factory=list)


# Nevanlinna

class QuadratureConfig(BaseModel):
    """Budgets and tolerances of the Nevanlinna quadratures"""
    rtol: float = Field(1e-6, gt=0)
    atol: float = Field(1e-10, gt=0)
    max_evaluations: int = Field(4_000_000, ge=1000)
    pole_guard: float = Field(1e-3, gt=0)
    boundary_points: int = Field(256, ge=16)
    max_boundary_points: int = Field(2**18, ge=16)
    characteristic_method: Literal["area", "boundary"] = "area"
    defect_method: Literal["area", "boundary"] = "boundary"
    growth_tolerance: float = Field(0.5, ge=0)
    logderiv_slack: float = Field(2.0, ge=0)


class DefectEstimate(BaseModel):
    """Finite-schedule surrogate of 1 - limsup N^[k]/T"""
    a: Optional[ComplexValue] = None  # None is the value infinity
    truncation: Optional[int] = None  # None is no truncation
    schedule: List[float]
    ratios: List[float]
    value: float
    clamped: bool = False


class NevanlinnaRow(BaseModel):
    r: float
    T: Optional[float] = None
    frak_T: Optional[float] = None
    m: Optional[float] = None
    N: Optional[float] = None
    N_truncated: Optional[float] = None
    fmt_residual: Optional[float] = None
    growth_ratio: Optional[float] = None


class LemmaReport(BaseModel):
    """Defect inequality check for a syzygy psi_0 + ... + psi_n = 0"""
    case: Literal["a", "b"]
    members: List[int]
    truncation: int
    syzygy_residual: float
    defects: List[DefectEstimate] = Field(default_factory=list)
    defect_sum: float
    bound: float
    margin: float
    cramer_residual: Optional[float] = None


class LogDerivRow(BaseModel):
    r: float
    m: float
    T: float
    bound: float
    violated: bool


class LogDerivReport(BaseModel):
    k: int
    rows: List[LogDerivRow] = Field(default_factory=list)
    violations: int = 0


class NevanlinnaReport(BaseModel):
    function: str
    surface: str
    a: Optional[ComplexValue] = None
    truncation: Optional[int] = None
    rows: List[NevanlinnaRow] = Field(default_factory=list)
    defects: List[DefectEstimate] = Field(default_factory=list)
    fmt_bound: Optional[float] = None
    growth_flag: bool = False
    clamp_flags: int = 0
    lemma: Optional[LemmaReport] = None
    logderiv: Optional[LogDerivReport] = None
    check: Optional[str] = None
    power: Optional[int] = None


# CLI

class RunConfig(BaseModel):
    """Validated run parameters; identical configs give identical reports"""
    command: Literal["construct", "jets", "nevanlinna"]
    family: Optional[str] = None
    n: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=2)
    m: Optional[int] = Field(None, ge=1)
    l: Optional[int] = Field(None, ge=1)
    a: List[ComplexValue] = Field(default_factory=list)
    b: Optional[ComplexValue] = None
    exponents: List[int] = Field(default_factory=list)
    variant: int = Field(2, ge=1, le=2)
    inner: str = "z"
    seed: Optional[int] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerance: float = Field(1e-9, gt=0)
    exponent_range: Optional[Tuple[int, int]] = None
    max_exponent: int = Field(12, ge=2)
    truncation: int = Field(24, ge=4)
    include_tables: bool = False
    function: Optional[str] = None
    tuple_spec: Optional[str] = None
    surface: Literal["C", "D"] = "C"
    radii: List[float] = Field(default_factory=list)
    a_value: Optional[ComplexValue] = None
    defect_truncation: Optional[int] = Field(None, ge=1)
    defect_check: Optional[Literal["lemma52", "power", "logderiv", "small-function"]] = None
    growth_ratio: bool = False
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    output: Optional[str] = None
    csv: Optional[str] = None
    no_timestamp: bool = False

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "command": "construct",
                "family": "holo-equal",
                "n": 3,
                "k": 2,
                "a": [{"re": 0.5, "im": 0.0}],
            }
        }
    )

    @field_validator("radii")
    @classmethod
    def _increasing(cls, radii: List[float]) -> List[float]:
        if any(r <= 0 for r in radii):
            raise ValueError("radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly increasing")
        return radii

    @model_validator(mode="after")
    def _range_within_cap(self) -> "RunConfig":
        if self.exponent_range is not None:
            lo, hi = self.exponent_range
            if lo > hi:
                raise ValueError("exponent range is empty")
            if hi > self.max_exponent:
                raise ValueError(f"exponent range exceeds max_exponent={self.max_exponent}")
        return self


class ExperimentResult(BaseModel):
    name: str
    kind: Literal["construct", "threshold", "nevanlinna", "consistency", "annihilation", "elliptic"]
    data: Dict[str, Any]


class ReportDocument(BaseModel):
    """One JSON document per run"""
    schema_version: str = "report-v1"
    tool_version: str
    run_id: str
    generated_at: Optional[str] = None
    config: Dict[str, Any]
    results: List[ExperimentResult] = Field(default_factory=list)
    verdicts: List[Verdict] = Field(default_factory=list)
    passed: bool = True
