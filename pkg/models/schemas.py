"""
Pydantic models and enums used throughout angleset.

These models define the exact domain types shared by the services
(subsets, hypergraphs, point sets) and the reports the services return.
All of them are frozen: a value is validated once, at construction, and
never changes afterwards.
"""

from __future__ import annotations

import math
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Annotated, Any, ClassVar, Dict, List, Literal, Optional, Tuple, Union

import mpmath
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    StrictInt,
    field_validator,
    model_validator,
)

from models.errors import InvalidInputError
from models.settings import DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS

# Precision used when a bare number or string is turned into a real without
# an explicit working precision.
PARSE_PRECISION_BITS = 512


# -------------------------
# Exact and real scalars
# -------------------------


@lru_cache(maxsize=None)
def real_context(prec: int) -> mpmath.MPContext:
    """Return a private mpmath context working at ``prec`` bits.

    Contexts are cached and shared; callers must not change their precision.
    """
    if prec < MIN_PRECISION_BITS:
        raise InvalidInputError(f"precision must be >= {MIN_PRECISION_BITS} bits, got {prec}")
    ctx = mpmath.MPContext()
    ctx.prec = prec
    return ctx


def is_real(value: Any) -> bool:
    return hasattr(value, "_mpf_")


def to_fraction(value: Any) -> Fraction:
    """Parse ``value`` as an exact rational.

    Strings are read as written ("0.3" is exactly 3/10); floats go through
    their shortest decimal repr, so ``0.3`` also becomes 3/10.
    """
    if isinstance(value, bool):
        raise InvalidInputError(f"expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidInputError(f"expected a finite number, got {value!r}")
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInputError(f"not an exact decimal or rational: {value!r}") from exc
    raise InvalidInputError(f"cannot read {value!r} as a rational")


def fraction_to_str(value: Fraction) -> str:
    return str(value)


def to_real(value: Any, prec: int = PARSE_PRECISION_BITS) -> Any:
    """Convert ``value`` to an mpf; existing mpf values pass through untouched."""
    if is_real(value):
        return value
    if isinstance(value, bool):
        raise InvalidInputError(f"expected a real number, got {value!r}")
    ctx = real_context(prec)
    if isinstance(value, Fraction):
        out = ctx.mpf(value.numerator) / value.denominator
    elif isinstance(value, Decimal):
        out = ctx.mpf(str(value))
    elif isinstance(value, (int, float, str)):
        try:
            out = ctx.mpf(value.strip() if isinstance(value, str) else value)
        except (ValueError, TypeError) as exc:
            raise InvalidInputError(f"not a real number: {value!r}") from exc
    else:
        raise InvalidInputError(f"cannot read {value!r} as a real number")
    if not ctx.isfinite(out):
        raise InvalidInputError(f"expected a finite real, got {value!r}")
    return out


def real_digits(prec: int) -> int:
    """Decimal digits that round-trip a ``prec``-bit mantissa."""
    return int(math.ceil(prec * math.log10(2))) + 1


def real_to_str(value: Any) -> str:
    ctx = value.context
    return ctx.nstr(value, real_digits(ctx.prec))


Rational = Annotated[
    Fraction,
    BeforeValidator(to_fraction),
    PlainSerializer(fraction_to_str, return_type=str, when_used="json"),
]
Real = Annotated[
    Any,
    BeforeValidator(to_real),
    PlainSerializer(real_to_str, return_type=str, when_used="json"),
]


def ceil_product(c: Fraction, k: int) -> int:
    """Exact ceiling of c*k."""
    return math.ceil(c * k)


# -------------------------
# Enums
# -------------------------


class AngleMode(str, Enum):
    STRICT = "strict"
    WEAK = "weak"


class EnumerationOrder(str, Enum):
    COLEX = "colex"
    RANDOM = "random"


class SearchMethod(str, Enum):
    BNB = "bnb"
    NAIVE = "naive"
    BOTH = "both"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# -------------------------
# Subsets and hypergraphs
# -------------------------


class KSubset(_Frozen):
    d: int = Field(..., gt=0, description="Ground set is {1..d}")
    bits: int = Field(..., ge=0, description="Bit m-1 is set iff element m is in the subset")
    k: int = Field(..., gt=0, description="Subset size, equal to the popcount of bits")

    @model_validator(mode="after")
    def _check_bits(self) -> "KSubset":
        if self.k > self.d:
            raise ValueError(f"k={self.k} exceeds d={self.d}")
        if self.bits >> self.d:
            raise ValueError(f"bits set outside positions 1..{self.d}")
        if self.bits.bit_count() != self.k:
            raise ValueError(f"popcount {self.bits.bit_count()} != k={self.k}")
        return self

    @classmethod
    def from_mask(cls, d: int, bits: int) -> "KSubset":
        return cls(d=d, bits=bits, k=bits.bit_count())

    @classmethod
    def from_elements(cls, d: int, elements: Any) -> "KSubset":
        bits = 0
        for m in elements:
            if not 1 <= m <= d:
                raise InvalidInputError(f"element {m} outside 1..{d}")
            bits |= 1 << (m - 1)
        return cls.from_mask(d, bits)

    @property
    def elements(self) -> Tuple[int, ...]:
        return tuple(m + 1 for m in range(self.d) if self.bits >> m & 1)


class ConstructionParams(_Frozen):
    d: int = Field(..., gt=0, description="Dimension / ground-set size")
    k: int = Field(..., gt=0, description="Edge size")
    c: Rational = Field(..., description="Angle slack in (0,1), kept as an exact rational")
    threshold: int = Field(..., ge=1, description="Intersection cutoff ceil(c*k)")

    @model_validator(mode="before")
    @classmethod
    def _fill_threshold(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("threshold") is None and "c" in data and "k" in data:
            data = dict(data)
            data["threshold"] = ceil_product(to_fraction(data["c"]), int(data["k"]))
        return data

    @field_validator("c")
    @classmethod
    def _check_c(cls, value: Fraction) -> Fraction:
        if not 0 < value < 1:
            raise ValueError(f"c must lie in (0,1), got {value}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "ConstructionParams":
        if self.k > self.d:
            raise ValueError(f"k={self.k} exceeds d={self.d}")
        if self.threshold != ceil_product(self.c, self.k):
            raise ValueError(f"threshold {self.threshold} != ceil(c*k) = {ceil_product(self.c, self.k)}")
        return self


class BoundedIntersectionHypergraph(_Frozen):
    params: ConstructionParams
    edges: Tuple[KSubset, ...] = Field(default_factory=tuple, description="Edges in acceptance order")
    complete: bool = Field(True, description="False when the enumeration budget cut the scan short")
    candidates_scanned: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_edges(self) -> "BoundedIntersectionHypergraph":
        p = self.params
        limit = p.threshold - 1
        masks: List[int] = []
        seen = set()
        for pos, edge in enumerate(self.edges):
            if edge.d != p.d or edge.k != p.k:
                raise ValueError(f"edge {pos} has (d,k)=({edge.d},{edge.k}), expected ({p.d},{p.k})")
            if edge.bits in seen:
                raise ValueError(f"edge {pos} repeats an earlier edge")
            seen.add(edge.bits)
            masks.append(edge.bits)
        for i, mi in enumerate(masks):
            for j in range(i + 1, len(masks)):
                if (mi & masks[j]).bit_count() > limit:
                    raise ValueError(f"edges {i} and {j} share more than {limit} elements")
        return self

    def __len__(self) -> int:
        return len(self.edges)


# -------------------------
# Point sets
# -------------------------


class LatticePointSet(_Frozen):
    coord_type: ClassVar[str] = "int"

    d: int = Field(..., gt=0, description="Ambient dimension")
    points: Tuple[Tuple[StrictInt, ...], ...] = Field(..., description="Integer coordinate vectors")

    @model_validator(mode="after")
    def _check_lengths(self) -> "LatticePointSet":
        for i, p in enumerate(self.points):
            if len(p) != self.d:
                raise ValueError(f"point {i} has {len(p)} coordinates, expected {self.d}")
        return self

    def __len__(self) -> int:
        return len(self.points)


class EuclideanPointSet(_Frozen):
    coord_type: ClassVar[str] = "decimal"

    d: int = Field(..., gt=0, description="Ambient dimension")
    points: Tuple[Tuple[Real, ...], ...] = Field(..., description="Real coordinate vectors")
    precision: int = Field(DEFAULT_PRECISION_BITS, ge=MIN_PRECISION_BITS, description="Mantissa bits")

    @model_validator(mode="before")
    @classmethod
    def _round_to_precision(cls, data: Any) -> Any:
        if isinstance(data, dict) and "points" in data:
            prec = int(data.get("precision") or DEFAULT_PRECISION_BITS)
            ctx = real_context(max(prec, MIN_PRECISION_BITS))
            data = dict(data)
            data["points"] = tuple(tuple(ctx.mpf(to_real(x)) for x in p) for p in data["points"])
        return data

    @model_validator(mode="after")
    def _check_points(self) -> "EuclideanPointSet":
        for i, p in enumerate(self.points):
            if len(p) != self.d:
                raise ValueError(f"point {i} has {len(p)} coordinates, expected {self.d}")
            if not all(mpmath.isfinite(x) for x in p):
                raise ValueError(f"point {i} has a non-finite coordinate")
        return self

    def __len__(self) -> int:
        return len(self.points)


PointSet = Union[LatticePointSet, EuclideanPointSet]


# -------------------------
# Bounds
# -------------------------


class AnalysisPoint(_Frozen):
    a: Real
    b: Real
    H_value: Real
    dHdb_value: Optional[Real] = Field(None, description="None at b=1 where the derivative diverges")


class CapCountBound(_Frozen):
    d: int
    y: Real
    statement_form: Real = Field(..., description="d^2 (1-y)^(-d)")
    proof_form: Real = Field(..., description="d^2 (1-y)^(1-d)")


class UpperBoundChain(_Frozen):
    d: int
    c: Rational
    cap_side: Real = Field(..., description="d^2 (1-3.488c)^(-d)")
    envelope: Real = Field(..., description="(1+3.75c)^d")
    growth_product: Real = Field(..., description="(1+3.75c)(1-3.488c)")
    product_condition: bool
    chain_holds: bool


class StirlingRow(_Frozen):
    n: int
    exact_log: Real
    entropy_approx: Real
    relative_gap: Real


class BoundReport(_Frozen):
    d: int
    k: int
    c: Rational
    threshold: int
    a_guess: Real = Field(..., description="c/5")
    rho: Real = Field(..., description="log 5 - 8/5")
    delta: Rational
    A_exact: Rational
    A_ceil: int
    A_per_dim_root: Real
    lower_envelope: Real
    upper_envelope: Real
    precision: int
    jung_radius: Optional[Real] = None
    cap_half_angle: Optional[Real] = None
    rankin: Optional[Real] = None
    cap_count: Optional[CapCountBound] = None
    provenance: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_positive(self) -> "BoundReport":
        if self.A_exact <= 0 or self.A_per_dim_root <= 0:
            raise ValueError("A must be positive")
        return self


# -------------------------
# Verification
# -------------------------


class AngleThreshold(_Frozen):
    spec: str = Field(..., description="The text the threshold was parsed from")
    radians: Real
    cos_signed_square: Optional[Rational] = Field(
        None, description="cos(alpha)*|cos(alpha)| when it is rational"
    )
    c: Optional[Rational] = Field(None, description="Slack c when given as pi/3+c")


class AngleCertificate(_Frozen):
    n: int = Field(..., ge=3)
    alpha_spec: str
    alpha_threshold: Real
    mode: AngleMode
    max_angle: Real
    argmax_triple: Tuple[int, int, int] = Field(..., description="(i, j, k) with the apex at j")
    borderline_count: int = Field(0, ge=0)
    undecided_count: int = Field(0, ge=0)
    violation_count: int = Field(0, ge=0)
    verdict: Verdict

    @model_validator(mode="after")
    def _check_verdict(self) -> "AngleCertificate":
        clean = self.violation_count == 0 and self.undecided_count == 0
        if (self.verdict == Verdict.PASS) != clean:
            raise ValueError("verdict disagrees with violation/undecided counts")
        return self


class DistanceStats(_Frozen):
    min_sq: Union[int, Real]
    max_sq: Union[int, Real]
    argmin_pair: Tuple[int, int]
    argmax_pair: Tuple[int, int]
    ratio: Real = Field(..., description="sqrt(min_sq / max_sq)")

    @model_validator(mode="after")
    def _check_order(self) -> "DistanceStats":
        if not 0 < self.min_sq <= self.max_sq:
            raise ValueError("expected 0 < min_sq <= max_sq")
        return self


class MinMaxRatioCheck(_Frozen):
    c: Rational
    ratio: Real
    threshold: Real = Field(..., description="1 - 3.488c")
    margin: Real
    verdict: Verdict


class Ball(_Frozen):
    center: Tuple[float, ...]
    radius: float = Field(..., ge=0)
    support: Tuple[int, ...] = Field(default_factory=tuple, description="Indices of points on the boundary")


# -------------------------
# Oracles
# -------------------------


class RankReport(_Frozen):
    n: int = Field(..., description="Number of difference vectors a_i - a_base")
    d: int
    rank: int
    full_rank: bool
    min_eigenvalue: float
    max_eigenvalue: float
    gram_deviation: float = Field(..., description="max |G - (I+J)/2|")


class SubsetSearchResult(_Frozen):
    size: int
    indices: Tuple[int, ...]
    method: SearchMethod
    candidates: int
    conflict_triples: int


class LemmaCheckReport(_Frozen):
    trials: int
    seed: int
    kept: int = Field(..., description="Samples with |MN| > |AC|")
    borderline: int = Field(0, description="Samples rechecked at high precision")
    counterexamples: int
    first_counterexample: Optional[Dict[str, float]] = None
    vacuous: bool
    verdict: Verdict


# -------------------------
# Files
# -------------------------


class PointSetMeta(BaseModel):
    k: Optional[int] = None
    c: Optional[str] = None
    order: Optional[str] = None
    seed: Optional[int] = None


class PointSetFile(BaseModel):
    format: Literal["angleset-v1"] = "angleset-v1"
    d: int = Field(..., gt=0)
    coord_type: Literal["int", "decimal"]
    points: List[List[Union[StrictInt, str]]]
    meta: PointSetMeta = Field(default_factory=PointSetMeta)


class ConstructionResult(_Frozen):
    hypergraph: BoundedIntersectionHypergraph
    points: LatticePointSet
    report: BoundReport


def real_to_fraction(value: Any) -> Fraction:
    """Exact value of a finite mpf (a dyadic rational)."""
    sign, man, exp, bc = value._mpf_
    if not man and exp:
        raise InvalidInputError(f"not a finite real: {value!r}")
    if sign:
        man = -man
    return Fraction(man << exp) if exp >= 0 else Fraction(man, 1 << -exp)
