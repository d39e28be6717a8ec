"""
Closed-form bounds.

Exact evaluation of the guaranteed edge count A(d,k,c) of the greedy
hypergraph construction, high-precision evaluation of the entropy
function H(a,b) that controls its growth rate, the envelope formulas for
the lower and upper bounds, and the auxiliary quantities used by the upper
bound argument (Rankin's cap-packing asymptotic, Jung's radius, the cap
count bound and the sine-ratio margin).

Every real-valued function takes ``prec`` (mantissa bits, default from
``ANGLESET_PRECISION_BITS``) and evaluates in a private mpmath context.
Combinatorial quantities are exact integers / ``Fraction`` values.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Any, Iterable, List, Optional, Tuple

from models.errors import CertificationError, InvalidInputError
from models.schemas import (
    AnalysisPoint,
    BoundReport,
    CapCountBound,
    StirlingRow,
    UpperBoundChain,
    ceil_product,
    real_context,
    to_fraction,
    to_real,
)
from models.settings import precision_bits

logger = logging.getLogger(__name__)

# Rate and slope constants of the lower and upper growth bounds.
LOWER_RATE = Fraction("0.0094")
UPPER_SLOPE = Fraction("3.75")
UPPER_DOMAIN = Fraction("0.02")
SINE_RATIO_SLOPE = Fraction("1.744")
SINE_RATIO_DOMAIN = Fraction("0.024")
MIN_DISTANCE_SLOPE = Fraction("3.488")


def _ctx(prec: Optional[int]):
    return real_context(precision_bits() if prec is None else prec)


def _mp(ctx, value: Any):
    """Round ``value`` into ``ctx``; rationals are divided at the target precision."""
    if isinstance(value, Fraction):
        return ctx.mpf(value.numerator) / value.denominator
    return ctx.mpf(to_real(value))


def _slack(c: Any, *, allow_zero: bool = False) -> Fraction:
    cf = to_fraction(c)
    low_ok = cf >= 0 if allow_zero else cf > 0
    if not (low_ok and cf < 1):
        raise InvalidInputError(f"c must lie in {'[0,1)' if allow_zero else '(0,1)'}, got {cf}")
    return cf


def _check_dk(d: int, k: int) -> None:
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must lie in 1..{d}, got {k}")


def rho(prec: Optional[int] = None):
    """log 5 - 8/5."""
    ctx = _ctx(prec)
    return ctx.log(5) - ctx.mpf(8) / 5


# -------------------------
# Exact edge counts
# -------------------------


def bad_denominator(d: int, k: int, c: Any) -> int:
    """sum_{j=ceil(ck)}^{k} C(k,j) C(d-k,k-j)."""
    _check_dk(d, k)
    cf = _slack(c)
    start = ceil_product(cf, k)
    return sum(math.comb(k, j) * math.comb(d - k, k - j) for j in range(start, k + 1))


def guaranteed_edges(d: int, k: int, c: Any) -> Fraction:
    """A(d,k,c) = C(d,k) / bad_denominator(d,k,c), exactly."""
    return Fraction(math.comb(d, k), bad_denominator(d, k, c))


def choose_k(d: int, c: Any, window: Optional[int] = None, full_scan: bool = False) -> int:
    """Edge size maximising A(d,k,c).

    The search covers k = 1 (the unit-vector baseline, A = d) and k in
    [center - w, center + w] clipped to 1..d, where center = round(cd/5)
    (halves round up) and w defaults to max(3, ceil(0.02 d)). ``full_scan``
    searches all of 1..d instead. Ties go to the smaller k.
    """
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    cf = _slack(c)
    if full_scan:
        lo, hi = 1, d
    else:
        w = max(3, math.ceil(Fraction(2, 100) * d)) if window is None else window
        if w < 0:
            raise InvalidInputError(f"window must be non-negative, got {w}")
        center = math.floor(cf * d / 5 + Fraction(1, 2))
        lo, hi = max(1, center - w), min(d, center + w)
        lo = min(lo, hi)
    candidates = sorted({1, *range(lo, hi + 1)})
    best_k, best_a = 1, guaranteed_edges(d, 1, cf)
    for k in candidates[1:]:
        a = guaranteed_edges(d, k, cf)
        if a > best_a:
            best_k, best_a = k, a
    logger.debug("choose_k(d=%s, c=%s) scanned k=1 and %s..%s -> %s", d, cf, lo, hi, best_k)
    return best_k


# -------------------------
# Entropy function H(a,b)
# -------------------------


def _h_args(ctx, a: Any, b: Any, *, b_may_be_one: bool):
    a, b = _mp(ctx, a), _mp(ctx, b)
    if not 0 < a < 1:
        raise InvalidInputError(f"a must lie in (0,1), got {ctx.nstr(a, 12)}")
    upper_ok = b <= 1 if b_may_be_one else b < 1
    if not (b > 0 and upper_ok):
        interval = "(0,1]" if b_may_be_one else "(0,1)"
        raise InvalidInputError(f"b must lie in {interval}, got {ctx.nstr(b, 12)}")
    g = 1 - 2 * a + a * b
    if g <= 0:
        raise InvalidInputError(f"1 - 2a + ab must be positive, got {ctx.nstr(g, 12)}")
    return a, b, g


def _h(ctx, a, b, g):
    value = -a * b * ctx.log(a) - 2 * (1 - a) * ctx.log(1 - a) + a * b * ctx.log(b) + g * ctx.log(g)
    if b < 1:
        value += 2 * a * (1 - b) * ctx.log(1 - b)
    return value


def _h_db(ctx, a, b, g):
    return -a * ctx.log(a) + a * ctx.log(b) - 2 * a * ctx.log(1 - b) + a * ctx.log(g)


def _h_da(ctx, a, b, g):
    value = -b * ctx.log(a) + 2 * ctx.log(1 - a) + b * ctx.log(b) + (b - 2) * ctx.log(g)
    if b < 1:
        value += 2 * (1 - b) * ctx.log(1 - b)
    return value


def entropy_H(a: Any, b: Any, prec: Optional[int] = None):
    """H(a,b), with x log x -> 0 applied to the (1-b) term at b = 1."""
    ctx = _ctx(prec)
    return _h(ctx, *_h_args(ctx, a, b, b_may_be_one=True))


def entropy_H_db(a: Any, b: Any, prec: Optional[int] = None):
    """dH/db = -a log a + a log b - 2a log(1-b) + a log(1-2a+ab), for b < 1."""
    ctx = _ctx(prec)
    return _h_db(ctx, *_h_args(ctx, a, b, b_may_be_one=False))


def entropy_H_da(a: Any, b: Any, prec: Optional[int] = None):
    """dH/da; vanishes at a = b."""
    ctx = _ctx(prec)
    return _h_da(ctx, *_h_args(ctx, a, b, b_may_be_one=True))


def growth_ratio(c: Any, prec: Optional[int] = None):
    """(e^{H(c/5,c)} - 1) / c."""
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c))
    value = _h(ctx, *_h_args(ctx, cc / 5, cc, b_may_be_one=True))
    return ctx.expm1(value) / cc


def growth_ratio_leading_term(c: Any, prec: Optional[int] = None):
    """Small-c behaviour of ``growth_ratio``: (c/5)(log 5 - 4/5).

    H(c/5, c) = (c^2/5)(log 5 - 4/5) + O(c^3), so the ratio vanishes
    linearly as c -> 0.
    """
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c))
    return cc / 5 * (ctx.log(5) - ctx.mpf(4) / 5)


def rate_crossover(prec: Optional[int] = None):
    """The c in (0.01, 0.2) where H(c/5, c) = log(1 + (log 5 - 8/5) c).

    Below it the inequality H(c/5,c) >= log(1 + rho c) fails; above it holds.
    """
    ctx = _ctx(prec)
    r = rho(ctx.prec)

    def gap(c):
        return _h(ctx, c / 5, c, 1 - 2 * c / 5 + c * c / 5) - ctx.log1p(r * c)

    return ctx.findroot(gap, (ctx.mpf("0.01"), ctx.mpf("0.2")), solver="anderson")


def optimal_a(c: Any, prec: Optional[int] = None, grid: int = 400):
    """Interior maximiser of a -> H(a, c) on (0, c).

    dH/da is positive near 0 and vanishes again at a = c; the first sign
    change on a uniform grid brackets the maximiser, which is then refined
    by root finding. The ratio a*/c tends to 1/5 as c -> 0.
    """
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c))

    def slope(a):
        return _h_da(ctx, a, cc, 1 - 2 * a + a * cc)

    prev_a = cc / grid
    prev = slope(prev_a)
    for i in range(2, grid):
        a = cc * i / grid
        cur = slope(a)
        if prev > 0 >= cur:
            return ctx.findroot(slope, (prev_a, a), solver="anderson")
        prev_a, prev = a, cur
    raise InvalidInputError(f"no interior maximiser of H(., {ctx.nstr(cc, 8)}) found on the grid")


def analyze_h(a: Any, c: Any, samples: int = 64, prec: Optional[int] = None) -> List[AnalysisPoint]:
    """H and dH/db on a uniform grid of b over [c, 1]."""
    if samples < 2:
        raise InvalidInputError(f"samples must be >= 2, got {samples}")
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c))
    aa = _mp(ctx, a)
    points: List[AnalysisPoint] = []
    for i in range(samples):
        b = ctx.mpf(1) if i == samples - 1 else cc + (1 - cc) * i / (samples - 1)
        aa_, b_, g = _h_args(ctx, aa, b, b_may_be_one=True)
        points.append(
            AnalysisPoint(
                a=aa_,
                b=b_,
                H_value=_h(ctx, aa_, b_, g),
                dHdb_value=_h_db(ctx, aa_, b_, g) if b_ < 1 else None,
            )
        )
    return points


def stirling_consistency(
    x: Any, y: Any, n_values: Iterable[int], prec: Optional[int] = None
) -> List[StirlingRow]:
    """Compare log C(floor(xn), floor(yn)) with n[x log x - y log y - (x-y) log(x-y)]."""
    ctx = _ctx(prec)
    xr, yr = to_fraction(x), to_fraction(y)
    if not 0 < yr < xr < 1:
        raise InvalidInputError(f"need 0 < y < x < 1, got x={xr}, y={yr}")
    xm, ym = _mp(ctx, xr), _mp(ctx, yr)
    rate = xm * ctx.log(xm) - ym * ctx.log(ym) - (xm - ym) * ctx.log(xm - ym)
    rows: List[StirlingRow] = []
    for n in n_values:
        top, bottom = math.floor(xr * n), math.floor(yr * n)
        if bottom < 1 or top <= bottom:
            raise InvalidInputError(f"n={n} is too small for x={xr}, y={yr}")
        exact = ctx.log(ctx.mpf(math.comb(top, bottom)))
        approx = n * rate
        rows.append(
            StirlingRow(n=n, exact_log=exact, entropy_approx=approx, relative_gap=abs(exact - approx) / approx)
        )
    return rows


# -------------------------
# Envelopes
# -------------------------


def lower_envelope(d: int, c: Any, delta: Any = 0, prec: Optional[int] = None):
    """(1 + (log 5 - 8/5 - delta) c)^d."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c, allow_zero=True))
    dd = _mp(ctx, to_fraction(delta))
    r = rho(ctx.prec)
    if not 0 <= dd <= r:
        raise InvalidInputError(f"delta must lie in [0, log 5 - 8/5], got {ctx.nstr(dd, 8)}")
    return (1 + (r - dd) * cc) ** d


def _upper(ctx, d: int, cf: Fraction):
    return (1 + _mp(ctx, UPPER_SLOPE * cf)) ** d


def upper_envelope(d: int, c: Any, prec: Optional[int] = None):
    """(1 + 3.75c)^d. Warns when c is outside (0, 0.02), where the bound is not claimed."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    cf = _slack(c, allow_zero=True)
    if not 0 < cf < UPPER_DOMAIN:
        logger.warning("upper_envelope: c=%s lies outside (0, 0.02); the upper bound is not claimed there", cf)
    return _upper(_ctx(prec), d, cf)


def erdos_furedi_envelopes(d: int, c: Any, prec: Optional[int] = None) -> Tuple[Any, Any]:
    """The earlier bounds (1 + c^2)^d and (1 + 4c)^d."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c, allow_zero=True))
    return (1 + cc * cc) ** d, (1 + 4 * cc) ** d


def threshold_dimension(
    c: Any, delta: Any, d_max: int = 1000, prec: Optional[int] = None
) -> Optional[Tuple[int, Any]]:
    """Smallest d <= d_max with A(d, choose_k(d,c), c)^{1/d} >= 1 + (0.0094 - delta) c.

    Returns (d, A^{1/d}) or None when no d up to d_max qualifies.
    """
    ctx = _ctx(prec)
    cf = _slack(c)
    base = 1 + _mp(ctx, (LOWER_RATE - to_fraction(delta)) * cf)
    for d in range(1, d_max + 1):
        a = guaranteed_edges(d, choose_k(d, cf), cf)
        a_mp = _mp(ctx, a)
        if a_mp >= base**d:
            return d, ctx.root(a_mp, d)
    return None


# -------------------------
# Upper-bound ingredients
# -------------------------


def rankin_asymptotic(alpha: Any, d: int, prec: Optional[int] = None):
    """sqrt(pi d^3 cos(2 alpha) / 2) / (sqrt(2) sin alpha)^(d-1)."""
    if d < 2:
        raise InvalidInputError(f"d must be >= 2, got {d}")
    ctx = _ctx(prec)
    al = _mp(ctx, alpha)
    if not 0 < al < ctx.pi / 4:
        raise InvalidInputError(f"alpha must lie in (0, pi/4), got {ctx.nstr(al, 12)}")
    numerator = ctx.sqrt(ctx.pi * ctx.mpf(d) ** 3 * ctx.cos(2 * al) / 2)
    return numerator / (ctx.sqrt(2) * ctx.sin(al)) ** (d - 1)


def jung_radius(d: int, prec: Optional[int] = None):
    """sqrt(d / (2(d+1))): radius of a ball covering any diameter-1 set in R^d."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    ctx = _ctx(prec)
    return ctx.sqrt(ctx.mpf(d) / (2 * (d + 1)))


def cap_half_angle(y: Any, prec: Optional[int] = None):
    """arcsin((1-y)/sqrt(2)), in (0, pi/4) for y in (0,1)."""
    ctx = _ctx(prec)
    yy = _mp(ctx, y)
    if not 0 < yy < 1:
        raise InvalidInputError(f"y must lie in (0,1), got {ctx.nstr(yy, 12)}")
    return ctx.asin((1 - yy) / ctx.sqrt(2))


def cap_count_bound(d: int, y: Any, prec: Optional[int] = None) -> CapCountBound:
    """Both forms of the cap-count bound: d^2 (1-y)^(-d) and d^2 (1-y)^(1-d)."""
    if d < 2:
        raise InvalidInputError(f"d must be >= 2, got {d}")
    ctx = _ctx(prec)
    yy = _mp(ctx, y)
    if not 0 < yy < 1:
        raise InvalidInputError(f"y must lie in (0,1), got {ctx.nstr(yy, 12)}")
    d2 = ctx.mpf(d) ** 2
    return CapCountBound(
        d=d,
        y=yy,
        statement_form=d2 * (1 - yy) ** (-d),
        proof_form=d2 * (1 - yy) ** (1 - d),
    )


def sine_ratio_margin(c: Any, prec: Optional[int] = None):
    """sin(pi/3 - 2c) / sin(pi/3 + c), checked against 1 - 1.744c.

    Smallest-to-largest side ratio of any triangle whose angles all lie
    below pi/3 + c.
    """
    cf = to_fraction(c)
    if not 0 < cf < SINE_RATIO_DOMAIN:
        raise InvalidInputError(f"c must lie in (0, 0.024), got {cf}")
    ctx = _ctx(prec)
    cc = _mp(ctx, cf)
    third = ctx.pi / 3
    value = ctx.sin(third - 2 * cc) / ctx.sin(third + cc)
    floor = 1 - _mp(ctx, SINE_RATIO_SLOPE * cf)
    if value < floor:
        raise CertificationError(f"sine ratio {ctx.nstr(value, 20)} < 1 - 1.744c = {ctx.nstr(floor, 20)}")
    return value


def cosine_margin(c: Any, prec: Optional[int] = None):
    """cos(pi/3 + c) - 1/2 + c; positive for every c > 0."""
    ctx = _ctx(prec)
    cc = _mp(ctx, _slack(c))
    return ctx.cos(ctx.pi / 3 + cc) - ctx.mpf(1) / 2 + cc


def upper_bound_chain(d: int, c: Any, prec: Optional[int] = None) -> UpperBoundChain:
    """d^2 (1-3.488c)^(-d) against (1+3.75c)^d, and the product condition behind it."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    cf = _slack(c)
    if MIN_DISTANCE_SLOPE * cf >= 1:
        raise InvalidInputError(f"need 3.488c < 1, got c={cf}")
    ctx = _ctx(prec)
    shrink = 1 - _mp(ctx, MIN_DISTANCE_SLOPE * cf)
    grow = 1 + _mp(ctx, UPPER_SLOPE * cf)
    cap_side = ctx.mpf(d) ** 2 * shrink ** (-d)
    envelope = grow**d
    product = grow * shrink
    return UpperBoundChain(
        d=d,
        c=cf,
        cap_side=cap_side,
        envelope=envelope,
        growth_product=product,
        product_condition=bool(product > 1),
        chain_holds=bool(cap_side < envelope),
    )


# -------------------------
# Report
# -------------------------

PROVENANCE = {
    "A_exact": "C(d,k) / sum_{j=ceil(ck)}^{k} C(k,j) C(d-k,k-j), exact rational",
    "A_ceil": "ceil(A_exact): edges the greedy hypergraph is guaranteed to reach",
    "a_guess": "c/5, maximiser of a -> H(a,c) for small c",
    "rho": "log 5 - 8/5",
    "lower_envelope": "(1 + (rho - delta) c)^d",
    "upper_envelope": "(1 + 3.75c)^d, claimed for c in (0, 0.02) and large d",
    "jung_radius": "sqrt(d / (2(d+1)))",
    "cap_half_angle": "arcsin((1-y)/sqrt(2)) with y = 3.488c",
    "rankin": "sqrt(pi d^3 cos(2 alpha) / 2) / (sqrt(2) sin alpha)^(d-1) at the cap half-angle",
    "cap_count": "d^2 (1-y)^(-d) (statement) and d^2 (1-y)^(1-d) (proof) with y = 3.488c",
}


def bound_report(
    d: int,
    c: Any,
    k: Optional[int] = None,
    delta: Any = 0,
    prec: Optional[int] = None,
    full_scan: bool = False,
) -> BoundReport:
    """Every bound quantity for one (d, c), with k chosen by ``choose_k`` unless given."""
    ctx = _ctx(prec)
    cf = _slack(c)
    if k is None:
        k = choose_k(d, cf, full_scan=full_scan)
    _check_dk(d, k)
    a_exact = guaranteed_edges(d, k, cf)
    a_mp = _mp(ctx, a_exact)
    cc = _mp(ctx, cf)

    provenance = dict(PROVENANCE)
    if not 0 < cf < UPPER_DOMAIN:
        provenance["upper_envelope"] += "; c outside (0, 0.02), not claimed"

    y = MIN_DISTANCE_SLOPE * cf
    aux = {}
    if y < 1:
        alpha = cap_half_angle(y, ctx.prec)
        aux["cap_half_angle"] = alpha
        if d >= 2:
            aux["rankin"] = rankin_asymptotic(alpha, d, ctx.prec)
            aux["cap_count"] = cap_count_bound(d, y, ctx.prec)

    return BoundReport(
        d=d,
        k=k,
        c=cf,
        threshold=ceil_product(cf, k),
        a_guess=cc / 5,
        rho=rho(ctx.prec),
        delta=to_fraction(delta),
        A_exact=a_exact,
        A_ceil=math.ceil(a_exact),
        A_per_dim_root=ctx.root(a_mp, d),
        lower_envelope=lower_envelope(d, cf, delta, ctx.prec),
        upper_envelope=_upper(ctx, d, cf),
        precision=ctx.prec,
        jung_radius=jung_radius(d, ctx.prec),
        provenance=provenance,
        **aux,
    )
