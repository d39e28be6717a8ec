"""
Certification engine.

Exhaustive angle certificates for finite point sets, exact pairwise
distance statistics, the smallest enclosing ball and the radial projection
onto its boundary sphere.

Angle decisions never trust a float near the threshold. A triple is first
judged in float64; when its cosine lies within ``BORDERLINE_TOLERANCE`` plus
a rounding bound scaled by (a + b + |A-C|^2) / (2 sqrt(ab)) of cos(alpha), it
is decided again exactly. The angle at apex B of the triple
(A, B, C) has cos = N / (2 sqrt(ab)) with a = |A-B|^2, b = |C-B|^2 and
N = a + b - |A-C|^2, and since x -> x|x| is increasing,

    cos(B) > cos(alpha)  <=>  N|N| / (4ab) > cos(alpha)|cos(alpha)|.

For integer points both sides are rationals as soon as cos(alpha)|cos(alpha)|
is rational; otherwise the right-hand side is enclosed in a rational
interval at growing precision until the interval separates.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from models.errors import BudgetExceededError, CertificationError, InvalidInputError
from models.schemas import (
    AngleCertificate,
    AngleMode,
    AngleThreshold,
    Ball,
    DistanceStats,
    EuclideanPointSet,
    LatticePointSet,
    MinMaxRatioCheck,
    PointSet,
    Verdict,
    real_context,
    real_to_fraction,
    to_fraction,
)
from models.settings import precision_bits, worker_threads
from services import bounds

logger = logging.getLogger(__name__)

BORDERLINE_TOLERANCE = 1e-9
# 32 units in the last place, relative to the magnitudes entering the cosine
FLOAT_ERROR_SCALE = 2.0**-48
ESCALATION_PRECISIONS = (256, 512)
MAX_ANGLE_TIE = 1e-12
MAX_POINTS = 20_000
PARALLEL_MIN_POINTS = 64
BALL_TOLERANCE = 1e-12

# alpha/pi (reduced) -> cos(alpha)|cos(alpha)|, for the angles where it is rational.
RATIONAL_SIGNED_SQUARES = {
    Fraction(0): Fraction(1),
    Fraction(1, 6): Fraction(3, 4),
    Fraction(1, 4): Fraction(1, 2),
    Fraction(1, 3): Fraction(1, 4),
    Fraction(1, 2): Fraction(0),
    Fraction(2, 3): Fraction(-1, 4),
    Fraction(3, 4): Fraction(-1, 2),
    Fraction(5, 6): Fraction(-3, 4),
    Fraction(1): Fraction(-1),
}

_DECIMAL = r"(\d+(?:\.\d*)?(?:e[+-]?\d+)?|\.\d+(?:e[+-]?\d+)?)"
_PI_SLACK = re.compile(rf"^pi/3([+-]){_DECIMAL}$")
_PI_MULTIPLE = re.compile(r"^(\d*)pi(?:/(\d+))?$")
_DEGREES = re.compile(rf"^{_DECIMAL}deg$")
_RADIANS = re.compile(rf"^{_DECIMAL}(?:rad)?$")


# -------------------------
# Thresholds
# -------------------------


def parse_alpha(spec: str, prec: Optional[int] = None) -> AngleThreshold:
    """Parse ``pi/3+<decimal>``, ``[p]pi[/q]``, ``<decimal>deg`` or ``<decimal>[rad]``."""
    text = spec.strip().lower().replace(" ", "")
    ctx = real_context(precision_bits() if prec is None else prec)
    slack: Optional[Fraction] = None
    turn: Optional[Fraction] = None  # alpha / pi, when exact
    if m := _PI_SLACK.match(text):
        value = to_fraction(m.group(2))
        slack = value if m.group(1) == "+" else -value
        radians = ctx.pi / 3 + ctx.mpf(slack.numerator) / slack.denominator
        if slack == 0:
            turn = Fraction(1, 3)
    elif m := _PI_MULTIPLE.match(text):
        if m.group(2) is not None and int(m.group(2)) == 0:
            raise InvalidInputError(f"zero denominator in angle {spec!r}")
        turn = Fraction(int(m.group(1) or 1), int(m.group(2) or 1))
        radians = ctx.pi * turn.numerator / turn.denominator
    elif m := _DEGREES.match(text):
        turn = to_fraction(m.group(1)) / 180
        radians = ctx.pi * turn.numerator / turn.denominator
    elif m := _RADIANS.match(text):
        value = to_fraction(m.group(1))
        radians = ctx.mpf(value.numerator) / value.denominator
    else:
        raise InvalidInputError(
            f"cannot parse angle {spec!r}; expected pi/3+<decimal>, <decimal>rad or <decimal>deg"
        )
    if not 0 < radians <= ctx.pi:
        raise InvalidInputError(f"angle {spec!r} must lie in (0, pi]")
    return AngleThreshold(
        spec=spec.strip(),
        radians=radians,
        cos_signed_square=RATIONAL_SIGNED_SQUARES.get(turn) if turn is not None else None,
        c=slack if slack is not None and slack > 0 else None,
    )


def _signed_square_enclosure(spec: str, prec: int) -> Tuple[Fraction, Fraction]:
    """Rational interval around cos(alpha)|cos(alpha)| of width 2^(1-prec)."""
    ctx = real_context(prec + 16)
    t = ctx.cos(parse_alpha(spec, prec + 16).radians)
    center = real_to_fraction(t * abs(t))
    slack = Fraction(1, 1 << prec)
    return center - slack, center + slack


# -------------------------
# Exact squared distances
# -------------------------


def _exact_squared_distances(points: PointSet) -> Tuple[List[List[Any]], np.ndarray]:
    """Pairwise squared distances as exact ints (lattice) or Fractions (real), plus a float copy."""
    n = len(points)
    if isinstance(points, LatticePointSet):
        bound = max((abs(x) for p in points.points for x in p), default=0)
        if bound < 1 << 20 and points.d < 1 << 20:
            x = np.asarray(points.points, dtype=np.int64).reshape(n, points.d)
            sq = (x * x).sum(axis=1)
            exact = (sq[:, None] + sq[None, :] - 2 * (x @ x.T)).tolist()
        else:
            exact = [[sum((u - v) * (u - v) for u, v in zip(p, q)) for q in points.points] for p in points.points]
    else:
        coords = [[real_to_fraction(x) for x in p] for p in points.points]
        exact = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                value = sum((u - v) * (u - v) for u, v in zip(coords[i], coords[j]))
                exact[i][j] = exact[j][i] = value
    for i in range(n):
        for j in range(i + 1, n):
            if exact[i][j] == 0:
                raise InvalidInputError(f"points {i} and {j} coincide")
    approx = np.array([[float(v) for v in row] for row in exact], dtype=np.float64).reshape(n, n)
    return exact, approx


# -------------------------
# Triple scan
# -------------------------


@dataclass(frozen=True)
class _ScanInput:
    exact: List[List[Any]]
    approx: np.ndarray
    lattice: bool
    strict: bool
    t_float: float
    signed_square: Optional[Fraction]
    enclosures: Tuple[Tuple[Fraction, Fraction], ...]


@dataclass
class _Partial:
    best: Optional[Tuple[float, int, int, int, float]] = None  # (cos, i, apex, k, rounding bound)
    borderline: int = 0
    undecided: int = 0
    violations: int = 0


def _signed_cos_square(scan: _ScanInput, i: int, j: int, k: int) -> Fraction:
    e = scan.exact
    a, b = e[j][i], e[j][k]
    num = a + b - e[i][k]
    return Fraction(num * abs(num)) / (4 * a * b)


def _decide(scan: _ScanInput, i: int, j: int, k: int) -> Optional[int]:
    """Sign of cos(angle ijk) - cos(alpha); None when undecidable at the top precision.

    Stored coordinates are exact (integers or dyadic reals), so 0 means an exact tie.
    """
    e = scan.exact
    a, b = e[j][i], e[j][k]
    num = a + b - e[i][k]
    lhs_num, lhs_den = num * abs(num), 4 * a * b
    if not scan.lattice:
        lhs = Fraction(lhs_num) / lhs_den
        lhs_num, lhs_den = lhs.numerator, lhs.denominator
    if scan.signed_square is not None:
        ss = scan.signed_square
        diff = lhs_num * ss.denominator - ss.numerator * lhs_den
        return (diff > 0) - (diff < 0)
    for lo, hi in scan.enclosures:
        if lhs_num * hi.denominator > hi.numerator * lhs_den:
            return 1
        if lhs_num * lo.denominator < lo.numerator * lhs_den:
            return -1
    return None


def _rounding_bound(a, b, opposite, scale):
    """Upper bound on the float64 error of (a + b - opposite) / scale."""
    return FLOAT_ERROR_SCALE * (a + b + opposite) / scale


def _pick(scan: _ScanInput, first, second):
    """The candidate with the larger angle; exact ties go to the smaller (apex, i, k)."""
    if first is None:
        return second
    if abs(first[0] - second[0]) > MAX_ANGLE_TIE + first[4] + second[4]:
        return first if first[0] < second[0] else second
    v1 = _signed_cos_square(scan, first[1], first[2], first[3])
    v2 = _signed_cos_square(scan, second[1], second[2], second[3])
    if v1 != v2:
        return first if v1 < v2 else second
    key1, key2 = (first[2], first[1], first[3]), (second[2], second[1], second[3])
    return first if key1 <= key2 else second


def _scan(scan: _ScanInput, apexes: range) -> _Partial:
    s = scan.approx
    n = s.shape[0]
    part = _Partial()
    for j in apexes:
        others = np.delete(np.arange(n), j)
        m = others.size
        row = s[j, others]
        block = max(1, (1 << 20) // max(m, 1))
        for p0 in range(0, m - 1, block):
            p1 = min(m - 1, p0 + block)
            rows = np.arange(p0, p1)
            upper = np.arange(m)[None, :] > rows[:, None]
            a = row[p0:p1, None]
            b = row[None, :]
            opposite = s[np.ix_(others[p0:p1], others)]
            with np.errstate(invalid="ignore", divide="ignore"):
                scale = 2.0 * np.sqrt(a * b)
                cos = (a + b - opposite) / scale
                rounding = _rounding_bound(a, b, opposite, scale)
            cos = np.where(upper, cos, np.inf)
            margin = cos - scan.t_float
            tolerance = BORDERLINE_TOLERANCE + rounding
            part.violations += int(np.count_nonzero(upper & (margin < -tolerance)))
            for r, q in np.argwhere(upper & (np.abs(margin) <= tolerance)):
                i, k = int(others[p0 + r]), int(others[q])
                part.borderline += 1
                sign = _decide(scan, i, j, k)
                if sign is None:
                    part.undecided += 1
                elif sign < 0 or (sign == 0 and scan.strict):
                    part.violations += 1
            r, q = np.unravel_index(int(np.argmin(cos)), cos.shape)
            near = [(r, q)]
            if rounding[r, q] > MAX_ANGLE_TIE:
                # the float minimum may be off by more than the tie window
                near = np.argwhere(upper & (cos - rounding <= cos[r, q] + rounding[r, q] + MAX_ANGLE_TIE))
            for r, q in near:
                candidate = (float(cos[r, q]), int(others[p0 + r]), j, int(others[q]), float(rounding[r, q]))
                part.best = _pick(scan, part.best, candidate)
    return part


def _merge(scan: _ScanInput, parts: Sequence[_Partial]) -> _Partial:
    total = _Partial()
    for part in parts:
        total.borderline += part.borderline
        total.undecided += part.undecided
        total.violations += part.violations
        if part.best is not None:
            total.best = _pick(scan, total.best, part.best)
    return total


def _run_scan(scan: _ScanInput, n: int, threads: int) -> _Partial:
    if threads <= 1 or n < PARALLEL_MIN_POINTS:
        return _scan(scan, range(n))
    chunks = threads * 4
    bounds_ = np.linspace(0, n, chunks + 1).astype(int)
    ranges = [range(int(lo), int(hi)) for lo, hi in zip(bounds_[:-1], bounds_[1:]) if hi > lo]
    logger.debug("triple scan over %s apexes split into %s ranges on %s workers", n, len(ranges), threads)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_scan, [scan] * len(ranges), ranges))
    return _merge(scan, parts)


def _prepare(points: PointSet, threshold: AngleThreshold, mode: AngleMode, prec: int) -> _ScanInput:
    exact, approx = _exact_squared_distances(points)
    enclosures: Tuple[Tuple[Fraction, Fraction], ...] = ()
    if threshold.cos_signed_square is None:
        enclosures = tuple(
            _signed_square_enclosure(threshold.spec, p) for p in sorted({prec, *ESCALATION_PRECISIONS}) if p >= prec
        )
    return _ScanInput(
        exact=exact,
        approx=approx,
        lattice=isinstance(points, LatticePointSet),
        strict=mode == AngleMode.STRICT,
        t_float=float(real_context(prec).cos(threshold.radians)),
        signed_square=threshold.cos_signed_square,
        enclosures=enclosures,
    )


def _angle_ok(scan: _ScanInput, i: int, j: int, k: int) -> bool:
    s = scan.approx
    a, b, opposite = float(s[j, i]), float(s[j, k]), float(s[i, k])
    scale = 2.0 * math.sqrt(a * b)
    margin = (a + b - opposite) / scale - scan.t_float
    tolerance = BORDERLINE_TOLERANCE + _rounding_bound(a, b, opposite, scale)
    if margin > tolerance:
        return True
    if margin < -tolerance:
        return False
    sign = _decide(scan, i, j, k)
    if sign is None:
        raise CertificationError(f"angle at {j} in triple ({i},{j},{k}) is undecided at {ESCALATION_PRECISIONS[-1]} bits")
    return sign > 0 or (sign == 0 and not scan.strict)


def violating_triples(
    points: PointSet,
    alpha: Union[AngleThreshold, str],
    mode: AngleMode = AngleMode.STRICT,
    prec: Optional[int] = None,
) -> List[Tuple[int, int, int]]:
    """Sorted index triples with at least one angle failing the threshold."""
    prec = precision_bits() if prec is None else prec
    threshold = parse_alpha(alpha, prec) if isinstance(alpha, str) else alpha
    n = len(points)
    if n < 3:
        return []
    scan = _prepare(points, threshold, AngleMode(mode), prec)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                if not (_angle_ok(scan, j, i, k) and _angle_ok(scan, i, j, k) and _angle_ok(scan, i, k, j)):
                    out.append((i, j, k))
    return out


def max_angle(
    points: PointSet,
    alpha: Union[AngleThreshold, str],
    mode: AngleMode = AngleMode.STRICT,
    prec: Optional[int] = None,
    threads: Optional[int] = None,
) -> AngleCertificate:
    """Certify that every angle among the points is below (strict) or at most (weak) alpha."""
    prec = precision_bits() if prec is None else prec
    threads = worker_threads() if threads is None else threads
    threshold = parse_alpha(alpha, prec) if isinstance(alpha, str) else alpha
    mode = AngleMode(mode)
    n = len(points)
    if n < 3:
        raise InvalidInputError(f"an angle needs three points, got {n}")
    if n > MAX_POINTS:
        raise BudgetExceededError(f"{n} points exceed the verification budget of {MAX_POINTS}")

    scan = _prepare(points, threshold, mode, prec)
    exact = scan.exact
    ctx = real_context(prec)
    logger.info("scanning %s apex-triples of %s points at alpha=%s (%s)", n * (n - 1) * (n - 2) // 2, n, threshold.spec, mode.value)
    result = _run_scan(scan, n, threads)

    _, i, j, k, _ = result.best
    a, b = exact[j][i], exact[j][k]
    num = a + b - exact[i][k]
    cos_value = _to_mp(ctx, num) / (2 * ctx.sqrt(_to_mp(ctx, a) * _to_mp(ctx, b)))
    cos_value = max(min(cos_value, ctx.mpf(1)), ctx.mpf(-1))
    if result.undecided:
        logger.error("%s triples stayed undecided at %s bits", result.undecided, ESCALATION_PRECISIONS[-1])
    clean = result.violations == 0 and result.undecided == 0
    return AngleCertificate(
        n=n,
        alpha_spec=threshold.spec,
        alpha_threshold=threshold.radians,
        mode=mode,
        max_angle=ctx.acos(cos_value),
        argmax_triple=(i, j, k),
        borderline_count=result.borderline,
        undecided_count=result.undecided,
        violation_count=result.violations,
        verdict=Verdict.PASS if clean else Verdict.FAIL,
    )


def _to_mp(ctx, value: Any):
    if isinstance(value, Fraction):
        return ctx.mpf(value.numerator) / value.denominator
    return ctx.mpf(value)


# -------------------------
# Distances
# -------------------------


def distance_stats(points: PointSet, prec: Optional[int] = None) -> DistanceStats:
    """Exact minimum and maximum squared distances with witness pairs."""
    n = len(points)
    if n < 2:
        raise InvalidInputError(f"need at least two points, got {n}")
    exact, _ = _exact_squared_distances(points)
    lo = hi = (exact[0][1], (0, 1))
    for i in range(n):
        for j in range(i + 1, n):
            v = exact[i][j]
            if v < lo[0]:
                lo = (v, (i, j))
            if v > hi[0]:
                hi = (v, (i, j))
    if isinstance(points, LatticePointSet):
        ctx = real_context(precision_bits() if prec is None else prec)
        min_sq, max_sq = lo[0], hi[0]
    else:
        ctx = real_context(points.precision if prec is None else prec)
        min_sq, max_sq = _to_mp(ctx, lo[0]), _to_mp(ctx, hi[0])
    ratio = ctx.sqrt(_to_mp(ctx, Fraction(lo[0]) / Fraction(hi[0])))
    return DistanceStats(min_sq=min_sq, max_sq=max_sq, argmin_pair=lo[1], argmax_pair=hi[1], ratio=ratio)


def diameter(points: PointSet, prec: Optional[int] = None):
    stats = distance_stats(points, prec)
    return stats.ratio.context.sqrt(stats.max_sq)


def check_min_max_ratio(points: PointSet, c: Any, prec: Optional[int] = None) -> MinMaxRatioCheck:
    """Smallest-to-largest distance ratio against 1 - 3.488c.

    Any set whose angles are all below pi/3 + c with c < 0.024 has ratio
    above that floor, so a failure locates an angle violation.
    """
    cf = to_fraction(c)
    if not 0 < cf < bounds.SINE_RATIO_DOMAIN:
        logger.warning("check_min_max_ratio: c=%s lies outside (0, 0.024); the floor is not implied there", cf)
    stats = distance_stats(points, prec)
    ctx = stats.ratio.context
    floor = 1 - _to_mp(ctx, bounds.MIN_DISTANCE_SLOPE * cf)
    margin = stats.ratio - floor
    return MinMaxRatioCheck(
        c=cf,
        ratio=stats.ratio,
        threshold=floor,
        margin=margin,
        verdict=Verdict.PASS if margin > 0 else Verdict.FAIL,
    )


# -------------------------
# Enclosing ball
# -------------------------


def _as_float_array(points: PointSet) -> np.ndarray:
    return np.array([[float(x) for x in p] for p in points.points], dtype=np.float64).reshape(len(points), points.d)


def _circumball(pts: np.ndarray, support: List[int], weights: bool = False):
    """Smallest sphere through the support points, centred in their affine hull."""
    base = pts[support[0]]
    if len(support) == 1:
        return (base.copy(), 0.0, np.ones(1)) if weights else (base.copy(), 0.0)
    u = pts[support[1:]] - base
    gram = u @ u.T
    rhs = 0.5 * np.sum(u * u, axis=1)
    lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = base + lam @ u
    r2 = float(np.max(np.sum((pts[support] - center) ** 2, axis=1)))
    if weights:
        return center, r2, np.concatenate(([1.0 - lam.sum()], lam))
    return center, r2


def _hull_circumball(pts: np.ndarray, idx: List[int]):
    """The circumball of idx when every point lies on it and the centre is inside their hull.

    Such a ball is the smallest one containing idx, with all of idx on its boundary.
    """
    center, r2, bary = _circumball(pts, idx, weights=True)
    dist2 = np.sum((pts[idx] - center) ** 2, axis=1)
    if np.all(bary >= -BALL_TOLERANCE) and np.all(np.abs(dist2 - r2) <= 2 * BALL_TOLERANCE * max(r2, 1.0)):
        return center, r2
    return None


def _inside(pts: np.ndarray, idx: int, center: Optional[np.ndarray], r2: float) -> bool:
    if center is None:
        return False
    dist2 = float(np.sum((pts[idx] - center) ** 2))
    return dist2 <= r2 * (1 + 2 * BALL_TOLERANCE) + 1e-30


def _move_to_front(pts: np.ndarray, order: List[int], end: int, support: List[int], dim: int):
    # all remaining points extreme (a simplex, say): skip the 2^n recursion
    if end and len(support) + end <= dim + 1:
        found = _hull_circumball(pts, support + order[:end])
        if found is not None:
            return found
    center, r2 = _circumball(pts, support) if support else (None, -1.0)
    if len(support) == dim + 1:
        return center, r2
    for pos in range(end):
        idx = order[pos]
        if not _inside(pts, idx, center, r2):
            center, r2 = _move_to_front(pts, order, pos, support + [idx], dim)
            order.insert(0, order.pop(pos))
    return center, r2


def smallest_enclosing_ball(points: PointSet, seed: int = 0) -> Ball:
    """Minimum enclosing ball by move-to-front recursion on a shuffled order.

    Checks Jung's inequality radius <= jung_radius(m) * diameter, where m is
    the dimension of the affine hull bound min(d, n-1).
    """
    n = len(points)
    if n < 1:
        raise InvalidInputError("need at least one point")
    pts = _as_float_array(points)
    order = [int(i) for i in np.random.default_rng(seed).permutation(n)]
    center, r2 = _move_to_front(pts, order, n, [], points.d)
    radius = math.sqrt(max(r2, 0.0))
    dist = np.sqrt(np.sum((pts - center) ** 2, axis=1))
    support = tuple(int(i) for i in np.flatnonzero(np.abs(dist - radius) <= 1e-9 * max(radius, 1.0)))
    if n >= 2:
        diff = pts[:, None, :] - pts[None, :, :]
        diam = float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))
        jung = float(bounds.jung_radius(min(points.d, n - 1)))
        if radius > jung * diam + 1e-9 * max(1.0, diam):
            raise CertificationError(f"radius {radius} exceeds Jung's bound {jung * diam}")
    return Ball(center=tuple(float(x) for x in center), radius=radius, support=support)


def project_to_sphere(points: PointSet, ball: Ball, prec: Optional[int] = None) -> EuclideanPointSet:
    """Push every point radially from the centre onto the ball's boundary.

    Checks the isosceles-triangle consequence: a pair farther apart than the
    radius moves strictly farther apart unless both points already lie on
    the sphere.
    """
    if isinstance(points, EuclideanPointSet) and prec is None:
        prec = points.precision
    ctx = real_context(precision_bits() if prec is None else prec)
    center = [ctx.mpf(x) for x in ball.center]
    r = ctx.mpf(ball.radius)
    tol = r * ctx.mpf("1e-9")
    source = [[ctx.mpf(x) for x in p] for p in points.points]
    images = []
    on_sphere = []
    for idx, p in enumerate(source):
        v = [x - o for x, o in zip(p, center)]
        norm = ctx.sqrt(ctx.fsum(x * x for x in v))
        if norm <= tol:
            raise InvalidInputError(f"point {idx} sits at the centre; its ray is undefined")
        if norm > r + tol:
            raise InvalidInputError(f"point {idx} lies outside the ball")
        images.append([o + x * (r / norm) for o, x in zip(center, v)])
        on_sphere.append(norm >= r - tol)

    def dist(u, v):
        return ctx.sqrt(ctx.fsum((x - y) ** 2 for x, y in zip(u, v)))

    for m in range(len(source)):
        for k in range(m + 1, len(source)):
            before = dist(source[m], source[k])
            if before <= r:
                continue
            after = dist(images[m], images[k])
            if on_sphere[m] and on_sphere[k]:
                if after < before - tol:
                    raise CertificationError(f"projection shrank pair ({m},{k})")
            elif not after > before:
                raise CertificationError(f"projection did not lengthen pair ({m},{k})")
    return EuclideanPointSet(d=points.d, points=images, precision=ctx.prec)
