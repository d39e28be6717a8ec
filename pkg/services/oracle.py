"""
Ground truth for small instances.

Regular simplices (the extremal equilateral sets), the Gram-matrix rank
test behind the bound "at most d+1 equidistant points", exhaustive search
for the largest angle-constrained subset of a candidate set, and a
randomized check of the isosceles-triangle lemma used by the projection
argument.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from models.errors import BudgetExceededError, CertificationError, InvalidInputError
from models.schemas import (
    AngleMode,
    AngleThreshold,
    EuclideanPointSet,
    LatticePointSet,
    LemmaCheckReport,
    PointSet,
    RankReport,
    SearchMethod,
    SubsetSearchResult,
    Verdict,
    real_context,
)
from models.settings import precision_bits
from services.core import colex_masks
from services.verify import violating_triples

logger = logging.getLogger(__name__)

BNB_MAX_CANDIDATES = 64
NAIVE_MAX_CANDIDATES = 22
MAX_BUILTIN_POINTS = 1 << 16
RANK_RELATIVE_THRESHOLD = 1e-8
LEMMA_BORDERLINE = 1e-12
LEMMA_RECHECK_BITS = 256
LEMMA_CHUNK = 100_000


# -------------------------
# Simplices and candidate families
# -------------------------


def regular_simplex(d: int, prec: Optional[int] = None) -> EuclideanPointSet:
    """The d+1 points e_i / sqrt(2) of R^(d+1); pairwise distance 1."""
    if d < 1:
        raise InvalidInputError(f"dimension must be positive, got {d}")
    prec = precision_bits() if prec is None else prec
    ctx = real_context(prec)
    h = 1 / ctx.sqrt(2)
    zero = ctx.mpf(0)
    points = [[h if m == i else zero for m in range(d + 1)] for i in range(d + 1)]
    return EuclideanPointSet(d=d + 1, points=points, precision=prec)


def simplex_in_dimension(d: int, prec: Optional[int] = None) -> EuclideanPointSet:
    """regular_simplex(d) expressed in an orthonormal basis of its own hyperplane, so in R^d.

    Basis vectors u_j = (1,...,1,-j,0,...,0) / sqrt(j(j+1)), with j ones.
    """
    if d < 1:
        raise InvalidInputError(f"dimension must be positive, got {d}")
    prec = precision_bits() if prec is None else prec
    ctx = real_context(prec)
    h = 1 / ctx.sqrt(2)
    points = []
    for i in range(d + 1):
        row = []
        for j in range(1, d + 1):
            scale = h / ctx.sqrt(j * (j + 1))
            if i < j:
                row.append(scale)
            elif i == j:
                row.append(-j * scale)
            else:
                row.append(ctx.mpf(0))
        points.append(row)
    return EuclideanPointSet(d=d, points=points, precision=prec)


def candidate_set(spec: str, prec: Optional[int] = None) -> PointSet:
    """Builtin families: ``cube:d``, ``simplex:d`` and ``weight:k:d``."""
    parts = spec.strip().lower().split(":")
    try:
        args = [int(x) for x in parts[1:]]
    except ValueError as exc:
        raise InvalidInputError(f"bad candidate spec {spec!r}") from exc
    kind = parts[0]
    if kind == "cube" and len(args) == 1:
        (d,) = args
        if d < 1 or 1 << d > MAX_BUILTIN_POINTS:
            raise InvalidInputError(f"cube dimension must lie in 1..{MAX_BUILTIN_POINTS.bit_length() - 1}")
        return LatticePointSet(d=d, points=[[mask >> m & 1 for m in range(d)] for mask in range(1 << d)])
    if kind == "simplex" and len(args) == 1:
        return regular_simplex(args[0], prec)
    if kind == "weight" and len(args) == 2:
        k, d = args
        if math.comb(d, k) > MAX_BUILTIN_POINTS:
            raise BudgetExceededError(f"C({d},{k}) candidates exceed {MAX_BUILTIN_POINTS}")
        return LatticePointSet(d=d, points=[[mask >> m & 1 for m in range(d)] for mask in colex_masks(d, k)])
    raise InvalidInputError(f"unknown candidate spec {spec!r}; expected cube:d, simplex:d or weight:k:d")


# -------------------------
# Equidistant families
# -------------------------


def equidistant_rank_check(points: PointSet, base_index: int = 0, tol: float = 1e-9) -> RankReport:
    """Rank of the Gram matrix of a_i - a_base for a unit-distance family.

    The Gram matrix must be (I + J) / 2, which is positive definite, so the
    difference vectors are independent and there are at most d of them.
    """
    m = len(points)
    if not 0 <= base_index < m:
        raise InvalidInputError(f"base index {base_index} outside 0..{m - 1}")
    if m < 2:
        raise InvalidInputError("need at least two points")
    coords = np.array([[float(x) for x in p] for p in points.points], dtype=np.float64)
    others = [i for i in range(m) if i != base_index]
    diffs = coords[others] - coords[base_index]
    gram = diffs @ diffs.T
    n = len(others)
    expected = (np.eye(n) + np.ones((n, n))) / 2
    deviation = np.abs(gram - expected)
    if deviation.max() > tol:
        r, q = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        i, j = others[r], others[q]
        what = f"|a_{i} - a_{base_index}|^2" if i == j else f"<a_{i} - a_{base_index}, a_{j} - a_{base_index}>"
        raise InvalidInputError(f"{what} = {gram[r, q]:.12g}, expected {expected[r, q]:g}")
    eig = np.linalg.eigvalsh(gram)
    top = float(eig.max())
    rank = int(np.count_nonzero(eig > RANK_RELATIVE_THRESHOLD * top))
    return RankReport(
        n=n,
        d=points.d,
        rank=rank,
        full_rank=rank == n,
        min_eigenvalue=float(eig.min()),
        max_eigenvalue=top,
        gram_deviation=float(deviation.max()),
    )


# -------------------------
# Maximum angle-constrained subsets
# -------------------------


class _ConflictSearch:
    """Maximum independent sets of a 3-uniform conflict hypergraph on bitmasks."""

    def __init__(self, n: int, triples: Sequence[Tuple[int, int, int]]):
        self.n = n
        self.triples = [1 << i | 1 << j | 1 << k for i, j, k in triples]
        # pairs[v]: masks {a, b} with {v, a, b} a conflict
        self.pairs: List[List[int]] = [[] for _ in range(n)]
        for i, j, k in triples:
            self.pairs[i].append(1 << j | 1 << k)
            self.pairs[j].append(1 << i | 1 << k)
            self.pairs[k].append(1 << i | 1 << j)
        self.order = sorted(range(n), key=lambda v: (-len(self.pairs[v]), v))
        self.nodes = 0

    def conflicts(self, chosen: int, v: int) -> bool:
        return any(chosen & pm == pm for pm in self.pairs[v])

    def _in_conflict(self, a: int, b: int, v: int) -> bool:
        target = 1 << a | 1 << b
        return target in self.pairs[v]

    def clique_bound(self, cands: Sequence[int]) -> int:
        """Greedy cover by groups whose every triple conflicts; an independent set takes at most 2 from each."""
        groups: List[List[int]] = []
        for v in cands:
            for group in groups:
                if all(self._in_conflict(a, b, v) for a, b in itertools.combinations(group, 2)):
                    group.append(v)
                    break
            else:
                groups.append([v])
        return sum(min(len(g), 2) for g in groups)

    def extend(self, chosen: int, size: int, cands: List[int], best: int, goal: int) -> int:
        self.nodes += 1
        if size > best:
            best = size
        if best >= goal or not cands:
            return best
        if size + len(cands) <= best or size + self.clique_bound(cands) <= best:
            return best
        v, rest = cands[0], cands[1:]
        grown = chosen | 1 << v
        best = self.extend(grown, size + 1, [u for u in rest if not self.conflicts(grown, u)], best, goal)
        return self.extend(chosen, size, rest, best, goal)

    def maximum(self) -> Tuple[int, ...]:
        """Size-maximal independent set, lexicographically smallest among those."""
        target = self.extend(0, 0, list(self.order), 0, self.n)
        chosen, size, picked = 0, 0, []
        for v in range(self.n):
            if size == target:
                break
            if self.conflicts(chosen, v):
                continue
            grown = chosen | 1 << v
            pool = [u for u in self.order if u > v and not self.conflicts(grown, u)]
            if self.extend(grown, size + 1, pool, size, target) >= target:
                chosen, size = grown, size + 1
                picked.append(v)
        return tuple(picked)

    def naive(self) -> Tuple[int, ...]:
        for size in range(self.n, -1, -1):
            for combo in itertools.combinations(range(self.n), size):
                mask = sum(1 << v for v in combo)
                if all(mask & t != t for t in self.triples):
                    return combo
        return ()


def brute_force_max_subset(
    candidates: PointSet,
    alpha: Union[AngleThreshold, str],
    mode: AngleMode = AngleMode.STRICT,
    method: SearchMethod = SearchMethod.BNB,
    prec: Optional[int] = None,
) -> SubsetSearchResult:
    """Largest subset whose triples all satisfy the threshold; ties go to the lexicographically smallest."""
    method = SearchMethod(method)
    n = len(candidates)
    cap = {
        SearchMethod.BNB: BNB_MAX_CANDIDATES,
        SearchMethod.NAIVE: NAIVE_MAX_CANDIDATES,
        SearchMethod.BOTH: NAIVE_MAX_CANDIDATES,
    }[method]
    if n > cap:
        raise BudgetExceededError(f"{n} candidates exceed the {method.value} budget of {cap}")

    triples = violating_triples(candidates, alpha, mode, prec)
    logger.info("conflict hypergraph: %s candidates, %s violating triples", n, len(triples))
    search = _ConflictSearch(n, triples)
    if method == SearchMethod.NAIVE:
        indices = search.naive()
    else:
        indices = search.maximum()
        logger.debug("branch and bound visited %s nodes", search.nodes)
        if method == SearchMethod.BOTH:
            naive = search.naive()
            if naive != indices:
                raise CertificationError(f"branch and bound found {indices}, enumeration found {naive}")
    return SubsetSearchResult(
        size=len(indices),
        indices=indices,
        method=method,
        candidates=n,
        conflict_triples=len(triples),
    )


# -------------------------
# Isosceles lemma
# -------------------------


def _recheck(theta: float, s: float, u: float) -> Tuple[bool, bool]:
    """(kept, counterexample) recomputed at high precision; s and u are exact dyadics."""
    ctx = real_context(LEMMA_RECHECK_BITS)
    cos_t = ctx.cos(ctx.mpf(theta))
    mn = ctx.mpf(s) ** 2 + ctx.mpf(u) ** 2 - 2 * ctx.mpf(s) * ctx.mpf(u) * cos_t
    ab = 2 - 2 * cos_t
    kept = mn > 1
    return kept, kept and not ab > mn


def isosceles_lemma_check(trials: int, seed: int = 0, apex_angle: Optional[float] = None) -> LemmaCheckReport:
    """Sample isosceles triangles and interior points M on AC, N on BC.

    With C at the origin, |CA| = |CB| = 1 and apex angle theta at C, the
    lemma claims |AB| > |MN| whenever |MN| > |AC|. M and N stay strictly
    inside their sides; at the endpoints the two sides of the inequality
    coincide.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be positive, got {trials}")
    if apex_angle is not None and not 0 < apex_angle < math.pi:
        raise InvalidInputError(f"apex angle must lie in (0, pi), got {apex_angle}")
    rng = np.random.default_rng(seed)
    kept = borderline = counterexamples = 0
    first: Optional[Dict[str, float]] = None
    scale = float(1 << 53)
    done = 0
    while done < trials:
        size = min(LEMMA_CHUNK, trials - done)
        done += size
        if apex_angle is None:
            theta = (rng.integers(1, 1 << 53, size) / scale) * math.pi
        else:
            theta = np.full(size, float(apex_angle))
        s = rng.integers(1, 1 << 53, size) / scale
        u = rng.integers(1, 1 << 53, size) / scale
        cos_t = np.cos(theta)
        mn = s * s + u * u - 2 * s * u * cos_t
        ab = 2 - 2 * cos_t
        keep = mn > 1
        bad = keep & ~(ab > mn)
        near = (np.abs(mn - 1) <= LEMMA_BORDERLINE) | (np.abs(ab - mn) <= LEMMA_BORDERLINE)
        for idx in np.flatnonzero(near):
            borderline += 1
            keep[idx], bad[idx] = _recheck(float(theta[idx]), float(s[idx]), float(u[idx]))
        kept += int(np.count_nonzero(keep))
        hits = np.flatnonzero(bad)
        counterexamples += int(hits.size)
        if hits.size and first is None:
            idx = int(hits[0])
            first = {
                "theta": float(theta[idx]),
                "s": float(s[idx]),
                "u": float(u[idx]),
                "mn": math.sqrt(float(mn[idx])),
                "ab": math.sqrt(float(ab[idx])),
            }
    if counterexamples:
        logger.error("isosceles lemma: %s counterexamples in %s trials", counterexamples, trials)
    return LemmaCheckReport(
        trials=trials,
        seed=seed,
        kept=kept,
        borderline=borderline,
        counterexamples=counterexamples,
        first_counterexample=first,
        vacuous=kept == 0,
        verdict=Verdict.PASS if counterexamples == 0 else Verdict.FAIL,
    )
