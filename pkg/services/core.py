"""
Subset and integer-vector primitives.

Subsets of {1..d} are Python integers used as bit vectors (bit m-1 stands
for element m), so intersections are a bitwise AND plus a popcount.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence, Tuple

from models.errors import InvalidInputError
from models.schemas import KSubset


def intersection_size(a: KSubset, b: KSubset) -> int:
    """|A ∩ B| for two subsets of the same ground set."""
    if a.d != b.d:
        raise InvalidInputError(f"dimension mismatch: {a.d} vs {b.d}")
    return (a.bits & b.bits).bit_count()


def characteristic_vector(subset: KSubset) -> Tuple[int, ...]:
    """0/1 vector whose m-th coordinate is 1 iff m belongs to the subset."""
    bits = subset.bits
    return tuple(bits >> m & 1 for m in range(subset.d))


def squared_distance(u: Sequence[int], v: Sequence[int]) -> int:
    if len(u) != len(v):
        raise InvalidInputError(f"dimension mismatch: {len(u)} vs {len(v)}")
    return sum((x - y) * (x - y) for x, y in zip(u, v))


def colex_masks(d: int, k: int) -> Iterator[int]:
    """All k-subsets of {1..d} as bit masks in colexicographic order.

    Colex order on k-subsets coincides with numeric order of their masks,
    so this is Gosper's next-permutation-of-bits loop.
    """
    if not 1 <= k <= d:
        raise InvalidInputError(f"need 1 <= k <= d, got k={k}, d={d}")
    x = (1 << k) - 1
    limit = 1 << d
    while x < limit:
        yield x
        low = x & -x
        ripple = x + low
        x = (((ripple ^ x) >> 2) // low) | ripple


def colex_unrank(rank: int, k: int, d: int) -> int:
    """Mask of the k-subset of {1..d} with the given colex rank (0-based)."""
    if not 0 <= rank < math.comb(d, k):
        raise InvalidInputError(f"rank {rank} outside 0..C({d},{k})-1")
    mask = 0
    c = d - 1
    for i in range(k, 0, -1):
        # largest position c with C(c, i) <= rank
        while math.comb(c, i) > rank:
            c -= 1
        rank -= math.comb(c, i)
        mask |= 1 << c
        c -= 1
    return mask


def colex_rank(mask: int) -> int:
    positions = [m for m in range(mask.bit_length()) if mask >> m & 1]
    return sum(math.comb(c, i + 1) for i, c in enumerate(positions))
