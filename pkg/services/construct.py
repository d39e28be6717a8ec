"""
Greedy bounded-intersection hypergraphs and their hypercube embedding.

The greedy scan walks k-subsets of {1..d} in a fixed order and keeps a
subset when it meets every kept subset in fewer than ceil(ck) elements.
Each kept subset rules out at most ``bad_denominator(d, k, c)`` candidates,
so a complete scan keeps at least C(d,k) / bad_denominator of them.
The characteristic vectors of the kept subsets are then a point set whose
angles are all below pi/3 + c.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Iterator, List, Optional

import numpy as np

from models.errors import BudgetExceededError, CertificationError, InvalidInputError
from models.schemas import (
    BoundedIntersectionHypergraph,
    ConstructionParams,
    ConstructionResult,
    EnumerationOrder,
    KSubset,
    LatticePointSet,
)
from models.settings import enumeration_budget
from services import bounds
from services.core import characteristic_vector, colex_masks, colex_unrank

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 1_000_000


def _candidates(d: int, k: int, order: EnumerationOrder, seed: Optional[int], budget: int) -> Iterator[int]:
    total = math.comb(d, k)
    if order == EnumerationOrder.COLEX:
        for scanned, mask in enumerate(colex_masks(d, k)):
            if scanned >= budget:
                return
            yield mask
        return
    rng = np.random.default_rng(seed)
    if total <= budget:
        ranks = rng.permutation(total)
    else:
        # numpy draws ranks as int64
        if total >= 1 << 63:
            raise InvalidInputError(f"random order needs C({d},{k}) < 2^63")
        ranks = rng.choice(total, size=budget, replace=False)
    for rank in ranks:
        yield colex_unrank(int(rank), k, d)


def greedy_hypergraph(
    params: ConstructionParams,
    order: EnumerationOrder = EnumerationOrder.COLEX,
    seed: Optional[int] = None,
    budget: Optional[int] = None,
) -> BoundedIntersectionHypergraph:
    """Accept each candidate that meets every accepted edge in at most threshold-1 elements.

    A scan cut short by ``budget`` returns what it has with ``complete=False``.
    """
    order = EnumerationOrder(order)
    budget = enumeration_budget() if budget is None else budget
    d, k, limit = params.d, params.k, params.threshold - 1
    total = math.comb(d, k)
    if order == EnumerationOrder.RANDOM and seed is None:
        seed = 0

    logger.info("greedy scan d=%s k=%s cutoff=%s over %s candidates (%s order)", d, k, params.threshold, total, order.value)
    accepted: List[int] = []
    scanned = 0
    for mask in _candidates(d, k, order, seed, budget):
        scanned += 1
        if all((mask & edge).bit_count() <= limit for edge in accepted):
            accepted.append(mask)
        if scanned % PROGRESS_EVERY == 0:
            logger.debug("scanned %s candidates, %s accepted", scanned, len(accepted))

    complete = scanned == total
    if not complete:
        logger.warning("budget of %s candidates stopped the scan at %s of %s", budget, scanned, total)

    graph = BoundedIntersectionHypergraph(
        params=params,
        edges=tuple(KSubset(d=d, bits=mask, k=k) for mask in accepted),
        complete=complete,
        candidates_scanned=scanned,
    )
    if complete:
        guarantee = math.ceil(bounds.guaranteed_edges(d, k, params.c))
        if len(graph) < guarantee:
            raise CertificationError(f"complete scan kept {len(graph)} edges, below the guaranteed {guarantee}")
    logger.info("greedy scan kept %s edges", len(graph))
    return graph


def embed_hypercube(graph: BoundedIntersectionHypergraph) -> LatticePointSet:
    """Characteristic vectors of the edges, in acceptance order."""
    return LatticePointSet(
        d=graph.params.d,
        points=tuple(characteristic_vector(edge) for edge in graph.edges),
    )


def construct_point_set(
    d: int,
    c: Any,
    k: Optional[int] = None,
    order: EnumerationOrder = EnumerationOrder.COLEX,
    seed: Optional[int] = None,
    budget: Optional[int] = None,
    delta: Any = 0,
    prec: Optional[int] = None,
    full_scan: bool = False,
    allow_partial: bool = False,
) -> ConstructionResult:
    """choose_k, greedy scan, embedding and the matching bound report.

    When C(d,k) exceeds the enumeration budget the call is refused before any
    scanning unless ``allow_partial`` is set.
    """
    if d < 1:
        raise InvalidInputError(f"dimension must be positive, got {d}")
    report = bounds.bound_report(d, c, k=k, delta=delta, prec=prec, full_scan=full_scan)
    budget = enumeration_budget() if budget is None else budget
    total = math.comb(d, report.k)
    if total > budget and not allow_partial:
        raise BudgetExceededError(f"C({d},{report.k}) = {total} candidates exceed the budget of {budget}")
    params = ConstructionParams(d=d, k=report.k, c=report.c)
    graph = greedy_hypergraph(params, order=order, seed=seed, budget=budget)
    return ConstructionResult(hypergraph=graph, points=embed_hypercube(graph), report=report)
