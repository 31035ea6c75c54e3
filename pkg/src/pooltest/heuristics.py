"""Scalable near-optimal strategies.

Two heuristics live here. The information-based greedy builds a tree top
down, at each node testing the pool with the largest probability-weighted
relative cost reduction. The pairing strategy shuffles samples into small
blocks and solves each block exactly (or via a precomputed zone map), so it
scales to arbitrary n while never doing worse than individual testing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import optimizer, probability
from .core import Leaf, Node, Outcome, OutcomeSet, Pool, Procedure
from .errors import PoolTestError, UnsupportedSizeError
from .probability import Priors, Scalar

MAX_GREEDY_N = probability.MAX_EXPLICIT_N
MAX_BLOCK_SIZE = 4


def cost(outcome: Outcome | int, outcomes: OutcomeSet) -> int:
    """Remaining-effort score of one outcome within a set of possibilities.

    Counts the infected samples of the outcome that are not yet decided in
    the set, plus one if any of its clean samples is still undecided. Zero
    exactly when the set leaves nothing about this outcome to discover.
    """
    mask = outcome.bits if isinstance(outcome, Outcome) else outcome
    if mask not in outcomes.masks:
        raise ValueError(f"outcome {mask:#x} is not in the set")
    full = (1 << outcomes.n) - 1
    and_all = full
    or_all = 0
    for m in outcomes.masks:
        and_all &= m
        or_all |= m
    some_clean = full ^ and_all
    some_infected = or_all
    f = (mask & some_clean).bit_count()
    g = 1 if (full ^ mask) & some_infected else 0
    return f + g


def _cost_masks(masks: frozenset[int], n: int) -> tuple[int, int]:
    """(some_clean, some_infected) masks used by the O(1) cost kernel."""
    full = (1 << n) - 1
    and_all = full
    or_all = 0
    for m in masks:
        and_all &= m
        or_all |= m
    return full ^ and_all, or_all


def gain(pool: Pool, outcomes: OutcomeSet, priors: Priors) -> Scalar:
    """Probability-weighted relative cost reduction of testing `pool`.

    Sums (1 - cost_after/cost_before) * Pr(outcome) over both split parts.
    A pool whose split leaves one part empty gains nothing; outcomes whose
    cost is already zero contribute nothing.
    """
    ps = probability.check_priors(priors, outcomes.n)
    n = outcomes.n
    neg = frozenset(m for m in outcomes.masks if m & pool.mask == 0)
    pos = outcomes.masks - neg
    if not neg or not pos:
        return 0 if not any(isinstance(p, float) for p in ps) else 0.0
    probs = probability.outcome_probabilities(n, ps)
    some_clean, some_infected = _cost_masks(outcomes.masks, n)
    full = (1 << n) - 1
    total: Scalar = 0
    for part in (neg, pos):
        part_clean, part_infected = _cost_masks(part, n)
        for m in part:
            before = (m & some_clean).bit_count() + (1 if (full ^ m) & some_infected else 0)
            if before == 0:
                continue
            after = (m & part_clean).bit_count() + (1 if (full ^ m) & part_infected else 0)
            total = total + (1 - after / before if isinstance(probs[m], float) else 1 - _frac(after, before)) * probs[m]
    return total


def _frac(a: int, b: int):
    from fractions import Fraction

    return Fraction(a, b)


def greedy_procedure(
    priors: Priors, outcomes: OutcomeSet | None = None, max_n: int = MAX_GREEDY_N
) -> Procedure:
    """Build a full procedure by repeatedly testing the argmax-gain pool.

    Ties go to the pool order. The result is always a valid procedure over
    the given outcome set (default: the full universe).
    """
    ps = probability.check_priors(priors)
    n = len(ps)
    if n > max_n:
        raise UnsupportedSizeError(
            f"the greedy heuristic enumerates all 2^n - 1 pools per node and is "
            f"limited to n <= {max_n}",
            limit=max_n,
            n=n,
        )
    if outcomes is None:
        outcomes = OutcomeSet.full_universe(n)
    if outcomes.n != n:
        raise ValueError(f"outcome set has n={outcomes.n}, priors have n={n}")
    prob_table = np.array([float(p) for p in probability.outcome_probabilities(n, ps)])
    pools_arr = np.array(optimizer._pools_in_order(n), dtype=np.int64)
    popcount = np.array([m.bit_count() for m in range(1 << n)], dtype=np.int64)
    full = (1 << n) - 1

    def build(masks: frozenset[int]) -> Procedure:
        if len(masks) == 1:
            return Leaf(Outcome(n, next(iter(masks))))
        pool_mask = greedy_pool(masks)
        neg = frozenset(m for m in masks if m & pool_mask == 0)
        return Node(Pool(n, pool_mask), build(neg), build(masks - neg))

    def greedy_pool(masks: frozenset[int]) -> int:
        # Gains for all candidate pools at once; argmax keeps the first
        # (pool-order least) among ties.
        rows = np.array(sorted(masks), dtype=np.int64)
        on_pos = (rows[:, None] & pools_arr[None, :]) != 0
        pos_sizes = on_pos.sum(axis=0)
        valid = (pos_sizes > 0) & (pos_sizes < len(rows))
        or_pos = np.bitwise_or.reduce(np.where(on_pos, rows[:, None], 0), axis=0)
        or_neg = np.bitwise_or.reduce(np.where(on_pos, 0, rows[:, None]), axis=0)
        and_pos = np.bitwise_and.reduce(np.where(on_pos, rows[:, None], full), axis=0)
        and_neg = np.bitwise_and.reduce(np.where(on_pos, full, rows[:, None]), axis=0)
        some_clean = np.where(on_pos, full ^ and_pos, full ^ and_neg)
        some_infected = np.where(on_pos, or_pos, or_neg)
        after = popcount[rows[:, None] & some_clean] + (
            ((full ^ rows[:, None]) & some_infected) != 0
        )
        clean_all, infected_all = _cost_masks(masks, n)
        before = popcount[rows & clean_all] + (((full ^ rows) & infected_all) != 0)
        weights = prob_table[rows]
        with np.errstate(divide="ignore", invalid="ignore"):
            reduction = np.where(
                before[:, None] > 0, 1.0 - after / before[:, None], 0.0
            )
        gains = np.where(valid, (reduction * weights[:, None]).sum(axis=0), -np.inf)
        return int(pools_arr[int(np.argmax(gains))])

    return build(frozenset(outcomes.masks))


@dataclass(frozen=True)
class PairingPlan:
    """Sample blocks and the per-block procedures of one pairing run.

    Block procedures use local indices 1..len(block); `blocks[b][j-1]` is
    the global sample behind local index j of block b.
    """

    n: int
    k: int
    seed: int
    blocks: tuple[tuple[int, ...], ...]
    procedures: tuple[Procedure, ...]

    def expected_total(self, priors: Priors) -> Scalar:
        ps = probability.check_priors(priors, self.n)
        total: Scalar = 0
        for block, proc in zip(self.blocks, self.procedures):
            total = total + probability.expected_length(proc, [ps[i - 1] for i in block])
        return total


def pairing_strategy(
    priors: Priors,
    k: int,
    seed: int,
    zonemaps: Mapping[int, object] | None = None,
    block_solver: str = "optimal",
) -> PairingPlan:
    """Randomly partition the samples into blocks of size <= k and plan
    each block independently.

    `block_solver="optimal"` solves each block exactly (blocks are tiny);
    `block_solver="zonemap"` looks blocks up in precomputed zone maps and
    requires a map for every occurring block size.
    """
    ps = probability.check_priors(priors)
    n = len(ps)
    if not 1 <= k <= MAX_BLOCK_SIZE:
        raise UnsupportedSizeError(
            f"block size must be in [1, {MAX_BLOCK_SIZE}]", limit=MAX_BLOCK_SIZE, n=k
        )
    order = list(range(1, n + 1))
    random.Random(seed).shuffle(order)
    blocks = tuple(
        tuple(order[i : i + k]) for i in range(0, n, k)
    )
    procedures = []
    for block in blocks:
        block_priors = [ps[i - 1] for i in block]
        if block_solver == "optimal":
            procedures.append(optimizer.find_optimal(block_priors))
        elif block_solver == "zonemap":
            if zonemaps is None or len(block) not in zonemaps:
                raise PoolTestError(
                    f"no precomputed zone map for block size {len(block)}"
                )
            from . import zones

            procedures.append(zones.lookup(zonemaps[len(block)], block_priors))
        else:
            raise ValueError(f"unknown block solver {block_solver!r}")
    return PairingPlan(n, k, seed, blocks, tuple(procedures))
