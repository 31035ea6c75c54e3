"""Optimal testing procedure at a given prior point.

The search is a dynamic program over surviving outcome sets: at each set it
tries every pool (skipping duplicate splits, exactly like the exhaustive
generator), recurses on both parts, and keeps the cheapest tree. Samples
whose status is already decided inside a set are projected away first, so
subproblems shrink and memoize well. An independent brute-force oracle over
the exhaustive enumeration (n <= 3) guards the implementation.

Ties are broken deterministically by the tree order (pool order at the
root, then recursively), so equal-value queries always return the same
tree, and the brute-force oracle applies the same rule.
"""

from __future__ import annotations

from functools import lru_cache

from . import core, enumeration, probability
from .core import Leaf, Node, Outcome, OutcomeSet, Pool, Procedure, mask_sort_key
from .errors import UnsupportedSizeError
from .probability import LengthVector, Priors, Scalar

# Full-universe search above this is super-exponential in practice.
MAX_OPTIMAL_N = 8
MAX_BRUTE_N = 3


class _Search:
    """One optimization query: fixed priors, per-query memo table."""

    def __init__(self, priors: tuple[Scalar, ...]):
        self.priors = priors
        self.memo: dict[tuple, tuple[Scalar, Procedure]] = {}
        self.prob_cache: dict[tuple[int, ...], list[Scalar]] = {}

    def outcome_probs(self, coords: tuple[int, ...]) -> list[Scalar]:
        """Probabilities of all masks over the given live coordinates."""
        probs = self.prob_cache.get(coords)
        if probs is None:
            probs = [1]
            for i in coords:
                p = self.priors[i - 1]
                q = 1 - p
                probs = [w * q for w in probs] + [w * p for w in probs]
            self.prob_cache[coords] = probs
        return probs

    def best(self, masks: frozenset[int], coords: tuple[int, ...]) -> tuple[Scalar, Procedure]:
        """Minimum cost and argmin tree over the projected outcome set.

        `masks` live in the bit space of `coords` (bit j of a mask is the
        status of sample coords[j]). Cost is the unconditional expected
        number of tests contributed by outcomes in the set; trees are
        returned in that same projected space with k = len(coords).
        """
        key = (masks, coords)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        k = len(coords)
        if len(masks) == 1:
            # k >= 1 always: recursion only descends with a live coordinate.
            result = (0, Leaf(Outcome(k, next(iter(masks)))))
            self.memo[key] = result
            return result

        full = (1 << k) - 1
        and_all = full
        or_all = 0
        for m in masks:
            and_all &= m
            or_all |= m
        decided = and_all | (full ^ or_all)
        if decided:
            live_bits = tuple(j for j in range(k) if not decided >> j & 1)
            sub_coords = tuple(coords[j] for j in live_bits)
            projected = enumeration._project(masks, live_bits)
            cost, tree = self.best(projected, sub_coords)
            factor: Scalar = 1
            for j in range(k):
                if decided >> j & 1:
                    p = self.priors[coords[j] - 1]
                    factor = factor * (p if and_all >> j & 1 else 1 - p)
            lifted = _lift(tree, live_bits, and_all, k)
            result = (factor * cost, lifted)
            self.memo[key] = result
            return result

        probs = self.outcome_probs(coords)
        reach: Scalar = 0
        for m in masks:
            reach = reach + probs[m]
        best_cost: Scalar | None = None
        best_tree: Procedure | None = None
        best_pool_key = None
        seen: set[frozenset[int]] = set()
        for c in _pools_in_order(k):
            neg = frozenset(m for m in masks if m & c == 0)
            if not neg or len(neg) == len(masks):
                continue
            if neg in seen:
                continue
            seen.add(neg)
            cost_n, tree_n = self.best(neg, coords)
            cost_p, tree_p = self.best(masks - neg, coords)
            cost = reach + cost_n + cost_p
            ckey = mask_sort_key(c)
            if best_cost is None or cost < best_cost or (
                cost == best_cost and ckey < best_pool_key
            ):
                best_cost = cost
                best_pool_key = ckey
                best_tree = Node(Pool(k, c), tree_n, tree_p)
        if best_tree is None:
            raise AssertionError("no pool splits a set of >= 2 undecided outcomes")
        result = (best_cost, best_tree)
        self.memo[key] = result
        return result


@lru_cache(maxsize=None)
def _pools_in_order(k: int) -> tuple[int, ...]:
    return tuple(sorted(range(1, 1 << k), key=mask_sort_key))


def _lift(tree: Procedure, live_bits: tuple[int, ...], infected_bits: int, k: int) -> Procedure:
    """Re-embed a projected tree into the k-bit parent space.

    Pool and outcome bits move from position j to live_bits[j]; every leaf
    additionally carries the parent's decided-infected bits.
    """

    def expand(mask: int) -> int:
        out = 0
        for j, b in enumerate(live_bits):
            if mask >> j & 1:
                out |= 1 << b
        return out

    def walk(t: Procedure) -> Procedure:
        if isinstance(t, Leaf):
            return Leaf(Outcome(k, expand(t.outcome.bits) | infected_bits))
        return Node(Pool(k, expand(t.pool.mask)), walk(t.on_negative), walk(t.on_positive))

    return walk(tree)


def find_optimal(
    priors: Priors,
    outcomes: OutcomeSet | None = None,
    mode: str = "auto",
    max_n: int = MAX_OPTIMAL_N,
) -> Procedure:
    """The procedure minimizing expected length at the given prior point.

    Searches all procedures over the outcome set (default: the full 2^n
    universe); the minimum value is reproducible via `expected_length` on
    the result. Deterministic under ties.
    """
    ps = probability.coerce_priors(priors, mode)
    n = len(ps)
    if outcomes is None:
        if n > max_n:
            raise UnsupportedSizeError(
                f"optimal search over the full universe is limited to n <= {max_n}; "
                f"use the greedy or pairing heuristics for larger n",
                limit=max_n,
                n=n,
            )
        outcomes = OutcomeSet.full_universe(n)
    if outcomes.n != n:
        raise ValueError(f"outcome set has n={outcomes.n}, priors have n={n}")
    if not outcomes.masks:
        raise ValueError("outcome set must be non-empty")
    search = _Search(ps)
    _, tree = search.best(frozenset(outcomes.masks), tuple(range(1, n + 1)))
    return tree


def optimal_value(
    priors: Priors,
    outcomes: OutcomeSet | None = None,
    mode: str = "auto",
    max_n: int = MAX_OPTIMAL_N,
) -> Scalar:
    """Minimum expected length at the prior point (same search as find_optimal)."""
    ps = probability.coerce_priors(priors, mode)
    n = len(ps)
    if outcomes is None:
        if n > max_n:
            raise UnsupportedSizeError(
                f"optimal search over the full universe is limited to n <= {max_n}",
                limit=max_n,
                n=n,
            )
        outcomes = OutcomeSet.full_universe(n)
    search = _Search(ps)
    cost, _ = search.best(frozenset(outcomes.masks), tuple(range(1, n + 1)))
    return cost


@lru_cache(maxsize=None)
def enumerated_with_lengths(n: int) -> tuple[tuple[Procedure, LengthVector, tuple], ...]:
    """All procedures for n <= 3 with their length vectors and tree keys, cached."""
    items = []
    for proc in enumeration.enumerate_procedures(n):
        items.append((proc, probability.length_vector(proc), core.tree_key(proc)))
    return tuple(items)


def brute_force_optimal(
    priors: Priors, mode: str = "auto"
) -> tuple[Procedure, Scalar]:
    """Independent oracle: argmin of expected length over every enumerated
    procedure, with the same (value, tree order) tie-break as find_optimal."""
    ps = probability.coerce_priors(priors, mode)
    n = len(ps)
    if n > MAX_BRUTE_N:
        raise UnsupportedSizeError(
            f"brute-force optimization enumerates every procedure and is limited "
            f"to n <= {MAX_BRUTE_N}",
            limit=MAX_BRUTE_N,
            n=n,
        )
    probs = probability.outcome_probabilities(n, ps)
    best = None
    for proc, lv, key in enumerated_with_lengths(n):
        value: Scalar = 0
        for m, d in enumerate(lv.depths):
            value = value + d * probs[m]
        entry = (value, key, proc)
        if best is None or entry[:2] < best[:2]:
            best = entry
    return best[2], best[0]
