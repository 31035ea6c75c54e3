"""Exhaustive generation and counting of testing procedures.

Generation recurses over candidate pools, skipping any candidate whose
split duplicates one already produced at the same node (two pools that
split a node's outcome set identically yield the same subtree family, so
only the first in the pool order is kept). The used pool is removed from
the candidate set passed to both children: re-testing it deeper can only
produce an empty part.

Counting uses the same recursion with memoization instead of tree
construction: decided samples are projected away first, and the projected
outcome set is canonicalized under coordinate permutations, which collapses
the huge symmetry of the problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterator

from .core import Leaf, Node, Outcome, Pool, Procedure, mask_sort_key
from .errors import UnsupportedSizeError

# Exhaustive generation is super-exponential; n=4 already yields tens of
# millions of trees and takes on the order of half an hour.
MAX_ENUMERATE_N = 4
MAX_COUNT_N = 6


@dataclass(frozen=True)
class CountResult:
    """An exact procedure count together with how it was obtained."""

    n: int
    value: int
    method: str


def _ordered_pools(n: int) -> tuple[int, ...]:
    return tuple(sorted(range(1, 1 << n), key=mask_sort_key))


def enumerate_procedures(
    n: int,
    *,
    prune_maximal: bool = False,
    prune_interchange: bool = False,
) -> Iterator[Procedure]:
    """Yield every testing procedure on the full 2^n outcome universe.

    The stream is deterministic: candidates are tried in the pool total
    order. The two pruning flags drop redundant representatives (pools not
    extended by clean-decided samples, and child orderings eliminated by
    the node-interchange equivalence); they are off by default so the
    stream is exhaustive.
    """
    if n > MAX_ENUMERATE_N:
        raise UnsupportedSizeError(
            f"exhaustive enumeration is limited to n <= {MAX_ENUMERATE_N}; "
            f"use count_procedures for counts",
            limit=MAX_ENUMERATE_N,
            n=n,
        )
    full = (1 << n) - 1
    universe = frozenset(range(1 << n))
    candidates = _ordered_pools(n)

    def gen(masks: frozenset[int], cands: tuple[int, ...]) -> Iterator[Procedure]:
        if len(masks) == 1:
            yield Leaf(Outcome(n, next(iter(masks))))
            return
        if prune_maximal:
            or_all = 0
            for m in masks:
                or_all |= m
            clean = full ^ or_all
        seen: set[frozenset[int]] = set()
        for c in cands:
            if prune_maximal and c | clean != c:
                continue
            neg = frozenset(m for m in masks if m & c == 0)
            if not neg or len(neg) == len(masks):
                continue
            if neg in seen:
                continue
            seen.add(neg)
            pos = masks - neg
            remaining = tuple(x for x in cands if x != c)
            ckey = mask_sort_key(c)
            for t_neg in gen(neg, remaining):
                for t_pos in gen(pos, remaining):
                    if (
                        prune_interchange
                        and isinstance(t_neg, Node)
                        and isinstance(t_pos, Node)
                        and t_neg.pool.mask == t_pos.pool.mask
                        and mask_sort_key(t_neg.pool.mask) < ckey
                    ):
                        continue
                    yield Node(Pool(n, c), t_neg, t_pos)

    return gen(universe, candidates)


# ---------------------------------------------------------------------------
# counting


def _canonical_set(masks: frozenset[int], k: int) -> tuple[int, ...]:
    """Canonical representative of the mask set under coordinate permutations.

    Coordinates are first sorted by a permutation-invariant profile (how the
    coordinate sits inside the set); only coordinates with identical
    profiles still need their orderings explored, so the minimization runs
    over a tiny subgroup instead of all k! permutations.
    """
    if k <= 1:
        return tuple(sorted(masks))
    profiles: list[tuple] = []
    for j in range(k):
        with_j = sorted(m.bit_count() for m in masks if m >> j & 1)
        profiles.append((len(with_j), tuple(with_j)))
    order = sorted(range(k), key=lambda j: profiles[j])
    groups: list[list[int]] = [[order[0]]]
    for j in order[1:]:
        if profiles[j] == profiles[groups[-1][-1]]:
            groups[-1].append(j)
        else:
            groups.append([j])
    best: tuple[int, ...] | None = None
    for combo in itertools.product(*(itertools.permutations(g) for g in groups)):
        source = [j for g in combo for j in g]  # source[new_bit] = old bit
        image = tuple(
            sorted(
                sum(((m >> src) & 1) << new for new, src in enumerate(source))
                for m in masks
            )
        )
        if best is None or image < best:
            best = image
    return best


def _project(masks: frozenset[int], live_bits: tuple[int, ...]) -> frozenset[int]:
    out = set()
    for m in masks:
        r = 0
        for j, b in enumerate(live_bits):
            if m >> b & 1:
                r |= 1 << j
        out.add(r)
    return frozenset(out)


def count_procedures(n: int, *, max_n: int = MAX_COUNT_N) -> CountResult:
    """Exact number of testing procedures on the full 2^n universe.

    Dynamic programming over outcome sets with decided-sample projection
    and permutation canonicalization; agrees with exhaustive enumeration.
    """
    if n > max_n:
        raise UnsupportedSizeError(
            f"procedure counting is limited to n <= {max_n} here; the memo "
            f"table grows beyond desk scale above that",
            limit=max_n,
            n=n,
        )
    memo: dict[tuple, int] = {}
    raw_memo: dict[tuple, int] = {}

    def count(masks: frozenset[int], k: int) -> int:
        if len(masks) == 1:
            return 1
        full = (1 << k) - 1
        and_all = full
        or_all = 0
        for m in masks:
            and_all &= m
            or_all |= m
        decided = and_all | (full ^ or_all)
        if decided:
            live = tuple(j for j in range(k) if not decided >> j & 1)
            return count(_project(masks, live), len(live))
        raw_key = (k, masks)
        hit = raw_memo.get(raw_key)
        if hit is not None:
            return hit
        key = (k, _canonical_set(masks, k))
        hit = memo.get(key)
        if hit is not None:
            raw_memo[raw_key] = hit
            return hit
        total = 0
        seen: set[frozenset[int]] = set()
        for c in range(1, 1 << k):
            neg = frozenset(m for m in masks if m & c == 0)
            if not neg or len(neg) == len(masks):
                continue
            if neg in seen:
                continue
            seen.add(neg)
            total += count(neg, k) * count(masks - neg, k)
        memo[key] = total
        raw_memo[raw_key] = total
        return total

    value = count(frozenset(range(1 << n)), n)
    return CountResult(n, value, "dp")


def count_enumerated(n: int) -> CountResult:
    """Count by running the exhaustive generator; cross-checks the DP."""
    value = sum(1 for _ in enumerate_procedures(n))
    return CountResult(n, value, "exhaustive")


def count_naive(n: int) -> CountResult:
    """Number of procedures equivalent to individual testing.

    P(n) = product over k=1..n of k^(2^(n-k)); satisfies
    P(n+1) = (n+1) * P(n)^2.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    value = 1
    for k in range(1, n + 1):
        value *= k ** (1 << (n - k))
    return CountResult(n, value, "formula")


def catalan_number(t: int) -> int:
    """C_t = binom(2t, t) / (t + 1), computed exactly."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return comb(2 * t, t) // (t + 1)


def catalan_upper_bound(n: int, t: int | None = None) -> CountResult:
    """Crude upper bound C_t * P(n) on the number of procedures.

    The tree-shape count of a binary tree with 2^n leaves dominates the
    shape choices and P(n) dominates the labellings of the most-multiple
    shape; t defaults to 2^n and is exposed as a parameter.
    """
    if t is None:
        t = 1 << n
    value = catalan_number(t) * count_naive(n).value
    return CountResult(n, value, "formula")
