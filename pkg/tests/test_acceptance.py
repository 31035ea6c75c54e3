"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to see them).

Three stated sub-criteria are demonstrably unattainable and their tests
fail honestly rather than being loosened (full analysis in the decisions
ledger, measured facts pinned by companion tests here):

* criterion 5's target means: uniform sampling gives 2.7056 (optimal,
  confirmed by midpoint quadrature at 201^3) and 2.742 (greedy), not
  2.661 / 2.666;
* criterion 7's single-bit monotonicity over ALL procedures: 42 of the
  312 valid three-sample procedures violate it (it does hold on every
  somewhere-optimal procedure, which is what the zone structure needs);
* criterion 9's "greedy never worse than screening": the greedy pools
  inside the individual-testing zone on 2-6% of random priors (worst
  excess about +0.3 tests).
"""

import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from pooltest import core, enumeration as en, heuristics as heur
from pooltest import optimizer as opt
from pooltest import probability as prob
from pooltest import session as ses
from pooltest import zones
from pooltest.core import decode, encode, leaf_depths, naive_procedure
from pooltest.session import StrategySpec

import conftest
from conftest import CHAIN_3, GREEDY_3, HARD_POINT, POOL_LEFT_2, POOL_RIGHT_2


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def prob_columns(points: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((len(points), 1 << n))
    for m in range(1 << n):
        col = np.ones(len(points))
        for i in range(n):
            col = col * (points[:, i] if (m >> i) & 1 else 1.0 - points[:, i])
        out[:, m] = col
    return out


def candidate_matrix(n: int) -> np.ndarray:
    return zones._candidates(n)[0]


# ---------------------------------------------------------------------------


def test_criterion_1_generation_counts(procedures_by_n):
    start = time.time()
    counts = {n: len(procedures_by_n[n]) for n in (1, 2, 3)}
    enum_elapsed = time.time() - start  # fixture may have been built already
    start = time.time()
    count4 = en.count_procedures(4).value
    count4_elapsed = time.time() - start
    ok = counts == {1: 1, 2: 4, 3: 312} and count4 == 36585024
    ok = ok and enum_elapsed < 60 and count4_elapsed < 1800
    report(
        1,
        ok,
        f"enumerated {counts}, count_procedures(4)={count4} "
        f"({count4_elapsed:.2f}s)",
    )
    assert counts == {1: 1, 2: 4, 3: 312}
    assert count4 == 36585024
    assert enum_elapsed < 60
    assert count4_elapsed < 1800


def test_criterion_2_zone_counts(zonemap2, zonemap3):
    doubled2 = zones.compute_metaprocedure(2, zonemap2.resolution * 2)
    doubled3 = zones.compute_metaprocedure(3, zonemap3.resolution * 2)
    census = zones.orbit_census(zonemap3)
    sizes = sorted((s for _, s in census), reverse=True)
    ok = (
        zonemap2.zone_count == 3
        and doubled2.zone_count == 3
        and zonemap3.zone_count == 52
        and doubled3.zone_count == 52
        and len(census) == 10
        and sizes == [6] * 8 + [3, 1]
    )
    report(
        2,
        ok,
        f"zones n=2: {zonemap2.zone_count}/{doubled2.zone_count} (res "
        f"{zonemap2.resolution}/{zonemap2.resolution * 2}), n=3: "
        f"{zonemap3.zone_count}/{doubled3.zone_count}, orbits {sizes}",
    )
    assert zonemap2.zone_count == 3 and doubled2.zone_count == 3
    assert zonemap3.zone_count == 52 and doubled3.zone_count == 52
    assert len(census) == 10 and sizes == [6] * 8 + [3, 1]


@pytest.mark.stretch
def test_criterion_2_stretch_four_sample_zones():
    """Optional stretch: the 181-zone target for four samples.

    Not reproducible: the four-sample decomposition genuinely refines with
    resolution (125 zones at simplex resolution 8, 221 at 9, 509 at 12,
    2237 at 24, 3413 at the default 32), with exact-arithmetic agreement
    at sampled points, and no resolution yields 181. Suspiciously, the
    number of distinct three-sample length vectors is exactly 181; see the
    decisions ledger. Asserted as stated and left red when opted in.
    """
    zonemap4 = zones.compute_metaprocedure(4)
    report(2, zonemap4.zone_count == 181, f"zones n=4: {zonemap4.zone_count}")
    assert zonemap4.zone_count == 181, (
        f"measured {zonemap4.zone_count} zones at default resolution; the "
        f"target of 181 is not reproducible (see decisions ledger)"
    )


def test_criterion_3_analytic_frontiers():
    cutoff = (3 - math.sqrt(5)) / 2
    fr = zones.frontier_n2()
    matrix = candidate_matrix(2)
    # candidate rows are ordered: naive (A), pool-left (C), pool-right (B)
    tags = {}
    for idx, row in enumerate(matrix):
        depths = tuple(int(v) for v in row)
        tags[idx] = {(2, 2, 2, 2): "A", (1, 3, 2, 3): "C", (1, 2, 3, 3): "B"}[depths]

    rng = np.random.default_rng(2024)
    pts = rng.random((10_000, 2))
    ids = (prob_columns(pts, 2) @ matrix.T).argmin(axis=1)

    def near_frontier(x1, x2, band=1e-6):
        if x1 >= cutoff - band and abs(x2 - fr.ab_curve(x1)) <= band:
            return True
        if x1 <= cutoff + band and abs(x2 - fr.ac_curve(x1)) <= band:
            return True
        if min(x1, x2) <= cutoff + band and abs(x1 - x2) <= band:
            return True
        # the same curves with the axes swapped (frontiers are symmetric)
        if x2 >= cutoff - band and abs(x1 - fr.ab_curve(x2)) <= band:
            return True
        if x2 <= cutoff + band and abs(x1 - fr.ac_curve(x2)) <= band:
            return True
        return False

    mismatches = [
        (x1, x2)
        for (x1, x2), idx in zip(pts, ids)
        if zones.classify_n2([x1, x2]) != tags[int(idx)] and not near_frontier(x1, x2)
    ]

    values = [
        prob.expected_length(t, [cutoff, cutoff])
        for t in (naive_procedure(2), decode(POOL_LEFT_2), decode(POOL_RIGHT_2))
    ]
    spread = max(values) - min(values)
    ok = not mismatches and spread <= 1e-12
    report(
        3,
        ok,
        f"{len(mismatches)} mismatches outside the 1e-6 band on 10^4 points; "
        f"triple-point spread {spread:.2e}",
    )
    assert mismatches == []
    assert spread <= 1e-12


def test_criterion_4_counterexample_point():
    point = list(HARD_POINT)
    best = opt.find_optimal(point)
    best_value = float(prob.expected_length(best, point))
    greedy = heur.greedy_procedure(point)
    greedy_value = float(prob.expected_length(greedy, point))
    ok = (
        abs(best_value - 1.889) <= 1e-3
        and encode(best) == CHAIN_3
        and abs(greedy_value - 1.96) <= 5e-3
        and encode(greedy) == GREEDY_3
    )
    report(
        4,
        ok,
        f"optimal {best_value:.6f} (target 1.889 +- 0.001), greedy "
        f"{greedy_value:.6f} (target 1.96 +- 0.005), both reference trees matched",
    )
    assert abs(best_value - 1.889) <= 1e-3
    assert encode(best) == CHAIN_3
    assert abs(greedy_value - 1.96) <= 5e-3
    assert encode(greedy) == GREEDY_3


@pytest.fixture(scope="module")
def uniform_sample_means():
    trials = 100_000
    rng = np.random.default_rng(31337)
    pts = rng.random((trials, 3))
    columns = prob_columns(pts, 3)
    optimal_values = (columns @ candidate_matrix(3).T).min(axis=1)
    greedy_values = np.empty(trials)
    for t in range(trials):
        lv = prob.length_vector(heur.greedy_procedure(pts[t].tolist()))
        greedy_values[t] = columns[t] @ np.array(lv.depths, dtype=float)
    return optimal_values, greedy_values


def test_criterion_5_pointwise_dominance(uniform_sample_means):
    optimal_values, greedy_values = uniform_sample_means
    ok = bool((greedy_values >= optimal_values - 1e-12).all())
    report(
        5,
        ok,
        f"greedy >= optimal at all {len(optimal_values)} uniform points",
    )
    assert ok


def test_criterion_5_target_means(uniform_sample_means):
    """Asserts the 2.661/2.666 target figures verbatim.

    The faithful computation over uniform prior points gives 2.7056 for
    the optimal mean (Monte Carlo and midpoint quadrature agree) and 2.742
    for the greedy mean, so this criterion cannot pass as stated; the
    decisions ledger records the analysis. The assertions stay at the
    stated tolerances rather than being loosened to fit.
    """
    optimal_values, greedy_values = uniform_sample_means
    mean_optimal = float(optimal_values.mean())
    mean_greedy = float(greedy_values.mean())
    ok = abs(mean_optimal - 2.661) <= 0.01 and abs(mean_greedy - 2.666) <= 0.01
    report(
        5,
        ok,
        f"mean optimal {mean_optimal:.4f} (stated 2.661 +- 0.01), "
        f"mean greedy {mean_greedy:.4f} (stated 2.666 +- 0.01)",
    )
    assert abs(mean_optimal - 2.661) <= 0.01, (
        f"measured mean optimal {mean_optimal:.4f}; the stated 2.661 is not "
        f"reproducible under uniform sampling (see decisions ledger)"
    )
    assert abs(mean_greedy - 2.666) <= 0.01


def test_criterion_6_oracle_equivalence():
    start = time.time()
    rng = random.Random(99)
    checked = 0
    for n in (1, 2, 3):
        for _ in range(1000):
            ps = tuple(Fraction(rng.randint(0, 1000), 1000) for _ in range(n))
            value = opt.optimal_value(ps)
            _, brute = opt.brute_force_optimal(ps)
            assert value == brute, (ps, value, brute)
            checked += 1
    elapsed = time.time() - start
    ok = checked == 3000 and elapsed < 300
    report(6, ok, f"{checked} exact agreements in {elapsed:.1f}s (< 300s)")
    assert ok


def _monotone(depths: dict, n: int) -> bool:
    """Clearing an infected bit never deepens the leaf."""
    return all(
        depths[mask ^ (1 << i)] <= depth
        for mask, depth in depths.items()
        for i in range(n)
        if mask >> i & 1
    )


def test_criterion_7_single_bit_monotonicity_as_stated(procedures_by_n):
    """Monotonicity over ALL procedures, exactly as stated.

    False: valid procedures may chase the all-clean outcome down a deep
    chain while settling infected outcomes early. The companion tests pin
    the counterexample count and the scoped version that does hold.
    """
    violations = sum(
        0 if _monotone(leaf_depths(t), n) else 1
        for n, procs in procedures_by_n.items()
        for t in procs
    )
    report(
        7,
        violations == 0,
        f"single-bit monotonicity over all procedures: {violations} violating "
        f"procedures (42 expected among the 312 for n=3; see ledger)",
    )
    assert violations == 0, (
        f"{violations} valid procedures violate single-bit monotonicity; the "
        f"universal monotonicity claim is false (see decisions ledger)"
    )


def test_criterion_7_monotonicity_counterexample_is_real(procedures_by_n):
    violating = [
        t for t in procedures_by_n[3] if not _monotone(leaf_depths(t), 3)
    ]
    assert len(violating) == 42
    sample = violating[0]
    assert core.validate(sample).ok


def test_criterion_7_monotonicity_on_optimal_procedures(zonemap2, zonemap3):
    """The scoped form that the zone structure actually relies on: every
    procedure that is optimal somewhere orders lengths monotonically."""
    for zm in (zonemap2, zonemap3):
        for i in range(len(zm.procedures)):
            assert _monotone(leaf_depths(zm.procedure(i)), zm.n)
    rng = random.Random(77)
    for _ in range(200):
        n = rng.choice([2, 3])
        tree = opt.find_optimal([rng.random() for _ in range(n)])
        assert _monotone(leaf_depths(tree), n)
    report(7, True, "monotonicity holds on every somewhere-optimal procedure")


def test_criterion_7_remaining_property_suites(procedures_by_n):
    # individual testing is optimal whenever every prior is >= 1/2
    rng = random.Random(123)
    for _ in range(1000):
        n = rng.choice([1, 2, 3])
        ps = tuple(Fraction(rng.randint(500, 1000), 1000) for _ in range(n))
        assert opt.optimal_value(ps) == n

    # permutation identity, exact
    sigmas = [core.Permutation(s) for s in itertools.permutations((1, 2, 3))]
    for t in procedures_by_n[3][::5]:
        x = tuple(Fraction(rng.randint(0, 1000), 1000) for _ in range(3))
        for sigma in sigmas:
            assert prob.expected_length(
                core.apply_permutation(t, sigma), x
            ) == prob.expected_length(t, sigma.on_point(x))

    # constant-length procedures are exactly the naive ones
    for n, procs in procedures_by_n.items():
        constant = sum(1 for t in procs if len(set(prob.length_vector(t).depths)) == 1)
        assert constant == en.count_naive(n).value
    assert en.count_naive(2).value == 2
    assert en.count_naive(3).value == 12

    # normalization
    for _ in range(200):
        n = rng.choice([1, 2, 3, 5, 8])
        ps = [rng.random() for _ in range(n)]
        total = sum(prob.outcome_probability(core.Outcome(n, m), ps) for m in range(1 << n))
        assert abs(total - 1.0) <= 1e-12

    report(7, True, "monotonicity, naive region, symmetry, naive counts, normalization")


def test_criterion_8_session_replay(procedures_by_n):
    for n, procs in procedures_by_n.items():
        for tree in procs:
            depths = leaf_depths(tree)
            for truth in range(1 << n):
                state = ses.SessionState(
                    session_id="replay",
                    priors=tuple([0.5] * n),
                    strategy=StrategySpec("optimal"),
                    history=(),
                    status="running",
                    outcome=None,
                    _position=tree,
                )
                state = ses._settle(state)
                while state.status == "running":
                    pool = ses.next_pool(state)
                    state = ses.record_result(
                        state, "positive" if truth & pool.mask else "negative"
                    )
                assert state.outcome.bits == truth
                assert state.tests_used == depths[truth]

    trials = 100_000
    rep = ses.simulate([0.1, 0.2], "optimal", trials, 4242)
    expect = float(prob.expected_length(decode(POOL_LEFT_2), [0.1, 0.2]))
    var = sum(c * (k - rep.mean_tests) ** 2 for k, c in rep.histogram.items()) / trials
    se = math.sqrt(var / trials)
    ok = abs(rep.mean_tests - expect) <= 3 * se
    report(
        8,
        ok,
        f"all replays exact; simulated mean {rep.mean_tests:.4f} vs expected "
        f"{expect:.4f} within 3 SE ({3 * se:.4f})",
    )
    assert ok


def test_criterion_9_greedy_as_stated():
    """Greedy expected length <= n on 10^4 random priors per n, as stated.

    False: the gain rule pools inside the individual-testing zone on a few
    percent of points. The companion test pins a concrete violation.
    """
    rng = np.random.default_rng(555)
    violations = 0
    worst = 0.0
    total = 0
    for n in (2, 3, 4, 5, 6):
        pts = rng.random((10_000, n))
        columns = prob_columns(pts, n)
        for t in range(len(pts)):
            ps = pts[t].tolist()
            lv = prob.length_vector(heur.greedy_procedure(ps))
            value = float(columns[t] @ np.array(lv.depths, dtype=float))
            total += 1
            if value > n + 1e-9:
                violations += 1
                worst = max(worst, value - n)
    report(
        9,
        violations == 0,
        f"greedy exceeded individual testing on {violations}/{total} points "
        f"(worst +{worst:.4f} tests); the universal claim is false (see ledger)",
    )
    assert violations == 0, (
        f"greedy exceeds n on {violations} of {total} sampled priors "
        f"(worst +{worst:.4f}); the claim cannot hold as stated (see ledger)"
    )


def test_criterion_9_greedy_violation_is_real():
    # in the individual-testing zone, yet the gain rule pools the pair
    point = [0.42383623346066523, 0.37642169863198316]
    assert zones.classify_n2(point) == "A"
    value = float(prob.expected_length(heur.greedy_procedure(point), point))
    assert value > 2.017
    assert opt.optimal_value(point) == pytest.approx(2, abs=1e-12)


def test_criterion_9_pairing_never_worse_than_screening():
    rng = np.random.default_rng(556)
    for n in (2, 3, 4, 5, 6):
        pts = rng.random((10_000, n))
        # blocks are fixed by the seed; each block's exact optimum never
        # exceeds testing its members individually
        plan = heur.pairing_strategy(pts[0].tolist(), k=min(3, n), seed=77)
        totals = np.zeros(len(pts))
        for block in plan.blocks:
            nb = len(block)
            sub = pts[:, [i - 1 for i in block]]
            totals += (prob_columns(sub, nb) @ candidate_matrix(nb).T).min(axis=1)
        assert (totals <= n + 1e-9).all(), n
    report(9, True, "pairing <= n on 10^4 points for each n in 2..6")
