import random
from fractions import Fraction

import numpy as np
import pytest

from pooltest import heuristics as heur
from pooltest import optimizer as opt
from pooltest import probability as prob
from pooltest.core import Outcome, OutcomeSet, Pool, encode, validate
from pooltest.errors import PoolTestError, UnsupportedSizeError

from conftest import GREEDY_3, HARD_POINT


class TestCost:
    def test_fully_decided_outcome_costs_nothing(self):
        s = OutcomeSet.of(["101"])
        assert heur.cost(Outcome.from_string("101"), s) == 0

    def test_all_infected_in_full_universe(self):
        s = OutcomeSet.full_universe(3)
        assert heur.cost(Outcome.from_string("111"), s) == 3

    def test_all_clean_in_full_universe(self):
        s = OutcomeSet.full_universe(3)
        assert heur.cost(Outcome.from_string("000"), s) == 1

    def test_outcome_must_belong_to_set(self):
        with pytest.raises(ValueError):
            heur.cost(Outcome.from_string("11"), OutcomeSet.of(["00", "01"]))


class TestGain:
    def test_useless_pool_gains_nothing(self):
        s = OutcomeSet.of(["10", "11"])  # sample 1 infected throughout
        assert heur.gain(Pool.of([1], 2), s, [0.5, 0.5]) == 0

    def test_single_sample_gain_is_one(self):
        s = OutcomeSet.full_universe(1)
        assert heur.gain(Pool.of([1], 1), s, [0.3]) == pytest.approx(1.0)

    def test_pool_of_everything_wins_at_the_hard_point(self):
        s = OutcomeSet.full_universe(3)
        ps = list(HARD_POINT)
        gains = {
            mask: heur.gain(Pool(3, mask), s, ps) for mask in range(1, 8)
        }
        assert max(gains, key=gains.get) == 0b111


class TestGreedy:
    def test_hard_point_tree(self):
        tree = heur.greedy_procedure(list(HARD_POINT))
        assert encode(tree) == GREEDY_3
        assert prob.expected_length(tree, list(HARD_POINT)) == pytest.approx(
            1.9616, abs=1e-9
        )

    def test_single_sample(self):
        assert encode(heur.greedy_procedure([0.4])) == "P{1}[L(0),L(1)]"

    def test_always_valid(self):
        rng = np.random.default_rng(17)
        for n in (2, 3, 4, 5, 6):
            for _ in range(10):
                tree = heur.greedy_procedure(rng.random(n).tolist())
                assert validate(tree).ok

    def test_never_beats_the_optimizer(self):
        rng = random.Random(23)
        for _ in range(100):
            n = rng.choice([2, 3])
            ps = [Fraction(rng.randint(0, 1000), 1000) for _ in range(n)]
            greedy_value = prob.expected_length(heur.greedy_procedure(ps), ps)
            assert greedy_value >= opt.optimal_value(ps)

    def test_deterministic(self):
        ps = [0.4, 0.4, 0.4]
        assert heur.greedy_procedure(ps) == heur.greedy_procedure(ps)

    def test_size_limit(self):
        with pytest.raises(UnsupportedSizeError):
            heur.greedy_procedure([0.5] * 13)


class TestPairing:
    def test_high_priors_cost_one_test_per_sample(self):
        plan = heur.pairing_strategy([0.9] * 6, k=2, seed=1)
        assert plan.expected_total([0.9] * 6) == pytest.approx(6.0)
        assert sorted(i for block in plan.blocks for i in block) == [1, 2, 3, 4, 5, 6]

    def test_block_size_one_is_individual_testing(self):
        plan = heur.pairing_strategy([0.3] * 5, k=1, seed=0)
        assert plan.expected_total([0.3] * 5) == pytest.approx(5.0)

    def test_deterministic_per_seed(self):
        a = heur.pairing_strategy([0.2] * 7, k=3, seed=9)
        b = heur.pairing_strategy([0.2] * 7, k=3, seed=9)
        assert a.blocks == b.blocks and a.procedures == b.procedures

    def test_uneven_tail_block(self):
        plan = heur.pairing_strategy([0.2] * 7, k=3, seed=9)
        assert sorted(len(b) for b in plan.blocks) == [1, 3, 3]

    def test_block_size_limit(self):
        with pytest.raises(UnsupportedSizeError):
            heur.pairing_strategy([0.5] * 8, k=5, seed=0)

    def test_zonemap_solver_requires_maps(self):
        with pytest.raises(PoolTestError):
            heur.pairing_strategy([0.5] * 4, k=2, seed=0, block_solver="zonemap")

    def test_zonemap_solver(self, zonemap2):
        plan = heur.pairing_strategy(
            [0.9] * 4, k=2, seed=3, zonemaps={2: zonemap2}, block_solver="zonemap"
        )
        assert plan.expected_total([0.9] * 4) == pytest.approx(4.0)

    def test_never_worse_than_individual_testing(self):
        rng = np.random.default_rng(31)
        for n in (2, 3, 4, 5, 6):
            for _ in range(20):
                ps = rng.random(n).tolist()
                plan = heur.pairing_strategy(ps, k=3, seed=11)
                assert plan.expected_total(ps) <= n + 1e-9
