"""Live execution of a testing strategy and Monte Carlo simulation.

A session tracks one run: it recommends the next pool to test, accepts the
observed result, and narrows the surviving outcome set until a single
outcome remains. States are immutable; `record_result` returns a new
state, so a session is fully reproducible from (priors, strategy, result
sequence). Greedy and pairing strategies materialize subtrees lazily, so
only the tests actually needed are ever planned.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import core, heuristics, optimizer, probability
from .core import Leaf, Node, Outcome, OutcomeSet, Pool, Procedure
from .errors import PoolTestError, SessionError, UnsupportedSizeError
from .heuristics import PairingPlan
from .probability import Priors


@dataclass(frozen=True)
class StrategySpec:
    """Which strategy drives a session: naive, optimal, greedy,
    metaprocedure, or pairing(k, seed)."""

    kind: str
    k: int | None = None
    seed: int | None = None

    KINDS = ("naive", "optimal", "greedy", "metaprocedure", "pairing")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; pick one of {self.KINDS}")
        if self.kind == "pairing":
            if self.k is None or self.k < 1:
                raise ValueError("pairing needs a block size k >= 1")
        elif self.k is not None:
            raise ValueError(f"strategy {self.kind!r} takes no block size")

    @classmethod
    def parse(cls, spec) -> "StrategySpec":
        """Accept 'naive', 'pairing:2', 'pairing:2:7', or an equivalent dict."""
        if isinstance(spec, StrategySpec):
            return spec
        if isinstance(spec, dict):
            return cls(
                kind=spec.get("kind", ""),
                k=spec.get("k"),
                seed=spec.get("seed"),
            )
        parts = str(spec).split(":")
        if parts[0] == "pairing":
            if len(parts) == 2:
                return cls("pairing", k=int(parts[1]), seed=0)
            if len(parts) == 3:
                return cls("pairing", k=int(parts[1]), seed=int(parts[2]))
            raise ValueError("pairing strategy is written 'pairing:K' or 'pairing:K:SEED'")
        if len(parts) != 1:
            raise ValueError(f"malformed strategy {spec!r}")
        return cls(parts[0])

    def descriptor(self) -> str:
        if self.kind == "pairing":
            return f"pairing:{self.k}:{self.seed or 0}"
        return self.kind

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.k is not None:
            out["k"] = self.k
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass(frozen=True)
class SessionState:
    """One live testing run; immutable, advanced by `record_result`."""

    session_id: str
    priors: tuple[float, ...]
    strategy: StrategySpec
    history: tuple[tuple[int, str], ...]  # (pool mask, "negative"|"positive")
    status: str  # "running" | "complete"
    outcome: Outcome | None
    # engine internals (exactly one family is populated)
    _position: Procedure | None = field(default=None, repr=False)
    _masks: frozenset[int] | None = field(default=None, repr=False)
    _plan: PairingPlan | None = field(default=None, repr=False)
    _block: int = field(default=0, repr=False)
    _block_pos: Procedure | None = field(default=None, repr=False)
    _resolved: int = field(default=0, repr=False)

    @property
    def n(self) -> int:
        return len(self.priors)

    @property
    def tests_used(self) -> int:
        return len(self.history)


def start_session(
    priors: Priors,
    strategy,
    session_id: str | None = None,
    zonemaps: Mapping[int, object] | None = None,
) -> SessionState:
    """Open a session at the root of the chosen strategy."""
    spec = StrategySpec.parse(strategy)
    ps = tuple(float(p) for p in probability.check_priors(priors))
    n = len(ps)
    sid = session_id or uuid.uuid4().hex
    state = SessionState(
        session_id=sid,
        priors=ps,
        strategy=spec,
        history=(),
        status="running",
        outcome=None,
    )
    if spec.kind == "naive":
        state = replace(state, _position=core.naive_procedure(n))
    elif spec.kind == "optimal":
        state = replace(state, _position=optimizer.find_optimal(ps))
    elif spec.kind == "greedy":
        if n > heuristics.MAX_GREEDY_N:
            raise UnsupportedSizeError(
                f"greedy sessions are limited to n <= {heuristics.MAX_GREEDY_N}",
                limit=heuristics.MAX_GREEDY_N,
                n=n,
            )
        state = replace(state, _masks=frozenset(range(1 << n)))
    elif spec.kind == "metaprocedure":
        if zonemaps is None or n not in zonemaps:
            raise PoolTestError(f"no precomputed zone map for n={n}")
        from . import zones

        state = replace(state, _position=zones.lookup(zonemaps[n], ps))
    elif spec.kind == "pairing":
        plan = heuristics.pairing_strategy(
            ps,
            spec.k,
            spec.seed or 0,
            zonemaps=zonemaps,
            block_solver="zonemap" if zonemaps is not None else "optimal",
        )
        state = replace(state, _plan=plan, _block=0, _block_pos=plan.procedures[0])
        state = _absorb_finished_blocks(state)
    return _settle(state)


def _absorb_finished_blocks(state: SessionState) -> SessionState:
    """Advance past single-leaf block positions, folding outcomes into the
    resolved mask (blocks of size 1 still need one test, so leaves only)."""
    plan = state._plan
    block = state._block
    pos = state._block_pos
    resolved = state._resolved
    while block < len(plan.blocks) and isinstance(pos, Leaf):
        resolved |= _lift_block_mask(pos.outcome.bits, plan.blocks[block])
        block += 1
        pos = plan.procedures[block] if block < len(plan.blocks) else None
    return replace(state, _block=block, _block_pos=pos, _resolved=resolved)


def _lift_block_mask(local_bits: int, block: tuple[int, ...]) -> int:
    out = 0
    for j, sample in enumerate(block):
        if local_bits >> j & 1:
            out |= 1 << (sample - 1)
    return out


def _settle(state: SessionState) -> SessionState:
    """Mark the session complete when a single outcome remains."""
    n = state.n
    if state.strategy.kind == "pairing":
        if state._block >= len(state._plan.blocks):
            return replace(state, status="complete", outcome=Outcome(n, state._resolved))
        return state
    if state._masks is not None:
        if len(state._masks) == 1:
            return replace(
                state, status="complete", outcome=Outcome(n, next(iter(state._masks)))
            )
        return state
    if isinstance(state._position, Leaf):
        return replace(state, status="complete", outcome=state._position.outcome)
    return state


def next_pool(state: SessionState) -> Pool | None:
    """The recommended next pooled test, or None when complete."""
    if state.status == "complete":
        return None
    kind = state.strategy.kind
    if kind == "greedy":
        return _greedy_recommend(state)
    if kind == "pairing":
        pos = state._block_pos
        assert isinstance(pos, Node)
        return Pool(
            state.n, _lift_block_mask(pos.pool.mask, state._plan.blocks[state._block])
        )
    assert isinstance(state._position, Node)
    return state._position.pool


def _greedy_recommend(state: SessionState) -> Pool:
    outcomes = OutcomeSet(state.n, state._masks)
    subtree = heuristics.greedy_procedure(state.priors, outcomes)
    assert isinstance(subtree, Node)
    return subtree.pool


def record_result(state: SessionState, result: str) -> SessionState:
    """Advance the session by one observed pooled-test result."""
    if result not in ("negative", "positive"):
        raise ValueError(f"result must be 'negative' or 'positive', got {result!r}")
    if state.status == "complete":
        raise SessionError(
            f"session {state.session_id} is already complete; no more results expected"
        )
    pool = next_pool(state)
    entry = (pool.mask, result)
    kind = state.strategy.kind
    if kind == "greedy":
        neg = frozenset(m for m in state._masks if m & pool.mask == 0)
        masks = neg if result == "negative" else state._masks - neg
        state = replace(state, history=state.history + (entry,), _masks=masks)
    elif kind == "pairing":
        pos = state._block_pos
        child = pos.on_negative if result == "negative" else pos.on_positive
        state = replace(state, history=state.history + (entry,), _block_pos=child)
        state = _absorb_finished_blocks(state)
    else:
        node = state._position
        child = node.on_negative if result == "negative" else node.on_positive
        state = replace(state, history=state.history + (entry,), _position=child)
    return _settle(state)


def surviving_outcomes(state: SessionState, limit: int = 1 << 20) -> OutcomeSet:
    """Outcomes still possible given the recorded results."""
    n = state.n
    if state.status == "complete":
        return OutcomeSet(n, frozenset({state.outcome.bits}))
    if state._masks is not None:
        return OutcomeSet(n, state._masks)
    if state.strategy.kind == "pairing":
        plan = state._plan
        sets: list[list[int]] = [[state._resolved]]
        size = 1
        current = core.leaf_masks(state._block_pos)
        pending = [
            (plan.blocks[state._block], sorted(current))
        ] + [
            (plan.blocks[b], sorted(core.leaf_masks(plan.procedures[b])))
            for b in range(state._block + 1, len(plan.blocks))
        ]
        for block, locals_ in pending:
            size *= len(locals_)
            if size > limit:
                raise UnsupportedSizeError(
                    f"surviving outcome set has over {limit} elements", limit=limit, n=n
                )
            sets.append([_lift_block_mask(m, block) for m in locals_])
        combos = [0]
        for group in sets:
            combos = [base | extra for base in combos for extra in group]
        return OutcomeSet(n, frozenset(combos))
    return OutcomeSet(n, core.leaf_masks(state._position))


def expected_remaining(state: SessionState) -> float:
    """Conditional expectation of the remaining test count; 0 when complete."""
    if state.status == "complete":
        return 0.0
    ps = state.priors
    if state.strategy.kind == "greedy":
        outcomes = OutcomeSet(state.n, state._masks)
        subtree = heuristics.greedy_procedure(ps, outcomes)
        return float(probability.conditional_expected_length(subtree, outcomes, ps))
    if state.strategy.kind == "pairing":
        plan = state._plan
        total = _block_conditional(state._block_pos, plan.blocks[state._block], ps)
        for b in range(state._block + 1, len(plan.blocks)):
            block = plan.blocks[b]
            block_priors = [ps[i - 1] for i in block]
            total += float(probability.expected_length(plan.procedures[b], block_priors))
        return total
    position = state._position
    outcomes = OutcomeSet(state.n, core.leaf_masks(position))
    return float(probability.conditional_expected_length(position, outcomes, ps))


def _block_conditional(pos: Procedure, block: tuple[int, ...], priors) -> float:
    block_priors = [priors[i - 1] for i in block]
    outcomes = OutcomeSet(len(block), core.leaf_masks(pos))
    return float(probability.conditional_expected_length(pos, outcomes, block_priors))


def remaining_tree(state: SessionState) -> Procedure | None:
    """The materialized remaining subtree, when the strategy has one."""
    if state.status == "complete":
        return None
    if state._position is not None:
        return state._position
    return None


# ---------------------------------------------------------------------------
# snapshots


def to_snapshot(state: SessionState) -> dict:
    pool = next_pool(state)
    return {
        "id": state.session_id,
        "n": state.n,
        "priors": list(state.priors),
        "strategy": state.strategy.to_dict(),
        "history": [
            {"pool": list(core.Pool(state.n, mask).members), "result": result}
            for mask, result in state.history
        ],
        "status": state.status,
        "outcome": state.outcome.string if state.outcome is not None else None,
        "tests_used": state.tests_used,
        "next_pool": list(pool.members) if pool is not None else None,
        "expected_remaining": expected_remaining(state),
        "remaining_tree": (
            core.encode(remaining_tree(state)) if remaining_tree(state) is not None else None
        ),
    }


def restore_session(
    snapshot: dict, zonemaps: Mapping[int, object] | None = None
) -> SessionState:
    """Rebuild a session by replaying its recorded history."""
    state = start_session(
        snapshot["priors"],
        snapshot["strategy"],
        session_id=snapshot["id"],
        zonemaps=zonemaps,
    )
    for step in snapshot["history"]:
        pool = next_pool(state)
        if pool is None or list(pool.members) != list(step["pool"]):
            raise SessionError(
                f"snapshot for session {snapshot['id']} does not replay: expected pool "
                f"{step['pool']}, strategy recommends {list(pool.members) if pool else None}"
            )
        state = record_result(state, step["result"])
    return state


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate of simulated sessions; deterministic per seed."""

    strategy: str
    n: int
    trials: int
    seed: int
    mean_tests: float
    histogram: dict[int, int]
    prior_distribution: str | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "mean_tests": self.mean_tests,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "prior_distribution": self.prior_distribution,
        }


def _depth_array(proc: Procedure, n: int) -> np.ndarray:
    depths = core.leaf_depths(proc)
    return np.array([depths[m] for m in range(1 << n)], dtype=np.int64)


def simulate(
    priors: Priors | None,
    strategy,
    trials: int,
    seed: int,
    n: int | None = None,
    prior_distribution: str | None = None,
    zonemaps: Mapping[int, object] | None = None,
) -> SimulationReport:
    """Draw ground truths from the priors and run sessions to completion.

    With `prior_distribution="uniform"` a fresh prior vector is drawn
    uniformly from [0,1]^n for every trial (and `priors` must be None).
    Trial t consumes row t of the seeded uniform stream, so prefixes agree
    across different trial counts.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    spec = StrategySpec.parse(strategy)
    rng = np.random.default_rng(seed)

    if prior_distribution is not None:
        if prior_distribution != "uniform":
            raise ValueError(f"unknown prior distribution {prior_distribution!r}")
        if priors is not None:
            raise ValueError("pass either fixed priors or a prior distribution")
        if n is None:
            raise ValueError("n is required with a prior distribution")
        prior_matrix = rng.random((trials, n))
        truth_uniform = rng.random((trials, n))
        truths = (truth_uniform < prior_matrix).astype(np.int64)
        masks = (truths * (1 << np.arange(n))).sum(axis=1)
        tests = np.empty(trials, dtype=np.int64)
        if spec.kind == "naive":
            tests[:] = n
        elif spec.kind in ("optimal", "greedy"):
            for t in range(trials):
                ps = prior_matrix[t].tolist()
                tree = (
                    optimizer.find_optimal(ps)
                    if spec.kind == "optimal"
                    else heuristics.greedy_procedure(ps)
                )
                _, used = core.leaf_for(tree, int(masks[t]))
                tests[t] = used
        else:
            raise PoolTestError(
                f"strategy {spec.descriptor()} does not support per-trial priors"
            )
        return _report(spec, n, trials, seed, tests, prior_distribution)

    ps = tuple(float(p) for p in probability.check_priors(priors))
    nn = len(ps)
    uniform = rng.random((trials, nn))
    truths = (uniform < np.array(ps)).astype(np.int64)
    masks = (truths * (1 << np.arange(nn))).sum(axis=1)

    if spec.kind == "pairing":
        plan = heuristics.pairing_strategy(
            ps,
            spec.k,
            spec.seed or 0,
            zonemaps=zonemaps,
            block_solver="zonemap" if zonemaps is not None else "optimal",
        )
        tests = np.zeros(trials, dtype=np.int64)
        for block, proc in zip(plan.blocks, plan.procedures):
            nb = len(block)
            local = np.zeros(trials, dtype=np.int64)
            for j, sample in enumerate(block):
                local |= ((masks >> (sample - 1)) & 1).astype(np.int64) << j
            tests += _depth_array(proc, nb)[local]
    else:
        if spec.kind == "naive":
            tree = core.naive_procedure(nn)
        elif spec.kind == "optimal":
            tree = optimizer.find_optimal(ps)
        elif spec.kind == "greedy":
            tree = heuristics.greedy_procedure(ps)
        elif spec.kind == "metaprocedure":
            if zonemaps is None or nn not in zonemaps:
                raise PoolTestError(f"no precomputed zone map for n={nn}")
            from . import zones

            tree = zones.lookup(zonemaps[nn], ps)
        else:  # pragma: no cover
            raise AssertionError(spec.kind)
        tests = _depth_array(tree, nn)[masks]
    return _report(spec, nn, trials, seed, tests, None)


def _report(
    spec: StrategySpec,
    n: int,
    trials: int,
    seed: int,
    tests: np.ndarray,
    prior_distribution: str | None,
) -> SimulationReport:
    values, counts = np.unique(tests, return_counts=True)
    return SimulationReport(
        strategy=spec.descriptor(),
        n=n,
        trials=trials,
        seed=seed,
        mean_tests=float(tests.mean()),
        histogram={int(v): int(c) for v, c in zip(values, counts)},
        prior_distribution=prior_distribution,
    )
