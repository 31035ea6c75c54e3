"""Optimal adaptive pool-testing strategies from per-sample infection priors.

Encoding convention (package-wide): outcome bit i = 1 means sample i is
INFECTED; a pooled test is POSITIVE iff at least one pooled sample is
infected; priors are infection probabilities. The dual formalism in which
tests return the AND of per-sample healthy bits maps onto this one by
complementing outcome strings, with pools and probabilities unchanged.
"""

from .core import (
    Leaf,
    Node,
    Outcome,
    OutcomeSet,
    Permutation,
    Pool,
    Procedure,
    ValidationReport,
    apply_permutation,
    canonicalize,
    decode,
    decided_points,
    encode,
    leaf_for,
    naive_procedure,
    split,
    validate,
)
from .enumeration import (
    CountResult,
    catalan_number,
    catalan_upper_bound,
    count_naive,
    count_procedures,
    enumerate_procedures,
)
from .errors import DecodeError, PoolTestError, SessionError, UnsupportedSizeError
from .heuristics import PairingPlan, cost, gain, greedy_procedure, pairing_strategy
from .optimizer import brute_force_optimal, find_optimal, optimal_value
from .probability import (
    LengthVector,
    expected_length,
    length_vector,
    outcome_probability,
    set_probability,
)
from .session import (
    SessionState,
    SimulationReport,
    StrategySpec,
    expected_remaining,
    next_pool,
    record_result,
    simulate,
    start_session,
)
from .zones import (
    FrontierN2,
    ZoneMap,
    classify_n2,
    compute_metaprocedure,
    load_zonemap,
    lookup,
    orbit_census,
    refine_boundary,
    save_zonemap,
    slice_zonemap,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
