"""Outcome probabilities, length vectors, and expected procedure length.

Scalars are either floats or `fractions.Fraction`. Exact mode keeps every
intermediate value rational, which matters near zone borders where floating
point can misrank two procedures whose expected lengths almost tie.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from . import core
from .core import Outcome, OutcomeSet, Procedure
from .errors import UnsupportedSizeError

Scalar = Union[float, Fraction]
Priors = Sequence[Scalar]

# Explicit expected-length evaluation sums 2^n terms; beyond this, use
# simulation or the pairing strategy.
MAX_EXPLICIT_N = 12


def check_priors(priors: Priors, n: int | None = None) -> tuple[Scalar, ...]:
    """Validate a prior vector: each component is a probability in [0, 1]."""
    ps = tuple(priors)
    if n is not None and len(ps) != n:
        raise ValueError(f"expected {n} priors, got {len(ps)}")
    if not ps:
        raise ValueError("prior vector must be non-empty")
    for p in ps:
        if isinstance(p, float) and not 0.0 <= p <= 1.0:
            raise ValueError(f"prior {p} outside [0, 1]")
        if isinstance(p, (Fraction, int)) and not 0 <= p <= 1:
            raise ValueError(f"prior {p} outside [0, 1]")
    return ps


def parse_prior(text: str, exact: bool = False) -> Scalar:
    """Parse a decimal or fraction literal; fractions always force exactness."""
    text = text.strip()
    if "/" in text or exact:
        return Fraction(text)
    return float(text)


def coerce_priors(priors: Priors, mode: str = "auto") -> tuple[Scalar, ...]:
    """Resolve the evaluation mode for a prior vector.

    mode="float" converts everything to float; mode="exact" requires values
    that are already exact (Fraction, int, or decimal strings); mode="auto"
    keeps exact arithmetic iff no component is a float.
    """
    ps = list(priors)
    if mode == "float":
        return check_priors(tuple(float(p) for p in ps))
    if mode == "exact":
        out = []
        for p in ps:
            if isinstance(p, float):
                raise ValueError(
                    "exact mode requires rational priors; pass Fraction values or "
                    "decimal strings instead of floats"
                )
            out.append(Fraction(p))
        return check_priors(tuple(out))
    if mode == "auto":
        if any(isinstance(p, float) for p in ps):
            return check_priors(tuple(float(p) for p in ps))
        return check_priors(tuple(Fraction(p) for p in ps))
    raise ValueError(f"unknown mode {mode!r}; use 'auto', 'float' or 'exact'")


@dataclass(frozen=True)
class LengthVector:
    """The 2^n leaf depths of a procedure, indexed by outcome mask.

    `depths[m]` is the number of tests needed when the ground truth is the
    outcome whose infected-sample mask is m. This vector determines the
    expected-length polynomial uniquely.
    """

    n: int
    depths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.depths) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} depths for n={self.n}, got {len(self.depths)}")
        limit = (1 << self.n) - 1
        for d in self.depths:
            if not 0 <= d <= limit:
                raise ValueError(f"leaf depth {d} outside [0, {limit}]")

    def __getitem__(self, mask: int) -> int:
        return self.depths[mask]

    def __len__(self) -> int:
        return len(self.depths)


def length_vector(proc: Procedure) -> LengthVector:
    """Leaf depths of a full-universe procedure, indexed by outcome mask."""
    n = core.proc_n(proc)
    depths = core.leaf_depths(proc)
    if len(depths) != 1 << n:
        raise ValueError(
            f"procedure covers {len(depths)} outcomes, not the full universe of {1 << n}"
        )
    return LengthVector(n, tuple(depths[m] for m in range(1 << n)))


def outcome_probability(omega: Outcome, priors: Priors) -> Scalar:
    """Probability of one full outcome under independent per-sample priors."""
    ps = check_priors(priors, omega.n)
    prob: Scalar = 1
    for i in range(omega.n):
        prob = prob * (ps[i] if omega.bits >> i & 1 else 1 - ps[i])
    return prob


def outcome_probabilities(n: int, priors: Priors) -> list[Scalar]:
    """All 2^n outcome probabilities, indexed by outcome mask."""
    ps = check_priors(priors, n)
    probs: list[Scalar] = [1]
    for i in range(n):
        p = ps[i]
        q = 1 - p
        probs = [w * q for w in probs] + [w * p for w in probs]
    return probs


def set_probability(outcomes: OutcomeSet, priors: Priors) -> Scalar:
    """Total probability of an outcome set; 1 on the full universe."""
    ps = check_priors(priors, outcomes.n)
    total: Scalar = 0
    for m in outcomes.masks:
        prob: Scalar = 1
        for i in range(outcomes.n):
            prob = prob * (ps[i] if m >> i & 1 else 1 - ps[i])
        total = total + prob
    return total


def expected_length(
    proc_or_lengths: Procedure | LengthVector,
    priors: Priors,
    mode: str = "auto",
    max_n: int = MAX_EXPLICIT_N,
) -> Scalar:
    """Expected number of pooled tests: sum over outcomes of depth * probability."""
    if isinstance(proc_or_lengths, LengthVector):
        lv = proc_or_lengths
    else:
        lv = length_vector(proc_or_lengths)
    if lv.n > max_n:
        raise UnsupportedSizeError(
            f"explicit expected-length evaluation is limited to n <= {max_n} "
            f"(2^n terms); use simulation for n={lv.n}",
            limit=max_n,
            n=lv.n,
        )
    ps = coerce_priors(priors, mode)
    if len(ps) != lv.n:
        raise ValueError(f"expected {lv.n} priors, got {len(ps)}")
    probs = outcome_probabilities(lv.n, ps)
    total: Scalar = 0
    for m, d in enumerate(lv.depths):
        if d:
            total = total + d * probs[m]
    return total


def conditional_expected_length(
    proc: Procedure, outcomes: OutcomeSet, priors: Priors
) -> Scalar:
    """Expected tests of a subtree given that the truth lies in `outcomes`.

    Priors are renormalized to the surviving outcome set; the subtree must
    cover exactly that set.
    """
    if core.leaf_masks(proc) != outcomes.masks:
        raise ValueError("subtree leaves do not match the surviving outcome set")
    ps = check_priors(priors, outcomes.n)
    depths = core.leaf_depths(proc)
    total: Scalar = 0
    weight: Scalar = 0
    for m, d in depths.items():
        prob: Scalar = 1
        for i in range(outcomes.n):
            prob = prob * (ps[i] if m >> i & 1 else 1 - ps[i])
        weight = weight + prob
        total = total + d * prob
    if weight == 0:
        return 0 if isinstance(weight, Fraction) else 0.0
    return total / weight
