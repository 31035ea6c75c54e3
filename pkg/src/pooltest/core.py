"""Core domain types for pooled-testing decision trees.

Encoding convention, used everywhere in this package: outcome bit i = 1
means sample i is INFECTED, 0 means clean. A pooled test on a pool T is
POSITIVE iff at least one sample in T is infected, NEGATIVE iff all pooled
samples are clean. Priors are per-sample infection probabilities. Readers
used to the dual formalism (tests returning the logical AND of per-sample
"healthy" bits, leaves labelled with healthy bits) can translate by
complementing every outcome string; pool labels and infection
probabilities are unchanged.

Outcome strings are written with sample 1 leftmost: "010" means sample 2
infected, samples 1 and 3 clean. Internally outcomes and pools are bit
masks carrying bit (i - 1) for sample i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .errors import DecodeError


def _check_n(n: int) -> None:
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"sample count must be a positive integer, got {n!r}")


def _members_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_sort_key(mask: int) -> tuple[int, tuple[int, ...]]:
    """Total order on pool masks: smaller cardinality first, then lexicographic
    on the sorted member list."""
    return (mask.bit_count(), _members_of(mask))


@dataclass(frozen=True)
class Pool:
    """A non-empty subset of sample indices submitted to one pooled test."""

    n: int
    mask: int

    def __post_init__(self) -> None:
        _check_n(self.n)
        if not 0 < self.mask < (1 << self.n):
            raise ValueError(
                f"pool mask {self.mask:#x} is not a non-empty subset of [1..{self.n}]"
            )

    @classmethod
    def of(cls, members, n: int) -> "Pool":
        mask = 0
        for i in members:
            if not 1 <= i <= n:
                raise ValueError(f"sample index {i} outside [1..{n}]")
            mask |= 1 << (i - 1)
        return cls(n, mask)

    @property
    def members(self) -> tuple[int, ...]:
        return _members_of(self.mask)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return mask_sort_key(self.mask)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class Outcome:
    """An n-bit infection status vector; bit i = 1 iff sample i is infected."""

    n: int
    bits: int

    def __post_init__(self) -> None:
        _check_n(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"outcome bits {self.bits:#x} do not fit in {self.n} samples")

    @classmethod
    def from_string(cls, text: str) -> "Outcome":
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"outcome string must be non-empty over 0/1, got {text!r}")
        bits = 0
        for i, c in enumerate(text):
            if c == "1":
                bits |= 1 << i
        return cls(len(text), bits)

    @property
    def string(self) -> str:
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.n))

    def bit(self, i: int) -> int:
        """Status of sample i (1-based): 1 infected, 0 clean."""
        if not 1 <= i <= self.n:
            raise ValueError(f"sample index {i} outside [1..{self.n}]")
        return self.bits >> (i - 1) & 1

    @property
    def infected(self) -> tuple[int, ...]:
        return _members_of(self.bits)

    def __str__(self) -> str:
        return self.string


@dataclass(frozen=True)
class OutcomeSet:
    """A finite set of same-length outcomes, stored as a frozenset of masks."""

    n: int
    masks: frozenset[int]

    def __post_init__(self) -> None:
        _check_n(self.n)
        top = 1 << self.n
        for m in self.masks:
            if not 0 <= m < top:
                raise ValueError(f"outcome mask {m:#x} does not fit in {self.n} samples")

    @classmethod
    def full_universe(cls, n: int) -> "OutcomeSet":
        _check_n(n)
        return cls(n, frozenset(range(1 << n)))

    @classmethod
    def of(cls, outcomes, n: int | None = None) -> "OutcomeSet":
        outcomes = [
            o if isinstance(o, Outcome) else Outcome.from_string(o) for o in outcomes
        ]
        if n is None:
            if not outcomes:
                raise ValueError("cannot infer n from an empty outcome collection")
            n = outcomes[0].n
        for o in outcomes:
            if o.n != n:
                raise ValueError(f"mixed outcome lengths: {o.n} vs {n}")
        return cls(n, frozenset(o.bits for o in outcomes))

    def outcomes(self) -> Iterator[Outcome]:
        for m in sorted(self.masks):
            yield Outcome(self.n, m)

    def __len__(self) -> int:
        return len(self.masks)

    def __contains__(self, item) -> bool:
        if isinstance(item, Outcome):
            return item.n == self.n and item.bits in self.masks
        return item in self.masks

    def __str__(self) -> str:
        return "{" + ",".join(o.string for o in self.outcomes()) + "}"


@dataclass(frozen=True)
class Permutation:
    """A bijection on sample indices [1..n]; mapping[i-1] is the image of i."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.mapping) != list(range(1, len(self.mapping) + 1)):
            raise ValueError(f"not a permutation of 1..{len(self.mapping)}: {self.mapping}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def swap(cls, n: int, a: int, b: int) -> "Permutation":
        images = list(range(1, n + 1))
        images[a - 1], images[b - 1] = images[b - 1], images[a - 1]
        return cls(tuple(images))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i - 1]

    def on_mask(self, mask: int) -> int:
        out = 0
        for i in range(self.n):
            if mask >> i & 1:
                out |= 1 << (self.mapping[i] - 1)
        return out

    def on_point(self, xs) -> tuple:
        """Coordinate action paired with on_mask: (sigma(x))_j = x_{sigma(j)}."""
        if len(xs) != self.n:
            raise ValueError(f"point has {len(xs)} coordinates, permutation acts on {self.n}")
        return tuple(xs[self.mapping[j] - 1] for j in range(self.n))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, img in enumerate(self.mapping):
            inv[img - 1] = i + 1
        return Permutation(tuple(inv))


@dataclass(frozen=True)
class Leaf:
    """A terminal node naming the full infection status vector."""

    outcome: Outcome


@dataclass(frozen=True)
class Node:
    """An internal node: test `pool`, then branch on the pooled result."""

    pool: Pool
    on_negative: "Procedure"
    on_positive: "Procedure"


Procedure = Union[Leaf, Node]


@dataclass(frozen=True)
class ValidationReport:
    """Findings from checking a procedure tree; empty means valid."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# splitting and decided samples


def split(outcomes: OutcomeSet, pool: Pool) -> tuple[OutcomeSet, OutcomeSet]:
    """Partition an outcome set by a pooled test's result.

    The negative part holds the outcomes in which every pooled sample is
    clean; the positive part is the rest. The two parts are disjoint and
    their union is the input.
    """
    if outcomes.n != pool.n:
        raise ValueError(f"outcome set has n={outcomes.n} but pool has n={pool.n}")
    neg = frozenset(m for m in outcomes.masks if m & pool.mask == 0)
    pos = outcomes.masks - neg
    return OutcomeSet(outcomes.n, neg), OutcomeSet(outcomes.n, pos)


def decided_points(outcomes: OutcomeSet) -> tuple[frozenset[int], frozenset[int]]:
    """Samples whose status is identical across all outcomes in the set.

    Returns (cleanDecided, infectedDecided) as sets of 1-based indices.
    """
    if not outcomes.masks:
        raise ValueError("decided_points requires a non-empty outcome set")
    clean_mask, infected_mask = _decided_masks(outcomes.masks, outcomes.n)
    return frozenset(_members_of(clean_mask)), frozenset(_members_of(infected_mask))


def _decided_masks(masks, n: int) -> tuple[int, int]:
    """(clean_mask, infected_mask) over a non-empty iterable of masks."""
    full = (1 << n) - 1
    and_all = full
    or_all = 0
    for m in masks:
        and_all &= m
        or_all |= m
    return full ^ or_all, and_all


# ---------------------------------------------------------------------------
# tree basics


def proc_n(proc: Procedure) -> int:
    while isinstance(proc, Node):
        proc = proc.on_negative
    return proc.outcome.n


def iter_leaves(proc: Procedure) -> Iterator[Leaf]:
    stack = [proc]
    while stack:
        t = stack.pop()
        if isinstance(t, Leaf):
            yield t
        else:
            stack.append(t.on_positive)
            stack.append(t.on_negative)


def leaf_masks(proc: Procedure) -> frozenset[int]:
    return frozenset(leaf.outcome.bits for leaf in iter_leaves(proc))


def leaf_depths(proc: Procedure) -> dict[int, int]:
    """Outcome mask -> number of pooled tests on the root-to-leaf path."""
    depths: dict[int, int] = {}
    stack = [(proc, 0)]
    while stack:
        t, d = stack.pop()
        if isinstance(t, Leaf):
            depths[t.outcome.bits] = d
        else:
            stack.append((t.on_positive, d + 1))
            stack.append((t.on_negative, d + 1))
    return depths


def node_count(proc: Procedure) -> int:
    return sum(1 for _ in iter_leaves(proc)) - 1


def leaf_for(proc: Procedure, truth: Outcome | int) -> tuple[Outcome, int]:
    """Execute the tree against a ground-truth outcome.

    Each pooled test answers positive iff the truth shares a sample with the
    pool. Returns the reached leaf outcome and the number of tests used.
    """
    mask = truth.bits if isinstance(truth, Outcome) else truth
    tests = 0
    while isinstance(proc, Node):
        proc = proc.on_positive if mask & proc.pool.mask else proc.on_negative
        tests += 1
    return proc.outcome, tests


def tree_key(proc: Procedure):
    """Deterministic total order on trees: leaves first, then by pool and children."""
    if isinstance(proc, Leaf):
        return (0, proc.outcome.bits)
    return (1, proc.pool.sort_key(), tree_key(proc.on_negative), tree_key(proc.on_positive))


def naive_procedure(n: int) -> Procedure:
    """Test every sample individually, in index order; constant length n."""
    _check_n(n)

    def build(prefix: int, i: int) -> Procedure:
        if i > n:
            return Leaf(Outcome(n, prefix))
        bit = 1 << (i - 1)
        return Node(Pool(n, bit), build(prefix, i + 1), build(prefix | bit, i + 1))

    return build(0, 1)


# ---------------------------------------------------------------------------
# validation


def validate(
    proc: Procedure, n: int | None = None, universe: OutcomeSet | None = None
) -> ValidationReport:
    """Check every tree invariant and report all violations found.

    By default the leaf universe must be all 2^n outcomes; pass an explicit
    `universe` to validate a procedure over a restricted outcome set.
    """
    violations: list[str] = []
    if n is None:
        n = proc_n(proc)
    if universe is None:
        universe = OutcomeSet.full_universe(n)
    elif universe.n != n:
        violations.append(f"universe has n={universe.n} but n={n} requested")
        return ValidationReport(tuple(violations))

    leaves = list(iter_leaves(proc))
    seen: dict[int, int] = {}
    for leaf in leaves:
        if leaf.outcome.n != n:
            violations.append(f"leaf {leaf.outcome} has n={leaf.outcome.n}, expected {n}")
        seen[leaf.outcome.bits] = seen.get(leaf.outcome.bits, 0) + 1
    for bits, count in sorted(seen.items()):
        if count > 1:
            violations.append(f"outcome {Outcome(n, bits)} appears on {count} leaves")
    missing = universe.masks - set(seen)
    extra = set(seen) - universe.masks
    for bits in sorted(missing):
        violations.append(f"outcome {Outcome(n, bits)} has no leaf")
    for bits in sorted(extra):
        violations.append(f"leaf outcome {Outcome(n, bits)} is outside the universe")
    if violations:
        # The node-set recursion below assumes the leaf bijection holds.
        return ValidationReport(tuple(violations))

    def walk(t: Procedure, masks: frozenset[int], path: str) -> None:
        if isinstance(t, Leaf):
            if masks != frozenset({t.outcome.bits}):
                got = OutcomeSet(n, masks)
                violations.append(
                    f"leaf {t.outcome} at {path or 'root'} reached with outcome set {got}"
                )
            return
        if t.pool.n != n:
            violations.append(f"pool {t.pool} at {path or 'root'} has n={t.pool.n}")
            return
        neg = frozenset(m for m in masks if m & t.pool.mask == 0)
        pos = masks - neg
        if not neg or not pos:
            side = "negative" if not neg else "positive"
            violations.append(
                f"test {t.pool} at {path or 'root'} is useless: empty {side} part"
            )
            return
        walk(t.on_negative, neg, path + "N")
        walk(t.on_positive, pos, path + "P")

    walk(proc, frozenset(universe.masks), "")
    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# permutation action


def apply_permutation(proc: Procedure, sigma: Permutation) -> Procedure:
    """Relabel every pool member and every leaf outcome through sigma."""
    n = proc_n(proc)
    if sigma.n != n:
        raise ValueError(f"permutation acts on {sigma.n} samples, tree has {n}")

    def walk(t: Procedure) -> Procedure:
        if isinstance(t, Leaf):
            return Leaf(Outcome(n, sigma.on_mask(t.outcome.bits)))
        return Node(
            Pool(n, sigma.on_mask(t.pool.mask)), walk(t.on_negative), walk(t.on_positive)
        )

    return walk(proc)


# ---------------------------------------------------------------------------
# canonical form


def canonicalize(proc: Procedure) -> Procedure:
    """Normal form with the same length vector for every prior vector.

    Two equivalence rewrites alternate until stable:

    * whenever both children of a node test one common pool that precedes
      the node's own pool in the total order, the two levels are exchanged
      (this permutes internal nodes but keeps every leaf at its depth);
    * every pool then absorbs the samples that are clean in all outcomes
      still possible at its node (testing them adds no information, so the
      split is unchanged).

    Idempotent, and the leaf-depth vector is preserved exactly.
    """
    n = proc_n(proc)
    masks = leaf_masks(proc)

    def interchange(t: Procedure) -> Procedure:
        if isinstance(t, Leaf):
            return t
        pool = t.pool
        a = interchange(t.on_negative)
        b = interchange(t.on_positive)
        while (
            isinstance(a, Node)
            and isinstance(b, Node)
            and a.pool.mask == b.pool.mask
            and mask_sort_key(a.pool.mask) < mask_sort_key(pool.mask)
        ):
            demoted = pool
            pool = a.pool
            a, b = (
                interchange(Node(demoted, a.on_negative, b.on_negative)),
                interchange(Node(demoted, a.on_positive, b.on_positive)),
            )
        return Node(pool, a, b)

    def extend(t: Procedure, sset: frozenset[int]) -> Procedure:
        if isinstance(t, Leaf):
            return t
        clean, _ = _decided_masks(sset, n)
        tmask = t.pool.mask | clean
        neg = frozenset(m for m in sset if m & tmask == 0)
        return Node(Pool(n, tmask), extend(t.on_negative, neg), extend(t.on_positive, sset - neg))

    # Interchanges strictly sink larger pools and extensions only grow
    # pools, so alternation reaches a fixpoint quickly.
    for _ in range(4 * (1 << n) * n + 8):
        step = extend(interchange(proc), masks)
        if step == proc:
            return proc
        proc = step
    raise AssertionError("canonicalize failed to reach a fixpoint")


# ---------------------------------------------------------------------------
# serialization


def encode(proc: Procedure) -> str:
    """Bit-exact ASCII encoding: leaf `L(bits)`, node `P{i,j}[neg,pos]`."""
    if isinstance(proc, Leaf):
        return f"L({proc.outcome.string})"
    members = ",".join(map(str, proc.pool.members))
    return f"P{{{members}}}[{encode(proc.on_negative)},{encode(proc.on_positive)}]"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> DecodeError:
        return DecodeError(f"{message} at position {self.pos} in {self.text!r}")

    def expect(self, token: str) -> None:
        if not self.text.startswith(token, self.pos):
            raise self.error(f"expected {token!r}")
        self.pos += len(token)

    def take_while(self, allowed: str) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in allowed:
            self.pos += 1
        return self.text[start : self.pos]

    def parse_tree(self) -> tuple:
        if self.text.startswith("L(", self.pos):
            self.pos += 2
            bits = self.take_while("01")
            if not bits:
                raise self.error("expected outcome bits")
            self.expect(")")
            return ("leaf", bits)
        if self.text.startswith("P{", self.pos):
            self.pos += 2
            members = []
            while True:
                digits = self.take_while("0123456789")
                if not digits:
                    raise self.error("expected sample index")
                members.append(int(digits))
                if self.text.startswith(",", self.pos):
                    self.pos += 1
                    continue
                break
            self.expect("}")
            if members != sorted(set(members)):
                raise self.error(f"pool indices must be strictly ascending, got {members}")
            self.expect("[")
            neg = self.parse_tree()
            self.expect(",")
            pos = self.parse_tree()
            self.expect("]")
            return ("node", tuple(members), neg, pos)
        raise self.error("expected 'L(' or 'P{'")


def decode(text: str, universe: OutcomeSet | None = None) -> Procedure:
    """Parse the text encoding and validate the resulting tree.

    With no explicit universe the tree is validated over its own leaf set,
    so encodings of subtrees over restricted outcome sets round-trip too.
    Use `validate(proc, n)` to additionally require the full 2^n universe.
    """
    parser = _Parser(text)
    raw = parser.parse_tree()
    if parser.pos != len(text):
        raise parser.error("trailing characters")

    widths: set[int] = set()

    def scan(node) -> None:
        if node[0] == "leaf":
            widths.add(len(node[1]))
        else:
            scan(node[2])
            scan(node[3])

    scan(raw)
    if len(widths) != 1:
        raise DecodeError(f"inconsistent outcome lengths {sorted(widths)} in {text!r}")
    n = widths.pop()

    def build(node) -> Procedure:
        if node[0] == "leaf":
            return Leaf(Outcome.from_string(node[1]))
        try:
            pool = Pool.of(node[1], n)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
        return Node(pool, build(node[2]), build(node[3]))

    proc = build(raw)
    if universe is None:
        universe = OutcomeSet(n, leaf_masks(proc))
    report = validate(proc, n, universe)
    if not report.ok:
        raise DecodeError(
            f"decoded tree is not a valid procedure: {'; '.join(report.violations)}",
            violations=report.violations,
        )
    return proc


def to_json_dict(proc: Procedure) -> dict:
    """JSON encoding: {"n": int, "tree": {"pool": [...], "neg": ..., "pos": ...}}."""

    def walk(t: Procedure) -> dict:
        if isinstance(t, Leaf):
            return {"leaf": t.outcome.string}
        return {
            "pool": list(t.pool.members),
            "neg": walk(t.on_negative),
            "pos": walk(t.on_positive),
        }

    return {"n": proc_n(proc), "tree": walk(proc)}


def from_json_dict(data: dict, universe: OutcomeSet | None = None) -> Procedure:
    try:
        n = int(data["n"])
        tree = data["tree"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"malformed procedure JSON: {exc}") from exc

    def build(node) -> Procedure:
        if not isinstance(node, dict):
            raise DecodeError(f"malformed tree node: {node!r}")
        if "leaf" in node:
            outcome = Outcome.from_string(node["leaf"])
            if outcome.n != n:
                raise DecodeError(f"leaf {node['leaf']!r} does not have length {n}")
            return Leaf(outcome)
        try:
            pool = Pool.of(node["pool"], n)
            return Node(pool, build(node["neg"]), build(node["pos"]))
        except (KeyError, ValueError) as exc:
            raise DecodeError(f"malformed tree node: {exc}") from exc

    proc = build(tree)
    if universe is None:
        universe = OutcomeSet(n, leaf_masks(proc))
    report = validate(proc, n, universe)
    if not report.ok:
        raise DecodeError(
            f"decoded tree is not a valid procedure: {'; '.join(report.violations)}",
            violations=report.violations,
        )
    return proc
