"""Optimality-zone decomposition of the prior hypercube.

A zone map samples the ordered simplex {1 >= p_1 >= ... >= p_n >= 0} on a
regular grid of cell centers, assigns each point the procedure that
minimizes expected length there, and recovers the full cube through
coordinate permutations. Two procedures with the same length vector are
the same polynomial, so zones are identified by length vector.

Grid points sit at cell centers ((i + 1/2) / R), never exactly at 0, 1/2
or 1, which keeps degenerate ties off the grid. The zone census counts
length vectors assigned at strictly ordered grid points (no tied
coordinates) expanded through all n! permutations: every full-dimensional
zone intersects some strict image, while points on the diagonal planes
would otherwise report tie artifacts.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import core, optimizer, probability
from .core import Permutation, Procedure
from .errors import DecodeError, PoolTestError, UnsupportedSizeError
from .probability import Priors

DEFAULT_RESOLUTIONS = {1: 256, 2: 512, 3: 128, 4: 32}
MAX_ZONES_N = 4
_OUTSIDE = 0xFFFF  # slice cells outside the unit cube

FILE_FORMAT = "pooltest-zonemap-v1"


# ---------------------------------------------------------------------------
# n=2 analytic frontiers

CUTOFF = (3 - math.sqrt(5)) / 2


@dataclass(frozen=True)
class FrontierN2:
    """The three analytic frontier curves of the n=2 decomposition.

    Zone A (individual testing) touches B and C along two hyperbola arcs,
    B and C meet on the diagonal, and all three meet at the cutoff point
    ((3 - sqrt 5)/2, (3 - sqrt 5)/2).
    """

    triple_point: tuple[float, float]

    @staticmethod
    def ab_curve(x1: float) -> float:
        """x2 on the A/B frontier, defined for x1 in [cutoff, 1]."""
        return (x1 - 1) / (x1 - 2)

    @staticmethod
    def ac_curve(x1: float) -> float:
        """x2 on the A/C frontier, defined for x1 in [0, cutoff]."""
        return (2 * x1 - 1) / (x1 - 1)

    @staticmethod
    def bc_curve(x1: float) -> float:
        """x2 on the B/C frontier (the diagonal), for x1 in [0, cutoff]."""
        return x1


def frontier_n2() -> FrontierN2:
    return FrontierN2(triple_point=(CUTOFF, CUTOFF))


def classify_n2(p: Priors) -> str:
    """Analytic zone tag for n=2: A naive, B pool-right, C pool-left.

    Boundary points carry the tag the optimizer's tie-break would pick:
    A on the A-frontiers, C on the diagonal.
    """
    ps = probability.check_priors(p, 2)
    x1, x2 = float(ps[0]), float(ps[1])
    right_beats_naive = 1 + x1 + 2 * x2 - x1 * x2 < 2
    left_beats_naive = 1 + 2 * x1 + x2 - x1 * x2 < 2
    if not right_beats_naive and not left_beats_naive:
        return "A"
    return "C" if x1 <= x2 else "B"


# ---------------------------------------------------------------------------
# simplex grid bookkeeping


def simplex_indices(n: int, resolution: int) -> np.ndarray:
    """All non-increasing n-tuples over {0..R-1} in lexicographic order."""
    cache: dict[tuple[int, int], np.ndarray] = {}

    def build(k: int, bound: int) -> np.ndarray:
        if k == 0:
            return np.zeros((1, 0), dtype=np.int32)
        key = (k, bound)
        hit = cache.get(key)
        if hit is not None:
            return hit
        blocks = []
        for v in range(bound + 1):
            sub = build(k - 1, v)
            col = np.full((len(sub), 1), v, dtype=np.int32)
            blocks.append(np.hstack([col, sub]))
        out = np.vstack(blocks)
        cache[key] = out
        return out

    return build(n, resolution - 1)


def simplex_size(n: int, resolution: int) -> int:
    return math.comb(resolution + n - 1, n)


def simplex_rank(idx: Sequence[int]) -> int:
    """Lexicographic rank of a non-increasing index tuple in the grid order."""
    n = len(idx)
    rank = 0
    for j, i in enumerate(idx):
        rank += math.comb(i + n - j - 1, n - j)
    return rank


def _probability_columns(points: np.ndarray, n: int) -> np.ndarray:
    """(N, 2^n) outcome probabilities for an (N, n) array of prior points."""
    out = np.empty((len(points), 1 << n))
    for m in range(1 << n):
        col = np.ones(len(points))
        for i in range(n):
            col = col * (points[:, i] if (m >> i) & 1 else 1.0 - points[:, i])
        out[:, m] = col
    return out


# ---------------------------------------------------------------------------
# candidate procedures (n <= 3: every distinct length vector)


@lru_cache(maxsize=None)
def _candidates(n: int) -> tuple[np.ndarray, tuple[Procedure, ...]]:
    """Distinct length vectors over all procedures, with min-key representatives,
    ordered by representative tree key (so argmin index 0 wins ties)."""
    bykey: dict[tuple[int, ...], tuple] = {}
    for proc, lv, key in optimizer.enumerated_with_lengths(n):
        old = bykey.get(lv.depths)
        if old is None or key < old[0]:
            bykey[lv.depths] = (key, proc)
    ordered = sorted(bykey.items(), key=lambda kv: kv[1][0])
    matrix = np.array([list(depths) for depths, _ in ordered], dtype=float)
    reps = tuple(entry[1] for _, entry in ordered)
    return matrix, reps


# ---------------------------------------------------------------------------
# the zone map


@dataclass(frozen=True)
class ZoneMap:
    """Sampled metaprocedure: simplex grid assignment plus procedure table.

    `procedures` is the full-cube table (one entry per distinct length
    vector seen anywhere, including permuted images); `assignment` holds a
    table id per simplex grid point, in the lexicographic grid order.
    `census_ids` are the table ids counted as genuine zones.
    """

    n: int
    resolution: int
    domain: str
    mode: str
    seed: int
    procedures: tuple[str, ...]
    assignment: np.ndarray
    census_ids: tuple[int, ...]

    @property
    def zone_count(self) -> int:
        return len(self.census_ids)

    def procedure(self, zone_id: int) -> Procedure:
        return _decode_cached(self.procedures[zone_id])

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "resolution": self.resolution,
            "domain": self.domain,
            "mode": self.mode,
            "seed": self.seed,
            "zone_count": self.zone_count,
            "grid_points": len(self.assignment),
            "table_size": len(self.procedures),
        }


@lru_cache(maxsize=4096)
def _decode_cached(text: str) -> Procedure:
    return core.decode(text)


def _permutations(n: int) -> list[Permutation]:
    return [Permutation(p) for p in itertools.permutations(range(1, n + 1))]


def compute_metaprocedure(
    n: int,
    resolution: int | None = None,
    mode: str = "float",
    progress: Callable[[float], None] | None = None,
) -> ZoneMap:
    """Sample the ordered simplex and assign each grid point its optimal
    procedure; expand through all permutations for the full-cube census.

    n <= 3 evaluates every distinct length vector on the whole grid at
    once; n = 4 runs the point optimizer per grid point and is slow at the
    default resolution (documented runtime, minutes).
    """
    if not 1 <= n <= MAX_ZONES_N:
        raise UnsupportedSizeError(
            f"zone maps are supported for n <= {MAX_ZONES_N}", limit=MAX_ZONES_N, n=n
        )
    if resolution is None:
        resolution = DEFAULT_RESOLUTIONS[n]
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if mode not in ("float", "exact"):
        raise ValueError(f"unknown mode {mode!r}")

    idx = simplex_indices(n, resolution)
    points = (idx + 0.5) / resolution

    if n <= 3:
        matrix, reps = _candidates(n)
        assigned = np.empty(len(points), dtype=np.int64)
        chunk = 65536
        for start in range(0, len(points), chunk):
            block = points[start : start + chunk]
            vals = _probability_columns(block, n) @ matrix.T
            assigned[start : start + len(block)] = vals.argmin(axis=1)
            if progress is not None:
                progress(min(1.0, (start + len(block)) / len(points)))
        lv_of = lambda i: tuple(int(x) for x in matrix[i])
        rep_of = lambda i: reps[i]
    else:
        lv_index: dict[tuple[int, ...], int] = {}
        lv_reps: list[Procedure] = []
        lv_list: list[tuple[int, ...]] = []
        assigned = np.empty(len(points), dtype=np.int64)
        for t, p in enumerate(points):
            tree = optimizer.find_optimal([float(x) for x in p])
            depths = probability.length_vector(tree).depths
            local = lv_index.get(depths)
            if local is None:
                local = len(lv_list)
                lv_index[depths] = local
                lv_list.append(depths)
                lv_reps.append(tree)
            assigned[t] = local
            if progress is not None and t % 512 == 0:
                progress(t / len(points))
        lv_of = lambda i: lv_list[i]
        rep_of = lambda i: lv_reps[i]

    if mode == "exact" and n <= 3:
        assigned = _refine_exact(idx, assigned, resolution, n)

    # Full-cube table: every permuted image of every assigned length vector.
    sigmas = _permutations(n)
    registry: dict[tuple[int, ...], tuple] = {}
    for local in sorted(set(assigned.tolist())):
        rep = rep_of(local)
        for sigma in sigmas:
            image = core.apply_permutation(rep, sigma)
            depths = probability.length_vector(image).depths
            key = core.tree_key(image)
            old = registry.get(depths)
            if old is None or key < old[0]:
                registry[depths] = (key, image)
    ordered = sorted(registry.items(), key=lambda kv: kv[1][0])
    table_id = {depths: i for i, (depths, _) in enumerate(ordered)}
    table = tuple(core.encode(entry[1]) for _, entry in ordered)

    assignment = np.array(
        [table_id[lv_of(local)] for local in assigned], dtype=np.uint16
    )

    # Census: strictly ordered points only, expanded through permutations.
    strict = np.ones(len(idx), dtype=bool)
    if n > 1:
        strict = (np.diff(idx, axis=1) < 0).all(axis=1)
    census: set[tuple[int, ...]] = set()
    for local in sorted(set(assigned[strict].tolist())):
        rep = rep_of(local)
        for sigma in sigmas:
            image = core.apply_permutation(rep, sigma)
            census.add(probability.length_vector(image).depths)
    census_ids = tuple(sorted(table_id[d] for d in census))

    return ZoneMap(
        n=n,
        resolution=resolution,
        domain="simplex",
        mode=mode,
        seed=0,
        procedures=table,
        assignment=assignment,
        census_ids=census_ids,
    )


def _refine_exact(
    idx: np.ndarray, assigned: np.ndarray, resolution: int, n: int
) -> np.ndarray:
    """Re-evaluate boundary-suspect cells with rational arithmetic.

    A cell is suspect when a grid neighbor carries a different id; floats
    can misrank near-tied polynomials right on zone borders.
    """
    matrix, _ = _candidates(n)
    exact_rows = [tuple(Fraction(int(d)) for d in row) for row in matrix.astype(int)]
    rank_cache: dict[tuple[int, ...], int] = {}

    def rank_of(t: tuple[int, ...]) -> int:
        r = rank_cache.get(t)
        if r is None:
            r = simplex_rank(t)
            rank_cache[t] = r
        return r

    suspects = set()
    for row, own in zip(idx, assigned):
        t = tuple(int(v) for v in row)
        me = rank_of(t)
        for j in range(n):
            for d in (-1, 1):
                nb = list(t)
                nb[j] += d
                if nb[j] < 0 or nb[j] >= resolution:
                    continue
                nb_sorted = tuple(sorted(nb, reverse=True))
                other = rank_of(nb_sorted)
                if assigned[other] != own:
                    suspects.add(me)
                    break
    out = assigned.copy()
    for me in suspects:
        t = idx[me]
        point = [Fraction(2 * int(v) + 1, 2 * resolution) for v in t]
        probs = probability.outcome_probabilities(n, point)
        best = None
        for cand, row in enumerate(exact_rows):
            val = sum(d * probs[m] for m, d in enumerate(row))
            if best is None or val < best[0]:
                best = (val, cand)
        out[me] = best[1]
    return out


# ---------------------------------------------------------------------------
# queries


def lookup(zonemap: ZoneMap, p: Priors) -> Procedure:
    """Procedure of the nearest grid point, un-permuted back to the query.

    The query point is sorted into the simplex, snapped to the nearest cell
    center, and the stored procedure is relabeled through the permutation
    that sorted the point.
    """
    ps = probability.check_priors(p, zonemap.n)
    values = [float(x) for x in ps]
    order = sorted(range(zonemap.n), key=lambda i: -values[i])
    sigma = Permutation(tuple(i + 1 for i in order))
    sorted_vals = [values[i] for i in order]
    cells = [min(zonemap.resolution - 1, max(0, int(v * zonemap.resolution))) for v in sorted_vals]
    zone_id = int(zonemap.assignment[simplex_rank(tuple(cells))])
    return core.apply_permutation(zonemap.procedure(zone_id), sigma)


def lookup_id(zonemap: ZoneMap, p: Sequence[float]) -> int:
    """Full-table id of the procedure `lookup` would return at p."""
    proc = lookup(zonemap, p)
    depths = probability.length_vector(proc).depths
    lv_to_id = _table_lv_index(zonemap)
    zone_id = lv_to_id.get(depths)
    if zone_id is None:
        raise PoolTestError("permuted procedure missing from the zone table")
    return zone_id


def _table_lv_index(zonemap: ZoneMap) -> dict[tuple[int, ...], int]:
    cached = getattr(zonemap, "_lv_index", None)
    if cached is None:
        cached = {
            probability.length_vector(zonemap.procedure(i)).depths: i
            for i in range(len(zonemap.procedures))
        }
        object.__setattr__(zonemap, "_lv_index", cached)
    return cached


@dataclass(frozen=True)
class SliceResult:
    """A 2D grid of zone ids on a plane through the cube."""

    plane: str
    value: float
    resolution: int
    ids: np.ndarray  # (resolution, resolution) int32, OUTSIDE where out of cube
    legend: dict[int, str]

    OUTSIDE = _OUTSIDE

    def distinct_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.ids.ravel().tolist()) - {_OUTSIDE}))


def slice_zonemap(zonemap: ZoneMap, plane: str, resolution: int = 256) -> SliceResult:
    """Zone ids on an axis-aligned plane (x=, y=, z=) or a plane orthogonal
    to the main diagonal (diag=t through the point (t,t,t)).

    Sample 1 is the x axis, sample 2 the y axis, sample 3 the z axis.
    ids[row, col] walks the first free axis along columns and the second
    along rows; diagonal slices use an orthonormal in-plane basis and mark
    points outside the cube with SliceResult.OUTSIDE.
    """
    if zonemap.n != 3:
        raise UnsupportedSizeError("slices are defined for n=3 zone maps", n=zonemap.n)
    try:
        axis_name, raw = plane.split("=")
        value = float(raw)
    except ValueError as exc:
        raise ValueError(f"plane must look like 'z=0.17' or 'diag=0.3', got {plane!r}") from exc
    axis_name = axis_name.strip().lower()

    centers = (np.arange(resolution) + 0.5) / resolution
    ids = np.full((resolution, resolution), _OUTSIDE, dtype=np.int32)
    if axis_name in ("x", "y", "z"):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"plane {plane!r} lies outside the unit cube")
        fixed = "xyz".index(axis_name)
        free = [i for i in range(3) if i != fixed]
        point = [0.0, 0.0, 0.0]
        point[fixed] = value
        for row in range(resolution):
            point[free[1]] = centers[row]
            for col in range(resolution):
                point[free[0]] = centers[col]
                ids[row, col] = _lookup_id_fast(zonemap, point)
    elif axis_name == "diag":
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"diagonal offset must be in [0, 1], got {value}")
        e1 = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
        e2 = np.array([1.0, 1.0, -2.0]) / math.sqrt(6)
        center = np.array([value, value, value])
        span = math.sqrt(2)
        coords = (np.arange(resolution) + 0.5) / resolution * 2 * span - span
        for row in range(resolution):
            for col in range(resolution):
                point = center + coords[col] * e1 + coords[row] * e2
                if (point < 0).any() or (point > 1).any():
                    continue
                ids[row, col] = _lookup_id_fast(zonemap, point.tolist())
    else:
        raise ValueError(f"unknown plane axis {axis_name!r}")

    legend = {
        int(i): zonemap.procedures[int(i)]
        for i in sorted(set(ids.ravel().tolist()) - {_OUTSIDE})
    }
    return SliceResult(plane=plane, value=value, resolution=resolution, ids=ids, legend=legend)


def _lookup_id_fast(zonemap: ZoneMap, point: Sequence[float]) -> int:
    """lookup_id without building trees: permute the stored length vector."""
    n = zonemap.n
    values = list(point)
    order = sorted(range(n), key=lambda i: -values[i])
    cells = tuple(
        min(zonemap.resolution - 1, max(0, int(values[i] * zonemap.resolution)))
        for i in order
    )
    simplex_id = int(zonemap.assignment[simplex_rank(cells)])
    if all(order[i] == i for i in range(n)):
        return simplex_id
    base = probability.length_vector(zonemap.procedure(simplex_id)).depths
    permuted = [0] * len(base)
    for mask, depth in enumerate(base):
        image = 0
        for j in range(n):
            if mask >> j & 1:
                image |= 1 << order[j]
        permuted[image] = depth
    return _table_lv_index(zonemap)[tuple(permuted)]


def square_map(zonemap: ZoneMap, resolution: int = 256) -> SliceResult:
    """Zone ids over the whole unit square of a 2-sample zone map.

    ids[row, col] uses sample 1 along columns and sample 2 along rows, both
    at cell centers.
    """
    if zonemap.n != 2:
        raise UnsupportedSizeError("square maps are defined for n=2 zone maps", n=zonemap.n)
    centers = (np.arange(resolution) + 0.5) / resolution
    ids = np.empty((resolution, resolution), dtype=np.int32)
    for row in range(resolution):
        for col in range(resolution):
            ids[row, col] = _lookup_id_fast(zonemap, [centers[col], centers[row]])
    legend = {
        int(i): zonemap.procedures[int(i)] for i in sorted(set(ids.ravel().tolist()))
    }
    return SliceResult(plane="full", value=0.0, resolution=resolution, ids=ids, legend=legend)


def refine_boundary(
    p1: Priors,
    p2: Priors,
    procedures: tuple[Procedure, Procedure] | None = None,
    tol: float = 1e-9,
) -> tuple[float, ...]:
    """Bisect the segment [p1, p2] for the zone border crossing, exactly.

    With an explicit procedure pair, bisection tracks the sign of the
    difference of their two expected-length polynomials; otherwise it
    tracks the optimizer's assigned length vector. The two endpoints must
    disagree. All arithmetic is rational; the returned point is within
    `tol` of the crossing along every coordinate.
    """
    a = tuple(Fraction(x) if not isinstance(x, Fraction) else x for x in p1)
    b = tuple(Fraction(x) if not isinstance(x, Fraction) else x for x in p2)
    if len(a) != len(b):
        raise ValueError("endpoints must have the same dimension")

    def point_at(t: Fraction) -> tuple[Fraction, ...]:
        return tuple(x + t * (y - x) for x, y in zip(a, b))

    if procedures is not None:
        lv_a = probability.length_vector(procedures[0])
        lv_b = probability.length_vector(procedures[1])

        def tag(t: Fraction):
            x = point_at(t)
            diff = probability.expected_length(lv_a, x) - probability.expected_length(lv_b, x)
            return diff > 0
    else:

        def tag(t: Fraction):
            return probability.length_vector(
                optimizer.find_optimal(point_at(t))
            ).depths

    lo, hi = Fraction(0), Fraction(1)
    tag_lo, tag_hi = tag(lo), tag(hi)
    if tag_lo == tag_hi:
        raise ValueError("the two endpoints have the same assignment; nothing to refine")
    span = max(abs(y - x) for x, y in zip(a, b))
    while (hi - lo) * span > Fraction(tol):
        mid = (lo + hi) / 2
        if tag(mid) == tag_lo:
            lo = mid
        else:
            hi = mid
    mid = (lo + hi) / 2
    return tuple(float(x) for x in point_at(mid))


def orbit_census(zonemap: ZoneMap) -> list[tuple[Procedure, int]]:
    """Group the census zones into coordinate-permutation orbits.

    Returns (representative, orbit size) pairs, largest orbits first; the
    representative is the tree-order minimum of its orbit.
    """
    sigmas = _permutations(zonemap.n)
    remaining = {
        probability.length_vector(zonemap.procedure(i)).depths: i
        for i in zonemap.census_ids
    }
    orbits: list[tuple[Procedure, int]] = []
    while remaining:
        depths, zone_id = next(iter(sorted(remaining.items())))
        base = zonemap.procedure(zone_id)
        members: set[tuple[int, ...]] = set()
        best = None
        for sigma in sigmas:
            image = core.apply_permutation(base, sigma)
            image_depths = probability.length_vector(image).depths
            if image_depths in remaining:
                members.add(image_depths)
                key = core.tree_key(image)
                if best is None or key < best[0]:
                    best = (key, image)
        for d in members:
            del remaining[d]
        orbits.append((best[1], len(members)))
    orbits.sort(key=lambda item: (-item[1], core.tree_key(item[0])))
    return orbits


# ---------------------------------------------------------------------------
# persistence


def save_zonemap(zonemap: ZoneMap, path: str | Path) -> None:
    payload = zonemap.assignment.astype("<u2").tobytes()
    digest = _digest(zonemap, payload)
    doc = {
        "format": FILE_FORMAT,
        "n": zonemap.n,
        "resolution": zonemap.resolution,
        "domain": zonemap.domain,
        "mode": zonemap.mode,
        "seed": zonemap.seed,
        "census_ids": list(zonemap.census_ids),
        "procedures": list(zonemap.procedures),
        "assignment_b64": base64.b64encode(payload).decode("ascii"),
        "sha256": digest,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="ascii")


def load_zonemap(path: str | Path) -> ZoneMap:
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DecodeError(f"cannot read zone map {path}: {exc}") from exc
    if doc.get("format") != FILE_FORMAT:
        raise DecodeError(f"{path} is not a {FILE_FORMAT} file")
    payload = base64.b64decode(doc["assignment_b64"])
    assignment = np.frombuffer(payload, dtype="<u2").astype(np.uint16)
    zonemap = ZoneMap(
        n=int(doc["n"]),
        resolution=int(doc["resolution"]),
        domain=doc["domain"],
        mode=doc["mode"],
        seed=int(doc["seed"]),
        procedures=tuple(doc["procedures"]),
        assignment=assignment,
        census_ids=tuple(int(i) for i in doc["census_ids"]),
    )
    if _digest(zonemap, payload) != doc["sha256"]:
        raise DecodeError(f"zone map {path} failed its integrity check")
    if len(assignment) != simplex_size(zonemap.n, zonemap.resolution):
        raise DecodeError(f"zone map {path} has a truncated assignment array")
    return zonemap


def _digest(zonemap: ZoneMap, payload: bytes) -> str:
    h = hashlib.sha256()
    header = f"{zonemap.n}|{zonemap.resolution}|{zonemap.domain}|{zonemap.mode}|{zonemap.seed}|"
    h.update(header.encode("ascii"))
    h.update("\n".join(zonemap.procedures).encode("ascii"))
    h.update(payload)
    return h.hexdigest()
