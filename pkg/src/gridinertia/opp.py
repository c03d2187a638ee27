"""Optimal PMU placement with zero-generation-injection-bus augmentation.

A PMU at bus j observes j and every bus adjacent to it.  Buses carrying no
generator are zero-generation-injection buses (ZGIB); each one links the
buses around it, so a PMU seen through a common ZGIB extends coverage via
an auxiliary binary matrix w.  Bus i is observed when

    sum_j (A + I)_ij x_j  +  sum_j w_ij x_j  >=  1,

i.e. coverage is the elementwise OR of direct neighborhood coverage and
ZGIB-linked coverage.

Two exact solvers are provided: a depth-first branch-and-bound over
exactly-budget subsets (lexicographic order, coverage upper bound), and a
brute-force oracle that enumerates every subset.  Both tie-break to the
lexicographically smallest selected-bus set; searching exactly-budget sets
loses no generality because adding a PMU never lowers the score.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PlacementError

ZGIB_NEIGHBOR_PAIRS = "neighbor_pairs"
ZGIB_DIRECT_LINKS = "zgib_links"
ZGIB_MODES = (ZGIB_NEIGHBOR_PAIRS, ZGIB_DIRECT_LINKS)

OBJECTIVE_MAX_OBSERVABILITY = "max_observability"
OBJECTIVE_MIN_PMUS_FULL = "min_pmus_full"
OBJECTIVES = (OBJECTIVE_MAX_OBSERVABILITY, OBJECTIVE_MIN_PMUS_FULL)

BRUTE_FORCE_LIMIT = 10_000_000


@dataclass(frozen=True, eq=False)
class ZgibSet:
    """ZGIB bus ids (1-based) and the auxiliary link matrix w."""
    buses: tuple
    w: np.ndarray = field(repr=False)
    mode: str = ZGIB_NEIGHBOR_PAIRS


@dataclass(frozen=True)
class Placement:
    """Binary installation vector over buses, in bus-id order."""
    x: tuple
    budget: int

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.x):
            raise PlacementError("placement entries must be 0 or 1")
        if sum(self.x) > self.budget:
            raise PlacementError(
                f"placement uses {sum(self.x)} PMUs, over budget {self.budget}")

    @property
    def selected_buses(self):
        """1-based ids of the buses carrying a PMU."""
        return tuple(i + 1 for i, v in enumerate(self.x) if v)


@dataclass(frozen=True)
class ObservabilityReport:
    o: tuple
    score: int
    fully_observable: bool


def detect_zgib(system, mode=ZGIB_NEIGHBOR_PAIRS):
    """Find the ZGIB buses and build the w matrix.

    mode "neighbor_pairs" (default): w_ij = 1 iff i != j and some common
    ZGIB is adjacent to both i and j.  mode "zgib_links": w instead links
    each ZGIB to its own neighbors; under binary observability those links
    duplicate plain adjacency, which is exactly why the interpretations
    differ (the default one extends coverage, this one does not).
    """
    if mode not in ZGIB_MODES:
        raise PlacementError(f"unknown zgib mode {mode!r}")
    adjacency = system.adjacency().astype(bool)
    n = system.n_buses
    gen_buses = set(system.generator_buses())
    zgib_idx = [i for i in range(n) if (i + 1) not in gen_buses]
    w = np.zeros((n, n), dtype=np.int64)
    if mode == ZGIB_NEIGHBOR_PAIRS:
        for k in zgib_idx:
            around = np.flatnonzero(adjacency[k])
            for a in range(around.size):
                for b in range(a + 1, around.size):
                    w[around[a], around[b]] = 1
                    w[around[b], around[a]] = 1
    else:
        for k in zgib_idx:
            around = np.flatnonzero(adjacency[k])
            w[k, around] = 1
            w[around, k] = 1
    return ZgibSet(buses=tuple(i + 1 for i in zgib_idx), w=w, mode=mode)


def _coverage_matrix(system, zgib):
    """Boolean matrix C with C[i, j] = PMU at j observes bus i."""
    n = system.n_buses
    cover = system.adjacency().astype(bool) | np.eye(n, dtype=bool)
    if zgib is not None:
        if zgib.w.shape != (n, n):
            raise PlacementError(
                f"zgib matrix shape {zgib.w.shape} does not match {n} buses")
        cover |= zgib.w.astype(bool)
    return cover


def observability(placement, system, zgib=None):
    """Evaluate which buses a placement observes."""
    x = np.asarray(placement.x if isinstance(placement, Placement) else placement,
                   dtype=np.int64)
    n = system.n_buses
    if x.shape != (n,):
        raise PlacementError(f"placement length {x.shape} != {n} buses")
    if np.any((x != 0) & (x != 1)):
        raise PlacementError("placement entries must be 0 or 1")
    cover = _coverage_matrix(system, zgib)
    counts = cover @ x
    o = (counts >= 1).astype(int)
    score = int(o.sum())
    return ObservabilityReport(o=tuple(int(v) for v in o), score=score,
                               fully_observable=score == n)


def _cover_masks(system, zgib):
    cover = _coverage_matrix(system, zgib)
    masks = []
    for j in range(cover.shape[0]):
        mask = 0
        for i in np.flatnonzero(cover[:, j]):
            mask |= 1 << int(i)
        masks.append(mask)
    return masks


def _placement_from_indices(indices, n, budget):
    x = [0] * n
    for i in indices:
        x[i] = 1
    return Placement(x=tuple(x), budget=budget)


def _search_max_cover(masks, sites, budget):
    """Lexicographically first exactly-budget subset of `sites` with maximum
    coverage.

    Depth-first search in index order; a subtree is pruned when even the
    `slots` largest remaining per-bus gains cannot beat the incumbent.
    Because the DFS visits subsets in lexicographic order and only strict
    improvements replace the incumbent, the first optimum kept is the
    lexicographically smallest one.
    """
    n = len(sites)
    budget = min(budget, n)
    best_score = -1
    best_set = None

    def dfs(start, chosen, covered, slots):
        nonlocal best_score, best_set
        if slots == 0:
            score = covered.bit_count()
            if score > best_score:
                best_score = score
                best_set = tuple(chosen)
            return
        gains = sorted(((masks[sites[j]] & ~covered).bit_count()
                        for j in range(start, n)), reverse=True)[:slots]
        if covered.bit_count() + sum(gains) <= best_score:
            return
        for j in range(start, n - slots + 1):
            chosen.append(sites[j])
            dfs(j + 1, chosen, covered | masks[sites[j]], slots - 1)
            chosen.pop()

    dfs(0, [], 0, budget)
    return best_set, best_score


def _search_full_cover(masks, sites, size, full_mask):
    """Lexicographically first subset of `sites` of exactly `size` covering
    everything, or None."""
    n = len(sites)
    suffix_union = [0] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix_union[j] = suffix_union[j + 1] | masks[sites[j]]

    def dfs(start, chosen, covered, slots):
        if covered == full_mask and slots == 0:
            return tuple(chosen)
        if slots == 0:
            return None
        if covered | suffix_union[start] != full_mask:
            return None
        for j in range(start, n - slots + 1):
            chosen.append(sites[j])
            found = dfs(j + 1, chosen, covered | masks[sites[j]], slots - 1)
            if found is not None:
                return found
            chosen.pop()
        return None

    return dfs(0, [], 0, size)


def _resolve_sites(system, candidates):
    n = system.n_buses
    if candidates is None:
        return list(range(n))
    sites = sorted({int(b) for b in candidates})
    if not sites:
        raise PlacementError("candidate bus list is empty")
    if sites[0] < 1 or sites[-1] > n:
        raise PlacementError(f"candidate bus ids out of range 1..{n}: {sites}")
    return [b - 1 for b in sites]


def solve_opp(system, budget=None, zgib=None,
              objective=OBJECTIVE_MAX_OBSERVABILITY, candidates=None):
    """Exact placement optimisation.

    max_observability: maximize the number of observed buses using at most
    `budget` PMUs (an exactly-budget optimum always exists).
    min_pmus_full: smallest PMU count observing every bus; `budget` is
    ignored.  Both return (Placement, ObservabilityReport) and tie-break to
    the lexicographically smallest selected-bus set.

    candidates, when given, limits PMU sites to those 1-based bus ids
    (e.g. buses actually present in a measurement bundle); observability is
    still evaluated over the whole system.
    """
    if objective not in OBJECTIVES:
        raise PlacementError(f"unknown objective {objective!r}")
    n = system.n_buses
    masks = _cover_masks(system, zgib)
    sites = _resolve_sites(system, candidates)
    full_mask = (1 << n) - 1
    if objective == OBJECTIVE_MAX_OBSERVABILITY:
        if budget is None or budget < 1:
            raise PlacementError(f"budget must be >= 1, got {budget}")
        best_set, _ = _search_max_cover(masks, sites, budget)
        placement = _placement_from_indices(best_set, n, min(budget, len(sites)))
        return placement, observability(placement, system, zgib)
    for size in range(1, len(sites) + 1):
        found = _search_full_cover(masks, sites, size, full_mask)
        if found is not None:
            placement = _placement_from_indices(found, n, size)
            return placement, observability(placement, system, zgib)
    raise PlacementError(
        "no placement over the candidate buses observes every bus")


def brute_force_opp(system, budget, zgib=None):
    """Exhaustive oracle: enumerate every exactly-budget subset in
    lexicographic order and keep the first maximum-score one."""
    from itertools import combinations

    n = system.n_buses
    if budget is None or budget < 1:
        raise PlacementError(f"budget must be >= 1, got {budget}")
    budget = min(budget, n)
    if math.comb(n, budget) > BRUTE_FORCE_LIMIT:
        raise PlacementError(
            f"C({n}, {budget}) exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    masks = _cover_masks(system, zgib)
    best_score = -1
    best_set = None
    for subset in combinations(range(n), budget):
        covered = 0
        for j in subset:
            covered |= masks[j]
        score = covered.bit_count()
        if score > best_score:
            best_score = score
            best_set = subset
    placement = _placement_from_indices(best_set, n, budget)
    return placement, observability(placement, system, zgib)
