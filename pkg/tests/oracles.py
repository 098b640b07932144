"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's own algorithms: subset products are
enumerated bit-mask style, 2D packing tries every anchor position on a small
occupancy grid, and the 3-D packing oracle enumerates every column partition,
every stacking inside a column and every column-to-macro assignment.
"""

from __future__ import annotations

import functools
from itertools import combinations


def brute_max_subset_product(factors, cap: int) -> int:
    """Exhaustive maximum sub-multiset product <= cap (factors: list of ints)."""
    best = 1
    n = len(factors)
    for mask in range(1 << n):
        p = 1
        for i in range(n):
            if (mask >> i) & 1:
                p *= factors[i]
                if p > cap:
                    break
        if p <= cap and p > best:
            best = p
    return best


def exhaustive_2d_fits(rects, width: int, height: int) -> bool:
    """True iff the rectangles fit into width x height without rotation.

    Complete search over all integer anchor positions with an occupancy
    bitmask; only intended for grids of at most 64 cells.
    """
    cells = width * height
    assert cells <= 64, "oracle grids must stay tiny"
    rects = tuple(sorted(rects, reverse=True))
    return _exhaustive_2d_cached(rects, width, height)


@functools.lru_cache(maxsize=None)
def _exhaustive_2d_cached(rects, width, height):
    if any(w > width or h > height for w, h in rects):
        return False
    if sum(w * h for w, h in rects) > width * height:
        return False

    def mask_for(x, y, w, h):
        m = 0
        for i in range(x, x + w):
            for j in range(y, y + h):
                m |= 1 << (i * height + j)
        return m

    anchors = []
    for w, h in rects:
        anchors.append(
            [mask_for(x, y, w, h) for x in range(width - w + 1) for y in range(height - h + 1)]
        )

    dead = set()

    def dfs(idx, occ):
        if idx == len(rects):
            return True
        if (idx, occ) in dead:
            return False
        for m in anchors[idx]:
            if not (m & occ) and dfs(idx + 1, occ | m):
                return True
        dead.add((idx, occ))
        return False

    return dfs(0, 0)


def set_partitions(items):
    """Yield all partitions of `items` (a list) into non-empty groups."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1 :]
        yield part + [[first]]


def oracle_min_height(instances, Di: int, Do: int, Dh: int):
    """Minimal max-per-macro stack height over every column-structured packing.

    `instances` is a list of (layer_id, ti, to, tm) tile instances (one entry
    per copy). Columns hold instances of pairwise distinct layers; inside a
    column any grouping into vertical stacks is allowed (stack footprint is
    the bounding box, height the sum of tm); stack footprints must fit the
    Di x Do plane (checked exhaustively); a macro may hold several columns as
    long as no layer repeats within it. Returns the optimum height, which
    always exists because singleton columns are always feasible.
    """
    n = len(instances)

    @functools.lru_cache(maxsize=None)
    def col_height(subset: frozenset):
        idxs = sorted(subset)
        layers = [instances[i][0] for i in idxs]
        if len(set(layers)) != len(layers):
            return None
        best = None
        for stacking in set_partitions(idxs):
            foots = []
            h = 0
            for stack in stacking:
                foots.append(
                    (max(instances[i][1] for i in stack), max(instances[i][2] for i in stack))
                )
                h = max(h, sum(instances[i][3] for i in stack))
            if best is not None and h >= best:
                continue
            if exhaustive_2d_fits(foots, Di, Do):
                best = h
        return best

    best_overall = None
    for partition in set_partitions(list(range(n))):
        cols = []
        feasible = True
        for group in partition:
            h = col_height(frozenset(group))
            if h is None:
                feasible = False
                break
            cols.append((h, frozenset(instances[i][0] for i in group)))
        if not feasible:
            continue
        achieved = _best_assignment(cols, Dh, best_overall)
        if achieved is not None and (best_overall is None or achieved < best_overall):
            best_overall = achieved
    return best_overall


def _best_assignment(cols, Dh, bound):
    """Minimal makespan assignment of (height, layers) columns to Dh macros
    with per-macro layer disjointness; only results strictly below `bound`
    are reported (None otherwise)."""
    cols = sorted(cols, key=lambda c: (-c[0], sorted(c[1])))
    best = [None]
    heights = [0] * Dh
    layer_sets = [set() for _ in range(Dh)]

    def dfs(i, curmax):
        if bound is not None and curmax >= bound:
            return
        if best[0] is not None and curmax >= best[0]:
            return
        if i == len(cols):
            best[0] = curmax
            return
        h, ls = cols[i]
        tried = set()
        for m in range(Dh):
            key = (heights[m], frozenset(layer_sets[m]))
            if key in tried:
                continue
            tried.add(key)
            if layer_sets[m] & ls:
                continue
            heights[m] += h
            layer_sets[m] |= ls
            dfs(i + 1, max(curmax, heights[m]))
            heights[m] -= h
            layer_sets[m] -= ls

    dfs(0, 0)
    return best[0]


def brute_pareto(points):
    """Non-dominated (area, edp) rows by direct pairwise comparison."""
    kept = []
    for i, p in enumerate(points):
        dominated = False
        for j, q in enumerate(points):
            if i == j:
                continue
            if q.area_mm2 <= p.area_mm2 and q.edp_Js <= p.edp_Js and (
                q.area_mm2 < p.area_mm2 or q.edp_Js < p.edp_Js
            ):
                dominated = True
                break
        if not dominated:
            kept.append(p)
    return kept


def random_workload(rng, idx, max_layers=10, dim_hi=512):
    """Synthetic workload with realistically factorizable dimensions."""
    from imcpack.workload import Layer, Workload

    def dim(hi):
        n = 1
        while True:
            p = rng.choice([2, 2, 2, 2, 3, 3, 5, 7])
            if n * p > hi or rng.random() < 0.25:
                break
            n *= p
        return n

    layers = []
    for i in range(rng.randint(1, max_layers)):
        layers.append(
            Layer(
                id=f"l{i}",
                K=dim(dim_hi),
                C=dim(dim_hi),
                FX=rng.choice([1, 1, 3, 3, 5, 7]),
                FY=rng.choice([1, 1, 3, 3, 5, 7]),
                OX=rng.choice([1, 2, 4, 8, 16, 32]),
                OY=rng.choice([1, 2, 4, 8, 16, 32]),
                weight_bits=rng.choice([4, 8]),
                act_bits=rng.choice([4, 8]),
            )
        )
    return Workload(name=f"rnd{idx}", layers=tuple(layers))
