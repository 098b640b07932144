"""Weight packer: columns of supertiles, macro allocation and folding.

The pipeline turns per-layer tiles into a placed allocation in four stages:

  1. supertile pool generation (see tiling),
  2. column generation: repeatedly pick the densest 2D-packable group of
     supertiles with pairwise-distinct layers and emit it as a column,
  3. column-to-macro allocation: first-fit-decreasing 1-D packing of column
     heights into the Dh macros, never putting two tiles of one layer in the
     same macro,
  4. on allocation failure, fold one spatial factor of the lowest-latency
     layer into its temporal depth and rerun stages 1-3 from scratch.

If folding is exhausted the packing is infeasible; the outcome then carries
a virtual stacked layout of the final tiles (fit_on_chip=False) so that the
cost model can still price the per-inference weight reloading such a point
would incur.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .architecture import ImcArchitecture
from .tiling import SuperTile, Tile, compute_cycles, fold_smallest_lpf, generate_supertiles, generate_tiles
from .workload import Lpf, Workload, sort_lpfs

ALLOCATION_SCHEMA_VERSION = 1


class PackingError(RuntimeError):
    """Raised when a search limit (for example the Dm ceiling) is hit."""


@dataclass(frozen=True)
class PackConfig:
    """Tunables of the packing search; defaults suit MLPerf-Tiny-sized nets."""

    stack_cap: int = 6  # max distinct layers per supertile
    stack_budget: int = 4000  # max multi-tile stacks enumerated per pool
    candidate_cap: int = 8  # max supertiles per column candidate
    node_budget: int = 3000  # 2D placements per column search before greedy fallback
    active_pool_cap: int = 96  # multi-tile stacks offered to one column search
    max_fold_steps: int = 64  # folding retries before packing is given up
    dm_ceiling: int = 65536  # upper bound for min-Dm searches
    validate: bool = True  # re-check every produced allocation


# ---------------------------------------------------------------------------
# 2D rectangle packing (maximal rectangles, best short side fit, no rotation)
# ---------------------------------------------------------------------------


class FreeRects:
    """Incremental maximal-rectangles bin state for one Di x Do plane.

    Items insert one at a time into the free rectangle minimizing the
    leftover short side (ties: leftover long side, then lowest y, then
    lowest x); the free set is then re-split into maximal rectangles.
    """

    __slots__ = ("free",)

    def __init__(self, width: int, height: int, _free=None):
        self.free = _free if _free is not None else [(0, 0, width, height)]

    def clone(self) -> "FreeRects":
        return FreeRects(0, 0, _free=list(self.free))

    def place(self, w: int, h: int):
        """Insert one w x h item; returns its (x, y) or None if it does not fit."""
        if w < 1 or h < 1:
            raise ValueError(f"item dimensions must be positive, got {(w, h)}")
        best_key = None
        best_xy = None
        for fx, fy, fw, fh in self.free:
            if w > fw or h > fh:
                continue
            leftovers = sorted((fw - w, fh - h))
            key = (leftovers[0], leftovers[1], fy, fx)
            if best_key is None or key < best_key:
                best_key = key
                best_xy = (fx, fy)
        if best_xy is None:
            return None
        self.free = _split_free_rects(self.free, (best_xy[0], best_xy[1], w, h))
        return best_xy


def pack_rect_2d(items, width: int, height: int):
    """Place (w, h) rectangles into a width x height bin without rotation.

    Items are inserted in the given order (maximal rectangles, best short
    side fit). Returns one (x, y) per item or None when any item does not
    fit; failure is a normal outcome. Deterministic for identical inputs.
    """
    state = FreeRects(width, height)
    placements = []
    for w, h in items:
        xy = state.place(w, h)
        if xy is None:
            return None
        placements.append(xy)
    return placements


def _split_free_rects(free, placed):
    px, py, pw, ph = placed
    out = []
    for fx, fy, fw, fh in free:
        if px >= fx + fw or px + pw <= fx or py >= fy + fh or py + ph <= fy:
            out.append((fx, fy, fw, fh))
            continue
        if px > fx:
            out.append((fx, fy, px - fx, fh))
        if px + pw < fx + fw:
            out.append((px + pw, fy, fx + fw - px - pw, fh))
        if py > fy:
            out.append((fx, fy, fw, py - fy))
        if py + ph < fy + fh:
            out.append((fx, py + ph, fw, fy + fh - py - ph))
    # Drop rectangles contained in another (keep maximal ones only).
    pruned = []
    for i, a in enumerate(out):
        contained = False
        for j, b in enumerate(out):
            if i == j:
                continue
            if (
                a[0] >= b[0]
                and a[1] >= b[1]
                and a[0] + a[2] <= b[0] + b[2]
                and a[1] + a[3] <= b[1] + b[3]
                and (a != b or i > j)
            ):
                contained = True
                break
        if not contained:
            pruned.append(a)
    return pruned


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    supertile: SuperTile
    di_offset: int
    do_offset: int


@dataclass(frozen=True)
class Column:
    """A 2D-packed group of supertiles occupying the Di x Do plane up to the
    height of its tallest member."""

    placements: tuple[Placement, ...]
    height: int
    density: float  # sum of tile volumes / (Di * Do * height)

    @property
    def layer_ids(self) -> frozenset[str]:
        return frozenset(lid for p in self.placements for lid in p.supertile.layer_ids)

    @property
    def volume(self) -> int:
        return sum(p.supertile.volume for p in self.placements)


@dataclass(frozen=True)
class AllocationEntry:
    layer_id: str
    macro: int
    dm_offset: int
    di_offset: int
    do_offset: int
    ti: int
    to: int
    tm: int


@dataclass(frozen=True)
class LayerSummary:
    """Per-layer execution shape the cost model reads off an allocation.

    th_k is the number of macros producing distinct output groups (K-spread);
    tm_acc the number of consecutive temporal steps accumulating into the
    same outputs.
    """

    layer_id: str
    ti: int
    to: int
    tm: int
    th: int
    th_k: int
    tm_acc: int


@dataclass(frozen=True)
class Allocation:
    strategy: str
    entries: tuple[AllocationEntry, ...]
    folds: tuple[tuple[str, tuple[Lpf, ...]], ...]
    summaries: tuple[LayerSummary, ...]
    fit_on_chip: bool
    workload_name: str = ""

    def summary(self, layer_id: str) -> LayerSummary:
        for s in self.summaries:
            if s.layer_id == layer_id:
                return s
        raise KeyError(layer_id)

    @property
    def folds_by_layer(self) -> dict[str, tuple[Lpf, ...]]:
        return dict(self.folds)


@dataclass(frozen=True)
class FoldStep:
    layer_id: str
    tag: str
    prime: int
    source: str  # "ti" or "to"
    new_tm: int


@dataclass(frozen=True)
class FoldNote:
    layer_id: str
    reason: str


@dataclass(frozen=True)
class FoldResult:
    success: bool
    tiles: dict[str, Tile] | None = None
    step: FoldStep | None = None
    notes: tuple[FoldNote, ...] = ()


@dataclass(frozen=True)
class PackOutcome:
    strategy: str
    tiles: dict[str, Tile]
    columns: tuple[Column, ...]
    allocation: Allocation
    fold_trace: tuple
    feasible: bool


# ---------------------------------------------------------------------------
# Column generation
# ---------------------------------------------------------------------------


def _tiles_by_layer(pool) -> dict[str, Tile]:
    tiles = {}
    for st in pool:
        for t in st.tiles:
            tiles.setdefault(t.layer_id, t)
    return tiles


class _BestCandidate:
    """Tracks the densest candidate; density ties prefer fewer supertiles,
    then first discovery. Densities are compared exactly as integer ratios."""

    def __init__(self, plane):
        self.plane = plane
        self.volume = -1
        self.denom = 1
        self.count = 0
        self.types = None
        self.positions = None

    def offer(self, types, positions):
        volume = sum(st.volume for st in types)
        denom = self.plane * max(st.STm for st in types)
        if self.types is None:
            better = True
        else:
            lhs = volume * self.denom
            rhs = self.volume * denom
            better = lhs > rhs or (lhs == rhs and len(types) < self.count)
        if better:
            self.volume = volume
            self.denom = denom
            self.count = len(types)
            self.types = list(types)
            self.positions = list(positions)


def generate_columns(pool, arch: ImcArchitecture, *, multiplicities=None, config: PackConfig | None = None):
    """Sequentially emit densely packed columns until the tile pool is empty.

    Each iteration enumerates groups of available supertiles with pairwise
    disjoint layer sets (exhaustively up to `candidate_cap` members and
    `node_budget` 2D placements, then by greedy density-ordered growth),
    2D-packs each group incrementally, and emits the densest feasible one as
    a column. On large pools only every singleton plus the `active_pool_cap`
    best multi-tile stacks (by bounding-box density) are offered to a single
    search. The constituent tiles' multiplicities are decremented; supertiles
    referencing an exhausted layer leave the pool. A singleton group always
    packs, so the loop terminates.
    """
    cfg = config or PackConfig()
    types = list(pool)
    mult = dict(multiplicities) if multiplicities is not None else {
        lid: t.Th for lid, t in _tiles_by_layer(types).items()
    }
    plane = arch.Di * arch.Do
    # Stable preference order for stack truncation: tightest bounding boxes
    # first. Within one search, candidates enumerate in canonical pool order.
    stack_pref = sorted(
        (i for i, st in enumerate(types) if len(st.tiles) > 1),
        key=lambda i: (-(types[i].volume / (types[i].STi * types[i].STo * types[i].STm)), -types[i].volume, types[i].layer_ids),
    )
    columns = []

    while any(m > 0 for m in mult.values()):
        usable = [i for i, st in enumerate(types) if all(mult[lid] > 0 for lid in st.layer_ids)]
        single_idx = [i for i in usable if len(types[i].tiles) == 1]
        usable_set = set(usable)
        stack_idx = [i for i in stack_pref if i in usable_set][: cfg.active_pool_cap]
        avail = [types[i] for i in sorted(single_idx + stack_idx)]

        layer_sets = [frozenset(st.layer_ids) for st in avail]
        footprints = [(st.STi, st.STo) for st in avail]
        areas = [st.STi * st.STo for st in avail]
        best = _BestCandidate(plane)
        budget = [cfg.node_budget]
        exceeded = [False]

        def walk(start, idx_chosen, layers, area, state, positions):
            for j in range(start, len(avail)):
                if exceeded[0]:
                    return
                if layers & layer_sets[j]:
                    continue
                if area + areas[j] > plane or len(idx_chosen) >= cfg.candidate_cap:
                    continue
                if budget[0] <= 0:
                    exceeded[0] = True
                    return
                budget[0] -= 1
                trial_state = state.clone()
                xy = trial_state.place(*footprints[j])
                if xy is None:
                    # A superset of an unpackable group can never pack.
                    continue
                trial = idx_chosen + [j]
                trial_pos = positions + [xy]
                best.offer([avail[i] for i in trial], trial_pos)
                walk(j + 1, trial, layers | layer_sets[j], area + areas[j], trial_state, trial_pos)

        walk(0, [], frozenset(), 0, FreeRects(arch.Di, arch.Do), [])
        if exceeded[0]:
            _greedy_candidates(avail, layer_sets, footprints, areas, plane, arch, best)

        assert best.types is not None, "a singleton candidate must always exist"
        height = max(st.STm for st in best.types)
        column = Column(
            placements=tuple(
                Placement(supertile=st, di_offset=x, do_offset=y)
                for st, (x, y) in zip(best.types, best.positions)
            ),
            height=height,
            density=best.volume / (plane * height),
        )
        columns.append(column)
        for lid in column.layer_ids:
            mult[lid] -= 1

    return tuple(columns)


def _greedy_candidates(avail, layer_sets, footprints, areas, plane, arch, best):
    # Deterministic fallback: grow a candidate from every seed in pool order,
    # adding any supertile that keeps the group disjoint and 2D-packable.
    for seed in range(len(avail)):
        state = FreeRects(arch.Di, arch.Do)
        xy = state.place(*footprints[seed])
        chosen = [seed]
        layers = layer_sets[seed]
        area = areas[seed]
        positions = [xy]
        best.offer([avail[seed]], positions)
        for j in range(len(avail)):
            if j == seed or (layers & layer_sets[j]) or area + areas[j] > plane:
                continue
            trial_state = state.clone()
            xy = trial_state.place(*footprints[j])
            if xy is None:
                continue
            state = trial_state
            chosen = chosen + [j]
            positions = positions + [xy]
            layers = layers | layer_sets[j]
            area += areas[j]
            best.offer([avail[i] for i in chosen], positions)


# ---------------------------------------------------------------------------
# Column-to-macro allocation
# ---------------------------------------------------------------------------


def allocate_columns(columns, arch: ImcArchitecture) -> Allocation | None:
    """First-fit-decreasing placement of columns into the Dh x Dm space.

    Columns are processed by descending height (stable on emission order) and
    go to the lowest-indexed macro with enough remaining Dm and no layer in
    common with the columns already there; each layer's copies therefore land
    in distinct macros. Returns None when some column cannot be placed.
    """
    order = sorted(range(len(columns)), key=lambda i: (-columns[i].height, i))
    heights = [0] * arch.Dh
    resident = [set() for _ in range(arch.Dh)]
    slots = {}
    for i in order:
        col = columns[i]
        for m in range(arch.Dh):
            if heights[m] + col.height <= arch.Dm and resident[m].isdisjoint(col.layer_ids):
                slots[i] = (m, heights[m])
                heights[m] += col.height
                resident[m].update(col.layer_ids)
                break
        else:
            return None

    entries = []
    for i, col in enumerate(columns):
        macro, base = slots[i]
        for pl in col.placements:
            dm = base
            for tile in pl.supertile.tiles:
                entries.append(
                    AllocationEntry(
                        layer_id=tile.layer_id,
                        macro=macro,
                        dm_offset=dm,
                        di_offset=pl.di_offset,
                        do_offset=pl.do_offset,
                        ti=tile.Ti,
                        to=tile.To,
                        tm=tile.Tm,
                    )
                )
                dm += tile.Tm

    tiles = _tiles_by_layer(st for col in columns for st in (p.supertile for p in col.placements))
    return _assemble_allocation("packed", entries, tiles, fit_on_chip=True)


def _assemble_allocation(strategy, entries, tiles, fit_on_chip, workload_name="") -> Allocation:
    entries = tuple(sorted(entries, key=lambda e: (e.macro, e.dm_offset, e.di_offset, e.do_offset, e.layer_id)))
    summaries = tuple(
        LayerSummary(
            layer_id=lid,
            ti=t.Ti, to=t.To, tm=t.Tm, th=t.Th,
            th_k=t.th_k, tm_acc=t.tm_acc,
        )
        for lid, t in sorted(tiles.items())
    )
    folds = tuple((lid, sort_lpfs(t.folded_lpfs)) for lid, t in sorted(tiles.items()) if t.folded_lpfs)
    return Allocation(
        strategy=strategy,
        entries=entries,
        folds=folds,
        summaries=summaries,
        fit_on_chip=fit_on_chip,
        workload_name=workload_name,
    )


def build_stacked_layout(tiles_in_order, arch: ImcArchitecture, strategy: str, workload_name="") -> Allocation:
    """Stack tiles at plane offset (0, 0), layer after layer along Dm.

    Each layer's Th copies go to consecutive macros from a rotating start
    pointer, so macros fill evenly and no macro holds a layer twice. Entries
    above Dm are kept (the layout is then reported as not fitting) so that a
    non-resident mapping can still be priced.
    """
    cursors = [0] * arch.Dh
    pointer = 0
    entries = []
    tiles = {}
    for tile in tiles_in_order:
        tiles[tile.layer_id] = tile
        for j in range(tile.Th):
            m = (pointer + j) % arch.Dh
            entries.append(
                AllocationEntry(
                    layer_id=tile.layer_id,
                    macro=m,
                    dm_offset=cursors[m],
                    di_offset=0,
                    do_offset=0,
                    ti=tile.Ti,
                    to=tile.To,
                    tm=tile.Tm,
                )
            )
            cursors[m] += tile.Tm
        pointer = (pointer + tile.Th) % arch.Dh
    fit = max(cursors) <= arch.Dm
    return _assemble_allocation(strategy, entries, tiles, fit_on_chip=fit, workload_name=workload_name)


# ---------------------------------------------------------------------------
# Folding
# ---------------------------------------------------------------------------


def fold_layer(tiles: dict[str, Tile], latencies: dict[str, int], arch: ImcArchitecture) -> FoldResult:
    """Fold one spatial factor of the lowest-latency layer into Tm.

    Layers are tried in ascending compute-cycle order (map order breaks
    ties). Within a layer, K-tagged Ti factors are preferred over To factors
    and the smallest feasible prime folds; a layer where every fold would push
    Tm beyond Dm is skipped. When no layer can fold, the result carries one
    note per layer explaining why, and packing is deemed infeasible.
    """
    index = {lid: i for i, lid in enumerate(tiles)}
    order = sorted(tiles, key=lambda lid: (latencies[lid], index[lid]))
    notes = []
    for lid in order:
        tile = tiles[lid]
        if not tile.ti_lpfs and not tile.to_lpfs:
            notes.append(FoldNote(lid, "no spatial factors left to fold"))
            continue
        folded = fold_smallest_lpf(tile, arch.Dm)
        if folded is None:
            notes.append(FoldNote(lid, f"any fold would push Tm past Dm={arch.Dm}"))
            continue
        new_tile, (tag, prime), source = folded
        new_tiles = dict(tiles)
        new_tiles[lid] = new_tile
        return FoldResult(
            success=True,
            tiles=new_tiles,
            step=FoldStep(layer_id=lid, tag=tag, prime=prime, source=source, new_tm=new_tile.Tm),
        )
    return FoldResult(success=False, notes=tuple(notes))


# ---------------------------------------------------------------------------
# Full packing flow
# ---------------------------------------------------------------------------


def pack_network(workload: Workload, arch: ImcArchitecture, config: PackConfig | None = None) -> PackOutcome:
    """Run the complete packing flow for a workload on one design point.

    Tiles -> supertiles -> columns -> macro allocation; on allocation failure
    first try degrading to a plain stacked layout of the current tiles (the
    packer never needs more Dm than stacking does), then fold and retry. The
    flow is deterministic end to end and never raises on infeasible inputs.
    """
    cfg = config or PackConfig()
    tiles = {layer.id: generate_tiles(layer, arch) for layer in workload.layers}
    trace: list = []

    if workload.total_weight_volume > arch.weight_capacity:
        trace.extend(FoldNote(lid, "weight volume exceeds array capacity") for lid in tiles)
        return _failure_outcome(workload, arch, cfg, tiles, trace)

    if any(t.Tm > arch.Dm for t in tiles.values()):
        # Folding never reduces Tm, so an over-tall tile is terminal.
        for lid, t in tiles.items():
            reason = f"tile Tm={t.Tm} exceeds Dm={arch.Dm}" if t.Tm > arch.Dm else "cannot compensate for an over-tall layer"
            trace.append(FoldNote(lid, reason))
        return _failure_outcome(workload, arch, cfg, tiles, trace)

    max_folds = sum(len(t.ti_lpfs) + len(t.to_lpfs) for t in tiles.values())
    for step in range(max_folds + 1):
        pool = generate_supertiles(tiles.values(), arch, cfg.stack_cap, cfg.stack_budget)
        columns = generate_columns(pool, arch, config=cfg)
        allocation = allocate_columns(columns, arch)
        if allocation is None:
            fallback = build_stacked_layout(tiles.values(), arch, "packed", workload.name)
            if fallback.fit_on_chip:
                allocation = fallback
                columns = ()
        if allocation is not None:
            allocation = replace(allocation, workload_name=workload.name)
            outcome = PackOutcome(
                strategy="packed",
                tiles=tiles,
                columns=tuple(columns),
                allocation=allocation,
                fold_trace=tuple(trace),
                feasible=True,
            )
            _maybe_validate(outcome, workload, arch, cfg)
            return outcome
        if step >= cfg.max_fold_steps:
            trace.extend(FoldNote(lid, f"fold budget of {cfg.max_fold_steps} steps exhausted") for lid in tiles)
            return _failure_outcome(workload, arch, cfg, tiles, trace)
        latencies = {lid: compute_cycles(workload.layer(lid), t) for lid, t in tiles.items()}
        result = fold_layer(tiles, latencies, arch)
        if not result.success:
            trace.extend(result.notes)
            return _failure_outcome(workload, arch, cfg, tiles, trace)
        trace.append(result.step)
        tiles = result.tiles
    raise AssertionError("folding loop failed to terminate")


def _failure_outcome(workload, arch, cfg, tiles, trace) -> PackOutcome:
    # The stacked fallback of these tiles was already rejected (or capacity is
    # exceeded outright), so the virtual layout never fits here.
    virtual = build_stacked_layout(tiles.values(), arch, "packed", workload.name)
    outcome = PackOutcome(
        strategy="packed",
        tiles=tiles,
        columns=(),
        allocation=virtual,
        fold_trace=tuple(trace),
        feasible=False,
    )
    _maybe_validate(outcome, workload, arch, cfg)
    return outcome


def _maybe_validate(outcome, workload, arch, cfg):
    if not cfg.validate:
        return
    violations = validate_allocation(outcome.allocation, workload, arch)
    if violations:
        raise AssertionError(f"packer produced an invalid allocation: {violations[:3]}")


def _layout_height(alloc: Allocation) -> int:
    return max((e.dm_offset + e.tm for e in alloc.entries), default=0)


def min_dm_for_fit(workload: Workload, arch: ImcArchitecture, strategy: str, config: PackConfig | None = None) -> int:
    """Smallest Dm at which a strategy fits the workload on the given design.

    The stacked and flattened layouts do not depend on Dm, so their answer is
    the height of the layout itself. For the packed flow the search descends
    from the stacked requirement: every successful pack certifies a fit at
    its achieved height, the next probe goes below that certificate, and the
    first failure is refined by an ascending scan of the remaining gap.
    Raises PackingError when the configured Dm ceiling is exceeded.
    """
    from .baselines import run_strategy

    cfg = config or PackConfig()
    plane_capacity = arch.Di * arch.Do * arch.Dh
    lower = max(1, math.ceil(workload.total_weight_volume / plane_capacity))

    def fits(dm):
        return run_strategy(workload, replace(arch, Dm=dm), strategy, cfg).feasible

    if strategy in ("stacked", "flattened"):
        probe = run_strategy(workload, replace(arch, Dm=max(lower, 1)), strategy, cfg)
        required = max(_layout_height(probe.allocation), 1)
        if required > cfg.dm_ceiling:
            raise PackingError(
                f"strategy '{strategy}' first fits at Dm={required}, beyond the ceiling "
                f"{cfg.dm_ceiling} (workload '{workload.name}')"
            )
        assert fits(required)
        return required

    stacked_probe = run_strategy(workload, replace(arch, Dm=lower), "stacked", cfg)
    start = max(_layout_height(stacked_probe.allocation), lower)
    if start > cfg.dm_ceiling:
        raise PackingError(
            f"no fit for strategy '{strategy}' up to Dm ceiling {cfg.dm_ceiling} "
            f"(workload '{workload.name}', {arch.Di}x{arch.Do}x{arch.Dh})"
        )

    best = None
    dm = start
    while dm >= lower:
        outcome = run_strategy(workload, replace(arch, Dm=dm), strategy, cfg)
        if not outcome.feasible:
            break
        best = dm
        achieved = max(_layout_height(outcome.allocation), lower)
        dm = achieved if achieved < dm else dm - 1
    assert best is not None, "the packed flow must fit wherever plain stacking does"
    # The failing probe may have skipped values below the last certificate.
    for probe_dm in range(dm + 1, best):
        if fits(probe_dm):
            return probe_dm
    return best


# ---------------------------------------------------------------------------
# Independent allocation validator
# ---------------------------------------------------------------------------

_RASTER_CELL_LIMIT = 20_000_000


def validate_allocation(alloc: Allocation, workload: Workload, arch: ImcArchitecture) -> list[str]:
    """Check every allocation invariant; returns one message per violation.

    Occupancy is rasterized per macro (with a pairwise-overlap fallback for
    very tall virtual layouts). Checks: plane and macro bounds, Dm bounds for
    fitting allocations, pairwise non-overlap, at most one tile per layer per
    macro (uniform strategies), exact weight-tensor coverage per layer, and
    consistency of the fit_on_chip flag.
    """
    violations = []
    known = {layer.id: layer for layer in workload.layers}
    summary_ids = {s.layer_id for s in alloc.summaries}
    for lid in known:
        if lid not in summary_ids:
            violations.append(f"layer '{lid}' has no mapping summary")
    for s in alloc.summaries:
        if s.layer_id not in known:
            violations.append(f"summary references unknown layer '{s.layer_id}'")

    per_macro: dict[int, list[tuple[int, AllocationEntry]]] = {}
    max_dm_end = 0
    for i, e in enumerate(alloc.entries):
        if e.layer_id not in known:
            violations.append(f"entry #{i} references unknown layer '{e.layer_id}'")
            continue
        if not (0 <= e.macro < arch.Dh):
            violations.append(f"entry #{i} (layer '{e.layer_id}'): macro {e.macro} outside [0, {arch.Dh})")
            continue
        if e.di_offset < 0 or e.di_offset + e.ti > arch.Di:
            violations.append(f"entry #{i} (layer '{e.layer_id}'): Di extent [{e.di_offset}, {e.di_offset + e.ti}) outside [0, {arch.Di})")
        if e.do_offset < 0 or e.do_offset + e.to > arch.Do:
            violations.append(f"entry #{i} (layer '{e.layer_id}'): Do extent [{e.do_offset}, {e.do_offset + e.to}) outside [0, {arch.Do})")
        if e.dm_offset < 0 or e.ti < 1 or e.to < 1 or e.tm < 1:
            violations.append(f"entry #{i} (layer '{e.layer_id}'): non-positive extent or offset")
        per_macro.setdefault(e.macro, []).append((i, e))
        max_dm_end = max(max_dm_end, e.dm_offset + e.tm)

    if violations:
        return violations

    within_dm = max_dm_end <= arch.Dm
    if alloc.fit_on_chip and not within_dm:
        violations.append(f"fit_on_chip is true but occupancy reaches dm={max_dm_end} > Dm={arch.Dm}")
    if not alloc.fit_on_chip and within_dm and alloc.entries:
        violations.append("fit_on_chip is false but every entry lies within Dm")

    for macro, indexed in sorted(per_macro.items()):
        violations.extend(_check_overlaps(indexed, macro, arch))
        if alloc.strategy != "flattened":
            counts: dict[str, int] = {}
            for _, e in indexed:
                counts[e.layer_id] = counts.get(e.layer_id, 0) + 1
            for lid, n in sorted(counts.items()):
                if n > 1:
                    violations.append(f"layer '{lid}' appears {n} times in macro {macro}")

    for lid, layer in known.items():
        covered = sum(e.ti * e.to * e.tm for e in alloc.entries if e.layer_id == lid)
        if covered != layer.weight_volume:
            violations.append(f"layer '{lid}' covers {covered} of {layer.weight_volume} weights")
        if alloc.strategy in ("packed", "stacked") and lid in summary_ids:
            n_entries = sum(1 for e in alloc.entries if e.layer_id == lid)
            th = alloc.summary(lid).th
            if n_entries != th:
                violations.append(f"layer '{lid}' has {n_entries} placed tiles, expected Th={th}")

    return violations


def _check_overlaps(indexed, macro, arch):
    height = max(e.dm_offset + e.tm for _, e in indexed)
    if height * arch.Di * arch.Do <= _RASTER_CELL_LIMIT:
        occ = np.zeros((height, arch.Di, arch.Do), dtype=np.int16)
        for _, e in indexed:
            occ[e.dm_offset : e.dm_offset + e.tm, e.di_offset : e.di_offset + e.ti, e.do_offset : e.do_offset + e.to] += 1
        if int(occ.max()) <= 1:
            return []
    out = []
    for a in range(len(indexed)):
        ia, ea = indexed[a]
        for b in range(a + 1, len(indexed)):
            ib, eb = indexed[b]
            if (
                ea.di_offset < eb.di_offset + eb.ti
                and eb.di_offset < ea.di_offset + ea.ti
                and ea.do_offset < eb.do_offset + eb.to
                and eb.do_offset < ea.do_offset + ea.to
                and ea.dm_offset < eb.dm_offset + eb.tm
                and eb.dm_offset < ea.dm_offset + ea.tm
            ):
                out.append(
                    f"overlap in macro {macro}: entry #{ia} (layer '{ea.layer_id}') "
                    f"collides with entry #{ib} (layer '{eb.layer_id}')"
                )
    return out


# ---------------------------------------------------------------------------
# Allocation import/export
# ---------------------------------------------------------------------------


def allocation_to_json(alloc: Allocation, arch: ImcArchitecture | None = None) -> str:
    doc = {
        "schema_version": ALLOCATION_SCHEMA_VERSION,
        "strategy": alloc.strategy,
        "workload": alloc.workload_name,
        "fit_on_chip": alloc.fit_on_chip,
        "entries": [
            {
                "layer_id": e.layer_id,
                "macro": e.macro,
                "dm_offset": e.dm_offset,
                "di_offset": e.di_offset,
                "do_offset": e.do_offset,
                "ti": e.ti,
                "to": e.to,
                "tm": e.tm,
            }
            for e in alloc.entries
        ],
        "folds": {lid: [list(f) for f in lpfs] for lid, lpfs in alloc.folds},
        "summaries": [
            {
                "layer_id": s.layer_id,
                "ti": s.ti,
                "to": s.to,
                "tm": s.tm,
                "th": s.th,
                "th_k": s.th_k,
                "tm_acc": s.tm_acc,
            }
            for s in alloc.summaries
        ],
    }
    if arch is not None:
        doc["arch"] = {
            "name": arch.name,
            "Di": arch.Di,
            "Do": arch.Do,
            "Dh": arch.Dh,
            "Dm": arch.Dm,
            "imc_kind": arch.imc_kind,
        }
    return json.dumps(doc, indent=2) + "\n"


def parse_allocation(source: str | dict) -> Allocation:
    doc = json.loads(source) if isinstance(source, str) else source
    if not isinstance(doc, dict):
        raise ValueError("allocation document must be a JSON object")
    version = doc.get("schema_version")
    if version != ALLOCATION_SCHEMA_VERSION:
        raise ValueError(f"unsupported allocation schema version {version!r}")
    entries = tuple(
        AllocationEntry(
            layer_id=e["layer_id"],
            macro=e["macro"],
            dm_offset=e["dm_offset"],
            di_offset=e["di_offset"],
            do_offset=e["do_offset"],
            ti=e["ti"],
            to=e["to"],
            tm=e["tm"],
        )
        for e in doc["entries"]
    )
    folds = tuple(
        (lid, tuple((tag, int(p)) for tag, p in lpfs)) for lid, lpfs in sorted(doc.get("folds", {}).items())
    )
    summaries = tuple(
        LayerSummary(
            layer_id=s["layer_id"],
            ti=s["ti"],
            to=s["to"],
            tm=s["tm"],
            th=s["th"],
            th_k=s["th_k"],
            tm_acc=s["tm_acc"],
        )
        for s in doc["summaries"]
    )
    return Allocation(
        strategy=doc["strategy"],
        entries=entries,
        folds=folds,
        summaries=summaries,
        fit_on_chip=doc["fit_on_chip"],
        workload_name=doc.get("workload", ""),
    )
