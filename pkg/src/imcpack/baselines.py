"""Reference weight-mapping baselines: stacked and flattened.

The stacked method takes the same uniform per-layer tiles as the packer but
applies no packing at all: every tile sits at plane offset (0, 0) and layers
pile up along Dm in workload order. The flattened method ignores uniform
tiling altogether: it treats each layer's weight tensor as a flat K-major
array, chops it into Di*Do slices and pours the slices into successive
(macro, dm) slots, so every non-terminal slice covers the plane completely.
Flattened slices of one layer may share a macro; it is a memory-layout
baseline, not a parallelism-preserving one. Both baselines produce the same
Allocation structure as the packer and pass the same validator.
"""

from __future__ import annotations

from .architecture import ImcArchitecture
from .packing import (
    AllocationEntry,
    Allocation,
    LayerSummary,
    PackConfig,
    PackOutcome,
    build_stacked_layout,
    pack_network,
    validate_allocation,
)
from .tiling import generate_tiles
from .workload import Workload


def map_stacked(workload: Workload, arch: ImcArchitecture, config: PackConfig | None = None) -> PackOutcome:
    """Stack each layer's uniform tiles on top of the previous ones along Dm.

    Copies of one layer go to consecutive macros round-robin, so the
    one-tile-per-layer-per-macro rule still holds across Dh. The mapping
    fails (without any folding) when some macro's stack exceeds Dm.
    """
    cfg = config or PackConfig()
    tiles = {layer.id: generate_tiles(layer, arch) for layer in workload.layers}
    allocation = build_stacked_layout(tiles.values(), arch, "stacked", workload.name)
    outcome = PackOutcome(
        strategy="stacked",
        tiles=tiles,
        columns=(),
        allocation=allocation,
        fold_trace=(),
        feasible=allocation.fit_on_chip,
    )
    _maybe_validate(outcome, workload, arch, cfg)
    return outcome


def map_flattened(workload: Workload, arch: ImcArchitecture, config: PackConfig | None = None) -> PackOutcome:
    """Spread each weight tensor over full Di x Do planes, folding into Dm.

    Slices fill slots macro-first so a multi-slice layer computes on as many
    macros as possible in parallel; the terminal slice of a layer may be
    partial and is stored as up to two rectangles (whole Di-columns plus a
    remainder strip) so coverage accounting stays exact.
    """
    cfg = config or PackConfig()
    plane = arch.Di * arch.Do
    entries = []
    summaries = []
    slot = 0

    for layer in workload.layers:
        first_slot = slot
        remaining = layer.weight_volume
        depth_by_macro: dict[int, int] = {}
        while remaining > 0:
            macro = slot % arch.Dh
            dm = slot // arch.Dh
            depth_by_macro[macro] = depth_by_macro.get(macro, 0) + 1
            take = min(remaining, plane)
            if take == plane:
                entries.append(AllocationEntry(layer.id, macro, dm, 0, 0, arch.Di, arch.Do, 1))
            else:
                full_cols = take // arch.Di
                tail = take % arch.Di
                if full_cols:
                    entries.append(AllocationEntry(layer.id, macro, dm, 0, 0, arch.Di, full_cols, 1))
                if tail:
                    entries.append(AllocationEntry(layer.id, macro, dm, 0, full_cols, tail, 1, 1))
            remaining -= take
            slot += 1
        n_slices = slot - first_slot
        # Execution shape of the flattened layer: all touched macros run in
        # parallel, outputs are treated as distinct per macro (no cross-macro
        # accumulation is attempted) and partial sums are not held across
        # temporal steps.
        summaries.append(
            LayerSummary(
                layer_id=layer.id,
                ti=min(arch.Di, layer.weight_volume),
                to=min(arch.Do, max(1, layer.weight_volume // arch.Di)),
                tm=max(depth_by_macro.values()),
                th=len(depth_by_macro),
                th_k=len(depth_by_macro),
                tm_acc=1,
            )
        )

    fit = slot <= arch.Dh * arch.Dm
    allocation = Allocation(
        strategy="flattened",
        entries=tuple(sorted(entries, key=lambda e: (e.macro, e.dm_offset, e.di_offset, e.do_offset, e.layer_id))),
        folds=(),
        summaries=tuple(sorted(summaries, key=lambda s: s.layer_id)),
        fit_on_chip=fit,
        workload_name=workload.name,
    )
    outcome = PackOutcome(
        strategy="flattened",
        tiles={},
        columns=(),
        allocation=allocation,
        fold_trace=(),
        feasible=fit,
    )
    _maybe_validate(outcome, workload, arch, cfg)
    return outcome


STRATEGIES = ("packed", "stacked", "flattened")


def run_strategy(workload: Workload, arch: ImcArchitecture, strategy: str, config: PackConfig | None = None) -> PackOutcome:
    if strategy == "packed":
        return pack_network(workload, arch, config)
    if strategy == "stacked":
        return map_stacked(workload, arch, config)
    if strategy == "flattened":
        return map_flattened(workload, arch, config)
    raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")


def _maybe_validate(outcome, workload, arch, cfg):
    if not cfg.validate:
        return
    violations = validate_allocation(outcome.allocation, workload, arch)
    if violations:
        raise AssertionError(f"{outcome.strategy} mapper produced an invalid allocation: {violations[:3]}")
