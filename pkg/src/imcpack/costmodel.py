"""Analytic energy / latency / EDP / area model for validated allocations.

All quantities are SI (joules, seconds, bits, Hz); areas are mm^2. The model
covers three contributions per inference:

  * MAC compute. Digital arrays pay a gate-equivalent switching energy per
    useful MAC; analog arrays pay one ADC conversion per active output line
    (Ti lines per macro) per cycle, with the multiplier array folded into the
    peripheral term.
  * Peripheral and activation-buffer traffic. Peripherals cost a fixed energy
    per active macro per cycle. The buffer serves To input reads per cycle
    (inputs multicast across macros) and one output write per produced
    output; partial sums stay local across the input-relevant share of Tm,
    and gathering outputs across input-spread macros costs one extra buffer
    write+read per contributing macro beyond the first.
  * Weight loading from DRAM, serialized with compute on a single channel.
    A resident layer (all its placements within Dm) loads once in cold mode
    and never in steady state; an evicted layer reloads every inference in
    either mode.

EDP is reported as total energy times total delay; the additive split
(compute-side EDP plus weight-loading EDP) is reported alongside for
comparison since both conventions appear in practice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .architecture import AreaReport, CostParams, ImcArchitecture, compute_area
from .baselines import STRATEGIES, run_strategy
from .packing import Allocation, PackConfig, PackingError, min_dm_for_fit
from .tiling import Tile, compute_cycles
from .workload import Layer, Workload


class CostModelError(ValueError):
    """Inconsistent cost-model inputs (allocation/workload mismatch etc.)."""


def layer_cycles(layer: Layer, tile: Tile) -> int:
    """Compute cycles of a layer under a tiling: Tm * OX * OY."""
    return compute_cycles(layer, tile)


@dataclass(frozen=True)
class LayerCost:
    layer_id: str
    compute_cycles: int
    mac_energy_J: float
    periph_energy_J: float
    act_buffer_energy_J: float
    weight_load_bits: int
    weight_load_energy_J: float
    weight_load_seconds: float
    spatial_utilization: float


@dataclass(frozen=True)
class CostReport:
    per_layer: tuple[LayerCost, ...]
    energy_total_J: float
    delay_total_s: float
    edp_Js: float
    energy_breakdown: dict
    delay_breakdown: dict
    edp_compute_side_Js: float  # (mac + periph + act energy) * compute delay
    edp_weight_load_Js: float  # weight-load energy * weight-load delay
    area: AreaReport
    steady_state: bool
    fit_on_chip: bool

    @property
    def utilization(self) -> float:
        """MAC-weighted mean spatial utilization across layers."""
        num = sum(lc.compute_cycles * lc.spatial_utilization for lc in self.per_layer)
        den = sum(lc.compute_cycles for lc in self.per_layer)
        return num / den if den else 0.0


def estimate_cost(
    workload: Workload,
    allocation: Allocation,
    arch: ImcArchitecture,
    cost: CostParams,
    mode: str = "steady",
) -> CostReport:
    """Price one inference of a workload under a given allocation."""
    if mode not in ("cold", "steady"):
        raise CostModelError(f"mode must be 'cold' or 'steady', got {mode!r}")
    summary_ids = {s.layer_id for s in allocation.summaries}
    layer_ids = {layer.id for layer in workload.layers}
    if summary_ids != layer_ids:
        raise CostModelError(
            f"allocation does not match workload: summaries for {sorted(summary_ids)} "
            f"vs layers {sorted(layer_ids)}"
        )

    resident = _resident_layers(allocation, arch)
    e_mac_full = cost.e_mac_J * arch.weight_bits * arch.input_bits
    per_layer = []
    for layer in workload.layers:
        _check_buffer_fit(layer, cost)
        s = allocation.summary(layer.id)
        cycles = s.tm * layer.OX * layer.OY

        if arch.imc_kind == "analog":
            mac_energy = cycles * s.ti * s.th * cost.e_adc_J
        else:
            mac_energy = layer.macs * e_mac_full
        periph_energy = cycles * s.th * cost.e_periph_J

        input_bits = cycles * s.to * layer.act_bits
        output_writes = (cycles // s.tm_acc) * s.ti * s.th_k
        th_gathered = s.th // s.th_k  # macros whose partial outputs merge
        gather_accesses = output_writes * 2 * (th_gathered - 1)
        act_energy = (input_bits + (output_writes + gather_accesses) * layer.act_bits) * cost.e_buf_J_per_bit

        loads = 0 if (mode == "steady" and layer.id in resident) else 1
        wl_bits = loads * layer.weight_volume * layer.weight_bits

        per_layer.append(
            LayerCost(
                layer_id=layer.id,
                compute_cycles=cycles,
                mac_energy_J=mac_energy,
                periph_energy_J=periph_energy,
                act_buffer_energy_J=act_energy,
                weight_load_bits=wl_bits,
                weight_load_energy_J=wl_bits * cost.e_dram_J_per_bit,
                weight_load_seconds=wl_bits / cost.dram_bw_bits_per_s,
                spatial_utilization=(s.ti * s.to * s.th) / (arch.Di * arch.Do * arch.Dh),
            )
        )

    energy_breakdown = {
        "mac": sum(lc.mac_energy_J for lc in per_layer),
        "periph": sum(lc.periph_energy_J for lc in per_layer),
        "act": sum(lc.act_buffer_energy_J for lc in per_layer),
        "weight_load": sum(lc.weight_load_energy_J for lc in per_layer),
    }
    compute_delay = sum(lc.compute_cycles for lc in per_layer) / arch.clock_hz
    weight_delay = sum(lc.weight_load_seconds for lc in per_layer)
    delay_breakdown = {"compute": compute_delay, "weight_load": weight_delay}

    energy_total = sum(energy_breakdown.values())
    delay_total = sum(delay_breakdown.values())
    compute_side_energy = energy_breakdown["mac"] + energy_breakdown["periph"] + energy_breakdown["act"]
    return CostReport(
        per_layer=tuple(per_layer),
        energy_total_J=energy_total,
        delay_total_s=delay_total,
        edp_Js=energy_total * delay_total,
        energy_breakdown=energy_breakdown,
        delay_breakdown=delay_breakdown,
        edp_compute_side_Js=compute_side_energy * compute_delay,
        edp_weight_load_Js=energy_breakdown["weight_load"] * weight_delay,
        area=compute_area(arch, cost),
        steady_state=(mode == "steady"),
        fit_on_chip=allocation.fit_on_chip,
    )


def _resident_layers(allocation: Allocation, arch: ImcArchitecture) -> set[str]:
    evicted = {e.layer_id for e in allocation.entries if e.dm_offset + e.tm > arch.Dm}
    return {s.layer_id for s in allocation.summaries} - evicted


def _check_buffer_fit(layer: Layer, cost: CostParams):
    # Working-set proxy: one input plus one output activation tile per layer
    # (strides are not modelled, so this underestimates strided inputs).
    need = (layer.C + layer.K) * layer.OX * layer.OY * layer.act_bits / 8
    if need > cost.buf_bytes:
        raise CostModelError(
            f"layer '{layer.id}': activation working set {need:.0f} B exceeds "
            f"the {cost.buf_bytes} B on-chip buffer"
        )


# ---------------------------------------------------------------------------
# Strategy comparison and design sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyComparison:
    strategy: str
    fit: bool
    min_dm: int | None
    energy_J: float
    delay_s: float
    edp_Js: float
    edp_cold_Js: float
    edp_steady_Js: float
    utilization: float
    area_mm2: float
    folds: int


def compare_mappings(
    workload: Workload,
    arch: ImcArchitecture,
    cost: CostParams,
    mode: str = "steady",
    config: PackConfig | None = None,
) -> list[StrategyComparison]:
    """One row per strategy at the given design point.

    A strategy that does not fit at the configured Dm is still priced (with
    per-inference reloading) and its row reports the smallest Dm at which it
    would first fit.
    """
    rows = []
    for strategy in STRATEGIES:
        outcome = run_strategy(workload, arch, strategy, config)
        cold = estimate_cost(workload, outcome.allocation, arch, cost, "cold")
        steady = estimate_cost(workload, outcome.allocation, arch, cost, "steady")
        chosen = steady if mode == "steady" else cold
        try:
            min_dm = min_dm_for_fit(workload, arch, strategy, config)
        except PackingError:
            min_dm = None
        rows.append(
            StrategyComparison(
                strategy=strategy,
                fit=outcome.feasible,
                min_dm=min_dm,
                energy_J=chosen.energy_total_J,
                delay_s=chosen.delay_total_s,
                edp_Js=chosen.edp_Js,
                edp_cold_Js=cold.edp_Js,
                edp_steady_Js=steady.edp_Js,
                utilization=chosen.utilization,
                area_mm2=chosen.area.total_imc_area_mm2,
                folds=len(outcome.allocation.folds),
            )
        )
    return rows


@dataclass(frozen=True)
class SweepPoint:
    dh: int
    dm: int
    strategy: str
    area_mm2: float
    energy_J: float
    delay_s: float
    edp_Js: float
    fit: bool


def sweep(
    workload: Workload,
    arch: ImcArchitecture,
    cost: CostParams,
    dh_values,
    dm_values,
    strategies=STRATEGIES,
    mode: str = "steady",
    config: PackConfig | None = None,
) -> list[SweepPoint]:
    """Evaluate the full (Dh x Dm x strategy) cross product.

    Non-fitting points are normal rows with fit=False: their cost includes
    the per-inference weight reloading the point would actually pay.
    """
    if not dh_values or not dm_values:
        raise ValueError("sweep requires non-empty dh and dm value lists")
    points = []
    for dh in dh_values:
        for dm in dm_values:
            probe = replace(arch, Dh=dh, Dm=dm)
            for strategy in strategies:
                outcome = run_strategy(workload, probe, strategy, config)
                report = estimate_cost(workload, outcome.allocation, probe, cost, mode)
                points.append(
                    SweepPoint(
                        dh=dh,
                        dm=dm,
                        strategy=strategy,
                        area_mm2=report.area.total_imc_area_mm2,
                        energy_J=report.energy_total_J,
                        delay_s=report.delay_total_s,
                        edp_Js=report.edp_Js,
                        fit=outcome.feasible,
                    )
                )
    return points


def pareto_front(points) -> list:
    """Keep rows not dominated on (area_mm2, edp_Js); order is preserved."""
    kept = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            if (
                q.area_mm2 <= p.area_mm2
                and q.edp_Js <= p.edp_Js
                and (q.area_mm2 < p.area_mm2 or q.edp_Js < p.edp_Js)
            ):
                dominated = True
                break
        if not dominated:
            kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

LAYER_CSV_HEADER = (
    "layer_id,compute_cycles,mac_energy_J,periph_energy_J,act_buffer_energy_J,"
    "weight_load_bits,weight_load_energy_J,weight_load_seconds,spatial_utilization"
)


def report_to_json(report: CostReport) -> str:
    doc = {
        "steady_state": report.steady_state,
        "fit_on_chip": report.fit_on_chip,
        "energy_total_J": report.energy_total_J,
        "delay_total_s": report.delay_total_s,
        "edp_Js": report.edp_Js,
        "edp_compute_side_Js": report.edp_compute_side_Js,
        "edp_weight_load_Js": report.edp_weight_load_Js,
        "energy_breakdown_J": report.energy_breakdown,
        "delay_breakdown_s": report.delay_breakdown,
        "utilization": report.utilization,
        "area": {
            "macro_area_mm2": report.area.macro_area_mm2,
            "total_imc_area_mm2": report.area.total_imc_area_mm2,
            "density_bits_per_mm2": report.area.density_bits_per_mm2,
        },
        "per_layer": [
            {
                "layer_id": lc.layer_id,
                "compute_cycles": lc.compute_cycles,
                "mac_energy_J": lc.mac_energy_J,
                "periph_energy_J": lc.periph_energy_J,
                "act_buffer_energy_J": lc.act_buffer_energy_J,
                "weight_load_bits": lc.weight_load_bits,
                "weight_load_energy_J": lc.weight_load_energy_J,
                "weight_load_seconds": lc.weight_load_seconds,
                "spatial_utilization": lc.spatial_utilization,
            }
            for lc in report.per_layer
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def report_layer_csv_rows(report: CostReport) -> list[str]:
    rows = [LAYER_CSV_HEADER]
    for lc in report.per_layer:
        rows.append(
            f"{lc.layer_id},{lc.compute_cycles},{lc.mac_energy_J!r},{lc.periph_energy_J!r},"
            f"{lc.act_buffer_energy_J!r},{lc.weight_load_bits},{lc.weight_load_energy_J!r},"
            f"{lc.weight_load_seconds!r},{lc.spatial_utilization!r}"
        )
    return rows
