"""IMC design points: array geometry, unit costs and the analytic area model.

An architecture is the 4-D array space Di x Do x Dh x Dm:

  Di  input-reuse dimension (columns fed by shared inputs; K unrolls here)
  Do  output-reuse dimension (rows accumulated per output; C/FX/FY unroll here)
  Dh  number of parallel macros (inputs multicast, outputs gathered/accumulated)
  Dm  cells per multiplier, i.e. time-multiplex depth of resident weights

One bitcell stores one weight bit; a weight occupies `weight_bits` cells at
the same multiplier position, so a macro holds Di * Do * Dm weights.

Two baseline configurations are bundled ("dimc22", a 22nm digital design, and
"aimc28", a 28nm analog design) together with an LPDDR4 weight memory and a
256 kB SRAM activation buffer. The published single-point macro areas include
design-specific overheads that a linear cell+periphery model cannot reproduce,
so they are kept as `reported_macro_area_mm2` for reference while the model
extrapolates from cell and peripheral unit areas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

IMC_KINDS = ("digital", "analog")


class ArchitectureError(ValueError):
    """Malformed or invalid architecture document."""


@dataclass(frozen=True)
class ImcArchitecture:
    Di: int
    Do: int
    Dh: int
    Dm: int
    weight_bits: int
    input_bits: int
    clock_hz: float
    imc_kind: str
    name: str = ""

    def __post_init__(self):
        for field in ("Di", "Do", "Dh", "Dm", "weight_bits", "input_bits"):
            value = getattr(self, field)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ArchitectureError(f"architecture field '{field}' must be a positive integer, got {value!r}")
        if self.clock_hz <= 0:
            raise ArchitectureError(f"clock_hz must be positive, got {self.clock_hz!r}")
        if self.imc_kind not in IMC_KINDS:
            raise ArchitectureError(f"unknown imc_kind {self.imc_kind!r}, expected one of {IMC_KINDS}")

    @property
    def plane(self) -> int:
        """Multiplier positions per macro (Di * Do)."""
        return self.Di * self.Do

    @property
    def weight_capacity(self) -> int:
        """Total resident weights across all macros."""
        return self.Di * self.Do * self.Dm * self.Dh


@dataclass(frozen=True)
class CostParams:
    """Unit energy/area/bandwidth costs of one design point.

    e_mac_J is the energy of a 1b x 1b MAC equivalent; a full MAC at the
    array's operand precision costs e_mac_J * weight_bits * input_bits.
    For digital arrays it is derived from an ND2 gate-equivalent count
    (nd2_per_mac, a calibration knob) times nd2_cap_F * vdd_V^2.
    For analog arrays the MAC cost is ADC-dominated (e_adc_J per conversion)
    and the multiplier array contribution is folded into e_periph_J.
    """

    e_mac_J: float  # J per 1b x 1b MAC equivalent
    e_adc_J: float  # J per ADC conversion (analog only, else 0)
    e_periph_J: float  # J per macro activation per cycle
    e_buf_J_per_bit: float  # activation buffer access, J/bit
    e_dram_J_per_bit: float  # DRAM access, J/bit
    dram_bw_bits_per_s: float
    cell_area_um2: float
    periph_area_um2: float
    buf_bytes: int
    nd2_cap_F: float = 0.3e-15
    vdd_V: float = 0.9
    nd2_per_mac: int = 50
    reported_macro_area_mm2: float | None = None

    def __post_init__(self):
        for field in (
            "e_mac_J", "e_adc_J", "e_periph_J", "e_buf_J_per_bit", "e_dram_J_per_bit",
            "cell_area_um2", "periph_area_um2",
        ):
            if getattr(self, field) < 0:
                raise ArchitectureError(f"cost field '{field}' must be non-negative")
        if self.dram_bw_bits_per_s <= 0:
            raise ArchitectureError("dram_bw_bits_per_s must be positive")
        if self.buf_bytes < 0:
            raise ArchitectureError("buf_bytes must be non-negative")


@dataclass(frozen=True)
class AreaReport:
    macro_area_mm2: float
    total_imc_area_mm2: float
    density_bits_per_mm2: float


# Defaults reflect the two bundled design points. Digital: 22nm, 0.379 um^2
# cells, 44290 um^2 periphery, ND2-based MAC energy. Analog: 28nm, 1.2 um^2
# 10T cells, 15400 um^2 periphery, 190 fJ/conversion ADCs. Both share the
# LPDDR4 (4 pJ/bit, 12.8 Gb/s) and 256 kB SRAM buffer (0.009 pJ/bit) blocks.
_MEMORY_DEFAULTS = {
    "e_dram_J_per_bit": 4e-12,
    "dram_bw_bits_per_s": 12.8e9,
    "e_buf_J_per_bit": 9e-15,
    "buf_bytes": 262144,
}

_KIND_DEFAULTS = {
    "digital": {
        "nd2_cap_F": 0.3e-15,
        "vdd_V": 0.9,
        "nd2_per_mac": 50,
        "e_adc_J": 0.0,
        "e_periph_J": 12.5e-12,
        "cell_area_um2": 0.379,
        "periph_area_um2": 44290.0,
    },
    "analog": {
        "nd2_cap_F": 0.3e-15,
        "vdd_V": 0.9,
        "nd2_per_mac": 0,
        "e_adc_J": 190e-15,
        "e_periph_J": 4e-12,
        "cell_area_um2": 1.2,
        "periph_area_um2": 15400.0,
    },
}

_ARCH_FIELDS = ("Di", "Do", "Dh", "Dm", "weight_bits", "input_bits", "clock_hz", "imc_kind")


def _derived_e_mac(costs: dict, weight_bits: int, input_bits: int) -> float:
    # Gate-equivalent switching energy per full MAC, normalized to a 1b MAC.
    full = costs["nd2_per_mac"] * costs["nd2_cap_F"] * costs["vdd_V"] ** 2
    return full / (weight_bits * input_bits)


def bundled_architecture_names() -> tuple[str, ...]:
    root = resources.files("imcpack").joinpath("data/archs")
    return tuple(sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json")))


def load_architecture(source: str | dict) -> tuple[ImcArchitecture, CostParams]:
    """Load an architecture from a bundled name, a file path, JSON text or a dict.

    Documents may name a bundled config in a "base" field and override any
    subset of its fields; cost fields that are still missing are filled from
    the defaults of the selected imc_kind plus the shared memory blocks.
    """
    doc = _read_arch_doc(source)
    if "base" in doc:
        base = _read_arch_doc(doc["base"])
        base_costs = dict(base.pop("costs", {}))
        overrides = {k: v for k, v in doc.items() if k != "base"}
        base_costs.update(overrides.pop("costs", {}))
        base.update(overrides)
        base["costs"] = base_costs
        doc = base

    missing = [f for f in _ARCH_FIELDS if f not in doc]
    if missing:
        raise ArchitectureError(f"architecture document is missing field '{missing[0]}'")
    kind = doc["imc_kind"]
    if kind not in IMC_KINDS:
        raise ArchitectureError(f"unknown imc_kind {kind!r}, expected one of {IMC_KINDS}")

    arch = ImcArchitecture(
        Di=doc["Di"], Do=doc["Do"], Dh=doc["Dh"], Dm=doc["Dm"],
        weight_bits=doc["weight_bits"], input_bits=doc["input_bits"],
        clock_hz=float(doc["clock_hz"]), imc_kind=kind,
        name=doc.get("name", ""),
    )

    costs = dict(_MEMORY_DEFAULTS)
    costs.update(_KIND_DEFAULTS[kind])
    costs.update(doc.get("costs", {}))
    if "e_mac_J" not in costs:
        costs["e_mac_J"] = _derived_e_mac(costs, arch.weight_bits, arch.input_bits)
    known = {f.name for f in CostParams.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = [k for k in costs if k not in known]
    if unknown:
        raise ArchitectureError(f"architecture costs: unknown field '{unknown[0]}'")
    return arch, CostParams(**costs)


def _read_arch_doc(source: str | dict) -> dict:
    if isinstance(source, dict):
        return dict(source)
    if source in bundled_architecture_names():
        text = resources.files("imcpack").joinpath(f"data/archs/{source}.json").read_text()
        return json.loads(text)
    text = source
    if not source.lstrip().startswith("{"):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ArchitectureError(
                f"architecture '{source}' is neither a readable file nor one of the "
                f"bundled configs {bundled_architecture_names()}"
            ) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArchitectureError(f"architecture document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ArchitectureError("architecture document must be a JSON object")
    return doc


def compute_area(arch: ImcArchitecture, cost: CostParams) -> AreaReport:
    """Analytic area model: periphery per macro plus one cell per weight bit.

    macro_area = periph_area + cell_area * Di * Do * Dm * weight_bits, so the
    peripheral contribution is amortized as Dm grows; the total is linear in
    the macro count Dh.
    """
    macro_um2 = cost.periph_area_um2 + cost.cell_area_um2 * arch.Di * arch.Do * arch.Dm * arch.weight_bits
    macro_mm2 = macro_um2 * 1e-6
    total_mm2 = arch.Dh * macro_mm2
    stored_bits = arch.weight_capacity * arch.weight_bits
    return AreaReport(
        macro_area_mm2=macro_mm2,
        total_imc_area_mm2=total_mm2,
        density_bits_per_mm2=stored_bits / total_mm2,
    )
