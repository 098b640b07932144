"""Workload model: DNN layers as 6-nested loops plus loop-prime-factor pools.

A layer is described by the loop bounds (K, C, FX, FY, OX, OY) and operand
precisions. K counts output channels, C input channels, FX/FY the filter
kernel, OX/OY the output feature map. Fully-connected layers use
FX = FY = OX = OY = 1; depthwise convolutions are modelled as C = 1 layers
with K equal to the channel count.

The weight loops K, C, FX and FY can be decomposed into loop prime factors
(LPFs), the atomic units handled by the tiling stages. OX and OY are never
factorized: they stay whole temporal loops because they cannot be
parallelized efficiently inside a weight-stationary array.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

# Weight-loop tags, in canonical order. "K" is output-relevant (it unrolls on
# the input-reuse dimension); "C", "FX", "FY" are input-relevant (they unroll
# on the output-reuse dimension).
DIM_TAGS = ("K", "C", "FX", "FY")
INPUT_RELEVANT_TAGS = ("C", "FX", "FY")

_TAG_RANK = {tag: i for i, tag in enumerate(DIM_TAGS)}

Lpf = tuple[str, int]  # (dimension tag, prime)


class WorkloadError(ValueError):
    """Malformed or invalid workload document."""


@dataclass(frozen=True)
class Layer:
    """One 6-loop layer with its operand precisions."""

    id: str
    K: int
    C: int
    FX: int
    FY: int
    OX: int
    OY: int
    weight_bits: int
    act_bits: int

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise WorkloadError("layer id must be a non-empty string")
        for field in ("K", "C", "FX", "FY", "OX", "OY", "weight_bits", "act_bits"):
            value = getattr(self, field)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise WorkloadError(
                    f"layer '{self.id}': field '{field}' must be a positive integer, got {value!r}"
                )

    @property
    def weight_volume(self) -> int:
        """Number of weight elements: K * C * FX * FY."""
        return self.K * self.C * self.FX * self.FY

    @property
    def macs(self) -> int:
        """MAC operations for one inference: weight volume * OX * OY."""
        return self.weight_volume * self.OX * self.OY


@dataclass(frozen=True)
class Workload:
    name: str
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise WorkloadError(f"workload '{self.name}': layer list is empty")
        seen = set()
        for layer in self.layers:
            if layer.id in seen:
                raise WorkloadError(f"workload '{self.name}': duplicate layer id '{layer.id}'")
            seen.add(layer.id)

    def layer(self, layer_id: str) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(layer_id)

    @property
    def total_weight_volume(self) -> int:
        return sum(layer.weight_volume for layer in self.layers)

    @property
    def total_weight_bits(self) -> int:
        return sum(layer.weight_volume * layer.weight_bits for layer in self.layers)


@dataclass(frozen=True)
class LpfSet:
    """Multiset of (tag, prime) factors in canonical order (tag rank, prime)."""

    factors: tuple[Lpf, ...]

    def product(self, tag: str | None = None) -> int:
        out = 1
        for t, p in self.factors:
            if tag is None or t == tag:
                out *= p
        return out

    def for_tag(self, tag: str) -> tuple[int, ...]:
        return tuple(p for t, p in self.factors if t == tag)

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)


def sort_lpfs(factors) -> tuple[Lpf, ...]:
    """Canonical LPF ordering: tag rank first, then prime ascending."""
    return tuple(sorted(factors, key=lambda f: (_TAG_RANK[f[0]], f[1])))


def prime_factors(n: int) -> tuple[int, ...]:
    """Prime factorization with multiplicity, ascending. n = 1 gives ()."""
    if n < 1:
        raise ValueError(f"cannot factorize {n}")
    out = []
    d = 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out.append(n)
    return tuple(out)


def lpf_decompose(layer: Layer) -> LpfSet:
    """Decompose the weight loops of a layer into tagged prime factors.

    The per-tag product reconstructs K, C, FX and FY exactly; dimensions of 1
    contribute no factors.
    """
    factors = []
    for tag in DIM_TAGS:
        for p in prime_factors(getattr(layer, tag)):
            factors.append((tag, p))
    return LpfSet(sort_lpfs(factors))


_LAYER_FIELDS = ("id", "K", "C", "FX", "FY", "OX", "OY", "weight_bits", "act_bits")


def parse_workload(source: str | dict) -> Workload:
    """Parse a workload document (JSON text or an already-decoded mapping).

    Expected shape: {"name": ..., "layers": [{id, K, C, FX, FY, OX, OY,
    weight_bits, act_bits}, ...]}.
    """
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"workload document is not valid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise WorkloadError("workload document must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise WorkloadError("workload field 'name' must be a non-empty string")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise WorkloadError(f"workload '{name}': field 'layers' must be a non-empty list")
    layers = []
    for i, raw in enumerate(raw_layers):
        if not isinstance(raw, dict):
            raise WorkloadError(f"workload '{name}': layer #{i} is not an object")
        label = raw.get("id", f"#{i}")
        missing = [f for f in _LAYER_FIELDS if f not in raw]
        if missing:
            raise WorkloadError(f"layer '{label}': missing field '{missing[0]}'")
        unknown = [f for f in raw if f not in _LAYER_FIELDS]
        if unknown:
            raise WorkloadError(f"layer '{label}': unknown field '{unknown[0]}'")
        layers.append(Layer(**raw))
    return Workload(name=name, layers=tuple(layers))


def workload_to_json(workload: Workload) -> str:
    doc = {
        "name": workload.name,
        "layers": [{f: getattr(layer, f) for f in _LAYER_FIELDS} for layer in workload.layers],
    }
    return json.dumps(doc, indent=2) + "\n"


def bundled_workload_names() -> tuple[str, ...]:
    root = resources.files("imcpack").joinpath("data/workloads")
    return tuple(sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json")))


def load_workload(path_or_name: str) -> Workload:
    """Load a workload from a file path or a bundled workload name."""
    text = None
    if path_or_name in bundled_workload_names():
        text = resources.files("imcpack").joinpath(f"data/workloads/{path_or_name}.json").read_text()
    else:
        try:
            with open(path_or_name, "r", encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise WorkloadError(
                f"workload '{path_or_name}' is neither a readable file nor one of the "
                f"bundled workloads {bundled_workload_names()}"
            ) from None
    return parse_workload(text)
