"""imcpack: weight packing and cost modelling for in-memory-computing DNN accelerators.

Packs the weight tensors of a whole network into the Di x Do x Dh x Dm space
of an IMC design, compares the result against stacked and flattened baseline
mappings, and estimates energy, latency, EDP and area for design sweeps.
"""

from .architecture import (
    AreaReport,
    ArchitectureError,
    CostParams,
    ImcArchitecture,
    bundled_architecture_names,
    compute_area,
    load_architecture,
)
from .baselines import STRATEGIES, map_flattened, map_stacked, run_strategy
from .costmodel import (
    CostModelError,
    CostReport,
    LayerCost,
    StrategyComparison,
    SweepPoint,
    compare_mappings,
    estimate_cost,
    layer_cycles,
    pareto_front,
    sweep,
)
from .packing import (
    Allocation,
    AllocationEntry,
    Column,
    FoldNote,
    FoldStep,
    LayerSummary,
    PackConfig,
    PackingError,
    PackOutcome,
    allocate_columns,
    allocation_to_json,
    fold_layer,
    generate_columns,
    min_dm_for_fit,
    pack_network,
    pack_rect_2d,
    parse_allocation,
    validate_allocation,
)
from .tiling import SuperTile, Tile, compute_cycles, generate_supertiles, generate_tiles, max_subset_product
from .workload import (
    Layer,
    LpfSet,
    Workload,
    WorkloadError,
    bundled_workload_names,
    load_workload,
    lpf_decompose,
    parse_workload,
    workload_to_json,
)

__version__ = "0.1.0"
