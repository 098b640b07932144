"""Per-layer uniform tile generation and the supertile pool.

A tile is the uniform weight block of one layer: Th identical copies of
extent Ti x To x Tm, where Ti is a product of K-tagged primes (input-reuse
direction), To a product of C/FX/FY-tagged primes (output-reuse direction),
Th the copies spread across macros and Tm the time-multiplex depth holding
all remaining weight-loop factors. Supertiles stack tiles of distinct layers
in the Dm direction so the packer can treat the stack as a single item.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .architecture import ImcArchitecture
from .workload import INPUT_RELEVANT_TAGS, Layer, Lpf, lpf_decompose, sort_lpfs, _TAG_RANK


@dataclass(frozen=True)
class Tile:
    """Uniform weight tile of one layer.

    Ti <= Di and To <= Do always hold; Tm may exceed Dm of the target
    architecture, in which case the instance is unplaceable and allocation
    reports the failure (folding can only grow Tm further).
    """

    layer_id: str
    Ti: int
    To: int
    Tm: int
    Th: int
    ti_lpfs: tuple[Lpf, ...]
    to_lpfs: tuple[Lpf, ...]
    th_lpfs: tuple[Lpf, ...]
    tm_lpfs: tuple[Lpf, ...]
    folded_lpfs: tuple[Lpf, ...] = ()

    @property
    def footprint(self) -> int:
        return self.Ti * self.To

    @property
    def volume(self) -> int:
        """Weight elements per copy (Ti * To * Tm)."""
        return self.Ti * self.To * self.Tm

    @property
    def th_k(self) -> int:
        """K-tagged share of Th: macros producing distinct output groups."""
        out = 1
        for tag, p in self.th_lpfs:
            if tag == "K":
                out *= p
        return out

    @property
    def tm_acc(self) -> int:
        """Input-relevant share of Tm: consecutive temporal steps that
        accumulate into the same outputs (partial sums stay local)."""
        out = 1
        for tag, p in self.tm_lpfs:
            if tag in INPUT_RELEVANT_TAGS:
                out *= p
        return out


@dataclass(frozen=True)
class SuperTile:
    """Stack of tiles from distinct layers along Dm, without rotation.

    The footprint is the bounding box of the member tiles (STi x STo); the
    height STm is the sum of the member Tm values.
    """

    tiles: tuple[Tile, ...]
    STi: int
    STo: int
    STm: int

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return tuple(t.layer_id for t in self.tiles)

    @property
    def volume(self) -> int:
        """Sum of member tile volumes (not the bounding-box volume)."""
        return sum(t.volume for t in self.tiles)


def _make_supertile(tiles) -> SuperTile:
    # Largest footprint at the bottom of the stack; layer id breaks ties.
    ordered = tuple(sorted(tiles, key=lambda t: (-t.footprint, t.layer_id)))
    return SuperTile(
        tiles=ordered,
        STi=max(t.Ti for t in ordered),
        STo=max(t.To for t in ordered),
        STm=sum(t.Tm for t in ordered),
    )


def max_subset_product(factors, cap: int) -> tuple[tuple[int, ...], int]:
    """Largest sub-multiset product of `factors` that does not exceed `cap`.

    Exhaustive with deduplication on achieved products, exact for the factor
    counts that arise from realistic loop bounds. Ties prefer fewer factors,
    then the lexicographically smallest sorted factor tuple. The empty subset
    (product 1) is always feasible.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    subset, product = _tagged_max_subset([("K", p) for p in factors], cap)
    return tuple(p for _, p in subset), product


def _tagged_max_subset(lpfs, cap: int) -> tuple[tuple[Lpf, ...], int]:
    """Tagged variant of max_subset_product; ties additionally prefer the
    smallest tag-rank sequence so mixed C/FX/FY pools resolve deterministically."""
    ordered = sorted(lpfs, key=lambda f: (f[1], _TAG_RANK[f[0]]))
    # product -> (factor count, prime tuple, tag-rank tuple, subset)
    table = {1: (0, (), (), ())}
    for tag, p in ordered:
        for prod, (cnt, primes, ranks, subset) in list(table.items()):
            new_prod = prod * p
            if new_prod > cap:
                continue
            cand_primes = primes + (p,)
            cand_ranks = ranks + (_TAG_RANK[tag],)
            cand = (cnt + 1, cand_primes, cand_ranks, subset + ((tag, p),))
            cur = table.get(new_prod)
            if cur is None or cand[:3] < cur[:3]:
                table[new_prod] = cand
    best_prod = max(table)
    _, _, _, subset = table[best_prod]
    return sort_lpfs(subset), best_prod


def _minus(pool, used) -> list[Lpf]:
    out = list(pool)
    for f in used:
        out.remove(f)
    return out


def generate_tiles(layer: Layer, arch: ImcArchitecture) -> Tile:
    """Derive the uniform tile of a layer for a given array geometry.

    Ti maximizes utilization of Di over the K factors and To of Do over the
    C/FX/FY factors. Leftover factors are offered to Th with the
    input-relevant ones first (they raise partial-sum reuse across macros);
    K-tagged leftovers are only considered once every input-relevant leftover
    has been absorbed. Whatever remains becomes the temporal depth Tm, which
    is allowed to exceed Dm here: feasibility is decided at allocation time.
    """
    lpfs = lpf_decompose(layer)
    k_pool = [f for f in lpfs if f[0] == "K"]
    in_pool = [f for f in lpfs if f[0] != "K"]

    ti_lpfs, ti = _tagged_max_subset(k_pool, arch.Di)
    to_lpfs, to = _tagged_max_subset(in_pool, arch.Do)
    left_k = _minus(k_pool, ti_lpfs)
    left_in = _minus(in_pool, to_lpfs)

    th_in_lpfs, th_in = _tagged_max_subset(left_in, arch.Dh)
    if len(th_in_lpfs) == len(left_in):
        th_k_lpfs, th_k = _tagged_max_subset(left_k, arch.Dh // th_in)
    else:
        th_k_lpfs, th_k = (), 1

    tm_lpfs = sort_lpfs(_minus(left_in, th_in_lpfs) + _minus(left_k, th_k_lpfs))
    tm = 1
    for _, p in tm_lpfs:
        tm *= p

    return Tile(
        layer_id=layer.id,
        Ti=ti, To=to, Tm=tm, Th=th_in * th_k,
        ti_lpfs=ti_lpfs, to_lpfs=to_lpfs,
        th_lpfs=sort_lpfs(th_in_lpfs + th_k_lpfs),
        tm_lpfs=tm_lpfs,
    )


def generate_supertiles(pool, arch: ImcArchitecture, stack_cap: int = 6, stack_budget: int = 4000) -> tuple[SuperTile, ...]:
    """Enumerate the supertile pool over a set of per-layer tiles.

    Every singleton stack is included. Multi-tile stacks hold at most one
    tile per layer and their cumulative height may exceed neither the largest
    Tm in the tile pool (a lossless pruning of the search) nor Dm itself.
    Stacks are capped at `stack_cap` distinct layers, and at most
    `stack_budget` multi-tile stacks are enumerated (tallest-first, so the
    stacks most useful for packing survive truncation on deep networks).
    Output order: descending STi*STo*STm, then layer-id list.
    """
    tiles = list(pool)
    if not tiles:
        raise ValueError("tile pool is empty")
    max_tm = max(t.Tm for t in tiles)
    height_cap = min(max_tm, arch.Dm)

    stacks = [_make_supertile([t]) for t in tiles]
    order = sorted(tiles, key=lambda t: (-t.Tm, t.layer_id))
    budget = [stack_budget]

    def grow(start, chosen, height):
        for i in range(start, len(order)):
            if budget[0] <= 0:
                return
            t = order[i]
            if height + t.Tm > height_cap or len(chosen) >= stack_cap:
                continue
            nxt = chosen + [t]
            if len(nxt) >= 2:
                stacks.append(_make_supertile(nxt))
                budget[0] -= 1
            grow(i + 1, nxt, height + t.Tm)

    grow(0, [], 0)
    return tuple(sorted(stacks, key=lambda st: (-(st.STi * st.STo * st.STm), st.layer_ids)))


def compute_cycles(layer: Layer, tile: Tile) -> int:
    """Ideal compute cycles of a layer under its tiling: Tm * OX * OY.

    Equivalently MACs / (Ti * To * Th), since the tile reconstructs the
    weight loops exactly. Weight loading is not included.
    """
    return tile.Tm * layer.OX * layer.OY


def fold_smallest_lpf(tile: Tile, dm_cap: int) -> tuple[Tile, Lpf, str] | None:
    """Fold one spatial factor of a tile into its temporal depth.

    Candidates are the Ti factors (K-tagged, tried first because temporal K
    loops keep inputs stationary) then the To factors, each smallest prime
    first. The first candidate whose folded Tm stays within `dm_cap` is
    applied: the spatial extent divides by the prime and Tm multiplies by it.
    Returns (new tile, folded factor, "ti"|"to"), or None if nothing folds.
    """
    candidates = [(f, "ti") for f in sorted(tile.ti_lpfs, key=lambda f: f[1])]
    candidates += [(f, "to") for f in sorted(tile.to_lpfs, key=lambda f: f[1])]
    for lpf, source in candidates:
        tag, p = lpf
        if tile.Tm * p > dm_cap:
            continue
        if source == "ti":
            new = replace(
                tile,
                Ti=tile.Ti // p,
                Tm=tile.Tm * p,
                ti_lpfs=tuple(_minus(list(tile.ti_lpfs), [lpf])),
                tm_lpfs=sort_lpfs(tile.tm_lpfs + (lpf,)),
                folded_lpfs=tile.folded_lpfs + (lpf,),
            )
        else:
            new = replace(
                tile,
                To=tile.To // p,
                Tm=tile.Tm * p,
                to_lpfs=tuple(_minus(list(tile.to_lpfs), [lpf])),
                tm_lpfs=sort_lpfs(tile.tm_lpfs + (lpf,)),
                folded_lpfs=tile.folded_lpfs + (lpf,),
            )
        return new, lpf, source
    return None
