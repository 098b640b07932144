import random

import pytest
from hypothesis import given, strategies as st

from imcpack.architecture import ImcArchitecture
from imcpack.tiling import (
    Tile,
    compute_cycles,
    fold_smallest_lpf,
    generate_supertiles,
    generate_tiles,
    max_subset_product,
)
from imcpack.workload import Layer, lpf_decompose

from oracles import brute_max_subset_product, random_workload


def arch(Di=16, Do=256, Dh=1, Dm=64, kind="digital"):
    return ImcArchitecture(Di=Di, Do=Do, Dh=Dh, Dm=Dm, weight_bits=4, input_bits=4,
                           clock_hz=2e8, imc_kind=kind)


def layer(id="l", K=1, C=1, FX=1, FY=1, OX=1, OY=1):
    return Layer(id=id, K=K, C=C, FX=FX, FY=FY, OX=OX, OY=OY, weight_bits=8, act_bits=8)


# ---------------------------------------------------------------------------
# max_subset_product
# ---------------------------------------------------------------------------


def test_subset_product_exact_cap():
    subset, product = max_subset_product([2, 2, 2, 2, 2], 16)
    assert product == 16 and subset == (2, 2, 2, 2)


def test_subset_product_everything_fits():
    subset, product = max_subset_product([2, 2, 3, 3], 256)
    assert product == 36 and sorted(subset) == [2, 2, 3, 3]


def test_subset_product_nontrivial():
    subset, product = max_subset_product([5, 7, 11], 60)
    assert product == 55 and sorted(subset) == [5, 11]


def test_subset_product_empty_always_feasible():
    subset, product = max_subset_product([7, 11], 1)
    assert product == 1 and subset == ()


def test_subset_product_tie_prefers_fewer_factors():
    # 4 is reachable as (4,) ... not here; with primes {2,2} vs nothing: check
    # the documented tie-break on equal products via {2,3} cap 6: 6=2*3 unique.
    # {2,2,3} cap 12: 12=2*2*3 unique again; use {2,6}? factors must be prime,
    # so construct a tie with {3,3} vs {9}: not prime. Ties can only arise from
    # equal products of different prime multisets, e.g. impossible; so assert
    # determinism instead: repeated calls give identical subsets.
    assert max_subset_product([2, 3, 5], 30) == max_subset_product([2, 3, 5], 30)


@given(
    st.lists(st.sampled_from([2, 3, 5, 7, 11, 13]), min_size=0, max_size=12),
    st.integers(1, 4096),
)
def test_subset_product_matches_bruteforce(factors, cap):
    _, product = max_subset_product(factors, cap)
    assert product == brute_max_subset_product(factors, cap)


def test_subset_product_subset_reconstructs_product():
    rng = random.Random(7)
    for _ in range(200):
        factors = [rng.choice([2, 3, 5, 7]) for _ in range(rng.randint(0, 10))]
        cap = rng.randint(1, 1000)
        subset, product = max_subset_product(factors, cap)
        got = 1
        for p in subset:
            got *= p
        assert got == product <= cap


# ---------------------------------------------------------------------------
# generate_tiles
# ---------------------------------------------------------------------------


def test_generate_tiles_leftover_to_th():
    t = generate_tiles(layer(K=32, C=16, FX=3, FY=3), arch(Dh=2))
    assert (t.Ti, t.To, t.Th, t.Tm) == (16, 144, 2, 1)
    assert t.th_lpfs == (("K", 2),)


def test_generate_tiles_leftover_to_tm():
    t = generate_tiles(layer(K=32, C=16, FX=3, FY=3), arch(Dh=1))
    assert (t.Ti, t.To, t.Th, t.Tm) == (16, 144, 1, 2)
    assert t.tm_lpfs == (("K", 2),)


def test_generate_tiles_identity_layer():
    t = generate_tiles(layer(), arch())
    assert (t.Ti, t.To, t.Th, t.Tm) == (1, 1, 1, 1)


def test_generate_tiles_input_relevant_priority_for_th():
    # leftovers: one (K,2) and one (C,2); Dh=2 holds only one of them and the
    # input-relevant factor must win.
    t = generate_tiles(layer(K=32, C=32), arch(Di=16, Do=16, Dh=2))
    assert t.Th == 2
    assert t.th_lpfs == (("C", 2),)
    assert t.tm_lpfs == (("K", 2),)


def test_generate_tiles_k_only_offered_after_input_exhausted():
    # leftover input factors {2, 2} cannot both fit Dh=2; with one of them
    # unplaced, K leftovers must not be used at all.
    t = generate_tiles(layer(K=32, C=64), arch(Di=16, Do=16, Dh=2))
    assert t.th_lpfs == (("C", 2),)
    assert t.Th == 2
    tm_tags = [tag for tag, _ in t.tm_lpfs]
    assert tm_tags.count("C") == 1 and tm_tags.count("K") == 1


def test_tile_reconstruction_random():
    rng = random.Random(123)
    for i in range(150):
        wl = random_workload(rng, i, max_layers=1)
        a = arch(Di=rng.choice([4, 8, 16]), Do=rng.choice([32, 64, 256]),
                 Dh=rng.choice([1, 2, 3, 4]))
        l = wl.layers[0]
        t = generate_tiles(l, a)
        assert t.Ti <= a.Di and t.To <= a.Do and t.Th <= a.Dh
        k_side = t.Ti
        in_side = t.To
        for tag, p in t.th_lpfs + t.tm_lpfs:
            if tag == "K":
                k_side *= p
            else:
                in_side *= p
        assert k_side == l.K
        assert in_side == l.C * l.FX * l.FY
        assert t.Ti * t.To * t.Tm * t.Th == l.weight_volume


# ---------------------------------------------------------------------------
# generate_supertiles
# ---------------------------------------------------------------------------


def mk_tile(lid, tm, ti=2, to=2):
    return Tile(layer_id=lid, Ti=ti, To=to, Tm=tm, Th=1,
                ti_lpfs=(), to_lpfs=(), th_lpfs=(), tm_lpfs=())


def test_supertiles_single_layer():
    pool = generate_supertiles([mk_tile("a", 3)], arch(Di=8, Do=8))
    assert len(pool) == 1 and pool[0].layer_ids == ("a",)
    assert (pool[0].STi, pool[0].STo, pool[0].STm) == (2, 2, 3)


def test_supertiles_height_cap_from_pool():
    pool = generate_supertiles([mk_tile("a", 4), mk_tile("b", 2)], arch(Di=8, Do=8, Dm=64))
    assert sorted(st.layer_ids for st in pool) == [("a",), ("b",)]


def test_supertiles_mixed_heights():
    pool = generate_supertiles([mk_tile("x", 2), mk_tile("y", 1), mk_tile("z", 1)], arch(Di=8, Do=8, Dm=64))
    assert sorted(st.layer_ids for st in pool) == [("x",), ("y",), ("y", "z"), ("z",)]
    yz = [st for st in pool if st.layer_ids == ("y", "z")][0]
    assert yz.STm == 2


def test_supertiles_respect_dm():
    # same pool, but Dm=1 forbids the two-tile stack
    pool = generate_supertiles([mk_tile("x", 1), mk_tile("y", 1)], arch(Di=8, Do=8, Dm=1))
    assert sorted(st.layer_ids for st in pool) == [("x",), ("y",)]


def test_supertile_invariants_random():
    rng = random.Random(5)
    for i in range(60):
        tiles = [mk_tile(f"l{j}", rng.randint(1, 6), rng.randint(1, 4), rng.randint(1, 4))
                 for j in range(rng.randint(1, 6))]
        a = arch(Di=8, Do=8, Dm=rng.randint(1, 12))
        max_tm = max(t.Tm for t in tiles)
        for st_ in generate_supertiles(tiles, a):
            lids = st_.layer_ids
            assert len(set(lids)) == len(lids)
            assert st_.STm == sum(t.Tm for t in st_.tiles)
            assert st_.STi == max(t.Ti for t in st_.tiles)
            assert st_.STo == max(t.To for t in st_.tiles)
            if len(st_.tiles) > 1:
                assert st_.STm <= min(max_tm, a.Dm)


def test_supertiles_empty_pool_rejected():
    with pytest.raises(ValueError):
        generate_supertiles([], arch())


# ---------------------------------------------------------------------------
# cycles and folding
# ---------------------------------------------------------------------------


def test_compute_cycles_matches_mac_ratio():
    l = layer(K=32, C=16, FX=3, FY=3, OX=1, OY=1)
    t = generate_tiles(l, arch(Dh=1))
    assert compute_cycles(l, t) == 2
    assert compute_cycles(l, t) == l.macs // (t.Ti * t.To * t.Th)


def test_compute_cycles_fully_mapped():
    l = layer(K=16, C=16)
    t = generate_tiles(l, arch())
    assert t.Tm == 1 and compute_cycles(l, t) == 1


def test_fold_prefers_smallest_k_factor():
    t = generate_tiles(layer(K=16, C=4), arch(Di=16, Do=4, Dh=1))
    t = Tile(**{**t.__dict__, "Tm": 2})  # pretend two temporal steps already
    folded, lpf, source = fold_smallest_lpf(t, dm_cap=4)
    assert lpf == ("K", 2) and source == "ti"
    assert folded.Ti == 8 and folded.Tm == 4
    assert folded.folded_lpfs == (("K", 2),)
    assert folded.volume == t.volume  # weight volume conserved


def test_fold_falls_back_to_to_when_k_exceeds_cap():
    # Ti factors are all 5s, To has a 2; cap allows doubling only.
    t = Tile(layer_id="a", Ti=5, To=4, Tm=2, Th=1,
             ti_lpfs=(("K", 5),), to_lpfs=(("C", 2), ("C", 2)), th_lpfs=(), tm_lpfs=())
    folded, lpf, source = fold_smallest_lpf(t, dm_cap=5)
    assert lpf == ("C", 2) and source == "to"
    assert folded.To == 2 and folded.Tm == 4


def test_fold_none_when_nothing_fits():
    t = Tile(layer_id="a", Ti=4, To=4, Tm=4, Th=1,
             ti_lpfs=(("K", 2), ("K", 2)), to_lpfs=(("C", 2), ("C", 2)), th_lpfs=(), tm_lpfs=())
    assert fold_smallest_lpf(t, dm_cap=4) is None


def test_fold_strictly_shrinks_footprint():
    rng = random.Random(9)
    for i in range(80):
        wl = random_workload(rng, i, max_layers=1)
        t = generate_tiles(wl.layers[0], arch(Dh=2))
        res = fold_smallest_lpf(t, dm_cap=10**9)
        if res is None:
            assert not t.ti_lpfs and not t.to_lpfs
            continue
        folded, (tag, p), _ = res
        assert folded.Ti * folded.To * p == t.Ti * t.To
        assert folded.Tm == t.Tm * p
        assert folded.volume == t.volume
