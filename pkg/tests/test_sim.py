import warnings

import numpy as np
import pytest

from codedcache.model import make_config
from codedcache.pama import Allocation, pama_rate
from codedcache.popularity import (
    discretize,
    level_map_for_config,
    zipf_distribution,
    zipf_split_heuristic,
)
from codedcache.rate import single_level_rate
from codedcache.sim import (
    build_coloring,
    deliver_bit_exact,
    expected_profile_rate,
    lfu_simulate,
    place,
    simulate_stochastic,
    worst_case_demands,
)


def test_coloring_six_caches_two_colors():
    col = build_coloring(6, 2, 2)
    assert col.cache_colors == (0, 1, 0, 1, 0, 1)
    assert col.num_groups == 4
    assert col.edge_caches == frozenset()
    # every user sees one cache of each color, distinct within a group
    for slot in range(2):
        for color in range(2):
            seen = set()
            for cache in range(6):
                if cache % 2 == 0:  # group residue 0
                    vc = col.color_cache(cache, color)
                    assert col.cache_colors[vc] == color
                    assert vc not in seen
                    seen.add(vc)


def test_coloring_single_color():
    col = build_coloring(5, 3, 1)
    assert col.num_groups == 3
    assert col.edge_caches == frozenset()


def test_coloring_edge_cache_flagged():
    col = build_coloring(5, 1, 2)
    assert col.edge_caches == frozenset({4})
    assert col.group_of(4, 0) is None
    assert col.group_of(3, 0) is not None


def test_coloring_degree_exceeding_caches():
    with pytest.raises(ValueError):
        build_coloring(3, 1, 4)


def test_worst_case_demands_distinct_within_groups():
    cfg = make_config(6, 3.0, [(12, 2, 2)])
    demands = worst_case_demands(cfg)
    assert len(demands) == 6 * 2
    # group = (cache % d, slot); slots are assigned per cache in order
    groups = {}
    counters = {}
    for cache, lvl, file in demands:
        slot = counters.get((cache, lvl), 0)
        counters[(cache, lvl)] = slot + 1
        groups.setdefault((lvl, cache % 2, slot), []).append(file)
    for members in groups.values():
        assert len(members) == len(set(members))


def test_place_full_fraction_stores_everything():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    pl = place(cfg, Allocation(shares=(16.0,)), 256, seed=1)
    assert all(mask.all() for mask in pl.stored.values())
    assert deliver_bit_exact(pl, worst_case_demands(cfg)).total_bits == 0


def test_place_zero_fraction_stores_nothing():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    pl = place(cfg, Allocation(shares=(0.0,)), 256, seed=1)
    assert not any(mask.any() for mask in pl.stored.values())


def test_place_rejects_overfull_fraction():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    with pytest.raises(ValueError):
        place(cfg, Allocation(shares=(17.0,)), 256, seed=1)


def test_place_rejects_tiny_files():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    with pytest.raises(ValueError):
        place(cfg, Allocation(shares=(8.0,)), 32, seed=1)


def test_stored_bits_match_memory_budget():
    # Expected per-cache footprint is share * F bits; at F = 2^14 the
    # realization stays within 1%.
    cfg = make_config(4, 6.0, [(16, 2, 2), (32, 1, 1)])
    res = pama_rate(cfg)
    f_bits = 2**14
    pl = place(cfg, res.allocation, f_bits, seed=17)
    expected = sum(res.allocation.shares) * f_bits
    for cache in range(4):
        actual = sum(
            int(mask.sum())
            for (c, _, _), mask in pl.stored.items()
            if c == cache
        )
        assert actual == pytest.approx(expected, rel=0.01)


def test_part_sizes_concentrate():
    # Two caches at half memory: the four cached-by classes each hold
    # about a quarter of every file.
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    pl = place(cfg, Allocation(shares=(8.0,)), 100_000, seed=5)
    m0 = pl.stored[(0, 0, 0)]
    m1 = pl.stored[(1, 0, 0)]
    for part in (
        ~m0 & ~m1,
        m0 & ~m1,
        ~m0 & m1,
        m0 & m1,
    ):
        assert int(part.sum()) == pytest.approx(25_000, rel=0.03)


def test_two_cache_delivery_rate():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    pl = place(cfg, Allocation(shares=(8.0,)), 100_000, seed=7)
    log = deliver_bit_exact(pl, [(0, 0, 0), (1, 0, 1)])
    assert log.rate == pytest.approx(0.75, rel=0.03)
    assert log.decode_ok


def test_zero_fraction_rate_counts_distinct_subfiles():
    cfg = make_config(4, 0.0, [(8, 2, 1)])
    pl = place(cfg, Allocation(shares=(0.0,)), 4096, seed=2)
    log = deliver_bit_exact(pl, worst_case_demands(cfg))
    assert log.rate == pytest.approx(8.0, abs=1e-12)  # K*U distinct files
    # duplicated demands are served once
    dup = [(0, 0, 3), (1, 0, 3), (2, 0, 3)]
    assert deliver_bit_exact(pl, dup).rate == pytest.approx(1.0, abs=1e-12)


def test_missing_demand_is_an_error():
    cfg = make_config(2, 8.0, [(16, 1, 1)])
    pl = place(cfg, Allocation(shares=(8.0,)), 256, seed=1)
    with pytest.raises(ValueError):
        deliver_bit_exact(pl, [(0, 0, 99)])


def test_decode_fuzz_small_instances():
    rng = np.random.default_rng(123)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(50):
            k = int(rng.integers(2, 9))
            u = int(rng.integers(1, 3))
            d = int(rng.integers(1, min(2, k) + 1))
            n = k * u + int(rng.integers(0, 6))
            cfg = make_config(k, float(rng.uniform(0, n / d)), [(n, u, d)])
            share = min(cfg.memory, n / d)
            pl = place(cfg, Allocation(shares=(share,)), 2**12, seed=int(rng.integers(2**31)))
            count = int(rng.integers(1, k * u + 1))
            demands = [
                (int(rng.integers(0, k)), 0, int(rng.integers(0, n)))
                for _ in range(count)
            ]
            log = deliver_bit_exact(pl, demands)
            assert log.decode_ok


def test_decode_with_wraparound_users():
    # 5 caches, degree 2: cache 4's users wrap and go uncoded.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = make_config(5, 4.0, [(10, 1, 2)])
    pl = place(cfg, Allocation(shares=(4.0,)), 2**12, seed=9)
    log = deliver_bit_exact(pl, worst_case_demands(cfg))
    assert log.decode_ok
    assert log.uncoded_bits > 0


def test_multi_level_delivery_decodes():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = make_config(4, 30.0, [(8, 2, 1), (64, 1, 2)])
    res = pama_rate(cfg)
    pl = place(cfg, res.allocation, 2**12, seed=4)
    log = deliver_bit_exact(pl, worst_case_demands(cfg))
    assert log.decode_ok


def test_empirical_rate_tracks_formula():
    cfg = make_config(6, 3.0, [(12, 2, 2)])
    pl = place(cfg, Allocation(shares=(3.0,)), 2**16, seed=3)
    log = deliver_bit_exact(pl, worst_case_demands(cfg))
    formula = single_level_rate(3.0, 6, 12, 2, 2)
    assert log.rate == pytest.approx(formula, rel=0.05)


def test_placement_reproducible():
    cfg = make_config(4, 10.0, [(16, 1, 1)])
    a = place(cfg, Allocation(shares=(10.0,)), 4096, seed=42)
    b = place(cfg, Allocation(shares=(10.0,)), 4096, seed=42)
    for key in a.stored:
        assert np.array_equal(a.stored[key], b.stored[key])
    log_a = deliver_bit_exact(a, worst_case_demands(cfg))
    log_b = deliver_bit_exact(b, worst_case_demands(cfg))
    assert log_a.total_bits == log_b.total_bits
    assert log_a.pair_bits == log_b.pair_bits


def test_expected_profile_matches_closed_form_exactly():
    cfg = make_config(6, 40.0, [(100, 2, 2), (200, 1, 1)])
    res = pama_rate(cfg)
    rate = expected_profile_rate(cfg, res.allocation.shares, worst_case_demands(cfg))
    assert abs(rate - res.exact.total) <= 1e-12


def test_simulate_stochastic_reproducible_and_bounded():
    dist = zipf_distribution(0.6, 500)
    split = zipf_split_heuristic(0.6, 500, 5, 50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = discretize(dist, split, 5, 50, (1, 1), 50.0)
    level_map = level_map_for_config(cfg, 500)
    a = simulate_stochastic(cfg, dist, level_map, 50, 10, seed=11)
    b = simulate_stochastic(cfg, dist, level_map, 50, 10, seed=11)
    assert a.rates == b.rates
    assert a.theoretical == b.theoretical
    c = simulate_stochastic(cfg, dist, level_map, 50, 10, seed=12)
    assert a.rates != c.rates


def test_simulate_zero_memory_bounded_by_population():
    dist = zipf_distribution(0.6, 500)
    split = zipf_split_heuristic(0.6, 500, 5, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = discretize(dist, split, 5, 50, (1, 1), 0.0)
    res = simulate_stochastic(cfg, dist, level_map_for_config(cfg, 500), 50, 20, seed=1)
    assert res.mean <= 50.0  # at most one file per user


def test_simulate_level_map_must_cover_catalogue():
    dist = zipf_distribution(0.6, 500)
    cfg = make_config(5, 10.0, [(500, 10, 1)])
    with pytest.raises(ValueError):
        simulate_stochastic(cfg, dist, np.zeros(10, dtype=int), 50, 5, seed=1)


def test_lfu_simulate_endpoints():
    dist = zipf_distribution(0.6, 200)
    everything = lfu_simulate(dist, 200.0, 50, 10, seed=5)
    assert everything.mean == 0.0
    nothing = lfu_simulate(dist, 0.0, 50, 10, seed=5)
    assert 0 < nothing.mean <= 50.0


def test_lfu_simulate_reproducible():
    dist = zipf_distribution(0.6, 200)
    a = lfu_simulate(dist, 20.0, 50, 10, seed=5)
    b = lfu_simulate(dist, 20.0, 50, 10, seed=5)
    assert a.rates == b.rates
