"""Executable placement and delivery.

Two simulation modes:

* bit-exact: every cache samples actual bit indices of every subfile of
  its color, delivery broadcasts XOR-coded segments per (user group,
  color) subsystem, and every user's reconstruction is verified
  bit-for-bit.  Intended for small instances (K*U <= 64).

* expected-size: per-trial stochastic user profiles are mapped onto the
  same subsystem structure, but each subsystem contributes its expected
  coded load instead of sampled bits.  This scales to catalogue-sized
  popularity distributions.

Coding structure: level-i users are split into groups keyed by (cache
index mod d_i, arrival slot), so that no two users of a group share any
cache, and caches are colored by index mod d_i, so every non-wrapping
user sees each color exactly once.  When d does not divide K, users
whose access window wraps past the cyclic boundary cannot cover all
colors consistently; those caches are flagged as edge caches and their
users are served uncoded (only the bits missing from every accessible
cache are sent in clear).

Randomness: one PCG64 stream per purpose, derived from the run seed via
``numpy.random.SeedSequence`` spawn keys — (0, level, file) for file
contents, (1, cache, level, file) for placement sampling, (2, trial) for
stochastic user profiles.  Identical seeds reproduce every artifact
bit-for-bit.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .model import SystemConfig, ValidationWarning
from .pama import Allocation, build_threshold_table, pama_rate
from .popularity import EmpiricalDistribution


class DecodeError(AssertionError):
    """A user failed to reconstruct its requested file (scheme bug)."""


Demand = tuple[int, int, int]  # (cache, level, file-within-level)


@dataclass(frozen=True)
class Coloring:
    """Cache coloring and user grouping for one access degree."""

    num_caches: int
    users_per_cache: int
    degree: int
    cache_colors: tuple[int, ...]
    edge_caches: frozenset[int]

    def group_of(self, cache: int, slot: int) -> int | None:
        """Group index for the user at (cache, slot); None for users on
        edge caches, which are served uncoded."""
        if cache in self.edge_caches:
            return None
        return (cache % self.degree) * self.users_per_cache + slot

    def color_cache(self, cache: int, color: int) -> int:
        """The unique accessible cache of the given color for a
        non-edge user attached at ``cache``."""
        return (cache + (color - cache) % self.degree) % self.num_caches

    @property
    def num_groups(self) -> int:
        return self.degree * self.users_per_cache


def build_coloring(num_caches: int, users_per_cache: int, degree: int) -> Coloring:
    """Color caches by index mod d and group users by (color residue,
    slot).  When d does not divide K, the trailing caches whose access
    windows wrap are flagged as edge caches."""
    if degree > num_caches:
        raise ValueError(f"degree {degree} exceeds the cache count {num_caches}")
    colors = tuple(c % degree for c in range(num_caches))
    if num_caches % degree == 0:
        edge: frozenset[int] = frozenset()
    else:
        edge = frozenset(range(num_caches - degree + 1, num_caches))
    return Coloring(
        num_caches=num_caches,
        users_per_cache=users_per_cache,
        degree=degree,
        cache_colors=colors,
        edge_caches=edge,
    )


def _subfile_span(file_size: int, degree: int, color: int) -> tuple[int, int]:
    """(offset, length) of one color's subfile within a file of
    ``file_size`` bits; the first file_size % degree subfiles are one
    bit longer so the split is exact."""
    base = file_size // degree
    rem = file_size % degree
    offset = color * base + min(color, rem)
    length = base + (1 if color < rem else 0)
    return offset, length


@dataclass
class PlacementState:
    """Bit-exact cache contents for one instance and seed."""

    config: SystemConfig
    shares: tuple[float, ...]
    file_size_bits: int
    seed: int
    fractions: tuple[float, ...]
    stored: dict[tuple[int, int, int], np.ndarray]  # (cache, level, file) -> bool mask
    _content: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def content(self, level: int, file: int) -> np.ndarray:
        """Ground-truth bits of a file (lazily generated, deterministic)."""
        key = (level, file)
        if key not in self._content:
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(0, level, file)))
            )
            self._content[key] = rng.integers(0, 2, self.file_size_bits, dtype=np.uint8)
        return self._content[key]


def place(
    config: SystemConfig,
    allocation: Allocation,
    file_size_bits: int,
    seed: int,
) -> PlacementState:
    """Sample cache contents: every cache keeps, for each file of each
    level, a Bernoulli(d_i * share_i / N_i) subset of the bit indices of
    the subfile matching the cache's color."""
    if file_size_bits < 64:
        raise ValueError("file_size_bits must be at least 64")
    k = config.num_caches
    fractions = []
    for idx, lv in enumerate(config.levels):
        mu = lv.access_degree * allocation.shares[idx] / lv.n_files
        if mu > 1.0 + 1e-9:
            raise ValueError(
                f"level {idx + 1}: cached fraction {mu:g} exceeds 1; allocation bug"
            )
        fractions.append(min(1.0, max(0.0, mu)))

    stored: dict[tuple[int, int, int], np.ndarray] = {}
    for cache in range(k):
        expected_bits = 0.0
        actual_bits = 0
        for lvl_idx, lv in enumerate(config.levels):
            color = cache % lv.access_degree
            _, length = _subfile_span(file_size_bits, lv.access_degree, color)
            mu = fractions[lvl_idx]
            for f in range(lv.n_files):
                rng = np.random.Generator(
                    np.random.PCG64(
                        np.random.SeedSequence(seed, spawn_key=(1, cache, lvl_idx, f))
                    )
                )
                mask = rng.random(length) < mu
                stored[(cache, lvl_idx, f)] = mask
                actual_bits += int(mask.sum())
                expected_bits += mu * length
        if expected_bits >= 1e4:
            slack = 0.01 * expected_bits + 5.0 * math.sqrt(expected_bits)
            if abs(actual_bits - expected_bits) > slack:
                warnings.warn(
                    f"cache {cache}: stored {actual_bits} bits vs expected "
                    f"{expected_bits:.0f}",
                    ValidationWarning,
                )
    return PlacementState(
        config=config,
        shares=tuple(allocation.shares),
        file_size_bits=file_size_bits,
        seed=seed,
        fractions=tuple(fractions),
        stored=stored,
    )


def worst_case_demands(config: SystemConfig) -> list[Demand]:
    """Deterministic profile with exactly U_i level-i users per cache and
    demands distinct within every delivery group."""
    demands: list[Demand] = []
    k = config.num_caches
    for cache in range(k):
        for lvl_idx, lv in enumerate(config.levels):
            for slot in range(lv.users_per_cache):
                demands.append((cache, lvl_idx, (slot * k + cache) % lv.n_files))
    return demands


@dataclass
class DeliveryLog:
    total_bits: int
    rate: float
    pair_bits: dict[tuple[int, tuple[int, int], int], int]  # (level, (residue, slot), color) -> bits
    uncoded_bits: int
    decode_ok: bool


class _SegmentIndex:
    """Positions of one demanded subfile grouped by which participant
    caches store each bit (signature bitmask over the subsystem)."""

    def __init__(self, masks: Sequence[np.ndarray]):
        length = len(masks[0]) if masks else 0
        sig = np.zeros(length, dtype=np.uint64)
        for bit, mask in enumerate(masks):
            sig |= mask.astype(np.uint64) << np.uint64(bit)
        self._order = np.argsort(sig, kind="stable")
        self._sorted = sig[self._order]

    def positions(self, signature: int) -> np.ndarray:
        lo = int(np.searchsorted(self._sorted, signature, side="left"))
        hi = int(np.searchsorted(self._sorted, signature, side="right"))
        return self._order[lo:hi]


def deliver_bit_exact(placement: PlacementState, demands: Sequence[Demand]) -> DeliveryLog:
    """Run coded delivery for the given demand profile and verify that
    every user can reassemble its file bit-for-bit.

    Per (group, color) subsystem, each non-empty subset S of active
    users contributes the XOR of the segments "wanted by u, cached by
    exactly the caches of S minus u", padded to the longest segment.
    Segments cached nowhere (signature 0) are sent in clear once per
    distinct demanded file.  Returns the broadcast size normalized by
    the file size.
    """
    config = placement.config
    k = config.num_caches
    f_bits = placement.file_size_bits

    slots: Counter = Counter()
    users = []
    for cache, lvl_idx, file in demands:
        if not 0 <= cache < k:
            raise ValueError(f"cache index {cache} out of range")
        if not 0 <= lvl_idx < config.num_levels:
            raise ValueError(f"level index {lvl_idx} out of range")
        if not 0 <= file < config.levels[lvl_idx].n_files:
            raise ValueError(f"file {file} does not exist in level {lvl_idx + 1}")
        slot = slots[(cache, lvl_idx)]
        slots[(cache, lvl_idx)] += 1
        users.append((len(users), cache, lvl_idx, file, slot))

    total_bits = 0
    uncoded_bits = 0
    pair_bits: dict[tuple[int, tuple[int, int], int], int] = {}
    # recovered[uid][color]: positions of the wanted subfile obtainable
    # from the broadcast.
    recovered: dict[int, list[np.ndarray]] = {}
    own_cover: dict[int, list[np.ndarray]] = {}

    by_level: dict[int, list] = defaultdict(list)
    for u in users:
        by_level[u[2]].append(u)

    for lvl_idx, level_users in sorted(by_level.items()):
        lv = config.levels[lvl_idx]
        d = lv.access_degree
        coloring = build_coloring(k, lv.users_per_cache, d)
        for uid, cache, _, file, slot in level_users:
            spans = [_subfile_span(f_bits, d, c)[1] for c in range(d)]
            recovered[uid] = [np.zeros(n, dtype=bool) for n in spans]
            own_cover[uid] = [np.zeros(n, dtype=bool) for n in spans]

        coded: dict[tuple[int, int], list] = defaultdict(list)
        edge_users = []
        for u in level_users:
            _, cache, _, _, slot = u
            if cache in coloring.edge_caches:
                edge_users.append(u)
            else:
                coded[(cache % d, slot)].append(u)

        for group_key in sorted(coded):
            members = coded[group_key]
            for color in range(d):
                participants = [
                    (u, coloring.color_cache(u[1], color)) for u in members
                ]
                caches_used = [vc for _, vc in participants]
                if len(set(caches_used)) != len(caches_used):
                    raise DecodeError("group members mapped to a shared cache")
                bits_here = 0

                index: dict[int, _SegmentIndex] = {}
                for f in sorted({u[3] for u, _ in participants}):
                    index[f] = _SegmentIndex(
                        [placement.stored[(vc, lvl_idx, f)] for _, vc in participants]
                    )
                # Uncached segments, once per distinct demanded file.
                for f in sorted(index):
                    pos = index[f].positions(0)
                    if pos.size:
                        bits_here += int(pos.size)
                        for u, _ in participants:
                            if u[3] == f:
                                recovered[u[0]][color][pos] = True
                # XOR-coded segments for every subset of two or more.
                for r in range(2, len(participants) + 1):
                    for subset in combinations(range(len(participants)), r):
                        max_len = 0
                        seg_positions = []
                        for pos_in_subset in subset:
                            u, _ = participants[pos_in_subset]
                            signature = 0
                            for other in subset:
                                if other != pos_in_subset:
                                    signature |= 1 << other
                            pos = index[u[3]].positions(signature)
                            seg_positions.append((u, pos))
                            max_len = max(max_len, int(pos.size))
                        if max_len == 0:
                            continue
                        bits_here += max_len
                        for u, pos in seg_positions:
                            if pos.size:
                                recovered[u[0]][color][pos] = True
                pair_bits[(lvl_idx, group_key, color)] = bits_here
                total_bits += bits_here

        # Edge users: send whatever no accessible cache holds, in clear.
        # Identical (cache, file) requests share the transmission.
        served_clear: set[tuple[int, int, int]] = set()
        for uid, cache, _, file, _ in edge_users:
            window = [(cache + o) % k for o in range(d)]
            for color in range(d):
                holders = [c for c in window if c % d == color]
                _, length = _subfile_span(f_bits, d, color)
                cov = np.zeros(length, dtype=bool)
                for c in holders:
                    cov |= placement.stored[(c, lvl_idx, file)]
                own_cover[uid][color] |= cov
                missing = np.flatnonzero(~cov)
                key = (cache, file, color)
                if key not in served_clear:
                    served_clear.add(key)
                    total_bits += int(missing.size)
                    uncoded_bits += int(missing.size)
                recovered[uid][color][missing] = True

    # Decode verification: every wanted bit must be cached at an
    # accessible cache or recovered from the broadcast.
    for uid, cache, lvl_idx, file, slot in users:
        lv = config.levels[lvl_idx]
        d = lv.access_degree
        coloring = build_coloring(k, lv.users_per_cache, d)
        truth = placement.content(lvl_idx, file)
        rebuilt = np.full(placement.file_size_bits, 2, dtype=np.uint8)
        for color in range(d):
            offset, length = _subfile_span(f_bits, d, color)
            if cache in coloring.edge_caches:
                cached = own_cover[uid][color]
            else:
                cached = placement.stored[(coloring.color_cache(cache, color), lvl_idx, file)]
            known = cached | recovered[uid][color]
            if not bool(known.all()):
                raise DecodeError(
                    f"user {uid} (cache {cache}, level {lvl_idx + 1}) cannot recover "
                    f"{int((~known).sum())} bits of color {color}"
                )
            pos = np.arange(length)
            rebuilt[offset + pos] = truth[offset + pos]
        if not bool((rebuilt == truth).all()):
            raise DecodeError(f"user {uid}: reassembled file differs from the original")

    return DeliveryLog(
        total_bits=total_bits,
        rate=total_bits / f_bits,
        pair_bits=pair_bits,
        uncoded_bits=uncoded_bits,
        decode_ok=True,
    )


def _coded_load(mu: float, active: int) -> float:
    """Expected per-group load (1/mu - 1)(1 - (1-mu)^active), with its
    continuous limits at mu = 0 and mu = 1."""
    if active <= 0 or mu >= 1.0:
        return 0.0
    if mu <= 0.0:
        return float(active)
    return (1.0 / mu - 1.0) * (1.0 - (1.0 - mu) ** active)


def expected_profile_rate(
    config: SystemConfig, shares: Sequence[float], demands: Iterable[Demand]
) -> float:
    """Expected-size rate of one demand profile under the coded scheme.

    Demands repeated inside a subsystem count once (the coded broadcast
    serves identical requests simultaneously).  Edge users contribute
    the expected uncovered fraction of each of their subfiles.
    """
    k = config.num_caches
    mus = []
    for idx, lv in enumerate(config.levels):
        mus.append(min(1.0, lv.access_degree * shares[idx] / lv.n_files))

    group_files: dict[tuple[int, int, int], set[int]] = defaultdict(set)
    edge_seen: set[tuple[int, int, int]] = set()
    slots: Counter = Counter()
    for cache, lvl_idx, file in demands:
        d = config.levels[lvl_idx].access_degree
        slot = slots[(cache, lvl_idx)]
        slots[(cache, lvl_idx)] += 1
        wraps = k % d != 0 and cache > k - d
        if wraps:
            edge_seen.add((cache, lvl_idx, file))
        else:
            group_files[(lvl_idx, cache % d, slot)].add(file)

    load = 0.0
    for (lvl_idx, _, _), files in group_files.items():
        load += _coded_load(mus[lvl_idx], len(files))
    for cache, lvl_idx, _ in edge_seen:
        lv = config.levels[lvl_idx]
        d = lv.access_degree
        mu = mus[lvl_idx]
        window = [(cache + o) % k for o in range(d)]
        for color in range(d):
            holders = sum(1 for c in window if c % d == color)
            load += (1.0 - mu) ** holders / d
    return load


@dataclass(frozen=True)
class SimulationResult:
    rates: tuple[float, ...]
    theoretical: float
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.rates))

    def percentile(self, q: float) -> float:
        return float(np.percentile(self.rates, q))


def simulate_stochastic(
    config: SystemConfig,
    popularity: EmpiricalDistribution,
    level_map: Sequence[int] | np.ndarray,
    total_users: int,
    trials: int,
    seed: int,
) -> SimulationResult:
    """Stochastic user profiles in expected-size mode.

    Each of ``total_users`` users attaches to a uniformly random cache
    and requests a file drawn from ``popularity``; ``level_map`` sends
    every global rank to its level index.  Per trial the realized
    profile is priced with :func:`expected_profile_rate` under the
    allocation chosen for ``config.memory``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    level_map = np.asarray(level_map, dtype=np.int64)
    if level_map.shape != (popularity.n_files,):
        raise ValueError("level_map must assign a level to every file rank")
    if level_map.size and (level_map.min() < 0 or level_map.max() >= config.num_levels):
        raise ValueError("level_map references levels missing from the config")

    result = pama_rate(config, build_threshold_table(config))
    shares = result.allocation.shares
    probs = popularity.as_array()
    rates = []
    for trial in range(trials):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2, trial)))
        )
        caches = rng.integers(0, config.num_caches, total_users)
        ranks = rng.choice(popularity.n_files, size=total_users, p=probs)
        demands = [
            (int(c), int(level_map[r]), int(r)) for c, r in zip(caches, ranks)
        ]
        rates.append(expected_profile_rate(config, shares, demands))
    return SimulationResult(
        rates=tuple(rates), theoretical=result.exact.total, seed=seed
    )


def lfu_simulate(
    popularity: EmpiricalDistribution,
    memory: float,
    total_users: int,
    trials: int,
    seed: int,
) -> SimulationResult:
    """Empirical rate of the LFU baseline: per trial, the number of
    distinct requested files outside the floor(M) most popular."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cached = int(math.floor(memory))
    probs = popularity.as_array()
    rates = []
    for trial in range(trials):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2, trial)))
        )
        ranks = rng.choice(popularity.n_files, size=total_users, p=probs)
        rates.append(float(np.unique(ranks[ranks >= cached]).size))
    return SimulationResult(rates=tuple(rates), theoretical=float("nan"), seed=seed)
