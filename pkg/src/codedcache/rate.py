"""Closed-form achievable broadcast rates.

All rates are normalized by the file size: a rate of 1 means one file's
worth of broadcast bits per delivery round.

The core expression is the single-level multi-access rate

    R(M) = d*U * (N/(d*M) - 1) * (1 - (1 - d*M/N)^(K/d))

for memory M in [0, N/d], which degrades gracefully to K*U at M = 0 and
to 0 at M = N/d.  K/d is evaluated as a real exponent; divisibility of K
by d only matters to the bit-exact simulator.
"""

from __future__ import annotations

import math
import warnings

from .model import SystemConfig, Subsystem


class RateWarning(UserWarning):
    """Out-of-range memory argument handled by clamping."""


def single_level_rate(
    memory: float,
    num_caches: int,
    n_files: int,
    users_per_cache: int,
    degree: int = 1,
) -> float:
    """Achievable rate of one level served alone with the given memory.

    Parameters
    ----------
    memory : float
        Per-cache memory devoted to this level, in file units.
    num_caches, n_files, users_per_cache, degree : int
        K, N, U and d for the level.

    Returns
    -------
    float
        Rate in files per round; K*U at memory 0, exactly 0 at
        memory >= N/degree.  Non-increasing and convex in memory.
    """
    if memory < 0:
        raise ValueError(f"memory must be non-negative, got {memory!r}")
    cap = n_files / degree
    if memory >= cap:
        if memory > cap * (1 + 1e-12):
            warnings.warn(
                f"memory {memory:g} exceeds N/d = {cap:g}; clamping to full storage",
                RateWarning,
                stacklevel=2,
            )
        return 0.0
    if memory == 0:
        return float(num_caches * users_per_cache)
    mu = degree * memory / n_files
    value = (
        degree
        * users_per_cache
        * (1.0 / mu - 1.0)
        * (1.0 - (1.0 - mu) ** (num_caches / degree))
    )
    return max(0.0, value)


def single_access_rate(memory: float, num_caches: int, n_files: int) -> float:
    """Rate for the single-user single-access special case:
    (N/M - 1) * (1 - (1 - M/N)^K), clamped at 0."""
    return single_level_rate(memory, num_caches, n_files, users_per_cache=1, degree=1)


def subsystem_rate(sub: Subsystem) -> float:
    """Expected per-color load of one delivery subsystem, in subfile units:
    (1/mu - 1) * (1 - (1 - mu)^k) with mu the cached fraction."""
    mu = sub.subfile_fraction
    k = sub.num_caches
    if mu >= 1.0:
        return 0.0
    if mu <= 0.0:
        return float(k)
    return (1.0 / mu - 1.0) * (1.0 - (1.0 - mu) ** k)


def lfu_rate(config: SystemConfig) -> float:
    """Worst-case rate of the least-frequently-used baseline.

    Every cache stores the floor(M) most popular whole files, filled in
    popularity order across levels; each distinct requested file outside
    the stored set costs one file transmission, and at most K*U_i
    distinct level-i files can be requested.
    """
    remaining = int(math.floor(config.memory))
    rate = 0.0
    for lv in config.levels:
        stored = min(lv.n_files, max(0, remaining))
        remaining -= stored
        rate += min(
            config.num_caches * lv.users_per_cache,
            lv.n_files - stored,
        )
    return float(rate)


def small_k_rate(config: SystemConfig) -> float:
    """Rate of the simplified scheme used when the cache count is small.

    Finds the unique level i* whose storage window contains M, fully
    stores the more popular levels, caches level i* linearly, and leaves
    the rest uncached:

        R = sum_{h > i*} K*U_h + K*U_{i*} * (1 - (M - T)/ (N_{i*}/d_{i*}))

    where T is the memory spent on the fully stored levels.
    """
    k = config.num_caches
    m = config.memory
    prefix = 0.0
    for idx, lv in enumerate(config.levels):
        cap = lv.full_memory
        if m < prefix + cap:
            tail = sum(
                k * other.users_per_cache for other in config.levels[idx + 1 :]
            )
            return float(tail + k * lv.users_per_cache * (1.0 - (m - prefix) / cap))
        prefix += cap
    return 0.0
