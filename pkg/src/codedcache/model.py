"""Problem-instance data model and validation.

An instance describes a broadcast network of ``K`` access-point caches,
each holding ``M`` file units, serving ``L`` popularity levels.  Level
``i`` contains ``N_i`` equally popular files, has ``U_i`` users attached
to every cache, and an access degree ``d_i``: each level-``i`` user reads
the ``d_i`` consecutive caches starting at its own (cyclically).

Levels are kept sorted by decreasing per-file popularity ``U_i/N_i``.
All types are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Iterable, Sequence


class ConfigError(ValueError):
    """Fatal problem-instance validation failure."""


class ValidationWarning(UserWarning):
    """Non-fatal irregularity in a problem instance."""


@dataclass(frozen=True)
class LevelSpec:
    """One popularity level: ``n_files`` files, ``users_per_cache`` users
    attached to every cache, each reading ``access_degree`` consecutive
    caches."""

    n_files: int
    users_per_cache: int
    access_degree: int = 1

    def __post_init__(self) -> None:
        for name in ("n_files", "users_per_cache", "access_degree"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

    @property
    def popularity(self) -> Fraction:
        """Per-file request share U/N as an exact rational."""
        return Fraction(self.users_per_cache, self.n_files)

    @property
    def full_memory(self) -> float:
        """Memory that stores the whole level: N/d file units."""
        return self.n_files / self.access_degree


@dataclass(frozen=True)
class SystemConfig:
    """A full problem instance.

    Attributes
    ----------
    num_caches : int
        Number of access-point caches K, arranged cyclically.
    memory : float
        Per-cache memory M in file units (real valued to support sweeps).
    levels : tuple of LevelSpec
        Popularity levels, most popular first after validation.
    separation_ratio : float or None
        Optional popularity-separation threshold q > 1.  When given,
        :func:`validate` warns if two levels are closer than q in
        popularity.
    """

    num_caches: int
    memory: float
    levels: tuple[LevelSpec, ...]
    separation_ratio: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def max_degree(self) -> int:
        """Largest access degree D (derived, never stored)."""
        return max(lv.access_degree for lv in self.levels)

    @property
    def uncached_rate(self) -> float:
        """Rate with empty caches: sum of K*U_i over levels."""
        return float(sum(self.num_caches * lv.users_per_cache for lv in self.levels))

    @property
    def full_memory(self) -> float:
        """Memory that stores every level entirely: sum of N_i/d_i."""
        return sum(lv.full_memory for lv in self.levels)

    def with_memory(self, memory: float) -> "SystemConfig":
        """Copy of this instance with a different cache size (for sweeps)."""
        return replace(self, memory=float(memory))

    def with_degrees(self, degrees: Sequence[int]) -> "SystemConfig":
        """Copy of this instance with per-level access degrees replaced."""
        if len(degrees) != self.num_levels:
            raise ConfigError("need one degree per level")
        new_levels = tuple(
            replace(lv, access_degree=int(d)) for lv, d in zip(self.levels, degrees)
        )
        return replace(self, levels=new_levels)


@dataclass(frozen=True)
class Subsystem:
    """A single-color slice of a single level: K/d caches serving N
    subfiles, each cached at fraction d*M/N (clamped at 1)."""

    num_caches: float
    n_files: int
    memory: float
    subfile_fraction: float

    @classmethod
    def for_level(cls, config: SystemConfig, level_index: int, share: float) -> "Subsystem":
        lv = config.levels[level_index]
        d = lv.access_degree
        fraction = min(1.0, d * share / lv.n_files)
        return cls(
            num_caches=config.num_caches / d,
            n_files=lv.n_files,
            memory=share,
            subfile_fraction=fraction,
        )


def validate(config: SystemConfig) -> SystemConfig:
    """Check an instance against the model's regularity rules.

    Returns the config with levels re-sorted into decreasing popularity
    if needed.  Fatal problems (negative memory, more users than files,
    degree exceeding K) raise :class:`ConfigError`; soft irregularities
    (weak popularity separation, degree not dividing K) only emit a
    :class:`ValidationWarning`.

    Idempotent: validating a validated config returns an equal config.
    """
    if not isinstance(config.num_caches, int) or config.num_caches < 1:
        raise ConfigError(f"num_caches must be a positive integer, got {config.num_caches!r}")
    if not math.isfinite(config.memory) or config.memory < 0:
        raise ConfigError(f"memory must be a finite non-negative real, got {config.memory!r}")
    if not config.levels:
        raise ConfigError("at least one popularity level is required")

    k = config.num_caches
    for idx, lv in enumerate(config.levels):
        if lv.n_files < k * lv.users_per_cache:
            raise ConfigError(
                f"level {idx + 1}: needs at least K*U = {k * lv.users_per_cache} files, "
                f"got {lv.n_files}"
            )
        if lv.access_degree > k:
            raise ConfigError(
                f"level {idx + 1}: access degree {lv.access_degree} exceeds K = {k}"
            )
        if k % lv.access_degree != 0:
            warnings.warn(
                f"level {idx + 1}: degree {lv.access_degree} does not divide K = {k}; "
                "simulation serves wrap-around users uncoded",
                ValidationWarning,
                stacklevel=2,
            )

    # Stable sort keeps equally popular levels in input order.
    ordered = tuple(sorted(config.levels, key=lambda lv: lv.popularity, reverse=True))

    if config.separation_ratio is not None:
        q = config.separation_ratio
        if q <= 1:
            raise ConfigError(f"separation_ratio must exceed 1, got {q!r}")
        for i in range(len(ordered) - 1):
            ratio = ordered[i].popularity / ordered[i + 1].popularity
            if ratio < q:
                warnings.warn(
                    f"levels {i + 1} and {i + 2} are closer in popularity "
                    f"({float(ratio):.4g}) than the separation ratio q = {q:g}",
                    ValidationWarning,
                    stacklevel=2,
                )

    return replace(config, levels=ordered)


def config_from_dict(data: dict[str, Any]) -> SystemConfig:
    """Build a validated config from the JSON instance schema
    ``{"K": int, "M": float, "levels": [{"N", "U", "d"}, ...], "q": float?}``.
    """
    if not isinstance(data, dict):
        raise ConfigError("instance must be a JSON object")
    known = {"K", "M", "levels", "q"}
    extra = set(data) - known
    if extra:
        warnings.warn(f"ignoring unknown instance fields: {sorted(extra)}", ValidationWarning)
    try:
        k = data["K"]
        m = data["M"]
        raw_levels = data["levels"]
    except KeyError as exc:
        raise ConfigError(f"instance is missing required field {exc.args[0]!r}") from None
    if not isinstance(raw_levels, list) or not raw_levels:
        raise ConfigError('"levels" must be a non-empty list')
    levels = []
    for idx, entry in enumerate(raw_levels):
        try:
            levels.append(
                LevelSpec(
                    n_files=int(entry["N"]),
                    users_per_cache=int(entry["U"]),
                    access_degree=int(entry["d"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"levels[{idx}]: expected fields N, U, d ({exc})") from None
    q = data.get("q")
    config = SystemConfig(
        num_caches=int(k),
        memory=float(m),
        levels=tuple(levels),
        separation_ratio=float(q) if q is not None else None,
    )
    return validate(config)


def config_to_dict(config: SystemConfig) -> dict[str, Any]:
    """Inverse of :func:`config_from_dict`."""
    data: dict[str, Any] = {
        "K": config.num_caches,
        "M": config.memory,
        "levels": [
            {"N": lv.n_files, "U": lv.users_per_cache, "d": lv.access_degree}
            for lv in config.levels
        ],
    }
    if config.separation_ratio is not None:
        data["q"] = config.separation_ratio
    return data


def config_from_json(text: str) -> SystemConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid instance JSON: {exc}") from None
    return config_from_dict(data)


def config_to_json(config: SystemConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2)


def load_config(path: str) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_json(fh.read())


def make_config(
    num_caches: int,
    memory: float,
    levels: Iterable[tuple[int, int, int]],
    separation_ratio: float | None = None,
) -> SystemConfig:
    """Shorthand constructor from (N, U, d) triples; validates."""
    specs = tuple(LevelSpec(n, u, d) for n, u, d in levels)
    return validate(
        SystemConfig(
            num_caches=num_caches,
            memory=float(memory),
            levels=specs,
            separation_ratio=separation_ratio,
        )
    )
