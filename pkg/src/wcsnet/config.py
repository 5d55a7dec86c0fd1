"""Scenario configuration and the static geometry of the charging model.

A scenario places ``n`` mobile nodes and ``m`` charging stations in a
``sqrt(S) x sqrt(S)`` square.  A station delivers ``k`` energy units per slot
to a node whose distance lies in ``(R_{k+1}, R_k]``, and ``E`` units inside
``R_E``.  The distance to the nearest station is quantised into annuli whose
width equals the per-slot node displacement ``v``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml
from scipy.special import gammaln

__all__ = [
    "ConfigError",
    "NetworkConfig",
    "ChargingProfile",
    "DEFAULT_R1",
    "default_config",
    "default_radii",
    "transmission_range",
    "transmission_range_approx",
    "charge_units",
    "relative_distance",
    "default_resolution",
    "load_config",
    "dump_config",
    "apply_overrides",
    "config_from_mapping",
]

# pi * R1^2 / S ~= 0.053 at S = 20
DEFAULT_R1 = 0.581


class ConfigError(ValueError):
    """Invalid scenario parameter; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def default_radii(r1: float = DEFAULT_R1, E: int = 3) -> tuple[float, ...]:
    """Equally spaced charging bands ``R_k = (E - k + 1) / E * R_1``."""
    return tuple(r1 * (E - k) / E for k in range(E))


@dataclass(frozen=True)
class ChargingProfile:
    """Charging band radii and the probability ``beta[k-1]`` of receiving k units.

    ``beta`` is the area share of each band inside the charging disc, which is
    the distribution of the delivered energy for a node placed uniformly in it.
    """

    radii: tuple[float, ...]
    beta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise ConfigError("radii", "need at least one charging radius")
        if np.any(r <= 0) or np.any(np.diff(r) >= 0):
            raise ConfigError("radii", "must be positive and strictly decreasing")
        sq = r**2
        beta = np.empty_like(r)
        beta[:-1] = (sq[:-1] - sq[1:]) / sq[0]
        beta[-1] = sq[-1] / sq[0]
        object.__setattr__(self, "beta", beta)

    @property
    def E(self) -> int:
        return len(self.radii)

    @property
    def charging_range(self) -> float:
        return self.radii[0]

    @property
    def mean_units(self) -> float:
        """Expected units per charge, ``sum_k k * beta(k)``."""
        return float(np.dot(np.arange(1, self.E + 1), self.beta))


@dataclass(frozen=True)
class NetworkConfig:
    """All scenario parameters.

    ``M`` is the distance-state resolution; when left as ``None`` it is
    derived from the geometry by :func:`default_resolution`.
    """

    n: int = 10
    m: int = 1
    S: float = 20.0
    v: float = 1.0
    q: float = 0.5
    u: int = 1
    L: int = 10
    E: int = 3
    radii: tuple[float, ...] = field(default_factory=default_radii)
    M: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(x) for x in self.radii))
        _check(isinstance(self.n, (int, np.integer)) and self.n >= 1, "n", "must be an integer >= 1")
        _check(isinstance(self.m, (int, np.integer)) and self.m >= 0, "m", "must be an integer >= 0")
        _check(isinstance(self.u, (int, np.integer)) and self.u >= 1, "u", "must be an integer >= 1")
        _check(isinstance(self.L, (int, np.integer)) and self.L >= 1, "L", "must be an integer >= 1")
        _check(isinstance(self.E, (int, np.integer)) and self.E >= 1, "E", "must be an integer >= 1")
        _check(self.S > 0, "S", "area must be positive")
        _check(self.v >= 0, "v", "speed must be non-negative")
        _check(0 < self.q < 1, "q", "must lie strictly between 0 and 1")
        _check(len(self.radii) == self.E, "radii", f"expected {self.E} radii, got {len(self.radii)}")
        ChargingProfile(self.radii)
        _check(self.radii[0] < self.disc_radius, "radii",
               f"charging range must be below sqrt(S/pi) = {self.disc_radius:.6g}")
        if self.M is not None:
            _check(isinstance(self.M, (int, np.integer)) and self.M >= 1, "M", "must be an integer >= 1")
            if self.v > 0:
                outer = self.radii[0] + self.M * self.v
                _check(math.pi * outer**2 <= self.S * (1 + 1e-12), "M",
                       f"annuli up to R1 + M*v = {outer:.6g} do not fit in area S")
            else:
                _check(self.M == 1, "M", "stationary nodes (v = 0) only support M = 1")

    @property
    def disc_radius(self) -> float:
        """Radius of the disc with area ``S``."""
        return math.sqrt(self.S / math.pi)

    @property
    def side(self) -> float:
        return math.sqrt(self.S)

    @property
    def profile(self) -> ChargingProfile:
        return ChargingProfile(self.radii)

    @property
    def R1(self) -> float:
        return self.radii[0]

    @property
    def coverage(self) -> float:
        """Share of the area covered by one charging disc, ``pi R1^2 / S``."""
        return math.pi * self.R1**2 / self.S

    @property
    def resolution(self) -> int:
        if self.M is not None:
            return int(self.M)
        return default_resolution(self.S, self.R1, self.v)

    def replace(self, **changes: Any) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["radii"] = list(self.radii)
        return d


def _check(ok: bool, name: str, message: str) -> None:
    if not ok:
        raise ConfigError(name, message)


def default_config(**changes: Any) -> NetworkConfig:
    """The reference scenario: S=20, L=10, q=0.5, u=1, E=3, n=10, m=1, v=1."""
    return NetworkConfig(**changes)


def transmission_range(n: int, S: float) -> float:
    """Mean distance to the nearest of ``n - 1`` uniformly placed neighbours.

    Evaluates ``sqrt(S) * Gamma(n) / (2 * Gamma(n + 1/2))`` in log space so that
    large ``n`` does not overflow.
    """
    if n < 1 or S <= 0:
        raise ValueError("need n >= 1 and S > 0")
    return math.sqrt(S) * math.exp(gammaln(n) - gammaln(n + 0.5)) / 2.0


def transmission_range_approx(n: int, S: float) -> float:
    return math.sqrt(S) / (2.0 * math.sqrt(n))


def charge_units(distance: float, profile: ChargingProfile) -> int:
    """Energy units delivered by a station at ``distance``."""
    units = 0
    for k, radius in enumerate(profile.radii, start=1):
        if distance <= radius:
            units = k
        else:
            break
    return units


def relative_distance(distance: float, cfg: NetworkConfig) -> int:
    """Index of the distance annulus: 0 inside the charging range, else
    ``ceil((distance - R1) / v)`` capped at ``M``."""
    R1 = cfg.R1
    if distance <= R1:
        return 0
    if cfg.v <= 0:
        raise ValueError("relative distance is undefined for stationary nodes outside the charging range")
    M = cfg.resolution
    k = math.ceil((distance - R1) / cfg.v)
    return min(max(k, 1), M)


def default_resolution(S: float, R1: float, v: float) -> int:
    """Largest ``M`` with ``R1 + M v`` inside the disc of area ``S``, at least 1."""
    if v <= 0:
        raise ValueError("stationary nodes require explicit M=1 degenerate mode")
    span = (math.sqrt(S / math.pi) - R1) / v
    # absorb rounding when S is constructed from an exact M
    return max(1, int(math.floor(span + 1e-9)))


_INT_FIELDS = {"n", "m", "u", "L", "E", "seed"}
_FLOAT_FIELDS = {"S", "v", "q"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _INT_FIELDS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key == "M":
            if value is None or (isinstance(value, str) and value.lower() in {"", "none", "auto"}):
                return None
            return int(value)
        if key == "radii":
            if isinstance(value, str):
                value = [x for x in value.replace(",", " ").split()]
            return tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {value!r}") from None
    raise ConfigError(key, "unknown configuration key")


def config_from_mapping(data: Mapping[str, Any]) -> NetworkConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("<root>", "configuration must be a key/value mapping")
    kwargs = {key: _coerce(key, value) for key, value in data.items()}
    if "radii" in kwargs and "E" not in kwargs:
        kwargs["E"] = len(kwargs["radii"])
    if "E" in kwargs and "radii" not in kwargs:
        kwargs["radii"] = default_radii(DEFAULT_R1, kwargs["E"])
    return NetworkConfig(**kwargs)


def _merge(data: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    changed = set()
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(item, "override must look like key=value")
        data[key] = value if key == "radii" else yaml.safe_load(value)
        changed.add(key)
    # keep E and radii consistent when only one of them was overridden
    if "E" in changed and "radii" not in changed and "radii" in data:
        r1 = _coerce("radii", data["radii"])[0]
        data["radii"] = list(default_radii(r1, _coerce("E", data["E"])))
    if "radii" in changed and "E" not in changed:
        data["E"] = len(_coerce("radii", data["radii"]))
    return data


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> NetworkConfig:
    """Read a YAML scenario file (missing keys take defaults) and apply
    ``key=value`` overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"malformed YAML: {exc}") from None
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigError("<root>", "configuration must be a key/value mapping")
            data.update(loaded)
    return config_from_mapping(_merge(data, overrides))


def apply_overrides(cfg: NetworkConfig, overrides: Iterable[str]) -> NetworkConfig:
    return config_from_mapping(_merge(cfg.to_dict(), overrides))


def dump_config(cfg: NetworkConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
