"""Closed-form limits of the throughput: infinite battery and large networks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import throughput_from_pon
from .config import NetworkConfig
from .kernel import TransitionKernel, build_kernel, stationary_distance

__all__ = [
    "DistanceStationaryVector",
    "ScalingBounds",
    "distance_stationary_vector",
    "mean_arrival_rate",
    "infinite_battery_pon",
    "infinite_battery_throughput",
    "scaling_bounds",
]


@dataclass(frozen=True)
class DistanceStationaryVector:
    phi: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.phi if dtype is None else self.phi.astype(dtype)

    def __getitem__(self, k):
        return self.phi[k]

    def __len__(self):
        return len(self.phi)


def distance_stationary_vector(cfg: NetworkConfig) -> DistanceStationaryVector:
    return DistanceStationaryVector(stationary_distance(cfg))


def mean_arrival_rate(cfg: NetworkConfig, kernel: TransitionKernel | None = None) -> float:
    """Long-run energy inflow per slot, ``p_c phi_0 sum_k k beta(k)``."""
    if cfg.m == 0:
        return 0.0
    if kernel is None:
        kernel = build_kernel(cfg)
    phi0 = stationary_distance(cfg)[0]
    units = float(np.dot(np.arange(1, len(kernel.beta) + 1), kernel.beta))
    return kernel.p_c * phi0 * units


def infinite_battery_pon(cfg: NetworkConfig, kernel: TransitionKernel | None = None) -> float:
    """Active probability with unlimited storage: the battery empties only
    when energy arrives slower than it is spent."""
    if kernel is None:
        kernel = build_kernel(cfg)
    lam = mean_arrival_rate(cfg, kernel)
    if kernel.p_t <= 0.0:
        return 1.0 if lam > 0 else 0.0
    return min(1.0, lam / kernel.p_t)


def infinite_battery_throughput(cfg: NetworkConfig, kernel: TransitionKernel | None = None) -> float:
    return throughput_from_pon(infinite_battery_pon(cfg, kernel), cfg.q)


@dataclass(frozen=True)
class ScalingBounds:
    """Evaluable bounds ``1/2 q x c^x (1 - e^{(pi/4)(q-1)})`` on the throughput.

    ``x`` is the large-network active probability ``ratio * u / (q a)``
    (clamped to 1), scaled by the mean batch size for the upper bound.
    """

    a: float
    c1: float
    c2: float
    ratio: float
    x_lower: float
    x_upper: float
    lower: float
    upper: float


def scaling_bounds(cfg: NetworkConfig) -> ScalingBounds:
    if cfg.n < 1 or cfg.m < 1:
        raise ValueError("scaling bounds need n >= 1 and m >= 1")
    q, u = cfg.q, cfg.u
    a = 1.0 - math.exp(-math.pi / 4.0 * (1.0 - q))
    units = cfg.profile.mean_units
    c1 = math.exp(-math.pi * u / (4.0 * a) * units)
    c2 = math.exp(-math.pi * u / (4.0 * a))
    ratio = min(1.0, cfg.m / cfg.n)
    x = ratio * u / (q * a)
    x_lo, x_up = min(1.0, x), min(1.0, x * units)
    return ScalingBounds(a, c1, c2, ratio, x_lo, x_up,
                         throughput_from_pon(x_lo, q), throughput_from_pon(x_up, q))
