"""Per-slot probabilities of the distance / energy chain.

The distance ``D_t`` between a node and one station is taken uniform over the
disc of area ``S`` (density ``2 pi x / S``); a move of length ``v`` in a
uniform direction gives the conditional law of ``D_{t+1}``.  Joint laws of
consecutive relative-distance states follow by quadrature and
inclusion-exclusion, and ``m`` stations are combined by raising the joint
tail probabilities to the ``m``-th power.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.stats import binom

from .config import NetworkConfig, transmission_range

log = logging.getLogger(__name__)

__all__ = [
    "QuadratureError",
    "ResolutionError",
    "TransitionKernel",
    "conditional_step_cdf",
    "joint_cdf",
    "state_boundaries",
    "DistanceGeometry",
    "cell_probability",
    "joint_ccdf",
    "transition_matrix",
    "transmit_probability",
    "charge_probability",
    "charge_probability_printed",
    "build_kernel",
    "stationary_distance",
]

QUAD_TOL = 1e-10
_DENOM_FLOOR = 1e-14
_warned: set = set()


class QuadratureError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


def conditional_step_cdf(x1: float, x2: float, v: float) -> float:
    """``Pr[D_{t+1} <= x2 | D_t = x1]`` after a step of length ``v``."""
    if x2 == math.inf:
        return 1.0
    if x1 <= 0.0:
        return 1.0 if v <= x2 else 0.0
    if v + x2 < x1 or v - x2 > x1:
        return 0.0
    if x2 - v > x1:
        return 1.0
    c = (v * v + x1 * x1 - x2 * x2) / (2.0 * v * x1)
    return math.acos(min(1.0, max(-1.0, c))) / math.pi


def joint_cdf(x1: float, x2: float, v: float, S: float, tol: float = QUAD_TOL) -> float:
    """``Pr[D_t <= x1, D_{t+1} <= x2]`` for one station.

    The region where the step surely stays inside ``x2`` is integrated in
    closed form; the arc region ``[|v - x2|, v + x2]`` goes to adaptive
    quadrature, whose integrand has square-root kinks only at its ends.
    An infinite argument returns the stationary marginal ``pi x^2 / S`` of
    the other one, so both ``D_t`` and ``D_{t+1}`` keep the same law.
    """
    rd = math.sqrt(S / math.pi)
    if x1 == math.inf or x2 == math.inf:
        x = min(x1, x2, rd)
        return math.pi * x * x / S if x > 0 else 0.0
    a = min(x1, rd)
    if a <= 0.0 or x2 <= 0.0:
        return 0.0
    inner = min(a, max(0.0, x2 - v))
    total = math.pi * inner * inner / S
    lo, hi = abs(v - x2), min(a, v + x2)
    # intervals of rounding-error width contribute far below the tolerance
    if hi - lo > 1e-12:
        f = lambda x: conditional_step_cdf(x, x2, v) * 2.0 * math.pi * x / S
        val, err = integrate.quad(f, lo, hi, epsabs=tol * 0.1, epsrel=0.0, limit=200)
        if err > tol:
            raise QuadratureError(f"joint_cdf({x1}, {x2}) reached only {err:.3g} (wanted {tol:.1g})")
        total += val
    return total


def state_boundaries(cfg: NetworkConfig) -> np.ndarray:
    """Lower edges ``b_0 .. b_M`` of the relative-distance states followed by
    ``inf``; state ``k`` is ``(b_k, b_{k+1}]``."""
    M = cfg.resolution
    edges = [0.0] + [cfg.R1 + k * cfg.v for k in range(M)] + [math.inf]
    return np.array(edges)


class DistanceGeometry:
    """Joint CDF table over the state boundaries of one configuration.

    Each integral is evaluated once, in a fixed order, so every cell derived
    from the table is reproducible bit for bit.
    """

    def __init__(self, cfg: NetworkConfig, tol: float = QUAD_TOL):
        if cfg.v <= 0:
            raise ValueError("the analytic kernel needs v > 0")
        self.cfg = cfg
        self.M = cfg.resolution
        self.edges = state_boundaries(cfg)
        k = len(self.edges)
        table = np.empty((k, k))
        for a in range(k):
            for b in range(k):
                table[a, b] = joint_cdf(self.edges[a], self.edges[b], cfg.v, cfg.S, tol)
        self.J = table

    @cached_property
    def alpha(self) -> np.ndarray:
        """``alpha[i, j] = Pr[d_t = i, d_{t+1} = j]`` for one station."""
        J, M = self.J, self.M
        out = np.zeros((M + 1, M + 1))
        for i in range(M + 1):
            for j in range(max(0, i - 1), min(M, i + 1) + 1):
                out[i, j] = J[i + 1, j + 1] - J[i, j + 1] - J[i + 1, j] + J[i, j]
        return out

    @cached_property
    def ccdf(self) -> np.ndarray:
        """``A[a, b] = sum_{i >= a, j >= b} alpha[i, j]``, padded with a zero
        row and column at index ``M + 1``."""
        M = self.M
        out = np.zeros((M + 2, M + 2))
        out[: M + 1, : M + 1] = self.alpha[::-1, ::-1].cumsum(0).cumsum(1)[::-1, ::-1]
        return out


def cell_probability(i: int, j: int, cfg: NetworkConfig) -> float:
    """Single-station probability that consecutive states are ``i`` then ``j``."""
    M = cfg.resolution
    if not (0 <= i <= M and 0 <= j <= M):
        raise IndexError("state out of range")
    if abs(i - j) > 1:
        return 0.0
    e = state_boundaries(cfg)
    x1, x2, x3, x4 = e[i], e[i + 1], e[j], e[j + 1]
    jc = lambda a, b: joint_cdf(a, b, cfg.v, cfg.S)
    return jc(x2, x4) - jc(x1, x4) - jc(x2, x3) + jc(x1, x3)


def joint_ccdf(a: int, b: int, cfg: NetworkConfig) -> float:
    """Single-station ``Pr[d_t >= a, d_{t+1} >= b]``."""
    return float(DistanceGeometry(cfg).ccdf[a, b])


def _annulus_tails(cfg: NetworkConfig) -> np.ndarray:
    """``(1 - pi b_k^2 / S)^m``: probability that every station is beyond edge k."""
    e = state_boundaries(cfg)[:-1]
    return (1.0 - math.pi * e**2 / cfg.S) ** cfg.m


def stationary_distance(cfg: NetworkConfig) -> np.ndarray:
    """Annulus probabilities ``phi_k`` of the distance to the nearest station.

    ``phi_0 = 1 - (1 - rho)^m``; the outermost state takes all the remaining
    mass, so the vector sums to one by telescoping.  With ``m = 0`` every node
    sits in the outermost state.
    """
    tails = _annulus_tails(cfg)
    phi = np.append(tails[:-1] - tails[1:], tails[-1])
    phi[0] = 1.0 - tails[1]
    return phi


def transition_matrix(cfg: NetworkConfig, geometry: DistanceGeometry | None = None) -> np.ndarray:
    """Tridiagonal matrix of ``P_{i,j}`` for the distance to the nearest of
    ``m`` stations."""
    if cfg.m < 1:
        raise ValueError("transition matrix needs at least one station")
    g = geometry if geometry is not None else DistanceGeometry(cfg)
    M, m = g.M, cfg.m
    A = g.ccdf**m
    denom = stationary_distance(cfg)
    if np.any(denom < _DENOM_FLOOR):
        raise ResolutionError("resolution M too large for this geometry")

    P = np.zeros((M + 1, M + 1))
    P[0, 1] = (A[0, 1] - A[1, 1]) / denom[0]
    P[0, 0] = 1.0 - P[0, 1]
    for i in range(1, M):
        stay_or_out = (A[i, i] - A[i + 1, i]) / denom[i]
        P[i, i - 1] = 1.0 - stay_or_out
        P[i, i] = (A[i, i] - A[i + 1, i] - A[i, i + 1] + A[i + 1, i + 1]) / denom[i]
        P[i, i + 1] = (A[i, i + 1] - A[i + 1, i + 1]) / denom[i]
    P[M, M - 1] = (A[M, M - 1] - A[M, M]) / denom[M]
    P[M, M] = A[M, M] / denom[M]

    # cancellation noise around structurally empty moves
    if P.min() < -1e-9 or P.max() > 1 + 1e-9:
        raise ResolutionError(f"transition probabilities out of range [{P.min():.3g}, {P.max():.3g}]")
    return np.clip(P, 0.0, 1.0)


def transmit_probability(n: int, S: float, q: float, r: float | None = None) -> float:
    """Probability that an active node transmits: it is a transmitter and at
    least one of the other ``n - 1`` nodes is a receiver within range ``r``."""
    if r is None:
        r = transmission_range(n, S)
    hit = (1.0 - q) * math.pi * r * r / S
    return q * (1.0 - (1.0 - hit) ** (n - 1))


def _selection_probability(n: int, u: int, rho: float) -> float:
    """Chance that one station picks a given node in its region, the other
    ``n - 1`` nodes being in the region independently with probability rho."""
    l = np.arange(n)
    return float(np.sum(np.minimum(1.0, u / (l + 1.0)) * binom.pmf(l, n - 1, rho)))


def charge_probability(n: int, m: int, u: int, rho: float) -> float:
    """Probability that a node inside at least one charging region is charged.

    Averages ``1 - (1 - s)^i`` over the number ``i >= 1`` of stations covering
    the node, ``s`` being the per-station selection probability.
    """
    if m < 1:
        return 0.0
    s = _selection_probability(n, u, rho)
    i = np.arange(1, m + 1)
    weights = binom.pmf(i, m, rho)
    covered = 1.0 - (1.0 - rho) ** m
    return float(np.sum((1.0 - (1.0 - s) ** i) * weights) / covered)


def charge_probability_printed(n: int, m: int, u: int, R1: float, S: float) -> tuple[float, float]:
    """The two printed closed forms, evaluated literally.

    Returns ``(main, appendix)``; neither agrees with :func:`charge_probability`
    in general (the self-contention term is garbled in both).
    """
    rho = math.pi * R1 * R1 / S
    F = binom.cdf
    covered = 1.0 - (1.0 - rho) ** m
    inner = 1.0 - rho * F(u - 2, n - 1, rho) - (u / n) * (1.0 - F(u - 1, n, rho)) ** n
    main = (1.0 - inner**m) / covered
    A = 1.0 - F(u - 2, n - 1, rho) - u * (1.0 - F(u - 1, n, rho)) / (n * math.pi * R1 * R1)
    appendix = (1.0 - (A * rho + 1.0 - rho) ** m) / covered
    return float(main), float(appendix)


@dataclass(frozen=True)
class TransitionKernel:
    P: np.ndarray
    p_t: float
    p_c: float
    beta: np.ndarray

    @property
    def M(self) -> int:
        return self.P.shape[0] - 1

    @property
    def E(self) -> int:
        return len(self.beta)


def build_kernel(cfg: NetworkConfig, geometry: DistanceGeometry | None = None) -> TransitionKernel:
    """All per-slot probabilities for ``cfg``.

    Without stations (``m = 0``) the distance process is frozen (identity
    matrix) and nothing is ever charged.
    """
    p_t = transmit_probability(cfg.n, cfg.S, cfg.q)
    beta = cfg.profile.beta.copy()
    if cfg.m == 0:
        return TransitionKernel(np.eye(cfg.resolution + 1), p_t, 0.0, beta)
    p_c = charge_probability(cfg.n, cfg.m, cfg.u, cfg.coverage)
    main, appendix = charge_probability_printed(cfg.n, cfg.m, cfg.u, cfg.R1, cfg.S)
    key = (cfg.n, cfg.m, cfg.u, cfg.R1, cfg.S)
    if max(abs(main - p_c), abs(appendix - p_c)) > 1e-9 and key not in _warned:
        _warned.add(key)
        log.warning("printed closed forms for p_c (%.6g, %.6g) differ from the expectation %.6g",
                    main, appendix, p_c)
    return TransitionKernel(transition_matrix(cfg, geometry), p_t, p_c, beta)
