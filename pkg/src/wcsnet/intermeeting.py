"""Inter-meeting time of a node and the charging regions.

After leaving the charging region a node sits in annulus 1; the time until
it re-enters is governed by the distance matrix restricted to states
``1..M``, a sub-stochastic tridiagonal matrix.  ``T_I`` counts the slots from
the first slot outside the region up to and including the return slot, so
``Pr[T_I > t] = p0 P^(t-1) 1``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import NetworkConfig
from .kernel import TransitionKernel, build_kernel

log = logging.getLogger(__name__)

__all__ = [
    "SpectralSummary",
    "SpeedTable",
    "inner_kernel",
    "first_annulus",
    "ccdf_exact",
    "ccdf_series",
    "spectral_decomposition",
    "spectral_ccdf",
    "one_term_tail",
    "mean_intermeeting",
    "spectral_radius_vs_speed",
    "ks_distance",
]

EIG_GAP = 1e-12
TAIL_CUTOFF = 1e-12


def inner_kernel(kernel: TransitionKernel | np.ndarray) -> np.ndarray:
    """Distance matrix restricted to the states outside the charging region."""
    P = kernel.P if isinstance(kernel, TransitionKernel) else np.asarray(kernel)
    if P.shape[0] < 2:
        raise ValueError("need at least one state outside the charging region")
    return P[1:, 1:].copy()


def first_annulus(M: int) -> np.ndarray:
    p0 = np.zeros(M)
    p0[0] = 1.0
    return p0


def ccdf_series(P: np.ndarray, p0: np.ndarray, tmax: int) -> np.ndarray:
    """``Pr[T_I > t]`` for ``t = 1..tmax`` by repeated vector-matrix products."""
    out = np.empty(tmax)
    x = np.asarray(p0, dtype=float).copy()
    for i in range(tmax):
        out[i] = x.sum()
        x = x @ P
    return out


def ccdf_exact(P: np.ndarray, p0: np.ndarray, t: int) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    return float(ccdf_series(P, p0, t)[-1])


@dataclass(frozen=True)
class SpectralSummary:
    """Eigen-expansion ``Pr[T_I > t] = sum_i gamma_i lambda_i^(t-1)``.

    ``right[:, i]`` and ``left[i]`` are bi-orthonormal eigenvectors.  When
    two eigenvalues coincide the expansion is flagged ``degenerate`` and
    CCDF queries fall back to matrix products.
    """

    eigenvalues: np.ndarray
    gamma: np.ndarray
    p0: np.ndarray
    P: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    degenerate: bool = False

    @property
    def spectral_radius(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def mean_T_I(self) -> float:
        return 1.0 / (1.0 - self.spectral_radius)


def _symmetric_eigs(P: np.ndarray):
    diag = np.diag(P)
    up, lo = np.diag(P, 1), np.diag(P, -1)
    # D P D^-1 is symmetric for d_{i+1} / d_i = sqrt(up_i / lo_i)
    logd = np.concatenate([[0.0], np.cumsum(0.5 * (np.log(up) - np.log(lo)))])
    logd -= logd.mean()
    d = np.exp(logd)
    w, W = linalg.eigh_tridiagonal(diag, np.sqrt(up * lo))
    right = W / d[:, None]
    left = (W * d[:, None]).T
    return w, right, left


def _general_eigs(P: np.ndarray):
    w, V = linalg.eig(P)
    w = w.real
    V = V.real
    return w, V, np.linalg.inv(V)


def spectral_decomposition(P: np.ndarray, p0: np.ndarray | None = None) -> SpectralSummary:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    M = P.shape[0]
    if p0 is None:
        p0 = first_annulus(M)
    if M == 1:
        w, right, left = P[0], np.ones((1, 1)), np.ones((1, 1))
    elif np.all(np.diag(P, 1) > 0) and np.all(np.diag(P, -1) > 0):
        w, right, left = _symmetric_eigs(P)
    else:
        warnings.warn("distance strip is not irreducible; using a general eigensolver",
                      RuntimeWarning, stacklevel=2)
        w, right, left = _general_eigs(P)
    order = np.argsort(w)[::-1]
    w, right, left = w[order], right[:, order], left[order]
    gamma = (p0 @ right) * left.sum(axis=1)
    degenerate = bool(M > 1 and np.min(-np.diff(w)) < EIG_GAP)
    return SpectralSummary(w, gamma, np.asarray(p0, dtype=float), P, right, left, degenerate)


def spectral_ccdf(s: SpectralSummary, t) -> np.ndarray:
    """Eigen-expansion of ``Pr[T_I > t]`` for integer ``t >= 1`` (scalar or array)."""
    t = np.atleast_1d(np.asarray(t))
    if s.degenerate:
        series = ccdf_series(s.P, s.p0, int(t.max()))
        return series[t - 1]
    return (s.gamma[None, :] * s.eigenvalues[None, :] ** (t[:, None] - 1)).sum(axis=1)


def one_term_tail(s: SpectralSummary, t) -> np.ndarray:
    """Largest-eigenvalue approximation ``lambda_1^t``."""
    return s.spectral_radius ** np.asarray(t, dtype=float)


def mean_intermeeting(s: SpectralSummary, max_terms: int = 10_000_000) -> tuple[float, float]:
    """``(1 / (1 - lambda_1), E[T_I])``; the exact mean sums the CCDF until
    the tail falls below 1e-12."""
    lam1 = s.spectral_radius
    if lam1 >= 1.0:
        raise ValueError("spectral radius must be below 1")
    total = 1.0
    x = s.p0.copy()
    for _ in range(max_terms):
        tail = x.sum()
        if tail < TAIL_CUTOFF:
            break
        total += tail
        x = x @ s.P
    else:
        log.warning("inter-meeting mean truncated at %d terms", max_terms)
    return 1.0 / (1.0 - lam1), total


@dataclass(frozen=True)
class SpeedTable:
    speeds: np.ndarray
    resolution: np.ndarray
    spectral_radius: np.ndarray

    @property
    def non_increasing(self) -> bool:
        return bool(np.all(np.diff(self.spectral_radius) <= 1e-12))


def spectral_radius_vs_speed(cfg: NetworkConfig, speeds) -> SpeedTable:
    speeds = np.asarray(speeds, dtype=float)
    if np.any(speeds <= 0) or np.any(np.diff(speeds) <= 0):
        raise ValueError("speeds must be positive and strictly increasing")
    Ms, lams = [], []
    for v in speeds:
        c = cfg.replace(v=float(v), M=None)
        s = spectral_decomposition(inner_kernel(build_kernel(c)))
        Ms.append(c.resolution)
        lams.append(s.spectral_radius)
    table = SpeedTable(speeds, np.array(Ms), np.array(lams))
    if not table.non_increasing:
        log.warning("spectral radius increases somewhere on the speed grid: %s", lams)
    return table


def ks_distance(samples: np.ndarray, P: np.ndarray, p0: np.ndarray | None = None) -> float:
    """Kolmogorov-Smirnov distance between integer samples of ``T_I`` and the
    exact law.  Both CDFs are step functions on the integers, so comparing
    them at every integer up to the largest sample is exact."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("no samples")
    if p0 is None:
        p0 = first_annulus(P.shape[0])
    tmax = int(samples.max())
    model = 1.0 - ccdf_series(P, p0, tmax)
    emp = np.cumsum(np.bincount(samples, minlength=tmax + 1)[1:]) / samples.size
    return float(np.abs(emp - model).max())
