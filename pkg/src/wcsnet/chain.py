"""Energy x distance Markov chain: generator blocks and steady-state solvers.

Level ``e`` is the battery content and the phase is the relative distance
``d``.  Transmission moves one level down at rate ``p_t``; a node at ``d = 0``
is charged ``k`` units at rate ``p_c * beta(k)``, overflow beyond ``L`` being
lost.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import NetworkConfig
from .kernel import TransitionKernel, build_kernel, stationary_distance

log = logging.getLogger(__name__)

__all__ = [
    "ChainModel",
    "SteadyState",
    "SolverError",
    "build_chain",
    "generator",
    "solve_steady_state",
    "solve_dense",
    "solve_qbd_matrix_geometric",
    "active_probability",
    "throughput_from_pon",
    "pon_lower_bound",
    "iid_kernel",
    "analyze",
]

PIVOT_TOL = 1e-14


class SolverError(RuntimeError):
    pass


@dataclass
class ChainModel:
    """Blocks of the generator.

    ``A[0] = p_t I`` (down one level), ``A[1] = B0 - A[0]`` (same level) and
    ``A[k + 1]`` carries ``p_c beta(k)`` at entry ``(0, 0)`` (up ``k`` levels).
    """

    B0: np.ndarray
    A: list[np.ndarray]
    L: int
    p_t: float
    p_c: float
    # level-0 phase law used when nothing is ever charged
    idle_phase: np.ndarray | None = field(default=None, repr=False)

    @property
    def E(self) -> int:
        return len(self.A) - 2

    @property
    def phases(self) -> int:
        return self.B0.shape[0]

    @property
    def size(self) -> int:
        return (self.L + 1) * self.phases

    def up(self, k: int) -> np.ndarray:
        return self.A[k + 1]

    def level_blocks(self, level: int) -> dict[int, np.ndarray]:
        """Nonzero blocks of one block row, keyed by target level.

        Charges that would overflow the battery are folded into level ``L``.
        """
        L = self.L
        row: dict[int, np.ndarray] = {}
        if level == 0:
            row[0] = self.B0.copy()
        else:
            row[level - 1] = self.A[0].copy()
            row[level] = self.A[1].copy()
        for k in range(1, self.E + 1):
            t = min(level + k, L)
            row[t] = row[t] + self.up(k) if t in row else self.up(k).copy()
        return row

    def check(self, tol: float = 1e-12) -> None:
        up = sum(self.A[2:], np.zeros_like(self.B0))
        if np.abs((self.B0 + up).sum(1)).max() > tol:
            raise SolverError("level-0 block rows do not sum to zero")
        if np.abs((self.A[0] + self.A[1] + up).sum(1)).max() > tol:
            raise SolverError("interior block rows do not sum to zero")


def build_chain(kernel: TransitionKernel, cfg: NetworkConfig) -> ChainModel:
    """Generator blocks for any ``E``, one recharge block per batch size."""
    P = np.asarray(kernel.P, dtype=float)
    n = P.shape[0]
    B0 = P.copy()
    np.fill_diagonal(B0, 0.0)
    B0 -= np.diag(B0.sum(1))
    B0[0, 0] -= kernel.p_c
    A0 = kernel.p_t * np.eye(n)
    blocks = [A0, B0 - A0]
    for b in kernel.beta:
        Ak = np.zeros((n, n))
        Ak[0, 0] = kernel.p_c * b
        blocks.append(Ak)
    model = ChainModel(B0, blocks, cfg.L, kernel.p_t, kernel.p_c, stationary_distance(cfg))
    model.check()
    return model


def generator(model: ChainModel) -> np.ndarray:
    """Dense ``(L+1)(M+1)`` square generator."""
    n = model.phases
    Q = np.zeros((model.size, model.size))
    for i in range(model.L + 1):
        for j, blk in model.level_blocks(i).items():
            Q[i * n:(i + 1) * n, j * n:(j + 1) * n] += blk
    return Q


def apply_generator(model: ChainModel, pi: np.ndarray) -> np.ndarray:
    """``pi Q`` evaluated block by block."""
    n = model.phases
    x = np.asarray(pi).reshape(model.L + 1, n)
    out = np.zeros_like(x)
    for i in range(model.L + 1):
        for j, blk in model.level_blocks(i).items():
            out[j] += x[i] @ blk
    return out.ravel()


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    L: int
    q: float
    residual: float

    @property
    def levels(self) -> np.ndarray:
        """``pi`` as an ``(L+1, M+1)`` array; row ``e`` is the energy level."""
        return self.pi.reshape(self.L + 1, -1)

    @property
    def P_on(self) -> float:
        return active_probability(self)

    @property
    def Lambda(self) -> float:
        return throughput_from_pon(self.P_on, self.q)


def _finish(model: ChainModel, pi: np.ndarray, q: float) -> SteadyState:
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    if pi.min() < -1e-10:
        raise SolverError(f"negative steady-state mass {pi.min():.3g}")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    res = float(np.abs(apply_generator(model, pi)).max())
    return SteadyState(pi, model.L, q, res)


def _lu(block: np.ndarray):
    lu, piv = linalg.lu_factor(block, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() < PIVOT_TOL * max(1.0, d.max()):
        raise SolverError("singular block met during elimination")
    return lu, piv


def _null_vector(Q: np.ndarray) -> np.ndarray:
    """Left null vector of a generator, normalised to sum 1."""
    n = Q.shape[0]
    a = Q.T.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    lu, piv = linalg.lu_factor(a, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() < PIVOT_TOL * max(1.0, d.max()):
        raise SolverError("reduced system is singular beyond rank one (reducible chain)")
    return linalg.lu_solve((lu, piv), rhs)


def _idle_solution(model: ChainModel) -> np.ndarray:
    """Without charging every node drains to level 0 and keeps its phase law."""
    n = model.phases
    pi = np.zeros(model.size)
    phase = model.idle_phase if model.idle_phase is not None else np.full(n, 1.0 / n)
    pi[:n] = phase
    return pi


def solve_steady_state(model: ChainModel, q: float = 0.5) -> SteadyState:
    """Solve ``pi Q = 0, pi 1 = 1`` by eliminating one level at a time.

    Levels are removed bottom-up; each step replaces the remaining chain by
    its censored generator, which keeps the block band (one level down, ``E``
    up).  Charging makes every pivot block a strictly leaking sub-generator.
    Cost is linear in ``L``.  Without charging all mass drains to level 0,
    where it keeps the stationary distance law.
    """
    L = model.L
    if model.p_c <= 0.0:
        return _finish(model, _idle_solution(model), q)
    rows = {i: model.level_blocks(i) for i in range(L + 1)}
    history = []
    for k in range(L):
        row_k = rows.pop(k)
        lu = _lu(row_k[k])
        factors = {}
        # only levels just above k can hold a block pointing down to k
        for j in range(k + 1, min(L, k + model.E + 1) + 1):
            row_j = rows[j]
            if k not in row_j:
                continue
            X = linalg.lu_solve(lu, row_j.pop(k).T, trans=1, check_finite=False).T
            factors[j] = X
            for t, blk in row_k.items():
                if t == k:
                    continue
                update = X @ blk
                row_j[t] = row_j[t] - update if t in row_j else -update
        history.append((k, factors))
    (last,) = rows
    x = {last: _null_vector(rows[last][last])}
    for k, factors in reversed(history):
        x[k] = -sum(x[j] @ X for j, X in factors.items())
    pi = np.concatenate([x[i] for i in range(L + 1)])
    return _finish(model, pi, q)


def solve_dense(model: ChainModel, q: float = 0.5) -> SteadyState:
    """Reference solver: null space of the dense ``Q^T``."""
    ns = linalg.null_space(generator(model).T)
    if ns.shape[1] != 1:
        raise SolverError(f"generator has a {ns.shape[1]}-dimensional null space")
    pi = ns[:, 0]
    return _finish(model, pi / pi.sum(), q)


def _spectral_radius(X: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(X)).max())


def solve_qbd_matrix_geometric(model: ChainModel, q: float = 0.5, tol: float = 1e-12,
                               max_iter: int = 10_000) -> SteadyState:
    """Two-boundary matrix-geometric solution for single-unit charging.

    ``pi_k = v1 R1^k + v2 R2^(L-k)``.  ``R1 = -A2 (A1 + eta A0)^-1`` with
    ``eta`` its own spectral radius (fixed point), and ``R2 = -A0 (A1 + A0 G)^-1``
    with ``G`` the matrix of ones in its first column.  ``(v1, v2)`` solve the
    two boundary equations with one column swapped for normalisation.
    """
    if model.E != 1:
        raise ValueError("matrix-geometric form needs E = 1")
    A0, A1, A2 = model.A
    B0, L, n = model.B0, model.L, model.phases

    eta = 0.0
    for _ in range(max_iter):
        R1 = -A2 @ np.linalg.inv(A1 + eta * A0)
        new = _spectral_radius(R1)
        if abs(new - eta) < tol:
            eta = new
            break
        eta = new
    else:
        raise SolverError("eta iteration did not converge")
    R1 = -A2 @ np.linalg.inv(A1 + eta * A0)
    G = np.zeros((n, n))
    G[:, 0] = 1.0
    R2 = -A0 @ np.linalg.inv(A1 + A0 @ G)

    mp = np.linalg.matrix_power
    top = np.hstack([B0 + R1 @ A0, mp(R1, L - 1) @ (A2 + R1 @ (A1 + A2))])
    bottom = np.hstack([mp(R2, L - 1) @ (R2 @ B0 + A0), A1 + A2 + R2 @ A2])
    system = np.vstack([top, bottom])
    ones = np.ones(n)
    s1 = sum(mp(R1, i) for i in range(L + 1)) @ ones
    s2 = sum(mp(R2, L - i) for i in range(L + 1)) @ ones
    system[:, -1] = np.concatenate([s1, s2])
    rhs = np.zeros(2 * n)
    rhs[-1] = 1.0
    sol = np.linalg.solve(system.T, rhs)
    v1, v2 = sol[:n], sol[n:]
    pi = np.concatenate([v1 @ mp(R1, k) + v2 @ mp(R2, L - k) for k in range(L + 1)])
    return _finish(model, pi, q)


def active_probability(ss: SteadyState) -> float:
    """Probability of holding at least one energy unit."""
    return float(1.0 - ss.levels[0].sum())


def throughput_from_pon(P_on: float, q: float) -> float:
    """Per-node throughput of two-phase routing with a fraction ``P_on`` of
    active nodes."""
    c = math.pi / 4.0
    return 0.5 * q * P_on * math.exp(-c * q * P_on) * (1.0 - math.exp(c * (q - 1.0)))


def pon_lower_bound(kernel: TransitionKernel, cfg: NetworkConfig) -> float:
    """``min(1, (p_c / p_t) (1 - (1 - rho)^m))``; zero without stations."""
    if cfg.m == 0 or kernel.p_c == 0.0:
        return 0.0
    if kernel.p_t == 0.0:
        return 1.0
    covered = 1.0 - (1.0 - cfg.coverage) ** cfg.m
    return min(1.0, kernel.p_c / kernel.p_t * covered)


def iid_kernel(kernel: TransitionKernel, cfg: NetworkConfig) -> TransitionKernel:
    """Memoryless relocation: every row of the distance matrix is the
    stationary distance law."""
    phi = stationary_distance(cfg)
    P = np.tile(phi, (len(phi), 1))
    return TransitionKernel(P, kernel.p_t, kernel.p_c, kernel.beta)


def analyze(cfg: NetworkConfig, iid: bool = False) -> tuple[TransitionKernel, ChainModel, SteadyState]:
    kernel = build_kernel(cfg)
    if iid:
        kernel = iid_kernel(kernel, cfg)
    model = build_chain(kernel, cfg)
    return kernel, model, solve_steady_state(model, cfg.q)
