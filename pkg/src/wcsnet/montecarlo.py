"""Slotted simulation of mobile nodes, charging stations and two-phase routing.

Nodes live on a torus of side ``sqrt(S)``.  Every slot, in this order:

1. each node moves exactly ``v`` in a fresh uniform direction;
2. its relative-distance state (nearest station) is recorded;
3. activity (battery >= 1) is sampled, which is the quantity the chain
   calls ``P_on``;
4. each station picks ``min(u, k)`` of the ``k`` nodes in its region; a node
   picked by several stations is charged by the nearest one only;
5. every node becomes a transmitter with probability ``q``; an active
   transmitter with a receiver within ``r`` sends one packet and spends one
   unit.  Odd slots hand the own packet to a random receiver in range (a
   relay, unless it is the destination); even slots deliver a relayed packet
   to its destination if it is in range.

There is no interference model: receptions always succeed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .config import NetworkConfig, transmission_range

__all__ = ["World", "SimStats", "EmpiricalKernel", "run", "empirical_kernel", "default_warmup"]

# per-batch tallies
ACTIVE, IN_REGION, SELECTED, OPPORTUNITY, ACTIVE_TX, SENT, DELIVERED, OFFERED, ACCEPTED, NODE_SLOTS = range(10)
N_TALLY = 10
N_BATCHES = 50
MIN_ROW_VISITS = 1000


@njit(cache=True)
def _torus_dist(ax, ay, bx, by, side):
    dx = abs(ax - bx)
    dy = abs(ay - by)
    if dx > 0.5 * side:
        dx = side - dx
    if dy > 0.5 * side:
        dy = side - dy
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _advance(rng, pos, wcs, energy, held, dest, dprev, last_in, clock,
             side, v, q, u, L, radii, r, M,
             nslots, collect, batch_len, stride,
             counts, tallies, series, delivered, imt, n_imt):
    """Advance the world by ``nslots`` slots; tallies are updated only when
    ``collect`` is true.  ``clock[0]`` is the absolute slot counter and
    ``clock[1]`` the number of collected slots so far."""
    n = pos.shape[0]
    m = wcs.shape[0]
    R1 = radii[0]
    E = radii.shape[0]
    dist = np.empty(n)
    picked = np.empty(n)
    cand = np.empty(n, np.int64)
    mode = np.empty(n, np.bool_)
    elig = np.empty(n, np.int64)
    for _ in range(nslots):
        t = clock[0]
        c = clock[1]
        b = min(c // batch_len, tallies.shape[0] - 1)
        odd = t % 2 == 0  # slot 1 is the first slot

        for i in range(n):
            th = 2.0 * math.pi * rng.random()
            pos[i, 0] = (pos[i, 0] + v * math.cos(th)) % side
            pos[i, 1] = (pos[i, 1] + v * math.sin(th)) % side

        for i in range(n):
            best = np.inf
            for j in range(m):
                dd = _torus_dist(pos[i, 0], pos[i, 1], wcs[j, 0], wcs[j, 1], side)
                if dd < best:
                    best = dd
            dist[i] = best
            if best <= R1:
                d = 0
            elif v <= 0.0:
                d = M
            else:
                d = min(max(int(math.ceil((best - R1) / v)), 1), M)
            if collect:
                if dprev[i] >= 0:
                    counts[dprev[i], d] += 1
                if d == 0:
                    if last_in[i] >= 0 and t - last_in[i] > 1 and n_imt[0] < imt.shape[0]:
                        imt[n_imt[0]] = t - last_in[i]
                        n_imt[0] += 1
            if d == 0:
                last_in[i] = t
            dprev[i] = d if collect else -1

        if collect:
            act = 0
            for i in range(n):
                if energy[i] >= 1:
                    act += 1
            tallies[b, ACTIVE] += act
            tallies[b, NODE_SLOTS] += n
            if c % stride == 0:
                series[c // stride] = act / n

        # charging
        for i in range(n):
            picked[i] = np.inf
        for j in range(m):
            k = 0
            for i in range(n):
                if _torus_dist(pos[i, 0], pos[i, 1], wcs[j, 0], wcs[j, 1], side) <= R1:
                    cand[k] = i
                    k += 1
            for a in range(min(u, k)):
                s = a + int(rng.random() * (k - a))
                tmp = cand[a]
                cand[a] = cand[s]
                cand[s] = tmp
                i = cand[a]
                dd = _torus_dist(pos[i, 0], pos[i, 1], wcs[j, 0], wcs[j, 1], side)
                if dd < picked[i]:
                    picked[i] = dd
        for i in range(n):
            if dist[i] > R1:
                continue
            if collect:
                tallies[b, IN_REGION] += 1
            if picked[i] < np.inf:
                units = 0
                for kk in range(E):
                    if picked[i] <= radii[kk]:
                        units = kk + 1
                new = min(L, energy[i] + units)
                if collect:
                    tallies[b, SELECTED] += 1
                    tallies[b, OFFERED] += units
                    tallies[b, ACCEPTED] += new - energy[i]
                energy[i] = new

        # transmission
        for i in range(n):
            mode[i] = rng.random() < q
        for i in range(n):
            if collect and energy[i] >= 1:
                tallies[b, ACTIVE_TX] += 1
            if not mode[i]:
                continue
            k = 0
            for j in range(n):
                if j != i and not mode[j]:
                    if _torus_dist(pos[i, 0], pos[i, 1], pos[j, 0], pos[j, 1], side) <= r:
                        cand[k] = j
                        k += 1
            if k == 0:
                continue
            if collect:
                tallies[b, OPPORTUNITY] += 1
            if energy[i] < 1:
                continue
            energy[i] -= 1
            if collect:
                tallies[b, SENT] += 1
            if odd:
                j = cand[int(rng.random() * k)]
                if j == dest[i]:
                    if collect:
                        delivered[i] += 1
                        tallies[b, DELIVERED] += 1
                else:
                    held[j, i] += 1
            else:
                ne = 0
                for a in range(k):
                    j = cand[a]
                    for src in range(n):
                        if held[i, src] > 0 and dest[src] == j:
                            elig[ne] = src
                            ne += 1
                            break
                if ne > 0:
                    src = elig[int(rng.random() * ne)]
                    held[i, src] -= 1
                    if collect:
                        delivered[src] += 1
                        tallies[b, DELIVERED] += 1

        clock[0] += 1
        if collect:
            clock[1] += 1


@dataclass
class World:
    """Mutable simulation state; ``step`` advances one slot."""

    cfg: NetworkConfig
    rng: np.random.Generator
    pos: np.ndarray
    wcs: np.ndarray
    energy: np.ndarray
    held: np.ndarray
    dest: np.ndarray
    dprev: np.ndarray
    last_in: np.ndarray
    clock: np.ndarray = field(default_factory=lambda: np.zeros(2, np.int64))

    @classmethod
    def create(cls, cfg: NetworkConfig, seed: int | None = None) -> "World":
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        n, m, side = cfg.n, cfg.m, cfg.side
        pos = rng.random((n, 2)) * side
        wcs = rng.random((m, 2)) * side
        energy = rng.integers(0, cfg.L + 1, size=n).astype(np.int64)
        if n > 1:
            dest = (np.arange(n) + 1 + rng.integers(0, n - 1, size=n)) % n
        else:
            dest = np.zeros(n, np.int64)
        return cls(cfg, rng, pos, wcs, energy, np.zeros((n, n), np.int64), dest.astype(np.int64),
                   np.full(n, -1, np.int64), np.full(n, -1, np.int64))

    @property
    def slot(self) -> int:
        return int(self.clock[0])

    @property
    def odd_phase(self) -> bool:
        """Whether the next slot is a source-to-relay slot."""
        return self.slot % 2 == 0

    def _resolution(self) -> int:
        return self.cfg.resolution if self.cfg.v > 0 else 1

    def advance(self, nslots: int, collect: bool = False, batch_len: int = 1, stride: int = 1,
                buffers: dict | None = None) -> None:
        cfg = self.cfg
        M = self._resolution()
        if buffers is None:
            buffers = _buffers(M, self.cfg.n, 1, 1, 0)
        _advance(self.rng, self.pos, self.wcs, self.energy, self.held, self.dest, self.dprev,
                 self.last_in, self.clock, cfg.side, cfg.v, cfg.q, cfg.u, cfg.L,
                 np.asarray(cfg.radii, dtype=float), transmission_range(cfg.n, cfg.S), M,
                 nslots, collect, batch_len, stride, buffers["counts"], buffers["tallies"],
                 buffers["series"], buffers["delivered"], buffers["imt"], buffers["n_imt"])

    def step(self) -> "World":
        self.advance(1)
        return self


def _buffers(M: int, n: int, slots: int, stride: int, max_samples: int) -> dict:
    return {
        "counts": np.zeros((M + 1, M + 1), np.int64),
        "tallies": np.zeros((N_BATCHES, N_TALLY), np.int64),
        "series": np.zeros(-(-slots // stride)),
        "delivered": np.zeros(n, np.int64),
        "imt": np.zeros(max_samples, np.int64),
        "n_imt": np.zeros(1, np.int64),
    }


def _ratio(tallies: np.ndarray, num: int, den: int) -> tuple[float, float]:
    """Pooled ratio and its batch-means standard error."""
    tot = tallies[:, den].sum()
    if tot == 0:
        return float("nan"), float("nan")
    est = tallies[:, num].sum() / tot
    ok = tallies[:, den] > 0
    if ok.sum() < 2:
        return float(est), float("nan")
    per = tallies[ok, num] / tallies[ok, den]
    return float(est), float(per.std(ddof=1) / math.sqrt(ok.sum()))


@dataclass(frozen=True)
class SimStats:
    slots: int
    warmup: int
    seed: int
    n: int
    active_series: np.ndarray = field(repr=False)
    stride: int
    P_on: float
    P_on_se: float
    intermeeting: np.ndarray = field(repr=False)
    transition_counts: np.ndarray = field(repr=False)
    p_c: float
    p_c_se: float
    p_t: float
    p_t_se: float
    p_t_active: float
    p_t_active_se: float
    delivered: np.ndarray = field(repr=False)
    Lambda: float
    Lambda_se: float
    energy_offered: float
    energy_accepted: float
    tallies: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        it = self.intermeeting
        return {
            "slots": self.slots, "warmup": self.warmup, "seed": self.seed,
            "P_on": self.P_on, "P_on_se": self.P_on_se,
            "p_c": self.p_c, "p_c_se": self.p_c_se,
            "p_t": self.p_t, "p_t_se": self.p_t_se,
            "p_t_active": self.p_t_active, "p_t_active_se": self.p_t_active_se,
            "Lambda": self.Lambda, "Lambda_se": self.Lambda_se,
            "energy_offered": self.energy_offered, "energy_accepted": self.energy_accepted,
            "intermeeting_samples": int(it.size),
            "intermeeting_mean": float(it.mean()) if it.size else float("nan"),
        }


def default_warmup(cfg: NetworkConfig) -> int:
    """Ten mean inter-meeting times, and never fewer than 1000 slots."""
    if cfg.v <= 0 or cfg.m == 0:
        return 1000
    from .intermeeting import inner_kernel, mean_intermeeting, spectral_decomposition
    from .kernel import build_kernel

    s = spectral_decomposition(inner_kernel(build_kernel(cfg)))
    return max(1000, int(math.ceil(10 * mean_intermeeting(s)[1])))


def run(cfg: NetworkConfig, slots: int, warmup: int | None = None, seed: int | None = None,
        stride: int = 100, max_samples: int = 1_000_000) -> SimStats:
    """Simulate ``warmup`` unrecorded slots followed by ``slots`` recorded ones."""
    if slots < N_BATCHES:
        raise ValueError(f"need at least {N_BATCHES} recorded slots")
    if warmup is None:
        warmup = default_warmup(cfg)
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    seed = cfg.seed if seed is None else seed
    world = World.create(cfg, seed)
    world.advance(warmup)
    buf = _buffers(world._resolution(), cfg.n, slots, stride, max_samples)
    world.advance(slots, True, slots // N_BATCHES, stride, buf)

    tl = buf["tallies"]
    p_on, p_on_se = _ratio(tl, ACTIVE, NODE_SLOTS)
    p_c, p_c_se = _ratio(tl, SELECTED, IN_REGION)
    p_t, p_t_se = _ratio(tl, OPPORTUNITY, NODE_SLOTS)
    p_ta, p_ta_se = _ratio(tl, SENT, ACTIVE_TX)
    lam, lam_se = _ratio(tl, DELIVERED, NODE_SLOTS)
    node_slots = tl[:, NODE_SLOTS].sum()
    return SimStats(
        slots=slots, warmup=warmup, seed=seed, n=cfg.n,
        active_series=buf["series"], stride=stride, P_on=p_on, P_on_se=p_on_se,
        intermeeting=buf["imt"][: buf["n_imt"][0]].copy(),
        transition_counts=buf["counts"], p_c=p_c, p_c_se=p_c_se, p_t=p_t, p_t_se=p_t_se,
        p_t_active=p_ta, p_t_active_se=p_ta_se, delivered=buf["delivered"],
        Lambda=lam, Lambda_se=lam_se,
        energy_offered=tl[:, OFFERED].sum() / node_slots,
        energy_accepted=tl[:, ACCEPTED].sum() / node_slots,
        tallies=tl,
    )


@dataclass(frozen=True)
class EmpiricalKernel:
    P: np.ndarray
    visits: np.ndarray
    undersampled: np.ndarray
    p_t: float
    p_t_se: float
    p_c: float
    p_c_se: float


def empirical_kernel(stats: SimStats) -> EmpiricalKernel:
    """Row-normalised transition frequencies; rows seen fewer than 1000
    times are flagged and left as NaN."""
    counts = stats.transition_counts.astype(float)
    visits = counts.sum(axis=1)
    under = visits < MIN_ROW_VISITS
    with np.errstate(invalid="ignore", divide="ignore"):
        P = counts / visits[:, None]
    P[under] = np.nan
    return EmpiricalKernel(P, visits.astype(np.int64), under, stats.p_t, stats.p_t_se,
                           stats.p_c, stats.p_c_se)
