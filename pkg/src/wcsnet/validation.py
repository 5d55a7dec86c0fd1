"""Side-by-side comparison of the analytic model and the simulator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import analyze
from .config import NetworkConfig
from .intermeeting import inner_kernel, ks_distance
from .montecarlo import SimStats, empirical_kernel, run

__all__ = ["DEFAULT_TOLERANCES", "Check", "compare", "validate"]

DEFAULT_TOLERANCES = {
    "tv": 0.02,       # per-row total variation of the distance matrix
    "p_t": 3.0,       # standard errors
    "p_c": 3.0,       # standard errors
    "P_on": 0.01,     # absolute
    "ks": 0.02,       # inter-meeting CDF distance
}


@dataclass(frozen=True)
class Check:
    name: str
    analytic: float
    empirical: float
    statistic: float
    tolerance: float
    passed: bool

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def compare(cfg: NetworkConfig, stats: SimStats, tolerances: dict | None = None) -> list[Check]:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    kernel, _, ss = analyze(cfg)
    emp = empirical_kernel(stats)
    checks = []

    rows = ~emp.undersampled
    tv = 0.5 * np.abs(kernel.P[rows] - emp.P[rows]).sum(axis=1)
    worst = float(tv.max()) if tv.size else float("nan")
    checks.append(Check("P_row_tv", 0.0, worst, worst, tol["tv"], bool(tv.size and worst < tol["tv"])))

    for name, a, e, se in (("p_t", kernel.p_t, stats.p_t, stats.p_t_se),
                           ("p_c", kernel.p_c, stats.p_c, stats.p_c_se)):
        z = abs(a - e) / se if se > 0 else float("inf")
        checks.append(Check(name, a, e, z, tol[name], bool(z <= tol[name])))

    gap = abs(ss.P_on - stats.P_on)
    checks.append(Check("P_on", ss.P_on, stats.P_on, gap, tol["P_on"], bool(gap < tol["P_on"])))

    if stats.intermeeting.size and kernel.M >= 1:
        P = inner_kernel(kernel)
        ks = ks_distance(stats.intermeeting, P)
        emp_mean = float(stats.intermeeting.mean())
        ana_mean = float(1.0 + np.linalg.solve(np.eye(len(P)) - P, np.ones(len(P)))[0])
        checks.append(Check("intermeeting_ks", ana_mean, emp_mean, ks, tol["ks"], bool(ks < tol["ks"])))
    else:
        checks.append(Check("intermeeting_ks", float("nan"), float("nan"), float("nan"), tol["ks"], False))
    return checks


def validate(cfg: NetworkConfig, slots: int, warmup: int | None = None, seed: int | None = None,
             tolerances: dict | None = None) -> list[Check]:
    return compare(cfg, run(cfg, slots, warmup, seed), tolerances)
