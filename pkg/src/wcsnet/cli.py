"""Command-line front end.

Every subcommand reads one scenario (``--config`` YAML plus ``--set key=value``
overrides), prints a JSON summary on stdout and, with ``--out``, writes a CSV
table.  Numbers in CSV files carry 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .asymptotics import infinite_battery_pon, infinite_battery_throughput, mean_arrival_rate, scaling_bounds
from .chain import analyze, pon_lower_bound, solve_qbd_matrix_geometric, throughput_from_pon
from .config import ConfigError, NetworkConfig, load_config
from .intermeeting import (ccdf_series, inner_kernel, mean_intermeeting, one_term_tail,
                           spectral_ccdf, spectral_decomposition)
from .kernel import build_kernel, charge_probability_printed
from .montecarlo import run
from .validation import DEFAULT_TOLERANCES, compare

log = logging.getLogger("wcsnet")

SWEEP_PARAMS = ("v", "L", "n", "m")
SWEEP_COLUMNS = ["index", "param", "value", "Lambda", "P_on", "lambda1", "Lambda_iid",
                 "Lambda_inf", "bound_lower", "bound_upper", "mc_P_on", "mc_Lambda", "error"]
EXIT_CONFIG = 2


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: str | Path | None, header: list[str], rows) -> None:
    if path is None:
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def emit(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2))


# ---------------------------------------------------------------- commands

def cmd_solve(cfg: NetworkConfig, args) -> int:
    kernel, model, ss = analyze(cfg)
    out = {"P_on": ss.P_on, "Lambda": ss.Lambda, "residual": ss.residual,
           "p_t": kernel.p_t, "p_c": kernel.p_c, "M": kernel.M, "L": cfg.L}
    if args.qbd:
        if model.E != 1:
            raise ValueError("--qbd needs E = 1")
        mg = solve_qbd_matrix_geometric(model, cfg.q)
        out["qbd_max_abs_diff"] = float(np.abs(mg.pi - ss.pi).max())
    emit(out)
    header = ["level"] + [f"d{j}" for j in range(kernel.M + 1)]
    write_csv(args.out, header, ([e, *row] for e, row in enumerate(ss.levels)))
    return 0


def cmd_kernel(cfg: NetworkConfig, args) -> int:
    kernel = build_kernel(cfg)
    main, appendix = charge_probability_printed(cfg.n, cfg.m, cfg.u, cfg.R1, cfg.S) if cfg.m else (0.0, 0.0)
    emit({"M": kernel.M, "p_t": kernel.p_t, "p_c": kernel.p_c, "beta": kernel.beta,
          "p_c_printed_main": main, "p_c_printed_appendix": appendix,
          "row_sum_error": float(np.abs(kernel.P.sum(1) - 1).max())})
    M = kernel.M
    write_csv(args.out, ["i", "j", "P"], ((i, j, kernel.P[i, j]) for i in range(M + 1) for j in range(M + 1)))
    return 0


def cmd_intermeeting(cfg: NetworkConfig, args) -> int:
    P = inner_kernel(build_kernel(cfg))
    s = spectral_decomposition(P)
    approx, exact = mean_intermeeting(s)
    emit({"M": P.shape[0], "eigenvalues": s.eigenvalues, "gamma": s.gamma,
          "spectral_radius": s.spectral_radius, "mean_T_I_approx": approx, "mean_T_I": exact,
          "degenerate": s.degenerate})
    t = np.arange(1, args.tmax + 1)
    rows = zip(t, ccdf_series(P, s.p0, args.tmax), spectral_ccdf(s, t), one_term_tail(s, t))
    write_csv(args.out, ["t", "exact", "spectral", "one_term"], rows)
    return 0


def cmd_limits(cfg: NetworkConfig, args) -> int:
    kernel = build_kernel(cfg)
    emit({"mean_arrival_rate": mean_arrival_rate(cfg, kernel),
          "P_on_infinite": infinite_battery_pon(cfg, kernel),
          "Lambda_infinite": infinite_battery_throughput(cfg, kernel),
          "P_on_lower_bound": pon_lower_bound(kernel, cfg),
          "Lambda_lower_bound": throughput_from_pon(pon_lower_bound(kernel, cfg), cfg.q)})
    return 0


def cmd_bounds(cfg: NetworkConfig, args) -> int:
    b = scaling_bounds(cfg)
    emit({k: getattr(b, k) for k in b.__dataclass_fields__})
    return 0


def cmd_simulate(cfg: NetworkConfig, args) -> int:
    stats = run(cfg, args.slots, args.warmup, args.seed)
    out = stats.summary()
    out["transition_counts"] = stats.transition_counts
    emit(out)
    series = stats.active_series
    write_csv(args.out, ["slot", "active_fraction"],
              ((i * stats.stride, x) for i, x in enumerate(series)))
    if args.samples_out:
        Path(args.samples_out).write_text("".join(f"{int(x)}\n" for x in stats.intermeeting))
    return 0


def _tolerances(items) -> dict:
    tol = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or key not in DEFAULT_TOLERANCES:
            raise ConfigError("--tolerance", f"expected one of {sorted(DEFAULT_TOLERANCES)} as key=value, got {item!r}")
        try:
            tol[key] = float(value)
        except ValueError:
            raise ConfigError("--tolerance", f"not a number: {value!r}") from None
    return tol


def cmd_validate(cfg: NetworkConfig, args) -> int:
    tol = _tolerances(args.tolerance)
    stats = run(cfg, args.slots, args.warmup, args.seed)
    checks = compare(cfg, stats, tol)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status:4s} {c.name:16s} analytic={c.analytic:.6g} empirical={c.empirical:.6g} "
              f"stat={c.statistic:.4g} tol={c.tolerance:.4g}", file=sys.stderr)
    emit({"passed": all(c.passed for c in checks), "checks": [c.as_row() for c in checks]})
    write_csv(args.out, ["name", "analytic", "empirical", "statistic", "tolerance", "passed"],
              ([c.name, c.analytic, c.empirical, c.statistic, c.tolerance, c.passed] for c in checks))
    return 0 if all(c.passed for c in checks) else 1


def sweep_point(cfg: NetworkConfig, index: int, param: str, value, simulate: bool,
                slots: int, warmup, seed) -> list:
    row = {"index": index, "param": param, "value": value}
    try:
        kernel, model, ss = analyze(cfg)
        _, _, iid = analyze(cfg, iid=True)
        row.update(Lambda=ss.Lambda, P_on=ss.P_on, Lambda_iid=iid.Lambda,
                   Lambda_inf=infinite_battery_throughput(cfg, kernel))
        row["lambda1"] = (spectral_decomposition(inner_kernel(kernel)).spectral_radius
                          if cfg.m > 0 else float("nan"))
        if cfg.m > 0:
            b = scaling_bounds(cfg)
            row.update(bound_lower=b.lower, bound_upper=b.upper)
        if simulate:
            st = run(cfg, slots, warmup, seed)
            row.update(mc_P_on=st.P_on, mc_Lambda=st.Lambda)
    except Exception as exc:  # recorded per point, the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return [row.get(c, "") for c in SWEEP_COLUMNS]


def _grid(args, base: NetworkConfig) -> list[tuple[object, NetworkConfig]]:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError("--param", f"must be one of {', '.join(SWEEP_PARAMS)}")
    cast = float if args.param == "v" else int
    try:
        values = [cast(x) for x in args.values.replace(",", " ").split()]
    except ValueError:
        raise ConfigError("--values", f"cannot parse {args.values!r}") from None
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("--values", "grid must be non-empty and strictly increasing")
    grid = []
    for x in values:
        change = {args.param: x}
        if args.param == "v":
            change["M"] = None
        if args.param == "n" and args.m_ratio is not None:
            change["m"] = max(1, int(round(x * args.m_ratio)))
        try:
            grid.append((x, base.replace(**change)))
        except ConfigError as exc:
            raise ConfigError(exc.field, f"at {args.param}={x}: {exc}") from None
    return grid


def cmd_sweep(cfg: NetworkConfig, args) -> int:
    grid = _grid(args, cfg)
    jobs = [(c, i, args.param, x, args.simulate, args.slots, args.warmup, args.seed)
            for i, (x, c) in enumerate(grid)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_point, *zip(*jobs)))
    else:
        rows = [sweep_point(*j) for j in jobs]
    write_csv(args.out, SWEEP_COLUMNS, rows)
    emit({"param": args.param, "points": len(rows),
          "errors": sum(1 for r in rows if r[-1]), "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]})
    return 0


COMMANDS = {
    "solve": (cmd_solve, "steady state, P_on and throughput"),
    "kernel": (cmd_kernel, "distance transition matrix and per-slot probabilities"),
    "intermeeting": (cmd_intermeeting, "inter-meeting CCDF and its eigen-expansion"),
    "limits": (cmd_limits, "infinite-battery throughput"),
    "bounds": (cmd_bounds, "large-network throughput bounds"),
    "simulate": (cmd_simulate, "Monte Carlo run"),
    "sweep": (cmd_sweep, "one-parameter sweep"),
    "validate": (cmd_validate, "analytic model against simulation"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one scenario field (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="simulation seed (default: config seed)")
    common.add_argument("--slots", type=int, default=1_000_000, help="recorded simulation slots")
    common.add_argument("--warmup", type=int, default=None, help="unrecorded slots before recording")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wcsnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "solve":
            sp.add_argument("--qbd", action="store_true", help="also run the matrix-geometric solver (E = 1)")
        elif name == "intermeeting":
            sp.add_argument("--tmax", type=int, default=500)
        elif name == "simulate":
            sp.add_argument("--samples-out", help="write inter-meeting samples, one per line")
        elif name == "validate":
            sp.add_argument("--tolerance", action="append", metavar="KEY=VALUE",
                            help=f"override a tolerance ({', '.join(DEFAULT_TOLERANCES)})")
        elif name == "sweep":
            sp.add_argument("--param", required=True, choices=SWEEP_PARAMS)
            sp.add_argument("--values", required=True, help="comma-separated increasing grid")
            sp.add_argument("--m-ratio", type=float, default=None, help="with --param n, set m = ratio * n")
            sp.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")
            sp.add_argument("--jobs", type=int, default=1)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if args.slots is not None and args.slots < 1:
            raise ConfigError("--slots", "must be positive")
        return COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"wcsnet: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"wcsnet: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"wcsnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
