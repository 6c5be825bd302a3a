"""Batch front-end: run catalog problems in evolve/ergodic/verify/counterexample
modes and emit CSV artifacts plus a human-readable summary.

Config files are flat `key = value` lines with `#` comments; command-line
flags override file values.  Exit status: 0 when every expected check and
mode assertion passed (no FAIL line in summary.txt), 1 on assertion
failure, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import catalog
from .diagnostics import ProbeParams, compute_M_series, convergence_verdict, shift_by_constant_rate
from .problem_model import degeneracy_set
from .scheme import make_scheme_params
from .solver import (
    SolverError,
    long_time_slope,
    nr_ergodic_constant,
    run_cauchy,
    solve_discounted,
    trajectory_csv_rows,
)
from .torus_grid import discrete_lipschitz, make_grid, oscillation
from .verifier import report_line

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]

MODES = ("evolve", "ergodic", "verify", "counterexample", "full")

DEFAULTS = dict(
    n_per_axis=64,
    t_final=10.0,
    lambda_sweep=(0.1, 0.05, 0.025),
    eta=0.01,
    mu=1.0,
    threshold=1e-3,
    seed=42,
    out_dir="hjb_out",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str
    mode: str
    n_per_axis: int = DEFAULTS["n_per_axis"]
    t_final: float = DEFAULTS["t_final"]
    lambda_sweep: tuple = DEFAULTS["lambda_sweep"]
    eta: float = DEFAULTS["eta"]
    mu: float = DEFAULTS["mu"]
    threshold: float = DEFAULTS["threshold"]
    seed: int = DEFAULTS["seed"]
    out_dir: str = DEFAULTS["out_dir"]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.n_per_axis < 8:
            raise ConfigError(f"n_per_axis must be >= 8, got {self.n_per_axis}")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not self.mu >= 1:
            raise ConfigError("mu must be >= 1")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        if not all(l > 0 for l in self.lambda_sweep):
            raise ConfigError("lambda_sweep entries must be positive")


_PARSERS = {
    "problem": str,
    "mode": str,
    "n_per_axis": int,
    "t_final": float,
    "lambda_sweep": lambda s: tuple(float(tok) for tok in s.split(",") if tok.strip()),
    "eta": float,
    "mu": float,
    "threshold": float,
    "seed": int,
    "out_dir": str,
}


def parse_config(text: str) -> RunConfig:
    """Parse the flat key = value format, rejecting unknown keys by line."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: malformed value for {key!r}: {exc}") from None
    for required in ("problem", "mode"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    return RunConfig(**values)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write(path: str, lines) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _default_params(entry, u0, cfl_safety=0.5):
    grad_range = max(1.5 * discrete_lipschitz(u0), entry.grad_floor)
    return make_scheme_params(entry.problem, grad_range, cfl_safety=cfl_safety)


def _evolve(entry, cfg, out, summary):
    grid = make_grid(entry.dim, cfg.n_per_axis)
    u0 = entry.make_u0(grid)
    params = _default_params(entry, u0)
    traj = run_cauchy(entry.problem, params, u0, cfg.t_final, record_every=0.05)

    header = "t,node_index,x1,u" if entry.dim == 1 else "t,node_index,x1,x2,u"
    rows = [header]
    for row in trajectory_csv_rows(traj):
        rows.append(",".join([_fmt(row[0]), str(row[1])] + [_fmt(v) for v in row[2:]]))
    _write(os.path.join(out, "trajectory.csv"), rows)

    half = cfg.t_final / 2.0
    c_slope = long_time_slope(traj, (half, cfg.t_final))
    c_ref = entry.known_c if entry.known_c is not None else c_slope
    verdict = convergence_verdict(traj, c_ref, cfg.threshold)

    shifted = shift_by_constant_rate(traj, c_ref)
    series = compute_M_series(shifted, ProbeParams(eta=cfg.eta, mu=cfg.mu))
    diag = ["t,M_plus,osc_shifted"]
    for (t, m), snap in zip(series, shifted.snapshots):
        diag.append(",".join([_fmt(t), _fmt(m), _fmt(oscillation(snap))]))
    diag.append(f"converged,{str(verdict.converged).lower()},final_osc,{_fmt(verdict.final_osc)}")
    _write(os.path.join(out, "diagnostics.csv"), diag)

    summary.append(f"slope_c_estimate,{_fmt(c_slope)}")
    summary.append(f"converged,{str(verdict.converged).lower()}")
    summary.append(f"final_osc,{_fmt(verdict.final_osc)}")
    lips = [discrete_lipschitz(s) for s in traj.snapshots]
    t1_idx = traj.index_at(min(1.0, traj.times[-1]), tol=0.51 * max(np.diff(traj.times)))
    growth_ok = all(l <= 1.2 * lips[t1_idx] + 1e-12 for l in lips[t1_idx:])
    summary.append(("PASS" if growth_ok else "FAIL") + " lipschitz_bounded")
    if entry.expected_convergence is not None:
        ok = verdict.converged == entry.expected_convergence
        summary.append(("PASS" if ok else "FAIL") + f" convergence_expected_{entry.expected_convergence}")
    if entry.exact_solution is not None:
        X = grid.coordinates()
        err = 0.0
        for t, snap in zip(traj.times, traj.snapshots):
            err = max(err, float(np.abs(snap.values - entry.exact_solution(X, t)).max()))
        summary.append(f"exact_sup_error,{_fmt(err)}")
    return traj


def _ergodic(entry, cfg, out, summary):
    grid = make_grid(entry.dim, cfg.n_per_axis)
    u0 = entry.make_u0(grid)
    params = _default_params(entry, u0)
    rows = ["lambda,c,spread,residual"]
    results = []
    v_prev = None
    for lam in sorted(cfg.lambda_sweep, reverse=True):
        res = solve_discounted(
            entry.problem, params, grid, lam, tol=1e-8 * (1.0 + abs(entry.known_c or 1.0)), v0=v_prev
        )
        # warm start the next (smaller) lambda: the corrector carries the shape,
        # the constant-mode shift inside solve_discounted finds the new offset
        v_prev = res.corrector
        results.append(res)
        rows.append(",".join(_fmt(v) for v in (res.lambda_used, res.c, res.spread, res.residual)))
    _write(os.path.join(out, "ergodic.csv"), rows)
    c_disc = results[-1].c
    summary.append(f"discounted_c,{_fmt(c_disc)},lambda,{_fmt(results[-1].lambda_used)}")
    if entry.nr_split is not None:
        mask = degeneracy_set(entry.problem, grid)
        c_formula = nr_ergodic_constant(entry.problem, mask)
        summary.append(f"closed_form_c,{_fmt(c_formula)}")
        ok = abs(c_disc - c_formula) <= 2e-2
        summary.append(("PASS" if ok else "FAIL") + " discounted_matches_closed_form")
    if entry.known_c is not None:
        summary.append(f"known_c,{_fmt(entry.known_c)}")
        if entry.c_discrete_check:
            ok = abs(c_disc - entry.known_c) <= 2e-2
            summary.append(("PASS" if ok else "FAIL") + f" discounted_matches_known_c_{_fmt(entry.known_c)}")
    return results


def _verify(entry, cfg, out, summary):
    reports = catalog.run_expected_checks(entry, n=min(cfg.n_per_axis, 32), seed=cfg.seed)
    lines = [report_line(reports[name]) for name in entry.expected_checks]
    _write(os.path.join(out, "checks.txt"), lines)
    for name, expected in entry.expected_checks.items():
        got = reports[name].verdict
        summary.append(("PASS" if got == expected else "FAIL") + f" check_{name}_expected_{expected}_got_{got}")
    return reports


def _counterexample_mode(entry, cfg, out, summary):
    if entry.exact_solution is None:
        raise ConfigError(f"problem {entry.name!r} has no exact solution; counterexample mode unavailable")
    traj = _evolve(entry, cfg, out, summary)
    verdict_false = "converged,false" in summary
    summary.append(("PASS" if verdict_false else "FAIL") + " nonconvergence_reproduced")
    return traj


def _estimator_table(entry, cfg, summary, traj, ergodic_results):
    c_slope = traj.c_estimate
    c_disc = ergodic_results[-1].c
    estimates = {"slope": c_slope, "discounted": c_disc}
    if entry.nr_split is not None:
        grid = make_grid(entry.dim, cfg.n_per_axis)
        estimates["closed_form"] = nr_ergodic_constant(entry.problem, degeneracy_set(entry.problem, grid))
    summary.append("estimator,c")
    for k, v in estimates.items():
        summary.append(f"{k},{_fmt(v)}")
    names = list(estimates)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            ok = abs(estimates[a] - estimates[b]) <= 2e-2
            summary.append(("PASS" if ok else "FAIL") + f" agreement_{a}_{b}")


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    try:
        entry = catalog.build(config.problem)
    except catalog.CatalogError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(config.out_dir, exist_ok=True)
    summary: list[str] = [f"problem,{entry.name}", f"mode,{config.mode}", f"seed,{config.seed}"]
    try:
        if config.mode == "evolve":
            _evolve(entry, config, config.out_dir, summary)
        elif config.mode == "ergodic":
            _ergodic(entry, config, config.out_dir, summary)
        elif config.mode == "verify":
            _verify(entry, config, config.out_dir, summary)
        elif config.mode == "counterexample":
            _counterexample_mode(entry, config, config.out_dir, summary)
        elif config.mode == "full":
            _verify(entry, config, config.out_dir, summary)
            ergodic_results = _ergodic(entry, config, config.out_dir, summary)
            traj = _evolve(entry, config, config.out_dir, summary)
            _estimator_table(entry, config, summary, traj, ergodic_results)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        summary.append(f"FAIL solver_abort {exc}")
    _write(os.path.join(config.out_dir, "summary.txt"), summary)
    failed = [line for line in summary if line.startswith("FAIL")]
    for line in summary:
        print(line)
    return 1 if failed else 0


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjb", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one problem/mode configuration")
    runp.add_argument("config_file", nargs="?", help="flat key = value config file")
    runp.add_argument("--problem", help="catalog problem name")
    runp.add_argument("--mode", choices=MODES)
    runp.add_argument("--n", type=int, dest="n_per_axis")
    runp.add_argument("--t-final", type=float, dest="t_final")
    runp.add_argument("--eta", type=float)
    runp.add_argument("--mu", type=float)
    runp.add_argument("--threshold", type=float)
    runp.add_argument("--seed", type=int)
    runp.add_argument("--lambda-sweep", dest="lambda_sweep", help="comma-separated list")
    runp.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_parser("list", help="print catalog problem names")
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("HJB_THREADS")
    if threads is not None:
        try:
            if int(threads) < 0:
                raise ValueError
        except ValueError:
            print(f"config error: HJB_THREADS must be a nonnegative integer, got {threads!r}", file=sys.stderr)
            return 2
    args = _build_argparser().parse_args(argv)
    if args.command == "list":
        for name in catalog.list_names():
            print(name)
        return 0
    try:
        if args.config_file:
            with open(args.config_file) as fh:
                cfg = parse_config(fh.read())
        else:
            overrides_only = {k: v for k, v in vars(args).items() if k in _PARSERS and v is not None}
            if "problem" not in overrides_only or "mode" not in overrides_only:
                raise ConfigError("either a config file or both --problem and --mode are required")
            if isinstance(overrides_only.get("lambda_sweep"), str):
                overrides_only["lambda_sweep"] = _PARSERS["lambda_sweep"](overrides_only["lambda_sweep"])
            cfg = RunConfig(**overrides_only)
        overrides = {
            k: v for k, v in vars(args).items() if k in _PARSERS and v is not None
        }
        if isinstance(overrides.get("lambda_sweep"), str):
            overrides["lambda_sweep"] = _PARSERS["lambda_sweep"](overrides["lambda_sweep"])
        if overrides:
            cfg = replace(cfg, **overrides)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
