"""Time-marching for the Cauchy problem and the discounted stationary problem.

The Cauchy solver is forward Euler under the monotone CFL bound, so the
discrete comparison principle holds unconditionally along trajectories.
The discounted solver marches dv/ds + lambda*v + operator(v) = 0 in
pseudo-time; because the operator is invariant under adding constants, the
residual's constant mode is eliminated exactly by periodic shifts
v <- v - mean(residual)/lambda, which leaves the unique fixed point
untouched and removes the O(1/lambda) stalling of plain marching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem_model import DegeneracyMask, HJBProblem, eval_hamiltonian
from .scheme import OperatorKernel, SchemeParams, stable_timestep
from .torus_grid import Field, TorusGrid, discrete_lipschitz

__all__ = [
    "SolverError",
    "Trajectory",
    "ErgodicResult",
    "run_cauchy",
    "long_time_slope",
    "solve_discounted",
    "nr_ergodic_constant",
    "trajectory_csv_rows",
]


class SolverError(RuntimeError):
    """Solver abort: broken scheme assumption or non-convergence."""


@dataclass
class Trajectory:
    """Recorded snapshots of a Cauchy run, plus the ergodic-constant estimate."""

    grid: TorusGrid
    times: list[float]
    snapshots: list[Field]
    c_estimate: float | None = None

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise SolverError("times and snapshots must have equal length")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise SolverError("times must be strictly increasing")

    def values_matrix(self) -> np.ndarray:
        """Snapshot values stacked as (n_times, n_nodes)."""
        return np.stack([s.values.reshape(-1) for s in self.snapshots])

    def index_at(self, t: float, tol: float = 1e-9) -> int:
        arr = np.asarray(self.times)
        k = int(np.argmin(np.abs(arr - t)))
        if abs(arr[k] - t) > tol + 1e-6 * max(1.0, abs(t)):
            raise SolverError(f"time {t} not among recorded times")
        return k


def run_cauchy(
    prob: HJBProblem,
    params: SchemeParams,
    u0: Field,
    t_final: float,
    record_every: float,
) -> Trajectory:
    """March u <- u - dt*operator(u) to t_final, recording snapshots.

    Aborts if a recorded snapshot's discrete Lipschitz constant exceeds
    params.grad_range (the monotonicity bound no longer applies) or if
    values go non-finite.
    """
    if not t_final > 0:
        raise SolverError("t_final must be positive")
    if not record_every > 0:
        raise SolverError("record_every must be positive")
    kernel = OperatorKernel(prob, params, u0.grid)
    dt = kernel.monotone_timestep()
    u = u0.values.copy()
    t = 0.0

    times = [0.0]
    snapshots = [u0]
    _check_snapshot(u0, params, 0.0)

    next_record = record_every
    while t < t_final - 1e-12:
        step = min(dt, t_final - t)
        op = kernel.operator(u)
        u -= step * op
        t += step
        if t >= next_record - 1e-9 or t >= t_final - 1e-12:
            snap = Field(u0.grid, u.copy())
            _check_snapshot(snap, params, t)
            times.append(t)
            snapshots.append(snap)
            while next_record <= t + 1e-9:
                next_record += record_every
    return Trajectory(grid=u0.grid, times=times, snapshots=snapshots)


def _check_snapshot(snap: Field, params: SchemeParams, t: float) -> None:
    lip = discrete_lipschitz(snap)
    if lip > params.grad_range:
        raise SolverError(
            f"discrete Lipschitz constant {lip:.4g} exceeds grad_range "
            f"{params.grad_range:.4g} at t={t:.4g}; scheme assumption broken"
        )


def long_time_slope(traj: Trajectory, window: tuple[float, float]) -> float:
    """Mean over nodes of -(u(t2) - u(t1))/(t2 - t1), an estimate of the
    ergodic constant; stored into traj.c_estimate."""
    t1, t2 = window
    if not t1 < t2:
        raise SolverError("window must satisfy t1 < t2")
    i1, i2 = traj.index_at(t1, tol=0.51 * _recording_gap(traj)), traj.index_at(
        t2, tol=0.51 * _recording_gap(traj)
    )
    a, b = traj.times[i1], traj.times[i2]
    du = traj.snapshots[i2].values - traj.snapshots[i1].values
    slope = float(-du.mean() / (b - a))
    traj.c_estimate = slope
    return slope


def _recording_gap(traj: Trajectory) -> float:
    ts = np.asarray(traj.times)
    return float(np.diff(ts).max()) if len(ts) > 1 else 0.0


@dataclass
class ErgodicResult:
    """Discounted approximation of the ergodic problem at one lambda."""

    c: float
    corrector: Field
    lambda_used: float
    residual: float
    spread: float

    def __post_init__(self):
        if abs(self.corrector.values.min()) > 1e-12:
            raise SolverError("corrector must be normalized to min = 0")


def solve_discounted(
    prob: HJBProblem,
    params: SchemeParams,
    grid: TorusGrid,
    lam: float,
    tol: float = 1e-8,
    max_pseudo_time: float = 400.0,
    v0: Field | None = None,
    shift_every: int = 25,
) -> ErgodicResult:
    """Solve lambda*v + operator(v) = 0 by damped pseudo-time marching.

    Returns c = mean(-lambda*v), the min-normalized corrector, and the
    achieved sup-norm residual; the max-min spread of -lambda*v is reported
    as a convergence indicator.
    """
    if not lam > 0:
        raise SolverError("lambda must be positive")
    if not tol > 0:
        raise SolverError("tol must be positive")
    kernel = OperatorKernel(prob, params, grid)
    dt = kernel.monotone_timestep()
    dt = dt / (1.0 + lam * dt)  # keep the lambda*v term inside the monotone budget
    v = np.zeros(grid.shape) if v0 is None else v0.values.copy()
    s = 0.0
    k = 0
    res = np.inf
    while s < max_pseudo_time:
        r = lam * v + kernel.operator(v)
        res = float(np.abs(r).max())
        if res <= tol:
            break
        if k % shift_every == 0:
            # operator(v + const) = operator(v): this kills the residual's
            # constant mode exactly without moving the fixed point
            v -= r.mean() / lam
            r = lam * v + kernel.operator(v)
            res = float(np.abs(r).max())
            if res <= tol:
                break
        v -= dt * r
        s += dt
        k += 1
    if res > tol:
        raise SolverError(
            f"discounted solve did not reach tol={tol:.3g} within "
            f"max_pseudo_time={max_pseudo_time}; final residual {res:.3g}"
        )
    minus_lv = -lam * v
    c = float(minus_lv.mean())
    spread = float(minus_lv.max() - minus_lv.min())
    corrector = Field(grid, v - v.min())
    return ErgodicResult(c=c, corrector=corrector, lambda_used=float(lam), residual=res, spread=spread)


def nr_ergodic_constant(prob: HJBProblem, sigma_mask: DegeneracyMask) -> float:
    """Closed-form ergodic constant max over theta and Sigma nodes of H_theta(x, 0)."""
    if sigma_mask.is_empty:
        raise SolverError("Sigma is empty; the closed-form ergodic constant needs Sigma nodes")
    X = sigma_mask.grid.coordinates()[sigma_mask.in_sigma]
    P = np.zeros_like(X)
    best = -np.inf
    for theta in prob.controls.thetas:
        vals = np.atleast_1d(eval_hamiltonian(prob, theta, X, P))
        best = max(best, float(vals.max()))
    return best


def trajectory_csv_rows(traj: Trajectory):
    """Yield (t, node_index, x1[, x2], u) rows for CSV export."""
    coords = traj.grid.coordinates().reshape(-1, traj.grid.dim)
    for t, snap in zip(traj.times, traj.snapshots):
        flat = snap.values.reshape(-1)
        for idx in range(flat.shape[0]):
            yield (t, idx, *coords[idx], flat[idx])
