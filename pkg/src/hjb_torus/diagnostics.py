"""Convergence functionals computed on stored trajectories.

The probe functional at a node is
    P[u](x,t) = sup_{s>=t} { u(x,t) - v(x) - mu*(u(x,s) - v(x)) - mu*eta*(s-t) },
its spatial sup M(t) = sup_x P[u](x,t), and the clipped M+ = max(0, M) is
nonincreasing along the flow for the exact solution; here the sup over s
runs over recorded snapshots only, which under-estimates the continuous sup
by at most the recording gap.

For mu = 1 the reference corrector cancels out of P, so verdicts use v = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import Trajectory
from .torus_grid import Field

__all__ = [
    "ProbeParams",
    "ConvergenceVerdict",
    "compute_P",
    "compute_M_series",
    "convergence_verdict",
    "shift_by_constant_rate",
]


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeParams:
    """eta > 0, mu >= 1, and an optional reference corrector (None = zero field)."""

    eta: float
    mu: float = 1.0
    v_ref: Field | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise DiagnosticsError("eta must be positive")
        if not self.mu >= 1.0:
            raise DiagnosticsError("mu must be >= 1")


@dataclass
class ConvergenceVerdict:
    converged: bool
    final_osc: float
    m_eta_mu_series: list[tuple[float, float]]
    monotone_violation: float


def _ref_values(traj: Trajectory, probe: ProbeParams) -> np.ndarray:
    if probe.v_ref is None:
        return np.zeros(traj.grid.n_nodes)
    if probe.v_ref.grid != traj.grid:
        raise DiagnosticsError("v_ref lives on a different grid")
    return probe.v_ref.values.reshape(-1)


def compute_P(traj: Trajectory, probe: ProbeParams, node, t_index: int) -> float:
    """Discrete sup over recorded s >= t of the probe expression at one node."""
    if not 0 <= t_index < len(traj.times):
        raise DiagnosticsError(f"t_index {t_index} out of range")
    if np.isscalar(node):
        node = (int(node),)
    flat = int(np.ravel_multi_index(tuple(int(i) for i in node), traj.grid.shape))
    U = traj.values_matrix()[:, flat]
    v = _ref_values(traj, probe)[flat]
    ts = np.asarray(traj.times)
    t = ts[t_index]
    s_slice = slice(t_index, None)
    expr = (U[t_index] - v) - probe.mu * (U[s_slice] - v) - probe.mu * probe.eta * (ts[s_slice] - t)
    return float(expr.max())


def compute_M_series(traj: Trajectory, probe: ProbeParams) -> list[tuple[float, float]]:
    """Per recorded t: M+(t) = max(0, sup_x P[u](x,t)), via a suffix-min scan.

    P(x,t) = [u(x,t) - v(x) + mu*eta*t] - mu * min_{s>=t} [(u(x,s) - v(x)) + eta*s].
    """
    if len(traj.times) < 2:
        raise DiagnosticsError("trajectory needs at least two snapshots")
    U = traj.values_matrix()
    v = _ref_values(traj, probe)
    ts = np.asarray(traj.times)
    W = U - v[None, :]
    A = W + probe.eta * ts[:, None]
    suffix_min = np.minimum.accumulate(A[::-1], axis=0)[::-1]
    P = W + probe.mu * probe.eta * ts[:, None] - probe.mu * suffix_min
    M = P.max(axis=1)
    M_plus = np.maximum(M, 0.0)
    return [(float(t), float(m)) for t, m in zip(ts, M_plus)]


def shift_by_constant_rate(traj: Trajectory, c: float) -> Trajectory:
    """Trajectory of u(x,t) + c*t (the large-time normalization)."""
    snaps = [Field(traj.grid, s.values + c * t) for t, s in zip(traj.times, traj.snapshots)]
    return Trajectory(grid=traj.grid, times=list(traj.times), snapshots=snaps, c_estimate=traj.c_estimate)


def convergence_verdict(traj: Trajectory, c: float, threshold: float) -> ConvergenceVerdict:
    """Converged iff the shifted solution is settled over the last quarter of
    the run and the M+ series (eta = threshold/t_final, mu = 1) ends below
    threshold."""
    if len(traj.times) < 4:
        raise DiagnosticsError("trajectory too short for a verdict")
    shifted = shift_by_constant_rate(traj, c)
    ts = np.asarray(shifted.times)
    t_final = ts[-1]
    window_start = 0.75 * t_final
    idx = np.flatnonzero(ts >= window_start - 1e-12)
    if idx.size < 2:
        raise DiagnosticsError("fewer than two snapshots in the diagnostic window")
    W = shifted.values_matrix()[idx]
    worst_pair = 0.0
    for i in range(W.shape[0]):
        d = W[i + 1 :] - W[i][None, :]
        if d.size:
            worst_pair = max(worst_pair, float((d.max(axis=1) - d.min(axis=1)).max()))
    final_diff = W[-1] - W[0]
    final_osc = float(final_diff.max() - final_diff.min())

    eta = threshold / t_final
    series = compute_M_series(shifted, ProbeParams(eta=eta, mu=1.0))
    m_vals = np.asarray([m for _, m in series])
    jumps = np.diff(m_vals)
    monotone_violation = float(max(0.0, jumps.max())) if jumps.size else 0.0
    converged = bool(worst_pair <= threshold and m_vals[-1] <= threshold)
    return ConvergenceVerdict(
        converged=converged,
        final_osc=final_osc,
        m_eta_mu_series=series,
        monotone_violation=monotone_violation,
    )
