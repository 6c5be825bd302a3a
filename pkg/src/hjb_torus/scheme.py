"""Monotone spatial discretization of sup_theta{-trace(A_theta D^2 u) + H_theta(x, Du)}.

The first-order part uses the Lax-Friedrichs flux
    H(x, (p- + p+)/2) - (alpha/2) * sum_i (p+_i - p-_i),
monotone whenever alpha dominates the p-Lipschitz constant of every H_theta
over the working gradient range.  The diffusion is the exact sum of
directional second differences coeff_k^2 |e_k|^2 D^2_{e_k} u, which equals
trace(A_theta D^2 u) up to O(h^2) because every column is aligned to a
lattice direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem_model import HJBProblem, lipschitz_viscosity
from .torus_grid import Field, TorusGrid, shifted_values

__all__ = [
    "SchemeError",
    "SchemeParams",
    "make_scheme_params",
    "numerical_hamiltonian",
    "OperatorKernel",
    "apply_operator",
    "stable_timestep",
]


class SchemeError(RuntimeError):
    """Broken scheme assumption (non-finite output, gradient range exceeded)."""


@dataclass(frozen=True)
class SchemeParams:
    """Lax-Friedrichs viscosity (per axis), CFL safety factor, working gradient range."""

    lf_viscosity: float
    grad_range: float
    cfl_safety: float = 0.5

    def __post_init__(self):
        if not self.lf_viscosity > 0:
            raise SchemeError("lf_viscosity must be positive")
        if not self.grad_range > 0:
            raise SchemeError("grad_range must be positive")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise SchemeError("cfl_safety must lie in (0, 1]")


def make_scheme_params(
    prob: HJBProblem,
    grad_range: float,
    cfl_safety: float = 0.5,
    lf_viscosity: float | None = None,
) -> SchemeParams:
    """Build params with alpha >= lipschitz_viscosity(prob, grad_range) enforced."""
    bound = lipschitz_viscosity(prob, grad_range)
    alpha = max(bound, 1e-6) if lf_viscosity is None else float(lf_viscosity)
    if alpha < bound * (1.0 - 1e-12):
        raise SchemeError(
            f"lf_viscosity {alpha} is below the sampled Lipschitz bound {bound}"
        )
    return SchemeParams(lf_viscosity=alpha, grad_range=float(grad_range), cfl_safety=cfl_safety)


def numerical_hamiltonian(prob: HJBProblem, theta, x, p_minus, p_plus, alpha: float):
    """Lax-Friedrichs flux; consistent (p-=p+=p gives H(x,p)) and monotone for
    alpha above the local p-Lipschitz bound of H_theta."""
    p_minus = np.asarray(p_minus, dtype=float)
    p_plus = np.asarray(p_plus, dtype=float)
    pbar = 0.5 * (p_minus + p_plus)
    from .problem_model import eval_hamiltonian

    h_val = eval_hamiltonian(prob, theta, x, pbar)
    return h_val - 0.5 * alpha * (p_plus - p_minus).sum(axis=-1)


class OperatorKernel:
    """Precomputed apply_operator engine for one (problem, params, grid) triple.

    Evaluates the full discrete operator on raw value arrays; the solver's
    time loop reuses one kernel to avoid rebuilding coefficient tables.
    """

    def __init__(self, prob: HJBProblem, params: "SchemeParams", grid: TorusGrid):
        if prob.dim != grid.dim:
            raise SchemeError(f"problem dim {prob.dim} != grid dim {grid.dim}")
        self.prob = prob
        self.params = params
        self.grid = grid
        self.h = grid.h
        self.X = grid.coordinates()
        self.alpha = params.lf_viscosity
        axis_dirs = {}
        for ax in range(grid.dim):
            e = tuple(1 if k == ax else 0 for k in range(grid.dim))
            axis_dirs[e] = ax
            axis_dirs[tuple(-c for c in e)] = ax
        # per control: list of (coeff^2 array, direction tuple, axis index or None)
        self.columns = {}
        for theta in prob.controls.thetas:
            cols = []
            for col in prob.columns(theta):
                c = np.broadcast_to(
                    np.asarray(col.coeff(self.X), dtype=float), grid.shape
                ).copy()
                cols.append((c * c, col.direction.e, axis_dirs.get(col.direction.e)))
            self.columns[theta] = tuple(cols)

    def operator(self, u: np.ndarray) -> np.ndarray:
        grid, h, alpha = self.grid, self.h, self.alpha
        dim = grid.dim
        ups = [np.roll(u, -1, axis=ax) for ax in range(dim)]
        downs = [np.roll(u, 1, axis=ax) for ax in range(dim)]
        # (alpha/2) sum_i (p+_i - p-_i) = (alpha/2h) (sum_i (u+_i + u-_i) - 2*dim*u)
        lf = ups[0] + downs[0]
        for ax in range(1, dim):
            lf += ups[ax] + downs[ax]
        lf -= (2 * dim) * u
        lf *= alpha / (2.0 * h)
        pbar = np.stack([(ups[ax] - downs[ax]) for ax in range(dim)], axis=-1)
        pbar *= 0.5 / h
        inv_h2 = 1.0 / (h * h)
        best = None
        for theta in self.prob.controls.thetas:
            val = np.asarray(self.prob.hamiltonian(theta, self.X, pbar), dtype=float)
            val = val - lf
            for c2, e, ax in self.columns[theta]:
                if ax is not None:
                    second = ups[ax] - 2.0 * u + downs[ax]
                else:
                    second = shifted_values(u, e) - 2.0 * u + shifted_values(u, tuple(-c for c in e))
                val -= c2 * second * inv_h2
            best = val if best is None else np.maximum(best, val)
        if not np.isfinite(best).all():
            flat = best.reshape(-1)
            k = int(np.flatnonzero(~np.isfinite(flat))[0])
            node = np.unravel_index(k, grid.shape)
            raise SchemeError(f"operator produced non-finite value at node {node}")
        return best

    def monotone_timestep(self) -> float:
        return stable_timestep(self.prob, self.params, self.grid)


def apply_operator(prob: HJBProblem, params: SchemeParams, u: Field) -> Field:
    """Evaluate the discrete operator on a Field; pure, output freshly allocated."""
    kernel = OperatorKernel(prob, params, u.grid)
    return Field(u.grid, kernel.operator(u.values))


def stable_timestep(prob: HJBProblem, params: SchemeParams, grid: TorusGrid) -> float:
    """CFL-stable dt making the explicit update u - dt*operator(u) monotone.

    Uses dim*alpha/h for the flux part plus a factor-two-conservative
    4*max_theta,x sum_k coeff_k^2 / h^2 for the diffusion part.
    """
    X = grid.coordinates()
    diff = 0.0
    for theta in prob.controls.thetas:
        total = np.zeros(grid.shape)
        for col in prob.columns(theta):
            c = np.broadcast_to(np.asarray(col.coeff(X), dtype=float), grid.shape)
            total = total + c * c
        diff = max(diff, float(total.max()))
    denom = grid.dim * params.lf_viscosity / grid.h + 4.0 * diff / (grid.h * grid.h)
    return params.cfl_safety / denom
