"""Controlled Hamiltonian/diffusion problems and their structural quantities.

An ``HJBProblem`` couples a finite control set with one Hamiltonian
H_theta(x, p) per control and a diffusion factor sigma_theta(x) given as
scalar-coefficient columns along supported lattice directions, so that
A_theta = sigma_theta sigma_theta^T is a sum of rank-one terms
coeff^2(x) * e e^T that the scheme can discretize monotonically.

Hamiltonian and coefficient callables must be numpy-vectorized:
``hamiltonian(theta, X, P)`` takes X, P of shape (..., dim) and returns an
array of shape (...); ``coeff(X)`` takes (..., dim) and returns (...) or a
scalar (constant coefficients).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .torus_grid import LatticeDirection, TorusGrid, supported_directions

__all__ = [
    "ModelError",
    "ControlSet",
    "SigmaColumn",
    "HJBProblem",
    "DegeneracyMask",
    "eval_hamiltonian",
    "eval_diffusion",
    "degeneracy_set",
    "lipschitz_viscosity",
]


class ModelError(ValueError):
    """Ill-formed problem data or non-finite model evaluations."""


@dataclass(frozen=True)
class ControlSet:
    thetas: tuple

    def __post_init__(self):
        t = tuple(self.thetas)
        if not t:
            raise ModelError("control set must be nonempty")
        if len(set(t)) != len(t):
            raise ModelError(f"duplicate control labels in {t}")
        object.__setattr__(self, "thetas", t)


@dataclass(frozen=True)
class SigmaColumn:
    """One column of sigma_theta: scalar coefficient of x times a lattice direction."""

    coeff: Callable[[np.ndarray], np.ndarray]
    direction: LatticeDirection


@dataclass(frozen=True, eq=False)
class HJBProblem:
    """sup_theta { -trace(A_theta(x) D^2 u) + H_theta(x, Du) } problem data."""

    dim: int
    controls: ControlSet
    hamiltonian: Callable
    sigma: Mapping
    lipschitz_p_bound: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ModelError(f"unsupported dimension {self.dim}")
        if not self.lipschitz_p_bound > 0:
            raise ModelError("lipschitz_p_bound must be positive")
        allowed = {d.e for d in supported_directions(self.dim)}
        for theta in self.controls.thetas:
            for col in self.sigma.get(theta, ()):
                if col.direction.e not in allowed:
                    raise ModelError(
                        f"sigma column direction {col.direction.e} unsupported in dim={self.dim}"
                    )

    def columns(self, theta) -> tuple[SigmaColumn, ...]:
        return tuple(self.sigma.get(theta, ()))


def eval_hamiltonian(prob: HJBProblem, theta, x, p):
    """H_theta(x, p); raises ModelError naming (theta, x, p) on non-finite output."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.asarray(prob.hamiltonian(theta, x, p), dtype=float)
    if not np.isfinite(out).all():
        flat = out.reshape(-1)
        k = int(np.flatnonzero(~np.isfinite(flat))[0])
        xb = np.broadcast_to(x, out.shape + (prob.dim,)).reshape(-1, prob.dim)[k]
        pb = np.broadcast_to(p, out.shape + (prob.dim,)).reshape(-1, prob.dim)[k]
        raise ModelError(f"H is non-finite at theta={theta}, x={xb}, p={pb}")
    return out if out.ndim else float(out)


def eval_diffusion(prob: HJBProblem, theta, x) -> np.ndarray:
    """A_theta(x) = sigma_theta(x) sigma_theta(x)^T as a (..., dim, dim) array."""
    x = np.asarray(x, dtype=float)
    base = x.shape[:-1] if x.ndim > 1 else ()
    A = np.zeros(base + (prob.dim, prob.dim))
    for col in prob.columns(theta):
        c = np.broadcast_to(np.asarray(col.coeff(x), dtype=float), base)
        e = np.asarray(col.direction.e, dtype=float)
        A += (c * c)[..., None, None] * np.outer(e, e)
    return A


@dataclass(frozen=True)
class DegeneracyMask:
    """Grid approximation of Sigma = {x : A_theta(x) = 0 for all theta}."""

    grid: TorusGrid
    in_sigma: np.ndarray
    tol: float

    def __post_init__(self):
        m = np.array(self.in_sigma, dtype=bool)
        if m.shape != self.grid.shape:
            raise ModelError("mask shape does not match grid")
        m.setflags(write=False)
        object.__setattr__(self, "in_sigma", m)

    @property
    def is_empty(self) -> bool:
        return not bool(self.in_sigma.any())

    def node_indices(self) -> np.ndarray:
        return np.argwhere(self.in_sigma)

    def distance_field(self) -> np.ndarray:
        """Torus distance from every node to the nearest Sigma node (inf if empty)."""
        if self.is_empty:
            return np.full(self.grid.shape, np.inf)
        coords = self.grid.coordinates().reshape(-1, self.grid.dim)
        sig = self.grid.coordinates()[self.in_sigma].reshape(-1, self.grid.dim)
        d = np.abs(coords[:, None, :] - sig[None, :, :])
        d = np.minimum(d, 1.0 - d)
        dist = np.sqrt((d * d).sum(axis=-1)).min(axis=1)
        return dist.reshape(self.grid.shape)


def degeneracy_set(prob: HJBProblem, grid: TorusGrid, tol: float | None = None) -> DegeneracyMask:
    """Mask the nodes where every A_theta vanishes up to ``tol``.

    Default tol is 1e-10 times the largest |A| entry seen anywhere on the grid.
    """
    X = grid.coordinates()
    worst = np.zeros(grid.shape)
    for theta in prob.controls.thetas:
        A = eval_diffusion(prob, theta, X)
        worst = np.maximum(worst, np.abs(A).max(axis=(-2, -1)))
    if tol is None:
        tol = 1e-10 * float(worst.max())
    elif not tol > 0:
        raise ModelError("tol must be positive")
    return DegeneracyMask(grid=grid, in_sigma=worst <= tol, tol=float(tol))


def _sample_points(dim: int, count: int, seed: int) -> np.ndarray:
    from scipy.stats import qmc

    eng = qmc.Halton(d=dim, scramble=True, seed=seed)
    return eng.random(count)


def _directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    ang = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def lipschitz_viscosity(
    prob: HJBProblem,
    grad_range: float,
    x_samples: int = 64,
    n_dirs: int = 64,
    seed: int = 0,
) -> float:
    """Sampled upper bound on sup_{theta, x, |p|<=grad_range} |grad_p H_theta|.

    Gradients come from central differences on a direction/radius ladder; the
    sampled maximum is inflated by 2% so the returned value dominates the true
    sup on the catalog Hamiltonians.  Used as the Lax-Friedrichs viscosity.
    """
    if not grad_range > 0:
        raise ModelError("grad_range must be positive")
    R = float(grad_range)
    xs = _sample_points(prob.dim, x_samples, seed)
    dirs = _directions(prob.dim, n_dirs)
    radii = np.unique(np.concatenate([
        np.linspace(R / 16.0, R, 16),
        np.arange(0.125, R, 0.125),
        [1e-3],
    ]))
    radii = radii[radii <= R + 1e-12]
    P = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, prob.dim)
    X = np.broadcast_to(xs[:, None, :], (xs.shape[0], P.shape[0], prob.dim)).reshape(-1, prob.dim)
    Pfull = np.broadcast_to(P[None, :, :], (xs.shape[0], P.shape[0], prob.dim)).reshape(-1, prob.dim)
    step = 1e-6 * max(1.0, R)
    worst = 0.0
    for theta in prob.controls.thetas:
        g2 = np.zeros(X.shape[0])
        for ax in range(prob.dim):
            dp = np.zeros(prob.dim)
            dp[ax] = step
            hi = eval_hamiltonian(prob, theta, X, Pfull + dp)
            lo = eval_hamiltonian(prob, theta, X, Pfull - dp)
            g2 += ((hi - lo) / (2 * step)) ** 2
        worst = max(worst, float(np.sqrt(g2.max())))
    return worst * 1.02
