"""Uniform periodic grids on the flat torus and their finite-difference stencils.

Everything downstream (problems, scheme, solver, diagnostics) works on a
uniform lattice over [0,1)^dim with spacing h = 1/n per axis and periodic
index wrap.  Stencils are restricted to axis and (in 2D) diagonal lattice
directions so that second differences stay monotone without interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridError",
    "TorusGrid",
    "Field",
    "LatticeDirection",
    "make_grid",
    "supported_directions",
    "shifted_values",
    "one_sided_gradients",
    "directional_second_difference",
    "oscillation",
    "cyclic_shift",
    "discrete_lipschitz",
]


class GridError(ValueError):
    """Invalid grid construction or stencil arguments."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform lattice on [0,1)^dim: node coordinates x_i = i*h, indices wrap mod n."""

    dim: int
    n_per_axis: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis**self.dim

    def coordinates(self) -> np.ndarray:
        """Node coordinates as an array of shape ``grid.shape + (dim,)``."""
        axis = np.arange(self.n_per_axis) * self.h
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)


def make_grid(dim: int, n_per_axis: int) -> TorusGrid:
    if dim not in (1, 2):
        raise GridError(f"unsupported dimension {dim}; only 1 and 2 are supported")
    if int(n_per_axis) < 8:
        raise GridError(f"n_per_axis must be >= 8, got {n_per_axis}")
    return TorusGrid(dim=int(dim), n_per_axis=int(n_per_axis))


@dataclass(frozen=True)
class LatticeDirection:
    """Integer stencil direction with components in {-1, 0, 1}, nonzero."""

    e: tuple[int, ...]

    def __post_init__(self):
        e = tuple(int(c) for c in self.e)
        object.__setattr__(self, "e", e)
        if not e or all(c == 0 for c in e):
            raise GridError(f"lattice direction must be nonzero, got {e}")
        if any(c not in (-1, 0, 1) for c in e):
            raise GridError(f"direction components must lie in {{-1,0,1}}, got {e}")

    @property
    def dim(self) -> int:
        return len(self.e)

    @property
    def norm_sq(self) -> int:
        return sum(c * c for c in self.e)


_SUPPORTED = {
    1: ((1,), (-1,)),
    2: ((1, 0), (0, 1), (1, 1), (1, -1), (-1, 0), (0, -1), (-1, -1), (-1, 1)),
}


def supported_directions(dim: int) -> tuple[LatticeDirection, ...]:
    """Axis and, in 2D, diagonal directions usable by the monotone stencils."""
    if dim not in _SUPPORTED:
        raise GridError(f"unsupported dimension {dim}")
    return tuple(LatticeDirection(e) for e in _SUPPORTED[dim])


@dataclass(frozen=True)
class Field:
    """Real values on the nodes of a TorusGrid.  Immutable once constructed."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.isfinite(v).all():
            raise GridError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _require_same_grid(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._require_same_grid(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._require_same_grid(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - float(other))

    def __mul__(self, scalar):
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def _normalize_node(node, grid: TorusGrid) -> tuple[int, ...]:
    if np.isscalar(node):
        node = (int(node),)
    idx = tuple(int(i) % grid.n_per_axis for i in node)
    if len(idx) != grid.dim:
        raise GridError(f"node index {node} has wrong arity for dim={grid.dim}")
    return idx


def shifted_values(values: np.ndarray, e: tuple[int, ...]) -> np.ndarray:
    """Array of f(x + h*e) for every node x, with periodic wrap."""
    return np.roll(values, tuple(-c for c in e), axis=tuple(range(values.ndim)))


def one_sided_gradients(f: Field, node) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward difference quotients at one node, one entry per axis."""
    idx = _normalize_node(node, f.grid)
    n, h = f.grid.n_per_axis, f.grid.h
    v = f.values
    p_minus = np.empty(f.grid.dim)
    p_plus = np.empty(f.grid.dim)
    for ax in range(f.grid.dim):
        up = list(idx)
        up[ax] = (idx[ax] + 1) % n
        dn = list(idx)
        dn[ax] = (idx[ax] - 1) % n
        p_minus[ax] = (v[idx] - v[tuple(dn)]) / h
        p_plus[ax] = (v[tuple(up)] - v[idx]) / h
    return p_minus, p_plus


def directional_second_difference(f: Field, node, e: LatticeDirection) -> float:
    """Second difference along ``e`` normalized to approximate the second
    derivative along the unit vector e/|e|."""
    if e.e not in _SUPPORTED[f.grid.dim]:
        raise GridError(f"direction {e.e} is not supported in dim={f.grid.dim}")
    idx = _normalize_node(node, f.grid)
    n, h = f.grid.n_per_axis, f.grid.h
    up = tuple((i + c) % n for i, c in zip(idx, e.e))
    dn = tuple((i - c) % n for i, c in zip(idx, e.e))
    v = f.values
    return (v[up] - 2.0 * v[idx] + v[dn]) / (h * h * e.norm_sq)


def oscillation(f: Field) -> float:
    """max over nodes minus min over nodes; always >= 0."""
    return float(f.values.max() - f.values.min())


def cyclic_shift(f: Field, k) -> Field:
    """Shift the field values cyclically by k nodes (one offset per axis)."""
    if np.isscalar(k):
        k = (int(k),) * f.grid.dim
    return Field(f.grid, np.roll(f.values, tuple(int(c) for c in k), axis=tuple(range(f.grid.dim))))


def discrete_lipschitz(f: Field) -> float:
    """Sup over axes and nodes of the one-sided difference quotients."""
    worst = 0.0
    for ax in range(f.grid.dim):
        d = np.abs(np.roll(f.values, -1, axis=ax) - f.values).max() / f.grid.h
        worst = max(worst, float(d))
    return worst
