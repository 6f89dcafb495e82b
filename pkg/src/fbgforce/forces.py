"""Point contact forces and their conversion to node force densities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from . import _kernels
from .rod import DistributedLoad, NodeGrid, TipLoad


class DegenerateForceVectorError(ValueError):
    """Force locations are not strictly increasing."""


@dataclass(frozen=True)
class PointForce:
    """Transverse point force ``(f_x, f_y)`` in N at arc length ``s`` in m."""
    s: float
    f_x: float
    f_y: float

    def __post_init__(self):
        for name in ("s", "f_x", "f_y"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.s < 0:
            raise ValueError(f"force location must be >= 0, got {self.s}")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.f_x, self.f_y)


@dataclass(frozen=True)
class ForceVector:
    """Ordered point forces, ``s^1 < s^2 < ... < s^h``. Empty means unloaded."""
    forces: Tuple[PointForce, ...] = ()

    def __post_init__(self):
        forces = tuple(self.forces)
        object.__setattr__(self, "forces", forces)
        for a, b in zip(forces, forces[1:]):
            if not b.s > a.s:
                raise DegenerateForceVectorError(
                    f"force locations must be strictly increasing, got {a.s} then {b.s}")

    @classmethod
    def of(cls, *triples: Sequence[float]) -> "ForceVector":
        """``ForceVector.of((0.2, 0.3, 0.0), ...)`` from (s, f_x, f_y) triples."""
        return cls(tuple(PointForce(*t) for t in triples))

    def __len__(self):
        return len(self.forces)

    def __iter__(self):
        return iter(self.forces)

    @property
    def h(self) -> int:
        return len(self.forces)

    @property
    def locations(self) -> np.ndarray:
        return np.array([f.s for f in self.forces], dtype=float)

    @property
    def components(self) -> np.ndarray:
        """(h, 2) array of ``(f_x, f_y)``."""
        return np.array([(f.f_x, f.f_y) for f in self.forces], dtype=float).reshape(-1, 2)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.hypot(*self.components.T) if self.h else np.zeros(0)

    def shifted(self, ds: float) -> "ForceVector":
        return ForceVector(tuple(PointForce(f.s + ds, f.f_x, f.f_y) for f in self.forces))

    def rotated(self, angle: float) -> "ForceVector":
        """Rotate every force about the rod axis by ``angle`` (rad)."""
        c, s = math.cos(angle), math.sin(angle)
        return ForceVector(tuple(
            PointForce(f.s, c * f.f_x - s * f.f_y, s * f.f_x + c * f.f_y) for f in self.forces))

    def scaled(self, factor: float) -> "ForceVector":
        return ForceVector(tuple(PointForce(f.s, factor * f.f_x, factor * f.f_y) for f in self.forces))


def pack_parameters(fv: ForceVector) -> np.ndarray:
    """Flatten to ``[s^1, f^1_x, f^1_y, ..., s^h, f^h_x, f^h_y]``."""
    return np.array([v for f in fv.forces for v in (f.s, f.f_x, f.f_y)], dtype=float)


def unpack_parameters(params: Iterable[float], h: int = None) -> ForceVector:
    params = np.asarray(list(params) if not isinstance(params, np.ndarray) else params, dtype=float)
    if params.ndim != 1 or params.size % 3:
        raise ValueError(f"parameter length must be a multiple of 3, got {params.size}")
    if h is not None and params.size != 3 * h:
        raise ValueError(f"expected {3 * h} parameters for h={h}, got {params.size}")
    return ForceVector(tuple(PointForce(*params[i:i + 3]) for i in range(0, params.size, 3)))


def _check_span(fv: ForceVector, grid: NodeGrid):
    for f in fv.forces:
        if not 0.0 <= f.s <= grid.length:
            raise ValueError(f"force location {f.s} outside [0, {grid.length}]")


def distribute_forces(fv: ForceVector, grid: NodeGrid,
                      swap_node_weights: bool = False) -> DistributedLoad:
    """Spread point forces linearly onto the two nodes bracketing each force.

    A force at ``s`` in ``[loc_{j-1}, loc_j]`` gives node ``j-1`` a density
    ``f (loc_j - s) / dx^2`` and node ``j`` a density ``f (s - loc_{j-1}) / dx^2``,
    so the trapezoid integral of the density returns the point force. End nodes
    own only half a cell and receive twice the density for the same reason.
    ``swap_node_weights`` swaps the two weights.

    Forces sitting exactly at the tip are left out; see :func:`tip_load`.
    """
    _check_span(fv, grid)
    s = fv.locations
    comp = fv.components
    dx, dy, _, _ = _kernels.distribute(s, comp[:, 0].copy(), comp[:, 1].copy(),
                                       grid.length, grid.q, swap_node_weights)
    return DistributedLoad(grid, dx, dy)


def tip_load(fv: ForceVector, grid: NodeGrid) -> TipLoad:
    """Sum of the forces applied exactly at the tip, as a tip boundary load."""
    _check_span(fv, grid)
    fx = sum(f.f_x for f in fv.forces if f.s >= grid.length)
    fy = sum(f.f_y for f in fv.forces if f.s >= grid.length)
    return TipLoad(np.array([fx, fy, 0.0]))


def loads(fv: ForceVector, grid: NodeGrid,
          swap_node_weights: bool = False) -> Tuple[DistributedLoad, TipLoad]:
    return distribute_forces(fv, grid, swap_node_weights), tip_load(fv, grid)


def trapezoid(values: np.ndarray, grid: NodeGrid) -> float:
    """Trapezoid-rule integral of node values over the grid."""
    w = np.full(grid.q, grid.spacing)
    w[[0, -1]] *= 0.5
    return float(np.dot(w, values))
