"""Forward mechanics of a straight, circular, inextensible rod.

Two routes compute the same curvature field:

* :func:`integrate_curvature_backward` integrates the five-state local-frame
  model from the free tip to the clamp in one sweep (no iteration);
* :func:`solve_bvp_reference` solves the global-frame Cosserat boundary value
  problem by shooting on the base loads with Levenberg-Marquardt.

Sign convention: ``R' = R hat(u)`` and ``M = R K u``, so a tip force along +y
produces a negative ``u_x`` at the base.

Units are SI throughout (m, N, Pa).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import _kernels


class BVPConvergenceError(RuntimeError):
    """Shooting did not drive the tip residual below tolerance."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"shooting failed to converge: tip residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


# =================== DOMAIN TYPES ============================= #
@dataclass(frozen=True)
class RodProperties:
    """Geometry and material of a circular tube (SI units)."""
    length: float
    d_in: float
    d_out: float
    youngs_modulus: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if not 0 <= self.d_in < self.d_out:
            raise ValueError(f"need 0 <= d_in < d_out, got d_in={self.d_in}, d_out={self.d_out}")
        if not self.youngs_modulus > 0:
            raise ValueError(f"youngs_modulus must be positive, got {self.youngs_modulus}")

    @property
    def second_moment(self) -> float:
        return np.pi * (self.d_out ** 4 - self.d_in ** 4) / 64

    @property
    def stiffness(self) -> np.ndarray:
        """Diagonal of K_BT as an array ``[EI, EI, 2EI]``."""
        return np.array(bending_stiffness(self))

    def scaled(self, factor: float) -> "RodProperties":
        """Copy with Young's modulus multiplied by ``factor``."""
        return RodProperties(self.length, self.d_in, self.d_out, self.youngs_modulus * factor)


@dataclass(frozen=True)
class NodeGrid:
    """Uniform arc-length grid ``0 = loc_1 < ... < loc_q = L``."""
    length: float
    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"node count q must be an integer >= 2, got {self.q}")
        if not self.length > 0:
            raise ValueError(f"grid length must be positive, got {self.length}")
        object.__setattr__(self, "q", int(self.q))

    @property
    def locations(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.q)

    @property
    def spacing(self) -> float:
        return self.length / (self.q - 1)


def _as_node_array(values, q: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (q,):
        raise ValueError(f"{name} must have {q} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Bending curvatures (1/m) on a node grid. Torsion is identically zero."""
    grid: NodeGrid
    u_x: np.ndarray
    u_y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_x", _as_node_array(self.u_x, self.grid.q, "u_x"))
        object.__setattr__(self, "u_y", _as_node_array(self.u_y, self.grid.q, "u_y"))

    def sample(self, s) -> Tuple[np.ndarray, np.ndarray]:
        """Linearly interpolate ``(u_x, u_y)`` at arc lengths ``s``."""
        loc = self.grid.locations
        s = np.asarray(s, dtype=float)
        return np.interp(s, loc, self.u_x), np.interp(s, loc, self.u_y)

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u_x, self.u_y)


@dataclass(frozen=True, eq=False)
class DistributedLoad:
    """Local-frame force density (N/m) at every node."""
    grid: NodeGrid
    f_x: np.ndarray
    f_y: np.ndarray
    f_z: Optional[np.ndarray] = None

    def __post_init__(self):
        q = self.grid.q
        object.__setattr__(self, "f_x", _as_node_array(self.f_x, q, "f_x"))
        object.__setattr__(self, "f_y", _as_node_array(self.f_y, q, "f_y"))
        fz = np.zeros(q) if self.f_z is None else self.f_z
        object.__setattr__(self, "f_z", _as_node_array(fz, q, "f_z"))

    @classmethod
    def zeros(cls, grid: NodeGrid) -> "DistributedLoad":
        return cls(grid, np.zeros(grid.q), np.zeros(grid.q))

    def as_array(self) -> np.ndarray:
        return np.column_stack((self.f_x, self.f_y, self.f_z))


@dataclass(frozen=True, eq=False)
class TipLoad:
    """Force (N) and moment (N m) applied at the tip, in the tip frame."""
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("force", "moment"):
            v = np.array(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (3,):
                raise ValueError(f"tip {name} must be a 3-vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"tip {name} contains non-finite values")
            v.setflags(write=False)
            object.__setattr__(self, name, v)


@dataclass(frozen=True, eq=False)
class RodState:
    """Per-node configuration in the global (base) frame.

    ``internal_force``/``internal_moment``/``curvature`` are ``None`` when the
    state comes from pure shape reconstruction.
    """
    grid: NodeGrid
    positions: np.ndarray
    rotations: np.ndarray
    internal_force: Optional[np.ndarray] = None
    internal_moment: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None
    residual: float = 0.0
    iterations: int = 0

    @property
    def tip(self) -> np.ndarray:
        return self.positions[-1]

    def curvature_field(self) -> CurvatureField:
        if self.curvature is None:
            raise ValueError("state carries no curvature")
        return CurvatureField(self.grid, self.curvature[:, 0], self.curvature[:, 1])

    def sample_positions(self, s) -> np.ndarray:
        """Positions linearly interpolated at arc lengths ``s``; shape (len(s), 3)."""
        loc = self.grid.locations
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.column_stack([np.interp(s, loc, self.positions[:, i]) for i in range(3)])


# =================== OPERATIONS ============================= #
def bending_stiffness(props: RodProperties) -> Tuple[float, float, float]:
    """Return ``(K_BT,11, K_BT,22, K_BT,33) = (EI, EI, 2EI)`` in N m^2."""
    if props.d_in >= props.d_out:
        raise ValueError("d_in must be smaller than d_out")
    ei = props.youngs_modulus * props.second_moment
    return ei, ei, 2.0 * ei


def _check_grid(props: RodProperties, grid: NodeGrid):
    if not np.isclose(grid.length, props.length, rtol=1e-12, atol=0.0):
        raise ValueError(f"grid length {grid.length} does not match rod length {props.length}")


def integrate_curvature_backward(props: RodProperties, load: DistributedLoad,
                                 tip: Optional[TipLoad] = None, substeps: int = 1) -> CurvatureField:
    """Curvature from a single tip-to-base sweep of the local-frame model.

    Args:
        props: rod geometry and material.
        load: local-frame force density on the grid.
        tip: tip force; its moment must be zero (``u(L) = 0``).
        substeps: RK4 steps per grid interval (1 means step = grid spacing).

    Returns:
        CurvatureField on ``load.grid``.
    """
    _check_grid(props, load.grid)
    tip = TipLoad() if tip is None else tip
    if np.any(tip.moment != 0.0):
        raise ValueError("the local-frame sweep assumes zero tip moment")
    k1, k2, _ = bending_stiffness(props)
    u, _ = _kernels.integrate_local(
        load.f_x, load.f_y, load.f_z, tip.force[0], tip.force[1], tip.force[2],
        k1, k2, props.length, int(substeps))
    return CurvatureField(load.grid, u[:, 0], u[:, 1])


def reconstruct_shape(field: CurvatureField) -> RodState:
    """Integrate positions and frames from the clamped base for a curvature field."""
    if not (np.all(np.isfinite(field.u_x)) and np.all(np.isfinite(field.u_y))):
        raise ValueError("curvature contains non-finite entries")
    u = np.column_stack((field.u_x, field.u_y, np.zeros(field.grid.q)))
    P, Rs = _kernels.reconstruct(u, field.grid.length)
    return RodState(field.grid, P, Rs)


def solve_bvp_reference(props: RodProperties, load: DistributedLoad, tip: Optional[TipLoad] = None,
                        tol: float = 1e-12, max_iter: int = 200, substeps: int = 1) -> RodState:
    """Solve the global-frame Cosserat BVP by shooting.

    The six base unknowns ``N(0), M(0)`` start from the rigid-body statics of
    the undeformed rod and are refined by Levenberg-Marquardt until
    ``|[N(L) - R(L) f_tip, M(L) - R(L) T_tip]| < tol``. Loads are follower
    loads given in the local frame. If the direct solve stalls, the load is
    ramped up in quarters, each stage seeded from the previous one.

    With ``substeps > 1`` a coarse solve seeds the fine one.

    Raises:
        BVPConvergenceError: residual still above ``max(tol, 1e-10)``.
    """
    _check_grid(props, load.grid)
    tip = TipLoad() if tip is None else tip
    kdiag = np.array(bending_stiffness(props))
    dens = np.ascontiguousarray(load.as_array())
    tip_f = np.array(tip.force)
    tip_m = np.array(tip.moment)
    L = props.length
    accept = max(tol, 1e-10)

    def _solve(scale, x0, m):
        return _kernels.shoot(scale * dens, scale * tip_f, scale * tip_m, kdiag, L,
                              x0, tol, max_iter, m)

    x0 = _kernels.rigid_guess(dens, tip_f, tip_m, L)
    x, res, it, _ = _solve(1.0, x0, 1)
    if res >= accept:
        x = _kernels.rigid_guess(0.25 * dens, 0.25 * tip_f, 0.25 * tip_m, L)
        for scale in (0.25, 0.5, 0.75, 1.0):
            x, res, k, _ = _solve(scale, x, 1)
            it += k
    if substeps > 1:
        x, res, k, _ = _solve(1.0, x, int(substeps))
        it += k
    if res >= accept:
        raise BVPConvergenceError(res, it)

    _, _, _, _, P, Rs, Ns, Ms = _kernels.integrate_global(
        x[:3], x[3:], dens, kdiag, L, True, int(substeps))
    u = _kernels.local_curvature(Rs, Ms, kdiag)
    return RodState(load.grid, P, Rs, Ns, Ms, u, residual=float(res), iterations=int(it))
