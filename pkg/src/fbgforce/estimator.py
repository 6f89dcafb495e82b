"""Point-force estimation from grating curvature readings.

The unknown is the packed force vector ``[s^1, f^1_x, f^1_y, ...]``. For a
fixed force count ``h`` the curvature residual at the gratings is minimised
with a projected Levenberg-Marquardt iteration (forward-difference Jacobian)
inside the feasible set

    min_separation <= s^1,  s^{i+1} - s^i >= min_separation,  s^h <= L,
    |f| <= magnitude_bound  (per component),

restarted from several location seeds. :func:`select_force_count` grows ``h``
until the loss drops below the threshold.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .forces import ForceVector, PointForce, distribute_forces, loads, pack_parameters, unpack_parameters
from .rod import (CurvatureField, NodeGrid, RodProperties, bending_stiffness,
                  integrate_curvature_backward, reconstruct_shape)

log = logging.getLogger(__name__)

MODELS = ("simplified", "bvp_lm")


class CalibrationError(RuntimeError):
    pass


# =================== DOMAIN TYPES ============================= #
@dataclass(frozen=True, eq=False)
class MeasuredCurvature:
    """Signed curvature components (1/m) read at ``G`` grating arc lengths (m)."""
    grating_locations: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray

    def __post_init__(self):
        s = np.array(self.grating_locations, dtype=float).reshape(-1)
        ux = np.array(self.u_x, dtype=float).reshape(-1)
        uy = np.array(self.u_y, dtype=float).reshape(-1)
        if s.size < 2:
            raise ValueError(f"need at least 2 gratings, got {s.size}")
        if ux.shape != s.shape or uy.shape != s.shape:
            raise ValueError("curvature arrays must match the grating count")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
            raise ValueError("measurement contains non-finite values")
        if np.any(np.diff(s) <= 0):
            raise ValueError("grating locations must be strictly increasing")
        if s[0] < 0:
            raise ValueError("grating locations must be non-negative")
        for name, arr in (("grating_locations", s), ("u_x", ux), ("u_y", uy)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def count(self) -> int:
        return self.grating_locations.size

    def check_fits(self, length: float):
        if self.grating_locations[-1] > length * (1 + 1e-12):
            raise ValueError(
                f"grating at {self.grating_locations[-1]} m lies beyond the rod length {length} m")

    def rotated(self, angle: float) -> "MeasuredCurvature":
        c, s = math.cos(angle), math.sin(angle)
        return MeasuredCurvature(self.grating_locations, c * self.u_x - s * self.u_y,
                                 s * self.u_x + c * self.u_y)


@dataclass(frozen=True)
class EstimatorConfig:
    q: int = 250
    loss_threshold: float = 3.0
    max_force_count: int = 3
    magnitude_bound: float = 2.5
    min_separation: float = 0.02
    multistart_locations: int = 8
    fd_step: float = 1e-6
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_evaluations: int = 2000
    model: str = "simplified"
    swap_node_weights: bool = False
    bvp_tol: float = 1e-10
    bvp_max_iter: int = 200

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError("q must be an integer >= 2")
        if not self.loss_threshold > 0:
            raise ValueError("loss_threshold must be positive")
        if self.max_force_count < 1:
            raise ValueError("max_force_count must be >= 1")
        if not (self.magnitude_bound > 0 and self.min_separation > 0):
            raise ValueError("bounds must be positive")
        if self.multistart_locations < 1:
            raise ValueError("multistart_locations must be >= 1")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")


@dataclass(frozen=True)
class EstimationResult:
    forces: ForceVector
    loss: float
    h_selected: int
    evaluations: int
    elapsed: float
    no_contact: bool = False
    threshold_met: Optional[bool] = None
    seed_losses: Tuple[float, ...] = ()

    def estimated_locations(self, location_bias: float = 0.0) -> np.ndarray:
        """Calibrated locations ``s_est = s_cal + s_bias``."""
        return self.forces.locations + location_bias


# =================== FORWARD MODEL ============================= #
def model_curvature(fv: ForceVector, props: RodProperties, grid: NodeGrid,
                    swap_node_weights: bool = False, substeps: int = 1) -> CurvatureField:
    """Curvature field produced by point forces (simplified local model)."""
    dist, tip = loads(fv, grid, swap_node_weights)
    return integrate_curvature_backward(props, dist, tip, substeps=substeps)


def curvature_loss(fv: ForceVector, measured: MeasuredCurvature, props: RodProperties,
                   grid: NodeGrid, swap_node_weights: bool = False) -> float:
    """Sum of squared curvature differences over both components at every grating."""
    field = model_curvature(fv, props, grid, swap_node_weights)
    ux, uy = field.sample(measured.grating_locations)
    return float(np.sum((ux - measured.u_x) ** 2) + np.sum((uy - measured.u_y) ** 2))


def shape_loss(fv: ForceVector, measured_shape, arc_lengths, props: RodProperties,
               grid: NodeGrid, swap_node_weights: bool = False) -> float:
    """Sum of squared position differences (m^2) at the given arc lengths."""
    measured_shape = np.asarray(measured_shape, dtype=float).reshape(-1, 3)
    state = reconstruct_shape(model_curvature(fv, props, grid, swap_node_weights))
    pts = state.sample_positions(arc_lengths)
    if pts.shape != measured_shape.shape:
        raise ValueError("measured shape must have one point per arc length")
    return float(np.sum((pts - measured_shape) ** 2))


# =================== OPTIMISER ============================= #
def _isotonic(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: closest non-decreasing sequence."""
    blocks: List[List[float]] = []  # [mean, weight]
    for v in y:
        blocks.append([float(v), 1.0])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2 = blocks.pop()
            m1, w1 = blocks[-1]
            blocks[-1] = [(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2]
    return np.concatenate([np.full(int(w), m) for m, w in blocks])


class _FeasibleSet:
    """Box on magnitudes plus ordered, separated locations in ``[lo, hi]``."""

    def __init__(self, h: int, lo: float, hi: float, sep: float, fmax: float):
        if lo + (h - 1) * sep > hi + 1e-15:
            raise ValueError(f"{h} forces separated by {sep} m do not fit in [{lo}, {hi}]")
        self.h, self.lo, self.hi, self.sep, self.fmax = h, lo, hi, sep, fmax
        self._offset = sep * np.arange(h)

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float)
        # s_i - i*sep must be non-decreasing and inside [lo, hi - (h-1)*sep]
        t = _isotonic(x[0::3] - self._offset)
        t = np.clip(t, self.lo, self.hi - (self.h - 1) * self.sep)
        x[0::3] = t + self._offset
        x[1::3] = np.clip(x[1::3], -self.fmax, self.fmax)
        x[2::3] = np.clip(x[2::3], -self.fmax, self.fmax)
        return x


@dataclass
class _LMOutcome:
    x: np.ndarray
    cost: float
    evaluations: int


def _projected_lm(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, feasible: _FeasibleSet,
                  fd_step: float, xtol: float, ftol: float, max_evals: int) -> _LMOutcome:
    x = feasible.project(x0)
    r = fun(x)
    cost = float(r @ r)
    evals = 1
    lam = 1e-3
    n = x.size
    while evals < max_evals and cost > 1e-28:
        J = np.empty((r.size, n))
        for j in range(n):
            step = fd_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += step
            if feasible.project(xp)[j] != xp[j]:
                step = -step
                xp[j] = x[j] + step
            J[:, j] = (fun(xp) - r) / step
        evals += n
        A = J.T @ J
        g = J.T @ r
        d = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        accepted = False
        while lam < 1e12 and evals < max_evals:
            try:
                dx = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            xn = feasible.project(x + dx)
            rn = fun(xn)
            evals += 1
            cn = float(rn @ rn)
            if cn < cost:
                moved = np.linalg.norm(xn - x)
                small_step = moved <= xtol * (xtol + np.linalg.norm(x))
                small_gain = cost - cn <= ftol * cost
                x, r, cost = xn, rn, cn
                lam = max(lam / 3.0, 1e-9)
                accepted = True
                break
            lam *= 4.0
        if not accepted or small_step or small_gain:
            break
    return _LMOutcome(x, cost, evals)


# =================== SEEDING ============================= #
def _kink_locations(measured: MeasuredCurvature, length: float) -> List[Tuple[float, float]]:
    """Candidate force sites from slope changes of the measured curvature.

    Returns ``(location, score)`` pairs sorted by decreasing score. A kink
    split over two neighbouring gratings is located by the weighted average
    of the two grating positions.
    """
    s = measured.grating_locations
    ux, uy = measured.u_x, measured.u_y
    if s[-1] < length:
        s = np.append(s, length)
        ux = np.append(ux, 0.0)
        uy = np.append(uy, 0.0)
    slope_x = np.diff(ux) / np.diff(s)
    slope_y = np.diff(uy) / np.diff(s)
    jump = np.zeros((s.size, 2))
    jump[1:-1, 0] = slope_x[1:] - slope_x[:-1]
    jump[1:-1, 1] = slope_y[1:] - slope_y[:-1]
    # beyond the outermost force the rod is straight; the last non-zero
    # curvature point also carries a kink
    score = np.hypot(jump[:, 0], jump[:, 1])
    out = []
    for k in np.argsort(-score, kind="stable"):
        if score[k] <= 0:
            break
        loc = s[k]
        nb = [j for j in (k - 1, k + 1) if 0 <= j < s.size and score[j] > 0
              and np.dot(jump[j], jump[k]) > 0]
        if nb:
            j = max(nb, key=lambda j: score[j])
            loc = (score[k] * s[k] + score[j] * s[j]) / (score[k] + score[j])
        out.append((float(loc), float(score[k])))
    return out


def _linear_magnitudes(locs: np.ndarray, measured: MeasuredCurvature, ei: float,
                       fmax: float) -> np.ndarray:
    """Small-deflection least-squares magnitudes for fixed locations.

    Returns (h, 2) components; the lever arm basis is ``(s - sigma)_+ / EI``.
    """
    sg = measured.grating_locations
    B = np.clip(locs[None, :] - sg[:, None], 0.0, None) / ei
    # u_x = -sum f_y B, u_y = sum f_x B
    fy, *_ = np.linalg.lstsq(B, -measured.u_x, rcond=None)
    fx, *_ = np.linalg.lstsq(B, measured.u_y, rcond=None)
    return np.clip(np.column_stack((fx, fy)), -fmax, fmax)


def _seed_location_sets(measured: MeasuredCurvature, h: int, feasible: _FeasibleSet,
                        count: int, pitch: float) -> List[np.ndarray]:
    kinks = [loc for loc, _ in _kink_locations(measured, feasible.hi)]
    lo, hi, sep = feasible.lo, feasible.hi, feasible.sep

    def spaced(cands):
        picked: List[float] = []
        for c in cands:
            if all(abs(c - p) >= sep for p in picked):
                picked.append(c)
            if len(picked) == h:
                break
        return picked

    sets: List[np.ndarray] = []

    def add(locs):
        locs = np.sort(np.asarray(locs, dtype=float))
        x = np.zeros(3 * h)
        x[0::3] = locs
        locs = feasible.project(x)[0::3]
        if not any(np.allclose(locs, o, atol=1e-9) for o in sets):
            sets.append(locs)

    base = spaced(kinks)
    if base:
        fill = list(base)
        k = 0
        while len(fill) < h:
            # pad with uniformly spread sites
            fill = spaced(fill + list(np.linspace(lo, hi, h + 2 + k)[1:-1]))
            k += 1
        add(fill)
        for shift in (-0.5, 0.5, -0.25, 0.25):
            add(np.array(fill) + shift * pitch)
    k = 0
    while len(sets) < count:
        frac = (np.arange(h) + 0.5 + 0.5 * ((k % 3) - 1) / 3) / h
        add(lo + frac * (hi - lo))
        k += 1
        if k > 4 * count:
            break
    return sets[:count]


# =================== ESTIMATION ============================= #
def _objective(measured: MeasuredCurvature, props: RodProperties, cfg: EstimatorConfig):
    sg = np.ascontiguousarray(measured.grating_locations)
    mx = np.ascontiguousarray(measured.u_x)
    my = np.ascontiguousarray(measured.u_y)
    L = props.length
    kd = np.array(bending_stiffness(props))
    q = int(cfg.q)
    literal = bool(cfg.swap_node_weights)
    if cfg.model == "simplified":
        def fun(x):
            return _kernels.residuals_simplified(x, sg, mx, my, L, q, kd[0], kd[1], literal)
    else:
        tol, it = float(cfg.bvp_tol), int(cfg.bvp_max_iter)

        def fun(x):
            return _kernels.residuals_bvp(x, sg, mx, my, L, q, kd, literal, tol, it)
    return fun


def _no_contact(measured: MeasuredCurvature, loss: float, evals: int, t0: float) -> EstimationResult:
    return EstimationResult(ForceVector(), loss, 0, evals, time.perf_counter() - t0, no_contact=True)


def estimate_forces(measured: MeasuredCurvature, h: int, props: RodProperties,
                    cfg: EstimatorConfig = EstimatorConfig(),
                    extra_seeds: Sequence[ForceVector] = ()) -> EstimationResult:
    """Best-of-multistart least-squares fit of ``h`` point forces.

    Args:
        measured: grating curvature readings.
        h: number of point forces to fit (>= 1).
        props: rod properties used by the forward model.
        cfg: estimator settings; ``cfg.model`` picks the simplified sweep or
            the shooting BVP as forward model.
        extra_seeds: additional full starting points, tried after the
            location seeds (used for nested force-count searches).

    Returns:
        EstimationResult; ``no_contact`` is set when the readings are all zero
        or no start improves on the unloaded rod.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    t0 = time.perf_counter()
    measured.check_fits(props.length)
    zero_loss = float(np.sum(measured.u_x ** 2) + np.sum(measured.u_y ** 2))
    if zero_loss == 0.0:
        return _no_contact(measured, 0.0, 0, t0)

    feasible = _FeasibleSet(h, cfg.min_separation, props.length, cfg.min_separation,
                            cfg.magnitude_bound)
    fun = _objective(measured, props, cfg)
    ei = bending_stiffness(props)[0]
    pitch = float(np.median(np.diff(measured.grating_locations)))

    starts: List[np.ndarray] = []
    for locs in _seed_location_sets(measured, h, feasible, cfg.multistart_locations, pitch):
        x = np.zeros(3 * h)
        x[0::3] = locs
        comps = _linear_magnitudes(locs, measured, ei, cfg.magnitude_bound)
        x[1::3], x[2::3] = comps[:, 0], comps[:, 1]
        starts.append(x)
    for fv in extra_seeds:
        if fv.h == h:
            starts.append(pack_parameters(fv))

    evals = 0
    best: Optional[Tuple[float, int, np.ndarray]] = None
    seed_losses = []
    for idx, x0 in enumerate(starts):
        out = _projected_lm(fun, x0, feasible, cfg.fd_step, cfg.xtol, cfg.ftol, cfg.max_evaluations)
        evals += out.evaluations
        seed_losses.append(out.cost)
        if best is None or (out.cost, idx) < (best[0], best[1]):
            best = (out.cost, idx, out.x)

    loss, _, x = best
    if not loss < zero_loss:
        return _no_contact(measured, zero_loss, evals, t0)
    return EstimationResult(unpack_parameters(x, h), loss, h, evals, time.perf_counter() - t0,
                            seed_losses=tuple(seed_losses))


def _pad_with_zero_force(fv: ForceVector, lo: float, hi: float, sep: float) -> Optional[ForceVector]:
    """Insert a zero-magnitude force in the widest feasible gap."""
    s = list(fv.locations)
    edges = [lo - sep] + s + [hi + sep]
    best = None
    for a, b in zip(edges, edges[1:]):
        gap = b - a
        if gap >= 2 * sep and (best is None or gap > best[0]):
            best = (gap, min(max(0.5 * (a + b), lo), hi))
    if best is None:
        return None
    forces = list(fv.forces) + [PointForce(best[1], 0.0, 0.0)]
    return ForceVector(tuple(sorted(forces, key=lambda f: f.s)))


def force_count_sweep(measured: MeasuredCurvature, props: RodProperties,
                      cfg: EstimatorConfig = EstimatorConfig(), h_max: Optional[int] = None,
                      stop_below_threshold: bool = False) -> List[EstimationResult]:
    """Fit ``h = 1, 2, ...`` with each optimum (padded by a zero force) seeding the next."""
    h_max = cfg.max_force_count if h_max is None else h_max
    results: List[EstimationResult] = []
    prev: Optional[ForceVector] = None
    for h in range(1, h_max + 1):
        seeds = []
        if prev is not None and prev.h == h - 1:
            padded = _pad_with_zero_force(prev, cfg.min_separation, props.length, cfg.min_separation)
            if padded is not None:
                seeds.append(padded)
        res = estimate_forces(measured, h, props, cfg, extra_seeds=seeds)
        results.append(res)
        if res.no_contact:
            break
        prev = res.forces
        if stop_below_threshold and res.loss < cfg.loss_threshold:
            break
    return results


def select_force_count(measured: MeasuredCurvature, props: RodProperties,
                       cfg: EstimatorConfig = EstimatorConfig()) -> EstimationResult:
    """Smallest ``h`` whose best-fit loss drops below ``cfg.loss_threshold``."""
    t0 = time.perf_counter()
    results = force_count_sweep(measured, props, cfg, stop_below_threshold=True)
    evals = sum(r.evaluations for r in results)
    last = results[-1]
    if last.no_contact:
        return replace(last, evaluations=evals, elapsed=time.perf_counter() - t0)
    if last.loss < cfg.loss_threshold:
        return replace(last, evaluations=evals, elapsed=time.perf_counter() - t0, threshold_met=True)
    best = min(results, key=lambda r: (r.loss, r.h_selected))
    return replace(best, evaluations=evals, elapsed=time.perf_counter() - t0, threshold_met=False)


# =================== CALIBRATION ============================= #
def calibrate_location_bias(cases: Sequence[Tuple[MeasuredCurvature, float]], props: RodProperties,
                            cfg: EstimatorConfig = EstimatorConfig()) -> float:
    """Mean of ``true - estimated`` location over single-force cases (m)."""
    offsets = []
    for i, (measured, s_true) in enumerate(cases):
        try:
            res = estimate_forces(measured, 1, props, cfg)
        except (ValueError, RuntimeError) as err:
            warnings.warn(f"calibration case {i} excluded: {err}")
            continue
        if res.no_contact:
            warnings.warn(f"calibration case {i} excluded: no contact detected")
            continue
        offsets.append(s_true - res.forces.locations[0])
    if not offsets:
        raise CalibrationError("every location calibration case failed")
    return float(np.mean(offsets))


def calibrate_stiffness(cases: Sequence[Tuple[MeasuredCurvature, float]], props: RodProperties,
                        cfg: EstimatorConfig = EstimatorConfig(),
                        bracket: Tuple[float, float] = (0.5, 2.0)) -> float:
    """Scale on Young's modulus that best matches known force magnitudes.

    Minimises ``sum (|f_est| - |f_true|)^2`` over single-force cases with a
    bounded scalar search. Warns when locations move by more than one node
    spacing between the nominal and the calibrated stiffness.

    Raises:
        CalibrationError: the optimum sits on the bracket boundary.
    """
    if not cases:
        raise CalibrationError("no stiffness calibration cases")
    fits = {}

    def fit(scale):
        if scale not in fits:
            fits[scale] = [estimate_forces(m, 1, props.scaled(scale), cfg) for m, _ in cases]
        return fits[scale]

    def objective(scale):
        return sum((r.forces.magnitudes.sum() - f) ** 2 for r, (_, f) in zip(fit(scale), cases))

    lo, hi = bracket
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-5})
    scale = float(res.x)
    if min(scale - lo, hi - scale) < 1e-3 * (hi - lo):
        raise CalibrationError(f"stiffness scale {scale:.4f} hit the bracket {bracket}")
    dx = props.length / (cfg.q - 1)
    drift = max(abs(a.forces.locations[0] - b.forces.locations[0])
                for a, b in zip(fit(1.0), fit(scale)) if a.forces.h and b.forces.h)
    if drift >= dx:
        warnings.warn(f"location estimates moved {drift * 1e3:.2f} mm after stiffness calibration")
    return scale
