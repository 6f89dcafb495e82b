"""Synthetic FBG curvature readings and the measurement CSV format.

CSV layout: header ``s_m,u_x_per_m,u_y_per_m``, one row per grating, UTF-8,
LF line endings.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .estimator import MeasuredCurvature, model_curvature
from .forces import ForceVector
from .rod import NodeGrid, RodProperties

CSV_HEADER = ("s_m", "u_x_per_m", "u_y_per_m")


class MeasurementFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SensorLayout:
    """Evenly pitched gratings starting at ``first_offset`` from the clamp."""
    spacing: float = 0.020
    first_offset: float = 0.020
    count: int = 14

    def __post_init__(self):
        if not self.spacing > 0 or self.first_offset < 0 or self.count < 2:
            raise ValueError("need spacing > 0, first_offset >= 0 and count >= 2")

    @property
    def locations(self) -> np.ndarray:
        return self.first_offset + self.spacing * np.arange(self.count)

    @property
    def last(self) -> float:
        return self.first_offset + (self.count - 1) * self.spacing

    def check_fits(self, length: float):
        if self.last > length + 1e-12:
            raise ValueError(f"last grating at {self.last:.4f} m exceeds rod length {length:.4f} m")


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise with std ``sigma_rel * max|u|`` over the gratings."""
    sigma_rel: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be >= 0")


def simulate_fbg(fv: ForceVector, props: RodProperties, layout: SensorLayout = SensorLayout(),
                 noise: NoiseModel = NoiseModel(), q: int = 250,
                 swap_node_weights: bool = False) -> MeasuredCurvature:
    layout.check_fits(props.length)
    field = model_curvature(fv, props, NodeGrid(props.length, q), swap_node_weights)
    s = layout.locations
    ux, uy = field.sample(s)
    if noise.sigma_rel > 0:
        scale = noise.sigma_rel * float(np.max(np.hypot(ux, uy)))
        rng = np.random.default_rng(noise.seed)
        ux = ux + rng.normal(0.0, scale, ux.shape)
        uy = uy + rng.normal(0.0, scale, uy.shape)
    return MeasuredCurvature(s, ux, uy)


def write_measurement(path, m: MeasuredCurvature):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(m.grating_locations, m.u_x, m.u_y):
            w.writerow([repr(float(v)) for v in row])


def read_measurement(path) -> MeasuredCurvature:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MeasurementFormatError(f"{path}:1: empty file, expected header {','.join(CSV_HEADER)}")
    header = tuple(c.strip() for c in rows[0])
    if header != CSV_HEADER:
        raise MeasurementFormatError(f"{path}:1: bad header {','.join(header)!r}, expected {','.join(CSV_HEADER)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise MeasurementFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise MeasurementFormatError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
        if not np.all(np.isfinite(vals)):
            raise MeasurementFormatError(f"{path}:{lineno}: non-finite value in {row!r}")
        if data and vals[0] <= data[-1][1][0]:
            raise MeasurementFormatError(
                f"{path}:{lineno}: grating location {vals[0]} not greater than line {data[-1][0]}")
        data.append((lineno, vals))
    if not data:
        raise MeasurementFormatError(f"{path}:{len(rows) + 1}: no data rows after the header")
    arr = np.array([v for _, v in data])
    try:
        return MeasuredCurvature(arr[:, 0], arr[:, 1], arr[:, 2])
    except ValueError as err:
        raise MeasurementFormatError(f"{path}: {err}") from None
