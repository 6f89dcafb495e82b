"""Run configuration stored as JSON with units spelled out in the keys.

Lengths accept ``*_m`` or ``*_mm``, Young's modulus ``*_pa`` or ``*_gpa`` and
forces ``*_n``; everything is converted to SI on load. :func:`dump_config`
writes millimetres and GPa to mirror the calibration table.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .estimator import EstimatorConfig
from .rod import RodProperties
from .sensors import NoiseModel, SensorLayout

# converters to SI; dividing by 1000 keeps decimal inputs like -3.12 mm exact
_LENGTH = {"_m": lambda v: v, "_mm": lambda v: v / 1e3}
_MODULUS = {"_pa": lambda v: v, "_gpa": lambda v: v * 1e9}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    rod: RodProperties = field(default_factory=lambda: RodProperties(0.290, 1.118e-3, 1.397e-3, 67e9))
    layout: SensorLayout = field(default_factory=SensorLayout)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    location_bias: float = -3.12e-3
    simulation_q: int = 1000


def default_config() -> RunConfig:
    return RunConfig()


def _unit_value(section: dict, name: str, units: dict, default=None, where=""):
    hits = [(suffix, section[name + suffix]) for suffix in units if name + suffix in section]
    if len(hits) > 1:
        raise ConfigError(f"{where}{name}: give only one of {[name + s for s in units]}")
    if not hits:
        if default is None:
            raise ConfigError(f"{where}{name}: missing (expected one of {[name + s for s in units]})")
        return default
    suffix, value = hits[0]
    try:
        return units[suffix](float(value))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}{name}{suffix}: not a number: {value!r}") from None


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}unknown keys {sorted(unknown)}")


def _keys(names, units):
    return {n + s for n in names for s in units}


def config_from_dict(data: dict) -> RunConfig:
    base = default_config()
    _check_keys(data, {"rod", "sensor", "estimator", "noise", "calibration", "simulation"}, "")
    rod = data.get("rod", {})
    _check_keys(rod, _keys(("length", "d_in", "d_out"), _LENGTH) | _keys(("youngs_modulus",), _MODULUS), "rod: ")
    sen = data.get("sensor", {})
    _check_keys(sen, _keys(("spacing", "first_offset"), _LENGTH) | {"count"}, "sensor: ")
    est = data.get("estimator", {})
    _check_keys(est, {"q", "loss_threshold", "max_force_count", "magnitude_bound_n",
                      "multistart_locations", "model", "swap_node_weights", "max_evaluations"}
                | _keys(("min_separation",), _LENGTH), "estimator: ")
    noi = data.get("noise", {})
    _check_keys(noi, {"sigma_rel", "seed"}, "noise: ")
    cal = data.get("calibration", {})
    _check_keys(cal, _keys(("location_bias",), _LENGTH), "calibration: ")
    sim = data.get("simulation", {})
    _check_keys(sim, {"q"}, "simulation: ")

    try:
        r = base.rod
        props = RodProperties(
            _unit_value(rod, "length", _LENGTH, r.length, "rod."),
            _unit_value(rod, "d_in", _LENGTH, r.d_in, "rod."),
            _unit_value(rod, "d_out", _LENGTH, r.d_out, "rod."),
            _unit_value(rod, "youngs_modulus", _MODULUS, r.youngs_modulus, "rod."))
        layout = SensorLayout(
            _unit_value(sen, "spacing", _LENGTH, base.layout.spacing, "sensor."),
            _unit_value(sen, "first_offset", _LENGTH, base.layout.first_offset, "sensor."),
            int(sen.get("count", base.layout.count)))
        layout.check_fits(props.length)
        e = base.estimator
        estimator = replace(
            e,
            q=int(est.get("q", e.q)),
            loss_threshold=float(est.get("loss_threshold", e.loss_threshold)),
            max_force_count=int(est.get("max_force_count", e.max_force_count)),
            magnitude_bound=float(est.get("magnitude_bound_n", e.magnitude_bound)),
            min_separation=_unit_value(est, "min_separation", _LENGTH, e.min_separation, "estimator."),
            multistart_locations=int(est.get("multistart_locations", e.multistart_locations)),
            model=str(est.get("model", e.model)),
            swap_node_weights=bool(est.get("swap_node_weights", e.swap_node_weights)),
            max_evaluations=int(est.get("max_evaluations", e.max_evaluations)))
        noise = NoiseModel(float(noi.get("sigma_rel", base.noise.sigma_rel)), int(noi.get("seed", base.noise.seed)))
        bias = _unit_value(cal, "location_bias", _LENGTH, base.location_bias, "calibration.")
        sim_q = int(sim.get("q", base.simulation_q))
        if sim_q < 2:
            raise ValueError("simulation.q must be >= 2")
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None
    return RunConfig(props, layout, estimator, noise, bias, sim_q)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}:{err.lineno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    e = cfg.estimator
    return {
        "rod": {
            "length_mm": cfg.rod.length * 1e3,
            "d_in_mm": cfg.rod.d_in * 1e3,
            "d_out_mm": cfg.rod.d_out * 1e3,
            "youngs_modulus_gpa": cfg.rod.youngs_modulus / 1e9,
        },
        "sensor": {
            "spacing_mm": cfg.layout.spacing * 1e3,
            "first_offset_mm": cfg.layout.first_offset * 1e3,
            "count": cfg.layout.count,
        },
        "estimator": {
            "q": e.q,
            "loss_threshold": e.loss_threshold,
            "max_force_count": e.max_force_count,
            "magnitude_bound_n": e.magnitude_bound,
            "min_separation_mm": e.min_separation * 1e3,
            "multistart_locations": e.multistart_locations,
            "model": e.model,
            "swap_node_weights": e.swap_node_weights,
            "max_evaluations": e.max_evaluations,
        },
        "noise": {"sigma_rel": cfg.noise.sigma_rel, "seed": cfg.noise.seed},
        "calibration": {"location_bias_mm": cfg.location_bias * 1e3},
        "simulation": {"q": cfg.simulation_q},
    }


def dump_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
