"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 data or validation error, 3 the
selected force count did not reach the loss threshold (report still written).

The estimate report is JSON (schema ``fbgforce.estimate/1``)::

    {"schema", "input", "model", "q", "h", "threshold_met", "no_contact",
     "loss", "loss_threshold", "location_bias_m",
     "forces": [{"s_est_m", "s_cal_m", "f_x_N", "f_y_N", "magnitude_N"}],
     "evaluations", "timing": {"elapsed_s"}}

Everything except ``timing`` is a deterministic function of the inputs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import replace

from . import bench
from .config import ConfigError, RunConfig, config_to_dict, default_config, dump_config, load_config
from .estimator import (CalibrationError, EstimatorConfig, calibrate_location_bias,
                        calibrate_stiffness, estimate_forces, select_force_count)
from .forces import ForceVector
from .rod import BVPConvergenceError, RodProperties
from .sensors import MeasurementFormatError, NoiseModel, read_measurement, simulate_fbg, write_measurement

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_THRESHOLD = 0, 1, 2, 3
REPORT_SCHEMA = "fbgforce.estimate/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _forces_from_args(args, required=True) -> ForceVector:
    triples = [(s * 1e-3, fx, fy) for s, fx, fy in (args.force_mm or [])]
    triples += [tuple(t) for t in (args.force_m or [])]
    if not triples:
        if required:
            raise UsageError("give at least one --force-mm S FX FY or --force-m S FX FY")
        return ForceVector()
    return ForceVector.of(*sorted(triples))


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.swap_node_weights:
        cfg = replace(cfg, estimator=replace(cfg.estimator, swap_node_weights=True))
    return cfg


def _estimator(cfg: RunConfig, args) -> EstimatorConfig:
    est = cfg.estimator
    if getattr(args, "q", None) is not None:
        est = replace(est, q=args.q)
    if getattr(args, "model", None) is not None:
        est = replace(est, model=args.model)
    return est


# =================== SUBCOMMANDS ============================= #
def cmd_simulate(args) -> int:
    cfg = _load(args)
    fv = _forces_from_args(args)
    noise = NoiseModel(cfg.noise.sigma_rel if args.sigma_rel is None else args.sigma_rel,
                       cfg.noise.seed if args.seed is None else args.seed)
    q = cfg.simulation_q if args.q is None else args.q
    meas = simulate_fbg(fv, cfg.rod, cfg.layout, noise, q=q,
                        swap_node_weights=cfg.estimator.swap_node_weights)
    write_measurement(args.out, meas)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load(args)
    est = _estimator(cfg, args)
    meas = read_measurement(args.input)
    if args.h is not None:
        res = estimate_forces(meas, args.h, cfg.rod, est)
        res = replace(res, threshold_met=bool(res.loss < est.loss_threshold))
    else:
        res = select_force_count(meas, cfg.rod, est)
    s_est = res.estimated_locations(cfg.location_bias)
    forces = [{"s_est_m": float(se), "s_cal_m": f.s, "f_x_N": f.f_x, "f_y_N": f.f_y,
               "magnitude_N": f.magnitude} for se, f in zip(s_est, res.forces)]
    report = {
        "schema": REPORT_SCHEMA,
        "input": os.path.basename(args.input),
        "model": est.model,
        "q": est.q,
        "h": res.h_selected,
        "threshold_met": res.threshold_met if not res.no_contact else True,
        "no_contact": res.no_contact,
        "loss": res.loss,
        "loss_threshold": est.loss_threshold,
        "location_bias_m": cfg.location_bias,
        "forces": forces,
        "evaluations": res.evaluations,
        "timing": {"elapsed_s": res.elapsed},
    }
    _write_json(args.out, report)
    return EXIT_OK if report["threshold_met"] else EXIT_THRESHOLD


def _length_field(entry: dict, name: str, where: str):
    if name + "_m" in entry and name + "_mm" in entry:
        raise ConfigError(f"{where}: give only one of {name}_m, {name}_mm")
    if name + "_m" in entry:
        return float(entry[name + "_m"])
    if name + "_mm" in entry:
        return float(entry[name + "_mm"]) * 1e-3
    return None


def _read_cases(path):
    """Cases manifest: ``{"cases": [{"measurement", "location_mm"|"location_m", "magnitude_n"}]}``.

    Measurement paths are relative to the manifest. A case contributes to the
    location calibration when it has a location and to the stiffness
    calibration when it has a magnitude.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}:{err.lineno}: {err.msg}") from None
    entries = data.get("cases") if isinstance(data, dict) else None
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: expected a non-empty \"cases\" list")
    base = os.path.dirname(os.path.abspath(path))
    loc_cases, mag_cases = [], []
    for i, entry in enumerate(entries):
        where = f"{path}: case {i}"
        if not isinstance(entry, dict) or "measurement" not in entry:
            raise ConfigError(f"{where}: missing \"measurement\"")
        meas = read_measurement(os.path.join(base, entry["measurement"]))
        s = _length_field(entry, "location", where)
        if s is not None:
            loc_cases.append((meas, s))
        if "magnitude_n" in entry:
            mag_cases.append((meas, float(entry["magnitude_n"])))
    return loc_cases, mag_cases


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    est = _estimator(cfg, args)
    loc_cases, mag_cases = _read_cases(args.cases)
    rod, bias = cfg.rod, cfg.location_bias
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if mag_cases:
            scale = calibrate_stiffness(mag_cases, rod, est)
            rod = RodProperties(rod.length, rod.d_in, rod.d_out, rod.youngs_modulus * scale)
        if loc_cases:
            bias = calibrate_location_bias(loc_cases, rod, est)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    dump_config(replace(cfg, rod=rod, location_bias=bias), args.out)
    return EXIT_OK


def cmd_lossmap(args) -> int:
    cfg = _load(args)
    s_range = tuple(v * 1e-3 for v in args.s_range_mm)
    res = tuple(args.resolution)
    lit = cfg.estimator.swap_node_weights
    if args.input:
        if args.kind != "curvature":
            raise UsageError("--input works with --kind curvature only; give --truth-mm for shape maps")
        meas = read_measurement(args.input)
        lm = bench.loss_map_from_measurement(meas, s_range, tuple(args.f_range_n), res, cfg.rod,
                                             cfg.estimator.q, lit)
    else:
        if not args.truth_mm:
            raise UsageError("give --input or --truth-mm S F")
        s, f = args.truth_mm
        lm = bench.loss_map(ForceVector.of((s * 1e-3, f, 0.0)), s_range, tuple(args.f_range_n), res,
                            args.kind, cfg.rod, cfg.layout, cfg.estimator.q, lit)
    lm.write_csv(args.out)
    i, j = lm.argmin
    print(f"argmin s={lm.s[i] * 1e3:.4f} mm f={lm.f[j]:.4f} N loss={lm.loss[i, j]:.6g} "
          f"sublevel={lm.sublevel_size()}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    est = _estimator(cfg, args)
    noise = NoiseModel(cfg.noise.sigma_rel if args.sigma_rel is None else args.sigma_rel,
                       cfg.noise.seed if args.seed is None else args.seed)
    common = dict(props=cfg.rod, layout=cfg.layout, cfg=est, q_truth=cfg.simulation_q)
    if args.kind == "accuracy":
        scen = bench.random_scenarios(args.scenarios, noise.seed)
        reports = bench.accuracy_vs_q(scen, args.q_list, noise, draws=args.draws, **common)
    elif args.kind == "timing":
        reports = bench.timing_compare(args.q_list, args.h_list, args.repetitions, **common)
        for (sc, q), r in sorted(bench.speedups(reports).items()):
            print(f"{sc} q={q} speedup={r:.1f}")
    else:
        out = bench.noise_sweep([bench.TRIPLE_SCENARIO], args.sigmas, draws=args.draws,
                                q=est.q, seed=noise.seed, **common)
        reports = out["reports"]
        print(f"magnitude range bracketed: {out['mag_brackets_reference']}; "
              f"location range bracketed: {out['loc_brackets_reference']}")
        if args.summary:
            _write_json(args.summary, {
                "sigma_rel": list(args.sigmas),
                "mag_rel_err": [out["mag_rel_err"][s] for s in args.sigmas],
                "loc_rel_err": [out["loc_rel_err"][s] for s in args.sigmas],
                "mag_brackets_reference": out["mag_brackets_reference"],
                "loc_brackets_reference": out["loc_brackets_reference"],
            })
    bench.write_reports(args.out, reports)
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _load(args)
    if args.out:
        dump_config(cfg, args.out)
    else:
        print(json.dumps(config_to_dict(cfg), indent=2))
    return EXIT_OK


# =================== PARSER ============================= #
def _add_forces(p):
    p.add_argument("--force-mm", nargs=3, type=float, action="append", metavar=("S_MM", "FX_N", "FY_N"),
                   help="point force at S millimetres from the clamp")
    p.add_argument("--force-m", nargs=3, type=float, action="append", metavar=("S_M", "FX_N", "FY_N"),
                   help="point force at S metres from the clamp")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults to the calibrated rod)")
    common.add_argument("--paper-literal-weights", "--swap-node-weights", dest="swap_node_weights", action="store_true",
                        help="swap the two node weights when spreading point forces")

    p = _Parser(prog="fbgforce", description="Contact force estimation from FBG curvature readings.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="write synthetic grating readings")
    _add_forces(s)
    s.add_argument("--sigma-rel", type=float, help="relative noise level (overrides config)")
    s.add_argument("--seed", type=int, help="noise seed (overrides config)")
    s.add_argument("--q", type=int, help="simulation node count (overrides config)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="estimate forces from a measurement CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--h", type=int, help="fit exactly this many forces instead of selecting")
    e.add_argument("--q", type=int)
    e.add_argument("--model", choices=("simplified", "bvp_lm"))
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("calibrate", parents=[common], help="fit location bias and stiffness")
    c.add_argument("--cases", required=True, help="JSON manifest of labelled measurements")
    c.add_argument("--out", required=True, help="updated configuration file")
    c.add_argument("--q", type=int)
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("lossmap", parents=[common], help="grid of single-force losses")
    m.add_argument("--input", help="measurement CSV to compare against")
    m.add_argument("--truth-mm", nargs=2, type=float, metavar=("S_MM", "F_N"),
                   help="noiseless ground truth force (s, f, 0)")
    m.add_argument("--kind", choices=("curvature", "shape"), default="curvature")
    m.add_argument("--s-range-mm", nargs=2, type=float, default=(100.0, 290.0))
    m.add_argument("--f-range-n", nargs=2, type=float, default=(0.0, 0.5))
    m.add_argument("--resolution", nargs=2, type=int, default=(96, 51), metavar=("NS", "NF"))
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_lossmap)

    b = sub.add_parser("bench", parents=[common], help="accuracy, timing or noise benchmarks")
    b.add_argument("kind", choices=("accuracy", "timing", "noise"))
    b.add_argument("--q-list", nargs="+", type=int, default=(50, 100, 150, 200, 250))
    b.add_argument("--h-list", nargs="+", type=int, default=(1,))
    b.add_argument("--repetitions", type=int, default=10)
    b.add_argument("--draws", type=int, default=10)
    b.add_argument("--scenarios", type=int, default=20, help="random single-force scenarios")
    b.add_argument("--sigmas", nargs="+", type=float, default=(0.01, 0.02, 0.05))
    b.add_argument("--sigma-rel", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--q", type=int)
    b.add_argument("--summary", help="JSON summary for the noise sweep")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("config", parents=[common], help="print or write the effective configuration")
    g.add_argument("--out")
    g.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help
        return EXIT_OK if not err.code else EXIT_USAGE
    except (ConfigError, MeasurementFormatError, CalibrationError, BVPConvergenceError,
            OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
