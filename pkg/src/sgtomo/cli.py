"""Command-line entry point: ``sgtomo {reconstruct,simulate,analyze}``.

Angles are given in degrees on the command line.  A JSON ``--config`` file
may supply any option (keys are the long flag names with dashes replaced by
underscores); explicit flags take precedence.  Output paths default to the
directory named by ``SGTOMO_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .density import fidelity
from .errors import (
    FitDiverged,
    NoConvergence,
    ParseError,
    RankDeficient,
    RecordMismatch,
    TomographyError,
)
from .experiment import NoiseModel, monte_carlo, noise_config, perturb_axes, perturb_records
from .io import (
    SCHEMA_VERSION,
    axes_to_json,
    conditioning_to_json,
    error_stub,
    load_axis_set,
    load_density,
    load_measurements,
    matrix_to_json,
    read_json,
    save_measurements,
    write_json,
)
from .spin import SpinSystem
from .states import parse_state
from .tof import TofGeometry, fit_tof, simulate_tof
from .tomography import (
    FitOptions,
    build_measurement_matrix,
    check_records,
    conditioning,
    default_axis_set,
    forward_model,
    ml_reconstruct,
    project_to_physical,
    MeasurementRecord,
)
from .wigner import default_grid, wigner_function

log = logging.getLogger("sgtomo")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_RECORDS = 4
EXIT_RANK = 5
EXIT_NO_CONVERGENCE = 6
EXIT_FIT = 7

_EXIT_CODES = {
    ParseError: EXIT_PARSE,
    RecordMismatch: EXIT_RECORDS,
    RankDeficient: EXIT_RANK,
    NoConvergence: EXIT_NO_CONVERGENCE,
    FitDiverged: EXIT_FIT,
}

DEFAULTS = {
    "spin": "4",
    "axes": "default",
    "noise_pop": 0.03,
    "noise_axis_deg": 0.5,
    "trials": 0,
    "seed": 0,
    "rank_threshold": 1e-10,
    "max_iters": 5000,
    "tof": False,
    "tof_noise": 0.0,
    "workers": 1,
}

DEFAULT_OUT = {
    "reconstruct": "reconstruction.json",
    "simulate": "measurements.json",
    "analyze": "analysis.json",
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE, error_code="UsageError"):
        super().__init__(message)
        self.exit_code = code
        self.error_code = error_code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--spin", help="spin quantum number F, e.g. 4 or 7/2 (default 4)")
    common.add_argument("--axes", help="axis-set JSON file, or 'default'")
    common.add_argument("--in", dest="input", help="input file")
    common.add_argument("--out", help="output file")
    common.add_argument("--seed", type=int)
    common.add_argument("--rank-threshold", type=float, help="relative eigenvalue threshold for the rank")
    common.add_argument("--max-iters", type=int, help="iteration budget of the constrained fit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sgtomo", description="Spin density-matrix tomography from Stern-Gerlach data.")
    parser.add_argument("--version", action="version", version=f"sgtomo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", parents=[common], help="reconstruct a state from a measurement file")
    rec.add_argument("--reference", help="density-matrix file to compute the fidelity against")

    sim = sub.add_parser("simulate", parents=[common], help="generate synthetic measurements")
    sim.add_argument("--state", help="named test state or density-matrix file")
    sim.add_argument("--noise-pop", type=float, help="relative population noise (default 0.03)")
    sim.add_argument("--noise-axis-deg", type=float, help="axis jitter in degrees (default 0.5)")
    sim.add_argument("--trials", type=int, help="run a Monte-Carlo fidelity study with this many trials")
    sim.add_argument("--tof", action="store_const", const=True, help="route populations through simulated TOF traces")
    sim.add_argument("--tof-noise", type=float, help="TOF noise as a fraction of the tallest peak")
    sim.add_argument("--workers", type=int, help="threads for Monte-Carlo trials")

    ana = sub.add_parser("analyze", parents=[common], help="conditioning of an axis set, state diagnostics")
    ana.add_argument("--reference", help="density-matrix file to compare the input state against")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and explicit flags (flags win)."""
    cfg = dict(DEFAULTS)
    if args.config:
        loaded = read_json(args.config)
        if not isinstance(loaded, dict):
            raise ParseError("config must be a JSON object", args.config)
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, value in vars(args).items():
        if value is not None and key != "config":
            cfg[key] = value
    out = cfg.get("out")
    if not out:
        out = Path(os.environ.get("SGTOMO_OUTPUT_DIR", ".")) / DEFAULT_OUT[cfg["command"]]
    cfg["out"] = Path(out)
    try:
        cfg["system"] = SpinSystem.from_spin(cfg["spin"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if not 0 < float(cfg["rank_threshold"]) < 1:
        raise CliError("--rank-threshold must lie in (0, 1)")
    if int(cfg["max_iters"]) < 1:
        raise CliError("--max-iters must be positive")
    if float(cfg["noise_pop"]) < 0 or float(cfg["noise_axis_deg"]) < 0:
        raise CliError("noise levels must be non-negative")
    return cfg


def _axes(cfg, sys):
    if cfg["axes"] in (None, "default"):
        return default_axis_set(sys)
    return load_axis_set(cfg["axes"])


def _fit_options(cfg) -> FitOptions:
    return FitOptions(max_iters=int(cfg["max_iters"]), rel_threshold=float(cfg["rank_threshold"]))


def _noise(cfg) -> NoiseModel:
    return NoiseModel(float(cfg["noise_pop"]), float(np.radians(cfg["noise_axis_deg"])), int(cfg["seed"]))


def _name(path) -> str:
    return Path(path).name


def cmd_reconstruct(cfg) -> int:
    if not cfg.get("input"):
        raise CliError("reconstruct needs --in MEASUREMENTS.json")
    sys_, file_axes, records, _ = load_measurements(cfg["input"])
    if cfg["axes"] not in (None, "default"):
        axes = load_axis_set(cfg["axes"])
    else:
        axes = file_axes or default_axis_set(sys_)
    records = check_records(records, axes, sys_)
    rho, fit = ml_reconstruct(records, axes, sys_, _fit_options(cfg))
    lin = fit.pseudoinverse
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "reconstruction",
        "status": "ok" if fit.converged else "not_converged",
        "spin": sys_.label(),
        "two_f": sys_.two_f,
        "basis": "m ascending from -F",
        "angle_unit": "deg",
        "input": _name(cfg["input"]),
        "axes": axes_to_json(axes),
        "raw_sums": [r.raw_sum for r in records],
        "conditioning": conditioning_to_json(lin.report),
        "pseudoinverse": {
            "matrix": matrix_to_json(lin.matrix),
            "eigenvalues": [float(x) for x in np.linalg.eigvalsh(lin.matrix)],
            "physical": lin.physical,
            "hermiticity_deviation": lin.hermiticity_deviation,
            "raw_trace": lin.raw_trace,
            "residual": lin.residual,
        },
        "ml": {
            "matrix": matrix_to_json(rho.entries),
            "eigenvalues": [float(x) for x in rho.eigenvalues()],
            "psd": True,
            "initial_cost": fit.initial_cost,
            "final_cost": fit.final_cost,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "stop_reason": fit.reason,
            "gradient_norm": fit.gradient_norm,
            "purity": rho.purity(),
        },
        "pseudoinverse_already_physical": lin.physical,
    }
    if cfg.get("reference"):
        ref = load_density(cfg["reference"])
        if ref.dim != rho.dim:
            raise CliError("reference state has the wrong dimension", EXIT_PARSE, "DimensionMismatch")
        report["reference"] = {
            "file": _name(cfg["reference"]),
            "fidelity_ml": fidelity(ref, rho),
            "fidelity_pseudoinverse_projected": fidelity(ref, project_to_physical(lin.matrix)),
        }
    write_json(cfg["out"], report)
    log.info("wrote %s", cfg["out"])
    if not fit.converged:
        log.error("constrained fit did not converge within %d iterations", fit.iterations)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _write_tof(records, cfg, rng):
    """Route populations through simulated TOF traces and refit them."""
    geom = TofGeometry()
    out = cfg["out"]
    tof_dir = out.with_name(out.stem + "_tof")
    tof_dir.mkdir(parents=True, exist_ok=True)
    fitted = []
    for rec in records:
        trace = simulate_tof(rec.populations, geom, float(cfg["tof_noise"]), rng)
        trace.to_csv(tof_dir / f"axis_{rec.axis_index:02d}.csv")
        fitted.append(MeasurementRecord.from_raw(rec.axis_index, fit_tof(trace, geom), provenance="tof-fit"))
    return fitted, tof_dir


def cmd_simulate(cfg) -> int:
    sys_ = cfg["system"]
    if not cfg.get("state"):
        raise CliError("simulate needs --state")
    try:
        state = parse_state(cfg["state"], sys_)
    except (ValueError, TypeError) as exc:
        raise CliError(f"bad --state: {exc}", EXIT_USAGE, getattr(exc, "code", "InvalidState")) from exc
    axes = _axes(cfg, sys_)
    noise = _noise(cfg)
    echo = {
        "spin": sys_.label(),
        "state": cfg["state"],
        "axes": axes_to_json(axes),
        "noise": noise_config(noise),
        "angle_unit": "deg",
    }
    trials = int(cfg.get("trials") or 0)
    if trials > 0:
        result = monte_carlo(state, axes, noise, trials, _fit_options(cfg), int(cfg["workers"]))
        write_json(
            cfg["out"],
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "monte_carlo",
                "config": dict(echo, trials=trials, max_iters=int(cfg["max_iters"])),
                "fidelities": result.fidelities,
                "summary": result.summary(),
                "errors": result.errors,
            },
        )
        return EXIT_OK
    rng = noise.rng()
    actual = perturb_axes(axes, noise, rng)
    records = perturb_records(forward_model(state, actual), noise, rng)
    provenance = dict(echo, seed=noise.seed, generator="forward model with jittered axes and population noise")
    provenance.pop("axes")
    if cfg.get("tof"):
        records, tof_dir = _write_tof(records, cfg, rng)
        provenance["tof"] = {"traces": tof_dir.name, "noise_floor": float(cfg["tof_noise"])}
    save_measurements(cfg["out"], sys_, axes, records, provenance)
    return EXIT_OK


def cmd_analyze(cfg) -> int:
    rho = load_density(cfg["input"]) if cfg.get("input") else None
    sys_ = rho.system if rho is not None else cfg["system"]
    axes = _axes(cfg, sys_)
    cond = conditioning(build_measurement_matrix(axes, sys_), float(cfg["rank_threshold"]))
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis",
        "spin": sys_.label(),
        "angle_unit": "deg",
        "axes": axes_to_json(axes),
        "conditioning": conditioning_to_json(cond),
        "conditioning_pass": cond.full_rank,
    }
    if rho is not None:
        wmap = wigner_function(rho, default_grid())
        wpath = cfg["out"].with_name(cfg["out"].stem + "_wigner.csv")
        wpath.parent.mkdir(parents=True, exist_ok=True)
        wmap.to_csv(wpath)
        report["state"] = {
            "file": _name(cfg["input"]),
            "purity": rho.purity(),
            "eigenvalues": [float(x) for x in rho.eigenvalues()],
            "populations": [float(x) for x in rho.populations()],
            "wigner": {
                "csv": wpath.name,
                "convention": wmap.convention_id,
                "min": float(wmap.values.min()),
                "max": float(wmap.values.max()),
                "negative": bool(wmap.values.min() < 0),
            },
        }
        if cfg.get("reference"):
            report["state"]["fidelity_vs_reference"] = fidelity(load_density(cfg["reference"]), rho)
    write_json(cfg["out"], report)
    return EXIT_OK if cond.full_rank else EXIT_RANK


COMMANDS = {"reconstruct": cmd_reconstruct, "simulate": cmd_simulate, "analyze": cmd_analyze}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    out = Path(args.out) if args.out else None
    try:
        cfg = resolve_config(args)
        out = cfg["out"]
        return COMMANDS[cfg["command"]](cfg)
    except (TomographyError, CliError) as exc:
        if isinstance(exc, CliError):
            code, name = exc.exit_code, exc.error_code
        else:
            code = next((c for cls, c in _EXIT_CODES.items() if isinstance(exc, cls)), EXIT_ERROR)
            name = exc.code
        print(f"sgtomo: error [{name}]: {exc}", file=sys.stderr)
        if out is not None:
            extra = {"exit_code": code}
            if isinstance(exc, RankDeficient) and exc.report is not None:
                extra["conditioning"] = conditioning_to_json(exc.report)
            try:
                write_json(out, error_stub(name, str(exc), **extra))
            except OSError:
                pass
        return code


if __name__ == "__main__":
    sys.exit(main())
