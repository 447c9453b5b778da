"""Command-line interface.

Three subcommands cover the full workflow:

* ``simulate``: draw a ground-truth signal, optionally measure it (with
  noise), and write ground truth, innovation, and measurement files;
* ``reconstruct``: solve the quadratic or sparse problem on a saved
  measurement file and write the reconstruction;
* ``experiment``: run the SNR comparison benchmark.

Options may come from a TOML or JSON config file (--config) with keys
equal to the long flag names (underscores for dashes); explicit flags win
over file values.  The effective merged configuration is echoed to
``effective_config.json`` in the output directory.

Exit codes: 0 success, 1 runtime failure, 2 bad command line, 3 unknown
config key, 4 config type mismatch, 5 inconsistent configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from . import experiments
from .measurements import (
    MeasurementKind,
    MeasurementModel,
    assemble_gtv,
    assemble_tikhonov,
    ideal_sampling,
    measure,
    windowed_fourier,
)
from .operators import apply_L_to_spline, operator_from_name
from .pipeline import GtvConfig, GtvMode, reconstruct_gtv
from .signals import (
    GaussianWhite,
    ImpulsivePoisson,
    ProcessConfig,
    add_noise,
    generate_gaussian_process,
    generate_sparse_process,
)
from .tikhonov import eval_tikhonov, solve_tikhonov

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_UNKNOWN_KEY = 3
EXIT_TYPE_MISMATCH = 4
EXIT_INCONSISTENT = 5


class ConfigError(Exception):
    exit_code = EXIT_INCONSISTENT


class UnknownKeyError(ConfigError):
    exit_code = EXIT_UNKNOWN_KEY


class TypeMismatchError(ConfigError):
    exit_code = EXIT_TYPE_MISMATCH


class InconsistentError(ConfigError):
    exit_code = EXIT_INCONSISTENT


def parse_config(path: str | Path) -> dict:
    """Read a TOML or JSON option file into a flat dict."""
    path = Path(path)
    if not path.exists():
        raise InconsistentError(f"config file not found: {path}")
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    elif path.suffix == ".json":
        with open(path) as fh:
            data = json.load(fh)
    else:
        raise InconsistentError(
            f"config file must end in .toml or .json, got {path.name}"
        )
    if not isinstance(data, dict):
        raise TypeMismatchError("config file must hold a table of options")
    return data


_TYPE_COERCIONS = {
    float: (int, float),
    int: (int,),
    str: (str,),
    bool: (bool,),
}


def _merge_options(defaults: dict, file_data: dict, flags: dict) -> dict:
    """Layer file values then explicit flags over the defaults.

    Unknown file keys and values of the wrong type are rejected; flag
    values are assumed well typed (argparse enforces them).
    """
    merged = dict(defaults)
    for key, value in file_data.items():
        if key not in merged:
            raise UnknownKeyError(f"unknown config key {key!r}")
        default = merged[key]
        if default is not None and value is not None:
            expected = type(default)
            allowed = _TYPE_COERCIONS.get(expected, (expected,))
            if expected is not bool and isinstance(value, bool):
                raise TypeMismatchError(
                    f"config key {key!r} expects {expected.__name__}, got bool"
                )
            if not isinstance(value, allowed + (list, tuple)) or (
                isinstance(value, (list, tuple)) != isinstance(default, (list, tuple))
            ):
                raise TypeMismatchError(
                    f"config key {key!r} expects {expected.__name__}, "
                    f"got {type(value).__name__}"
                )
        merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def save_measurements(
    path: str | Path,
    model: MeasurementModel,
    z: np.ndarray,
    operator: str | None = None,
    snr_db: float | None = None,
) -> None:
    """Persist a measurement model and its data vector as JSON."""
    payload: dict = {
        "kind": model.kind.value,
        "domain": model.domain,
        "z": [float(v) for v in np.asarray(z).ravel()],
    }
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        payload["sample_points"] = [float(x) for x in model.sample_points]
    else:
        payload["pulsations"] = [float(w) for w in model.pulsations]
    if operator is not None:
        payload["operator"] = operator
    if snr_db is not None:
        payload["snr_db"] = None if math.isinf(snr_db) else float(snr_db)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_measurements(path: str | Path) -> tuple[MeasurementModel, np.ndarray, dict]:
    """Load a measurement file; returns (model, z, extra metadata)."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        kind = data["kind"]
        domain = float(data["domain"])
        z = np.asarray(data["z"], dtype=float)
        if kind == MeasurementKind.IDEAL_SAMPLING.value:
            model = ideal_sampling(np.asarray(data["sample_points"], float), domain)
        elif kind == MeasurementKind.WINDOWED_FOURIER.value:
            model = windowed_fourier(np.asarray(data["pulsations"], float), domain)
        else:
            raise InconsistentError(f"unknown measurement kind {kind!r}")
    except KeyError as exc:
        raise InconsistentError(f"measurement file misses key {exc}") from None
    if z.size != model.n_measurements:
        raise InconsistentError(
            f"measurement file holds {z.size} values but the model defines "
            f"{model.n_measurements} functionals"
        )
    extra = {k: data[k] for k in ("operator", "snr_db") if k in data}
    return model, z, extra


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _echo_config(out: Path, options: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "effective_config.json", "w") as fh:
        json.dump(options, fh, indent=2, default=str)


def _dense_grid(domain: float, n: int = 2001) -> np.ndarray:
    return np.linspace(0.0, domain, n)


# ---------------------------------------------------------------- simulate

_SIMULATE_DEFAULTS = {
    "operator": "D",
    "process": "sparse",
    "domain": 10.0,
    "count": 10,
    "rate": None,
    "amplitude_std": 1.0,
    "std": 1.0,
    "grid_step": 0.01,
    "measure": None,  # "sampling" | "fourier" | None
    "n_samples": 8,
    "sample_points": None,  # comma list overrides n_samples
    "n_pulsations": 20,
    "include_zero_pulsation": True,
    "pulsation_max": 4.0 * math.pi,
    "snr_db": None,  # None = noiseless
    "seed": 0,
}


def _cmd_simulate(opts: dict, out: Path) -> None:
    op = operator_from_name(opts["operator"])
    domain = float(opts["domain"])
    if opts["process"] == "sparse":
        innovation = ImpulsivePoisson(
            count=None if opts["rate"] is not None else int(opts["count"]),
            rate=opts["rate"],
            amplitude_std=float(opts["amplitude_std"]),
        )
    elif opts["process"] == "gaussian":
        innovation = GaussianWhite(
            std=float(opts["std"]), grid_step=float(opts["grid_step"])
        )
    else:
        raise InconsistentError(f"unknown process {opts['process']!r}")
    pc = ProcessConfig(
        op=op, innovation=innovation, domain=domain, seed=int(opts["seed"])
    )
    if opts["process"] == "sparse":
        truth = generate_sparse_process(pc)
        _write_csv(
            out / "innovation.csv",
            ["knot", "weight"],
            zip(truth.knots, truth.weights),
        )
    else:
        truth = generate_gaussian_process(pc)
    grid = _dense_grid(domain)
    _write_csv(out / "ground_truth.csv", ["x", "f"], zip(grid, truth(grid)))

    if opts["measure"] is not None:
        rng = np.random.default_rng(int(opts["seed"]) + 1)
        if opts["measure"] == "sampling":
            if opts["sample_points"] is not None:
                pts = np.asarray(
                    [float(v) for v in str(opts["sample_points"]).split(",")]
                )
            else:
                pts = np.sort(rng.uniform(0.0, domain, int(opts["n_samples"])))
            model = ideal_sampling(pts, domain)
        elif opts["measure"] == "fourier":
            puls = np.sort(
                rng.uniform(0.0, float(opts["pulsation_max"]), int(opts["n_pulsations"]))
            )
            if opts["include_zero_pulsation"]:
                puls = np.concatenate([[0.0], puls])
            model = windowed_fourier(puls, domain)
        else:
            raise InconsistentError(f"unknown measurement kind {opts['measure']!r}")
        z = measure(model, truth)
        snr_db = math.inf if opts["snr_db"] is None else float(opts["snr_db"])
        z = add_noise(z, snr_db, seed=int(opts["seed"]) + 2)
        save_measurements(
            out / "measurements.json",
            model,
            z,
            operator=opts["operator"],
            snr_db=snr_db,
        )
    logger.info("simulate: wrote %s", out)


# ------------------------------------------------------------- reconstruct

_RECONSTRUCT_DEFAULTS = {
    "input": None,
    "method": "gtv",
    "operator": None,  # falls back to the measurement file's record
    "lam": None,
    "mode": "lsq",
    "n_grid": 200,
    "delta": None,  # defaults to domain / n_grid
    "eps_rel": 1e-10,
    "max_iter": 200000,
    "eval_points": 2001,
    "dump_matrices": False,
    "seed": 0,
}


def _cmd_reconstruct(opts: dict, out: Path) -> None:
    if opts["input"] is None:
        raise InconsistentError("reconstruct needs --input measurements.json")
    model, z, extra = load_measurements(opts["input"])
    op_name = opts["operator"] or extra.get("operator")
    if op_name is None:
        raise InconsistentError(
            "no operator given and the measurement file records none"
        )
    op = operator_from_name(op_name)
    grid = _dense_grid(model.domain, int(opts["eval_points"]))

    if opts["method"] == "tikhonov":
        if opts["lam"] is None:
            raise InconsistentError("tikhonov reconstruction needs --lam > 0")
        V, W = assemble_tikhonov(model, op)
        if opts["dump_matrices"]:
            np.savetxt(out / "V.csv", V, delimiter=",")
            np.savetxt(out / "W.csv", W, delimiter=",")
        sol = solve_tikhonov(V, W, z, float(opts["lam"]))
        vals = eval_tikhonov(sol, model, op, grid)
        _write_csv(out / "reconstruction.csv", ["x", "f"], zip(grid, vals))
        with open(out / "solution.json", "w") as fh:
            json.dump(
                {
                    "method": "tikhonov",
                    "operator": op_name,
                    "lam": sol.lam,
                    "a": [float(v) for v in sol.a],
                    "b": [float(v) for v in sol.b],
                    "residual": sol.residual,
                    "reg_value": sol.reg_value,
                },
                fh,
                indent=2,
            )
    elif opts["method"] == "gtv":
        n_grid = int(opts["n_grid"])
        delta = (
            float(opts["delta"]) if opts["delta"] is not None else model.domain / n_grid
        )
        mode = {"lsq": GtvMode.LEAST_SQUARES, "exact": GtvMode.EXACT_FIT}.get(
            opts["mode"]
        )
        if mode is None:
            raise InconsistentError(f"unknown gtv mode {opts['mode']!r}")
        if mode is GtvMode.LEAST_SQUARES and opts["lam"] is None:
            raise InconsistentError("least-squares gtv needs --lam > 0")
        cfg = GtvConfig(
            n_grid=n_grid,
            delta=delta,
            lam=float(opts["lam"]) if opts["lam"] is not None else 0.0,
            mode=mode,
            eps_rel=float(opts["eps_rel"]),
            max_iter=int(opts["max_iter"]),
        )
        if opts["dump_matrices"]:
            P, Q = assemble_gtv(model, op, n_grid, delta)
            np.savetxt(out / "P.csv", P, delimiter=",")
            np.savetxt(out / "Q.csv", Q, delimiter=",")
        spline, diag = reconstruct_gtv(model, op, z, cfg)
        vals = spline(grid)
        _write_csv(out / "reconstruction.csv", ["x", "f"], zip(grid, vals))
        _write_csv(
            out / "innovation.csv",
            ["knot", "weight"],
            apply_L_to_spline(op, spline),
        )
        with open(out / "solution.json", "w") as fh:
            json.dump(
                {
                    "method": "gtv",
                    "operator": op_name,
                    "mode": mode.value,
                    "lam": cfg.lam,
                    "knots": [float(t) for t in spline.knots],
                    "weights": [float(a) for a in spline.weights],
                    "b": [float(v) for v in spline.b],
                    "sparsity": diag.sparsity,
                    "l1_norm": diag.l1_norm,
                    "measurement_residual": diag.measurement_residual,
                    "fista_iterations": diag.fista_iterations,
                    "lp_status": diag.lp_status.value if diag.lp_status else None,
                },
                fh,
                indent=2,
            )
    else:
        raise InconsistentError(f"unknown method {opts['method']!r}")
    logger.info("reconstruct: wrote %s", out)


# -------------------------------------------------------------- experiment

_EXPERIMENT_DEFAULTS = {
    "operators": ["D", "D2"],
    "impulse_counts": [10, 100, 2000],
    "include_gaussian": True,
    "noise_snrs_db": [None, 40.0],  # None = noiseless
    "realizations": 10,
    "seed": 0,
    "n_pulsations": 20,
    "include_zero_pulsation": True,
    "pulsation_max": 4.0 * math.pi,
    "window": 10.0,
    "n_grid": 200,
    "delta": 0.05,
    "amplitude_std": 1.0,
    "gaussian_std": 1.0,
    "gaussian_grid_step": 0.01,
    "lambda_count": 30,
    "lambda_bounds": [1e-7, 1e2],
    "eval_grid_factor": 10,
    "fista_eps_rel": 1e-9,
    "fista_max_iter": 200000,
}


def _cmd_experiment(opts: dict, out: Path) -> None:
    noise = tuple(
        math.inf if v is None else float(v) for v in opts["noise_snrs_db"]
    )
    cfg = experiments.ExperimentConfig(
        operators=tuple(opts["operators"]),
        impulse_counts=tuple(int(k) for k in opts["impulse_counts"]),
        include_gaussian=bool(opts["include_gaussian"]),
        noise_snrs_db=noise,
        realizations=int(opts["realizations"]),
        seed=int(opts["seed"]),
        n_pulsations=int(opts["n_pulsations"]),
        include_zero_pulsation=bool(opts["include_zero_pulsation"]),
        pulsation_max=float(opts["pulsation_max"]),
        window=float(opts["window"]),
        n_grid=int(opts["n_grid"]),
        delta=float(opts["delta"]),
        amplitude_std=float(opts["amplitude_std"]),
        gaussian_std=float(opts["gaussian_std"]),
        gaussian_grid_step=float(opts["gaussian_grid_step"]),
        lambda_count=int(opts["lambda_count"]),
        lambda_bounds=tuple(float(v) for v in opts["lambda_bounds"]),
        eval_grid_factor=int(opts["eval_grid_factor"]),
        fista_eps_rel=float(opts["fista_eps_rel"]),
        fista_max_iter=int(opts["fista_max_iter"]),
        out_dir=str(out),
    )
    result = experiments.run_table1(cfg)
    for cell in result.cells:
        logger.info(
            "%s / %s / %s: L2 %.2f dB, TV %.2f dB",
            cell.operator,
            cell.signal,
            cell.noise,
            cell.tikhonov_mean_snr,
            cell.gtv_mean_snr,
        )


# -------------------------------------------------------------------- main


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON option file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--verbose", action="store_true", help="info logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splineinv",
        description="Continuous-domain inverse problems with spline solutions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw and measure a ground truth")
    _add_common(p_sim)
    p_sim.add_argument("--operator", choices=["D", "D2"])
    p_sim.add_argument("--process", choices=["sparse", "gaussian"])
    p_sim.add_argument("--domain", type=float)
    p_sim.add_argument("--count", type=int)
    p_sim.add_argument("--rate", type=float)
    p_sim.add_argument("--amplitude-std", type=float, dest="amplitude_std")
    p_sim.add_argument("--std", type=float)
    p_sim.add_argument("--grid-step", type=float, dest="grid_step")
    p_sim.add_argument("--measure", choices=["sampling", "fourier"])
    p_sim.add_argument("--n-samples", type=int, dest="n_samples")
    p_sim.add_argument("--sample-points", dest="sample_points")
    p_sim.add_argument("--n-pulsations", type=int, dest="n_pulsations")
    p_sim.add_argument("--pulsation-max", type=float, dest="pulsation_max")
    p_sim.add_argument("--snr-db", type=float, dest="snr_db")

    p_rec = sub.add_parser("reconstruct", help="solve a saved measurement file")
    _add_common(p_rec)
    p_rec.add_argument("--input")
    p_rec.add_argument("--method", choices=["tikhonov", "gtv"])
    p_rec.add_argument("--operator", choices=["D", "D2"])
    p_rec.add_argument("--lam", type=float)
    p_rec.add_argument("--mode", choices=["lsq", "exact"])
    p_rec.add_argument("--n-grid", type=int, dest="n_grid")
    p_rec.add_argument("--delta", type=float)
    p_rec.add_argument("--eps-rel", type=float, dest="eps_rel")
    p_rec.add_argument("--max-iter", type=int, dest="max_iter")
    p_rec.add_argument("--eval-points", type=int, dest="eval_points")
    p_rec.add_argument(
        "--dump-matrices", action="store_const", const=True, dest="dump_matrices"
    )

    p_exp = sub.add_parser("experiment", help="run the SNR comparison benchmark")
    _add_common(p_exp)
    p_exp.add_argument("--realizations", type=int)
    p_exp.add_argument("--lambda-count", type=int, dest="lambda_count")

    return parser


_DEFAULTS = {
    "simulate": _SIMULATE_DEFAULTS,
    "reconstruct": _RECONSTRUCT_DEFAULTS,
    "experiment": _EXPERIMENT_DEFAULTS,
}

_RUNNERS = {
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "experiment": _cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    defaults = _DEFAULTS[args.command]
    flag_values = {
        k: v
        for k, v in vars(args).items()
        if k not in {"command", "config", "out", "verbose"}
    }
    try:
        file_data = parse_config(args.config) if args.config else {}
        opts = _merge_options(defaults, file_data, flag_values)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _echo_config(out, {"command": args.command, **opts})
        _RUNNERS[args.command](opts, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
