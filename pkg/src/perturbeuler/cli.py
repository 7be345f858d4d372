"""Command-line front end.

Exit codes: 0 success (and verification passed), 1 verification threshold
exceeded, 2 configuration error, 3 numerical failure.
"""

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import classifier, ode_core, solution_field, verifier
from .errors import (
    BlowupInsideRange,
    GridOutsideSupport,
    PerturbEulerError,
    QuadratureFailure,
    StepSizeUnderflow,
)

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "PERTURBEULER_THREADS"

TRAJECTORY_HEADER = ("t", "a", "adot", "b", "bdot", "y")


class ConfigError(Exception):
    pass


def fmt(v) -> str:
    """17 significant digits: enough to round-trip a double."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return format(float(v), ".17g")


def _float_pair(text):
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _float_list(text):
    return [float(p) for p in str(text).split(",") if p.strip()]


def parse_range(text):
    """``v``, ``v1,v2,...`` or ``lo:hi:n`` (n evenly spaced points)."""
    text = str(text).strip()
    if ":" in text:
        lo, hi, n = text.split(":")
        n = int(n)
        if n < 0:
            raise argparse.ArgumentTypeError(f"negative count in {text!r}")
        return [float(v) for v in np.linspace(float(lo), float(hi), n)]
    return _float_list(text)


# name -> (type, default, help); None default means "required unless noted"
_SEED = {
    "xi": (float, None, "Emden constant"),
    "a0": (float, None, "a(0) > 0"),
    "a1": (float, None, "a'(0)"),
    "b0": (float, 0.0, "b(0)"),
    "b1": (float, 0.0, "b'(0)"),
    "alpha": (float, 1.0, "rho(0, 0)"),
}
_PARAMS = {
    "gamma": (float, 2.0, "adiabatic exponent > 1"),
    "K": (float, 1.0, "pressure constant > 0"),
    "mu": (float, 0.0, "viscosity for the Navier-Stokes residual"),
}
_TOLS = {
    "rtol": (float, ode_core.DEFAULT_RTOL, "integrator relative tolerance"),
    "atol": (float, ode_core.DEFAULT_ATOL, "integrator absolute tolerance"),
}
_Y_EQ = {"y_equation": (str, "ode28", "y decay law: ode28 (default) or theorem")}
_OUT = {
    "output": (str, "-", "output path, '-' for stdout"),
    "format": (str, None, "csv or json"),
}

COMMANDS = {
    "classify": {**_SEED, **_PARAMS, **_OUT,
                 "quad_tol": (float, 1e-12, "quadrature tolerance for T"),
                 "kappa": (float, None, "lemma exponent (defaults to gamma)")},
    "integrate": {**_SEED, **_PARAMS, **_TOLS, **_Y_EQ, **_OUT,
                  "t_end": (float, 10.0, "final time")},
    "field": {**_SEED, **_PARAMS, **_TOLS, **_Y_EQ, **_OUT,
              "times": (_float_list, None, "comma separated sample times"),
              "t_range": (_float_pair, None, "'lo hi' time range (with --nt)"),
              "nt": (int, 10, "time intervals for --t-range"),
              "window": (_float_pair, (-2.0, 2.0), "'lo hi' spatial window"),
              "nx": (int, 40, "spatial intervals"),
              "radial": (bool, False, "radial form, rows restricted to r >= 0")},
    "verify": {**_SEED, **_PARAMS, **_TOLS, **_Y_EQ, **_OUT,
               "t_range": (_float_pair, (0.0, 0.5), "'lo hi' time range"),
               "nt": (int, 256, "time intervals (coarsest level)"),
               "nx": (int, 256, "space intervals (coarsest level)"),
               "window": (_float_pair, None, "'lo hi' window (default: shrunk support)"),
               "margin": (float, 0.25, "support fraction excluded at each vacuum edge"),
               "levels": (int, 3, "grid halvings; >= 3 reports an observed order"),
               "threshold": (float, 1e-4, "max-norm residual threshold for passing")},
    "sweep": {**_OUT,
              "xi": (parse_range, None, "xi values (v | v1,v2 | lo:hi:n)"),
              "a0": (parse_range, None, "a0 values"),
              "a1": (parse_range, None, "a1 values"),
              "gamma": (parse_range, [2.0], "gamma values"),
              "K": (float, 1.0, "pressure constant"),
              "quad_tol": (float, 1e-12, "quadrature tolerance for T")},
}
_REQUIRED = {"xi", "a0", "a1"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perturbeuler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file mirroring these options")
        for key, (typ, _default, helptext) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None,
                               help=helptext)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=helptext)
    return parser


def read_config(path, command):
    """Parse ``key = value`` lines; '#' starts a comment. Unknown keys are errors."""
    opts = COMMANDS[command]
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "command":
                if value != command:
                    raise ConfigError(f"{path}: config is for {value!r}, not {command!r}")
                continue
            if key not in opts:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for {command}")
            typ = opts[key][0]
            try:
                out[key] = value.lower() in ("1", "true", "yes") if typ is bool else typ(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def resolve(args) -> dict:
    """Merge command line, config file and defaults; check required keys."""
    opts = COMMANDS[args.command]
    cfg = read_config(args.config, args.command) if args.config else {}
    merged = {}
    for key, (_typ, default, _h) in opts.items():
        val = getattr(args, key)
        if val is None:
            val = cfg.get(key, default)
        merged[key] = val
    missing = sorted(k for k in _REQUIRED & opts.keys() if merged[k] is None)
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m for m in missing))
    if "y_equation" in merged and merged["y_equation"] not in ode_core.Y_EQUATIONS:
        raise ConfigError(f"--y-equation must be one of {ode_core.Y_EQUATIONS}")
    if merged.get("format") not in (None, "csv", "json"):
        raise ConfigError("--format must be csv or json")
    return merged


def seed_and_params(cfg):
    try:
        seed = ode_core.SeedData(cfg["a0"], cfg["a1"], cfg["xi"], cfg["b0"], cfg["b1"],
                                 cfg["alpha"])
        params = ode_core.ModelParams(cfg["K"], cfg["gamma"], cfg.get("mu", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return seed, params


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()


# ---- classify -----------------------------------------------------------------

def classification_record(seed, params, quad_tol=1e-12, kappa=None) -> dict:
    cls = classifier.classify(seed, params, kappa=kappa, with_numeric=True, quad_tol=quad_tol)
    return {"verdict": cls.verdict.value, "criterion": cls.criterion.value,
            "E": cls.energy, "T_formula": cls.T_formula, "T_numeric": cls.T_numeric,
            "T": cls.T}


def run_classify(cfg) -> int:
    seed, params = seed_and_params(cfg)
    rec = classification_record(seed, params, cfg["quad_tol"], cfg["kappa"])
    with _Output(cfg["output"]) as fh:
        if cfg["format"] == "json":
            json.dump(rec, fh, indent=2)
            fh.write("\n")
        else:
            for key in ("verdict", "criterion"):
                fh.write(f"{key}={rec[key]}\n")
            for key in ("E", "T_formula", "T_numeric"):
                fh.write(f"{key}={fmt(rec[key])}\n")
    return EXIT_OK


# ---- integrate ----------------------------------------------------------------

def write_trajectory_csv(traj, fh):
    fh.write(",".join(TRAJECTORY_HEADER) + "\n")
    for t, row in zip(traj.t, traj.Y):
        fh.write(",".join(fmt(v) for v in (t, *row)) + "\n")
    fh.write(f"# status={traj.status.value},T={fmt(traj.stop_time)}"
             f",detection={traj.detection or ''},rtol={fmt(traj.rtol)},atol={fmt(traj.atol)}"
             f",b_peak={fmt(traj.b_peak)}\n")


def read_trajectory_csv(path_or_text):
    """Inverse of :func:`write_trajectory_csv`: ``(t, Y, footer_dict)``."""
    if "\n" in path_or_text:
        lines = path_or_text.splitlines()
    else:
        with open(path_or_text) as fh:
            lines = fh.read().splitlines()
    if tuple(lines[0].split(",")) != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected header {lines[0]!r}")
    rows, footer = [], {}
    for line in lines[1:]:
        if line.startswith("#"):
            footer = dict(kv.split("=", 1) for kv in line[1:].strip().split(","))
        elif line:
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows)
    return data[:, 0], data[:, 1:], footer


def run_integrate(cfg) -> int:
    seed, params = seed_and_params(cfg)
    try:
        traj = ode_core.integrate(seed, params, cfg["t_end"], cfg["rtol"], cfg["atol"],
                                  y_equation=cfg["y_equation"])
    except StepSizeUnderflow as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    with _Output(cfg["output"]) as fh:
        write_trajectory_csv(traj, fh)
    return EXIT_OK


# ---- field --------------------------------------------------------------------

def run_field(cfg) -> int:
    seed, params = seed_and_params(cfg)
    if cfg["times"] is not None:
        times = sorted(cfg["times"])
    elif cfg["t_range"] is not None:
        times = list(np.linspace(*cfg["t_range"], cfg["nt"] + 1))
    else:
        times = [0.0]
    if min(times) < 0:
        raise ConfigError("sample times must be nonnegative")
    t_end = max(max(times), 1e-12)
    try:
        traj = ode_core.integrate(seed, params, t_end, cfg["rtol"], cfg["atol"],
                                  y_equation=cfg["y_equation"])
    except StepSizeUnderflow as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if traj.blowup:
        print(f"requested t={max(times)!r} lies beyond the blowup time {traj.blowup_time!r}",
              file=sys.stderr)
        return EXIT_NUMERIC
    x = np.linspace(*cfg["window"], cfg["nx"] + 1)
    radial = cfg["radial"]
    if radial:
        x = x[x >= 0]
    coord = "r" if radial else "x"
    with _Output(cfg["output"]) as fh:
        fh.write(f"t,{coord},rho,u,in_support\n")
        for t in times:
            state = traj.state_at(t)
            rho = solution_field.eval_density(x, state, params, seed.xi)
            u = solution_field.eval_velocity(x, state)
            for xi_, r_, u_ in zip(np.atleast_1d(x), np.atleast_1d(rho), np.atleast_1d(u)):
                fh.write(f"{fmt(t)},{fmt(xi_)},{fmt(r_)},{fmt(u_)},{fmt(bool(r_ > 0))}\n")
    return EXIT_OK


# ---- verify -------------------------------------------------------------------

def run_verify(cfg) -> int:
    seed, params = seed_and_params(cfg)
    try:
        grid = verifier.GridSpec(tuple(cfg["t_range"]), cfg["nt"], cfg["nx"],
                                 None if cfg["window"] is None else tuple(cfg["window"]),
                                 cfg["margin"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        report = verifier.verify(grid, seed, params, levels=cfg["levels"], rtol=cfg["rtol"],
                                 atol=cfg["atol"], y_equation=cfg["y_equation"])
    except (GridOutsideSupport, BlowupInsideRange, StepSizeUnderflow) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    norms = [report.mass_residual.max, report.momentum_residual.max]
    if report.ns_residual is not None:
        norms.append(report.ns_residual.max)
    stalled = any(w.endswith("_plateau") for w in report.warnings)
    passed = all(n <= cfg["threshold"] for n in norms) and not stalled
    report.status = "passed" if passed else "failed"
    doc = report.to_dict()
    doc["threshold"] = cfg["threshold"]
    doc["y_equation"] = cfg["y_equation"]
    with _Output(cfg["output"]) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


# ---- sweep --------------------------------------------------------------------

SWEEP_HEADER = ("xi", "a0", "a1", "gamma", "verdict", "E", "T")


def sweep_rows(xis, a0s, a1s, gammas, K=1.0, quad_tol=1e-12, threads=None):
    """Classification rows in lexicographic (xi, a0, a1, gamma) order."""
    cells = sorted(itertools.product(xis, a0s, a1s, gammas))

    def one(cell):
        xi, a0, a1, gamma = cell
        rec = classification_record(ode_core.SeedData(a0, a1, xi),
                                    ode_core.ModelParams(K, gamma), quad_tol)
        return (xi, a0, a1, gamma, rec["verdict"], rec["E"], rec["T"])

    threads = threads or int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, cells))
    else:
        rows = [one(c) for c in cells]
    return sorted(rows, key=lambda r: r[:4])


def run_sweep(cfg) -> int:
    for key in ("xi", "a0", "a1", "gamma"):
        if not cfg[key]:
            raise ConfigError(f"--{key} range is empty")
    try:
        rows = sweep_rows(cfg["xi"], cfg["a0"], cfg["a1"], cfg["gamma"], cfg["K"],
                          cfg["quad_tol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    except QuadratureFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    with _Output(cfg["output"]) as fh:
        if cfg["format"] == "json":
            json.dump([dict(zip(SWEEP_HEADER, r)) for r in rows], fh, indent=2)
            fh.write("\n")
        else:
            fh.write(",".join(SWEEP_HEADER) + "\n")
            for r in rows:
                fh.write(",".join([*(fmt(v) for v in r[:4]), r[4], fmt(r[5]), fmt(r[6])]) + "\n")
    return EXIT_OK


RUNNERS = {"classify": run_classify, "integrate": run_integrate, "field": run_field,
           "verify": run_verify, "sweep": run_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve(args)
        return RUNNERS[args.command](cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PerturbEulerError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
