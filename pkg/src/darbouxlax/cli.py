"""Command-line entry point.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage error, 3 numerical
degeneracy (singular dressing function, defective eigenproblem).
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bdt, boussinesq as bq, nczs
from .errors import DegeneracyError, SingularityError
from .suites import SUITES, Check, bdt_checks, chain_checks, chain_seeds, top_initial

REPORT_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3

TOLERANCE_NAMES = (
    "abelian", "bdt_covariance", "bell", "chain", "covariance", "covariance_rel", "dt_cov",
    "eig_drift", "identity", "kernel", "lax", "miura", "peak", "persistence", "trace_drift",
    "zs_compat",
)
SUITE_ORDER = ("verify-dt", "verify-bq", "verify-zs", "bdt")
GRID_DEFAULTS = {"x_min": -10.0, "x_max": 10.0, "n_x": 201, "t_min": 0.0, "t_max": 1.0, "n_t": 11}

EPILOG = """\
CSV columns:
  soliton  x,t,w            dressed potential w = a1' + 2 a2 (ln phi)_xx, phi = 1 + c exp(kx + wt)
  euler    y,u<i><j>_re,u<i><j>_im,...,drift<k>   top trajectory and |tr u^k(y) - tr u^k(0)|
  bdt      t,spectral,evolution,idempotence,persistence   dressed residual norms per sample
JSON reports carry report_version, command, seed, passed and checks (sorted by name);
each check lists name, residual, tolerance, comparison and passed.
"""


class UsageError(Exception):
    pass


# -- configuration -------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="RNG seed (default 0)")
    p.add_argument("--config", default=S, help="JSON file of option values; flags override it")
    p.add_argument("--tol", action="append", default=S, metavar="NAME=VALUE",
                   help="override a tolerance (repeatable)")
    p.add_argument("--output", default=S, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--report", default=S, help="write the JSON report of data commands here")
    for name in GRID_DEFAULTS:
        p.add_argument("--" + name.replace("_", "-"), type=int if name.startswith("n_") else float,
                       default=S, dest=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darbouxlax", epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     description="Darboux covariance checks for Lax pairs.")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("soliton", help="one-soliton dressed potential on the grid (CSV)")
    for name, typ in (("k", float), ("a2", float), ("a1", float), ("alpha", float), ("b2", float), ("c", float)):
        p.add_argument("--" + name, type=typ, default=S)

    p = sub.add_parser("chain", help="dressing chain potentials and residuals (JSON)")
    p.add_argument("--depth", type=int, default=S)

    for name in ("verify-dt", "verify-bq", "verify-zs", "verify-all"):
        sub.add_parser(name, help=f"run the {name[7:]} check suite (JSON report)")

    p = sub.add_parser("euler", help="integrate the matrix top (CSV)")
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--y-end", type=float, default=S, dest="y_end")
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--every", type=int, default=S, help="write every n-th sample")

    p = sub.add_parser("bdt", help="binary dressing along the density-matrix flow (CSV)")
    p.add_argument("--dim", type=int, default=S)
    p.add_argument("--h-poly", default=S, dest="h_poly", help="coefficients c0,c1,... of h")
    p.add_argument("--lambda", type=complex, default=S, dest="lam")
    p.add_argument("--mu", type=complex, default=S)
    p.add_argument("--nu", type=complex, default=S)
    p.add_argument("--t-end", type=float, default=S, dest="t_end")
    p.add_argument("--h-step", type=float, default=S, dest="h_step")

    for sp in sub.choices.values():
        _add_common(sp)
        sp.formatter_class = argparse.RawDescriptionHelpFormatter
        sp.epilog = EPILOG
    return parser


COMMAND_DEFAULTS = {
    "soliton": {"k": 1.0, "a2": 1.0, "a1": 0.0, "alpha": -0.75, "b2": 0.0, "c": 1.0},
    "chain": {"depth": 3},
    "euler": {"dim": 3, "y_end": 10.0, "h": 1e-3, "every": 1},
    "bdt": {"dim": 3, "h_poly": "0,0,1", "lam": 0.7, "mu": 1.3, "nu": -0.9, "t_end": 5.0, "h_step": 1e-3},
}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and flags, then validate."""
    given = vars(args).copy()
    command = given.pop("command")
    cfg = {"seed": 0, "tol": {}, "output": None, "format": None, "report": None, **GRID_DEFAULTS,
           **COMMAND_DEFAULTS.get(command, {})}
    if "config" in given:
        path = given.pop("config")
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key in ("tolerances", "tol"):
                if not isinstance(value, dict):
                    raise UsageError("config tolerances must be an object")
                cfg["tol"].update(value)
            elif key == "grid" and isinstance(value, dict):
                for gk, gv in value.items():
                    if gk not in GRID_DEFAULTS:
                        raise UsageError(f"unknown grid key {gk!r}")
                    cfg[gk] = gv
            elif key in cfg:
                cfg[key] = value
            else:
                raise UsageError(f"unknown config key {key!r} for {command}")
    for item in given.pop("tol", []):
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        cfg["tol"][name] = value
    cfg.update(given)
    cfg["command"] = command
    _validate(cfg)
    return cfg


def _validate(cfg: dict):
    tol = {}
    for name, value in cfg["tol"].items():
        if name not in TOLERANCE_NAMES:
            raise UsageError(f"unknown tolerance {name!r}; known: {', '.join(TOLERANCE_NAMES)}")
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise UsageError(f"tolerance {name} is not a number: {value!r}") from None
        if not v > 0:
            raise UsageError(f"tolerance {name} must be positive")
        tol[name] = v
    cfg["tol"] = tol
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise UsageError("seed must be a non-negative integer")
    for n in ("n_x", "n_t"):
        if not isinstance(cfg[n], int) or cfg[n] < 2:
            raise UsageError(f"{n} must be an integer >= 2")
    for lo, hi in (("x_min", "x_max"), ("t_min", "t_max")):
        if not float(cfg[lo]) < float(cfg[hi]):
            raise UsageError(f"{lo} must be below {hi}")
    if cfg["format"] not in (None, "csv", "json"):
        raise UsageError("format must be csv or json")
    c = cfg["command"]
    if c == "chain" and not (isinstance(cfg["depth"], int) and 1 <= cfg["depth"] <= 3):
        raise UsageError("depth must be 1, 2 or 3")
    if c == "euler":
        if not (isinstance(cfg["dim"], int) and cfg["dim"] >= 1):
            raise UsageError("dim must be a positive integer")
        if not (float(cfg["h"]) > 0 and float(cfg["y_end"]) > 0):
            raise UsageError("h and y-end must be positive")
        if not (isinstance(cfg["every"], int) and cfg["every"] >= 1):
            raise UsageError("every must be a positive integer")
    if c == "bdt":
        if not (isinstance(cfg["dim"], int) and cfg["dim"] >= 2):
            raise UsageError("dim must be an integer >= 2")
        try:
            cfg["h_poly"] = [complex(v) for v in str(cfg["h_poly"]).split(",")]
        except ValueError:
            raise UsageError(f"h-poly must be comma-separated numbers, got {cfg['h_poly']!r}") from None
        for name in ("lam", "mu", "nu"):
            try:
                cfg[name] = complex(cfg[name])
            except (TypeError, ValueError):
                raise UsageError(f"{name} must be a number") from None
            if cfg[name] == 0:
                raise UsageError(f"{name} must be non-zero")
        if cfg["lam"] in (cfg["mu"], cfg["nu"]):
            raise UsageError("lambda must differ from mu and nu")
        t_end, h = float(cfg["t_end"]), float(cfg["h_step"])
        if not (t_end > 0 and h > 0) or abs(round(t_end / h) * h - t_end) > 1e-9 * t_end:
            raise UsageError("t-end must be a positive multiple of h-step")
        if round(t_end / h) < 5:
            raise UsageError("need at least five time steps")
    if c == "soliton":
        for name in ("k", "a2", "a1", "alpha", "b2", "c"):
            try:
                cfg[name] = float(cfg[name])
            except (TypeError, ValueError):
                raise UsageError(f"{name} must be a number") from None
        if cfg["a2"] == 0:
            raise UsageError("a2 must be non-zero")
        if cfg["c"] <= 0:
            raise UsageError("c must be positive (phi must not vanish)")


# -- commands ------------------------------------------------------------------


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _grid(cfg):
    x = np.linspace(float(cfg["x_min"]), float(cfg["x_max"]), cfg["n_x"])
    t = np.linspace(float(cfg["t_min"]), float(cfg["t_max"]), cfg["n_t"])
    return x, t


def _report(cfg, checks: list[Check], extra: dict | None = None) -> dict:
    checks = sorted(checks, key=lambda c: c.name)
    rep = {"report_version": REPORT_VERSION, "command": cfg["command"], "seed": cfg["seed"],
           "passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}
    if extra:
        rep.update(extra)
    return rep


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def cmd_verify(cfg) -> tuple[dict, str | None]:
    names = SUITE_ORDER if cfg["command"] == "verify-all" else (cfg["command"],)
    checks = []
    for name in names:
        checks += SUITES[name](_rng(cfg["seed"], SUITE_ORDER.index(name)), cfg["tol"])
    return _report(cfg, checks), None


def cmd_soliton(cfg):
    p = bq.BqParams(alpha=cfg["alpha"], a2=cfg["a2"], a1=cfg["a1"], b2=cfg["b2"])
    k = cfg["k"]
    phi = bq.seed_wavefunction(p, 0.0) + bq.seed_wavefunction(p, k, cfg["c"])
    w = bq.dress_potential(phi, p)
    x, t = _grid(cfg)
    X, T = np.meshgrid(x, t, indexing="ij")
    vals = np.real(w(X, T)[..., 0, 0])
    mismatch = abs(bq.seed_eigenvalue(p, k))
    checks = [
        Check("soliton.peak", abs(float(vals.max()) - cfg["a2"] * k**2 / 2), None, "report"),
        Check("soliton.eigenvalue_mismatch", mismatch, None, "report"),
    ]
    rows = ((xi, ti, vals[i, j]) for i, xi in enumerate(x) for j, ti in enumerate(t))
    return _report(cfg, checks), _csv(["x", "t", "w"], rows)


def cmd_chain(cfg):
    depth = cfg["depth"]
    p, seeds = chain_seeds(depth)
    ch = bq.dressing_chain(seeds, p)
    x, t = _grid(cfg)
    X, T = np.meshgrid(x, t, indexing="ij")
    levels = []
    for n, w in enumerate(ch.potentials):
        level = {"level": n, "potential": np.real(w(X, T)[..., 0, 0]).tolist()}
        if n < depth:
            lam = complex(ch.eigenvalues[n])
            level["eigenvalue"] = [lam.real, lam.imag]
        levels.append(level)
    extra = {"x": x.tolist(), "t": t.tolist(), "levels": levels}
    return _report(cfg, chain_checks(cfg["tol"], depth), extra), None


def cmd_euler(cfg):
    dim = cfg["dim"]
    s0 = top_initial(_rng(cfg["seed"], 10), dim)
    traj = nczs.euler_integrate(s0, float(cfg["y_end"]), float(cfg["h"]))
    header = ["y"]
    for i in range(dim):
        for j in range(dim):
            header += [f"u{i}{j}_re", f"u{i}{j}_im"]
    header += [f"drift{k}" for k in range(1, dim + 1)]
    t0 = traj[0].traces

    def rows():
        for s in traj[::cfg["every"]]:
            flat = s.u.ravel()
            yield [s.y, *np.column_stack([flat.real, flat.imag]).ravel(), *np.abs(s.traces - t0)]

    checks = [Check("euler.trace_drift", nczs.trace_drift(traj), cfg["tol"].get("trace_drift", 1e-8)),
              Check("euler.eig_drift", nczs.eigenvalue_drift(traj), cfg["tol"].get("eig_drift", 1e-7))]
    return _report(cfg, checks), _csv(header, rows())


def cmd_bdt(cfg):
    rng = _rng(cfg["seed"], 3)
    h = bdt.MatrixFunction.polynomial(cfg["h_poly"])
    scene = bdt.random_scene(rng, cfg["dim"], h, cfg["lam"], cfg["mu"], cfg["nu"])
    t_end, h_step = float(cfg["t_end"]), float(cfg["h_step"])
    traj = bdt.flow_integrate(scene, t_end, h_step)
    res = bdt.dressed_residuals(traj)
    pers = bdt.persistence(traj)
    pmax = np.max(np.stack(list(pers.values())), axis=0)[2:-2]
    rows = zip(traj.ts[2:-2], res["spectral"], res["evolution"], res["idempotence"], pmax)
    checks = bdt_checks(scene, t_end, h_step, cfg["tol"], "bdt")
    return _report(cfg, checks), _csv(["t", "spectral", "evolution", "idempotence", "persistence"], rows)


COMMANDS = {"soliton": cmd_soliton, "chain": cmd_chain, "euler": cmd_euler, "bdt": cmd_bdt}


def run(cfg: dict) -> int:
    command = cfg["command"]
    try:
        report, data = COMMANDS.get(command, cmd_verify)(cfg)
    except (DegeneracyError, SingularityError) as exc:
        print(f"darbouxlax: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    if data is None:
        _emit(cfg["output"], _dumps(report))
    else:
        if cfg["format"] == "json":
            raise UsageError(f"{command} emits CSV data; use --report for the JSON summary")
        _emit(cfg["output"], data)
        if cfg["report"]:
            _emit(cfg["report"], _dumps(report))
        else:
            status = "pass" if report["passed"] else "FAIL"
            print(f"{command}: {status} ({len(report['checks'])} checks)", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _emit(path, text: str):
    if path in (None, "-"):
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:  # reader closed early, e.g. piped into head
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    else:
        Path(path).write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if cfg["format"] == "json" and args.command in COMMANDS and args.command != "chain":
            raise UsageError(f"{args.command} emits CSV data; use --report for the JSON summary")
        return run(cfg)
    except UsageError as exc:
        print(f"darbouxlax: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
