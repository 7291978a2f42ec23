"""Command-line front end: solve / curves / sweep / simulate / verify.

Configs are JSON (schema-validated, unknown keys rejected); every run echoes
its fully resolved configuration into the output directory, curves go to CSV
with 17-significant-digit round-trippable floats, and reports go to JSON.

Exit codes: 0 ok, 1 verification violation, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from importlib.metadata import version as _pkg_version

import numpy as np

from .errors import ConfigError, NumericError
from .levy import LevyModel, PhaseTypeJump
from .optimizer import HybridSolution, solve, sweep
from .scale import build_engine
from .sim import SimConfig, estimate_value
from .valuation import (Gamma, ProblemParams, Regime, gamma_small, v_hybrid)
from .verify import hjb_scan

try:
    VERSION = _pkg_version("dualdiv")
except Exception:  # not installed (e.g. run from a checkout)
    VERSION = "0.0.0+local"

_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "params"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["c", "sigma", "kappa"],
            "properties": {
                "c": {"type": "number"},
                "sigma": {"type": "number", "minimum": 0},
                "kappa": {"type": "number", "minimum": 0},
                "alpha": {"type": "array", "items": {"type": "number"}},
                "T": {"type": "array",
                      "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q", "r", "beta"],
            "properties": {
                "q": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "x_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variable", "values"],
            "properties": {
                "variable": {"enum": ["beta", "r"]},
                "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "x_refs": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "horizon_eps": {"type": "number", "exclusiveMinimum": 0,
                                "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
                "x0": {"type": "number", "minimum": 0},
            },
        },
    },
}

_DEFAULTS = {
    "grid": {"n": 50, "x_max": None},
    "sweep": {"variable": "beta", "values": [], "x_refs": [0.5, 1.0, 2.0]},
    "sim": {"paths": 200_000, "dt": 1e-3, "horizon_eps": 1e-8,
            "seed": 20260809, "x0": 1.0},
}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    import jsonschema
    try:
        jsonschema.validate(raw, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config validation failed: {exc.message}") from exc
    resolved = {"model": dict(raw["model"]), "params": dict(raw["params"])}
    for block, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        merged.update(raw.get(block, {}))
        resolved[block] = merged
    if resolved["model"]["kappa"] > 0 and (
            "alpha" not in resolved["model"] or "T" not in resolved["model"]):
        raise ConfigError("kappa > 0 requires the alpha and T jump blocks")
    return resolved


def build_model(config: dict) -> LevyModel:
    mc = config["model"]
    jump = None
    if mc["kappa"] > 0:
        try:
            jump = PhaseTypeJump(mc["alpha"], mc["T"])
        except ValueError as exc:
            raise ConfigError(f"invalid phase-type block: {exc}") from exc
    try:
        return LevyModel(mc["c"], mc["sigma"], mc["kappa"], jump)
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def build_params(config: dict) -> ProblemParams:
    pc = config["params"]
    return ProblemParams(pc["q"], pc["r"], pc["beta"])


def _config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _echo_config(config: dict, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return format(value, ".17g")


def write_csv(path: str, header: list[str], rows, config_hash: str):
    with open(path, "w") as fh:
        fh.write(f"# dualdiv {VERSION} config_sha256={config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _solution_dict(sol: HybridSolution) -> dict:
    return {
        "regime": sol.regime.value,
        "a_star": sol.a_star,
        "b_star": None if math.isinf(sol.b_star) else sol.b_star,
        "b_star_unbounded": math.isinf(sol.b_star),
        "epsilon": sol.epsilon,
        "diagnostics": sol.diagnostics,
    }


def cmd_solve(config: dict, out_dir: str) -> int:
    _echo_config(config, out_dir)
    model = build_model(config)
    params = build_params(config)
    sol = solve(params, model)
    payload = _solution_dict(sol)
    with open(os.path.join(out_dir, "solution.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    b_txt = "inf" if math.isinf(sol.b_star) else f"{sol.b_star:.12g}"
    eps_txt = "n/a" if sol.epsilon is None else f"{sol.epsilon:.12g}"
    print(f"regime={sol.regime.value} a_star={sol.a_star:.12g} b_star={b_txt} "
          f"epsilon={eps_txt}")
    for key, val in sol.diagnostics.items():
        print(f"  {key}={val:.6g}" if isinstance(val, float) else f"  {key}={val}")
    return 0


def cmd_curves(config: dict, out_dir: str) -> int:
    _echo_config(config, out_dir)
    model = build_model(config)
    params = build_params(config)
    chash = _config_hash(config)
    sol = solve(params, model)
    if sol.regime is not Regime.HYBRID:
        print(f"curves need the hybrid regime, got {sol.regime.value}", file=sys.stderr)
        return 2
    engine = build_engine(model, params.q, params.r)
    a_star, b_star = sol.a_star, sol.b_star

    rows = []
    for mult in (0.2, 0.4, 0.6, 0.8, 1.0, 1.2):
        b = mult * b_star
        a_min = max(b - sol.epsilon, 0.0)
        a_grid = sorted(set(np.linspace(0.0, b, 101)[:-1]) | {a_min})
        for a in a_grid:
            gam = Gamma(params, engine, a, b)
            gsm = gamma_small(params, engine, a, b) if 0.0 < a < b else math.nan
            rows.append((b, a, gam, gsm))
    write_csv(os.path.join(out_dir, "gamma_scan.csv"),
              ["b", "a", "Gamma", "gamma_small"], rows, chash)

    grid_cfg = config["grid"]
    x_max = grid_cfg["x_max"] or 1.5 * b_star
    xs = np.linspace(0.0, x_max, grid_cfg["n"])
    sub_as = sorted({0.0, a_star / 2.0, (a_star + b_star) / 2.0})
    sub_bs = sorted({(a_star + b_star) / 2.0, b_star + 0.5})
    pairs = [(a, b) for a in sub_as for b in sub_bs if a < b and (a, b) != (a_star, b_star)]
    header = ["x", "v_opt"] + [f"v_sub_a{a:.6g}_b{b:.6g}" for a, b in pairs]
    rows = []
    for x in xs:
        row = [float(x), sol.value(float(x))]
        row += [v_hybrid(params, engine, a, b, float(x)) for a, b in pairs]
        rows.append(tuple(row))
    write_csv(os.path.join(out_dir, "value_curves.csv"), header, rows, chash)
    print(f"wrote gamma_scan.csv and value_curves.csv ({len(pairs)} suboptimal pairs)")
    return 0


def cmd_sweep(config: dict, out_dir: str) -> int:
    _echo_config(config, out_dir)
    model = build_model(config)
    params = build_params(config)
    chash = _config_hash(config)
    sw = config["sweep"]
    if not sw["values"]:
        raise ConfigError("sweep.values must be non-empty")
    sols = sweep(params, model, sw["variable"], sw["values"])
    x_refs = sw["x_refs"]
    header = ([sw["variable"], "regime", "a_star", "b_star", "epsilon"]
              + [f"v_at_{x:g}" for x in x_refs])
    rows = []
    for val, sol in zip(sw["values"], sols):
        eps = math.nan if sol.epsilon is None else sol.epsilon
        rows.append((float(val), sol.regime.value, sol.a_star, float(sol.b_star),
                     eps, *[sol.value(float(x)) for x in x_refs]))
    write_csv(os.path.join(out_dir, "sweep.csv"), header, rows, chash)
    print(f"wrote sweep.csv ({len(rows)} rows)")
    return 0


def cmd_simulate(config: dict, out_dir: str) -> int:
    _echo_config(config, out_dir)
    model = build_model(config)
    params = build_params(config)
    sc = config["sim"]
    sim_config = SimConfig(paths=sc["paths"], dt=sc["dt"],
                           horizon_eps=sc["horizon_eps"], seed=sc["seed"],
                           x0=sc["x0"])
    sol = solve(params, model)
    a, b = sol.a_star, sol.b_star
    vp, vc, v = estimate_value(model, params, sim_config, a, b)
    closed = sol.value(sim_config.x0)
    gap = abs(v.mean - closed)
    tol = v.ci_half_width_99 + v.truncation_bound
    payload = {
        "strategy": _solution_dict(sol),
        "x0": sim_config.x0,
        "estimates": {
            "vp": vars(vp), "vc": vars(vc), "v": vars(v),
        },
        "closed_form_v": closed,
        "abs_gap": gap,
        "tolerance_ci99_plus_truncation": tol,
        "within_tolerance": gap <= tol,
    }
    with open(os.path.join(out_dir, "simulate.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"v_mc={v.mean:.6f} (+-{v.ci_half_width_99:.6f}) closed={closed:.6f} "
          f"gap={gap:.6f} tol={tol:.6f} ok={gap <= tol}")
    return 0


def cmd_verify(config: dict, out_dir: str) -> int:
    _echo_config(config, out_dir)
    model = build_model(config)
    params = build_params(config)
    sol = solve(params, model)
    report = hjb_scan(params, model, sol)
    with open(os.path.join(out_dir, "hjb_report.json"), "w") as fh:
        fh.write(report.to_json())
    print(f"regime={report.regime} grid_points={len(report.grid)} "
          f"max_violation={report.max_violation:.3e} "
          f"{'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dualdiv",
        description="Hybrid continuous/periodic dividend barriers for the dual Levy model")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "curves", "sweep", "simulate", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
    args = parser.parse_args(argv)

    # DUALDIV_THREADS caps numba's thread pool; kernels here are single-threaded
    # but the cap is honored for forward compatibility.
    threads = os.environ.get("DUALDIV_THREADS")
    if threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", threads)

    try:
        config = load_config(args.config)
        for key, arg in (("seed", args.seed), ("paths", args.paths), ("dt", args.dt)):
            if arg is not None:
                config["sim"][key] = arg
        handler = {
            "solve": cmd_solve,
            "curves": cmd_curves,
            "sweep": cmd_sweep,
            "simulate": cmd_simulate,
            "verify": cmd_verify,
        }[args.command]
        return handler(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
