"""Command-line front end.

Subcommands ``blue``, ``weights``, ``design``, ``efficiency``, ``simulate`` read
a JSON run configuration (``--config``) with flag overrides; ``reproduce``
recomputes the stored efficiency/design tables.  Exit codes: 0 success,
1 numeric or search failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from typing import Optional

import jsonschema
import numpy as np

from . import tables
from .basis import RegressionBasis, affine_shift, gram_rank, polynomial_basis, trig_basis
from .continuous_blue import (blue_general_kernel, c_matrix, degenerate_f0_zero,
                              degenerate_intercept, degenerate_no_intercept)
from .design_search import OBJECTIVES, PsoConfig, equidistant_design, optimize_design
from .discrete_estimator import efficiency_multi, star_estimator
from .domain import Design, Interval
from .errors import ConfigError, TridesignError
from .finite_blue import efficiency_of, wlse_variance
from .kernel import TriangularKernel, brownian, exponential
from .montecarlo import SimulationPlan, empirical_mse

log = logging.getLogger(__name__)

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("blue", "weights", "design", "efficiency", "simulate", "reproduce")
FORMATS = ("json", "csv", "text")

_BASIS = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["type", "powers"],
         "properties": {"type": {"const": "polynomial"},
                        "powers": {"type": "array", "minItems": 1,
                                   "items": {"type": "integer", "minimum": 0}}}},
        {"type": "object", "additionalProperties": False, "required": ["type", "frequencies"],
         "properties": {"type": {"const": "trig"},
                        "frequencies": {"type": "array", "minItems": 1,
                                        "items": {"type": "integer", "minimum": 1}}}},
        {"type": "object", "additionalProperties": False, "required": ["type", "base", "offset"],
         "properties": {"type": {"const": "affine_shift"},
                        "base": {"$ref": "#/$defs/basis"},
                        "offset": {"oneOf": [{"type": "number"},
                                             {"type": "array", "items": {"type": "number"}}]}}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"basis": _BASIS},
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {"type": "object", "additionalProperties": False, "required": ["basis", "interval"],
                  "properties": {"basis": {"$ref": "#/$defs/basis"},
                                 "interval": {"type": "array", "minItems": 2, "maxItems": 2,
                                              "items": {"type": "number"}}}},
        "kernel": {"type": "object", "additionalProperties": False, "required": ["type"],
                   "properties": {"type": {"enum": ["brownian", "exponential"]},
                                  "lambda": {"type": "number", "exclusiveMinimum": 0}}},
        "n": {"type": "integer", "minimum": 2},
        "design": {"type": "object", "additionalProperties": False, "required": ["type"],
                   "properties": {"type": {"enum": ["uniform", "explicit", "optimize"]},
                                  "points": {"type": "array", "minItems": 2,
                                             "items": {"type": "number"}}}},
        "objective": {"enum": list(OBJECTIVES)},
        "pso": {"type": "object", "additionalProperties": False,
                "properties": {"swarm_size": {"type": "integer", "minimum": 10},
                               "iterations": {"type": "integer", "minimum": 1},
                               "restarts": {"type": "integer", "minimum": 1},
                               "inertia": {"type": "number", "exclusiveMinimum": 0},
                               "cognitive": {"type": "number", "exclusiveMinimum": 0},
                               "social": {"type": "number", "exclusiveMinimum": 0},
                               "seed": {"type": "integer", "minimum": 0},
                               "polish": {"type": "boolean"}}},
        "simulation": {"type": "object", "additionalProperties": False,
                       "properties": {"theta": {"type": "array", "items": {"type": "number"}},
                                      "replicates": {"type": "integer", "minimum": 20},
                                      "seed": {"type": "integer", "minimum": 0}}},
        "output": {"enum": list(FORMATS)},
        "table": {"enum": list(tables.TABLES) + ["all"]},
        # reports carry these; ignored on input so a report can be re-run as a config
        "command": {"enum": list(COMMANDS)},
        "result": {},
    },
}

DEFAULTS = {"kernel": {"type": "brownian"}, "n": 5, "design": {"type": "optimize"},
            "objective": "mse_star", "output": "json"}


# ---------------------------------------------------------------- config

def _field(error: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in error.absolute_path)
    return path or "<root>"


def validate_config(cfg) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"config field '{_field(err)}': {err.message}")


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if getattr(args, "objective", None):
        cfg["objective"] = {"mse-star": "mse_star", "wlse": "wlse_trace"}[args.objective]
    if getattr(args, "n", None) is not None:
        cfg["n"] = args.n
    if getattr(args, "design", None):
        cfg["design"] = {"type": args.design}
    pso = cfg.setdefault("pso", {})
    for flag, key in (("seed", "seed"), ("swarm", "swarm_size"), ("iters", "iterations"),
                      ("restarts", "restarts")):
        if getattr(args, flag, None) is not None:
            pso[key] = getattr(args, flag)
    if getattr(args, "no_polish", False):
        pso["polish"] = False
    if not pso:
        cfg.pop("pso")
    sim = cfg.setdefault("simulation", {})
    if getattr(args, "replicates", None) is not None:
        sim["replicates"] = args.replicates
    if getattr(args, "theta", None) is not None:
        sim["theta"] = args.theta
    if getattr(args, "seed", None) is not None:
        sim["seed"] = args.seed
    if not sim:
        cfg.pop("simulation")
    if getattr(args, "format", None):
        cfg["output"] = args.format
    return cfg


def resolve(cfg: dict, need_model: bool = True) -> dict:
    validate_config(cfg)
    if need_model and "model" not in cfg:
        raise ConfigError("config field 'model': required (basis and interval)")
    full = copy.deepcopy(DEFAULTS)
    full.update(copy.deepcopy(cfg))
    full.pop("result", None)
    full.pop("command", None)
    if full["design"]["type"] == "explicit":
        if "points" not in full["design"]:
            raise ConfigError("config field 'design/points': required for an explicit design")
        full["n"] = len(full["design"]["points"])
    return full


def build_basis(spec: dict, where: str = "model/basis") -> RegressionBasis:
    try:
        if spec["type"] == "polynomial":
            return polynomial_basis(spec["powers"])
        if spec["type"] == "trig":
            return trig_basis(spec["frequencies"])
        return affine_shift(build_basis(spec["base"], where + "/base"), spec["offset"])
    except ValueError as exc:
        raise ConfigError(f"config field '{where}': {exc}") from exc


def build_kernel(spec: dict) -> TriangularKernel:
    if spec["type"] == "brownian":
        if "lambda" in spec:
            raise ConfigError("config field 'kernel/lambda': only valid for the exponential kernel")
        return brownian()
    return exponential(spec.get("lambda", 1.0))


def build_interval(cfg: dict) -> Interval:
    try:
        return Interval(*cfg["model"]["interval"])
    except ValueError as exc:
        raise ConfigError(f"config field 'model/interval': {exc}") from exc


def build_pso(cfg: dict) -> tuple:
    spec = dict(cfg.get("pso", {}))
    polish = spec.pop("polish", True)
    return PsoConfig(**spec), polish


def build_design(cfg: dict, interval: Interval) -> Optional[Design]:
    d = cfg["design"]
    try:
        if d["type"] == "uniform":
            return equidistant_design(cfg["n"], interval)
        if d["type"] == "explicit":
            design = Design(d["points"])
            design.check_span(interval)
            return design
    except ValueError as exc:
        raise ConfigError(f"config field 'design': {exc}") from exc
    return None


# ---------------------------------------------------------------- commands

def _echo(cfg: dict, design: Optional[Design] = None) -> dict:
    out = copy.deepcopy(cfg)
    if design is not None:
        out["design"] = {"type": "explicit", "points": design.points.tolist()}
        out["n"] = design.n
    return out


def _blue_for(basis, kernel, interval):
    if kernel.kind == "brownian" and interval.a == 0:
        if gram_rank(basis, interval).has_intercept:
            return degenerate_intercept(basis, interval)
        if np.max(np.abs(basis.f(0.0))) <= 1e-14:
            return degenerate_f0_zero(basis, interval)
        return degenerate_no_intercept(basis, interval)
    if kernel.kind == "brownian":
        return c_matrix(basis, interval)
    return blue_general_kernel(basis, kernel, interval)


_ANNOTATIONS = {
    "none": "regular case: variance C^-1 of the BLUE from the full path",
    "no_intercept_f0_nonzero": "a = 0, f(0) != 0: limit of C_a^-1 as a -> 0 (C itself diverges)",
    "f0_zero": "a = 0, f(0) = 0: Y_0 carries no information, variance M_0^-1",
    "intercept": "a = 0 with intercept: Y_0 fixes the intercept; remaining parameters from Y_t - Y_0",
}


def cmd_blue(cfg: dict) -> dict:
    basis, kernel, interval = build_basis(cfg["model"]["basis"]), build_kernel(cfg["kernel"]), build_interval(cfg)
    blue = _blue_for(basis, kernel, interval)
    res = blue.to_json()
    res["annotation"] = _ANNOTATIONS[blue.degenerate_kind]
    return {"command": "blue", **_echo(cfg), "result": res}


def _setup(cfg):
    basis, kernel, interval = build_basis(cfg["model"]["basis"]), build_kernel(cfg["kernel"]), build_interval(cfg)
    return basis, kernel, interval


def _search(cfg, basis, kernel, interval):
    pso, polish = build_pso(cfg)
    return optimize_design(cfg["objective"], basis, kernel, cfg["n"], interval, pso,
                           polish_result=polish), pso


def _estimator_report(basis, kernel, interval, design) -> dict:
    est = star_estimator(basis, kernel, design, interval)
    wlse = wlse_variance(basis, kernel, design).variance
    c_inv = tables.continuous_variance(basis, kernel, interval)
    return {
        "design": design.points.tolist(),
        "increment_weights": est.weights.tolist(),
        "observation_weights": est.observation_weights().tolist(),
        "C_inv": c_inv.tolist(),
        "variance_star": est.variance().tolist(),
        "variance_wlse": wlse.tolist(),
        "efficiency_star": efficiency_multi(est),
        "efficiency_wlse": efficiency_of(wlse, c_inv),
        "used_pinv": est.used_pinv,
        "unbiased": est.unbiased,
    }, est


def _design_or_search(cfg, basis, kernel, interval):
    design = build_design(cfg, interval)
    search = None
    if design is None:
        search, _ = _search(cfg, basis, kernel, interval)
        design = search.design
    return design, search


def cmd_weights(cfg: dict) -> dict:
    basis, kernel, interval = _setup(cfg)
    design, search = _design_or_search(cfg, basis, kernel, interval)
    rep, _ = _estimator_report(basis, kernel, interval, design)
    if search is not None:
        rep["search"] = search.to_json()
    return {"command": "weights", **_echo(cfg, design), "result": rep}


def cmd_design(cfg: dict) -> dict:
    basis, kernel, interval = _setup(cfg)
    design, search = _design_or_search(cfg, basis, kernel, interval)
    rep, _ = _estimator_report(basis, kernel, interval, design)
    if search is not None:
        rep["search"] = search.to_json()
        rep["seed"] = search.config.seed
    else:
        rep["search"] = None
    return {"command": "design", **_echo(cfg, design), "result": rep}


def cmd_efficiency(cfg: dict) -> dict:
    basis, kernel, interval = _setup(cfg)
    design, search = _design_or_search(cfg, basis, kernel, interval)
    rep, _ = _estimator_report(basis, kernel, interval, design)
    keep = ("design", "efficiency_star", "efficiency_wlse", "observation_weights")
    res = {k: rep[k] for k in keep}
    res["trace_C_inv"] = float(np.trace(rep["C_inv"]))
    res["trace_star"] = float(np.trace(rep["variance_star"]))
    res["trace_wlse"] = float(np.trace(rep["variance_wlse"]))
    return {"command": "efficiency", **_echo(cfg, design), "result": res}


def cmd_simulate(cfg: dict) -> dict:
    basis, kernel, interval = _setup(cfg)
    sim = cfg.get("simulation", {})
    theta = sim.get("theta", [1.0] * basis.m)
    if len(theta) != basis.m:
        raise ConfigError(f"config field 'simulation/theta': expected {basis.m} entries, got {len(theta)}")
    design, _ = _design_or_search(cfg, basis, kernel, interval)
    plan = SimulationPlan(basis, kernel, design, np.asarray(theta, dtype=float),
                          sim.get("replicates", 100_000), sim.get("seed", 0))
    est = star_estimator(basis, kernel, design, interval)
    theory = {"star": est.variance(), "wlse": wlse_variance(basis, kernel, design).variance}
    res = {}
    for name, estimator in (("star", est), ("wlse", "wlse")):
        report = empirical_mse(estimator, plan)
        res[name] = {**report.to_json(), "theory": theory[name].tolist(),
                     **report.check(theory[name])}
    res["seed"] = plan.seed
    return {"command": "simulate", **_echo(cfg, design), "result": res}


def cmd_reproduce(cfg: dict, which: str = "all") -> dict:
    pso, _ = build_pso(cfg)
    rep = tables.reproduce(which, pso)
    return {"command": "reproduce", "table": which, "all_pass": tables.all_pass(rep), "result": rep}


# ---------------------------------------------------------------- output

def _rows_for_csv(report: dict):
    cmd, res = report["command"], report["result"]
    if cmd in ("weights", "design", "efficiency"):
        W = np.asarray(res["observation_weights"])
        header = ["index", "t"] + [f"w{j + 1}" for j in range(W.shape[1])]
        rows = [[i, t, *W[i]] for i, t in enumerate(res["design"])]
        return header, rows
    if cmd == "blue":
        Ci = np.asarray(res["C_inv"])
        C = None if res["C"] is None else np.asarray(res["C"])
        rows = [[i, j, "" if C is None else C[i, j], Ci[i, j]]
                for i in range(Ci.shape[0]) for j in range(Ci.shape[1])]
        return ["row", "col", "C", "C_inv"], rows
    if cmd == "simulate":
        rows = []
        for name in ("star", "wlse"):
            r = res[name]
            emp, se, th = map(np.asarray, (r["mse_matrix"], r["mse_se"], r["theory"]))
            for i in range(emp.shape[0]):
                for j in range(emp.shape[1]):
                    rows.append([name, i, j, emp[i, j], se[i, j], th[i, j]])
        return ["estimator", "row", "col", "empirical", "se", "theory"], rows
    rows = []
    for tab, block in res.items():
        for r in block["rows"]:
            computed = r["computed"]
            rows.append([tab, r.get("model", r.get("f")), r.get("kernel", "brownian"),
                         r.get("design", "uniform"), r.get("estimator", r.get("objective")),
                         json.dumps(computed) if isinstance(computed, list) else computed,
                         json.dumps(r["published"]) if isinstance(r["published"], list) else r["published"],
                         r["pass"]])
    return ["table", "model", "kernel", "design", "estimator", "computed", "published", "pass"], rows


def _fmt_matrix(a) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return "\n".join("  " + " ".join(f"{x + 0.0:>14.8g}" for x in row) for row in a)


def _text(report: dict) -> str:
    cmd, res = report["command"], report["result"]
    if cmd == "reproduce":
        return tables.format_text(res)
    lines = [f"{cmd}"]
    for key, value in res.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            lines.append(f"{key}:")
            lines.append(_fmt_matrix(value))
        elif isinstance(value, dict):
            lines.append(f"{key}:")
            for k, v in value.items():
                if isinstance(v, list) and v and isinstance(v[0], list):
                    lines.append(f"  {k}:")
                    lines.append(_fmt_matrix(v))
                elif k != "trace":
                    lines.append(f"  {k}: {v}")
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2)
    if fmt == "csv":
        header, rows = _rows_for_csv(report)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    return _text(report)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tridesign", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--out", help="write the report here instead of stdout")
        s.add_argument("--format", choices=FORMATS)
        s.add_argument("--seed", type=int)
        s.add_argument("--swarm", type=int, help="PSO swarm size")
        s.add_argument("--iters", type=int, help="PSO iterations")
        s.add_argument("--restarts", type=int, help="PSO restarts")
        s.add_argument("--no-polish", action="store_true", help="skip the line-search polish after PSO")
        if name == "reproduce":
            s.add_argument("which", nargs="?", default="all", choices=list(tables.TABLES) + ["all"])
            continue
        s.add_argument("--objective", choices=("mse-star", "wlse"))
        s.add_argument("--n", type=int)
        s.add_argument("--design", choices=("uniform", "optimize"))
        if name == "simulate":
            s.add_argument("--replicates", type=int)
            s.add_argument("--theta", type=float, nargs="+")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(apply_overrides(load_config(args.config), args),
                      need_model=args.command != "reproduce")
        if args.command == "reproduce":
            report = cmd_reproduce(cfg, args.which)
        else:
            report = {"blue": cmd_blue, "weights": cmd_weights, "design": cmd_design,
                      "efficiency": cmd_efficiency, "simulate": cmd_simulate}[args.command](cfg)
        text = render(report, cfg.get("output", "json"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TridesignError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.command == "reproduce" and not report["all_pass"]:
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())
