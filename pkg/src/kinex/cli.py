"""Command-line entry point.

    kinex run <config.json>
    kinex verify thermo|collision|kinetic
    kinex demo collide --m 1 --m1 3 ...

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, experiments
from ._backend import BACKEND
from .collision import Kernel
from .errors import KinexError, ValidationError
from .mass_law import MassLaw

COMMON_DEFAULTS = {
    "n": 2,
    "law": {"family": {"a": 0.0, "b": 0.0, "c": 1.0}, "M_max": 2},
    "kernel": {"kind": "maxwell", "C_B": 1.0, "omega_exp": 0.0},
    "output_dir": "kinex_out",
    "seed": 0,
    "workers": 1,
}

_FLUID = {"cells": 200, "length": 1.0, "bc": "periodic", "cfl": 0.45, "t_end": 0.2, "order": 2, "initial": "smooth"}

EXPERIMENT_DEFAULTS = {
    "collide_demo": {"m": 1, "m1": 3, "v": None, "v1": None, "m_out": 2, "omega": None},
    "qeval": {"v_max": 6.0, "N_v": 16, "n_omega": 16, "amplitude": 0.3},
    "relax_bgk": {"v_max": 6.0, "N_v": 16, "eps": 1.0, "dt": 0.1, "steps": 100, "amplitude": 0.5},
    "relax_dsmc": {"particles": 10000, "steps": 40, "dt_fraction": 0.5, "init_masses": "uniform", "every": 1},
    "euler_1d": dict(_FLUID),
    "nsme_1d": dict(_FLUID, eps=0.01),
    "chapman_enskog": {"eps": 0.02, "cells": 64, "N_v": 20, "v_max": 7.0, "dt": 2e-4, "t_end": 0.1},
    "thermo_verify": {"samples": 200},
}

_CHOICES = {"init_masses": ("uniform", "single"), "bc": ("periodic", "outflow"), "initial": ("smooth", "sod", "beta_contact"), "order": (1, 2)}


@dataclass
class Scenario:
    experiment: str
    law: MassLaw
    kernel: Kernel
    params: dict
    output_dir: Path
    seed: int
    workers: int
    config: dict = field(default_factory=dict)


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _fail(msg, text=None, key=None):
    line = _line_of(text, key) if (text and key) else None
    raise ValidationError(f"{msg}" + (f" (line {line})" if line else ""))


def _check_keys(d: dict, allowed, path: str, text: str):
    for k in d:
        if k not in allowed:
            _fail(f"unknown key {path}{k!r}", text, k)


def _coerce(value, default, path, text, key):
    if default is None:
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        _fail(f"{path}: expected {type(default).__name__}, got {value!r}", text, key)
    return value


def _parse_law(block, n, text) -> MassLaw:
    if not isinstance(block, dict):
        _fail("law: expected an object", text, "law")
    _check_keys(block, ("family", "table", "M_max"), "law.", text)
    if "M_max" not in block:
        _fail("law.M_max is required", text, "law")
    M = block["M_max"]
    if not isinstance(M, int) or M < 1:
        _fail(f"law.M_max must be a positive integer, got {M!r}", text, "M_max")
    if ("family" in block) == ("table" in block):
        _fail("law needs exactly one of 'family' or 'table'", text, "law")
    try:
        if "table" in block:
            tab = block["table"]
            if not isinstance(tab, list) or len(tab) != M:
                _fail(f"law.table must list M_max = {M} rates", text, "table")
            return MassLaw.table(tab, M, n)
        fam = block["family"]
        if not isinstance(fam, dict):
            _fail("law.family: expected an object", text, "family")
        _check_keys(fam, ("a", "b", "c"), "law.family.", text)
        return MassLaw.family(M, float(fam.get("a", 0.0)), float(fam.get("b", 0.0)), float(fam.get("c", 1.0)), n)
    except KinexError as exc:
        if isinstance(exc, ValidationError):
            raise
        _fail(f"law: {exc}", text, "law")


def _parse_kernel(block, text) -> Kernel:
    if not isinstance(block, dict):
        _fail("kernel: expected an object", text, "kernel")
    _check_keys(block, ("kind", "C_B", "omega_exp"), "kernel.", text)
    full = dict(COMMON_DEFAULTS["kernel"], **block)
    try:
        return Kernel(str(full["kind"]), float(full["C_B"]), float(full["omega_exp"]))
    except (TypeError, ValueError) as exc:
        _fail(f"kernel: {exc}", text, "kernel")


def scenario_from_dict(doc: dict, text: str = "") -> Scenario:
    if not isinstance(doc, dict):
        _fail("scenario must be a JSON object")
    exp = doc.get("experiment")
    if exp not in EXPERIMENT_DEFAULTS:
        _fail(f"experiment must be one of {sorted(EXPERIMENT_DEFAULTS)}, got {exp!r}", text, "experiment")
    defaults = EXPERIMENT_DEFAULTS[exp]
    allowed = {"experiment"} | set(COMMON_DEFAULTS) | set(defaults)
    _check_keys(doc, allowed, "", text)
    cfg = {"experiment": exp}
    for k, d in COMMON_DEFAULTS.items():
        cfg[k] = doc.get(k, d)
    n = _coerce(cfg["n"], 2, "n", text, "n")
    if n not in (1, 2, 3):
        _fail(f"n must be 1, 2 or 3, got {n}", text, "n")
    law = _parse_law(cfg["law"], n, text)
    kernel = _parse_kernel(cfg["kernel"], text)
    cfg["kernel"] = kernel.to_dict()
    params = {}
    for k, d in defaults.items():
        v = _coerce(doc[k], d, k, text, k) if k in doc else d
        if k in _CHOICES and v not in _CHOICES[k]:
            _fail(f"{k} must be one of {_CHOICES[k]}, got {v!r}", text, k)
        if isinstance(v, (int, float)) and not isinstance(v, bool) and k not in ("seed",) and v <= 0:
            _fail(f"{k} must be positive, got {v!r}", text, k)
        params[k] = v
        cfg[k] = v
    seed = _coerce(cfg["seed"], 0, "seed", text, "seed")
    workers = int(os.environ.get("KINEX_THREADS", _coerce(cfg["workers"], 1, "workers", text, "workers")))
    cfg["workers"] = workers
    return Scenario(exp, law, kernel, params, Path(str(cfg["output_dir"])), seed, workers, cfg)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"scenario file not found: {path}")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})") from exc
    return scenario_from_dict(doc, text)


def _dispatch(s: Scenario) -> dict:
    p, law, n = s.params, s.law, s.law.n
    if s.experiment == "collide_demo":
        v = p["v"] if p["v"] is not None else [1.0] + [0.0] * (n - 1)
        v1 = p["v1"] if p["v1"] is not None else [-1.0] + [0.5] * (n - 1)
        return experiments.collide_demo(law, p["m"], p["m1"], v, v1, p["m_out"], p["omega"], s.seed)
    if s.experiment == "qeval":
        return experiments.qeval(law, s.kernel, p["v_max"], p["N_v"], p["n_omega"], p["amplitude"], s.seed)
    if s.experiment == "relax_bgk":
        return experiments.relax_bgk(law, p["v_max"], p["N_v"], p["eps"], p["dt"], p["steps"], s.seed, p["amplitude"])
    if s.experiment == "relax_dsmc":
        out = experiments.relax_dsmc(
            law, s.kernel, p["particles"], p["steps"], p["dt_fraction"], s.seed, p["init_masses"], every=p["every"]
        )
        out.pop("ensemble")
        return out
    if s.experiment in ("euler_1d", "nsme_1d"):
        out = experiments.fluid_run(
            law, p["cells"], p["length"], p["bc"], p["cfl"], p["t_end"], p["order"], p["initial"], p.get("eps", 0.0)
        )
        out.pop("prim")
        out.pop("grid")
        return out
    if s.experiment == "chapman_enskog":
        return experiments.chapman_enskog(law, p["eps"], p["cells"], p["N_v"], p["v_max"], p["dt"], p["t_end"])
    return experiments.thermo_verify(s.seed, p["samples"])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def run(s: Scenario) -> int:
    out = s.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {
        "config": _jsonable(s.config),
        "seed": s.seed,
        "workers": s.workers,
        "versions": {"kinex": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "backend": BACKEND,
    }
    try:
        res = _dispatch(s)
    except KinexError as exc:
        manifest["wall_time_s"] = time.perf_counter() - t0
        manifest["status"] = "numerical_failure"
        (out / "failure.json").write_text(
            json.dumps({"experiment": s.experiment, "error": type(exc).__name__, "message": str(exc)}, indent=2) + "\n"
        )
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        print(f"kinex: {s.experiment} failed: {exc}", file=sys.stderr)
        return 2
    files = []
    for name, (header, rows) in res["tables"].items():
        path = out / f"{s.experiment}_{name}.csv"
        write_table(path, header, rows)
        files.append(path.name)
    (out / "summary.json").write_text(json.dumps(_jsonable(res["summary"]), indent=2, sort_keys=True) + "\n")
    manifest.update(status="ok", outputs=files + ["summary.json"], wall_time_s=time.perf_counter() - t0)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if s.experiment == "thermo_verify" and not res["summary"]["all_passed"]:
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _floats(s: str):
    return [float(x) for x in s.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kinex", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kinex {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("config")
    v = sub.add_parser("verify", help="run a built-in verification suite")
    v.add_argument("suite", choices=["thermo", "collision", "kinetic"])
    v.add_argument("--seed", type=int, default=0)
    d = sub.add_parser("demo", help="small interactive demos")
    dsub = d.add_subparsers(dest="demo", required=True, parser_class=_Parser)
    c = dsub.add_parser("collide", help="one collision with mass exchange")
    c.add_argument("--n", type=int, default=2)
    c.add_argument("--M-max", type=int, default=None)
    c.add_argument("--m", type=int, default=1)
    c.add_argument("--m1", type=int, default=3)
    c.add_argument("--m-out", type=int, default=2)
    c.add_argument("--v", type=_floats, default=None, help="comma-separated components")
    c.add_argument("--v1", type=_floats, default=None)
    c.add_argument("--omega", type=_floats, default=None)
    c.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return run(parse_scenario(args.config))
        if args.cmd == "verify":
            from .verify import SUITES

            recs = SUITES[args.suite](args.seed)
            for rec in recs:
                print(f"{'PASS' if rec['passed'] else 'FAIL'}  {rec['name']}: {rec['value']:.3e} (tol {rec['tol']:.1e})")
            return 0 if all(r["passed"] for r in recs) else 2
        n = args.n
        M = args.M_max or max(args.m, args.m1)
        law = MassLaw.uniform(M, n)
        v = args.v if args.v is not None else [1.0] + [0.0] * (n - 1)
        v1 = args.v1 if args.v1 is not None else [-1.0] + [0.5] * (n - 1)
        if len(v) != n or len(v1) != n:
            raise ValidationError(f"velocities need {n} components")
        res = experiments.collide_demo(law, args.m, args.m1, v, v1, args.m_out, args.omega, args.seed)
        header, rows = res["tables"]["collision"]
        print(json.dumps({"columns": header, "rows": rows, **res["summary"]}, indent=2))
        return 0
    except ValidationError as exc:
        print(f"kinex: {exc}", file=sys.stderr)
        return 1
    except KinexError as exc:
        print(f"kinex: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
