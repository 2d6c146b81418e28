"""Command-line front end.

Every verb reads a scenario file, writes one run directory and returns an exit
code: 0 ok, 2 infeasible, 3 some sweep points failed, 4 bad scenario or flags.
Outputs depend only on the scenario, the flags and the seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .array import beampattern, covariance
from .crb import crb_pt
from .design import design_isotropic, design_sdr, design_zf
from .errors import Infeasible, IsacError, ScenarioError, SolverFailure
from .scenario import SWEEP_KEYS, Scenario, default_scenario, dump_scenario, load_scenario
from .sim import monte_carlo_mse, trials_csv

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INFEASIBLE, EXIT_PARTIAL, EXIT_BAD_SCENARIO = 0, 2, 3, 4
METHODS = ("sdr", "zf", "isotropic")
COMPARE_KEYS = ("gamma_db", "n_c")


# --- serialization helpers ------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else "nan"
    return str(v)


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row.get(h)) for h in header])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def parse_sweep(spec: str):
    """``KEY=START:STOP:STEP`` with STOP included (up to round-off)."""
    try:
        key, rng = spec.split("=", 1)
        start, stop, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise ScenarioError(f"sweep must look like KEY=START:STOP:STEP, got {spec!r}") from None
    key = key.strip()
    if key not in SWEEP_KEYS:
        raise ScenarioError(f"unknown sweep key {key!r}; choose from {sorted(SWEEP_KEYS)}")
    if step == 0 or not all(math.isfinite(v) for v in (start, stop, step)):
        raise ScenarioError("sweep step must be nonzero and all bounds finite")
    n = math.floor((stop - start) / step + 1e-9) + 1
    values = [start + i * step for i in range(max(n, 0))]
    return key, [round(v, 12) for v in values]


# --- per-point work (module level so worker processes can pickle it) -------------

def _design(system, method: str, seed: int):
    if method == "sdr":
        return design_sdr(system, seed=seed)
    if method == "zf":
        return design_zf(system)
    return design_isotropic(system)


def _crb_point(args):
    scenario_dict, key, value, method, seed = args
    s = Scenario.from_dict(scenario_dict)
    row = {key: value}
    try:
        s = s.with_value(key, value) if key else s
        system = s.build()
        res = _design(system, method, seed)
        R = covariance(res.beamformers.W)
        report = res.report
        tb = system.target_bundle
        pt_d, pt_phi = crb_pt(system.partition.pose.phi_o, tb, R, system.sensing)
        row.update(crb_d=report.crb_d, crb_phi=report.crb_phi, crb_varphi=report.crb_varphi,
                   pt_crb_d=pt_d, pt_crb_phi=pt_phi, status="ok")
        part = system.partition
        diag = {
            "value": value, "u": part.u, "phi": part.phi, "d": part.d, "lengths": part.lengths,
            "X": part.X, "u_lower": part.u_lower, "u_upper": part.u_upper, "crb": report.to_dict(),
        }
        return row, diag, None
    except Infeasible as exc:
        row["status"] = f"infeasible:{exc.constraint_class}"
        return row, None, "infeasible"
    except (IsacError, ValueError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
        return row, None, "error"


def _compare_point(args):
    scenario_dict, key, value, seed = args
    s = Scenario.from_dict(scenario_dict)
    row = {key: value}
    failures = []
    try:
        system = (s.with_value(key, value) if key else s).build()
    except (IsacError, ValueError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
        return row, "error"
    for method in ("sdr", "zf"):
        try:
            res = _design(system, method, seed)
            row[f"{method}_crb_phi"] = res.report.crb_phi
            row[f"{method}_sum_rate"] = res.sum_rate
        except Infeasible as exc:
            failures.append(f"{method}:infeasible:{exc.constraint_class}")
        except (IsacError, ValueError) as exc:
            failures.append(f"{method}:error:{type(exc).__name__}")
    row["status"] = ";".join(failures) if failures else "ok"
    kind = None
    if failures:
        kind = "infeasible" if all("infeasible" in f for f in failures) else "error"
    return row, kind


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))  # map preserves sweep order


def _sweep_exit(kinds) -> int:
    failed = [k for k in kinds if k]
    if not failed:
        return EXIT_OK
    if len(failed) == len(kinds) and all(k == "infeasible" for k in failed):
        return EXIT_INFEASIBLE
    return EXIT_PARTIAL


# --- verbs -----------------------------------------------------------------------

def cmd_crb_sweep(s: Scenario, out: Path, args) -> int:
    key, values = parse_sweep(args.sweep) if args.sweep else (None, [None])
    jobs = [(s.to_dict(), key, v, args.method, args.seed) for v in values]
    results = _map(_crb_point, jobs, args.workers)
    header = ([key] if key else []) + ["crb_d", "crb_phi", "crb_varphi", "pt_crb_d", "pt_crb_phi",
                                       "status", "diagnostics"]
    rows = []
    for i, (row, diag, _) in enumerate(results):
        if diag is not None:
            rel = f"diagnostics/point_{i:04d}.json"
            _write(out / rel, dumps_json(diag))
            row["diagnostics"] = rel
        rows.append(row)
    _write(out / "crb_sweep.csv", dumps_csv(header, rows))
    return _sweep_exit([r[2] for r in results])


def cmd_design(s: Scenario, out: Path, args) -> int:
    system = s.build()
    try:
        res = _design(system, args.method, args.seed)
    except Infeasible as exc:
        _write(out / "design.json", dumps_json({"method": args.method, "status": "infeasible",
                                                "constraint_class": exc.constraint_class,
                                                "message": str(exc)}))
        return EXIT_INFEASIBLE
    W = res.beamformers.W
    grid_deg = np.arange(-90, 91, 1.0)
    pattern = beampattern(covariance(W), system.cfg, np.radians(grid_deg))
    table = [{"phi_deg": float(d), "pattern": float(p)} for d, p in zip(grid_deg, pattern)]
    doc = {
        "method": res.method,
        "status": "ok",
        "beamformers": {"re": W.real, "im": W.imag},
        "crb": res.report.to_dict(),
        "sinrs": res.sinrs,
        "sinrs_db": 10 * np.log10(res.sinrs),
        "sum_rate": res.sum_rate,
        "info": res.info,
        "beampattern": table,
    }
    _write(out / "design.json", dumps_json(doc))
    _write(out / "beampattern.csv", dumps_csv(["phi_deg", "pattern"], table))
    return EXIT_OK


def cmd_mse(s: Scenario, out: Path, args) -> int:
    system = s.build()
    try:
        res = _design(system, args.method, args.seed)
    except Infeasible as exc:
        _write(out / "mse.json", dumps_json({"method": args.method, "status": "infeasible",
                                             "constraint_class": exc.constraint_class}))
        return EXIT_INFEASIBLE
    mc = monte_carlo_mse(system, res.beamformers.W, args.trials, seed=args.seed)
    summary = dict(mc.summary(), method=res.method, status="ok")
    _write(out / "mse.json", dumps_json(summary))
    _write(out / "trials.csv", trials_csv(mc))
    return EXIT_OK


def cmd_compare(s: Scenario, out: Path, args) -> int:
    key, values = parse_sweep(args.sweep) if args.sweep else (None, [None])
    if key is not None and key not in COMPARE_KEYS:
        raise ScenarioError(f"compare sweeps {COMPARE_KEYS}, got {key!r}")
    jobs = [(s.to_dict(), key, v, args.seed) for v in values]
    results = _map(_compare_point, jobs, args.workers)
    header = ([key] if key else []) + ["sdr_crb_phi", "zf_crb_phi", "sdr_sum_rate", "zf_sum_rate", "status"]
    _write(out / "compare.csv", dumps_csv(header, [r[0] for r in results]))
    return _sweep_exit([r[1] for r in results])


def cmd_validate(s: Scenario, out: Path, args) -> int:
    s.build()  # geometry errors (empty LoS, BS inside target) surface here
    _write(out / "validate.json", dumps_json({"status": "ok", "linear": s.linear_values(),
                                              "n_c": s.n_c, "k": s.k}))
    return EXIT_OK


VERBS = {
    "crb-sweep": cmd_crb_sweep,
    "design": cmd_design,
    "mse": cmd_mse,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etisac", description="Extended-target ISAC CRB and beamforming tool")
    p.add_argument("verb", choices=sorted(VERBS))
    p.add_argument("--scenario", help="YAML scenario file (default: built-in default scenario)")
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--seed", type=int, default=0, help="seed for extraction and Monte-Carlo draws")
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--sweep", help="KEY=START:STOP:STEP (stop inclusive)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _manifest(args, s: Scenario) -> dict:
    return {
        "version": __version__,
        "command": args.verb,
        "flags": {"method": args.method, "seed": args.seed, "trials": args.trials, "sweep": args.sweep},
        "seeds": {"run": args.seed, "channel": s.channel_seed},
        "linear_values": s.linear_values(),
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.method is None:
        args.method = "isotropic" if args.verb == "crb-sweep" else "sdr"
    if args.seed < 0 or args.seed >= 2**64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    out = Path(args.out)
    try:
        s = load_scenario(args.scenario) if args.scenario else default_scenario()
        if args.sweep:
            parse_sweep(args.sweep)
        _write(out / "scenario.yaml", dump_scenario(s))
        _write(out / "manifest.json", dumps_json(_manifest(args, s)))
        code = VERBS[args.verb](s, out, args)
    except ScenarioError as exc:
        print(f"bad scenario: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except IsacError as exc:
        # geometry problems found while building the system are scenario problems too
        print(f"bad scenario: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    return code


if __name__ == "__main__":
    sys.exit(main())
