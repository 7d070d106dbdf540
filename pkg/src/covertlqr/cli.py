"""Command-line front end: config ingestion, design/bounds/sweep/simulate/report.

One JSON config drives every command.  Blocks: ``system`` (A, B, C),
``weights`` (Q, R, V, lambda, epsilon, delta), optional ``design`` (metric,
max_iters), ``sweep`` (lambdas) and ``sim`` (poles, noise, x0, xhat0,
horizon, dt, seed).  Unknown keys are rejected so typos surface immediately.

Exit codes: 0 success, 2 infeasible, 3 invalid config, 4 solver failure.
Floats are serialized with %.17g in JSON (bit-exact round trip) and %.12g in
CSV; unbounded metrics appear as the string "unbounded".  Output files are
written atomically.  ``COVERTLQR_LOG`` in {error, info, debug} controls
logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys as _sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sdp  # noqa: F401  (re-exported for model dumps)
from .bounds import TradeoffReport, tradeoff_reports
from .design_trace import solve_problem1
from .design_traceinv import ccp_run
from .exceptions import (ConfigurationError, CovertLqrError, InfeasibleError,
                         SolverError)
from .gramians import certify_design, eigen_report, observability_gramian
from .model import DesignWeights, LinearSystem, validate
from .sim import NoiseModel, build_adversary_observer, simulate, time_averaged_error, trace_to_csv
from .solvers import solve_care

log = logging.getLogger("covertlqr")

SWEEP_COLUMNS = ("lambda", "J1", "J2", "f_lambda", "j1_lb", "j2_lb_local",
                 "j2_lb_local_valid", "j2_lb_global", "status")
BOUNDS_COLUMNS = ("lambda", "f_lambda", "j1_lb", "j2_lb_local",
                  "j2_lb_local_valid", "j2_lb_local_proof_form",
                  "j2_lb_global", "j2_lb_best")


@dataclass
class ResultBundle:
    """What a command produced: structured outputs plus emitted file paths."""

    command: str
    design: dict | None = None
    rows: list = field(default_factory=list)
    report: dict | None = None
    files: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------------

_TOP_KEYS = {"system", "weights", "design", "sweep", "sim"}
_SYSTEM_KEYS = {"A", "B", "C"}
_WEIGHT_KEYS = {"Q", "R", "V", "lambda", "epsilon", "delta"}
_DESIGN_KEYS = {"metric", "max_iters"}
_SWEEP_KEYS = {"lambdas"}
_SIM_KEYS = {"poles", "noise", "x0", "xhat0", "horizon", "dt", "seed"}
_NOISE_KEYS = {"magnitude", "num_sinusoids", "random_phases"}


def _reject_unknown(block: dict, allowed: set, where: str):
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) {unknown} in {where}")


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigurationError(f"missing key {key!r} in {where}")
    return block[key]


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config root")
    for block, keys in (("system", _SYSTEM_KEYS), ("weights", _WEIGHT_KEYS),
                        ("design", _DESIGN_KEYS), ("sweep", _SWEEP_KEYS),
                        ("sim", _SIM_KEYS)):
        if block in raw:
            if not isinstance(raw[block], dict):
                raise ConfigurationError(f"config block {block!r} must be an object")
            _reject_unknown(raw[block], keys, f"config block {block!r}")
    if "sim" in raw and "noise" in raw["sim"]:
        _reject_unknown(raw["sim"]["noise"], _NOISE_KEYS, "sim.noise")
    _require(raw, "system", "config")
    _require(raw, "weights", "config")
    return raw


def parse_problem(raw: dict) -> tuple[LinearSystem, DesignWeights]:
    sys_block = raw["system"]
    w_block = raw["weights"]
    system = LinearSystem(A=_require(sys_block, "A", "system"),
                          B=_require(sys_block, "B", "system"),
                          C=_require(sys_block, "C", "system"))
    weights = DesignWeights(Q=_require(w_block, "Q", "weights"),
                            R=_require(w_block, "R", "weights"),
                            V=_require(w_block, "V", "weights"),
                            lam=_require(w_block, "lambda", "weights"),
                            epsilon=_require(w_block, "epsilon", "weights"),
                            delta=_require(w_block, "delta", "weights"))
    validate(system, weights).raise_if_invalid()
    return system, weights


def _parse_pole(entry):
    if isinstance(entry, (list, tuple)):
        if len(entry) != 2:
            raise ConfigurationError(f"complex pole must be [re, im], got {entry}")
        return complex(float(entry[0]), float(entry[1]))
    return complex(float(entry), 0.0)


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _json_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isinf(f) or math.isnan(f):
        return json.dumps("unbounded")
    return format(f, ".17g")


def to_json(value, indent: int = 0) -> str:
    """JSON text with %.17g floats and non-finite values as "unbounded"."""
    pad, pad_in = " " * indent, " " * (indent + 2)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad_in}{json.dumps(str(k))}: {to_json(v, indent + 2)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        inner = ", ".join(to_json(v, indent) for v in value)
        return f"[{inner}]"
    return _json_scalar(value)


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, str):
        return v.replace(",", ";").replace("\n", " ")
    f = float(v)
    if math.isinf(f) or math.isnan(f):
        return "unbounded"
    return format(f, ".12g")


def _fmt_short(v) -> str:
    f = float(v)
    return "unbounded" if (math.isinf(f) or math.isnan(f)) else format(f, ".6g")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _design_dict(system, weights, metric, design, iterations, converged) -> dict:
    A_cl = system.A + system.B @ design.K
    return {
        "metric": metric,
        "lambda": weights.lam,
        "K": design.K,
        "A_cl": A_cl,
        "J_s": design.J_s,
        "J_o1": design.J_o1,
        "J_o2": design.J_o2,
        "performance_slack": design.performance_slack,
        "iterations": iterations,
        "converged": converged,
    }


def run_design(system: LinearSystem, weights: DesignWeights, metric: str,
               max_iters: int = 200) -> dict:
    if metric == "trace":
        design = solve_problem1(system, weights)
        return _design_dict(system, weights, metric, design, 1, True)
    if metric == "trace_inv":
        result = ccp_run(system, weights, max_iters=max_iters)
        design = certify_design(system, weights, result.K_hat,
                                epsilon=weights.epsilon)
        return _design_dict(system, weights, metric, design,
                            result.iterations, result.converged)
    raise ConfigurationError(f"unknown metric {metric!r}")


def cmd_design(config_path: str, metric: str | None = None,
               out_dir: str = ".", seed: int | None = None,
               _unused=None) -> ResultBundle:
    raw = load_config(config_path)
    system, weights = parse_problem(raw)
    design_block = raw.get("design", {})
    metric = metric or design_block.get("metric", "trace")
    max_iters = int(design_block.get("max_iters", 200))
    log.info("designing with metric=%s lambda=%g", metric, weights.lam)
    d = run_design(system, weights, metric, max_iters)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "design.json")
    _atomic_write(path, to_json(d) + "\n")
    bundle = ResultBundle(command="design", design=d, files=[path])
    print(f"metric          : {d['metric']}")
    print(f"lambda          : {_csv_cell(d['lambda'])}")
    print(f"K               : {np.array2string(np.asarray(d['K']), precision=6)}")
    print(f"A+BK            : {np.array2string(np.asarray(d['A_cl']), precision=6)}")
    for key in ("J_s", "J_o1", "J_o2", "performance_slack"):
        print(f"{key:<16}: {_csv_cell(d[key])}")
    print(f"iterations      : {d['iterations']} (converged: {d['converged']})")
    print(f"wrote {path}")
    return bundle


def _sweep_row(args) -> dict:
    raw, lam, max_iters = args
    system, weights = parse_problem(raw)
    weights = DesignWeights(Q=weights.Q, R=weights.R, V=weights.V, lam=lam,
                            epsilon=weights.epsilon, delta=weights.delta)
    row = dict.fromkeys(SWEEP_COLUMNS, float("nan"))
    row["lambda"] = lam
    try:
        rep = tradeoff_reports(system, weights, [lam])[0]
        row.update({"f_lambda": rep.f_lambda, "j1_lb": rep.j1_lower,
                    "j2_lb_local": rep.j2_lower_local,
                    "j2_lb_local_valid": rep.j2_lower_local_valid,
                    "j2_lb_global": rep.j2_lower_global})
        row["J1"] = solve_problem1(system, weights).J_o1
        row["J2"] = ccp_run(system, weights, max_iters=max_iters).J2_true
        row["status"] = "ok"
    except CovertLqrError as exc:
        row["status"] = f"error: {exc}"
    return row


def cmd_sweep(config_path: str, out_dir: str = ".", jobs: int = 1,
              seed: int | None = None) -> ResultBundle:
    raw = load_config(config_path)
    parse_problem(raw)  # fail fast on a bad config
    sweep_block = raw.get("sweep")
    if not sweep_block or "lambdas" not in sweep_block:
        raise ConfigurationError("sweep command needs a 'sweep' block with 'lambdas'")
    lambdas = [float(v) for v in sweep_block["lambdas"]]
    max_iters = int(raw.get("design", {}).get("max_iters", 200))
    tasks = [(raw, lam, max_iters) for lam in lambdas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    _write_csv(path, SWEEP_COLUMNS, rows)
    print(",".join(SWEEP_COLUMNS))
    for row in rows:
        print(",".join(_csv_cell(row[c]) for c in SWEEP_COLUMNS))
    print(f"wrote {path}")
    if not any(row["status"] == "ok" for row in rows):
        raise SolverError("every sweep row failed")
    return ResultBundle(command="sweep", rows=rows, files=[path])


def cmd_bounds(config_path: str, out_dir: str = ".") -> ResultBundle:
    raw = load_config(config_path)
    system, weights = parse_problem(raw)
    sweep_block = raw.get("sweep") or {}
    lambdas = [float(v) for v in sweep_block.get("lambdas", [weights.lam])]
    reports = tradeoff_reports(system, weights, lambdas)
    rows = [{
        "lambda": r.lam, "f_lambda": r.f_lambda, "j1_lb": r.j1_lower,
        "j2_lb_local": r.j2_lower_local,
        "j2_lb_local_valid": r.j2_lower_local_valid,
        "j2_lb_local_proof_form": r.j2_lower_local_proof_form,
        "j2_lb_global": r.j2_lower_global, "j2_lb_best": r.j2_lower_best,
    } for r in reports]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "bounds.csv")
    _write_csv(path, BOUNDS_COLUMNS, rows)
    print(",".join(BOUNDS_COLUMNS))
    for row in rows:
        print(",".join(_csv_cell(row[c]) for c in BOUNDS_COLUMNS))
    print(f"wrote {path}")
    bundle = ResultBundle(command="bounds", rows=rows, files=[path])
    bundle.reports = reports
    return bundle


def _sim_defaults(raw: dict, system: LinearSystem, K_star: np.ndarray):
    sim_block = raw.get("sim") or {}
    A_cl = system.A + system.B @ K_star
    eigs = np.linalg.eigvals(A_cl)
    tau_slow = 1.0 / abs(eigs.real).min()
    horizon = float(sim_block.get("horizon", 20.0 * tau_slow))
    dt = float(sim_block.get("dt", 1e-3 * tau_slow))
    x0 = np.asarray(sim_block.get("x0", np.ones(system.n)), dtype=float)
    xhat0 = np.asarray(sim_block.get("xhat0", np.zeros(system.n)), dtype=float)
    poles = [_parse_pole(p) for p in _require(sim_block, "poles", "sim")]
    return sim_block, horizon, dt, x0, xhat0, poles


def cmd_simulate(config_path: str, design_path: str, out_dir: str = ".",
                 seed: int | None = None) -> ResultBundle:
    raw = load_config(config_path)
    system, weights = parse_problem(raw)
    try:
        with open(design_path, "r", encoding="utf-8") as fh:
            design = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"design file not found: {design_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"design file is not valid JSON: {exc}") from exc
    if "K" not in design:
        raise ConfigurationError("design file has no gain 'K'")
    K_hat = np.asarray(design["K"], dtype=float)
    _, K_star = solve_care(system.A, system.B, weights.Q, weights.R)

    sim_block, horizon, dt, x0, xhat0, poles = _sim_defaults(raw, system, K_star)
    noise_block = sim_block.get("noise") or {}
    noise_seed = seed if seed is not None else int(sim_block.get("seed", 0))
    noise = NoiseModel.default(
        p=system.p,
        magnitude=float(noise_block.get("magnitude", 0.01)),
        num_sinusoids=int(noise_block.get("num_sinusoids", 5)),
        seed=noise_seed,
        random_phases=bool(noise_block.get("random_phases", False)))

    os.makedirs(out_dir, exist_ok=True)
    bundle = ResultBundle(command="simulate")
    averages = {}
    for label, K in (("nominal", K_star), ("design", K_hat)):
        rng = np.random.default_rng(noise_seed)
        L = build_adversary_observer(system, K, poles, rng=rng)
        trace = simulate(system, K, L, noise, x0, xhat0, horizon, dt,
                         Q=weights.Q, R=weights.R)
        path = os.path.join(out_dir, f"sim_{label}.csv")
        trace_to_csv(trace, path)
        averages[label] = time_averaged_error(trace)
        bundle.files.append(path)
        print(f"{label:8s}: time-averaged |e| over [T/2, T] = "
              f"{averages[label]:.6g}  ({path})")
    ratio = averages["design"] / max(averages["nominal"], 1e-300)
    print(f"designed gain degrades the adversary's estimate by {ratio:.3g}x")
    bundle.report = {"averages": averages, "ratio": ratio}
    return bundle


def report_row(W: np.ndarray) -> dict:
    """Gramian spectrum row: trace, trace of the inverse, eigenvalues."""
    rep = eigen_report(W)
    return {"trace_W": rep.trace_W, "trace_W_inv": rep.trace_W_inv,
            "eigenvalues": rep.eigenvalues}


def cmd_report(config_path: str, design_path: str | None = None,
               out_dir: str = ".") -> ResultBundle:
    raw = load_config(config_path)
    system, weights = parse_problem(raw)
    if design_path is None:
        _, K = solve_care(system.A, system.B, weights.Q, weights.R)
        source = "nominal"
    else:
        try:
            with open(design_path, "r", encoding="utf-8") as fh:
                design = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"design file not found: {design_path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"design file is not valid JSON: {exc}") from exc
        if "K" not in design:
            raise ConfigurationError("design file has no gain 'K'")
        K = np.asarray(design["K"], dtype=float)
        source = design_path
    W = observability_gramian(system, K, epsilon=0.0)
    row = report_row(W)
    row["gain_source"] = source
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    _atomic_write(path, to_json(row) + "\n")
    heads = ["tr(W)", "tr(W^-1)"] + [f"lam{i+1}" for i in range(system.n)]
    cells = [_fmt_short(row["trace_W"]), _fmt_short(row["trace_W_inv"])] + \
        [_fmt_short(v) for v in row["eigenvalues"]]
    widths = [max(len(h), len(c)) + 2 for h, c in zip(heads, cells)]
    print("".join(h.ljust(w) for h, w in zip(heads, widths)))
    print("".join(c.ljust(w) for c, w in zip(cells, widths)))
    print(f"wrote {path}")
    return ResultBundle(command="report", report=row, files=[path])


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertlqr",
        description="Feedback design balancing LQR cost against an "
                    "adversary's observability, plus bounds and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, design_arg=False):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="noise/placement seed")
        if design_arg:
            p.add_argument("--design", help="design.json produced by the design command")

    p = sub.add_parser("design", help="run one designer")
    common(p)
    p.add_argument("--metric", choices=("trace", "trace_inv"), default=None)

    p = sub.add_parser("sweep", help="both designers plus bounds over a lambda grid")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep rows")

    p = sub.add_parser("bounds", help="tabulate the theoretical lower bounds")
    common(p)

    p = sub.add_parser("simulate", help="adversary-observer simulation")
    common(p, design_arg=True)

    p = sub.add_parser("report", help="Gramian spectrum table for a gain")
    common(p, design_arg=True)
    return parser


def _setup_logging():
    level = os.environ.get("COVERTLQR_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "design":
            cmd_design(args.config, metric=args.metric, out_dir=args.out,
                       seed=args.seed)
        elif args.command == "sweep":
            cmd_sweep(args.config, out_dir=args.out, jobs=args.jobs,
                      seed=args.seed)
        elif args.command == "bounds":
            cmd_bounds(args.config, out_dir=args.out)
        elif args.command == "simulate":
            if not args.design:
                raise ConfigurationError("simulate needs --design <design.json>")
            cmd_simulate(args.config, args.design, out_dir=args.out,
                         seed=args.seed)
        elif args.command == "report":
            cmd_report(args.config, design_path=args.design, out_dir=args.out)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except CovertLqrError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
