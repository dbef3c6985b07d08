"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 computation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import schemas
from .config import ConfigError, RunConfig, load_config
from .cycle import (
    CycleInvalid,
    CycleNotConverged,
    RegimeMismatch,
    check_supcycle,
    find_limit_cycle,
    r0_bar,
    transverse_floquet,
)
from .equilibria import (
    InteriorEquilibriumAbsent,
    analyze_equilibrium,
    boundary_equilibria,
    classify_regime,
    dissipativity_bound,
    r0_star,
)
from .ode import IntegrationError
from .persistence import (
    counterexample_cycle_integral,
    counterexample_run,
    persistence_experiment,
    random_interior_seeds,
    theorem_conditions,
)

log = logging.getLogger("persistlab")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3
COMPUTE_ERRORS = (
    RegimeMismatch, CycleNotConverged, CycleInvalid, InteriorEquilibriumAbsent,
    IntegrationError, ArithmeticError,
)


# -- output -----------------------------------------------------------------

def _num(x) -> str:
    return f"{float(x):.17g}"


def _json(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            return "null"
        return _num(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_json(str(k))}: {_json(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _num(v) if math.isfinite(v) else ""
    s = str(v)
    if any(c in s for c in ',"\n\r'):
        s = '"' + s.replace('"', '""') + '"'
    return s


class Output:
    def __init__(self, out_dir: Path, fmt: str):
        self.dir = out_dir
        self.fmt = fmt
        self.dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, rows: list[list]) -> Path:
        cols = schemas.COLUMNS[name]
        if self.fmt == "csv":
            path = self.dir / f"{name}.csv"
            lines = [",".join(cols)] + [",".join(_cell(v) for v in row) for row in rows]
        else:
            path = self.dir / f"{name}.jsonl"
            lines = [_json(dict(zip(cols, row))) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        return path

    def report(self, command: str, body: dict) -> Path:
        doc = {"schema_version": schemas.SCHEMA_VERSION, "command": command, **body}
        path = self.dir / f"{command}_report.json"
        path.write_text(_json(doc) + "\n", encoding="utf-8", newline="\n")
        return path


def _echo(records: dict):
    for k, v in records.items():
        if isinstance(v, float):
            v = _num(v)
        print(f"{k}: {v}")


def _params(cfg: RunConfig) -> dict:
    return {k: getattr(cfg, k) for k in ("r", "h", "m", "mu", "beta")}


def _supcycle_dict(v):
    if v is None:
        return None
    return {"holds": v.holds, "tau": v.tau, "margin": v.margin, "horizon": v.horizon, "n_phase": v.n_phase}


# -- commands ---------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, out: Output, jobs: int) -> int:
    p = cfg.params
    regime = classify_regime(p)
    try:
        r0s = r0_star(p)
    except InteriorEquilibriumAbsent:
        r0s = None
    eqs, rows = [], []
    for x in boundary_equilibria(p):
        rep = analyze_equilibrium(p, x)
        eigs = [[float(l.real), float(l.imag)] for l in rep.eigenvalues]
        eqs.append({"label": rep.label, "point": rep.point.tolist(), "eigenvalues": eigs,
                    "classification": rep.classification})
        rows.append([rep.label, *rep.point.tolist(), *[c for e in eigs for c in e], rep.classification])
    out.table("equilibria", rows)
    body = {
        "params": _params(cfg),
        "regime": regime.tag,
        "threshold_lower": regime.lower,
        "threshold_upper": regime.upper,
        "non_hyperbolic": regime.non_hyperbolic,
        "dissipativity_bound": dissipativity_bound(p),
        "r0_star": r0s,
        "interior_equilibrium": r0s is not None,
        "equilibria": eqs,
    }
    out.report("analyze", body)
    _echo({"regime": regime.tag, "threshold_lower": regime.lower, "threshold_upper": regime.upper,
           "r0_star": r0s if r0s is not None else "absent", "dissipativity_bound": dissipativity_bound(p)})
    for e in eqs:
        print(f"equilibrium {e['label']}: point={e['point']} class={e['classification']}")
    return EXIT_OK


def cmd_cycle(cfg: RunConfig, out: Output, jobs: int) -> int:
    p = cfg.params
    cyc = find_limit_cycle(p, n_phase=cfg.n_phase)
    rbar = r0_bar(p, cyc)
    lam = transverse_floquet(p, cyc)
    verdict = check_supcycle(p, cyc, n_phase=cfg.n_phase, horizon=cfg.horizon_periods)
    out.table("cycle", [[t, *s] for t, s in zip(cyc.sample_times, cyc.samples)])
    body = {
        "params": _params(cfg),
        "period": cyc.period,
        "s_mean": cyc.s_mean,
        "anchor": cyc.anchor.tolist(),
        "closure_residual": cyc.closure_residual,
        "multiplier": cyc.multiplier,
        "r0_bar": rbar,
        "floquet": lam,
        "supcycle": _supcycle_dict(verdict),
    }
    out.report("cycle", body)
    _echo({"period": cyc.period, "s_mean": cyc.s_mean, "r0_bar": rbar, "floquet": lam,
           "supcycle_holds": verdict.holds, "tau": verdict.tau if verdict.tau is not None else "absent"})
    return EXIT_OK


def _seeds(cfg: RunConfig) -> np.ndarray:
    return random_interior_seeds(cfg.n_seeds, cfg.seed, k=dissipativity_bound(cfg.params) + 1.0)


def cmd_persist(cfg: RunConfig, out: Output, jobs: int) -> int:
    p = cfg.params
    rep = theorem_conditions(p, n_phase=cfg.n_phase, horizon=cfg.horizon_periods)
    stats = persistence_experiment(p, _seeds(cfg), cfg.t_end, cfg.tail_fraction, cfg.floor, cfg.solver, jobs)
    rows = [[r.index, *r.tail_min.tolist(), bool(r.extinct[2])] for r in stats.records]
    out.table("persist", rows)
    body = {
        "params": _params(cfg),
        "em_holds": rep.em_holds,
        "r0_star": rep.r0_star,
        "r0_bar": rep.r0_bar,
        "supcycle": _supcycle_dict(rep.supcycle),
        "theorem_satisfied": rep.theorem_satisfied,
        "k_used": rep.k_used,
        "chain": [{"step": s, "passed": bool(ok), "note": n} for s, ok, n in rep.chain],
        "t_end": cfg.t_end,
        "floor": cfg.floor,
        "eta_estimate": stats.eta,
        "extinct_I_fraction": float(stats.extinct[:, 2].mean()),
    }
    out.report("persist", body)
    _echo({"em_holds": rep.em_holds, "r0_star": rep.r0_star, "r0_bar": rep.r0_bar,
           "theorem_satisfied": rep.theorem_satisfied,
           "eta_estimate (tail minimum, not a certificate)": stats.eta,
           "extinct_I_fraction": float(stats.extinct[:, 2].mean())})
    return EXIT_OK


def _sweep_point(args):
    cfg, value, cycle = args
    p = cfg.params.replace(**{cfg.sweep_param: value})
    try:
        r0s = r0_star(p)
    except InteriorEquilibriumAbsent:
        r0s = None
    rbar = holds = tau = None
    if classify_regime(p).tag == "LimitCycle":
        try:
            cyc = cycle if cycle is not None else find_limit_cycle(p, n_phase=cfg.n_phase)
            rbar = r0_bar(p, cyc)
            v = check_supcycle(p, cyc, n_phase=cfg.n_phase, horizon=cfg.horizon_periods)
            holds, tau = v.holds, v.tau
        except (RegimeMismatch, CycleNotConverged) as exc:
            log.warning("%s=%g: %s", cfg.sweep_param, value, exc)
    stats = persistence_experiment(p, _seeds(cfg), cfg.t_end, cfg.tail_fraction, cfg.floor, cfg.solver, 1)
    return [value, r0s, rbar, holds, tau, float(stats.extinct[:, 2].mean())]


def cmd_sweep(cfg: RunConfig, out: Output, jobs: int) -> int:
    values = np.linspace(cfg.sweep_min, cfg.sweep_max, cfg.sweep_points)
    # the disease-free cycle does not involve beta or mu
    shared = None
    if cfg.sweep_param in ("beta", "mu") and classify_regime(cfg.params).tag == "LimitCycle":
        shared = find_limit_cycle(cfg.params, n_phase=cfg.n_phase)
    tasks = [(cfg, float(v), shared) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    out.table("sweep", rows)
    out.report("sweep", {"params": _params(cfg), "sweep_param": cfg.sweep_param, "values": values.tolist()})
    for row in rows:
        print(",".join(_cell(v) for v in row))
    return EXIT_OK


def cmd_counterexample(cfg: RunConfig, out: Output, jobs: int) -> int:
    c = cfg.counter
    y0 = (cfg.x0, cfg.y0, cfg.z0)
    res = counterexample_run(c, y0, cfg.ce_t_end)
    period, integral = counterexample_cycle_integral(c)
    tr = res.trajectory
    out.table("counterexample", [[t, *s] for t, s in zip(tr.times, tr.states)])
    body = {
        "eps": c.eps, "delta": c.delta, "y0": list(y0), "t_end": cfg.ce_t_end,
        "z_min_time": res.z_min_time, "z_min": res.z_min, "z_end": res.z_end,
        "cycle_period": period, "cycle_integral": integral,
    }
    out.report("counterexample", body)
    _echo({"z_min_time": res.z_min_time, "z_min": res.z_min, "z_end": res.z_end,
           "cycle_integral": integral})
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "cycle": cmd_cycle,
    "persist": cmd_persist,
    "sweep": cmd_sweep,
    "counterexample": cmd_counterexample,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat TOML file of RunConfig keys")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (PERSISTLAB_OUT takes precedence)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--seed", type=int, default=None, help="random seed for initial states")
    common.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="persistlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "show-config"):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.param, seed=args.seed)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "show-config":
        sys.stdout.write(cfg.to_toml())
        return EXIT_OK

    jobs = args.jobs or os.cpu_count() or 1
    out = Output(Path(os.environ.get("PERSISTLAB_OUT") or args.out), args.format)
    try:
        return COMMANDS[args.command](cfg, out, jobs)
    except COMPUTE_ERRORS as exc:
        print(f"computation error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
