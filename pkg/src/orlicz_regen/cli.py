"""Command-line batch driver.

An experiment is a TOML file::

    command = "clt"
    seed = 7

    [chain]
    kind = "geometric"      # or single_atom, atoms, csv
    max_height = 20

    [run]
    n_values = [1000, 10000]
    replicas = 500

Function descriptors (``[phi]``, ``[psi]``, ``[candidate]``) use the same
``family = ...`` tables as ``young_algebra.from_config``.  Every run writes
``report.json`` (with the resolved config and a timestamp) and CSV tables to
the output directory.

Exit status: 0 success, 2 a soundness check failed, 1 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np
import tomlkit

from . import bound_verifier as bv
from . import limit_experiments as le
from .errors import ConfigError, OrliczError
from .rng import WORKERS_ENV, resolve_workers
from .split_chain import block_mean_check, pitman_check
from .tower_chain import (
    TowerChainSpec,
    build,
    geometric_tower,
    single_atom,
    weak_opt_nu_spec,
    weak_opt_pi_spec,
)
from .young_algebra import from_config, rho_of, zeta_of
from .young_algebra.closed_forms import CASES, fit_case
from .young_algebra.domination import normalize_assumption_A

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
STOCHASTIC = {"pitman-check", "clt", "lil", "berry-esseen", "tail-bound"}


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# config plumbing


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return tomlkit.parse(text).unwrap()
    except Exception as exc:  # tomlkit raises several parse error types
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _function(cfg: dict, name: str, default: dict | None = None, normalize: bool = False):
    desc = cfg.get(name, default)
    if desc is None:
        raise ConfigError(f"config needs a [{name}] function descriptor")
    try:
        f = from_config(desc)
    except OrliczError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None
    return normalize_assumption_A(f, with_witness=False) if normalize else f


def chain_spec(desc: dict) -> tuple[TowerChainSpec, bool]:
    """Tower spec from a ``[chain]`` table; second item is the ergodicity check flag."""
    kind = desc.get("kind", "geometric")
    if kind == "geometric":
        spec = geometric_tower(int(desc.get("max_height", 20)), tuple(desc.get("values", (1.0, -1.0))))
    elif kind == "single_atom":
        spec = single_atom(int(desc.get("h", 3)), float(desc.get("f_tilde", 1.0)))
    elif kind == "atoms":
        spec = TowerChainSpec.from_config({"atoms": desc.get("atoms", [])})
    elif kind == "csv":
        spec = TowerChainSpec.from_csv(desc["path"])
    else:
        raise ConfigError(f"unknown chain kind {kind!r}")
    return spec, bool(desc.get("check_ergodic", kind != "single_atom"))


def _system(cfg: dict):
    spec, check = chain_spec(_section(cfg, "chain"))
    return build(spec, check_ergodic=check)


def _write_csv(rows: list[dict], path: Path) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# commands; each returns (result dict, csv tables, failed flag)


def _grid(run: dict) -> np.ndarray:
    if "x" in run:
        return np.asarray(run["x"], dtype=float)
    return np.geomspace(float(run.get("x_lo", 0.1)), float(run.get("x_hi", 1e3)), int(run.get("points", 50)))


def _transform(cfg, ctx, make):
    phi = _function(cfg, "phi")
    psi = _function(cfg, "psi", normalize=True)
    g = make(phi, psi)
    x = _grid(_section(cfg, "run"))
    vals = g(x)
    arg = g.argmax(x)
    rows = [{"x": float(a), "value": float(b), "argmax": float(c)} for a, b, c in zip(x, vals, arg)]
    return {"at_1": float(g(1.0)), "function": g.to_config()}, {"values": rows}, False


def cmd_compute_rho(cfg, ctx):
    return _transform(cfg, ctx, rho_of)


def cmd_compute_zeta(cfg, ctx):
    return _transform(cfg, ctx, zeta_of)


def cmd_verify_bounds(cfg, ctx):
    run = _section(cfg, "run")
    checks = tuple(run.get("checks", ("nu", "pi", "cor_nu")))
    if "n_specs" in run:
        suite = bv.run_suite(int(run["n_specs"]), int(ctx["seed"] or 0), tuple(run.get("pairs", ("x2_x4",))),
                             checks, ctx["workers"])
        rows = [{"instance": s["instance"], "pair": s["pair"], "check": s["check"], "lhs": s["report"].lhs,
                 "rhs": s["report"].rhs, "ratio": s["report"].ratio, "status": s["report"].status} for s in suite]
        failed = any(r["status"] == "violated" for r in rows)
        worst = max((r["ratio"] for r in rows if r["ratio"] is not None and math.isfinite(r["ratio"])), default=0.0)
        return {"n_reports": len(rows), "max_ratio": worst, "violations": sum(r["status"] == "violated" for r in rows)}, \
            {"suite": rows}, failed
    system = _system(cfg)
    phi = _function(cfg, "phi", {"family": "power", "p": 2.0})
    psi = _function(cfg, "psi", {"family": "power", "p": 2.0}, normalize=True)
    reports = []
    if "nu" in checks:
        method = run.get("method", "exact")
        if method == "monte_carlo" and ctx["seed"] is None:
            raise ConfigError("the Monte Carlo method needs a seed")
        reports.append(bv.verify_thm_nu(system, phi, psi, method=method, n_blocks=int(run.get("n_blocks", 20000)),
                                        seed=int(ctx["seed"] or 0)))
    if "pi" in checks:
        reports.append(bv.verify_thm_pi(system, phi, psi, improved=bool(run.get("improved", False))))
    if "cor_nu" in checks:
        reports.append(bv.verify_cor_nu(system, psi, rho_of(phi, psi)))
    dicts = [r.to_dict() for r in reports]
    rows = [{"theorem_id": d["theorem_id"], "lhs": d["lhs"], "rhs": d["rhs"], "ratio": d["ratio"],
             "status": d["status"]} for d in dicts]
    return {"reports": dicts}, {"bounds": rows}, any(r.status == "violated" for r in reports)


def cmd_certify_counterexample(cfg, ctx):
    run = _section(cfg, "run")
    kind = run.get("kind", "nu")
    phi = _function(cfg, "phi")
    psi = _function(cfg, "psi", normalize=True)
    if kind not in ("nu", "pi"):
        raise ConfigError("run.kind must be 'nu' or 'pi'")
    if "candidate" in cfg:
        cand = _function(cfg, "candidate")
    else:
        cand = rho_of(phi, psi) if kind == "nu" else zeta_of(phi, psi)
    make = weak_opt_nu_spec if kind == "nu" else weak_opt_pi_spec
    con = make(phi, psi, cand, n_max=int(run.get("n_max", 200)))
    hist: list = []
    cert = bv.divergence_certificate(con, float(run.get("theta", 1.0)), float(run.get("M", 1e6)),
                                     int(run.get("term_budget", 200)), history=hist)
    rows = [{"terms": i + 1, "log_partial_sum": float(s)} for i, s in enumerate(hist)]
    return {"construction": con.to_dict(), "certificate": cert.to_dict()}, {"partial_sums": rows}, False


def cmd_pitman_check(cfg, ctx):
    run = _section(cfg, "run")
    chain, laws = _system(cfg)
    tower = chain.meta["tower"]
    n_blocks = int(run.get("n_blocks", 10_000))
    f = tower.state_function()
    reps = [
        pitman_check(chain, lambda s, y: abs(f(s)) + y, n_blocks, ctx["seed"], ctx["workers"]),
        block_mean_check(chain, f, n_blocks, ctx["seed"], ctx["workers"]),
    ]
    rows = [r.to_dict() for r in reps]
    return {"checks": rows, "E_nu_tau_plus_1": laws.E_nu_tau_plus_1, "occupation_factor": chain.occupation_factor()}, \
        {"identities": rows}, not all(r.passed for r in reps)


def cmd_clt(cfg, ctx):
    run = _section(cfg, "run")
    chain, _ = _system(cfg)
    r = le.clt_experiment(chain, n_values=tuple(run.get("n_values", (1000, 10000))),
                          replicas=int(run.get("replicas", 2000)), seed=ctx["seed"],
                          start=run.get("start", "pi"), workers=ctx["workers"],
                          sigma_blocks=int(run.get("sigma_blocks", le.SIGMA_BLOCKS)))
    return r.to_dict(), {"clt": r.rows()}, False


def cmd_lil(cfg, ctx):
    run = _section(cfg, "run")
    chain, _ = _system(cfg)
    r = le.lil_statistic(chain, n_max=int(run.get("n_max", 100_000)), replicas=int(run.get("replicas", 200)),
                         seed=ctx["seed"], start=run.get("start", "pi"), workers=ctx["workers"],
                         sigma_blocks=int(run.get("sigma_blocks", le.SIGMA_BLOCKS)))
    rows = [{"replica": i, "statistic": s} for i, s in enumerate(r.statistic)]
    return r.to_dict(), {"lil": rows}, False


def cmd_berry_esseen(cfg, ctx):
    run = _section(cfg, "run")
    chain, _ = _system(cfg)
    psi = _function(cfg, "psi") if "psi" in cfg else None
    r = le.berry_esseen_experiment(chain, n_values=tuple(run.get("n_values", (1000, 4000, 16000))),
                                   replicas=int(run.get("replicas", 10_000)), seed=ctx["seed"], psi=psi,
                                   workers=ctx["workers"], sigma_blocks=int(run.get("sigma_blocks", le.SIGMA_BLOCKS)))
    rows = [{"n": n, "delta_n": d} for n, d in zip(r.n_values, r.delta_n)]
    return r.to_dict(), {"berry_esseen": rows}, False


def cmd_tail_bound(cfg, ctx):
    run = _section(cfg, "run")
    chain, _ = _system(cfg)
    r = le.tail_bound_experiment(chain, alpha=float(run.get("alpha", 1.0)), beta=float(run.get("beta", 1.0)),
                                 n=int(run.get("n", 1000)), t_grid=run.get("t_grid"),
                                 replicas=int(run.get("replicas", 100_000)), seed=ctx["seed"], K=run.get("K"),
                                 level_K=float(run.get("level_K", 1.0)), workers=ctx["workers"])
    failed = not all(d["reconstruction_exact"] and d["triangle_holds"] for d in r.decomposition.values())
    if run.get("K") is not None:
        failed = failed or not all(r.dominates.values())
    return r.to_dict(), {"tail": r.rows()}, failed


def cmd_golden_examples(cfg, ctx):
    run = _section(cfg, "run")
    lo, hi = float(run.get("x_lo", 10.0)), float(run.get("x_hi", 1e3))
    rows = []
    for case in CASES:
        r = fit_case(case, _section(cfg, "params").get(case), lo, hi)
        rows.append({
            "case": case, "statement": r["statement"],
            "expected_exponent": r["expected"]["exponent"], "fitted_exponent": r["fitted"]["exponent"],
            "expected_log_power": r["expected"]["log_power"], "fitted_log_power": r["fitted"]["log_power"],
            "exponent_error": r["exponent_error"], "log_power_error": r["log_power_error"],
        })
    return {"cases": rows, "x_range": [lo, hi]}, {"golden_examples": rows}, False


COMMANDS: dict[str, Callable] = {
    "compute-rho": cmd_compute_rho,
    "compute-zeta": cmd_compute_zeta,
    "verify-bounds": cmd_verify_bounds,
    "certify-counterexample": cmd_certify_counterexample,
    "pitman-check": cmd_pitman_check,
    "clt": cmd_clt,
    "lil": cmd_lil,
    "berry-esseen": cmd_berry_esseen,
    "tail-bound": cmd_tail_bound,
    "golden-examples": cmd_golden_examples,
}


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orlicz-regen", description="Orlicz integrability experiments for regenerative chains.")
    p.add_argument("command", nargs="?", help=f"one of {', '.join(COMMANDS)} (overrides the config)")
    p.add_argument("--config", help="experiment TOML file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--workers", type=int, help=f"worker threads (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--out", help="output directory (default: config 'out' or ./orlicz_regen_out)")
    return p


def _resolve(args) -> tuple[str, dict, dict]:
    cfg = load_config(args.config) if args.config else {}
    command = args.command or cfg.get("command")
    if command is None:
        raise UsageError("no command given (positional argument or 'command' key)")
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}; known: {sorted(COMMANDS)}")
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is not None:
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    if command in STOCHASTIC and seed is None:
        raise ConfigError(f"command {command!r} is stochastic and needs a seed")
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be positive")
    cfg = dict(cfg, command=command, seed=seed)
    ctx = {"seed": seed, "workers": resolve_workers(args.workers)}
    return command, cfg, ctx


def _emit_error(exc: Exception, out: Path | None) -> int:
    err = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
    text = json.dumps(err, sort_keys=True)
    print(text)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return EXIT_ERROR


def main(argv: list[str] | None = None) -> int:
    out: Path | None = None
    try:
        args = _parser().parse_args(argv)
        out = Path(args.out) if args.out else None
        command, cfg, ctx = _resolve(args)
        if out is None:
            out = Path(cfg.get("out", "orlicz_regen_out"))
        result, tables, failed = COMMANDS[command](cfg, ctx)
    except (OrliczError, KeyError, TypeError, ValueError) as exc:
        return _emit_error(exc, out)
    report: dict[str, Any] = {
        "command": command,
        "status": "failed" if failed else "ok",
        "config": cfg,
        "result": result,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")
    for name, rows in tables.items():
        _write_csv(_jsonable(rows), out / f"{name}.csv")
    print(json.dumps({"command": command, "status": report["status"], "out": str(out)}))
    return EXIT_FAILED if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
