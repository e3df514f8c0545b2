"""Command-line harness.

Subcommands: ``verify-equilibrium``, ``spectral-report``, ``run``, ``sweep``
and ``wgan``. Exit codes: 0 success, 1 configuration error, 2 numerical
failure. JSON goes to stdout (and to ``--out`` when given); CSV artifacts
are written under ``--out``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .algorithms import SolverConfig, run
from .calculus import intrinsic_blocks
from .config import ConfigError, RunConfig, config_from_dict, load_config, parse_config
from .games import GamePoint, closed_form_equilibrium
from .linalg import ContractError, ConvergenceError, pseudo_inverse
from .manifolds import ManifoldError
from .spectral import (
    NoStepSizeError,
    classify_equilibrium,
    dne_certificate,
    gda_certificate,
    sga_certificate,
    tau_scan,
)
from .wgan import init_pretrain, random_init, save_checkpoint, sign_changes, train

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(report: dict, out_dir: str | None, name: str) -> None:
    text = json.dumps(_jsonable(report), indent=2, ensure_ascii=False)
    print(text)
    if out_dir:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _start_point(cfg: RunConfig, game) -> GamePoint:
    kind = cfg.start["kind"]
    if kind == "equilibrium":
        return closed_form_equilibrium(game)
    if kind == "pseudo_inverse":
        x = pseudo_inverse(game.a) @ game.b
        r = game.a @ x - game.b
        n = np.linalg.norm(r)
        if n <= 1e-12:
            raise ConvergenceError("pseudo-inverse start undefined: residual vanishes")
        return GamePoint(x, r / n)
    if kind == "random":
        rng = np.random.default_rng(cfg.start["seed"])
        return GamePoint(game.m1.random_point(rng), game.m2.random_point(rng))
    p = GamePoint(np.array(cfg.start["x"]), np.array(cfg.start["y"]))
    try:
        game.check_point(p)
    except (ContractError, ManifoldError) as exc:
        raise ConfigError(f"explicit start point invalid: {exc}") from exc
    return p


def cmd_verify_equilibrium(cfg: RunConfig, out: str | None) -> dict:
    game = cfg.build_game()
    point = _start_point(cfg, game) if cfg.start["kind"] != "pseudo_inverse" else closed_form_equilibrium(game)
    cls = classify_equilibrium(game, point)
    report = {"game": cfg.game["variant"], "class": cls.kind.value, "point": {"x": point.x, "y": point.y}}
    report.update(cls.to_dict())
    report.pop("kind", None)
    _emit(report, out, "verify_equilibrium.json")
    return report


def cmd_spectral_report(cfg: RunConfig, out: str | None) -> dict:
    game = cfg.build_game()
    point = closed_form_equilibrium(game)
    blocks = intrinsic_blocks(game, point)
    theta = cfg.spectral["theta"]
    report = {
        "game": cfg.game["variant"],
        "theta": theta,
        "blocks": {"a": blocks.a, "b": blocks.b, "c": blocks.c},
        "rows": tau_scan(blocks, cfg.spectral["tau_grid"], theta),
        "gda_certificate": gda_certificate(blocks).to_dict(),
    }
    try:
        report["sga_certificate"] = sga_certificate(blocks, theta).to_dict()
    except ContractError as exc:
        report["sga_certificate"] = {"error": str(exc)}
    try:
        report["dne_certificate"] = dne_certificate(blocks).to_dict()
    except ContractError as exc:
        report["dne_certificate"] = {"error": str(exc)}
    _emit(report, out, "spectral_report.json")
    return report


def _run_one(cfg: RunConfig, out: str, stem: str) -> dict:
    game = cfg.build_game()
    start = _start_point(cfg, game)
    ref = closed_form_equilibrium(game) if cfg.reference["kind"] == "equilibrium" else None
    traj = run(game, start, cfg.solver_config(), ref)
    traj.to_csv(os.path.join(out, f"{stem}.csv"))
    summary = traj.summary()
    summary["csv"] = f"{stem}.csv"
    with open(os.path.join(out, f"{stem}.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2)
    return summary


def cmd_run(cfg: RunConfig, out: str) -> dict:
    summary = _run_one(cfg, out, "trajectory")
    print(json.dumps(_jsonable(summary), indent=2))
    return summary


def cmd_sweep(cfg: RunConfig, out: str) -> dict:
    if not cfg.sweep:
        raise ConfigError("sweep needs a [sweep] table with taus")
    jobs = []
    for mode in cfg.sweep["modes"]:
        for tau in cfg.sweep["taus"]:
            d = cfg.as_dict()
            d["solver"]["mode"] = mode
            d["solver"]["tau"] = tau
            d.pop("sweep")
            sub = config_from_dict(d)
            jobs.append((mode, tau, sub, f"run_{sub.digest()}"))
    with ThreadPoolExecutor(max_workers=cfg.sweep["workers"]) as pool:
        results = list(pool.map(lambda j: _run_one(j[2], out, j[3]), jobs))
    index = [
        {"mode": m, "tau": t, "gamma": sub.gamma(), "stem": stem, "final_dist": r["final_dist"],
         "final_f": r["final_f"], "fitted_rate": r["fitted_rate"], "diverged": r["diverged"]}
        for (m, t, sub, stem), r in zip(jobs, results)
    ]
    report = {"runs": index}
    _emit(report, out, "sweep_index.json")
    return report


def cmd_wgan(cfg: RunConfig, out: str) -> dict:
    spec = cfg.wgan_spec()
    w = cfg.wgan
    seed = cfg.solver["seed"]
    if w["pretrain_iters"]:
        start = init_pretrain(spec, seed, w["pretrain_iters"], w["pretrain_tau"], w["pretrain_gamma"],
                              batch_size=w["pretrain_batch_size"])
    else:
        start = random_init(spec, seed)
    s = cfg.solver_config()
    # training batches must not repeat the pretraining batches
    s = SolverConfig(s.mode, s.tau, s.gamma, s.theta, s.max_iters, (seed + 1) % 2**64, s.record_every)
    hist = train(spec, start, s, batch_size=w["batch_size"], eval_every=w["eval_every"],
                 emd_samples=w["emd_samples"])
    hist.to_csv(os.path.join(out, "metrics.csv"))
    save_checkpoint(os.path.join(out, "checkpoint.json"), spec, hist.final,
                    {"t": s.max_iters, "solver": s.to_dict()})
    angles = hist.column("angle")
    report = {
        "diverged": hist.diverged,
        "rows": len(hist.rows),
        "final_cov_err": hist.column("cov_err")[-1] if hist.rows else None,
        "final_emd": hist.column("emd")[-1] if hist.rows else None,
        "angle_sign_changes": sign_changes(angles[np.isfinite(angles)]) if hist.rows else 0,
        "max_constraint_residual": hist.max_constraint_residual,
    }
    _emit(report, out, "summary.json")
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riemannian-minmax", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("verify-equilibrium", "spectral-report", "run", "sweep", "wgan"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config file (defaults to the built-in instance)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--gamma", help="literal step or 'c/tau'")
        p.add_argument("--theta", type=float)
        p.add_argument("--iters", type=int)
    return ap


def _gamma_arg(g):
    if g is None:
        return None
    try:
        return float(g)
    except ValueError:
        return g


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else parse_config(
            "[game]\nvariant = \"wgan\"\n" if args.command == "wgan" else "")
        cfg = cfg.with_overrides(tau=args.tau, gamma=_gamma_arg(args.gamma), theta=args.theta,
                                 seed=args.seed, iters=args.iters)
        out = args.out or cfg.output.get("dir")
        if args.command in ("run", "sweep", "wgan") and not out:
            raise ConfigError(f"{args.command} needs --out DIR")
        if out:
            try:
                os.makedirs(out, exist_ok=True)
            except OSError as exc:
                print(f"error: cannot create output directory: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
        if args.command == "wgan" and not cfg.is_wgan:
            raise ConfigError("wgan command needs game.variant = 'wgan'")
        handler = {
            "verify-equilibrium": cmd_verify_equilibrium,
            "spectral-report": cmd_spectral_report,
            "run": cmd_run,
            "sweep": cmd_sweep,
            "wgan": cmd_wgan,
        }[args.command]
        handler(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NoStepSizeError, ManifoldError, ContractError, ArithmeticError,
            RuntimeError, ValueError, OSError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
