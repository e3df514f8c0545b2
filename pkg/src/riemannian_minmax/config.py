"""TOML experiment configuration with a canonical, round-trippable form.

Example::

    [game]
    variant = "example2"          # example1 | example2 | example3 | wgan
    a = [[1.0], [1.0], [1.0]]
    b = [1.0, 1.0, 0.99]
    kappa = 0.1

    [solver]
    mode = "gda"                  # gda | sga | asymp_sga
    tau = 50.0
    gamma = "0.001/tau"           # literal or "c/tau"
    max_iters = 200000
    record_every = 100

``gamma`` written as ``"c/tau"`` is kept symbolically so that overriding
``tau`` rescales the step, as in the ``gamma = 0.001/tau`` convention.
"""
from __future__ import annotations

import copy
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .algorithms import MODES, SolverConfig
from .games import VARIANTS, LinearSphereGame
from .linalg import ContractError
from .wgan import GaussianWganSpec

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_from_dict", "load_config", "dump_config", "resolve_gamma"]

_GAMMA_EXPR = re.compile(r"^\s*([0-9.eE+-]+)\s*/\s*tau\s*$")

DEFAULT_A = [[1.0], [1.0], [1.0]]
DEFAULT_B = [1.0, 1.0, 0.99]


class ConfigError(ValueError):
    pass


def resolve_gamma(gamma: float | str, tau: float) -> float:
    if isinstance(gamma, str):
        m = _GAMMA_EXPR.match(gamma)
        if not m:
            raise ConfigError(f"gamma expression must look like 'c/tau', got {gamma!r}")
        try:
            return float(m.group(1)) / tau
        except ValueError as exc:
            raise ConfigError(f"bad constant in gamma expression {gamma!r}") from exc
    return float(gamma)


def _canonical_gamma(g):
    if isinstance(g, str):
        m = _GAMMA_EXPR.match(g)
        if not m:
            raise ConfigError(f"gamma expression must look like 'c/tau', got {g!r}")
        try:
            return f"{float(m.group(1))!r}/tau"
        except ValueError as exc:
            raise ConfigError(f"bad constant in gamma expression {g!r}") from exc
    if isinstance(g, bool) or not isinstance(g, (int, float)):
        raise ConfigError("gamma must be a number or a 'c/tau' string")
    return float(g)


_SECTIONS = ("game", "solver", "start", "reference", "spectral", "sweep", "wgan", "output")


@dataclass
class RunConfig:
    """Validated configuration in canonical form (plain dicts of JSON/TOML scalars)."""

    game: dict
    solver: dict
    start: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    spectral: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    wgan: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in _SECTIONS if getattr(self, k)}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()[:12]

    @property
    def is_wgan(self) -> bool:
        return self.game["variant"] == "wgan"

    def gamma(self) -> float:
        return resolve_gamma(self.solver["gamma"], self.solver["tau"])

    def solver_config(self) -> SolverConfig:
        s = self.solver
        try:
            return SolverConfig(s["mode"], s["tau"], self.gamma(), s["theta"], s["max_iters"],
                                s["seed"], s["record_every"])
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc

    def build_game(self) -> LinearSphereGame:
        g = self.game
        if self.is_wgan:
            raise ConfigError("this command needs a linear sphere game, not the wgan variant")
        try:
            return LinearSphereGame(np.array(g["a"], dtype=float), np.array(g["b"], dtype=float),
                                    g.get("kappa", 0.0), g["variant"])
        except ContractError as exc:
            raise ConfigError(f"invalid game: {exc}") from exc

    def wgan_spec(self) -> GaussianWganSpec:
        w = self.wgan
        try:
            return GaussianWganSpec(tuple(w["sigma_diag"]), w["p"], w["k"], w["eps"])
        except ContractError as exc:
            raise ConfigError(f"invalid wgan spec: {exc}") from exc

    def with_overrides(self, **kw) -> "RunConfig":
        d = self.as_dict()
        for key in ("tau", "gamma", "theta", "seed"):
            if kw.get(key) is not None:
                d["solver"][key] = kw[key]
        if kw.get("iters") is not None:
            d["solver"]["max_iters"] = kw["iters"]
        return _validate(d)


def _num(sec, key, default, kind=float, lo=None, strict=False):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number")
    if isinstance(v, float) and not np.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{key} must be an integer")
        v = int(v)
    else:
        try:
            v = float(v)
        except OverflowError as exc:
            raise ConfigError(f"{key} must be finite") from exc
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(f"{key} must be {'>' if strict else '>='} {lo}")
    return v


def _matrix(v, name, ndim):
    try:
        arr = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a numeric array") from exc
    if arr.ndim != ndim or arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be a finite {ndim}-D array")
    return arr.tolist()


def _validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for k, v in raw.items():
        if not isinstance(v, dict):
            raise ConfigError(f"[{k}] must be a table")

    g = dict(raw.get("game", {}))
    variant = g.get("variant", "example2")
    if variant not in VARIANTS + ("wgan",):
        raise ConfigError(f"unknown game variant {variant!r}")
    game: dict[str, Any] = {"variant": variant}
    if variant != "wgan":
        game["a"] = _matrix(g.get("a", DEFAULT_A), "a", 2)
        game["b"] = _matrix(g.get("b", DEFAULT_B), "b", 1)
        game["kappa"] = _num(g, "kappa", 0.1 if variant == "example2" else 0.0, lo=0.0)
    elif set(g) - {"variant"}:
        raise ConfigError("wgan games are configured in the [wgan] table")

    s = dict(raw.get("solver", {}))
    mode = s.get("mode", "gda")
    if mode not in MODES:
        raise ConfigError(f"solver.mode must be one of {MODES}")
    solver = {
        "mode": mode,
        "tau": _num(s, "tau", 1.0, lo=0.0, strict=True),
        "gamma": _canonical_gamma(s.get("gamma", 1e-3)),
        "theta": _num(s, "theta", 0.0, lo=0.0),
        "max_iters": _num(s, "max_iters", 1000, int, lo=0),
        "seed": _num(s, "seed", 0, int, lo=0),
        "record_every": _num(s, "record_every", 1, int, lo=1),
    }
    if resolve_gamma(solver["gamma"], solver["tau"]) <= 0:
        raise ConfigError("gamma must be positive")
    if solver["seed"] >= 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    extra = set(s) - set(solver)
    if extra:
        raise ConfigError(f"unknown solver keys: {sorted(extra)}")

    st = dict(raw.get("start", {}))
    start: dict[str, Any] = {"kind": st.get("kind", "pseudo_inverse")}
    if start["kind"] not in ("pseudo_inverse", "equilibrium", "random", "explicit"):
        raise ConfigError(f"unknown start kind {start['kind']!r}")
    if start["kind"] == "explicit":
        start["x"] = _matrix(st.get("x"), "start.x", 1)
        start["y"] = _matrix(st.get("y"), "start.y", 1)
    if start["kind"] == "random":
        start["seed"] = _num(st, "seed", 0, int, lo=0)

    r = dict(raw.get("reference", {}))
    reference = {"kind": r.get("kind", "equilibrium")}
    if reference["kind"] not in ("equilibrium", "none"):
        raise ConfigError("reference.kind must be 'equilibrium' or 'none'")

    sp = dict(raw.get("spectral", {}))
    tau_grid = sp.get("tau_grid", [30.0, 50.0])
    if not isinstance(tau_grid, list) or not tau_grid:
        raise ConfigError("spectral.tau_grid must be a non-empty list")
    spectral = {
        "tau_grid": [_num({"t": t}, "t", None, lo=0.0, strict=True) for t in tau_grid],
        "theta": _num(sp, "theta", 0.15, lo=0.0),
    }

    sw = dict(raw.get("sweep", {}))
    sweep = {}
    if sw:
        taus = sw.get("taus", [])
        modes = sw.get("modes", [mode])
        if not isinstance(taus, list) or not taus:
            raise ConfigError("sweep.taus must be a non-empty list")
        if not isinstance(modes, list) or any(m not in MODES for m in modes):
            raise ConfigError(f"sweep.modes must list entries of {MODES}")
        sweep = {
            "taus": [_num({"t": t}, "t", None, lo=0.0, strict=True) for t in taus],
            "modes": list(modes),
            "workers": _num(sw, "workers", 1, int, lo=1),
        }

    wg = dict(raw.get("wgan", {}))
    wgan = {}
    if variant == "wgan" or wg:
        wgan = {
            "sigma_diag": [float(x) for x in _matrix(wg.get("sigma_diag", [1.0, 4.0, 9.0, 16.0, 0.01]),
                                                      "sigma_diag", 1)],
            "p": _num(wg, "p", 4, int, lo=1),
            "k": _num(wg, "k", 5, int, lo=1),
            "eps": _num(wg, "eps", 1e-6, lo=0.0, strict=True),
            "batch_size": _num(wg, "batch_size", 256, int, lo=1),
            "pretrain_iters": _num(wg, "pretrain_iters", 0, int, lo=0),
            "pretrain_tau": _num(wg, "pretrain_tau", 100.0, lo=0.0, strict=True),
            "pretrain_gamma": _num(wg, "pretrain_gamma", 2e-4, lo=0.0, strict=True),
            "pretrain_batch_size": _num(wg, "pretrain_batch_size", 1000, int, lo=1),
            "eval_every": _num(wg, "eval_every", 1000, int, lo=0),
            "emd_samples": _num(wg, "emd_samples", 512, int, lo=1),
        }
        if wgan["emd_samples"] > 512:
            raise ConfigError("wgan.emd_samples must be <= 512")
    out = dict(raw.get("output", {}))
    output = {"dir": str(out["dir"])} if "dir" in out else {}
    return RunConfig(game, solver, start, reference, spectral, sweep, wgan, output)


def config_from_dict(raw: dict) -> RunConfig:
    return _validate(copy.deepcopy(raw))


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return _validate(raw)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.as_dict())
