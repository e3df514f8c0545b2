"""Simultaneous tau-GDA, tau-SGA and asymptotic tau-SGA with trajectory recording."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .calculus import cross_grad_apply_x, cross_grad_apply_y, riemannian_grads
from .games import Game, GamePoint, LinearSphereGame
from .linalg import ContractError

__all__ = [
    "MODES",
    "SolverConfig",
    "Trajectory",
    "RateFitError",
    "draw_rng",
    "sga_mu",
    "step_gda",
    "step_sga",
    "step_asymp_sga",
    "step",
    "sga_orthogonality_residual",
    "run",
    "estimate_rate",
    "peak_growth",
    "CSV_COLUMNS",
]

MODES = ("gda", "sga", "asymp_sga")
CSV_COLUMNS = ("t", "f", "grad_norm_x", "grad_norm_y", "dist")


class RateFitError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "gda"
    tau: float = 1.0
    gamma: float = 1e-3
    theta: float = 0.0
    max_iters: int = 1000
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ContractError("tau must be positive and finite")
        if not (self.gamma > 0 and math.isfinite(self.gamma * self.tau)):
            raise ContractError("gamma must be positive with gamma * tau finite")
        if self.theta < 0:
            raise ContractError("theta must be >= 0")
        if self.max_iters < 0 or self.record_every < 1:
            raise ContractError("max_iters must be >= 0 and record_every >= 1")
        if not 0 <= self.seed < 2**64:
            raise ContractError("seed must fit in 64 unsigned bits")

    @property
    def mu(self) -> float:
        return sga_mu(self.tau, self.theta)

    def to_dict(self) -> dict:
        return asdict(self)


def draw_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for draw number ``index`` of a run seeded with ``seed``.

    Philox is counter-based, so draw ``index`` is reproducible without
    replaying earlier draws. ``stream`` selects a disjoint counter region
    (initialization and evaluation draws use their own streams).
    """
    return np.random.Generator(
        np.random.Philox(key=int(seed), counter=[0, 0, int(stream), int(index)])
    )


def peak_growth(traj: "Trajectory", tail_fraction: float = 0.2) -> float:
    """Ratio of peak distances in the second and first halves of the trajectory tail.

    A ratio above one means the distance envelope is growing, which is
    robust to slow rotation of the iterates that makes raw endpoint
    comparisons depend on phase.
    """
    if traj.dist is None:
        raise RateFitError("trajectory has no distance to a reference point")
    d = np.asarray(traj.dist, dtype=float)
    n_tail = max(4, int(math.ceil(tail_fraction * len(d))))
    if n_tail > len(d):
        raise RateFitError("trajectory too short for a tail comparison")
    tail = d[-n_tail:]
    half = n_tail // 2
    return float(np.max(tail[half:]) / np.max(tail[:half]))


def sga_mu(tau: float, theta: float) -> float:
    return theta * 2.0 / (tau * (tau + 1.0))


def step_gda(game: Game, p: GamePoint, tau: float, gamma: float, batch: Any = None) -> GamePoint:
    delta, eta = riemannian_grads(game, p, batch)
    return GamePoint(game.m1.retract(p.x, -gamma * delta), game.m2.retract(p.y, tau * gamma * eta))


def _sga_tangents(game, p, tau, gamma, theta, batch, detached_batch, full, cross_method):
    delta, eta = riemannian_grads(game, p, batch)
    if detached_batch is None:
        d_det, e_det = delta, eta
    else:
        d_det, e_det = riemannian_grads(game, p, detached_batch)
    mu = sga_mu(tau, theta)
    xi1 = -gamma * delta
    xi2 = tau * gamma * eta
    if mu:
        be = cross_grad_apply_y(game, p, e_det, method=cross_method, batch=batch)
        xi1 = -gamma * (delta + mu * (tau + 1.0) * tau / 2.0 * be)
        if full:
            btd = cross_grad_apply_x(game, p, d_det, method=cross_method, batch=batch)
            xi2 = gamma * (tau * eta - mu * (tau + 1.0) / 2.0 * btd)
    return xi1, xi2


def step_sga(
    game: Game,
    p: GamePoint,
    tau: float,
    gamma: float,
    theta: float,
    batch: Any = None,
    detached_batch: Any = None,
    *,
    cross_method: str = "auto",
) -> GamePoint:
    """One simultaneous tau-SGA step.

    With ``mu = 2 theta / (tau (tau + 1))``::

        xi1 = -gamma (delta + mu (tau+1) tau / 2 * B~[eta])
        xi2 =  gamma (tau eta - mu (tau+1) / 2 * B~^T[delta])

    ``delta`` and ``eta`` inside the cross products are constants. In the
    stochastic setting they come from ``detached_batch`` while the
    differentiated field and the main gradients use ``batch``.
    """
    xi1, xi2 = _sga_tangents(game, p, tau, gamma, theta, batch, detached_batch, True, cross_method)
    return GamePoint(game.m1.retract(p.x, xi1), game.m2.retract(p.y, xi2))


def step_asymp_sga(
    game: Game,
    p: GamePoint,
    tau: float,
    gamma: float,
    theta: float,
    batch: Any = None,
    detached_batch: Any = None,
    *,
    cross_method: str = "auto",
) -> GamePoint:
    """tau-SGA update for ``x``, plain tau-GDA update for ``y``."""
    xi1, xi2 = _sga_tangents(game, p, tau, gamma, theta, batch, detached_batch, False, cross_method)
    return GamePoint(game.m1.retract(p.x, xi1), game.m2.retract(p.y, xi2))


def step(game: Game, p: GamePoint, cfg: SolverConfig, batch=None, detached_batch=None) -> GamePoint:
    if cfg.mode == "gda":
        return step_gda(game, p, cfg.tau, cfg.gamma, batch)
    fn = step_sga if cfg.mode == "sga" else step_asymp_sga
    return fn(game, p, cfg.tau, cfg.gamma, cfg.theta, batch, detached_batch)


def sga_orthogonality_residual(game: Game, p: GamePoint, tau: float, batch: Any = None) -> float:
    """``<tau B~[eta], delta> + <B~^T[delta], -tau eta>``, which vanishes identically."""
    delta, eta = riemannian_grads(game, p, batch)
    be = cross_grad_apply_y(game, p, eta, batch=batch)
    btd = cross_grad_apply_x(game, p, delta, batch=batch)
    return float(tau * (be @ delta) - tau * (btd @ eta))


@dataclass
class Trajectory:
    """Recorded iterates. ``dist`` is empty when no reference point was given."""

    t: np.ndarray
    f: np.ndarray
    grad_norm_x: np.ndarray
    grad_norm_y: np.ndarray
    dist: np.ndarray | None
    xs: np.ndarray
    ys: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def final_point(self) -> GamePoint:
        return GamePoint(self.xs[-1].copy(), self.ys[-1].copy())

    def point(self, i: int) -> GamePoint:
        return GamePoint(self.xs[i].copy(), self.ys[i].copy())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i in range(len(self.t)):
                d = "" if self.dist is None else repr(float(self.dist[i]))
                w.writerow([int(self.t[i]), repr(float(self.f[i])), repr(float(self.grad_norm_x[i])),
                            repr(float(self.grad_norm_y[i])), d])

    def summary(self, tail_fraction: float = 0.2) -> dict:
        out = {
            "records": len(self),
            "final_t": int(self.t[-1]) if len(self) else None,
            "final_f": float(self.f[-1]) if len(self) else None,
            "final_dist": float(self.dist[-1]) if self.dist is not None and len(self) else None,
            "diverged": self.diverged,
            "diverged_at": self.diverged_at,
            "fitted_rate": None,
            "r_squared": None,
            "config": self.config,
        }
        if self.dist is not None:
            try:
                out["fitted_rate"], out["r_squared"] = estimate_rate(self, tail_fraction)
            except RateFitError as exc:
                out["rate_note"] = str(exc)
        return out

    def write_summary(self, path, tail_fraction: float = 0.2) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(tail_fraction), fh, indent=2)


def _use_kernel(game, cfg, monitor, cross_method):
    return (
        type(game) is LinearSphereGame
        and monitor is None
        and cross_method == "auto"
    )


def _run_kernel(game: LinearSphereGame, start, cfg, reference):
    from ._kernels import MODE_CODES, VARIANT_CODES, linear_sphere_run

    has_ref = reference is not None
    xr = np.asarray(reference.x if has_ref else start.x, dtype=float)
    yr = np.asarray(reference.y if has_ref else start.y, dtype=float)
    t, f, gx, gy, d, xs, ys, div = linear_sphere_run(
        np.ascontiguousarray(game.a), game.b, game.kappa, VARIANT_CODES[game.variant],
        MODE_CODES[cfg.mode], float(cfg.tau), float(cfg.gamma), float(cfg.theta),
        np.asarray(start.x, dtype=float), np.asarray(start.y, dtype=float),
        int(cfg.max_iters), int(cfg.record_every), xr, yr, has_ref,
    )
    return Trajectory(t, f, gx, gy, d if has_ref else None, xs, ys,
                      div >= 0, int(div) if div >= 0 else None, cfg.to_dict())


def run(
    game: Game,
    start: GamePoint,
    cfg: SolverConfig,
    reference: GamePoint | None = None,
    *,
    monitor: Callable[[int, GamePoint, Any], None] | None = None,
    cross_method: str = "auto",
    use_kernel: bool | None = None,
) -> Trajectory:
    """Iterate the configured update ``cfg.max_iters`` times.

    Parameters
    ----------
    game, start
        Game and a valid initial point.
    cfg : SolverConfig
        Algorithm, ratio ``tau``, step ``gamma``, SGA weight ``theta``.
    reference : GamePoint, optional
        When given, the distance surrogate ``d_M1(x, x_ref) + d_M2(y, y_ref)``
        is recorded.
    monitor : callable, optional
        Called as ``monitor(t, point, batch)`` before every step.
    use_kernel : bool, optional
        Force (True) or disable (False) the compiled loop for
        ``LinearSphereGame``; by default it is used when applicable.

    Returns
    -------
    Trajectory
        Records at ``t = 0, record_every, 2 record_every, ...`` and at the
        final iteration. A non-finite value or gradient stops the run and
        sets ``diverged``.

    Notes
    -----
    For stochastic games, step ``k`` uses the minibatch drawn from
    ``draw_rng(seed, 2k)``; SGA modes take their detached vectors from an
    independent batch ``draw_rng(seed, 2k + 1)``.
    """
    game.check_point(start)
    if use_kernel is None:
        use_kernel = _use_kernel(game, cfg, monitor, cross_method)
    if use_kernel:
        if not _use_kernel(game, cfg, monitor, cross_method):
            raise ContractError("compiled loop only supports LinearSphereGame without monitors")
        return _run_kernel(game, start, cfg, reference)

    rec = {k: [] for k in ("t", "f", "gx", "gy", "d", "x", "y")}
    p = GamePoint(np.array(start.x, dtype=float), np.array(start.y, dtype=float))
    diverged_at = None
    for t in range(cfg.max_iters + 1):
        batch = detached = None
        if game.stochastic:
            batch = game.sample(draw_rng(cfg.seed, 2 * t))
            if cfg.mode != "gda":
                detached = game.sample(draw_rng(cfg.seed, 2 * t + 1))
        with np.errstate(all="ignore"):
            f = game.value(p, batch)
            delta, eta = riemannian_grads(game, p, batch)
            gnx, gny = float(np.linalg.norm(delta)), float(np.linalg.norm(eta))
        if not (math.isfinite(f) and math.isfinite(gnx) and math.isfinite(gny)):
            diverged_at = t
            break
        if t % cfg.record_every == 0 or t == cfg.max_iters:
            rec["t"].append(t)
            rec["f"].append(f)
            rec["gx"].append(gnx)
            rec["gy"].append(gny)
            if reference is not None:
                rec["d"].append(game.m1.dist(p.x, reference.x) + game.m2.dist(p.y, reference.y))
            rec["x"].append(p.x.copy())
            rec["y"].append(p.y.copy())
        if t == cfg.max_iters:
            break
        if monitor is not None:
            monitor(t, p, batch)
        if cfg.mode == "gda":
            p = step_gda(game, p, cfg.tau, cfg.gamma, batch)
        else:
            fn = step_sga if cfg.mode == "sga" else step_asymp_sga
            p = fn(game, p, cfg.tau, cfg.gamma, cfg.theta, batch, detached, cross_method=cross_method)
    return Trajectory(
        np.asarray(rec["t"], dtype=np.int64),
        np.asarray(rec["f"]),
        np.asarray(rec["gx"]),
        np.asarray(rec["gy"]),
        np.asarray(rec["d"]) if reference is not None else None,
        np.asarray(rec["x"]).reshape(len(rec["t"]), game.m1.ambient_dim),
        np.asarray(rec["y"]).reshape(len(rec["t"]), game.m2.ambient_dim),
        diverged_at is not None,
        diverged_at,
        cfg.to_dict(),
    )


def estimate_rate(traj: Trajectory, tail_fraction: float = 0.2, floor: float = 1e-14) -> tuple[float, float]:
    """Per-iteration linear rate from the tail of the distance record.

    Fits ``log dist = slope * t + c`` by least squares over the last
    ``tail_fraction`` of usable records and returns ``(exp(slope), r_squared)``.
    Records are usable up to the first distance at or below ``floor``;
    raising ``floor`` keeps the fit away from the rounding plateau of a
    fully converged run.
    """
    if traj.dist is None:
        raise RateFitError("trajectory has no distance to a reference point")
    if not 0 < tail_fraction <= 1:
        raise RateFitError("tail_fraction must lie in (0, 1]")
    t = np.asarray(traj.t, dtype=float)
    d = np.asarray(traj.dist, dtype=float)
    ok = np.isfinite(d) & (d > floor)
    # only the leading run of usable points: once the distance underflows it stays meaningless
    bad = np.flatnonzero(~ok)
    stop = bad[0] if bad.size else len(d)
    if stop < 20:
        raise RateFitError("converged too fast to fit: fewer than 20 usable records")
    t, d = t[:stop], d[:stop]
    n_tail = max(3, int(math.ceil(tail_fraction * stop)))
    tt, ld = t[-n_tail:], np.log(d[-n_tail:])
    slope, intercept = np.polyfit(tt, ld, 1)
    resid = ld - (slope * tt + intercept)
    ss_tot = float(np.sum((ld - ld.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(math.exp(slope)), r2
