"""Wasserstein GAN for a degenerate Gaussian with an orthogonally constrained critic.

Data ``phi ~ N(0, diag(sigma_diag))``; generator ``phi_x = A z`` with
``z ~ N(0, I_p)``; critic ``D(phi) = <v, s(W phi)>`` with the smooth
absolute value ``s(a) = sqrt(a^2 + eps^2)``, ``W`` a ``k x d`` matrix with
orthonormal rows and ``v`` a unit vector. The game is

    min_A max_{W, v}  E D(phi_data) - E D(A z)

on ``R^{d x p}`` times ``St(k, d) x St(1, k)``. The Stiefel factor stores
``W^T`` (``d x k``, orthonormal columns).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .algorithms import SolverConfig, draw_rng, step
from .games import Game, GamePoint
from .linalg import ContractError
from .manifolds import Euclidean, Product, Stiefel, polar_factor

__all__ = [
    "GaussianWganSpec",
    "WganPoint",
    "WganGame",
    "WganDivergenceError",
    "smooth_abs",
    "discriminator",
    "minibatch_value_and_grads",
    "angle",
    "population_feature_gap",
    "population_angle",
    "covariance_error",
    "emd",
    "random_init",
    "init_pretrain",
    "train",
    "WganHistory",
    "METRIC_COLUMNS",
    "save_checkpoint",
    "load_checkpoint",
    "sign_changes",
]

EMD_MAX_N = 512
F_BOUND = 1e6
METRIC_COLUMNS = ("t", "f_hat", "angle", "cov_err", "emd")

# RNG streams (third Philox counter word); training batches use stream 0
_INIT_STREAM = 1
_EVAL_STREAM = 2


class WganDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianWganSpec:
    sigma_diag: tuple = (1.0, 4.0, 9.0, 16.0, 0.01)
    p: int = 4
    k: int = 5
    eps: float = 1e-6

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigma_diag)
        object.__setattr__(self, "sigma_diag", sig)
        if not sig or min(sig) <= 0:
            raise ContractError("sigma_diag must be non-empty and positive")
        if not 0 < self.p <= self.d:
            raise ContractError("latent dimension p must satisfy 0 < p <= d")
        if not 0 < self.k <= self.d:
            raise ContractError("critic width k must satisfy 0 < k <= d")
        if self.eps <= 0:
            raise ContractError("eps must be positive")

    @property
    def d(self) -> int:
        return len(self.sigma_diag)

    @property
    def sigma(self) -> np.ndarray:
        return np.diag(self.sigma_diag)

    def sample_data(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.d)) * np.sqrt(self.sigma_diag)

    def sample_latent(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.p))

    def to_dict(self) -> dict:
        return {"sigma_diag": list(self.sigma_diag), "d": self.d, "p": self.p, "k": self.k, "eps": self.eps}


@dataclass
class WganPoint:
    a_x: np.ndarray  # (d, p)
    w: np.ndarray    # (k, d), orthonormal rows
    v: np.ndarray    # (k,), unit norm

    def to_game_point(self) -> GamePoint:
        return GamePoint(
            np.asarray(self.a_x, dtype=float).ravel().copy(),
            np.concatenate([np.asarray(self.w, dtype=float).T.ravel(), np.asarray(self.v, dtype=float)]),
        )

    @classmethod
    def from_game_point(cls, spec: GaussianWganSpec, gp: GamePoint) -> "WganPoint":
        d, p, k = spec.d, spec.p, spec.k
        return cls(
            np.asarray(gp.x, dtype=float).reshape(d, p).copy(),
            np.asarray(gp.y[: d * k], dtype=float).reshape(d, k).T.copy(),
            np.asarray(gp.y[d * k:], dtype=float).copy(),
        )

    def to_dict(self) -> dict:
        return {"a_x": np.asarray(self.a_x).tolist(), "w": np.asarray(self.w).tolist(),
                "v": np.asarray(self.v).tolist()}


def smooth_abs(a, eps: float):
    return np.sqrt(a * a + eps * eps)


def discriminator(spec: GaussianWganSpec, w, v, phi) -> np.ndarray | float:
    """``<v, s(W phi)>`` for one sample ``phi`` (d,) or a batch (n, d)."""
    phi = np.asarray(phi, dtype=float)
    out = smooth_abs(phi @ np.asarray(w, dtype=float).T, spec.eps) @ np.asarray(v, dtype=float)
    return float(out) if phi.ndim == 1 else out


def _value_and_grads(spec, a, xw, v, data, z):
    """Minibatch estimate and its exact gradients w.r.t. ``A`` (d,p), ``W^T`` (d,k), ``v`` (k,)."""
    eps = spec.eps
    fake = z @ a.T
    sd = data @ xw
    sf = fake @ xw
    ad = smooth_abs(sd, eps)
    af = smooth_abs(sf, eps)
    f = float(np.mean(ad @ v) - np.mean(af @ v))
    gv = ad.mean(axis=0) - af.mean(axis=0)
    dd = (sd / ad) * v
    df = (sf / af) * v
    g_xw = data.T @ dd / len(data) - fake.T @ df / len(fake)
    g_a = -(xw @ df.T @ z) / len(z)
    return f, g_a, g_xw, gv


def minibatch_value_and_grads(spec: GaussianWganSpec, point: WganPoint, data_batch, z_batch):
    """Minibatch value ``f_hat`` and its ambient gradients.

    Parameters
    ----------
    spec : GaussianWganSpec
    point : WganPoint
    data_batch : ndarray, shape (n, d)
    z_batch : ndarray, shape (m, p)

    Returns
    -------
    f_hat : float
        ``mean D(data) - mean D(A z)``.
    grad_a : ndarray (d, p)
    grad_w : ndarray (k, d)
        Gradient with respect to the rows of ``W``.
    grad_v : ndarray (k,)
        ``mean s(W phi_data) - mean s(W A z)``; this is the feature-mean
        difference used by :func:`angle`.
    """
    data, z = _check_batches(spec, data_batch, z_batch)
    f, g_a, g_xw, gv = _value_and_grads(spec, np.asarray(point.a_x, float), np.asarray(point.w, float).T,
                                        np.asarray(point.v, float), data, z)
    return f, g_a, g_xw.T, gv


def _check_batches(spec, data, z):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if data.shape[0] == 0 or z.shape[0] == 0:
        raise ContractError("batches must be non-empty")
    if data.shape[1] != spec.d or z.shape[1] != spec.p:
        raise ContractError(f"batch widths must be d={spec.d} and p={spec.p}")
    return data, z


def angle(spec: GaussianWganSpec, point: WganPoint, data_batch, z_batch) -> float:
    """Cosine between ``v`` and the feature-mean difference ``delta_hat``."""
    _, _, _, gv = minibatch_value_and_grads(spec, point, data_batch, z_batch)
    n = float(np.linalg.norm(gv))
    if n <= 1e-12:
        raise ContractError("angle undefined: feature-mean difference vanishes")
    return float(np.clip(np.asarray(point.v) @ gv / n, -1.0, 1.0))


def population_feature_gap(spec: GaussianWganSpec, point: WganPoint) -> np.ndarray:
    """Population value of the feature-mean difference for Gaussian data and generator.

    Each feature ``w_i . phi`` is centered normal, so ``E|w_i . phi| =
    sqrt(2/pi) * sqrt(w_i^T S w_i)`` with ``S`` the relevant covariance.
    Smoothing by ``eps`` shifts each expectation by at most ``eps``.
    """
    w = np.asarray(point.w, dtype=float)
    a = np.asarray(point.a_x, dtype=float)
    s_data = np.einsum("kd,d,kd->k", w, np.asarray(spec.sigma_diag), w)
    wa = w @ a
    s_fake = np.einsum("kp,kp->k", wa, wa)
    return math.sqrt(2.0 / math.pi) * (np.sqrt(s_data) - np.sqrt(s_fake))


def population_angle(spec: GaussianWganSpec, point: WganPoint) -> float:
    """Cosine between ``v`` and the population feature-mean difference."""
    gap = population_feature_gap(spec, point)
    n = float(np.linalg.norm(gap))
    if n <= 1e-12:
        raise ContractError("angle undefined: feature-mean difference vanishes")
    return float(np.clip(np.asarray(point.v) @ gap / n, -1.0, 1.0))


def covariance_error(spec: GaussianWganSpec, a_x) -> float:
    a = np.asarray(a_x, dtype=float)
    return float(np.linalg.norm(spec.sigma - a @ a.T, 2))


def emd(sample_p, sample_q) -> float:
    """Exact 1-Wasserstein distance between two equal-size uniform point clouds.

    Solves the optimal assignment problem on the Euclidean cost matrix
    (``scipy.optimize.linear_sum_assignment``). At most 512 points.
    """
    p = np.atleast_2d(np.asarray(sample_p, dtype=float))
    q = np.atleast_2d(np.asarray(sample_q, dtype=float))
    if p.shape[0] != q.shape[0]:
        raise ContractError(f"sample sizes differ: {p.shape[0]} vs {q.shape[0]}")
    if p.shape[1] != q.shape[1]:
        raise ContractError("samples live in different dimensions")
    if p.shape[0] > EMD_MAX_N:
        raise ContractError(f"n = {p.shape[0]} > {EMD_MAX_N}: subsample first")
    if p.shape[0] == 0:
        raise ContractError("empty samples")
    cost = cdist(p, q)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


class WganGame(Game):
    """Stochastic game; ``sample(rng)`` returns a ``(data, z)`` minibatch pair."""

    stochastic = True

    def __init__(self, spec: GaussianWganSpec = GaussianWganSpec(), batch_size: int = 256):
        if batch_size < 1:
            raise ContractError("batch_size must be positive")
        self.spec = spec
        self.batch_size = int(batch_size)
        self.m1 = Euclidean(spec.d * spec.p)
        self.m2 = Product([Stiefel(spec.k, spec.d), Stiefel(1, spec.k)])
        self._memo = None

    def sample(self, rng):
        return self.spec.sample_data(rng, self.batch_size), self.spec.sample_latent(rng, self.batch_size)

    def _unpack(self, p):
        s = self.spec
        return (np.asarray(p.x).reshape(s.d, s.p), np.asarray(p.y[: s.d * s.k]).reshape(s.d, s.k),
                np.asarray(p.y[s.d * s.k:]))

    def _need(self, batch):
        if batch is None:
            raise ContractError("WganGame evaluations need a minibatch")
        return batch

    def _evaluate(self, p, batch):
        data, z = self._need(batch)
        # value and gradients share one pass; remember the last evaluation
        key = (id(data), id(z), p.x.tobytes(), p.y.tobytes())
        if self._memo is None or self._memo[0] != key:
            self._memo = (key, _value_and_grads(self.spec, *self._unpack(p), data, z))
        return self._memo[1]

    def value(self, p, batch=None):
        return self._evaluate(p, batch)[0]

    def ambient_grads(self, p, batch=None):
        _, g_a, g_xw, gv = self._evaluate(p, batch)
        return g_a.ravel(), np.concatenate([g_xw.ravel(), gv])


def random_init(spec: GaussianWganSpec, seed: int) -> WganPoint:
    """Standard-normal generator matrix and polar-projected random critic."""
    rng = draw_rng(seed, 0, _INIT_STREAM)
    a = rng.standard_normal((spec.d, spec.p))
    xw = polar_factor(rng.standard_normal((spec.d, spec.k)))
    v = rng.standard_normal(spec.k)
    return WganPoint(a, xw.T, v / np.linalg.norm(v))


@dataclass
class WganHistory:
    rows: list = field(default_factory=list)  # tuples in METRIC_COLUMNS order
    final: WganPoint | None = None
    diverged: bool = False
    max_constraint_residual: float = 0.0

    def column(self, name: str) -> np.ndarray:
        i = METRIC_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRIC_COLUMNS)
            for r in self.rows:
                w.writerow([int(r[0])] + [repr(float(v)) for v in r[1:]])


def save_checkpoint(path, spec: GaussianWganSpec, point: WganPoint, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"spec": spec.to_dict(), "point": point.to_dict(), "meta": meta or {}}, fh, indent=2)


def load_checkpoint(path) -> tuple[GaussianWganSpec, WganPoint]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    s = raw["spec"]
    spec = GaussianWganSpec(tuple(s["sigma_diag"]), s["p"], s["k"], s["eps"])
    pt = raw["point"]
    return spec, WganPoint(np.array(pt["a_x"]), np.array(pt["w"]), np.array(pt["v"]))


def train(
    spec: GaussianWganSpec,
    start: WganPoint,
    cfg: SolverConfig,
    *,
    batch_size: int = 256,
    eval_every: int = 1000,
    eval_batch: int = 4096,
    emd_samples: int = 512,
    check_invariants: bool = True,
) -> WganHistory:
    """Stochastic simultaneous training with periodic metric evaluation.

    Step ``t`` uses minibatch ``draw_rng(seed, 2t)`` (and ``2t + 1`` for
    the detached vectors of SGA modes). Every ``eval_every`` steps, and at
    the end, one row ``(t, f_hat, angle, cov_err, emd)`` is recorded:
    ``f_hat`` on a fresh evaluation batch of ``eval_batch`` samples, the
    population angle (:func:`population_angle`), and ``emd`` between
    ``emd_samples`` data and generated samples.
    Evaluation draws come from a separate stream and never perturb the
    training batches.
    """
    game = WganGame(spec, batch_size)
    p = start.to_game_point()
    game.check_point(p, 1e-8)
    hist = WganHistory()

    def evaluate(t, gp):
        pt = WganPoint.from_game_point(spec, gp)
        rng = draw_rng(cfg.seed, t, _EVAL_STREAM)
        data, z = spec.sample_data(rng, eval_batch), spec.sample_latent(rng, eval_batch)
        f_hat = minibatch_value_and_grads(spec, pt, data, z)[0]
        try:
            ang = population_angle(spec, pt)
        except ContractError:
            ang = float("nan")
        m = min(emd_samples, eval_batch)
        e = emd(data[:m], z[:m] @ pt.a_x.T)
        hist.rows.append((t, f_hat, ang, covariance_error(spec, pt.a_x), e))

    for t in range(cfg.max_iters):
        if eval_every and t % eval_every == 0:
            evaluate(t, p)
        batch = game.sample(draw_rng(cfg.seed, 2 * t))
        detached = game.sample(draw_rng(cfg.seed, 2 * t + 1)) if cfg.mode != "gda" else None
        f = game.value(p, batch)
        if not (math.isfinite(f) and abs(f) <= F_BOUND):
            hist.diverged = True
            break
        p = step(game, p, cfg, batch, detached)
        if check_invariants:
            hist.max_constraint_residual = max(hist.max_constraint_residual, game.m2.point_residual(p.y))
    if not hist.diverged and eval_every:
        evaluate(cfg.max_iters, p)
    hist.final = WganPoint.from_game_point(spec, p)
    return hist


def init_pretrain(
    spec: GaussianWganSpec,
    seed: int,
    iters: int,
    tau: float = 100.0,
    gamma: float = 2e-4,
    *,
    batch_size: int = 1000,
) -> WganPoint:
    """Random initialization followed by ``iters`` steps of stochastic tau-GDA.

    Raises
    ------
    WganDivergenceError
        If the minibatch value leaves ``[-1e6, 1e6]``.
    """
    start = random_init(spec, seed)
    if iters == 0:
        return start
    cfg = SolverConfig("gda", tau, gamma, 0.0, iters, seed)
    hist = train(spec, start, cfg, batch_size=batch_size, eval_every=0, check_invariants=False)
    if hist.diverged:
        raise WganDivergenceError("pretraining diverged: f left [-1e6, 1e6]")
    return hist.final


def sign_changes(values: Sequence[float]) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
