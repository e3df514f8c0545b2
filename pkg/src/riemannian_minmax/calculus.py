"""First- and second-order Riemannian derivatives of game values.

Under the embedded metric the Riemannian gradient is the tangent projection
of the ambient gradient. Cross-gradient products are either supplied
analytically by the game or computed by central differences along
retraction curves. The intrinsic blocks ``(A, B, C)`` are matrix
representations of ``-Hess_y f``, ``grad^2_{yx} f`` and ``Hess_x f`` in
orthonormal tangent bases, only defined at critical points.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

from .games import Game, GamePoint
from .linalg import ContractError

__all__ = [
    "RiemannianGrads",
    "IntrinsicBlocks",
    "NotCriticalError",
    "riemannian_grads",
    "grad_norms",
    "cross_grad_apply_y",
    "cross_grad_apply_x",
    "intrinsic_blocks",
]

FD_STEP = 1e-5
CRIT_TOL = 1e-6


class NotCriticalError(ContractError):
    pass


class RiemannianGrads(NamedTuple):
    delta: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class IntrinsicBlocks:
    """``a`` (d2, d2), ``b`` (d1, d2), ``c`` (d1, d1) plus the bases used.

    ``asym_a`` and ``asym_c`` record the largest entrywise asymmetry of the
    finite-difference blocks before symmetrization.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis_x: np.ndarray | None = None
    basis_y: np.ndarray | None = None
    asym_a: float = 0.0
    asym_c: float = 0.0

    def __post_init__(self):
        a, b, c = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.a, self.b, self.c))
        if a.shape[0] != a.shape[1] or c.shape[0] != c.shape[1]:
            raise ContractError("A and C blocks must be square")
        if b.shape != (c.shape[0], a.shape[0]):
            raise ContractError(f"B block must be {(c.shape[0], a.shape[0])}, got {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def d1(self) -> int:
        return self.c.shape[0]

    @property
    def d2(self) -> int:
        return self.a.shape[0]

    def scaled(self, s: float) -> "IntrinsicBlocks":
        return IntrinsicBlocks(s * self.a, s * self.b, s * self.c)


def riemannian_grads(game: Game, p: GamePoint, batch: Any = None) -> RiemannianGrads:
    gx, gy = game.ambient_grads(p, batch)
    return RiemannianGrads(game.m1.project(p.x, gx), game.m2.project(p.y, gy))


def grad_norms(game: Game, p: GamePoint, batch: Any = None) -> tuple[float, float]:
    d, e = riemannian_grads(game, p, batch)
    return float(np.linalg.norm(d)), float(np.linalg.norm(e))


def _fd_step(v: np.ndarray, fd_step: float, scale: float) -> float:
    return fd_step * scale / (1.0 + float(np.linalg.norm(v)))


def cross_grad_apply_y(
    game: Game,
    p: GamePoint,
    eta: np.ndarray,
    *,
    method: str = "auto",
    batch: Any = None,
    fd_step: float = FD_STEP,
    scale: float = 1.0,
) -> np.ndarray:
    """``B~[eta]``: derivative of ``grad_x f`` as ``y`` moves along ``eta``.

    Parameters
    ----------
    game, p
        Game and base point.
    eta : ndarray
        Tangent vector at ``p.y``; treated as a constant.
    method : {"auto", "analytic", "fd"}
        ``auto`` uses the game's closed form when it has one.
    batch
        Minibatch for stochastic games; the same batch is used at every
        finite-difference probe.

    Returns
    -------
    ndarray
        Tangent vector at ``p.x``.
    """
    eta = np.asarray(eta, dtype=float)
    if method not in ("auto", "analytic", "fd"):
        raise ContractError(f"unknown method {method!r}")
    if method != "fd":
        out = game.cross_y(p, eta, batch)
        if out is not None:
            return game.m1.project(p.x, out)
        if method == "analytic":
            raise ContractError(f"{type(game).__name__} has no analytic cross_y")
    if not np.any(eta):
        return np.zeros(game.m1.ambient_dim)
    h = _fd_step(eta, fd_step, scale)
    yp = game.m2.retract(p.y, h * eta)
    ym = game.m2.retract(p.y, -h * eta)
    dp = riemannian_grads(game, GamePoint(p.x, yp), batch).delta
    dm = riemannian_grads(game, GamePoint(p.x, ym), batch).delta
    return game.m1.project(p.x, (dp - dm) / (2.0 * h))


def cross_grad_apply_x(
    game: Game,
    p: GamePoint,
    delta: np.ndarray,
    *,
    method: str = "auto",
    batch: Any = None,
    fd_step: float = FD_STEP,
    scale: float = 1.0,
) -> np.ndarray:
    """``B~^T[delta]``: derivative of ``grad_y f`` as ``x`` moves along ``delta``."""
    delta = np.asarray(delta, dtype=float)
    if method not in ("auto", "analytic", "fd"):
        raise ContractError(f"unknown method {method!r}")
    if method != "fd":
        out = game.cross_x(p, delta, batch)
        if out is not None:
            return game.m2.project(p.y, out)
        if method == "analytic":
            raise ContractError(f"{type(game).__name__} has no analytic cross_x")
    if not np.any(delta):
        return np.zeros(game.m2.ambient_dim)
    h = _fd_step(delta, fd_step, scale)
    xp = game.m1.retract(p.x, h * delta)
    xm = game.m1.retract(p.x, -h * delta)
    ep = riemannian_grads(game, GamePoint(xp, p.y), batch).eta
    em = riemannian_grads(game, GamePoint(xm, p.y), batch).eta
    return game.m2.project(p.y, (ep - em) / (2.0 * h))


def _hessian_block(manifold, point, basis, field, h):
    """Matrix of ``v -> P(D field [v])`` in ``basis``, with its pre-symmetrization asymmetry."""
    n = basis.shape[1]
    h_mat = np.empty((n, n))
    for j in range(n):
        e = basis[:, j]
        gp = field(manifold.retract(point, h * e))
        gm = field(manifold.retract(point, -h * e))
        h_mat[:, j] = basis.T @ ((gp - gm) / (2.0 * h))
    asym = float(np.max(np.abs(h_mat - h_mat.T))) if n else 0.0
    return 0.5 * (h_mat + h_mat.T), asym


def intrinsic_blocks(
    game: Game,
    p: GamePoint,
    crit_tol: float = CRIT_TOL,
    *,
    fd_step: float = FD_STEP,
    order_x=None,
    order_y=None,
    cross_method: str = "auto",
) -> IntrinsicBlocks:
    """Intrinsic blocks ``(A, B, C)`` at a critical point.

    ``order_x`` / ``order_y`` change the ordering of ambient canonical
    vectors fed to Gram-Schmidt, which changes the bases but not the
    spectra of the blocks.

    Raises
    ------
    NotCriticalError
        If either Riemannian gradient norm is ``>= crit_tol``.
    """
    if game.stochastic:
        raise ContractError("intrinsic blocks need a deterministic game")
    gnx, gny = grad_norms(game, p)
    if max(gnx, gny) >= crit_tol:
        raise NotCriticalError(
            f"intrinsic blocks undefined away from critical point "
            f"(|grad_x| = {gnx:.3e}, |grad_y| = {gny:.3e})"
        )
    ex = game.m1.tangent_basis(p.x, order_x)
    ey = game.m2.tangent_basis(p.y, order_y)
    c, asym_c = _hessian_block(
        game.m1, p.x, ex, lambda x: riemannian_grads(game, GamePoint(x, p.y)).delta, fd_step
    )
    hy, asym_a = _hessian_block(
        game.m2, p.y, ey, lambda y: riemannian_grads(game, GamePoint(p.x, y)).eta, fd_step
    )
    b = np.empty((ex.shape[1], ey.shape[1]))
    for j in range(ey.shape[1]):
        b[:, j] = ex.T @ cross_grad_apply_y(game, p, ey[:, j], method=cross_method, fd_step=fd_step)
    return IntrinsicBlocks(-hy, b, c, ex, ey, asym_a, asym_c)
