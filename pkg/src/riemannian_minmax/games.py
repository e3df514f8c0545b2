"""Zero-sum games ``min_x max_y f(x, y)`` on embedded manifolds.

Games expose values and gradients in ambient coordinates; Riemannian
gradients are obtained by :mod:`riemannian_minmax.calculus`. A game may be
stochastic, in which case ``sample(rng)`` draws a minibatch and every
evaluation method takes that batch as an optional argument.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np

from .linalg import ContractError, ConvergenceError, pseudo_inverse, svd
from .manifolds import Euclidean, Manifold, Sphere

__all__ = [
    "GamePoint",
    "Game",
    "FunctionGame",
    "LinearSphereGame",
    "VARIANTS",
    "NoEquilibriumError",
    "equilibrium_example1",
    "equilibrium_example2",
    "equilibrium_example3",
    "closed_form_equilibrium",
    "fig1_game",
]

VARIANTS = ("example1", "example2", "example3")
RESIDUAL_TOL = 1e-8
SIGMA_MIN_TOL = 1e-10


class NoEquilibriumError(ValueError):
    """The requested closed-form equilibrium does not exist for these data."""


class GamePoint(NamedTuple):
    x: np.ndarray
    y: np.ndarray


class Game:
    """Interface for a game on ``m1 x m2``.

    Subclasses implement ``value`` and ``ambient_grads``. ``cross_y`` and
    ``cross_x`` may return analytic cross-gradient products (already
    projected onto the relevant tangent space) or ``None`` to request the
    finite-difference path.
    """

    m1: Manifold
    m2: Manifold
    stochastic: bool = False

    def value(self, p: GamePoint, batch: Any = None) -> float:
        raise NotImplementedError

    def ambient_grads(self, p: GamePoint, batch: Any = None) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def cross_y(self, p: GamePoint, eta: np.ndarray, batch: Any = None) -> np.ndarray | None:
        return None

    def cross_x(self, p: GamePoint, delta: np.ndarray, batch: Any = None) -> np.ndarray | None:
        return None

    def sample(self, rng: np.random.Generator) -> Any:
        raise ContractError(f"{type(self).__name__} is deterministic and has no sampler")

    def check_point(self, p: GamePoint, atol: float = 1e-8) -> None:
        if not self.m1.is_point(p.x, atol):
            raise ContractError(f"x is not a point of {self.m1!r}")
        if not self.m2.is_point(p.y, atol):
            raise ContractError(f"y is not a point of {self.m2!r}")


@dataclass(frozen=True)
class FunctionGame(Game):
    """Deterministic game assembled from plain callables ``f(x, y)`` and ``grad(x, y)``."""

    m1: Manifold
    m2: Manifold
    f: Callable[[np.ndarray, np.ndarray], float]
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

    def value(self, p, batch=None):
        return float(self.f(p.x, p.y))

    def ambient_grads(self, p, batch=None):
        gx, gy = self.grad(p.x, p.y)
        return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)


@dataclass(frozen=True, eq=False)
class LinearSphereGame(Game):
    """The linear/quadratic games on ``R^d1 x S^d2``.

    ``example1``: ``f = <y, Ax - b>``;
    ``example2``: ``f = <y, Ax - b> - kappa/2 ||Ax||^2``;
    ``example3``: ``f = 1/2 ||Ax + y - b||^2``.
    ``a`` has shape ``(d2 + 1, d1)`` and ``b`` shape ``(d2 + 1,)``.
    """

    a: np.ndarray
    b: np.ndarray
    kappa: float = 0.0
    variant: str = "example1"
    m1: Manifold = field(init=False, repr=False)
    m2: Manifold = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        b = np.array(self.b, dtype=float).ravel()
        if a.ndim != 2 or a.shape[0] != b.size:
            raise ContractError(f"a must be (len(b), d1); got a {a.shape}, b {b.shape}")
        if a.shape[0] < 2:
            raise ContractError("sphere factor needs ambient dimension >= 2")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ContractError("a and b must be finite")
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.kappa < 0 or not np.isfinite(self.kappa):
            raise ContractError("kappa must be finite and >= 0")
        if self.variant != "example2" and self.kappa != 0.0:
            raise ContractError("kappa is only meaningful for example2")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "m1", Euclidean(a.shape[1]))
        object.__setattr__(self, "m2", Sphere(a.shape[0]))

    @property
    def d1(self) -> int:
        return self.a.shape[1]

    @property
    def d2(self) -> int:
        return self.a.shape[0] - 1

    def value(self, p, batch=None):
        x, y = p
        r = self.a @ x - self.b
        if self.variant == "example3":
            return 0.5 * float(np.sum((r + y) ** 2))
        f = float(y @ r)
        if self.kappa:
            f -= 0.5 * self.kappa * float(np.sum((self.a @ x) ** 2))
        return f

    def ambient_grads(self, p, batch=None):
        x, y = p
        ax = self.a @ x
        r = ax - self.b
        if self.variant == "example3":
            s = r + y
            return self.a.T @ s, s
        gx = self.a.T @ y
        if self.kappa:
            gx = gx - self.kappa * (self.a.T @ ax)
        return gx, r

    # All three variants share the same mixed second derivative.
    def cross_y(self, p, eta, batch=None):
        return self.a.T @ np.asarray(eta, dtype=float)

    def cross_x(self, p, delta, batch=None):
        w = self.a @ np.asarray(delta, dtype=float)
        return w - (p.y @ w) * p.y

    def check_dse_assumptions(self) -> None:
        """Raise unless ``Ker(A) = {0}`` and ``b`` lies outside ``Range(A)``."""
        sigma = svd(self.a).sigma
        if sigma[-1] <= SIGMA_MIN_TOL:
            raise NoEquilibriumError(f"A has a nontrivial kernel (sigma_min = {sigma[-1]:.3e})")
        resid = self.b - self.a @ (pseudo_inverse(self.a) @ self.b)
        if np.linalg.norm(resid) <= RESIDUAL_TOL:
            raise NoEquilibriumError("no DSE: residual vanishes (b lies in the range of A)")


def _normalized_residual(game: LinearSphereGame, x: np.ndarray) -> np.ndarray:
    r = game.a @ x - game.b
    n = np.linalg.norm(r)
    if n <= RESIDUAL_TOL:
        raise NoEquilibriumError("no DSE: residual vanishes (b lies in the range of A)")
    return r / n


def _require_variant(game, variant):
    if not isinstance(game, LinearSphereGame) or game.variant != variant:
        raise ContractError(f"expected a LinearSphereGame with variant {variant!r}")


def equilibrium_example1(game: LinearSphereGame) -> GamePoint:
    """``x* = A^+ b`` and ``y* = (Ax* - b)/||Ax* - b||``."""
    _require_variant(game, "example1")
    game.check_dse_assumptions()
    x = pseudo_inverse(game.a) @ game.b
    return GamePoint(x, _normalized_residual(game, x))


def equilibrium_example3(game: LinearSphereGame) -> GamePoint:
    """Same closed form as the bilinear game; here the point is a Nash equilibrium."""
    _require_variant(game, "example3")
    game.check_dse_assumptions()
    x = pseudo_inverse(game.a) @ game.b
    return GamePoint(x, _normalized_residual(game, x))


def equilibrium_example2(
    game: LinearSphereGame, newton_tol: float = 1e-14, max_iter: int = 100
) -> GamePoint:
    """Stackelberg equilibrium of the regularized game, ``x* = c A^+ b``.

    The scale ``c`` solves ``F(c) = c (1 - kappa ||c A A^+ b - b||) - 1 = 0``
    by Newton's method from ``c = 1``.

    Parameters
    ----------
    game : LinearSphereGame
        Must have ``variant == "example2"``.
    newton_tol : float
        Stop once ``|F(c)| < newton_tol``.
    max_iter : int
        Iteration cap. Failing to converge, or landing at ``|c - 1| > 0.5``,
        is read as ``kappa`` lying outside the equilibrium regime.

    Raises
    ------
    NoEquilibriumError
        When the residual vanishes or ``A`` has a kernel.
    ConvergenceError
        When Newton fails (``kappa`` outside the DSE regime).
    """
    _require_variant(game, "example2")
    game.check_dse_assumptions()
    xp = pseudo_inverse(game.a) @ game.b
    u = game.a @ xp
    b, kappa = game.b, game.kappa

    def F(c):
        r = c * u - b
        nr = np.linalg.norm(r)
        return c * (1.0 - kappa * nr) - 1.0, (1.0 - kappa * nr) - c * kappa * (u @ r) / nr

    c = 1.0
    for _ in range(max_iter):
        fc, dfc = F(c)
        if abs(fc) < newton_tol:
            break
        if dfc == 0.0 or not np.isfinite(dfc):
            raise ConvergenceError("kappa outside DSE regime: Newton derivative degenerate")
        c -= fc / dfc
        if not np.isfinite(c):
            raise ConvergenceError("kappa outside DSE regime: Newton diverged")
    else:
        if abs(F(c)[0]) >= newton_tol:
            raise ConvergenceError("kappa outside DSE regime: Newton did not converge")
    if abs(c - 1.0) > 0.5:
        raise ConvergenceError(f"kappa outside DSE regime: root c = {c:.6g} far from 1")
    x = c * xp
    return GamePoint(x, _normalized_residual(game, x))


def closed_form_equilibrium(game: LinearSphereGame) -> GamePoint:
    return {
        "example1": equilibrium_example1,
        "example2": equilibrium_example2,
        "example3": equilibrium_example3,
    }[game.variant](game)


def fig1_game(variant: str = "example2", kappa: float = 0.1) -> LinearSphereGame:
    """The 1-D instance ``A = [1; 1; 1]``, ``b = (1, 1, 0.99)``."""
    a = np.ones((3, 1))
    b = np.array([1.0, 1.0, 0.99])
    return LinearSphereGame(a, b, kappa if variant == "example2" else 0.0, variant)
