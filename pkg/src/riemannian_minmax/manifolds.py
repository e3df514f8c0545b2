"""Embedded Riemannian manifolds with the induced (Euclidean) metric.

Points and tangent vectors are flat float arrays in ambient coordinates.
Matrix-valued manifolds (Stiefel) store an ``n x k`` matrix flattened in
row-major order. Because every manifold here carries the embedded metric,
the Riemannian gradient of a function is the tangent projection of its
ambient gradient.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

__all__ = [
    "ManifoldError",
    "Manifold",
    "Euclidean",
    "Sphere",
    "Stiefel",
    "Product",
    "polar_factor",
]

BASIS_DROP_TOL = 1e-8


class ManifoldError(ValueError):
    """Invalid geometric input: wrong shape, off-manifold point, degenerate retraction."""


def polar_factor(m: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Closest matrix with orthonormal columns, ``U V^T`` from the thin SVD."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size and s[-1] <= rank_tol * max(1.0, s[0]):
        raise ManifoldError("polar factor undefined for a rank-deficient matrix")
    return u @ vt


class Manifold(ABC):
    """Base class. ``dim`` is the intrinsic dimension, ``ambient_dim`` the embedding size."""

    dim: int
    ambient_dim: int

    def _check_shape(self, v, what="vector") -> np.ndarray:
        a = np.asarray(v, dtype=float)
        if a.shape != (self.ambient_dim,):
            raise ManifoldError(
                f"{what} has shape {a.shape}, expected ({self.ambient_dim},) for {self!r}"
            )
        return a

    @abstractmethod
    def project(self, x, v) -> np.ndarray:
        """Orthogonal projection of an ambient vector onto the tangent space at ``x``."""

    @abstractmethod
    def retract(self, x, t) -> np.ndarray:
        """Map a tangent vector at ``x`` back to the manifold."""

    @abstractmethod
    def dist(self, x, y) -> float:
        """Cheap surrogate for the geodesic distance."""

    @abstractmethod
    def point_residual(self, x) -> float:
        """How far ``x`` is from satisfying the manifold constraint."""

    @abstractmethod
    def tangent_residual(self, x, v) -> float:
        """How far ``v`` is from the tangent space at ``x``."""

    @abstractmethod
    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        ...

    def inner(self, x, u, v) -> float:
        u = self._check_shape(u, "u")
        v = self._check_shape(v, "v")
        return float(u @ v)

    def norm(self, x, v) -> float:
        return float(np.linalg.norm(v))

    def zero_vector(self, x) -> np.ndarray:
        return np.zeros(self.ambient_dim)

    def random_tangent(self, x, rng: np.random.Generator) -> np.ndarray:
        return self.project(x, rng.standard_normal(self.ambient_dim))

    def is_point(self, x, atol: float = 1e-8) -> bool:
        return self.point_residual(x) <= atol

    def is_tangent(self, x, v, atol: float = 1e-8) -> bool:
        return self.tangent_residual(x, v) <= atol

    def tangent_basis(self, x, order: Sequence[int] | None = None) -> np.ndarray:
        """Orthonormal basis of the tangent space at ``x`` as matrix columns.

        Ambient canonical vectors are projected and orthogonalized in the
        given ``order`` (default: natural index order); vectors whose
        residual falls below ``1e-8`` are dropped. Deterministic given
        ``x`` and ``order``.
        """
        x = self._check_shape(x, "point")
        idx = range(self.ambient_dim) if order is None else list(order)
        cols: list[np.ndarray] = []
        for i in idx:
            if len(cols) == self.dim:
                break
            e = np.zeros(self.ambient_dim)
            e[i] = 1.0
            w = self.project(x, e)
            # two passes of classical Gram-Schmidt
            for _ in range(2):
                for q in cols:
                    w = w - (q @ w) * q
            nrm = np.linalg.norm(w)
            if nrm < BASIS_DROP_TOL:
                continue
            cols.append(w / nrm)
        if len(cols) != self.dim:
            raise ManifoldError(
                f"tangent basis has {len(cols)} columns, expected {self.dim}"
            )
        if not cols:
            return np.zeros((self.ambient_dim, 0))
        return np.column_stack(cols)


class Euclidean(Manifold):
    def __init__(self, n: int):
        if n <= 0:
            raise ManifoldError("Euclidean dimension must be positive")
        self.n = self.dim = self.ambient_dim = int(n)

    def __repr__(self):
        return f"Euclidean({self.n})"

    def __eq__(self, other):
        return isinstance(other, Euclidean) and other.n == self.n

    def __hash__(self):
        return hash(("Euclidean", self.n))

    def project(self, x, v):
        return self._check_shape(v).copy()

    def retract(self, x, t):
        return self._check_shape(x, "point") + self._check_shape(t, "tangent")

    def dist(self, x, y):
        return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))

    def point_residual(self, x):
        self._check_shape(x, "point")
        return 0.0

    def tangent_residual(self, x, v):
        self._check_shape(v)
        return 0.0

    def random_point(self, rng):
        return rng.standard_normal(self.n)

    def tangent_basis(self, x, order=None):
        self._check_shape(x, "point")
        eye = np.eye(self.n)
        return eye if order is None else eye[:, list(order)]


class Sphere(Manifold):
    """Unit sphere in ``R^ambient_dim`` (intrinsic dimension ``ambient_dim - 1``)."""

    def __init__(self, ambient_dim: int):
        if ambient_dim < 2:
            raise ManifoldError("sphere needs ambient dimension >= 2")
        self.ambient_dim = int(ambient_dim)
        self.dim = self.ambient_dim - 1

    def __repr__(self):
        return f"Sphere({self.ambient_dim})"

    def __eq__(self, other):
        return isinstance(other, Sphere) and other.ambient_dim == self.ambient_dim

    def __hash__(self):
        return hash(("Sphere", self.ambient_dim))

    def project(self, x, v):
        x = self._check_shape(x, "point")
        v = self._check_shape(v)
        return v - (x @ v) * x

    def retract(self, x, t):
        x = self._check_shape(x, "point")
        t = self._check_shape(t, "tangent")
        if not np.any(t):
            return x.copy()
        z = x + t
        nrm = np.linalg.norm(z)
        if nrm < 1e-12:
            raise ManifoldError("sphere retraction is undefined at the antipode")
        return z / nrm

    def dist(self, x, y):
        """Great-circle angle ``arccos<x, y>``, evaluated as ``2 arcsin(|x - y| / 2)``.

        The two agree for unit vectors; the chord form keeps full relative
        accuracy for nearby points, where ``arccos`` loses half the digits.
        """
        x = self._check_shape(x, "point")
        y = self._check_shape(y, "point")
        return float(2.0 * np.arcsin(min(1.0, 0.5 * float(np.linalg.norm(x - y)))))

    def point_residual(self, x):
        return abs(float(np.linalg.norm(self._check_shape(x, "point"))) - 1.0)

    def tangent_residual(self, x, v):
        return abs(float(self._check_shape(x, "point") @ self._check_shape(v)))

    def random_point(self, rng):
        z = rng.standard_normal(self.ambient_dim)
        return z / np.linalg.norm(z)


class Stiefel(Manifold):
    """Matrices ``X`` of shape ``(n, k)`` with ``X^T X = I_k``, stored flat (row-major)."""

    def __init__(self, k: int, n: int):
        if k <= 0 or n <= 0 or k > n:
            raise ManifoldError(f"Stiefel needs 0 < k <= n, got k={k}, n={n}")
        self.k, self.n = int(k), int(n)
        self.ambient_dim = self.n * self.k
        self.dim = self.n * self.k - self.k * (self.k + 1) // 2

    def __repr__(self):
        return f"Stiefel({self.k}, {self.n})"

    def __eq__(self, other):
        return isinstance(other, Stiefel) and (other.k, other.n) == (self.k, self.n)

    def __hash__(self):
        return hash(("Stiefel", self.k, self.n))

    def as_matrix(self, v) -> np.ndarray:
        return self._check_shape(v).reshape(self.n, self.k)

    def project(self, x, v):
        X = self.as_matrix(x)
        V = self.as_matrix(v)
        s = X.T @ V
        return (V - X @ (0.5 * (s + s.T))).ravel()

    def retract(self, x, t):
        X = self.as_matrix(x)
        T = self.as_matrix(t)
        if not np.any(T):
            return X.ravel().copy()
        return polar_factor(X + T).ravel()

    def dist(self, x, y):
        return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))

    def point_residual(self, x):
        X = self.as_matrix(x)
        return float(np.max(np.abs(X.T @ X - np.eye(self.k))))

    def tangent_residual(self, x, v):
        X = self.as_matrix(x)
        s = X.T @ self.as_matrix(v)
        return float(np.max(np.abs(s + s.T)))

    def random_point(self, rng):
        return polar_factor(rng.standard_normal((self.n, self.k))).ravel()


class Product(Manifold):
    """Cartesian product; vectors are the concatenation of factor vectors."""

    def __init__(self, factors: Sequence[Manifold]):
        factors = tuple(factors)
        if not factors:
            raise ManifoldError("Product needs at least one factor")
        self.factors = factors
        sizes = [f.ambient_dim for f in factors]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.ambient_dim = int(self._offsets[-1])
        self.dim = sum(f.dim for f in factors)

    def __repr__(self):
        return "Product([" + ", ".join(map(repr, self.factors)) + "])"

    def __eq__(self, other):
        return isinstance(other, Product) and other.factors == self.factors

    def __hash__(self):
        return hash(("Product",) + self.factors)

    def split(self, v) -> list[np.ndarray]:
        v = self._check_shape(v)
        o = self._offsets
        return [v[o[i]:o[i + 1]] for i in range(len(self.factors))]

    def join(self, parts) -> np.ndarray:
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    def _map(self, fn, *vecs):
        pieces = zip(*(self.split(v) for v in vecs))
        return self.join([fn(f, *p) for f, p in zip(self.factors, pieces)])

    def project(self, x, v):
        return self._map(lambda f, a, b: f.project(a, b), x, v)

    def retract(self, x, t):
        return self._map(lambda f, a, b: f.retract(a, b), x, t)

    def dist(self, x, y):
        return float(sum(f.dist(a, b) for f, a, b in zip(self.factors, self.split(x), self.split(y))))

    def point_residual(self, x):
        return max(f.point_residual(a) for f, a in zip(self.factors, self.split(x)))

    def tangent_residual(self, x, v):
        return max(
            f.tangent_residual(a, b)
            for f, a, b in zip(self.factors, self.split(x), self.split(v))
        )

    def random_point(self, rng):
        return self.join([f.random_point(rng) for f in self.factors])

    def tangent_basis(self, x, order=None):
        """Block-diagonal basis; ``order``, if given, is a list of per-factor orders."""
        parts = self.split(x)
        orders = [None] * len(self.factors) if order is None else list(order)
        out = np.zeros((self.ambient_dim, self.dim))
        col = 0
        for i, (f, a) in enumerate(zip(self.factors, parts)):
            b = f.tangent_basis(a, orders[i])
            o = self._offsets
            out[o[i]:o[i + 1], col:col + f.dim] = b
            col += f.dim
        return out
