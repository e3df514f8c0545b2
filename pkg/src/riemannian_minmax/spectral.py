"""Linearized dynamics, step-size bounds, convergence certificates and equilibrium classes.

At a critical point with intrinsic blocks ``(A, B, C)`` the Jacobian of
simultaneous tau-GDA is ``I + gamma * M_g`` with

    M_g = [[-C, -B], [tau B^T, -tau A]]

and the asymptotic tau-SGA Jacobian is ``I + gamma * M_s`` with
``M_s = M_g + theta [[-B B^T, B A], [0, 0]]``.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .calculus import IntrinsicBlocks, grad_norms, intrinsic_blocks
from .games import Game, GamePoint
from .linalg import (
    ContractError,
    eigenvalues_general,
    lambda_max,
    lambda_min,
    operator_norm,
)

__all__ = [
    "NoStepSizeError",
    "SpectralReport",
    "ConvergenceCertificate",
    "EquilibriumClass",
    "Classification",
    "assemble_mg",
    "assemble_ms",
    "gamma_dot",
    "spectral_report",
    "rho_step",
    "gda_certificate",
    "dne_certificate",
    "sga_certificate",
    "classify_equilibrium",
    "tau_scan",
    "random_dse_blocks",
]

HURWITZ_TOL = 1e-12
PD_TOL = 1e-8
GRAD_TOL = 1e-6
A_PD_TOL = 1e-10


class NoStepSizeError(ValueError):
    """``M`` is not Hurwitz-stable, so no step size contracts ``I + gamma M``."""


def assemble_mg(blocks: IntrinsicBlocks, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ContractError("tau must be positive")
    a, b, c = blocks.a, blocks.b, blocks.c
    return np.block([[-c, -b], [tau * b.T, -tau * a]])


def assemble_ms(blocks: IntrinsicBlocks, tau: float, theta: float) -> np.ndarray:
    if theta < 0:
        raise ContractError("theta must be >= 0")
    m = assemble_mg(blocks, tau)
    if theta:
        d1 = blocks.d1
        m[:d1, :d1] -= theta * (blocks.b @ blocks.b.T)
        m[:d1, d1:] += theta * (blocks.b @ blocks.a)
    return m


def gamma_dot(m) -> float:
    """Largest ``gamma`` with ``rho(I + gamma M) < 1`` guaranteed: ``-2 max Re(l)/|l|^2``."""
    lam = eigenvalues_general(m)
    if lam.size == 0 or np.max(lam.real) >= -HURWITZ_TOL:
        raise NoStepSizeError("no valid step size: matrix is not Hurwitz-stable")
    return float(np.min(-2.0 * lam.real / np.abs(lam) ** 2))


def rho_step(m, gamma: float) -> float:
    """Spectral radius of ``I + gamma M`` computed from the eigenvalues of ``M``."""
    lam = eigenvalues_general(m)
    return float(np.max(np.abs(1.0 + gamma * lam)))


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    hurwitz: bool
    gamma_dot: float | None = None
    rho_at_gamma: float | None = None

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "hurwitz": bool(self.hurwitz),
            "gamma_dot": self.gamma_dot,
            "rho_at_gamma": self.rho_at_gamma,
        }


def spectral_report(m, gamma: float | None = None) -> SpectralReport:
    lam = eigenvalues_general(m)
    hurwitz = bool(lam.size and np.max(lam.real) < -HURWITZ_TOL)
    gd = float(np.min(-2.0 * lam.real / np.abs(lam) ** 2)) if hurwitz else None
    rho = float(np.max(np.abs(1.0 + gamma * lam))) if gamma is not None else None
    return SpectralReport(lam, hurwitz, gd, rho)


@dataclass
class ConvergenceCertificate:
    """Ratio threshold, constants and recommended ``(tau, gamma)`` with a rate bound.

    ``valid`` is False when the Schur-complement constant is not positive
    (the point is not a Stackelberg equilibrium); the recommendations and
    ``rate_bound`` are then ``None``.
    """

    kind: str
    tau_threshold: float
    l_const: float
    mu_const: float
    recommended_tau: float | None
    recommended_gamma: float | None
    rate_bound: float | None
    valid: bool = True
    theta: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _lambda_min_a(blocks):
    lam = lambda_min(blocks.a)
    if lam <= A_PD_TOL:
        raise ContractError(f"A block is not positive definite (lambda_min = {lam:.3e})")
    return lam


def _schur_min(blocks):
    return lambda_min(blocks.c + blocks.b @ np.linalg.solve(blocks.a, blocks.b.T))


def _two_timescale_certificate(kind, blocks, threshold, l_const, lam_a, theta=None):
    mu = min(l_const, _schur_min(blocks))
    if mu <= 0:
        return ConvergenceCertificate(
            kind, threshold, l_const, mu, None, None, None, False, theta,
            ["not DSE: lambda_min(C + B A^-1 B^T) <= 0"],
        )
    tau = 2.0 * l_const / lam_a
    gamma = 1.0 / (4.0 * tau * l_const)
    rate = 1.0 - mu / (16.0 * tau * l_const)
    return ConvergenceCertificate(kind, threshold, l_const, mu, tau, gamma, rate, True, theta)


def gda_certificate(blocks: IntrinsicBlocks) -> ConvergenceCertificate:
    """Certificate for tau-GDA at a Stackelberg equilibrium.

    ``tau_threshold = ||C|| / lambda_min(A)``;
    ``L_g = max(||A||, ||B||, ||C||)``;
    ``mu_g = min(L_g, lambda_min(C + B A^-1 B^T))``;
    recommended ``tau = 2 L_g / lambda_min(A)``, ``gamma = 1/(4 tau L_g)``,
    with rate at most ``1 - mu_g / (16 tau L_g)``.
    """
    lam_a = _lambda_min_a(blocks)
    norm_c = operator_norm(blocks.c)
    l_g = max(operator_norm(blocks.a), operator_norm(blocks.b), norm_c)
    return _two_timescale_certificate("gda", blocks, norm_c / lam_a, l_g, lam_a)


def dne_certificate(blocks: IntrinsicBlocks) -> ConvergenceCertificate:
    """Single-timescale certificate at a Nash equilibrium (``tau = 1``)."""
    lam_a = _lambda_min_a(blocks)
    lam_c = lambda_min(blocks.c)
    if lam_c <= A_PD_TOL:
        raise ContractError(f"not a DNE: C block is not positive definite (lambda_min = {lam_c:.3e})")
    l_g = max(operator_norm(blocks.a), operator_norm(blocks.b), operator_norm(blocks.c))
    mu = min(lam_a, lam_c)
    return ConvergenceCertificate(
        "dne", 0.0, l_g, mu, 1.0, mu / (2.0 * l_g**2), 1.0 - mu**2 / (4.0 * l_g**2)
    )


def sga_certificate(blocks: IntrinsicBlocks, theta: float) -> ConvergenceCertificate:
    """Certificate for asymptotic tau-SGA; requires ``0 <= theta <= 1/lambda_max(A)``."""
    lam_a = _lambda_min_a(blocks)
    lam_max = lambda_max(blocks.a)
    if not (0.0 <= theta <= 1.0 / lam_max):
        raise ContractError(f"theta must lie in [0, 1/lambda_max(A)] = [0, {1.0 / lam_max:.6g}]")
    norm_c = operator_norm(blocks.c)
    c_adj = blocks.c + theta * (blocks.b @ blocks.b.T)
    norm_cs = operator_norm(c_adj)
    l_s = max(operator_norm(blocks.a), operator_norm(blocks.b), norm_cs)
    return _two_timescale_certificate(
        "sga", blocks, min(norm_c, norm_cs) / lam_a, l_s, lam_a, theta=float(theta)
    )


class EquilibriumClass(str, enum.Enum):
    NOT_CRITICAL = "NotCritical"
    DNE = "DNE"
    DSE_NOT_DNE = "DSE_not_DNE"
    CRITICAL_OTHER = "CriticalOther"


@dataclass
class Classification:
    kind: EquilibriumClass
    grad_norm_x: float
    grad_norm_y: float
    lambda_min_a: float | None = None
    lambda_min_c: float | None = None
    lambda_min_schur: float | None = None
    blocks: IntrinsicBlocks | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "blocks"}
        out["kind"] = self.kind.value
        if self.blocks is not None:
            out["eigenvalues_a"] = np.linalg.eigvalsh(self.blocks.a).tolist()
            out["eigenvalues_c"] = np.linalg.eigvalsh(self.blocks.c).tolist()
            out["asym_a"] = self.blocks.asym_a
            out["asym_c"] = self.blocks.asym_c
        return out


def classify_equilibrium(
    game: Game,
    p: GamePoint,
    grad_tol: float = GRAD_TOL,
    pd_tol: float = PD_TOL,
    *,
    order_x=None,
    order_y=None,
) -> Classification:
    """Classify ``p`` as NotCritical, DNE, DSE_not_DNE or CriticalOther."""
    gx, gy = grad_norms(game, p)
    if max(gx, gy) >= grad_tol:
        return Classification(EquilibriumClass.NOT_CRITICAL, gx, gy)
    blocks = intrinsic_blocks(game, p, grad_tol, order_x=order_x, order_y=order_y)
    lam_a = lambda_min(blocks.a)
    lam_c = lambda_min(blocks.c)
    schur = None
    if lam_a > pd_tol:
        schur = _schur_min(blocks)
    if lam_a > pd_tol and lam_c > pd_tol:
        if not schur > pd_tol:  # every Nash point is also Stackelberg
            raise ContractError("inconsistent spectra: DNE without positive Schur complement")
        kind = EquilibriumClass.DNE
    elif lam_a > pd_tol and schur > pd_tol:
        kind = EquilibriumClass.DSE_NOT_DNE
    else:
        kind = EquilibriumClass.CRITICAL_OTHER
    return Classification(kind, gx, gy, lam_a, lam_c, schur, blocks)


def tau_scan(
    blocks: IntrinsicBlocks, taus: Iterable[float], theta: float = 0.0
) -> list[dict]:
    """Per-tau Hurwitz flags and step-size bounds for ``M_g`` and ``M_s``."""
    rows = []
    for tau in taus:
        row = {"tau": float(tau)}
        for name, m in (("gda", assemble_mg(blocks, tau)), ("sga", assemble_ms(blocks, tau, theta))):
            rep = spectral_report(m)
            row[f"{name}_hurwitz"] = rep.hurwitz
            row[f"{name}_gamma_dot"] = rep.gamma_dot
            row[f"{name}_max_real"] = float(np.max(rep.eigenvalues.real))
        rows.append(row)
    return rows


def random_dse_blocks(
    rng: np.random.Generator, d1: int, d2: int, *, nash: bool = False
) -> IntrinsicBlocks:
    """Random blocks with ``A`` and ``C + B A^-1 B^T`` positive definite.

    ``C`` is symmetric and, unless ``nash`` is set, usually indefinite.
    """
    qa = rng.standard_normal((d2, d2))
    a = qa @ qa.T / d2 + rng.uniform(0.05, 1.0) * np.eye(d2)
    b = rng.standard_normal((d1, d2))
    s = b @ np.linalg.solve(a, b.T)
    qc = rng.standard_normal((d1, d1))
    c0 = 0.5 * (qc + qc.T)
    if nash:
        c = c0 @ c0.T / d1 + rng.uniform(0.05, 1.0) * np.eye(d1)
    else:
        # shift C so that C + S has smallest eigenvalue in (0.05, 1)
        target = rng.uniform(0.05, 1.0)
        c = c0 + (target - lambda_min(c0 + s)) * np.eye(d1)
    return IntrinsicBlocks(a, b, 0.5 * (c + c.T))
