"""Riemannian min-max optimization: tau-GDA, tau-SGA and spectral certificates."""
from .algorithms import (
    SolverConfig,
    Trajectory,
    estimate_rate,
    run,
    step_asymp_sga,
    step_gda,
    step_sga,
)
from .calculus import (
    IntrinsicBlocks,
    cross_grad_apply_x,
    cross_grad_apply_y,
    intrinsic_blocks,
    riemannian_grads,
)
from .games import (
    FunctionGame,
    Game,
    GamePoint,
    LinearSphereGame,
    closed_form_equilibrium,
    equilibrium_example1,
    equilibrium_example2,
    equilibrium_example3,
    fig1_game,
)
from .manifolds import Euclidean, Product, Sphere, Stiefel
from .spectral import (
    EquilibriumClass,
    assemble_mg,
    assemble_ms,
    classify_equilibrium,
    dne_certificate,
    gamma_dot,
    gda_certificate,
    sga_certificate,
    spectral_report,
)

__version__ = "0.1.0"

__all__ = [
    "Euclidean", "Sphere", "Stiefel", "Product",
    "Game", "FunctionGame", "GamePoint", "LinearSphereGame", "fig1_game",
    "equilibrium_example1", "equilibrium_example2", "equilibrium_example3",
    "closed_form_equilibrium",
    "riemannian_grads", "cross_grad_apply_x", "cross_grad_apply_y",
    "IntrinsicBlocks", "intrinsic_blocks",
    "assemble_mg", "assemble_ms", "gamma_dot", "spectral_report",
    "gda_certificate", "dne_certificate", "sga_certificate",
    "classify_equilibrium", "EquilibriumClass",
    "SolverConfig", "Trajectory", "run", "estimate_rate",
    "step_gda", "step_sga", "step_asymp_sga",
]
