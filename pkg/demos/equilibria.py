"""
Equilibria of the linear sphere games
=====================================

Three small games pair a Euclidean player ``x`` with a player ``y`` on the
unit sphere. We solve each for its equilibrium, then ask what kind of
equilibrium it is.
"""

import numpy as np

from riemannian_minmax import closed_form_equilibrium, fig1_game, intrinsic_blocks
from riemannian_minmax.spectral import classify_equilibrium

# The reference instance: A is a column of ones, b is almost in its range.
game = fig1_game("example2", kappa=0.1)
print("A =", game.a.ravel(), " b =", game.b)

# Example 2 has no closed form; a scalar Newton solve finds x*.
p = closed_form_equilibrium(game)
print(f"x* = {p.x[0]:.6f}   f(x*, y*) = {game.value(p):.6f}")

# The intrinsic blocks are Hessians and the cross term in orthonormal
# tangent coordinates. A small A block makes the y player sluggish.
blocks = intrinsic_blocks(game, p)
print("A block eigenvalues:", np.linalg.eigvalsh(blocks.a))
print("C block:", blocks.c.ravel(), "(negative: x sits at a local max of f)")

# Stackelberg but not Nash: C is negative, the Schur complement is positive.
for variant in ("example1", "example2", "example3"):
    g = fig1_game(variant)
    cls = classify_equilibrium(g, closed_form_equilibrium(g))
    print(f"{variant}: {cls.kind.value:12s} lambda_min(C) = {cls.lambda_min_c:+.4f}"
          f"  lambda_min(Schur) = {cls.lambda_min_schur:+.4f}")
