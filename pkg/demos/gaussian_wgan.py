"""
An orthogonal Wasserstein GAN on a flat Gaussian
================================================

The data is a 5-dimensional Gaussian with one nearly flat direction; the
generator has rank 4, so the best it can do leaves a covariance error of
0.01. The critic's weights live on Stiefel manifolds. With a large
ratio tau the critic mostly keeps up, so the angle between its output
vector and the feature gap is usually positive. With tau = 1 it keeps
flipping sign and the generator stalls.
"""

import numpy as np

from riemannian_minmax.algorithms import SolverConfig
from riemannian_minmax.wgan import GaussianWganSpec, covariance_error, init_pretrain, sign_changes, train

spec = GaussianWganSpec()
start = init_pretrain(spec, seed=0, iters=20_000, batch_size=256)
print(f"after pretraining: covariance error {covariance_error(spec, start.a_x):.3f}")

for tau, gamma in ((100.0, 2e-4), (1.0, 0.02)):
    hist = train(spec, start, SolverConfig("gda", tau, gamma, 0.0, 10_000, seed=1), batch_size=256, eval_every=1000)
    angle = hist.column("angle")
    print(f"tau = {tau:5.0f}: angles {np.round(angle, 2)}")
    print(f"            sign changes {sign_changes(angle)}, final covariance error {hist.column('cov_err')[-1]:.3f}")
