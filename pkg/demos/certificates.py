"""
Step-size certificates on random instances
==========================================

For blocks with a positive definite A and a positive Schur complement, the
certificate recommends a ratio and a step with a guaranteed contraction
factor. Here we compare that guarantee with the true spectral radius.
"""

import numpy as np

from riemannian_minmax.spectral import assemble_mg, gda_certificate, random_dse_blocks, rho_step

rng = np.random.default_rng(0)
slack = []
for _ in range(200):
    blocks = random_dse_blocks(rng, *rng.integers(1, 8, size=2))
    cert = gda_certificate(blocks)
    rho = rho_step(assemble_mg(blocks, cert.recommended_tau), cert.recommended_gamma)
    slack.append(cert.rate_bound - rho)

# The bound always holds and is usually loose.
slack = np.array(slack)
print(f"bound - rho: min {slack.min():.2e}, median {np.median(slack):.2e}")
