"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line that is printed in the
"acceptance criteria" section of the pytest terminal summary, then asserts.
"""
import itertools

import numpy as np
import pytest

from riemannian_minmax.algorithms import SolverConfig, estimate_rate, peak_growth, run, sga_orthogonality_residual
from riemannian_minmax.calculus import cross_grad_apply_x, cross_grad_apply_y, intrinsic_blocks
from riemannian_minmax.games import (
    GamePoint,
    LinearSphereGame,
    closed_form_equilibrium,
    equilibrium_example2,
    fig1_game,
)
from riemannian_minmax.linalg import lambda_max, lambda_min, operator_norm
from riemannian_minmax.spectral import (
    assemble_mg,
    assemble_ms,
    classify_equilibrium,
    gda_certificate,
    random_dse_blocks,
    rho_step,
    sga_certificate,
)
from riemannian_minmax.wgan import (
    GaussianWganSpec,
    covariance_error,
    emd,
    init_pretrain,
    sign_changes,
    train,
)

VARIANTS = ("example1", "example2", "example3")


def fig1_start(game):
    x0 = np.linalg.pinv(game.a) @ game.b
    r = game.a @ x0 - game.b
    return GamePoint(x0, r / np.linalg.norm(r))


def test_criterion_01_example2_equilibrium(acceptance):
    game = fig1_game("example2")
    p = equilibrium_example2(game)
    f = game.value(p)
    ok = abs(p.x[0] - 0.9975) <= 5e-4 and abs(f + 0.141) <= 1e-3
    acceptance(1, ok, f"Example-2 equilibrium x* = {p.x[0]:.6f}, f* = {f:.6f}")
    assert ok


def test_criterion_02_tau_thresholds(acceptance):
    game = fig1_game("example2")
    blocks = intrinsic_blocks(game, closed_form_equilibrium(game))
    g = gda_certificate(blocks).tau_threshold
    s = sga_certificate(blocks, 0.15).tau_threshold
    ok = abs(g - 36.18) <= 0.4 and abs(s - 16.7) <= 0.3
    acceptance(2, ok, f"tau thresholds GDA {g:.4f} (36.18 +- 0.4), SGA(0.15) {s:.4f} (16.7 +- 0.3)")
    assert ok


def test_criterion_03_gda_dichotomy(acceptance):
    game = fig1_game("example2")
    ref = closed_form_equilibrium(game)
    start = fig1_start(game)
    runs = {tau: run(game, start, SolverConfig("gda", tau, 1e-3 / tau, 0.0, 200_000, record_every=100), ref)
            for tau in (30.0, 50.0)}
    growth = peak_growth(runs[30.0], tail_fraction=0.2)
    final50 = runs[50.0].dist[-1]
    ok30, ok50 = growth > 1.0, final50 < 1e-4
    acceptance(3, ok30 and ok50,
               f"GDA tau=30 tail peak-distance growth {growth:.4f} (> 1: {ok30}); "
               f"tau=50 final distance {final50:.3e} (< 1e-4: {ok50})")
    assert ok30 and ok50


def test_criterion_04_sga_converges_faster(acceptance):
    game = fig1_game("example2")
    ref = closed_form_equilibrium(game)
    start = fig1_start(game)
    finals, sga10 = {}, None
    for tau in (10.0, 30.0, 50.0):
        traj = run(game, start, SolverConfig("sga", tau, 1e-3 / tau, 0.15, 2_500_000, record_every=1000), ref)
        finals[tau] = traj.dist[-1]
        if tau == 10.0:
            sga10 = traj
    rate_sga, _ = estimate_rate(sga10, tail_fraction=0.5, floor=1e-10)
    gda = run(game, start, SolverConfig("gda", 50.0, 1e-3 / 50, 0.0, 200_000, record_every=100), ref)
    rate_gda, _ = estimate_rate(gda, tail_fraction=1.0)
    converged = all(d < 1e-6 for d in finals.values())
    ok = converged and rate_sga < rate_gda
    dists = ", ".join(f"tau={t:g}: {d:.2e}" for t, d in finals.items())
    acceptance(4, ok, f"SGA final distances {dists}; rate SGA(10) {rate_sga:.8f} < GDA(50) {rate_gda:.8f}")
    assert ok


def test_criterion_05_ostrowski_rate(acceptance):
    details, ok = [], True
    for variant in VARIANTS:
        game = fig1_game(variant)
        ref = closed_form_equilibrium(game)
        blocks = intrinsic_blocks(game, ref)
        cert = gda_certificate(blocks)
        tau, gamma = cert.recommended_tau, cert.recommended_gamma
        rho = rho_step(assemble_mg(blocks, tau), gamma)
        y0 = game.m2.retract(ref.y, game.m2.project(ref.y, np.full(3, 3e-4)))
        traj = run(game, GamePoint(ref.x + 4e-4, y0), SolverConfig("gda", tau, gamma, 0.0, 3000, record_every=10), ref)
        fitted, _ = estimate_rate(traj, tail_fraction=0.5)
        ok &= bool(traj.dist[0] <= 1e-3 and abs(fitted - rho) <= 0.03)
        details.append(f"{variant} |{fitted:.6f} - {rho:.6f}| = {abs(fitted - rho):.1e}")
    acceptance(5, ok, "; ".join(details))
    assert ok


def _random_dims(rng):
    return rng.integers(1, 13, size=2)


def test_criterion_06_rate_bounds(acceptance):
    rng = np.random.default_rng(6)
    worst = {"gda": -np.inf, "sga": -np.inf}
    for _ in range(200):
        blk = random_dse_blocks(rng, *_random_dims(rng))
        cert = gda_certificate(blk)
        excess = rho_step(assemble_mg(blk, cert.recommended_tau), cert.recommended_gamma) - cert.rate_bound
        worst["gda"] = max(worst["gda"], excess)
        blk = random_dse_blocks(rng, *_random_dims(rng))
        theta = rng.uniform(0, 1) / lambda_max(blk.a)
        cert = sga_certificate(blk, theta)
        excess = rho_step(assemble_ms(blk, cert.recommended_tau, theta), cert.recommended_gamma) - cert.rate_bound
        worst["sga"] = max(worst["sga"], excess)
    ok = max(worst.values()) <= 1e-9
    acceptance(6, ok, f"max rho - rate_bound over 200 instances: GDA {worst['gda']:.2e}, SGA {worst['sga']:.2e}")
    assert ok


def test_criterion_07_hurwitz_suites(acceptance):
    rng = np.random.default_rng(7)
    violations = {"M_g": 0, "M_s": 0, "Im bound": 0, "modulus bound": 0}
    for _ in range(200):
        blk = random_dse_blocks(rng, *_random_dims(rng))
        tau = 1.01 * operator_norm(blk.c) / lambda_min(blk.a) + rng.uniform(0, 1)
        if np.max(np.linalg.eigvals(assemble_mg(blk, tau)).real) >= 0:
            violations["M_g"] += 1
    for _ in range(200):
        blk = random_dse_blocks(rng, *_random_dims(rng))
        theta = rng.uniform(0, 1) / lambda_max(blk.a)
        cert = sga_certificate(blk, theta)
        tau = max(1.0, 1.01 * cert.tau_threshold) + rng.uniform(0, 1)
        lam = np.linalg.eigvals(assemble_ms(blk, tau, theta))
        if np.max(lam.real) >= 0:
            violations["M_s"] += 1
        im_bound = np.sqrt(tau) * np.sqrt(1 - theta * lambda_min(blk.a)) * operator_norm(blk.b)
        if np.max(np.abs(lam.imag)) > im_bound + 1e-9:
            violations["Im bound"] += 1
        if np.max(np.abs(lam)) > 2 * tau * cert.l_const + 1e-9:
            violations["modulus bound"] += 1
    ok = not any(violations.values())
    acceptance(7, ok, "violations over 200 instances each: " + ", ".join(f"{k} {v}" for k, v in violations.items()))
    assert ok


def test_criterion_08_sga_orthogonality(acceptance):
    game = fig1_game("example2")
    residuals = []
    run(game, fig1_start(game), SolverConfig("sga", 10.0, 1e-4, 0.15, 10_000),
        monitor=lambda t, p, b: residuals.append(abs(sga_orthogonality_residual(game, p, 10.0))))
    worst = max(residuals)
    ok = len(residuals) == 10_000 and worst < 1e-6
    acceptance(8, ok, f"max orthogonality residual over {len(residuals)} SGA iterates: {worst:.2e}")
    assert ok


def _fd_ambient(game, p, h=1e-6):
    gx, gy = np.zeros_like(p.x), np.zeros_like(p.y)
    for i in range(len(p.x)):
        e = np.zeros_like(p.x)
        e[i] = h
        gx[i] = (game.value(GamePoint(p.x + e, p.y)) - game.value(GamePoint(p.x - e, p.y))) / (2 * h)
    for i in range(len(p.y)):
        e = np.zeros_like(p.y)
        e[i] = h
        gy[i] = (game.value(GamePoint(p.x, p.y + e)) - game.value(GamePoint(p.x, p.y - e))) / (2 * h)
    return gx, gy


def _rel(a, b):
    return np.linalg.norm(a - b) / max(1.0, np.linalg.norm(a))


def test_criterion_09_derivative_oracle(acceptance):
    rng = np.random.default_rng(9)
    worst = {}
    for variant in VARIANTS:
        game = LinearSphereGame(rng.standard_normal((4, 2)), rng.standard_normal(4),
                                0.05 if variant == "example2" else 0.0, variant)
        w = 0.0
        for _ in range(100):
            p = GamePoint(game.m1.random_point(rng), game.m2.random_point(rng))
            gx, gy = game.ambient_grads(p)
            fx, fy = _fd_ambient(game, p)
            eta, delta = game.m2.random_tangent(p.y, rng), game.m1.random_tangent(p.x, rng)
            w = max(w, _rel(gx, fx), _rel(gy, fy),
                    _rel(cross_grad_apply_y(game, p, eta, method="analytic"), cross_grad_apply_y(game, p, eta, method="fd")),
                    _rel(cross_grad_apply_x(game, p, delta, method="analytic"), cross_grad_apply_x(game, p, delta, method="fd")))
        worst[variant] = w
    ok = max(worst.values()) <= 1e-5
    acceptance(9, ok, "max relative FD mismatch: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_10_classification(acceptance):
    expected = {"example1": "DSE_not_DNE", "example2": "DSE_not_DNE", "example3": "DNE"}
    got = {}
    for variant in VARIANTS:
        game = fig1_game(variant)
        got[variant] = classify_equilibrium(game, closed_form_equilibrium(game)).kind.value
    game = fig1_game("example1")
    p = closed_form_equilibrium(game)
    lam = np.linalg.eigvalsh(intrinsic_blocks(game, p).a)
    err = float(np.max(np.abs(lam - np.linalg.norm(game.a @ p.x - game.b))))
    ok = got == expected and err <= 1e-8
    acceptance(10, ok, f"classes {got}; Example-1 A-block eigenvalue error {err:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_11_gaussian_wgan(acceptance):
    spec = GaussianWganSpec()
    iters, burn_in, batch = 20_000, 10_000, 256
    angle_ok, cov_ok, osc_ok, notes = True, True, True, []
    for seed in range(3):
        start = init_pretrain(spec, seed, iters, 100.0, 2e-4, batch_size=batch)
        slow = train(spec, start, SolverConfig("gda", 100.0, 2e-4, 0.0, iters, seed + 1), batch_size=batch)
        t = slow.column("t")
        late = t >= burn_in
        ang, cov = slow.column("angle")[late], slow.column("cov_err")[late]
        a_ok = bool(np.all(ang >= 0))
        c_ok = bool(np.all((cov >= 0.05) & (cov <= 0.5)))
        fast = train(spec, start, SolverConfig("gda", 1.0, 0.02, 0.0, iters, seed + 1), batch_size=batch)
        tf, af = fast.column("t"), fast.column("angle")
        windows = [sign_changes(af[(tf >= lo) & (tf <= lo + 10_000)]) for lo in range(0, iters, 10_000)]
        o_ok = all(w >= 1 for w in windows)
        angle_ok &= a_ok
        cov_ok &= c_ok
        osc_ok &= o_ok
        notes.append(f"seed {seed}: tau=100 min angle {ang.min():+.3f}, cov_err [{cov.min():.3f}, {cov.max():.3f}]; "
                     f"tau=1 sign changes per 1e4 {windows}")
    ok = angle_ok and cov_ok and osc_ok
    acceptance(11, ok, f"WGAN angle>=0 after burn-in: {angle_ok}, cov_err in [0.05, 0.5]: {cov_ok}, "
                       f"tau=1 oscillation: {osc_ok} | " + " | ".join(notes))
    assert ok


def test_criterion_12_emd_exact(acceptance):
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(100):
        n, d = rng.integers(1, 8), rng.integers(1, 5)
        p, q = rng.standard_normal((n, d)), rng.standard_normal((n, d))
        cost = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
        perms = np.array(list(itertools.permutations(range(n))))
        brute = cost[np.arange(n), perms].mean(axis=1).min()
        worst = max(worst, abs(emd(p, q) - brute))
    ok = worst <= 1e-12
    acceptance(12, ok, f"max |assignment EMD - brute force| over 100 trials (n <= 7): {worst:.1e}")
    assert ok
