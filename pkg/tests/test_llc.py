import json

import numpy as np
import pytest

from basinlab import (
    Bounds,
    Landscape,
    LlcConfig,
    NormalCrossingSpec,
    Preconditioner,
    estimate_llc,
    make_flat,
    make_normal_crossing,
    make_quadratic,
    psgld_step,
    rng_stream,
    sgld_step,
)
from basinlab.errors import ChainDivergedError, InvalidInputError


def gibbs_expectation_quadrature(landscape, nbeta, gamma, n_nodes=400):
    """Oracle: E[K] under exp(-nbeta K - gamma/2 ||w||^2) on a 2-d box, by
    tensor-product Gauss-Legendre quadrature."""
    assert landscape.dim == 2
    lo, hi = landscape.bounds.lo, landscape.bounds.hi
    x1, w1 = np.polynomial.legendre.leggauss(n_nodes)
    nodes1 = 0.5 * (hi[0] - lo[0]) * x1 + 0.5 * (hi[0] + lo[0])
    nodes2 = 0.5 * (hi[1] - lo[1]) * x1 + 0.5 * (hi[1] + lo[1])
    g1, g2 = np.meshgrid(nodes1, nodes2, indexing="ij")
    pts = np.stack([g1.ravel(), g2.ravel()], axis=-1)
    k = landscape.value(pts)
    log_density = -nbeta * k - 0.5 * gamma * np.sum(pts**2, axis=-1)
    weights = np.outer(w1, w1).ravel()
    density = np.exp(log_density - log_density.max())
    return float(np.sum(weights * density * k) / np.sum(weights * density))


CFG = LlcConfig(nbeta=30.0, gamma=1.0, step_size=1.2e-3, chains=4, steps_per_chain=2000, burn_in=200)


class TestSgldStep:
    def test_fixed_point(self):
        cfg = LlcConfig(nbeta=30.0, gamma=0.0, step_size=1e-2, chains=1, steps_per_chain=10)
        w = np.array([0.3, -0.2])
        out = sgld_step(w, np.zeros(2), np.zeros(2), cfg, noise=np.zeros(2))
        assert np.array_equal(out, w)

    def test_pure_diffusion(self):
        cfg = LlcConfig(nbeta=30.0, gamma=2.0, step_size=4e-2, chains=1, steps_per_chain=10)
        w_star = np.array([0.1, 0.1])
        e1 = np.array([1.0, 0.0])
        out = sgld_step(w_star.copy(), np.zeros(2), w_star, cfg, noise=e1)
        assert np.allclose(out, w_star + np.sqrt(4e-2) * e1)

    def test_clamps_to_bounds(self):
        cfg = LlcConfig(nbeta=1.0, gamma=0.0, step_size=1.0, chains=1, steps_per_chain=10)
        b = Bounds.symmetric(2, 1.0)
        out = sgld_step(np.array([0.9, 0.0]), np.zeros(2), np.zeros(2), cfg,
                        noise=np.array([5.0, 0.0]), bounds=b)
        assert out[0] == 1.0

    def test_nonfinite_raises(self):
        cfg = LlcConfig(nbeta=1.0, gamma=0.0, step_size=1.0, chains=1, steps_per_chain=10)
        with pytest.raises(ChainDivergedError):
            sgld_step(np.array([0.0]), np.array([np.inf]), np.zeros(1), cfg, noise=np.zeros(1))

    def test_stationary_variance_matches_ou_law(self):
        # quadratic potential: the chain is an AR(1) whose stationary variance
        # is eps / (1 - a^2) with a = 1 - eps (2 nbeta + gamma) / 2; for small
        # eps this approaches 1 / (2 nbeta + gamma).
        nbeta, gamma, eps = 30.0, 1.0, 1e-3
        cfg = LlcConfig(nbeta=nbeta, gamma=gamma, step_size=eps, chains=1, steps_per_chain=10)
        L = make_quadratic(2)
        rng = rng_stream(21, 0)
        samples = []
        for chain in range(4):
            w = np.zeros(2)
            for t in range(10_000):
                w = sgld_step(w, L.grad(w), np.zeros(2), cfg, rng.standard_normal(2), L.bounds)
                if t >= 1000:
                    samples.append(w.copy())
        var = np.array(samples).ravel().var()
        assert abs(var - 1.0 / (2 * nbeta + gamma)) <= 0.10 / (2 * nbeta + gamma)


class TestPsgldStep:
    def test_zero_gradients_reduce_to_sgld_with_unit_stabilizer(self):
        cfg = LlcConfig(
            nbeta=30.0, gamma=2.0, step_size=1e-2, chains=1, steps_per_chain=10,
            preconditioner=Preconditioner(kind="rmsprop", decay=0.9, stabilizer=1.0),
        )
        w_star = np.zeros(2)
        rng_a, rng_b = rng_stream(5, 0), rng_stream(5, 0)
        w_p = np.array([0.4, -0.3])
        w_s = w_p.copy()
        v = np.zeros(2)
        for _ in range(50):
            w_p, v = psgld_step(w_p, np.zeros(2), w_star, cfg, rng_a.standard_normal(2), v)
            w_s = sgld_step(w_s, np.zeros(2), w_star, cfg, rng_b.standard_normal(2))
        assert np.allclose(w_p, w_s, atol=1e-14)

    def test_constant_gradient_fixed_point_scaling(self):
        # equilibrated accumulator v = g^2 (nbeta 1): drift is the sgld drift
        # scaled per coordinate by 1 / (|g| + stabilizer)
        cfg = LlcConfig(
            nbeta=1.0, gamma=0.7, step_size=1e-2, chains=1, steps_per_chain=10,
            preconditioner=Preconditioner(kind="rmsprop", decay=0.5, stabilizer=1.0),
        )
        g = np.array([3.0, 0.5])
        w_star = np.zeros(2)
        w = np.array([0.2, -0.1])
        v = np.zeros(2)
        for _ in range(200):  # let the moving average converge at fixed w
            _, v = psgld_step(w, g, w_star, cfg, np.zeros(2), v)
        w_pre, _ = psgld_step(w, g, w_star, cfg, np.zeros(2), v)
        w_sgld = sgld_step(w, g, w_star, cfg, np.zeros(2))
        scale = 1.0 / (np.abs(g) + 1.0)
        assert np.allclose(w_pre - w, (w_sgld - w) * scale, atol=1e-9)

    def test_noise_scaled_by_sqrt_preconditioner(self):
        cfg = LlcConfig(
            nbeta=1.0, gamma=0.0, step_size=1e-2, chains=1, steps_per_chain=10,
            preconditioner=Preconditioner(kind="rmsprop", decay=0.5, stabilizer=1.0),
        )
        g = np.array([3.0, 0.5])
        v = np.zeros(2)
        for _ in range(200):
            _, v = psgld_step(np.zeros(2), g, np.zeros(2), cfg, np.zeros(2), v)
        noise = np.array([1.0, 1.0])
        with_noise, _ = psgld_step(np.zeros(2), g, np.zeros(2), cfg, noise, v)
        without, _ = psgld_step(np.zeros(2), g, np.zeros(2), cfg, np.zeros(2), v)
        scale = 1.0 / (np.abs(g) + 1.0)
        assert np.allclose(with_noise - without, np.sqrt(1e-2 * scale), atol=1e-9)

    def test_balances_anisotropic_curvatures(self):
        # curvatures 1 and 100: per-coordinate loss shares should even out
        # under preconditioning but differ by > 5x for plain sgld at the same
        # step size (which is too coarse for the stiff coordinate)
        bounds = Bounds.symmetric(2, 4.0)
        L = Landscape(
            dim=2, bounds=bounds,
            value=lambda w: w[..., 0] ** 2 + 100.0 * w[..., 1] ** 2,
            grad=lambda w: np.stack([2.0 * w[..., 0], 200.0 * w[..., 1]], axis=-1),
        )
        eps = 6e-4

        def coord_losses(cfg, steps=120_000, burn=40_000):
            rng = rng_stream(3, 0)
            w = np.zeros(2)
            v = np.zeros(2)
            acc = np.zeros(2)
            n = 0
            for t in range(steps):
                g = L.grad(w)
                noise = rng.standard_normal(2)
                if cfg.preconditioner.kind == "rmsprop":
                    w, v = psgld_step(w, g, np.zeros(2), cfg, noise, v, bounds)
                else:
                    w = sgld_step(w, g, np.zeros(2), cfg, noise, bounds)
                if t >= burn:
                    acc += np.array([w[0] ** 2, 100.0 * w[1] ** 2])
                    n += 1
            return 30.0 * acc / n

        plain = LlcConfig(nbeta=30.0, gamma=1.0, step_size=eps, chains=1, steps_per_chain=10)
        pre = LlcConfig(
            nbeta=30.0, gamma=1.0, step_size=eps, chains=1, steps_per_chain=10,
            preconditioner=Preconditioner(kind="rmsprop", decay=0.9998, stabilizer=1.0),
        )
        c_plain = coord_losses(plain)
        c_pre = coord_losses(pre)
        assert max(c_plain) / min(c_plain) > 5.0
        assert max(c_pre) / min(c_pre) < 1.25


class TestEstimateLlc:
    def test_flat_landscape_gives_zero(self):
        est = estimate_llc(make_flat(2), CFG, seed=0)
        assert abs(est.lambda_hat) < 0.05
        assert est.lambda_hat == 0.0  # identically zero loss

    def test_quadratic_matches_gaussian_closed_form(self):
        est = estimate_llc(make_quadratic(2), CFG, seed=9)
        oracle = (2 / 2) * 30.0 / (30.0 + 0.5)
        assert abs(est.lambda_hat - oracle) <= 0.10 * oracle

    def test_quadratic_matches_quadrature_oracle(self):
        L = make_quadratic(2)
        oracle = 30.0 * gibbs_expectation_quadrature(L, 30.0, 1.0)
        est = estimate_llc(L, CFG, seed=9)
        assert abs(est.lambda_hat - oracle) <= 0.10 * oracle

    def test_singular_landscape_matches_quadrature_oracle(self):
        # degenerate valleys mix slowly; long chains keep the seed scatter
        # well inside the tolerance
        L = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(1, 2)))
        oracle = 30.0 * gibbs_expectation_quadrature(L, 30.0, 1.0)
        cfg = LlcConfig(nbeta=30.0, gamma=1.0, step_size=1.2e-3, chains=4,
                        steps_per_chain=12_000, burn_in=1200)
        est = estimate_llc(L, cfg, seed=9)
        assert abs(est.lambda_hat - oracle) <= 0.15 * oracle

    def test_ordering_across_singularity_strengths(self):
        quad = make_quadratic(2)
        k1 = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(1,), active_dims=(0,)))
        k12 = make_normal_crossing(NormalCrossingSpec(dim=2, exponents=(1, 2)))
        for seed in range(5):
            vals = [estimate_llc(L, CFG, seed=seed).lambda_hat for L in (quad, k1, k12)]
            assert vals[0] > vals[1] > vals[2]

    def test_estimator_identity_recompute(self):
        est = estimate_llc(make_quadratic(2), CFG, seed=3)
        assert est.lambda_hat == pytest.approx(est.recompute(), abs=1e-12)

    def test_localization_strength_shrinks_excursions(self):
        # step size chosen stable for the largest gamma (eps * gamma / 2 < 1)
        L = make_flat(2)
        dists = {}
        for gamma in (300.0, 1e6):
            cfg = LlcConfig(nbeta=30.0, gamma=gamma, step_size=1e-6, chains=1,
                            steps_per_chain=30_000, burn_in=15_000)
            rng = rng_stream(17, 0)
            w = np.zeros(2)
            total = 0.0
            for t in range(30_000):
                w = sgld_step(w, np.zeros(2), np.zeros(2), cfg, rng.standard_normal(2), L.bounds)
                if t >= 15_000:
                    total += np.linalg.norm(w)
            dists[gamma] = total / 15_000
        assert dists[1e6] < dists[300.0]
        # the fast-mixing chain also matches the Gaussian mean-radius law
        # sqrt(pi / (2 gamma)); at gamma 300 the chain is too sluggish at this
        # step size for a tight check
        assert dists[1e6] == pytest.approx(np.sqrt(np.pi / (2 * 1e6)), rel=0.25)

    def test_seed_determinism_bytes(self):
        a = estimate_llc(make_quadratic(2), CFG, seed=5)
        b = estimate_llc(make_quadratic(2), CFG, seed=5)
        assert a.to_record() == b.to_record()
        assert json.loads(a.to_record())["lambda_hat"] == repr(a.lambda_hat)

    def test_different_seeds_differ(self):
        a = estimate_llc(make_quadratic(2), CFG, seed=5)
        b = estimate_llc(make_quadratic(2), CFG, seed=6)
        assert a.lambda_hat != b.lambda_hat

    def test_euler_maruyama_bias_small_and_tracked(self):
        # closed-form AR(1) stationary variance: halving the step size moves
        # the predicted estimate by < 2%, and the sampler tracks the
        # discrete-chain prediction
        nbeta, gamma, d = 30.0, 1.0, 8
        L = make_quadratic(d)

        def predicted(eps):
            a = 1.0 - 0.5 * eps * (2 * nbeta + gamma)
            return nbeta * d * eps / (1.0 - a * a)

        assert abs(predicted(1.2e-3) / predicted(0.6e-3) - 1.0) < 0.02
        cfg = LlcConfig(nbeta=nbeta, gamma=gamma, step_size=1.2e-3, chains=4,
                        steps_per_chain=2000, burn_in=200)
        est = estimate_llc(L, cfg, seed=9)
        assert abs(est.lambda_hat - predicted(1.2e-3)) <= 0.08 * predicted(1.2e-3)

    def test_w_star_outside_bounds_rejected(self):
        with pytest.raises(InvalidInputError):
            estimate_llc(make_quadratic(2), CFG, seed=0, w_star=np.array([2.0, 0.0]))

    def test_negative_estimate_returned_and_flagged(self):
        # anchoring off the minimum makes the chains relax downhill, so the
        # posterior mean loss falls below the baseline: a negative estimate
        # is a diagnostic, not an error
        est = estimate_llc(make_quadratic(2), CFG, seed=0, w_star=np.array([0.5, 0.0]))
        assert est.lambda_hat < 0
        assert est.is_negative

    def test_diverged_chain_carries_partial_diagnostics(self):
        bad = Landscape(
            dim=2, bounds=Bounds.symmetric(2, 1.0),
            value=lambda w: np.sum(w * w, axis=-1),
            grad=lambda w: np.full_like(np.asarray(w, dtype=float), np.nan),
        )
        with pytest.raises(ChainDivergedError) as e:
            estimate_llc(bad, CFG, seed=0)
        assert e.value.chain == 0 and e.value.step == 0
        assert e.value.diagnostics is not None

    def test_trace_rows_align(self):
        est = estimate_llc(make_quadratic(1), LlcConfig(
            nbeta=30.0, gamma=1.0, step_size=1e-3, chains=2, steps_per_chain=50, burn_in=5), seed=0)
        rows = list(est.trace_rows())
        assert len(rows) == 2 * 50
        assert rows[0][:2] == (0, 0)
        assert rows[-1][:2] == (49, 1)


class TestConfigValidation:
    def test_bad_burn_in(self):
        with pytest.raises(InvalidInputError):
            LlcConfig(steps_per_chain=100, burn_in=100)

    def test_bad_step_size(self):
        with pytest.raises(InvalidInputError):
            LlcConfig(step_size=0.0)

    def test_default_burn_in_is_tenth(self):
        cfg = LlcConfig(steps_per_chain=500)
        assert cfg.resolved_burn_in == 50

    def test_defaults_match_small_model_settings(self):
        cfg = LlcConfig()
        assert (cfg.nbeta, cfg.gamma) == (30.0, 300.0)
        assert (cfg.chains, cfg.steps_per_chain) == (4, 200)
        assert (cfg.batch_size, cfg.baseline_batches) == (32, 8)
        assert cfg.preconditioner.kind == "none"
