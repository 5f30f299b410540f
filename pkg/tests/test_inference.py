"""Update rules, accumulators and the run loop."""

import numpy as np
import pytest

from convgp import inference as inf
from convgp.network import NetworkInput, ParamSet
from convgp.presets import preset
from convgp.rng import make_rng


def _params(vals):
    return ParamSet({i: np.array(v, dtype=float) for i, v in enumerate(vals)})


class TestSgdStep:
    def test_zero_grad_identity(self):
        p = _params([[1.0, 2.0]])
        out = inf.sgd_step(p, {0: np.zeros(2)}, lr=0.1)
        np.testing.assert_array_equal(out.weights[0], [1.0, 2.0])

    def test_weight_decay_only(self):
        p = _params([[1.0]])
        out = inf.sgd_step(p, {0: np.zeros(1)}, lr=0.1, weight_decay=0.1)
        assert abs(out.weights[0][0] - 0.99) < 1e-15

    def test_quadratic_convergence(self):
        # loss 0.5 (w - 3)^2: GD contraction reaches the minimiser
        w = _params([[10.0]])
        for _ in range(1000):
            g = {0: w.weights[0] - 3.0}
            w = inf.sgd_step(w, g, lr=0.2)
        assert abs(w.weights[0][0] - 3.0) < 1e-6

    def test_nonfinite_grad_aborts(self):
        p = _params([[1.0]])
        with pytest.raises(inf.DivergenceError, match="non-finite"):
            inf.sgd_step(p, {0: np.array([np.nan])}, lr=0.1)


class TestSgldStep:
    def test_noise_variance_matches_lr(self):
        p = _params([np.zeros(100000)])
        rng = make_rng(0)
        lr = 0.04
        out = inf.sgld_step(p, {0: np.zeros(100000)}, lr, 0.0, 1.0, rng)
        var = out.weights[0].var()
        assert abs(var / lr - 1.0) < 0.03

    def test_reduces_to_sgd_bitwise_without_noise(self):
        rng = make_rng(1)
        w0 = rng.standard_normal(50)
        g = {0: rng.standard_normal(50)}
        lr, sigma_n = 0.01, 0.3
        a = inf.sgld_step(_params([w0]), g, lr, 0.0, sigma_n, make_rng(2),
                          inject=False)
        b = inf.sgd_step(_params([w0]), g, 0.5 * lr / sigma_n**2, 0.0)
        np.testing.assert_array_equal(a.weights[0], b.weights[0])

    def test_formula_against_direct_evaluation(self):
        w0 = np.array([2.0])
        g = {0: np.array([0.5])}
        lr, wd, sn = 0.02, 0.3, 0.5
        stepped = inf.sgld_step(_params([w0]), g, lr, wd, sn, make_rng(3),
                                inject=False)
        expect = w0 - (lr / 2.0) * (g[0] / sn**2 + wd * w0)
        np.testing.assert_allclose(stepped.weights[0], expect, atol=1e-15)

    def test_conjugate_gaussian_calibration(self):
        # posterior of w given y_i ~ N(w, sn^2), prior N(0, 1/wd):
        # variance = 1 / (n / sn^2 + wd)
        rng = make_rng(4)
        sn, wd, n_obs = 0.5, 2.0, 4
        y = 1.0 + sn * rng.standard_normal(n_obs)
        target_var = 1.0 / (n_obs / sn**2 + wd)
        w = _params([np.array([0.0])])
        lr = 0.1 * target_var  # small step against the posterior curvature
        chain = []
        for t in range(60000):
            g = {0: np.sum(w.weights[0] - y, keepdims=True)}
            w = inf.sgld_step(w, g, lr, wd, sn, rng)
            if t > 5000:
                chain.append(w.weights[0][0])
        chain = np.array(chain)
        assert abs(chain.var() / target_var - 1.0) < 0.1
        post_mean = np.sum(y) / sn**2 / (n_obs / sn**2 + wd)
        assert abs(chain.mean() - post_mean) < 0.05


class TestEma:
    def test_first_call_adopts_value(self):
        x = np.array([1.0, 2.0])
        out = inf.ema_update(None, x, 0.9)
        np.testing.assert_array_equal(out, x)
        out[0] = 5.0
        assert x[0] == 1.0  # defensive copy

    def test_update_formula(self):
        acc = np.array([1.0])
        out = inf.ema_update(acc, np.array([2.0]), 0.99)
        assert abs(out[0] - (0.99 * 1.0 + 0.01 * 2.0)) < 1e-15

    def test_constant_stream_converges_exactly(self):
        x = np.array([3.0])
        acc = None
        for _ in range(2000):
            acc = inf.ema_update(acc, x, 0.99)
        np.testing.assert_allclose(acc, x, atol=1e-12)

    def test_alternating_stream_envelope(self):
        # geometric steady state oscillates around 1/2 within (1-decay)/2
        decay = 0.95
        acc = None
        vals = []
        for t in range(4000):
            acc = inf.ema_update(acc, np.array([float(t % 2)]), decay)
            if t > 3000:
                vals.append(acc[0])
        vals = np.array(vals)
        assert abs(vals.mean() - 0.5) < (1 - decay) / 2
        assert np.all(np.abs(vals - 0.5) < (1 - decay) / 2 + 1e-9)

    def test_decay_bounds(self):
        with pytest.raises(ValueError):
            inf.ema_update(None, np.zeros(2), 1.0)


class TestPerturbInput:
    def test_sigma_zero_returns_same_values(self):
        x = make_rng(5).standard_normal((2, 8))
        ni = NetworkInput(x, perturb_sigma=0.0)
        np.testing.assert_array_equal(inf.perturb_input(ni, make_rng(0)), x)

    def test_mean_reverts_to_x(self):
        x = make_rng(6).standard_normal((1, 16))
        ni = NetworkInput(x, perturb_sigma=0.5)
        rng = make_rng(7)
        acc = np.zeros_like(x)
        n = 10000
        for _ in range(n):
            acc += inf.perturb_input(ni, rng)
        np.testing.assert_allclose(acc / n, x, atol=4 * 0.5 / np.sqrt(n) + 0.01)

    def test_perturbations_independent_across_calls(self):
        x = np.zeros((1, 2000))
        ni = NetworkInput(x, perturb_sigma=1.0)
        rng = make_rng(8)
        a = inf.perturb_input(ni, rng)[0]
        b = inf.perturb_input(ni, rng)[0]
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.05

    def test_stored_input_unchanged(self):
        x = np.ones((1, 4))
        ni = NetworkInput(x, perturb_sigma=1.0)
        inf.perturb_input(ni, make_rng(9))
        np.testing.assert_array_equal(ni.x, np.ones((1, 4)))


class TestPosteriorAccumulator:
    def test_two_identical_samples(self):
        acc = inf.PosteriorAccumulator()
        acc.update(np.ones((1, 3)))
        acc.update(np.ones((1, 3)))
        stats = inf.posterior_stats(acc)
        np.testing.assert_array_equal(stats["variance"], 0.0)

    def test_mean_and_unbiased_variance(self):
        acc = inf.PosteriorAccumulator()
        acc.update(np.array([0.0]))
        acc.update(np.array([2.0]))
        stats = inf.posterior_stats(acc)
        assert stats["mean"][0] == 1.0
        assert stats["variance"][0] == 2.0

    def test_streaming_equals_batch(self):
        rng = make_rng(10)
        samples = rng.standard_normal((1000, 7))
        acc = inf.PosteriorAccumulator()
        for s in samples:
            acc.update(s)
        np.testing.assert_allclose(acc.mean, samples.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(
            acc.variance(), samples.var(axis=0, ddof=1), atol=1e-12
        )

    def test_single_sample_variance_rejected(self):
        acc = inf.PosteriorAccumulator()
        acc.update(np.zeros(3))
        with pytest.raises(ValueError):
            acc.variance()


class TestConfig:
    def test_burn_in_bounds(self):
        with pytest.raises(ValueError, match="burn_in"):
            inf.InferenceConfig("sgld", 0.1, 100, burn_in=100)

    def test_zero_iterations_allowed(self):
        cfg = inf.InferenceConfig("sgd", 0.1, 0)
        assert cfg.iterations == 0

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="scheme"):
            inf.InferenceConfig("adam", 0.1, 10)

    def test_default_config_sgld_matches_sgd_speed(self):
        cfg = inf.default_config("denoise", "sgld", n_obs=4096, noise_sigma=0.1)
        # effective descent rate (lr/2 / sn^2) times the sum-loss gradient
        # equals the sgd default times the mean-loss gradient
        sgd = inf.default_config("denoise", "sgd", n_obs=4096)
        assert cfg.lr / (2 * cfg.noise_sigma**2) * (4096 / 2) == pytest.approx(sgd.lr)
        assert cfg.weight_decay == pytest.approx(5e-8 * 1024**2 / 4096)


class TestRunLoop:
    def _toy(self, iterations=40, scheme="sgd", **kw):
        spec = preset("conv_1", channels=4, in_channels=4, out_channels=1)
        target = make_rng(20).standard_normal((1, 16)) * 0.1 + 0.5
        defaults = dict(scheme=scheme, lr=0.05, iterations=iterations, seed=3,
                        eval_every=10)
        defaults.update(kw)
        cfg = inf.InferenceConfig(**defaults)
        return spec, target, cfg

    def test_zero_iterations_returns_untrained_render(self):
        spec, target, cfg = self._toy(iterations=0)
        res = inf.run("denoise", target, spec, cfg)
        from convgp import network

        params, xin = network.init_from_rng(spec, make_rng(3, 0), (16,))
        np.testing.assert_array_equal(
            res.output, network.forward(spec, params, xin.x, "reflect")
        )
        assert len(res.trace.points) == 1

    def test_trace_starts_at_iteration_zero(self):
        spec, target, cfg = self._toy()
        res = inf.run("denoise", target, spec, cfg)
        assert res.trace.points[0].iteration == 0
        assert np.isfinite(res.trace.points[0].mse_noisy)

    def test_masked_loss_ignores_dropped_pixels(self):
        # gradients w.r.t. masked-out residuals are exactly zero: changing
        # hidden targets changes nothing
        spec, target, cfg = self._toy(iterations=15)
        mask = np.zeros(16, dtype=bool)
        mask[:8] = True
        res1 = inf.run("inpaint", target, spec, cfg, mask=mask)
        target2 = target.copy()
        target2[0, 8:] += 100.0
        res2 = inf.run("inpaint", target2, spec, cfg, mask=mask)
        np.testing.assert_array_equal(res1.output, res2.output)

    def test_sgld_outputs_posterior_stats(self):
        spec, target, cfg = self._toy(
            iterations=30, scheme="sgld", lr=1e-5, burn_in=10, noise_sigma=0.1
        )
        res = inf.run("denoise", target, spec, cfg)
        assert res.posterior_mean is not None
        assert res.posterior_variance is not None
        assert np.all(res.posterior_variance >= 0)
        np.testing.assert_array_equal(res.output, res.posterior_mean)

    def test_ema_scheme_returns_average(self):
        spec, target, cfg = self._toy(iterations=25, scheme="sgd_avg")
        res = inf.run("denoise", target, spec, cfg)
        assert res.output.shape == target.shape

    def test_best_snapshot_tracked(self):
        spec, target, cfg = self._toy(iterations=30)
        clean = target + 0.01
        res = inf.run("denoise", target, spec, cfg, clean_ref=clean)
        assert res.best is not None
        trace_best = res.trace.best_point()
        assert res.best.psnr == pytest.approx(trace_best.psnr_clean)

    def test_divergence_guard_carries_trace(self):
        spec, target, cfg = self._toy(iterations=400, lr=1e4)
        with pytest.raises(inf.DivergenceError) as exc:
            inf.run("denoise", target, spec, cfg)
        assert isinstance(exc.value.trace, inf.RunTrace)

    def test_input_noise_scheme_uses_sigma_p(self):
        spec, target, _ = self._toy()
        cfg_a = inf.InferenceConfig("sgd_input", 0.05, 30, sigma_p=0.0, seed=3)
        cfg_b = inf.InferenceConfig("sgd_input", 0.05, 30, sigma_p=0.5, seed=3)
        ra = inf.run("denoise", target, spec, cfg_a)
        rb = inf.run("denoise", target, spec, cfg_b)
        assert not np.array_equal(ra.output, rb.output)

    def test_sgld_reduction_matches_sgd_run(self):
        # full-loop reduction: noise off, wd 0, matched lr => identical traces
        spec, target, _ = self._toy()
        sn = 0.1
        eps = 1e-4
        cfg_sgld = inf.InferenceConfig(
            "sgld", eps, 25, burn_in=5, noise_sigma=sn, noise_injection=False,
            weight_decay=0.0, seed=3, eval_every=5,
        )
        # the sgd run scales its residual by 2/n_obs; undo via the lr choice
        n_obs = 16
        cfg_sgd = inf.InferenceConfig(
            "sgd", 0.5 * eps / sn**2 * (n_obs / 2.0), 25, seed=3, eval_every=5
        )
        ra = inf.run("denoise", target, spec, cfg_sgld)
        rb = inf.run("denoise", target, spec, cfg_sgd)
        np.testing.assert_allclose(
            ra.trace.column("mse_noisy"), rb.trace.column("mse_noisy"), rtol=1e-10
        )

    def test_fit1d_task(self):
        spec = preset("conv_1", channels=4, in_channels=4, out_channels=1)
        t = np.linspace(0, 1, 32)
        signal = np.sin(2 * np.pi * t)[None]
        mask = make_rng(30).random(32) > 0.5
        cfg = inf.InferenceConfig("sgd", 0.05, 30, seed=1, eval_every=10)
        res = inf.run("fit1d", signal, spec, cfg, mask=mask, padding="circular")
        assert res.output.shape == (1, 32)
