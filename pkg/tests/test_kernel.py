"""Tests for the decay/correlation kernel and its evidence-based tuning."""

import dataclasses
import json

import numpy as np
import pytest

from riskid.kernel import (
    DcHyperParams,
    chol_psd,
    dc_kernel,
    load_hyperparams,
    marginal_log_likelihood,
    marginal_log_likelihood_gradient,
    save_hyperparams,
    tune_hyperparameters,
)
from riskid.lti import build_toeplitz, sample_white_noise


def random_hyperparams(rng) -> DcHyperParams:
    return DcHyperParams(
        c=float(rng.uniform(0.1, 50.0)),
        alpha=float(rng.uniform(0.05, 0.95)),
        rho=float(rng.uniform(-0.9, 0.9)),
        lam=float(rng.uniform(0.05, 5.0)),
    )


class TestHyperParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            DcHyperParams(c=-1.0, alpha=0.5, rho=0.0, lam=1.0)
        with pytest.raises(ValueError):
            DcHyperParams(c=1.0, alpha=1.0, rho=0.0, lam=1.0)
        with pytest.raises(ValueError):
            DcHyperParams(c=1.0, alpha=0.5, rho=1.5, lam=1.0)
        with pytest.raises(ValueError):
            DcHyperParams(c=1.0, alpha=0.5, rho=0.0, lam=0.0)

    def test_unconstrained_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = random_hyperparams(rng)
            q = DcHyperParams.from_unconstrained(p.to_unconstrained())
            assert q.c == pytest.approx(p.c, rel=1e-12)
            assert q.alpha == pytest.approx(p.alpha, rel=1e-12)
            assert q.rho == pytest.approx(p.rho, rel=1e-9, abs=1e-12)
            assert q.lam == pytest.approx(p.lam, rel=1e-12)

    def test_json_round_trip(self, tmp_path):
        p = DcHyperParams(c=100.0, alpha=0.8, rho=0.7, lam=2.0)
        path = tmp_path / "hyper.json"
        save_hyperparams(p, path)
        data = json.loads(path.read_text())
        assert set(data) == {"c", "alpha", "rho", "lambda"}
        assert load_hyperparams(path) == p


class TestDcKernel:
    def test_documented_entries(self):
        # Direct evaluation of c * alpha**((i+j)/2) * rho**|i-j| at i=j=1 and (1,2).
        K = dc_kernel(DcHyperParams(c=100.0, alpha=0.8, rho=0.7, lam=1.0), 4)
        assert K[0, 0] == pytest.approx(100.0 * 0.8, rel=1e-12)
        assert K[0, 1] == pytest.approx(100.0 * 0.8**1.5 * 0.7, rel=1e-12)
        assert K[0, 1] == pytest.approx(50.087922696, abs=1e-8)

    def test_zero_correlation_is_diagonal(self):
        K = dc_kernel(DcHyperParams(c=3.0, alpha=0.5, rho=0.0, lam=1.0), 5)
        off_diag = K - np.diag(np.diag(K))
        assert np.all(off_diag == 0.0)
        np.testing.assert_allclose(np.diag(K), 3.0 * 0.5 ** np.arange(1, 6), rtol=1e-12)

    def test_symmetric_and_psd_random(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(2, 50))
            K = dc_kernel(random_hyperparams(rng), n)
            assert np.abs(K - K.T).max() < 1e-12
            evals = np.linalg.eigvalsh(0.5 * (K + K.T))
            assert evals.min() >= -1e-10 * max(evals.max(), 1.0)

    def test_cholesky_succeeds_after_jitter(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            K = dc_kernel(random_hyperparams(rng), 20)
            L = chol_psd(K)
            assert np.all(np.isfinite(L))


class TestMarginalLogLikelihood:
    def test_scalar_closed_form(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = random_hyperparams(rng)
            u1 = float(rng.standard_normal())
            y1 = float(rng.standard_normal())
            H = build_toeplitz([u1])
            k = dc_kernel(p, 1)[0, 0]
            s = p.lam + u1**2 * k
            expected = -0.5 * np.log(s) - y1**2 / (2 * s)
            got = marginal_log_likelihood(p, H, np.array([y1]))
            assert got == pytest.approx(expected, abs=1e-12, rel=1e-9)

    def test_zero_output_decreasing_in_scale(self):
        rng = np.random.default_rng(4)
        u = rng.standard_normal(12)
        H = build_toeplitz(u)
        y = np.zeros(12)
        p = DcHyperParams(c=1.0, alpha=0.6, rho=0.3, lam=0.5)
        ll_c = marginal_log_likelihood(p, H, y)
        ll_2c = marginal_log_likelihood(dataclasses.replace(p, c=2.0), H, y)
        assert ll_2c < ll_c

    def test_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            N = 10
            u = rng.standard_normal(N)
            H = build_toeplitz(u)
            y = rng.standard_normal(N)
            p = random_hyperparams(rng)
            K = dc_kernel(p, N)
            S = p.lam * np.eye(N) + H @ K @ H.T
            sign, logdet = np.linalg.slogdet(S)
            assert sign > 0
            expected = -0.5 * logdet - 0.5 * y @ np.linalg.solve(S, y)
            got = marginal_log_likelihood(p, H, y)
            assert got == pytest.approx(expected, rel=1e-8)

    def test_factorization_path_invariance(self):
        # Eigendecomposition-based evaluation against the Cholesky path.
        rng = np.random.default_rng(6)
        for _ in range(10):
            N = 12
            u = rng.standard_normal(N)
            H = build_toeplitz(u)
            y = rng.standard_normal(N)
            p = random_hyperparams(rng)
            K = dc_kernel(p, N)
            S = p.lam * np.eye(N) + H @ K @ H.T
            S = 0.5 * (S + S.T)
            evals, vecs = np.linalg.eigh(S)
            proj = vecs.T @ y
            expected = -0.5 * np.sum(np.log(evals)) - 0.5 * np.sum(proj**2 / evals)
            got = marginal_log_likelihood(p, H, y)
            assert got == pytest.approx(expected, rel=1e-8)

    def test_analytic_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(8):
            N = 9
            u = rng.standard_normal(N)
            H = build_toeplitz(u)
            y = rng.standard_normal(N)
            p = random_hyperparams(rng)
            value, grad = marginal_log_likelihood_gradient(p, H, y)
            assert value == pytest.approx(marginal_log_likelihood(p, H, y), abs=1e-12, rel=1e-12)
            for i, name in enumerate(["c", "alpha", "rho", "lam"]):
                up = dataclasses.replace(p, **{name: getattr(p, name) + h})
                dn = dataclasses.replace(p, **{name: getattr(p, name) - h})
                fd = (marginal_log_likelihood(up, H, y) - marginal_log_likelihood(dn, H, y)) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def _simulated_tuning_problem(seed, N=80, lam=1.0):
    """Second-order test system driven by unit-variance white noise."""
    from riskid.lti import RationalModel, impulse_response, simulate

    ss = np.random.SeedSequence(entropy=seed, spawn_key=(1,))
    s_u, s_e = ss.spawn(2)
    system = RationalModel(b=[0.72], f=[-1.28, 0.64], nk=1)
    u = sample_white_noise(N, 1.0, s_u)
    e = sample_white_noise(N, lam, s_e)
    y = simulate(impulse_response(system, N), u, e)
    return build_toeplitz(u), y


class TestTuneHyperparameters:
    def test_never_worse_than_init(self):
        H, y = _simulated_tuning_problem(0)
        init = DcHyperParams(c=100.0, alpha=0.8, rho=0.7, lam=1.0)
        tuned = tune_hyperparameters(H, y, init, restarts=1, seed=0)
        assert marginal_log_likelihood(tuned, H, y) >= marginal_log_likelihood(init, H, y) - 1e-9

    def test_improves_documented_init_and_alpha_in_range(self):
        H, y = _simulated_tuning_problem(1, N=100)
        init = DcHyperParams(c=100.0, alpha=0.8, rho=0.7, lam=1.0)
        tuned = tune_hyperparameters(H, y, init, restarts=2, seed=0)
        assert marginal_log_likelihood(tuned, H, y) > marginal_log_likelihood(init, H, y)
        assert 0.0 < tuned.alpha < 1.0

    def test_fixed_point_of_local_maximizer(self):
        H, y = _simulated_tuning_problem(2, N=60)
        init = DcHyperParams(c=10.0, alpha=0.7, rho=0.5, lam=1.0)
        first = tune_hyperparameters(H, y, init, restarts=0, seed=0)
        again = tune_hyperparameters(H, y, first, restarts=0, seed=0)
        ll_first = marginal_log_likelihood(first, H, y)
        ll_again = marginal_log_likelihood(again, H, y)
        assert ll_again >= ll_first
        assert ll_again - ll_first < 1e-3 * (1 + abs(ll_first))

    def test_fix_lambda_pins_noise_variance(self):
        H, y = _simulated_tuning_problem(3, N=60)
        init = DcHyperParams(c=5.0, alpha=0.6, rho=0.4, lam=1.0)
        tuned = tune_hyperparameters(H, y, init, fix_lambda=True, restarts=1, seed=0)
        assert tuned.lam == init.lam

    def test_deterministic_given_seed(self):
        H, y = _simulated_tuning_problem(4, N=50)
        init = DcHyperParams(c=5.0, alpha=0.6, rho=0.4, lam=1.0)
        a = tune_hyperparameters(H, y, init, restarts=3, seed=7)
        b = tune_hyperparameters(H, y, init, restarts=3, seed=7)
        assert a == b

    def test_fd_gradient_option_agrees(self):
        H, y = _simulated_tuning_problem(5, N=40)
        init = DcHyperParams(c=5.0, alpha=0.6, rho=0.4, lam=1.0)
        a = tune_hyperparameters(H, y, init, restarts=0, seed=0, gradient="analytic")
        b = tune_hyperparameters(H, y, init, restarts=0, seed=0, gradient="fd")
        ll_a = marginal_log_likelihood(a, H, y)
        ll_b = marginal_log_likelihood(b, H, y)
        assert ll_a == pytest.approx(ll_b, abs=1e-2, rel=1e-4)

    def test_recovers_known_decay_rate(self):
        # Data generated from the kernel itself: impulse response drawn from
        # N(0, K(truth)), observed through a random regressor plus noise.
        truth = DcHyperParams(c=1.0, alpha=0.7, rho=0.5, lam=0.1)
        init = DcHyperParams(c=1.0, alpha=0.5, rho=0.1, lam=0.3)
        N = 500
        alpha_errors = []
        for seed in range(20):
            ss = np.random.SeedSequence(entropy=seed, spawn_key=(99,))
            s_u, s_g, s_e = ss.spawn(3)
            u = sample_white_noise(N, 1.0, s_u)
            H = build_toeplitz(u)
            K = dc_kernel(truth, N)
            L = np.linalg.cholesky(K + 1e-12 * np.eye(N))
            g = L @ np.random.default_rng(s_g).standard_normal(N)
            y = H @ g + sample_white_noise(N, truth.lam, s_e)
            tuned = tune_hyperparameters(H, y, init, restarts=0, max_iter=100, seed=0)
            alpha_errors.append(abs(tuned.alpha - truth.alpha))
        assert np.median(alpha_errors) <= 0.15
