"""Step functions, gain rules, and their reduction identities."""

import numpy as np
import pytest

import ptgsr
from ptgsr import backend
from ptgsr.errors import NonFiniteState, OutOfRange
from ptgsr.filters import ZERO_RESIDUAL_TOL

from conftest import make_stream, random_basis


def run_steps(step, cfg, A_seq, Y, n_nodes):
    state = ptgsr.initial_state(n_nodes)
    states = [state]
    for n in range(len(Y)):
        state = step(state, A_seq[n], Y[n], cfg)
        states.append(state)
    return states


class TestGlmsStep:
    def test_zero_residual_fixed_point(self):
        rng = np.random.default_rng(0)
        A = rng.normal(0, 1, (4, 6))
        state = ptgsr.initial_state(6)
        s = rng.normal(0, 1, 6)
        state = ptgsr.FilterState(
            s_est=s, g_diag=np.zeros(6), h_diag=np.zeros(6)
        )
        out = ptgsr.glms_step(state, A, A @ s, ptgsr.FilterConfig(mu=0.2))
        np.testing.assert_array_equal(out.s_est, s)
        assert out.n == state.n + 1

    def test_orthonormal_contraction(self, basis20):
        """With A = U and mu = 0.5, the error halves every step."""
        u = basis20.eigenvectors
        s_true = np.arange(1.0, 21.0)
        y = u @ s_true
        cfg = ptgsr.FilterConfig(mu=0.5)
        state = ptgsr.initial_state(20)
        err = [np.linalg.norm(s_true - state.s_est)]
        for _ in range(6):
            state = ptgsr.glms_step(state, u, y, cfg)
            err.append(np.linalg.norm(s_true - state.s_est))
        for a, b in zip(err, err[1:]):
            assert b == pytest.approx(0.5 * a, rel=1e-12)

    def test_nonfinite_state_raises(self):
        A = np.array([[1e200, 0.0], [0.0, 1e200]])
        y = np.array([1e200, 1e200])
        state = ptgsr.initial_state(2)
        cfg = ptgsr.FilterConfig(mu=1e200)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteState):
            ptgsr.glms_step(state, A, y, cfg)


class TestLiteratureGains:
    def test_zero_state_all_ones(self):
        state = ptgsr.initial_state(8)
        g = ptgsr.literature_gains(state, ptgsr.FilterConfig(mu=0.1))
        np.testing.assert_allclose(g, np.ones(8))

    def test_equal_magnitudes_all_ones(self):
        s = np.full(5, 3.7)
        state = ptgsr.FilterState(s_est=s, g_diag=np.zeros(5), h_diag=np.zeros(5))
        g = ptgsr.literature_gains(state, ptgsr.FilterConfig(mu=0.1))
        np.testing.assert_allclose(g, np.ones(5))

    def test_mean_is_always_one(self):
        rng = np.random.default_rng(1)
        cfg = ptgsr.FilterConfig(mu=0.1)
        for _ in range(50):
            s = rng.normal(0, rng.uniform(0.01, 10), 12)
            state = ptgsr.FilterState(
                s_est=s, g_diag=np.zeros(12), h_diag=np.zeros(12)
            )
            g = ptgsr.literature_gains(state, cfg)
            assert g.mean() == pytest.approx(1.0, rel=1e-12)
            assert np.all(g > 0)

    def test_large_coefficients_get_larger_gains(self):
        s = np.array([10.0, 0.1, 0.1, 0.1])
        state = ptgsr.FilterState(s_est=s, g_diag=np.zeros(4), h_diag=np.zeros(4))
        g = ptgsr.literature_gains(state, ptgsr.FilterConfig(mu=0.1))
        assert g[0] > g[1]


class TestGmsdGain:
    def test_noise_free_closed_form(self):
        """With C_e = 0: g_i = 1 / (mu * ||A_i||^2), independent of the residual."""
        rng = np.random.default_rng(2)
        A = rng.normal(0, 1, (5, 7))
        s = rng.normal(0, 1, 7)
        y = rng.normal(0, 1, 5)
        mu = 0.05
        state = ptgsr.FilterState(s_est=s, g_diag=np.zeros(7), h_diag=np.zeros(7))
        cfg = ptgsr.FilterConfig(mu=mu, gain_rule="gmsd_optimal", eps_g=0.0)
        g = ptgsr.ptglms_gain(state, A, y, cfg)
        np.testing.assert_allclose(g, 1.0 / (mu * (A**2).sum(axis=0)), rtol=1e-10)

    def test_zero_residual_clamps_to_negative_cap(self):
        """At e = 0 the noise term dominates: raw gain -mu sigma/eps, clamped."""
        rng = np.random.default_rng(3)
        A = rng.normal(0, 1, (4, 5))
        s = rng.normal(0, 1, 5)
        y = A @ s  # exact residual zero
        cfg = ptgsr.FilterConfig(
            mu=0.1, gain_rule="gmsd_optimal", noise_cov=np.full(4, 0.5)
        )
        state = ptgsr.FilterState(s_est=s, g_diag=np.zeros(5), h_diag=np.zeros(5))
        g, raw = ptgsr.ptglms_gain(state, A, y, cfg, return_unclamped=True)
        assert np.all(raw < 0)
        np.testing.assert_array_equal(g, np.full(5, -cfg.gain_cap))
        # and the step itself skips: state unchanged
        out = ptgsr.ptglms_step(state, A, y, cfg)
        np.testing.assert_array_equal(out.s_est, s)
        np.testing.assert_array_equal(out.g_diag, np.zeros(5))

    def test_nonneg_floor(self):
        rng = np.random.default_rng(4)
        A = rng.normal(0, 1, (4, 5))
        s = rng.normal(0, 1, 5)
        y = A @ s + rng.normal(0, 3.0, 4)
        cfg = ptgsr.FilterConfig(
            mu=0.1,
            gain_rule="gmsd_optimal",
            noise_cov=np.full(4, 9.0),
            nonneg_gains=True,
        )
        state = ptgsr.FilterState(s_est=s, g_diag=np.zeros(5), h_diag=np.zeros(5))
        g = ptgsr.ptglms_gain(state, A, y, cfg)
        assert np.all(g >= 0.0)

    def test_scalar_two_iteration_hand_trace(self):
        """N = M = 1, no noise: every quantity reduces to plain arithmetic.

        a = 2, mu = 0.1, s_true = 3, y = 6 always.
        gain = 1/(mu a^2) = 2.5; direction d = gain * mu * a * e = e/2... with
        the residual line search t = (e * a d)/(a d)^2 = 1/(a * 0.5) ... the
        full per-step algebra is written out below step by step.
        """
        a = 2.0
        mu = 0.1
        s_true = 3.0
        A = np.array([[a]])
        y = np.array([a * s_true])
        cfg = ptgsr.FilterConfig(mu=mu, gain_rule="gmsd_optimal", eps_g=0.0)
        state = ptgsr.initial_state(1)

        # iteration 1 by hand
        e0 = a * s_true - a * 0.0            # 6
        z0 = a * e0                          # 12
        m0 = mu * z0                         # 1.2
        g0 = (m0 * m0 / mu) / (m0 * m0 * a * a)   # 1/(mu a^2) = 2.5
        d0 = g0 * m0                         # 3.0
        t0 = (e0 * (a * d0)) / (a * d0) ** 2  # 36/36 -> hits cap 1? = 1/6...
        t0 = min(1.0, t0)
        s1 = 0.0 + t0 * d0
        state = ptgsr.ptglms_step(state, A, y, cfg)
        assert state.s_est[0] == pytest.approx(s1, rel=1e-14)

        # iteration 2 by hand from s1
        e1 = a * s_true - a * s1
        if abs(e1) > ZERO_RESIDUAL_TOL:
            z1 = a * e1
            m1 = mu * z1
            g1 = 1.0 / (mu * a * a)
            d1 = g1 * m1
            t1 = min(1.0, (e1 * (a * d1)) / (a * d1) ** 2)
            s2 = s1 + t1 * d1
        else:
            s2 = s1
        state = ptgsr.ptglms_step(state, A, y, cfg)
        assert state.s_est[0] == pytest.approx(s2, rel=1e-14)
        # scalar exact line search converges in one step
        assert state.s_est[0] == pytest.approx(s_true, abs=1e-12)


class TestReductions:
    """Exact reduction lattice on the step functions (bitwise)."""

    def setup_method(self):
        basis = random_basis(12, 77)
        self.A, self.Y, self.gt, self.noise = make_stream(
            basis, m=8, s_count=10, bandwidth=4, sigma2=0.01, T=60,
            seed=5, policy="per_iteration",
        )
        self.A_seq = list(self.A)

    def traj(self, step, **kw):
        cfg = ptgsr.FilterConfig(mu=0.02, noise_cov=self.noise.covariance, **kw)
        states = run_steps(step, cfg, self.A_seq, self.Y, 12)
        return np.stack([st.s_est for st in states])

    def test_identity_ptglms_equals_glms(self):
        a = self.traj(ptgsr.glms_step)
        b = self.traj(ptgsr.ptglms_step, gain_rule="identity")
        np.testing.assert_array_equal(a, b)

    def test_zero_h_ptgelms_equals_ptglms(self):
        a = self.traj(ptgsr.ptglms_step, gain_rule="gmsd_optimal")
        b = self.traj(
            ptgsr.ptgelms_step, gain_rule="gmsd_optimal", k_history=5,
            force_h_zero=True,
        )
        np.testing.assert_array_equal(a, b)

    def test_k1_ptgelms_equals_ptglms(self):
        a = self.traj(ptgsr.ptglms_step, gain_rule="gmsd_optimal")
        b = self.traj(ptgsr.ptgelms_step, gain_rule="gmsd_optimal", k_history=1)
        np.testing.assert_array_equal(a, b)

    def test_identity_ptgelms_equals_elms(self):
        a = self.traj(ptgsr.elms_step, k_history=5)
        b = self.traj(ptgsr.ptgelms_step, gain_rule="identity", k_history=5)
        np.testing.assert_array_equal(a, b)

    def test_ptgelms_rejects_literature_rule(self):
        with pytest.raises(OutOfRange):
            ptgsr.ptgelms_step(
                ptgsr.initial_state(12),
                self.A[0],
                self.Y[0],
                ptgsr.FilterConfig(mu=0.02, gain_rule="literature", k_history=3),
            )


class TestHistoryRing:
    def test_capacity_and_order(self, basis20):
        A, Y, gt, noise = make_stream(
            basis20, m=10, s_count=12, bandwidth=5, sigma2=0.01, T=10,
            seed=6, policy="per_iteration",
        )
        cfg = ptgsr.FilterConfig(
            mu=0.02, k_history=4, gain_rule="gmsd_optimal",
            noise_cov=noise.covariance,
        )
        state = ptgsr.initial_state(20)
        for n in range(6):
            state = ptgsr.ptgelms_step(state, A[n], Y[n], cfg)
            assert len(state.history) == min(n + 1, 3)
        # newest first: history[0] holds the latest (A, y)
        np.testing.assert_array_equal(state.history[0][1], Y[5])
        np.testing.assert_array_equal(state.history[2][1], Y[3])

    def test_k1_never_stores(self, basis20):
        A, Y, gt, noise = make_stream(
            basis20, m=10, s_count=12, bandwidth=5, sigma2=0.01, T=5, seed=7
        )
        cfg = ptgsr.FilterConfig(mu=0.02, k_history=1, gain_rule="gmsd_optimal")
        state = ptgsr.initial_state(20)
        for n in range(5):
            state = ptgsr.ptgelms_step(state, A[0], Y[n], cfg)
        assert state.history == ()


class TestStepPurity:
    def test_replay_is_bitwise_identical(self, basis20):
        A, Y, gt, noise = make_stream(
            basis20, m=12, s_count=14, bandwidth=6, sigma2=0.01, T=40, seed=8
        )
        cfg = ptgsr.FilterConfig(
            mu=0.02, k_history=3, gain_rule="gmsd_optimal",
            noise_cov=noise.covariance,
        )
        run1 = run_steps(ptgsr.ptgelms_step, cfg, [A[0]] * 40, Y, 20)
        run2 = run_steps(ptgsr.ptgelms_step, cfg, [A[0]] * 40, Y, 20)
        for a, b in zip(run1, run2):
            np.testing.assert_array_equal(a.s_est, b.s_est)

    def test_input_state_not_mutated(self, basis20):
        A, Y, gt, noise = make_stream(
            basis20, m=12, s_count=14, bandwidth=6, sigma2=0.01, T=1, seed=9
        )
        state = ptgsr.initial_state(20)
        snapshot = state.s_est.copy()
        ptgsr.glms_step(state, A[0], Y[0], ptgsr.FilterConfig(mu=0.1))
        np.testing.assert_array_equal(state.s_est, snapshot)


class TestPerStepGmsdComparison:
    def test_optimal_gain_beats_identity_in_early_transient(self, basis20):
        """Ensemble-mean per-step weighted-error decrease: optimal <= plain
        during the transient (the closed-form gain is derived to minimize it)."""
        deltas_opt = []
        deltas_glms = []
        for seed in range(25):
            A, Y, gt, noise = make_stream(
                basis20, m=12, s_count=14, bandwidth=6, sigma2=0.01, T=12,
                seed=100 + seed, policy="per_iteration",
            )
            for name, step, kw in (
                ("opt", ptgsr.ptglms_step, dict(gain_rule="gmsd_optimal")),
                ("glms", ptgsr.glms_step, {}),
            ):
                cfg = ptgsr.FilterConfig(mu=0.01, noise_cov=noise.covariance, **kw)
                state = ptgsr.initial_state(20)
                acc = []
                for n in range(12):
                    new = step(state, A[n], Y[n], cfg)
                    acc.append(
                        ptgsr.gmsd_empirical(gt.s_true, state.s_est, new.s_est, A[n])
                    )
                    state = new
                (deltas_opt if name == "opt" else deltas_glms).append(acc)
        mean_opt = np.mean(deltas_opt, axis=0)
        mean_glms = np.mean(deltas_glms, axis=0)
        assert np.all(mean_opt <= mean_glms + 1e-12)
