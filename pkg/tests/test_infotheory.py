import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faprec.channel import ChannelStatistics
from faprec.constellation import difference_set, enumerate_vectors, make_constellation
from faprec.errors import ConfigError, PreconditionError
from faprec.harness.config import sigma2_from_snr_db
from faprec.harness.properties import fd_grad_lambda_error, fd_grad_unitary_error
from faprec.infotheory import (
    LN2,
    BoundContext,
    average_mi,
    grad_lambda,
    grad_unitary,
    instantaneous_mi,
    instantaneous_mi_given_noise,
    jensen_gap,
    lower_bound,
    lower_bound_gram,
    lower_bound_precoder,
    lower_bound_shifted,
    mi_samples,
    min_distance,
)
from faprec.optim import assemble_precoder, haar_unitary, optimize_unitary, random_start, riemannian_gradient, two_step
from faprec.streams import complex_normal, substream

BOUND_FLOOR = -0.88539
BOUND_CEILING = 3.11461


@pytest.fixture(scope="module")
def bpsk1():
    return difference_set(enumerate_vectors(make_constellation("bpsk"), 1))


def _bpsk_awgn_mi_oracle(sigma2, n_nodes=80):
    """Gauss-Hermite value of 1 - E log2(1 + exp(-(4 + 4 a) / sigma2)), a ~ N(0, sigma2 / 2)."""
    t, w = np.polynomial.hermite.hermgauss(n_nodes)
    a = t * np.sqrt(sigma2)
    vals = np.logaddexp(0.0, -(4.0 + 4.0 * a) / sigma2) / LN2
    return 1.0 - (w @ vals) / np.sqrt(np.pi)


class TestConstants:
    def test_jensen_gap(self):
        assert jensen_gap(2) == pytest.approx(0.88539, abs=5e-6)
        assert 4 - jensen_gap(2) == pytest.approx(3.11461, abs=5e-6)

    def test_gaussian_expectation_identity(self):
        # E exp(-|v + n|^2 / s2) = 2^-Nr exp(-|v|^2 / (2 s2)): the source of the +Nr in the constant
        rng = substream(21, 0)
        for s2 in (0.5, 2.0):
            v = np.array([0.3 - 0.4j, 1.1 + 0.2j])
            n = complex_normal(rng, (400_000, 2), s2)
            vals = np.exp(-np.sum(np.abs(v + n) ** 2, axis=1) / s2)
            exact = 0.25 * np.exp(-np.sum(np.abs(v) ** 2) / (2 * s2))
            assert abs(vals.mean() - exact) < 3 * vals.std() / np.sqrt(vals.size)


class TestInstantaneousMI:
    def test_zero_channel(self, qpsk2, rng):
        assert instantaneous_mi(np.zeros((2, 2)), np.eye(2), qpsk2, 1.0, 5, rng) == 0.0

    def test_saturation(self, qpsk2, rng):
        h = np.array([[1.0, 0.3], [0.2 - 0.5j, 0.9]])
        mi = instantaneous_mi(h, np.eye(2), qpsk2, sigma2_from_snr_db(60), 10, rng)
        assert mi == pytest.approx(4.0, abs=1e-3)
        assert mi <= 4.0

    def test_bpsk_quadrature_oracle(self, bpsk1):
        rng = substream(5, 0)
        per = np.array([instantaneous_mi(np.ones((1, 1)), np.ones((1, 1)), bpsk1, 1.0, 1, rng)
                        for _ in range(20_000)])
        oracle = _bpsk_awgn_mi_oracle(1.0)
        assert oracle == pytest.approx(0.7214516, abs=1e-6)  # scipy.integrate.quad of the same integral
        assert abs(per.mean() - oracle) < 3 * per.std(ddof=1) / np.sqrt(per.size)

    def test_bpsk_oracle_converged(self):
        assert _bpsk_awgn_mi_oracle(1.0, 60) == pytest.approx(_bpsk_awgn_mi_oracle(1.0, 120), abs=1e-8)

    def test_receive_unitary_invariance(self, qpsk2, rng):
        for _ in range(5):
            h = complex_normal(rng, (2, 2))
            p = haar_unitary(2, rng)
            noise = complex_normal(rng, (16, 6, 2))
            q = haar_unitary(2, rng)
            a = instantaneous_mi_given_noise(h, p, qpsk2, 0.7, noise)
            b = instantaneous_mi_given_noise(q @ h, p, qpsk2, 0.7, noise @ q.T)
            assert abs(a - b) <= 1e-10

    def test_shared_noise_shape(self, qpsk2, rng):
        h = complex_normal(rng, (2, 2))
        noise = complex_normal(rng, (4, 2))
        a = instantaneous_mi_given_noise(h, np.eye(2), qpsk2, 1.0, noise)
        b = instantaneous_mi_given_noise(h, np.eye(2), qpsk2, 1.0, np.broadcast_to(noise, (16, 4, 2)))
        assert a == b

    @pytest.mark.parametrize("sigma2", [0.0, -1.0])
    def test_rejects_sigma2(self, qpsk2, rng, sigma2):
        with pytest.raises(ConfigError):
            instantaneous_mi(np.eye(2), np.eye(2), qpsk2, sigma2, 2, rng)

    def test_rejects_noise_draws(self, qpsk2, rng):
        with pytest.raises(ConfigError):
            instantaneous_mi(np.eye(2), np.eye(2), qpsk2, 1.0, 0, rng)


class TestAverageMI:
    def test_low_snr(self, stats22, qpsk2):
        est = average_mi(stats22, qpsk2, np.eye(2), sigma2_from_snr_db(-60), 200, 5, seed=1)
        assert abs(est.mean_bits) <= 3 * est.std_error + 1e-5

    def test_high_snr(self, stats22, qpsk2):
        est = average_mi(stats22, qpsk2, np.eye(2), sigma2_from_snr_db(40), 300, 5, seed=1)
        assert est.mean_bits == pytest.approx(4.0, abs=0.02)

    def test_seed_self_consistency(self, stats22, qpsk2):
        a = average_mi(stats22, qpsk2, np.eye(2), 1.0, 400, 10, seed=1)
        b = average_mi(stats22, qpsk2, np.eye(2), 1.0, 400, 10, seed=2)
        assert a.mean_bits != b.mean_bits
        assert abs(a.mean_bits - b.mean_bits) <= 3 * a.joint_std_error(b)

    def test_reduced_model_agrees(self, stats22, qpsk2, rng):
        lam, v = random_start(2, rng)
        p = assemble_precoder(stats22.u_t, lam, v).matrix
        a = average_mi(stats22, qpsk2, p, 1.0, 400, 10, seed=3)
        b = average_mi(stats22, qpsk2, p, 1.0, 400, 10, seed=4, reduced=True)
        assert abs(a.mean_bits - b.mean_bits) <= 3 * a.joint_std_error(b)

    def test_deterministic_and_chunk_independent(self, stats22, qpsk2):
        a = mi_samples(stats22, qpsk2, np.eye(2), 1.0, 50, 4, seed=8)
        b = mi_samples(stats22, qpsk2, np.eye(2), 1.0, 50, 4, seed=8, workers=3)
        c = mi_samples(stats22, qpsk2, np.eye(2), 1.0, 20, 4, seed=8)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a[:20], c)

    def test_estimate_fields(self, stats22, qpsk2):
        est = average_mi(stats22, qpsk2, np.eye(2), 1.0, 30, 3, seed=0)
        assert (est.n_channel, est.n_noise) == (30, 3)
        assert est.std_error >= 0
        assert est.mean_bits <= 4 + 5 * est.std_error


class TestLowerBound:
    def test_limits(self, ctx_factory, stats22):
        lam, v = np.ones(2), stats22.u_t
        lo = lower_bound(ctx_factory(sigma2_from_snr_db(-60)), lam, v)
        hi = lower_bound(ctx_factory(sigma2_from_snr_db(60)), lam, v)
        # the -60 dB value sits ~6e-6 above the floor (first-order rise), so 1e-5 here
        assert lo == pytest.approx(BOUND_FLOOR, abs=1e-5)
        assert hi == pytest.approx(BOUND_CEILING, abs=1e-6)
        assert lower_bound(ctx_factory(1e12), lam, v) == pytest.approx(-jensen_gap(2), abs=1e-10)

    def test_shifted_limits(self, ctx_factory, stats22):
        lam, v = np.ones(2), np.eye(2)
        assert lower_bound_shifted(ctx_factory(1e12), lam, v) == pytest.approx(0.0, abs=1e-10)
        assert lower_bound_shifted(ctx_factory(1e-8), lam, v) == pytest.approx(4.0, abs=1e-6)
        ctx = ctx_factory(1.0)
        assert lower_bound_shifted(ctx, lam, v) - lower_bound(ctx, lam, v) == pytest.approx(jensen_gap(2))

    def test_reference_loop(self, ctx_factory, stats22, qpsk2, rng):
        # oracle: the printed double sum, one pair at a time, in plain Python
        lam, v = random_start(2, rng)
        sigma2 = 0.6
        d = v @ np.diag(lam * stats22.sigma_t) @ v.conj().T
        x = qpsk2.symbols.vectors
        total = 0.0
        for xm in x:
            inner = 0.0
            for xk in x:
                e = xm - xk
                g = np.real(e.conj() @ d @ e)
                inner += np.prod([1.0 / (1.0 + r * g / (2 * sigma2)) for r in stats22.sigma_r])
            total += np.log2(inner)
        ref = 4 - 2 * (1 / np.log(2) - 1) - total / len(x)
        assert lower_bound(ctx_factory(sigma2), lam, v) == pytest.approx(ref, abs=1e-12)

    def test_gram_and_precoder_forms_agree(self, ctx_factory, stats22, rng):
        ctx = ctx_factory(0.8)
        lam, v = random_start(2, rng)
        p = assemble_precoder(stats22.u_t, lam, v)
        b = lower_bound(ctx, p.lam, p.v_p)
        assert lower_bound_precoder(ctx, p.matrix) == pytest.approx(b, abs=1e-12)
        gram = p.matrix.conj().T @ stats22.psi_t @ p.matrix
        assert lower_bound_gram(ctx, gram) == pytest.approx(b, abs=1e-12)

    def test_identity_precoder_is_u_t(self, ctx_factory, stats22):
        ctx = ctx_factory(1.0)
        assert lower_bound_precoder(ctx, np.eye(2)) == pytest.approx(
            lower_bound(ctx, np.ones(2), stats22.u_t), abs=1e-12)

    def test_no_overflow_at_extremes(self, ctx_factory):
        for s2 in (1e-12, 1e12):
            assert np.isfinite(lower_bound(ctx_factory(s2), np.array([2.0, 0.0]), np.eye(2)))

    def test_preconditions(self, ctx_factory):
        ctx = ctx_factory(1.0)
        with pytest.raises(PreconditionError):
            lower_bound(ctx, np.array([1.5, 1.0]), np.eye(2))
        with pytest.raises(PreconditionError):
            lower_bound(ctx, np.array([2.5, -0.5]), np.eye(2))
        with pytest.raises(PreconditionError):
            lower_bound(ctx, np.ones(2), np.array([[1.0, 0.1], [0.0, 1.0]]))
        with pytest.raises(PreconditionError):
            lower_bound(ctx, np.ones(3), np.eye(2))
        with pytest.raises(ConfigError):
            ctx_factory(0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-30, 30))
    def test_range(self, ctx_factory, seed, snr):
        lam, v = random_start(2, np.random.default_rng(seed))
        b = lower_bound(ctx_factory(sigma2_from_snr_db(snr)), lam, v)
        assert -jensen_gap(2) - 1e-12 <= b <= 4 - jensen_gap(2) + 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_in_snr(self, ctx_factory, seed):
        lam, v = random_start(2, np.random.default_rng(seed))
        vals = [lower_bound(ctx_factory(sigma2_from_snr_db(s)), lam, v) for s in np.arange(-20, 31, 5)]
        assert np.all(np.diff(vals) > 0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_phase_invariance(self, ctx_factory, seed):
        rng = np.random.default_rng(seed)
        lam, v = random_start(2, rng)
        phi = np.exp(2j * np.pi * rng.random(2))
        ctx = ctx_factory(0.5)
        assert abs(lower_bound(ctx, lam, v * phi) - lower_bound(ctx, lam, v)) <= 1e-12

    def test_concavity(self, ctx_factory, rng):
        for i in range(30):
            ctx = ctx_factory(sigma2_from_snr_db((-10, 0, 10)[i % 3]))
            v = haar_unitary(2, rng)
            l1, l2 = (2 * rng.dirichlet(np.ones(2)) for _ in range(2))
            chord = 0.5 * (lower_bound(ctx, l1, v) + lower_bound(ctx, l2, v))
            assert lower_bound(ctx, (l1 + l2) / 2, v) >= chord - 1e-10

    def test_jensen_against_mc(self, stats22, qpsk2, ctx_factory, rng):
        lam, v = random_start(2, rng)
        p = assemble_precoder(stats22.u_t, lam, v)
        est = average_mi(stats22, qpsk2, p.matrix, 1.0, 300, 10, seed=6)
        assert lower_bound(ctx_factory(1.0), p.lam, p.v_p) <= est.mean_bits + 3 * est.std_error

    def test_shifted_tight_at_extremes(self, stats22, qpsk2, ctx_factory):
        for snr in (-10, 20):
            s2 = sigma2_from_snr_db(snr)
            est = average_mi(stats22, qpsk2, np.eye(2), s2, 400, 20, seed=7)
            b = lower_bound_shifted(ctx_factory(s2), np.ones(2), stats22.u_t)
            assert abs(b - est.mean_bits) <= 0.05


class TestGradients:
    @pytest.mark.parametrize("snr", [-10, 0, 10])
    def test_grad_lambda_fd(self, ctx_factory, rng, snr):
        ctx = ctx_factory(sigma2_from_snr_db(snr))
        for _ in range(5):
            lam = 0.1 + 1.8 * rng.dirichlet(np.ones(2))
            d = np.array([1.0, -1.0])
            assert fd_grad_lambda_error(ctx, lam, haar_unitary(2, rng), d) <= 1e-5

    def test_grad_lambda_raw_fd(self, ctx_factory, rng):
        # unconstrained coordinate derivatives, plain relative error
        ctx = ctx_factory(0.7)
        lam, v = np.array([1.3, 0.7]), haar_unitary(2, rng)
        g = grad_lambda(ctx, lam, v)
        h = 1e-6
        fd = [(lower_bound(ctx, lam + h * e, v, check=False) - lower_bound(ctx, lam - h * e, v, check=False))
              / (2 * h) for e in np.eye(2)]
        np.testing.assert_allclose(g, fd, rtol=1e-6)

    @pytest.mark.parametrize("snr", [-10, 0, 10])
    def test_grad_unitary_fd(self, ctx_factory, rng, snr):
        ctx = ctx_factory(sigma2_from_snr_db(snr))
        for _ in range(5):
            lam, v = random_start(2, rng)
            assert fd_grad_unitary_error(ctx, lam, v, complex_normal(rng, (2, 2))) <= 1e-5

    def test_symmetric_gradient_equal(self, qpsk2):
        stats = ChannelStatistics.exponential(2, 2, 0.0, 0.5)
        ctx = BoundContext.from_statistics(stats, qpsk2, 1.0)
        g = grad_lambda(ctx, np.ones(2), np.eye(2))
        assert g[0] == pytest.approx(g[1], rel=1e-12)

    def test_low_snr_gradient_form(self, ctx_factory, stats22, rng):
        sigma2 = sigma2_from_snr_db(-60)
        ctx = ctx_factory(sigma2)
        lam, v = random_start(2, rng)
        g = grad_lambda(ctx, lam, v)
        # Tr(Sigma_r) / (2 sigma2 M**Nt ln2) * (c / M**Nt) * t_i with c = 2 M**(2 Nt)
        pred = stats22.sigma_r.sum() * stats22.sigma_t / (sigma2 * LN2)
        np.testing.assert_allclose(g, pred, rtol=1e-3)

    def test_scalar_d_gives_hermitian(self, qpsk2):
        stats = ChannelStatistics.exponential(2, 2, 0.0, 0.5)
        ctx = BoundContext.from_statistics(stats, qpsk2, 1.0)
        v = haar_unitary(2, substream(3, 1))
        m = v.conj().T @ grad_unitary(ctx, np.ones(2), v)
        np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
        res = optimize_unitary(ctx, np.ones(2), v)
        assert res.iterations == 0 and res.converged
        np.testing.assert_array_equal(res.x, v)

    def test_zero_at_converged_optimum(self, stats22, qpsk2, ctx_factory, rng):
        lam0, v0 = random_start(2, rng)
        rep = two_step(stats22, qpsk2, 1.0, lam0, v0)
        fin = rep.final
        z = riemannian_gradient(fin.v_p, grad_unitary(ctx_factory(1.0), fin.lam, fin.v_p))
        assert np.linalg.norm(z) <= 1e-6


class TestMinDistance:
    def test_bpsk(self, bpsk1):
        assert min_distance(np.ones((1, 1)), np.ones(1), bpsk1) == pytest.approx(4.0)

    def test_qpsk_identity(self, qpsk2):
        assert min_distance(np.eye(2), np.ones(2), qpsk2) == pytest.approx(2.0)

    def test_brute_force(self, qpsk2, stats22, rng):
        pt = np.sqrt([1.5, 0.5])[:, None] * haar_unitary(2, rng)
        a = np.sqrt(stats22.sigma_t)[:, None] * pt
        best = min(np.sum(np.abs(a @ e) ** 2) for m, k, e in qpsk2.pairs() if m != k)
        assert min_distance(pt, stats22.sigma_t, qpsk2) == pytest.approx(best, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
    def test_homogeneity(self, qpsk2, c, seed):
        pt = haar_unitary(2, np.random.default_rng(seed))
        t = np.array([1.8, 0.2])
        assert min_distance(c * pt, t, qpsk2) == pytest.approx(c**2 * min_distance(pt, t, qpsk2), rel=1e-10)
