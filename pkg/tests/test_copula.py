import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from vgc.copula import (
    MIN_DIAG,
    GaussianFactor,
    VgcState,
    correlation_of,
    gaussian_score,
    log_density,
    marginal_pdf,
    push_sample,
)
from vgc.errors import InvariantError, RangeError, SingularFactorError
from vgc.specfun import ReferenceCdf
from vgc.transforms import BernsteinTransform, ExponentialTransform, IdentityTransform

from conftest import fd_gradient

LOG_2PI = math.log(2.0 * math.pi)


def random_lower(rng, p, diag_lo=0.3):
    C = np.tril(rng.normal(size=(p, p)))
    C[np.diag_indices(p)] = rng.uniform(diag_lo, 2.0, p)
    return C


def random_state(rng, p):
    kinds = []
    for _ in range(p):
        c = int(rng.integers(0, 3))
        if c == 0:
            kinds.append(IdentityTransform())
        elif c == 1:
            kinds.append(ExponentialTransform())
        else:
            k = int(rng.integers(1, 8))
            ref = [ReferenceCdf.std_normal(), ReferenceCdf.exponential(2.0), ReferenceCdf.beta22()][int(rng.integers(0, 3))]
            kinds.append(BernsteinTransform(k, rng.dirichlet(np.ones(k)), ref))
    return VgcState.create(rng.normal(size=p), random_lower(rng, p), kinds)


class TestGaussianFactor:
    def test_rejects_upper_entries(self):
        with pytest.raises(InvariantError):
            GaussianFactor([0, 0], [[1, 0.5], [0, 1]])

    def test_rejects_small_diagonal(self):
        with pytest.raises(SingularFactorError):
            GaussianFactor([0, 0], [[1, 0], [0, MIN_DIAG / 2]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvariantError):
            GaussianFactor([0, 0, 0], np.eye(2))

    def test_marginal_sd_is_row_norm(self):
        g = GaussianFactor([0, 0], [[2.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(g.marginal_sd, [2.0, math.sqrt(2.0)])

    def test_logpdf_matches_scipy(self, rng):
        for p in (1, 2, 5):
            C = random_lower(rng, p)
            mu = rng.normal(size=p)
            z = rng.normal(size=(10, p))
            ref = stats.multivariate_normal(mu, C @ C.T).logpdf(z)
            np.testing.assert_allclose(GaussianFactor(mu, C).logpdf(z), ref, rtol=1e-11)

    def test_parameters_are_read_only(self):
        g = GaussianFactor([0.0], [[1.0]])
        with pytest.raises(ValueError):
            g.mu[0] = 3.0


class TestPushSample:
    def test_origin(self):
        s = VgcState.create([0.0, 0.0], np.eye(2), [IdentityTransform(), IdentityTransform()])
        z, x = push_sample(s, [0.0, 0.0])
        np.testing.assert_array_equal(x, [0.0, 0.0])

    def test_exponential_margin(self):
        s = VgcState.create([0.1], [[0.5]], [ExponentialTransform()])
        _, x = push_sample(s, [0.0])
        assert x[0] == pytest.approx(1.1052, abs=1e-4)
        assert x[0] == pytest.approx(math.exp(0.1), rel=1e-15)

    def test_matrix_vector_product(self):
        s = VgcState.create([0.0, 0.0], [[1.0, 0.0], [1.0, 1.0]], [IdentityTransform(), IdentityTransform()])
        z, _ = push_sample(s, [1.0, 1.0])
        np.testing.assert_array_equal(z, [1.0, 2.0])

    def test_batch_in_support(self, rng):
        for _ in range(20):
            s = random_state(rng, 3)
            _, x = s.push_sample(rng.standard_normal((200, 3)))
            for j, sup in enumerate(s.supports):
                assert np.all(sup.contains(x[:, j]))


class TestCorrelation:
    def test_identity(self):
        s = VgcState.create([0, 0, 0], np.eye(3), [IdentityTransform()] * 3)
        np.testing.assert_array_equal(correlation_of(s), np.eye(3))

    def test_two_by_two(self):
        # Sigma = [[4, 2], [2, 2]] -> 2 / (2 sqrt 2)
        s = VgcState.create([0, 0], [[2.0, 0.0], [1.0, 1.0]], [IdentityTransform()] * 2)
        assert correlation_of(s)[1, 0] == pytest.approx(0.7071, abs=1e-4)
        assert correlation_of(s)[1, 0] == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6))
    def test_diagonal_factor_gives_exact_identity(self, d):
        s = VgcState.create(np.zeros(len(d)), np.diag(d), [IdentityTransform()] * len(d))
        assert np.array_equal(correlation_of(s), np.eye(len(d)))

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_valid_correlation_matrix(self, p, seed):
        rng = np.random.default_rng(seed)
        R = correlation_of(VgcState.create(np.zeros(p), random_lower(rng, p, 0.01), [IdentityTransform()] * p))
        np.testing.assert_array_equal(np.diag(R), 1.0)
        np.testing.assert_allclose(R, R.T, atol=1e-15)
        assert np.all(np.abs(R) <= 1.0)

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_row_rescaling_invariance(self, p, seed):
        rng = np.random.default_rng(seed)
        C = random_lower(rng, p)
        A = np.diag(rng.uniform(0.1, 10.0, p))
        t = [IdentityTransform()] * p
        R1 = correlation_of(VgcState.create(np.zeros(p), C, t))
        R2 = correlation_of(VgcState.create(np.zeros(p), A @ C, t))
        np.testing.assert_allclose(R1, R2, atol=1e-10)

    def test_matches_covariance_formula(self, rng):
        C = random_lower(rng, 4)
        S = C @ C.T
        d = np.sqrt(np.diag(S))
        s = VgcState.create(np.zeros(4), C, [IdentityTransform()] * 4)
        np.testing.assert_allclose(correlation_of(s), S / np.outer(d, d), atol=1e-14)


class TestMarginalPdf:
    def test_log_normal_margin(self):
        s = VgcState.create([0.0], [[1.0]], [ExponentialTransform()])
        assert marginal_pdf(s, 0, 1.0) == pytest.approx(0.3989, abs=1e-4)
        assert marginal_pdf(s, 0, 1.0) == pytest.approx(stats.lognorm(1.0).pdf(1.0), rel=1e-14)

    def test_standard_normal_margin(self):
        s = VgcState.create([0.0], [[1.0]], [IdentityTransform()])
        assert marginal_pdf(s, 0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)

    def test_uses_marginal_sd_not_diagonal(self):
        s = VgcState.create([0.0, 0.5], [[1.0, 0.0], [0.6, 0.8]], [IdentityTransform(), ExponentialTransform()])
        # row 2 has norm 1, so coordinate 2 is LN(0.5, 1)
        assert marginal_pdf(s, 1, 2.0) == pytest.approx(stats.lognorm(1.0, scale=math.exp(0.5)).pdf(2.0), rel=1e-13)

    def test_range_error(self):
        s = VgcState.create([0.0], [[1.0]], [ExponentialTransform()])
        with pytest.raises(RangeError):
            marginal_pdf(s, 0, -1.0)

    def test_integrates_to_one(self, rng):
        for _ in range(10):
            s = random_state(rng, 2)
            # moderate latent scales keep the quantile clamp's mass negligible
            s = s.replace(mu=0.5 * s.mu, C=0.5 * s.C)
            for j in range(2):
                t = s.transforms[j]
                sd = s.gauss.marginal_sd[j]
                # piecewise over the images of evenly spaced latent points
                knots = np.unique(t.forward(s.mu[j] + sd * np.linspace(-9, 9, 37)))
                q = sum(integrate.quad(lambda x: marginal_pdf(s, j, x), a, b)[0] for a, b in zip(knots[:-1], knots[1:]))
                assert q == pytest.approx(1.0, abs=1e-4)


class TestLogDensity:
    def test_standard_normal_origin(self):
        s = VgcState.create([0, 0], np.eye(2), [IdentityTransform()] * 2)
        assert log_density(s, [0.0, 0.0]) == pytest.approx(-1.8379, abs=1e-4)
        assert log_density(s, [0.0, 0.0]) == pytest.approx(-LOG_2PI, rel=1e-15)

    def test_log_normal_mode_of_latent(self):
        s = VgcState.create([0, 0], np.eye(2), [ExponentialTransform()] * 2)
        assert log_density(s, [1.0, 1.0]) == pytest.approx(-LOG_2PI, rel=1e-15)

    def test_sklar_form(self):
        mu = np.array([0.2, -0.3])
        C = np.array([[0.7, 0.0], [0.3, 0.5]])
        s = VgcState.create(mu, C, [ExponentialTransform()] * 2)
        sd = np.sqrt(np.sum(C * C, axis=1))
        r = (C @ C.T)[0, 1] / (sd[0] * sd[1])
        cop = stats.multivariate_normal([0, 0], [[1, r], [r, 1]])
        g = np.exp(np.linspace(-1.0, 1.0, 5))
        pts = [(a, b) for a in g for b in g[:4]]
        assert len(pts) == 20
        for x in pts:
            w = stats.norm.ppf(stats.lognorm(sd, scale=np.exp(mu)).cdf(x))
            c = cop.pdf(w) / np.prod(stats.norm.pdf(w))
            f = np.prod(stats.lognorm(sd, scale=np.exp(mu)).pdf(x))
            assert math.exp(log_density(s, x)) == pytest.approx(c * f, rel=1e-10)

    def test_sampling_density_identity(self, rng):
        s = random_state(rng, 3)
        eps = rng.standard_normal((10_000, 3))
        z, x = s.push_sample(eps)
        lq = s.log_density(x)
        jac = sum(t.evaluate(z[:, j]).log_dh for j, t in enumerate(s.transforms))
        ok = np.isfinite(lq)
        resid = lq[ok] - s.gauss.logpdf(z[ok]) + jac[ok]
        assert abs(np.mean(resid)) < 1e-10
        assert ok.mean() > 0.99

    def test_range_error(self):
        s = VgcState.create([0, 0], np.eye(2), [IdentityTransform(), ExponentialTransform()])
        with pytest.raises(RangeError):
            log_density(s, [0.0, -2.0])


class TestGaussianScore:
    def test_standard(self):
        s = VgcState.create([0, 0], np.eye(2), [IdentityTransform()] * 2)
        np.testing.assert_allclose(gaussian_score(s, [1.0, -2.0]), [-1.0, 2.0])

    def test_zero_at_mean(self, rng):
        s = random_state(rng, 4)
        np.testing.assert_array_equal(gaussian_score(s, s.mu), np.zeros(4))

    def test_equals_minus_inverse_transpose_eps(self):
        C = np.array([[2.0, 0.0], [1.0, 1.0]])
        s = VgcState.create([0, 0], C, [IdentityTransform()] * 2)
        eps = np.array([1.0, 0.0])
        z, _ = s.push_sample(eps)
        np.testing.assert_allclose(gaussian_score(s, z), -np.linalg.solve(C.T, eps), rtol=1e-15)
        np.testing.assert_allclose(gaussian_score(s, z), [-0.5, 0.0], atol=1e-15)

    def test_matches_finite_difference(self, rng):
        for _ in range(100):
            s = random_state(rng, 3)
            z = s.mu + rng.normal(size=3)
            fd = fd_gradient(s.gauss.logpdf, z, 1e-6)
            np.testing.assert_allclose(gaussian_score(s, z), fd, rtol=1e-5, atol=1e-8)


class TestSerialization:
    def test_json_round_trip(self, rng):
        s = random_state(rng, 3)
        s2 = VgcState.from_json(s.to_json())
        np.testing.assert_array_equal(s.mu, s2.mu)
        np.testing.assert_array_equal(s.C, s2.C)
        x = s.sample(5, 1)
        np.testing.assert_array_equal(s.log_density(x), s2.log_density(x))

    def test_layout(self):
        s = VgcState.create([1.0, 2.0], [[1.0, 0.0], [0.5, 2.0]], [IdentityTransform(), ExponentialTransform()])
        d = s.to_dict()
        assert d["C_rowmajor_lower"] == [1.0, 0.5, 2.0]
        assert [t["variant"] for t in d["transforms"]] == ["identity", "exponential"]

    def test_wrong_length(self):
        with pytest.raises(InvariantError):
            VgcState.from_dict({"mu": [0, 0], "C_rowmajor_lower": [1, 0], "transforms": [{"variant": "identity"}] * 2})
