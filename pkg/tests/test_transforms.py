import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from vgc.errors import DomainError, InvariantError, RangeError, VariantError
from vgc.specfun import ReferenceCdf
from vgc.transforms import (
    BernsteinTransform,
    ExponentialTransform,
    IdentityTransform,
    MarginalTransform,
    bp_cdf,
    bp_pdf,
    check_simplex,
    default_transform,
)

from conftest import central_diff, close

PHI0 = 1.0 / math.sqrt(2.0 * math.pi)
REFS = {
    "normal": ReferenceCdf.std_normal(),
    "exp": ReferenceCdf.exponential(1.0),
    "beta22": ReferenceCdf.beta22(),
}


def random_bp(rng, ref=None, kmax=20):
    k = int(rng.integers(1, kmax + 1))
    w = rng.dirichlet(np.full(k, 1.0))
    if ref is None:
        ref = list(REFS.values())[int(rng.integers(0, 3))]
    return BernsteinTransform(k, w, ref)


class TestBernsteinCdf:
    def test_uniform_weights_identity(self):
        assert bp_cdf(0.4, 5, np.full(5, 0.2)) == pytest.approx(0.4, abs=1e-15)

    def test_first_basis(self):
        # I_u(1, 2) = 1 - (1 - u)^2
        assert bp_cdf(0.5, 2, [1.0, 0.0]) == pytest.approx(0.75, abs=1e-15)

    @pytest.mark.parametrize("k", [1, 3, 10])
    def test_upper_boundary(self, k, rng):
        assert bp_cdf(1.0, k, rng.dirichlet(np.ones(k))) == pytest.approx(1.0, abs=1e-15)
        assert bp_cdf(0.0, k, rng.dirichlet(np.ones(k))) == 0.0

    def test_errors(self):
        with pytest.raises(DomainError):
            bp_cdf(1.2, 2, [0.5, 0.5])
        with pytest.raises(InvariantError):
            bp_cdf(0.5, 2, [0.7, 0.7])
        with pytest.raises(InvariantError):
            bp_cdf(0.5, 2, [1.2, -0.2])
        with pytest.raises(InvariantError):
            bp_cdf(0.5, 3, [0.5, 0.5])

    @given(st.integers(1, 15), st.integers(0, 2**32 - 1))
    def test_monotone_in_u(self, k, seed):
        w = np.random.default_rng(seed).dirichlet(np.ones(k))
        u = np.linspace(0, 1, 101)
        assert np.all(np.diff(bp_cdf(u, k, w)) >= -1e-15)


class TestBernsteinPdf:
    def test_uniform_weights_constant(self):
        assert bp_pdf(0.3, 7, np.full(7, 1 / 7)) == pytest.approx(1.0, abs=1e-13)

    def test_first_basis(self):
        # beta(0.5; 1, 2) = 2(1 - u) = 1
        assert bp_pdf(0.5, 2, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-14)

    def test_interior_basis_vanishes_at_zero(self):
        assert bp_pdf(0.0, 3, [0.0, 1.0, 0.0]) == 0.0

    @given(st.integers(1, 20), st.integers(0, 2**32 - 1))
    def test_integrates_to_one(self, k, seed):
        w = np.random.default_rng(seed).dirichlet(np.ones(k))
        q, _ = integrate.quad(lambda u: bp_pdf(u, k, w), 0, 1, limit=200)
        assert q == pytest.approx(1.0, abs=1e-9)

    def test_is_derivative_of_cdf(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 15))
            w = rng.dirichlet(np.ones(k))
            for u in np.linspace(0.05, 0.95, 7):
                fd = central_diff(lambda s: bp_cdf(s, k, w), u, 1e-6)
                assert bp_pdf(u, k, w) == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestForward:
    def test_identity_configuration(self):
        assert BernsteinTransform(10).forward(1.3) == pytest.approx(1.3, abs=1e-12)

    def test_exponential_reference_median(self):
        t = BernsteinTransform(10, ref=REFS["exp"])
        assert t.forward(0.0) == pytest.approx(0.6931, abs=1e-4)
        assert t.forward(0.0) == pytest.approx(math.log(2.0), rel=1e-14)

    def test_exponential_variant(self):
        assert ExponentialTransform().forward(0.1) == pytest.approx(1.1052, abs=1e-4)
        assert ExponentialTransform().forward(0.1) == pytest.approx(math.exp(0.1), rel=1e-15)

    def test_identity_variant(self):
        assert IdentityTransform().forward(-2.5) == -2.5

    def test_non_finite_input(self):
        with pytest.raises(DomainError):
            BernsteinTransform(3).forward(np.nan)

    @pytest.mark.parametrize("name", list(REFS))
    def test_range_matches_reference_support(self, name, rng):
        ref = REFS[name]
        lo, hi = ref.support.bounds
        for _ in range(20):
            t = random_bp(rng, ref)
            x = t.forward(np.linspace(-9, 9, 200))
            assert np.all(x >= lo) and np.all(x <= hi)
            if np.isfinite(lo):
                assert np.all(x[:150] > lo)
            if np.isfinite(hi):
                assert np.all(x[50:] < hi)

    def test_strictly_increasing(self, rng):
        grid = np.sort(rng.uniform(-4, 4, 1000))
        for _ in range(100):
            t = random_bp(rng)
            assert np.all(np.diff(t.forward(grid)) > 0)

    @pytest.mark.parametrize("k", range(1, 21))
    def test_identity_reduction(self, k):
        z = np.linspace(-5, 5, 401)
        np.testing.assert_allclose(BernsteinTransform(k).forward(z), z, rtol=0, atol=1e-9)
        np.testing.assert_allclose(BernsteinTransform(k).deriv(z), 1.0, rtol=0, atol=1e-9)


class TestDerivatives:
    def test_identity_configuration(self):
        t = BernsteinTransform(10)
        for z in [-3.0, 0.0, 2.2]:
            assert t.deriv(z) == pytest.approx(1.0, abs=1e-12)
        assert t.second_deriv(0.7) == pytest.approx(0.0, abs=1e-10)
        assert t.log_deriv_grad_z(0.7) == pytest.approx(0.0, abs=1e-10)

    def test_exponential_reference_slope(self):
        # phi(0) / psi(ln 2) = 0.39894 / 0.5
        t = BernsteinTransform(10, ref=REFS["exp"])
        assert t.deriv(0.0) == pytest.approx(0.7979, abs=1e-4)
        assert t.deriv(0.0) == pytest.approx(2 * PHI0, rel=1e-13)

    def test_log_deriv_finite_when_basis_underflows(self):
        # b = 10 (1 - u)^9 underflows past z = 13 but its log does not
        t = BernsteinTransform(10, np.eye(10)[0], REFS["beta22"])
        ev = t.evaluate(np.array([14.0]))
        expected = math.log(10) + 9 * special.log_ndtr(-14.0) - 98.0 - 0.5 * math.log(2 * math.pi)
        expected -= t.ref.logpdf(ev.h)[0]
        assert np.isfinite(expected)
        assert ev.log_dh[0] == pytest.approx(expected, rel=1e-12)

    def test_exponential_variant(self):
        t = ExponentialTransform()
        assert t.deriv(0.0) == 1.0
        assert t.second_deriv(0.1) == pytest.approx(1.1052, abs=1e-4)
        for z in [-3.0, 0.0, 4.0]:
            assert t.log_deriv_grad_z(z) == 1.0

    def test_identity_variant(self):
        t = IdentityTransform()
        assert t.deriv(3.0) == 1.0
        assert t.second_deriv(3.0) == 0.0
        assert t.log_deriv_grad_z(3.0) == 0.0

    def test_second_derivative_two_weights(self):
        t = BernsteinTransform(2, [0.3, 0.7], REFS["exp"])
        fd = central_diff(t.deriv, 0.4, 1e-5)
        assert t.second_deriv(0.4) == pytest.approx(fd, rel=1e-7)

    def test_log_slope_gradient_three_weights(self):
        t = BernsteinTransform(3, [0.2, 0.5, 0.3], REFS["exp"])
        fd = central_diff(lambda z: math.log(t.deriv(z)), -0.3, 1e-5)
        assert t.log_deriv_grad_z(-0.3) == pytest.approx(fd, rel=1e-7)

    def test_vanishing_density_reports_overflow(self):
        # with only the middle basis of degree 3, b(u) = 6u(1-u) > 0 in (0,1),
        # but the log-slope gradient blows up where Phi(z) rounds to 0
        t = BernsteinTransform(3, [0.0, 1.0, 0.0], REFS["normal"])
        from vgc.errors import DerivativeOverflowError

        with pytest.raises(DerivativeOverflowError) as info:
            t.log_deriv_grad_z(-40.0)
        assert info.value.z == -40.0

    def test_gradient_consistency(self, rng):
        n = 0
        for _ in range(200):
            t = random_bp(rng)
            z = float(rng.uniform(-4, 4))
            h = 1e-5
            d1 = t.deriv(z)
            assert close(d1, central_diff(t.forward, z, h))
            d2 = t.second_deriv(z)
            assert close(d2, central_diff(t.deriv, z, h))
            dh_dw, dl_dw = t.grad_weights(z)
            s = int(np.argmax(t.omega))
            for r in range(t.k):
                if r == s:
                    continue
                e = np.zeros(t.k)
                e[r], e[s] = 1.0, -1.0
                eps = min(1e-6, t.omega[s] / 2)
                up = t.with_weights(t.omega + eps * e)
                if t.omega[r] >= eps:
                    dn = t.with_weights(t.omega - eps * e)
                    fd_h = (up.forward(z) - dn.forward(z)) / (2 * eps)
                    fd_l = (math.log(up.deriv(z)) - math.log(dn.deriv(z))) / (2 * eps)
                    rel = 1e-4
                else:
                    # one-sided at the simplex face
                    fd_h = (up.forward(z) - t.forward(z)) / eps
                    fd_l = (math.log(up.deriv(z)) - math.log(t.deriv(z))) / eps
                    rel = 1e-3
                assert close(dh_dw[r] - dh_dw[s], fd_h, rel)
                assert close(dl_dw[r] - dl_dw[s], fd_l, rel)
                n += 1
        assert n >= 100


class TestGradWeights:
    def test_single_basis(self):
        dh, _ = BernsteinTransform(1).grad_weights(0.0)
        # I_0.5(1, 1) / phi(0)
        assert dh[0] == pytest.approx(1.2533, abs=1e-4)
        assert dh[0] == pytest.approx(0.5 / PHI0, rel=1e-13)

    def test_uniform_weights_simplex_tangent(self):
        t = BernsteinTransform(6)
        z, eps = 0.35, 1e-6
        _, dl = t.grad_weights(z)
        for r, s in [(0, 5), (1, 3), (4, 2)]:
            e = np.zeros(6)
            e[r], e[s] = 1.0, -1.0
            fd = (math.log(t.with_weights(t.omega + eps * e).deriv(z))
                  - math.log(t.with_weights(t.omega - eps * e).deriv(z))) / (2 * eps)
            assert dl[r] - dl[s] == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("name", ["exp", "beta22"])
    def test_lower_tail_limit(self, name, rng):
        for _ in range(20):
            t = random_bp(rng, REFS[name])
            dh, _ = t.grad_weights(-8.0)
            assert np.all(np.abs(dh) < 1e-6)

    def test_lower_tail_normal_reference_is_mills_ratio(self):
        # psi(h) vanishes along with I_u, leaving Phi(z) / phi(z) for k = 1;
        # z = -7 keeps Phi(z) above the quantile clamp
        dh, _ = BernsteinTransform(1).grad_weights(-7.0)
        assert dh[0] == pytest.approx(stats.norm.cdf(-7.0) / stats.norm.pdf(-7.0), rel=1e-10)

    def test_variant_errors(self):
        with pytest.raises(VariantError):
            ExponentialTransform().grad_weights(0.0)
        with pytest.raises(VariantError):
            IdentityTransform().grad_weights(0.0)


class TestInverse:
    def test_exponential(self):
        assert ExponentialTransform().inverse(1.0) == 0.0

    def test_identity_configuration(self):
        assert BernsteinTransform(10).inverse(0.37) == pytest.approx(0.37, abs=1e-10)

    def test_two_weight_round_trip(self):
        t = BernsteinTransform(2, [0.3, 0.7], REFS["exp"])
        z = t.inverse(0.9)
        assert abs(t.forward(z) - 0.9) <= 1e-10

    def test_round_trips(self, rng):
        for _ in range(50):
            t = random_bp(rng)
            x = t.forward(rng.uniform(-4, 4, 20))
            back = t.forward(t.inverse(x))
            assert np.all(np.abs(back - x) <= 1e-10 * np.maximum(1.0, np.abs(x)))

    def test_range_errors(self):
        with pytest.raises(RangeError):
            ExponentialTransform().inverse(-1.0)
        with pytest.raises(RangeError):
            BernsteinTransform(3, ref=REFS["beta22"]).inverse(1.5)
        with pytest.raises(RangeError):
            BernsteinTransform(3, ref=REFS["exp"]).inverse(0.0)


class TestPushForward:
    @pytest.mark.parametrize("name", list(REFS))
    def test_empirical_cdf_matches_quadrature(self, name):
        rng = np.random.default_rng(7)
        t = BernsteinTransform(5, rng.dirichlet(np.ones(5)), REFS[name])

        def dens(x):
            z = t.inverse(x)
            return stats.norm.pdf(z) / t.deriv(z)

        lo = t.support.bounds[0]
        lo = t.forward(-12.0) if not np.isfinite(lo) else lo

        def cdf_exact(x):
            return stats.norm.cdf(t.inverse(x))

        for x in t.forward(np.linspace(-2.5, 2.5, 8)):
            q, _ = integrate.quad(dens, lo, x, limit=200)
            assert q == pytest.approx(cdf_exact(x), abs=1e-6)
        draws = t.forward(rng.standard_normal(100_000))
        assert stats.kstest(draws, cdf_exact).statistic < 0.01


class TestSerialization:
    def test_round_trip(self, rng):
        for t in [IdentityTransform(), ExponentialTransform(), random_bp(rng), random_bp(rng, REFS["exp"])]:
            d = t.to_dict()
            assert set(d) == {"variant", "k", "omega", "ref_family", "ref_rate"}
            t2 = MarginalTransform.from_dict(d)
            z = np.linspace(-2, 2, 5)
            np.testing.assert_array_equal(t.forward(z), t2.forward(z))

    def test_unknown_variant(self):
        with pytest.raises(VariantError):
            MarginalTransform.from_dict({"variant": "spline"})

    def test_default_transform(self):
        from vgc.specfun import Support

        assert isinstance(default_transform(Support.POSITIVE, "exponential"), ExponentialTransform)
        t = default_transform(Support.UNIT)
        assert isinstance(t, BernsteinTransform) and t.k == 10


def test_check_simplex_tolerance():
    check_simplex([0.5, 0.5 + 1e-13])
    with pytest.raises(InvariantError):
        check_simplex([0.5, 0.5 + 1e-11])
    with pytest.raises(InvariantError):
        check_simplex([])
