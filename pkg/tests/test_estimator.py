import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from vgc import BivariateLogNormal, Gamma, Normal, ParameterError, ReferenceCdf, VariationalCopula


@pytest.fixture(scope="module")
def fitted_bvln():
    return VariationalCopula(margins="exponential", iterations=3000, seed=1).fit(
        BivariateLogNormal(0.1, 0.1, 0.5, 0.5, 0.4)
    )


class TestVariationalCopula:
    def test_params_roundtrip(self):
        est = VariationalCopula(k=7, scheme="analytic")
        assert est.get_params()["k"] == 7
        c = clone(est)
        assert c.get_params() == est.get_params()
        assert c.set_params(k=3).k == 3

    def test_unfitted(self):
        with pytest.raises(NotFittedError):
            VariationalCopula().sample(3)

    def test_fit_requires_model(self):
        with pytest.raises(ParameterError):
            VariationalCopula().fit(np.ones((3, 2)))
        with pytest.raises(ParameterError):
            VariationalCopula(init_scale=0).fit(Gamma())

    def test_fitted_attributes(self, fitted_bvln):
        est = fitted_bvln
        assert est.n_features_in_ == 2 and est.n_iter_ == 3000
        assert est.trace_.iters[-1] == 3000
        assert est.correlation_[1, 0] == pytest.approx(0.4, abs=0.1)

    def test_transform_roundtrip(self, fitted_bvln, rng):
        x = np.exp(rng.normal(0, 0.5, (20, 2)))
        z = fitted_bvln.transform(x)
        np.testing.assert_allclose(fitted_bvln.inverse_transform(z), x, rtol=1e-10)
        np.testing.assert_allclose(z, np.log(x), rtol=1e-12)

    def test_wrong_column_count(self, fitted_bvln):
        with pytest.raises(ParameterError):
            fitted_bvln.transform(np.ones((2, 3)))

    def test_sample_and_score(self, fitted_bvln):
        x = fitted_bvln.sample(100, random_state=0)
        assert x.shape == (100, 2) and np.all(x > 0)
        assert fitted_bvln.score_samples(x).shape == (100,)
        assert fitted_bvln.score() > -0.05

    def test_gaussian_identity_fit(self):
        est = VariationalCopula(margins="identity", iterations=5000, init_scale=1.0, seed=11).fit(Normal(2.0, 0.5))
        assert est.state_.mu[0] == pytest.approx(2.0, abs=0.05)
        assert est.state_.C[0, 0] == pytest.approx(0.5, abs=0.05)
        assert est.transform([2.0]).shape == (1, 1)

    def test_reference_broadcast(self):
        est = VariationalCopula(k=4, iterations=10, reference=ReferenceCdf.exponential(2.0)).fit(Gamma())
        assert est.state_.transforms[0].ref.rate == 2.0

    def test_deterministic(self):
        a = VariationalCopula(k=5, iterations=200, seed=3).fit(Gamma(5, 2))
        b = VariationalCopula(k=5, iterations=200, seed=3).fit(Gamma(5, 2))
        np.testing.assert_array_equal(a.state_.transforms[0].omega, b.state_.transforms[0].omega)
