import numpy as np
import pytest

from bestsubset import family_loss_grad_weights, get_family, unpenalized_loss
from conftest import dm, rv


def fd_gradient(family, X, y, b0, beta, lam, step=1e-6):
    """Central finite differences of the penalized loss in beta."""
    g = np.zeros_like(beta)
    for j in range(beta.size):
        hi, lo = beta.copy(), beta.copy()
        hi[j] += step
        lo[j] -= step
        lh, _, _ = family_loss_grad_weights(family, X, y, b0, hi, lam)
        ll, _, _ = family_loss_grad_weights(family, X, y, b0, lo, lam)
        g[j] = (lh - ll) / (2 * step)
    return g


def random_point(seed, family, n=25, p=6):
    rng = np.random.default_rng(seed)
    X = dm(rng.standard_normal((n, p)))
    beta = 0.3 * rng.standard_normal(p)
    b0 = 0.2 * rng.standard_normal()
    if family == "gaussian":
        y = rng.standard_normal(n)
    elif family == "logistic":
        y = rng.integers(0, 2, n).astype(float)
        if y.sum() in (0, n):
            y[0] = 1 - y[0]
    else:
        y = rng.poisson(1.5, n).astype(float)
    return X, rv(y, family=family), b0, beta


class TestGaussian:
    def test_identity_design_at_zero(self):
        X = dm(np.eye(2))
        y = rv([2.0, 3.0], family="gaussian")
        loss, d, w = family_loss_grad_weights("gaussian", X, y, 0.0, np.zeros(2), 0.0)
        assert loss == pytest.approx(3.25)
        assert np.allclose(d, [1.0, 1.5])
        assert np.array_equal(w, [1.0, 1.0])


class TestLogistic:
    def test_symmetry_at_zero(self):
        rng = np.random.default_rng(0)
        X = dm(rng.standard_normal((10, 3)))
        y = rv(np.array([0, 1] * 5, dtype=float), family="logistic")
        loss, d, w = family_loss_grad_weights("logistic", X, y, 0.0, np.zeros(3), 0.0)
        assert loss == pytest.approx(np.log(2.0))
        assert np.allclose(w, 0.25)

    def test_weight_floor_under_saturation(self):
        X = dm(np.array([[50.0], [-50.0], [50.0], [-50.0]]))
        y = rv([1.0, 0.0, 1.0, 0.0], family="logistic")
        _, _, w = family_loss_grad_weights("logistic", X, y, 0.0, np.array([10.0]), 0.0)
        assert np.all(w >= 1e-6)


class TestPoisson:
    def test_loss_and_mu(self):
        X = dm(np.array([[1.0], [0.0]]))
        y = rv([2.0, 1.0], family="poisson")
        b = np.array([np.log(2.0)])
        loss, d, w = family_loss_grad_weights("poisson", X, y, 0.0, b, 0.0)
        # eta = (log 2, 0), mu = (2, 1): loss = mean(mu - y*eta)
        assert loss == pytest.approx(((2 - 2 * np.log(2)) + 1) / 2)
        assert np.allclose(w, [2.0, 1.0])

    def test_clamp_prevents_overflow(self):
        X = dm(np.array([[100.0], [-100.0]]))
        y = rv([1.0, 0.0], family="poisson")
        loss, d, w = family_loss_grad_weights("poisson", X, y, 0.0, np.array([5.0]), 0.0)
        assert np.isfinite(loss) and np.all(np.isfinite(d)) and np.all(np.isfinite(w))


@pytest.mark.parametrize("family", ["gaussian", "logistic", "poisson"])
@pytest.mark.parametrize("lam", [0.0, 0.05])
def test_gradient_matches_finite_differences(family, lam):
    for seed in range(100):
        X, y, b0, beta = random_point(seed, family)
        _, d, _ = family_loss_grad_weights(family, X, y, b0, beta, lam)
        fd = fd_gradient(family, X, y, b0, beta, lam)
        # d is the negative gradient
        err = np.linalg.norm(fd + d) / max(np.linalg.norm(d), 1e-8)
        assert err < 1e-5


def test_unpenalized_loss_matches_family_loss():
    X, y, b0, beta = random_point(3, "logistic")
    loss, _, _ = family_loss_grad_weights("logistic", X, y, b0, beta, 0.0)
    eta = b0 + X.matvec(beta)
    assert unpenalized_loss("logistic", eta, y.values) == pytest.approx(loss, abs=1e-14)


def test_unknown_family_rejected():
    from bestsubset import UsageError

    with pytest.raises(UsageError, match="unknown family"):
        get_family("gamma")
