"""Shared helpers: instance generators and independent oracles.

Oracles here deliberately avoid the library's solver paths: least
squares goes through numpy's lstsq on an explicit intercept-augmented
matrix, eigenvalues through numpy's dense symmetric solver, and subset
optima through exhaustive enumeration.
"""

import itertools

import numpy as np
import pytest

from bestsubset import DesignMatrix, ResponseVector, normalize


def dm(arr, **kw):
    return DesignMatrix(np.asarray(arr, dtype=float), **kw)


def rv(arr, family=None):
    return ResponseVector(np.asarray(arr, dtype=float), family=family)


def make_gaussian_instance(seed, n=100, p=10, k=3, coef_range=(1.0, 3.0), noise_sd=1.0):
    """Sparse linear model with +-Uniform(coef_range) signs on the first k columns."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    mags = rng.uniform(coef_range[0], coef_range[1], size=k)
    signs = rng.choice([-1.0, 1.0], size=k)
    beta[:k] = mags * signs
    y = X @ beta + noise_sd * rng.standard_normal(n)
    return X, y, beta


def ols_loss_with_intercept(B, y, lam=0.0):
    """Oracle penalized loss of the exact ridge fit on columns B plus intercept."""
    n = len(y)
    A = np.column_stack([np.ones(n), B])
    if lam == 0.0:
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    else:
        k = B.shape[1]
        P = np.zeros((k + 1, k + 1))
        P[1:, 1:] = 2.0 * n * lam * np.eye(k)
        coef = np.linalg.solve(A.T @ A + P, A.T @ y)
    r = y - A @ coef
    return 0.5 * float(r @ r) / n + lam * float(coef[1:] @ coef[1:])


def exhaustive_min_loss(Xc, y, s, lam=0.0):
    """Minimum penalized gaussian loss over all size-s column subsets."""
    p = Xc.shape[1]
    best = np.inf
    best_sup = None
    for sup in itertools.combinations(range(p), s):
        loss = ols_loss_with_intercept(Xc[:, list(sup)], y, lam)
        if loss < best:
            best, best_sup = loss, sup
    return best, best_sup


def standardized(X, y, family="gaussian"):
    """Normalize a raw (ndarray, ndarray) pair; returns (Xn, yn, back)."""
    return normalize(dm(X), rv(y, family=family))


def random_psd(seed, p=10, rank=None):
    rng = np.random.default_rng(seed)
    r = rank or p
    A = rng.standard_normal((p, r))
    return (A @ A.T) / r


@pytest.fixture
def tiny_csv(tmp_path):
    f = tmp_path / "tiny.csv"
    f.write_text("a,b,y\n1,0,2\n0,1,3\n1,1,5\n")
    return f
