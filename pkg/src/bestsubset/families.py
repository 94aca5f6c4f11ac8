"""Per-family loss, gradient, and Hessian-weight definitions.

All losses are averaged over samples (1/n scaling) and the ridge term
``lam * ||beta||^2`` is added on top.  The linear predictor is clamped
to [-30, 30] for logistic and poisson before exponentiation, which
bounds every weight and mean away from overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import UsageError

ETA_CLAMP = 30.0
LOGISTIC_WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class ModelFamily:
    """One generalized-linear-model family.

    ``unit_stats(eta, y)`` returns ``(loss, mu, w)`` where loss is the
    mean unpenalized loss, mu the conditional mean, and w the
    nonnegative Hessian weights, all at the (already clamped) linear
    predictor.
    """

    tag: str
    clamp: bool
    unit_stats: Callable

    def clip_eta(self, eta: np.ndarray) -> np.ndarray:
        if self.clamp:
            return np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        return eta


def _gaussian_stats(eta, y):
    r = y - eta
    loss = 0.5 * float(r @ r) / y.shape[0]
    return loss, eta, np.ones_like(eta)


def _logistic_stats(eta, y):
    loss = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
    mu = expit(eta)
    w = np.maximum(mu * (1.0 - mu), LOGISTIC_WEIGHT_FLOOR)
    return loss, mu, w


def _poisson_stats(eta, y):
    mu = np.exp(eta)
    loss = float(np.mean(mu - y * eta))
    return loss, mu, mu


_FAMILIES = {
    "gaussian": ModelFamily("gaussian", clamp=False, unit_stats=_gaussian_stats),
    "logistic": ModelFamily("logistic", clamp=True, unit_stats=_logistic_stats),
    "poisson": ModelFamily("poisson", clamp=True, unit_stats=_poisson_stats),
}


def get_family(tag) -> ModelFamily:
    if isinstance(tag, ModelFamily):
        return tag
    try:
        return _FAMILIES[tag]
    except KeyError:
        raise UsageError(f"unknown family {tag!r}; expected one of {tuple(_FAMILIES)}")


def unpenalized_loss(family, eta: np.ndarray, y: np.ndarray) -> float:
    """Mean family loss at a given linear predictor."""
    fam = get_family(family)
    loss, _, _ = fam.unit_stats(fam.clip_eta(np.asarray(eta, dtype=np.float64)), y)
    return loss


def family_loss_grad_weights(family, X, y, intercept: float, beta: np.ndarray, lam: float = 0.0):
    """Penalized loss, coefficient-space descent direction, and weights.

    Parameters
    ----------
    family : str or ModelFamily
    X : DesignMatrix
    y : ResponseVector or ndarray
    intercept, beta : model at which to evaluate
    lam : ridge penalty on beta (the intercept is never penalized)

    Returns
    -------
    loss : float
        ``mean family loss + lam * ||beta||^2``.
    d : ndarray, length p
        ``X_c^T (y - mu) / n - 2 * lam * beta``, the negative gradient
        of the penalized loss with respect to beta.
    w : ndarray, length n
        Hessian weights at the solution (clamped/floored per family).
    """
    fam = get_family(family)
    yv = y.values if hasattr(y, "values") else np.asarray(y, dtype=np.float64)
    eta = fam.clip_eta(intercept + X.matvec(beta))
    loss, mu, w = fam.unit_stats(eta, yv)
    d = X.t_dot(yv - mu) / X.n
    if lam:
        loss += lam * float(beta @ beta)
        d = d - 2.0 * lam * beta
    return loss, d, w
