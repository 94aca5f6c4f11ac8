"""scikit-learn estimator wrappers over the bestsubset core.

The wrappers hold no numerics of their own: fit converts the feature
matrix once into the core's column-major layout, hands everything to
the core's path/cross-validation pipeline, and copies the chosen
model's attributes back out.  Parameters mirror the core's
configuration under scikit-learn naming conventions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.base import ClassNamePrefixFeaturesOutMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from bestsubset import (
    DesignMatrix,
    GroupStructure,
    ResponseVector,
    SplicingConfig,
    covariance_from_data,
    cross_validate,
    default_screen_size,
    deflate,
    make_folds,
    normalize,
    path_search,
    sis_screen,
    spca_fixed_support,
)


def _owned_fortran(X: np.ndarray) -> np.ndarray:
    """The single feature-matrix copy the binding is allowed to make."""
    return np.array(X, dtype=np.float64, order="F", copy=True)


class _BestSubsetBase(BaseEstimator):
    """Shared fit machinery for the supervised selectors."""

    _family = None  # set by subclasses

    def __init__(
        self,
        support_size=None,
        support_range=None,
        ic="gic",
        cv=None,
        screen_size=None,
        groups=None,
        always_include=None,
        alpha=0.0,
        k_max=None,
        max_splice_iter=20,
        tau_const=0.01,
        newton_tol=1e-8,
        newton_max_iter=30,
        threads=1,
        random_state=0,
    ):
        self.support_size = support_size
        self.support_range = support_range
        self.ic = ic
        self.cv = cv
        self.screen_size = screen_size
        self.groups = groups
        self.always_include = always_include
        self.alpha = alpha
        self.k_max = k_max
        self.max_splice_iter = max_splice_iter
        self.tau_const = tau_const
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.threads = threads
        self.random_state = random_state

    def _config(self) -> SplicingConfig:
        return SplicingConfig(
            k_max=self.k_max,
            tau_const=self.tau_const,
            max_splice_iter=self.max_splice_iter,
            lam=self.alpha,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
            seed=self.random_state,
        )

    def _s_list(self, n, selectable):
        from bestsubset.selection import default_s_list

        if self.support_size is not None:
            return [int(self.support_size)]
        if self.support_range is not None:
            lo, hi = self.support_range
            return list(range(int(lo), int(hi) + 1))
        return default_s_list(n, selectable)

    def _groups(self, p):
        nuisance = frozenset(int(g) for g in (self.always_include or ()))
        if self.groups is not None:
            return GroupStructure(np.asarray(self.groups, dtype=int), nuisance)
        return GroupStructure.singletons(p, nuisance)

    def _core_fit(self, X, yv):
        p_full = X.shape[1]
        X_raw = DesignMatrix(_owned_fortran(X))
        y = ResponseVector(yv, family=self._family)

        if self.screen_size is not None:
            m = (
                default_screen_size(X_raw.n, p_full)
                if self.screen_size == "auto"
                else int(self.screen_size)
            )
            Xn_full, yn_full, _ = normalize(X_raw, y)
            col_ids = sis_screen(Xn_full, yn_full, m)
            X_raw = X_raw.take_columns(col_ids)
        else:
            col_ids = np.arange(p_full)

        groups = self._groups(X_raw.p)
        config = self._config()
        s_list = self._s_list(X_raw.n, groups.n_selectable)

        if self.cv:
            strata = yv if self._family == "logistic" else None
            folds = make_folds(X_raw.n, int(self.cv), self.random_state, strata=strata)
            report = cross_validate(
                X_raw, y, self._family, groups, config, s_list, folds,
                threads=max(1, int(self.threads)), col_ids=col_ids, p_for_ic=p_full,
            )
        else:
            Xn, yn, back = normalize(X_raw, y)
            report = path_search(
                Xn, yn, self._family, groups, config, s_list=s_list,
                criterion=self.ic, back=back, col_ids=col_ids, p_for_ic=p_full,
            )

        chosen = report.chosen
        coef = np.zeros(p_full)
        if chosen is not None:
            coef[chosen.support] = chosen.beta
        self.coef_ = coef
        self.intercept_ = 0.0 if chosen is None else float(chosen.intercept)
        self.selected_indices_ = [] if chosen is None else list(chosen.support)
        self.support_size_ = report.chosen_s
        self.converged_ = True if chosen is None else bool(chosen.converged)
        self.report_ = report
        return self

    def _decision(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return self.intercept_ + X @ self.coef_


class LinearRegression(RegressorMixin, _BestSubsetBase):
    """Best-subset linear regression with splicing.

    Parameters mirror the core configuration: ``support_size`` pins the
    number of selected columns, ``support_range`` searches a range, and
    the default searches 0..min(p, n/log n, 100).  ``cv`` switches from
    information-criterion tuning (``ic``) to K-fold cross-validation.
    ``alpha`` is the ridge penalty applied on top of selection.
    """

    _family = "gaussian"

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True,
                             ensure_min_samples=2)
        return self._core_fit(X, np.asarray(y, dtype=np.float64))

    def predict(self, X):
        return self._decision(X)


class PoissonRegression(RegressorMixin, _BestSubsetBase):
    """Best-subset poisson regression; the response must be counts."""

    _family = "poisson"

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True,
                             ensure_min_samples=2)
        return self._core_fit(X, np.asarray(y, dtype=np.float64))

    def predict(self, X):
        return np.exp(np.clip(self._decision(X), -30.0, 30.0))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.positive_only = True
        return tags


class LogisticRegression(ClassifierMixin, _BestSubsetBase):
    """Best-subset binary logistic regression with splicing."""

    _family = "logistic"

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, ensure_min_samples=2)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(
                "Only binary classification is supported. The type of the target "
                f"is multiclass with {self.classes_.shape[0]} classes."
            )
        y01 = (y == self.classes_[1]).astype(np.float64)
        return self._core_fit(X, y01)

    def decision_function(self, X):
        return self._decision(X)

    def predict_proba(self, X):
        eta = np.clip(self._decision(X), -30.0, 30.0)
        p1 = 1.0 / (1.0 + np.exp(-eta))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        p1 = self.predict_proba(X)[:, 1]
        return self.classes_[(p1 >= 0.5).astype(int)]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags


class SparsePCA(ClassNamePrefixFeaturesOutMixin, TransformerMixin, BaseEstimator):
    """Cardinality-constrained PCA: each component has at most
    ``support_size`` nonzero loadings, extracted with projection
    deflation between components."""

    def __init__(self, n_components=1, support_size=1, k_max=None,
                 max_splice_iter=20, random_state=0):
        self.n_components = n_components
        self.support_size = support_size
        self.k_max = k_max
        self.max_splice_iter = max_splice_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        design = DesignMatrix(_owned_fortran(X))
        self.mean_ = X.mean(axis=0)
        view = covariance_from_data(design)
        config = SplicingConfig(
            k_max=self.k_max, max_splice_iter=self.max_splice_iter,
            seed=self.random_state,
        )
        comps, evs = [], []
        s = min(int(self.support_size), design.p)
        for _ in range(int(self.n_components)):
            loading = spca_fixed_support(view, s, config)
            comps.append(loading.v)
            evs.append(loading.explained_variance)
            view = deflate(view, loading)
        self.components_ = np.asarray(comps)
        self.explained_variance_ = np.asarray(evs)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    @property
    def _n_features_out(self):
        return self.components_.shape[0]
