"""Polynomial-feature grid search over the logistic selector.

Builds degree 1..3 polynomial and interaction-only feature variants of
the breast-cancer dataset, tunes them by 5-fold cross-validated AUC
with a scikit-learn pipeline, and prints the winning variant and its
score.  Run as ``python -m bestsubset_sklearn.demo``.
"""

from __future__ import annotations

from sklearn.metrics import make_scorer, roc_auc_score
from sklearn.model_selection import GridSearchCV
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import PolynomialFeatures

from .estimators import LogisticRegression


def pipeline_demo(cv: int = 5, verbose: bool = True):
    """Grid-search polynomial feature variants; returns the fitted search.

    Raises a usage error with pointers if the dataset is unavailable.
    """
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError as e:  # pragma: no cover - sklearn always bundles it
        raise ValueError(
            "breast-cancer dataset unavailable; install scikit-learn with its "
            "bundled datasets or fetch the UCI 'wdbc' data"
        ) from e

    X, y = load_breast_cancer(return_X_y=True)
    pipe = Pipeline([
        ("poly", PolynomialFeatures(include_bias=False)),
        ("logreg", LogisticRegression()),
    ])
    param_grid = {
        "poly__interaction_only": [True, False],
        "poly__degree": [1, 2, 3],
    }
    scorer = make_scorer(roc_auc_score, greater_is_better=True)
    search = GridSearchCV(pipe, param_grid, scoring=scorer, cv=cv)
    search.fit(X, y)
    if verbose:
        print([search.best_params_, search.best_score_])
    return search


if __name__ == "__main__":
    pipeline_demo()
