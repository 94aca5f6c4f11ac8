"""scikit-learn estimator wrappers for the bestsubset core."""

from .demo import pipeline_demo
from .estimators import LinearRegression, LogisticRegression, PoissonRegression, SparsePCA

__version__ = "0.1.0"

__all__ = [
    "LinearRegression",
    "LogisticRegression",
    "PoissonRegression",
    "SparsePCA",
    "pipeline_demo",
    "__version__",
]
