"""Best-subset selection by splicing for sparse GLMs and sparse PCA."""

from .data import (
    BackTransform,
    DesignMatrix,
    FoldAssignment,
    GroupStructure,
    ResponseVector,
    default_screen_size,
    load_csv,
    load_groups,
    load_sparse,
    make_folds,
    normalize,
    save_csv,
    sis_screen,
)
from .engine import (
    ActiveModel,
    SacrificeTable,
    SplicingConfig,
    compute_sacrifices,
    fit_on_active,
    solve_fixed_support,
    splice_once,
    tau_threshold,
)
from .errors import BestSubsetError, DataError, NumericalError, UsageError
from .families import family_loss_grad_weights, get_family, unpenalized_loss
from .selection import (
    IC_KINDS,
    PathEntry,
    SelectionReport,
    cross_validate,
    deviance,
    gsection_search,
    information_criterion,
    path_search,
)
from .spca import (
    CovarianceView,
    SparseLoading,
    covariance_from_data,
    deflate,
    leading_eig,
    spca_fixed_support,
    spca_path,
)

__version__ = "0.1.0"

__all__ = [
    "BackTransform",
    "DesignMatrix",
    "FoldAssignment",
    "GroupStructure",
    "ResponseVector",
    "default_screen_size",
    "load_csv",
    "load_groups",
    "load_sparse",
    "make_folds",
    "normalize",
    "save_csv",
    "sis_screen",
    "ActiveModel",
    "SacrificeTable",
    "SplicingConfig",
    "compute_sacrifices",
    "fit_on_active",
    "solve_fixed_support",
    "splice_once",
    "tau_threshold",
    "BestSubsetError",
    "DataError",
    "NumericalError",
    "UsageError",
    "family_loss_grad_weights",
    "get_family",
    "unpenalized_loss",
    "IC_KINDS",
    "PathEntry",
    "SelectionReport",
    "cross_validate",
    "deviance",
    "gsection_search",
    "information_criterion",
    "path_search",
    "CovarianceView",
    "SparseLoading",
    "covariance_from_data",
    "deflate",
    "leading_eig",
    "spca_fixed_support",
    "spca_path",
    "__version__",
]
