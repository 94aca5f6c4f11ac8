"""Support-size selection along a warm-started path.

Candidate sizes are fitted in ascending order, each solve warm-started
from the previous one, and the winner is picked by an information
criterion or by K-fold cross-validation.  All information criteria
share the deviance scale so their values are directly comparable.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import BackTransform, FoldAssignment, GroupStructure, normalize
from .engine import ActiveModel, SplicingConfig, solve_fixed_support
from .errors import DataError, NumericalError, UsageError
from .families import get_family, unpenalized_loss

IC_KINDS = ("aic", "bic", "gic", "ebic")


def deviance(family, X, y, intercept: float, beta: np.ndarray) -> float:
    """Family deviance at the given coefficients.

    Gaussian: ``n * log(RSS / n)``, with a -inf sentinel for an exact
    interpolating fit.  Logistic and poisson: ``2n`` times the mean
    unpenalized loss.
    """
    fam = get_family(family)
    yv = y.values if hasattr(y, "values") else np.asarray(y, dtype=np.float64)
    eta = fam.clip_eta(intercept + X.matvec(beta))
    n = yv.shape[0]
    if fam.tag == "gaussian":
        r = yv - eta
        rss = float(r @ r)
        if rss == 0.0:
            return float("-inf")
        return n * math.log(rss / n)
    loss, _, _ = fam.unit_stats(eta, yv)
    return 2.0 * n * loss


def information_criterion(dev: float, df: int, n: int, p: int, kind: str) -> float:
    """Deviance plus the penalty of the requested criterion.

    ``df`` counts selected columns (nuisance included, intercept
    excluded).  GIC uses the high-dimensional penalty
    ``2 * log(p) * log(log(n))`` per column; the factor 2 puts the
    penalty on the same scale as the deviance, which is twice the
    negative log-likelihood.
    """
    kind = kind.lower()
    if kind == "aic":
        pen = 2.0
    elif kind == "bic":
        pen = math.log(n)
    elif kind == "gic":
        pen = 2.0 * math.log(p) * math.log(math.log(n))
    elif kind == "ebic":
        pen = math.log(n) + 2.0 * math.log(p)
    else:
        raise UsageError(f"unknown information criterion {kind!r}; expected one of {IC_KINDS}")
    return dev + pen * df


@dataclass
class PathEntry:
    """One support size on the path."""

    s: int
    support: list          # selected column indices, original coordinates
    beta: list             # raw-scale coefficients aligned with ``support``
    intercept: float
    deviance: float
    ic: dict
    converged: bool
    wall_time_ms: float = 0.0
    cv_mean: float | None = None
    cv_sd: float | None = None
    failed: bool = False
    message: str | None = None
    model: ActiveModel | None = field(default=None, repr=False)


@dataclass
class SelectionReport:
    """Path entries plus the chosen support size."""

    entries: list
    chosen_s: int | None
    criterion: str
    seed: int
    family: str
    n: int
    p: int

    @property
    def chosen(self) -> PathEntry | None:
        for e in self.entries:
            if e.s == self.chosen_s and not e.failed:
                return e
        return None


def default_s_list(n: int, selectable: int) -> list:
    """Default path 0..min(G, ceil(n / ln n), 100)."""
    hi = min(selectable, int(math.ceil(n / math.log(n))), 100)
    return list(range(hi + 1))


def argmin_entry(entries, value_of):
    """Smallest key wins; ties break toward the smaller support size."""
    best = None
    for e in entries:
        v = value_of(e)
        if v is None:
            continue
        if best is None or (v, e.s) < best[0]:
            best = ((v, e.s), e)
    return best[1] if best else None


def _make_entry(s, model, X, y, family, groups, back, col_ids, p_ic, elapsed_ms):
    cols = groups.columns_of_groups(model.active)
    dev = deviance(family, X, y, model.intercept, model.beta)
    df = int(cols.size)
    ics = {k: information_criterion(dev, df, X.n, p_ic, k) for k in IC_KINDS}
    beta_raw, b0_raw = back.to_raw(model.beta, model.intercept)
    return PathEntry(
        s=s,
        support=[int(col_ids[j]) for j in cols],
        beta=[float(beta_raw[j]) for j in cols],
        intercept=float(b0_raw),
        deviance=dev,
        ic=ics,
        converged=bool(model.converged),
        wall_time_ms=elapsed_ms,
        model=model,
    )


def _validate_s_list(s_list, selectable):
    s_list = [int(s) for s in s_list]
    if any(b <= a for a, b in zip(s_list, s_list[1:])):
        raise UsageError("support sizes must be strictly ascending")
    if s_list and (s_list[0] < 0 or s_list[-1] > selectable):
        raise UsageError(f"support sizes must lie in 0..{selectable}")
    return s_list


def path_search(
    X,
    y,
    family,
    groups: GroupStructure | None,
    config: SplicingConfig,
    s_list=None,
    criterion: str = "gic",
    back: BackTransform | None = None,
    col_ids=None,
    p_for_ic: int | None = None,
) -> SelectionReport:
    """Fit every size in ``s_list`` (warm-started) and pick by criterion.

    Coefficients are reported on the raw scale through ``back``.  A
    size whose solve fails numerically is recorded with its message and
    excluded from the argmin.
    """
    if groups is None:
        groups = GroupStructure.singletons(X.p)
    if back is None:
        back = BackTransform.identity(X.p)
    if col_ids is None:
        col_ids = np.arange(X.p)
    if s_list is None:
        s_list = default_s_list(X.n, groups.n_selectable)
    s_list = _validate_s_list(s_list, groups.n_selectable)
    criterion = criterion.lower()
    if criterion not in IC_KINDS:
        raise UsageError(f"unknown information criterion {criterion!r}")
    p_ic = p_for_ic if p_for_ic is not None else X.p

    entries = []
    warm = None
    for s in s_list:
        t0 = time.perf_counter()
        try:
            model = solve_fixed_support(X, y, family, groups, replace(config, support_size=s), warm=warm)
        except NumericalError as e:
            entries.append(PathEntry(
                s=s, support=[], beta=[], intercept=0.0, deviance=float("nan"),
                ic={}, converged=False, failed=True, message=str(e),
            ))
            continue
        warm = model
        ms = (time.perf_counter() - t0) * 1000.0
        entries.append(_make_entry(s, model, X, y, family, groups, back, col_ids, p_ic, ms))

    chosen = argmin_entry(
        entries, lambda e: None if e.failed else e.ic[criterion]
    )
    return SelectionReport(
        entries=entries,
        chosen_s=None if chosen is None else chosen.s,
        criterion=criterion,
        seed=config.seed,
        family=get_family(family).tag,
        n=X.n,
        p=X.p,
    )


def cross_validate(
    X,
    y,
    family,
    groups: GroupStructure | None,
    config: SplicingConfig,
    s_list,
    folds: FoldAssignment,
    threads: int = 1,
    col_ids=None,
    p_for_ic: int | None = None,
) -> SelectionReport:
    """K-fold selection of the support size.

    Takes raw (unnormalized) data: each fold normalizes its own
    training rows so held-out rows never leak into the statistics.  The
    held-out score is the mean unpenalized family loss.  Entries carry
    the full-data refit (coefficients, deviance, criteria) alongside
    the fold mean and standard deviation; the chosen size minimizes the
    mean with ties going to the smaller size.
    """
    if X.normalized:
        raise UsageError("cross_validate expects raw data; folds normalize internally")
    if folds.n != X.n:
        raise UsageError("fold assignment does not match the sample count")
    if groups is None:
        groups = GroupStructure.singletons(X.p)
    s_list = _validate_s_list(s_list, groups.n_selectable)
    fam = get_family(family)

    def fold_losses(k):
        tr, te = folds.train_test(k)
        y_te = y.values[te]
        try:
            Xn, yn, back_tr = normalize(X.take_rows(tr), y.take_rows(tr))
        except DataError:
            return [None] * len(s_list)
        out = []
        warm = None
        for s in s_list:
            try:
                model = solve_fixed_support(
                    Xn, yn, fam, groups, replace(config, support_size=s), warm=warm
                )
            except NumericalError:
                out.append(None)
                continue
            warm = model
            beta_raw, b0_raw = back_tr.to_raw(model.beta, model.intercept)
            eta_te = (b0_raw + X.matvec(beta_raw))[te]
            out.append(unpenalized_loss(fam, eta_te, y_te))
        return out

    threads = max(1, int(threads))
    if threads == 1:
        per_fold = [fold_losses(k) for k in range(folds.K)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_fold = list(ex.map(fold_losses, range(folds.K)))

    Xn, yn, back = normalize(X, y)
    report = path_search(
        Xn, yn, fam, groups, config, s_list=s_list, criterion="gic",
        back=back, col_ids=col_ids, p_for_ic=p_for_ic,
    )
    for i, e in enumerate(report.entries):
        losses = [per_fold[k][i] for k in range(folds.K)]
        if all(l is not None for l in losses):
            arr = np.asarray(losses)
            e.cv_mean = float(arr.mean())
            e.cv_sd = float(arr.std())
        else:
            e.cv_mean = None
            e.cv_sd = None

    chosen = argmin_entry(
        report.entries, lambda e: None if e.failed else e.cv_mean
    )
    report.chosen_s = None if chosen is None else chosen.s
    report.criterion = "cv"
    return report


def golden_section_argmin(f, lo: int, hi: int):
    """Golden-section search over the integers lo..hi, memoized.

    Exact for unimodal sequences: the bracket always contains the
    minimizer, and once it shrinks to at most four points they are all
    evaluated.  Returns (argmin, values, call_order); ties prefer the
    smaller argument.
    """
    values = {}
    call_order = []

    def ev(s):
        if s not in values:
            values[s] = f(s)
            call_order.append(s)
        return values[s]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    while b - a > 3:
        d = int(round(invphi * (b - a)))
        x1, x2 = b - d, a + d
        x1 = max(x1, a + 1)
        x2 = min(x2, b - 1)
        if x1 == x2:
            x2 = x1 + 1
        if ev(x1) <= ev(x2):
            b = x2
        else:
            a = x1
    for s in range(a, b + 1):
        ev(s)
    best = min(values.items(), key=lambda kv: (kv[1], kv[0]))[0]
    return best, values, call_order


def gsection_search(
    X,
    y,
    family,
    groups: GroupStructure | None,
    config: SplicingConfig,
    s_min: int,
    s_max: int,
    criterion: str = "gic",
    back: BackTransform | None = None,
    col_ids=None,
    p_for_ic: int | None = None,
) -> SelectionReport:
    """Golden-section tuning of the support size on [s_min, s_max].

    Assumes a unimodal criterion curve; each probed size is solved at
    most once, warm-started from the nearest smaller solved size.  The
    report contains only the probed sizes.
    """
    if groups is None:
        groups = GroupStructure.singletons(X.p)
    if back is None:
        back = BackTransform.identity(X.p)
    if col_ids is None:
        col_ids = np.arange(X.p)
    if not 0 <= s_min < s_max <= groups.n_selectable:
        raise UsageError(f"need 0 <= s_min < s_max <= {groups.n_selectable}")
    criterion = criterion.lower()
    if criterion not in IC_KINDS:
        raise UsageError(f"unknown information criterion {criterion!r}")
    p_ic = p_for_ic if p_for_ic is not None else X.p

    solved = {}

    def crit_at(s):
        t0 = time.perf_counter()
        warm_sizes = [t for t in solved if t < s]
        warm = solved[max(warm_sizes)].model if warm_sizes else None
        model = solve_fixed_support(X, y, family, groups, replace(config, support_size=s), warm=warm)
        ms = (time.perf_counter() - t0) * 1000.0
        solved[s] = _make_entry(s, model, X, y, family, groups, back, col_ids, p_ic, ms)
        return solved[s].ic[criterion]

    best, _, _ = golden_section_argmin(crit_at, s_min, s_max)
    entries = [solved[s] for s in sorted(solved)]
    return SelectionReport(
        entries=entries,
        chosen_s=best,
        criterion=criterion,
        seed=config.seed,
        family=get_family(family).tag,
        n=X.n,
        p=X.p,
    )
