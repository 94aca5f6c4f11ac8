"""Data ingestion, validation, normalization, screening, and folds.

The central type is :class:`DesignMatrix`, which wraps either a dense
column-major array or a compressed-sparse-column matrix and records the
normalization statistics needed to move coefficients between the
standardized scale (used by the solver) and the raw scale (reported to
the user).

Sparse matrices are scaled but never centered; centering is carried as
per-column offsets that downstream linear algebra subtracts on the fly,
so dense and sparse representations of the same data produce the same
numbers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DataError, UsageError

FAMILIES = ("gaussian", "logistic", "poisson")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass
class DesignMatrix:
    """An n-by-p predictor matrix plus normalization metadata.

    Parameters
    ----------
    values : ndarray or scipy.sparse.csc_matrix
        Dense column-major storage, or CSC sparse storage.
    col_means : ndarray
        Raw-scale column means recorded by :func:`normalize`
        (zeros before normalization).
    col_scales : ndarray
        Raw-scale population standard deviations recorded by
        :func:`normalize` (ones before normalization).
    normalized : bool
        Whether :func:`normalize` has been applied.
    column_names : tuple of str, optional
        Header names when loaded from a CSV with a header row.

    Notes
    -----
    Dense normalized storage is centered and scaled.  Sparse normalized
    storage is scaled only; the implied centering offsets are exposed
    through :meth:`block`, :meth:`matvec`, :meth:`t_dot`, and
    :meth:`col_sq_weighted` so every downstream computation sees
    centered columns regardless of storage.

    A dense float64 column-major input array is adopted without copying
    and marked read-only (instances are immutable and safely shareable
    across workers); pass a copy to keep a writable original.
    """

    values: np.ndarray | sparse.csc_matrix
    col_means: np.ndarray = None
    col_scales: np.ndarray = None
    normalized: bool = False
    column_names: tuple[str, ...] | None = None
    _centering: np.ndarray = field(default=None, repr=False)
    _squared: object = field(default=None, repr=False)

    def __post_init__(self):
        if sparse.issparse(self.values):
            v = self.values.tocsc()
            _validate_csc(v)
            v.data = np.asarray(v.data, dtype=np.float64)
            self.values = v
        else:
            v = np.asfortranarray(np.asarray(self.values, dtype=np.float64))
            if v.ndim != 2:
                raise DataError(f"design matrix must be 2-D, got ndim={v.ndim}")
            if not np.all(np.isfinite(v)):
                i, j = np.argwhere(~np.isfinite(v))[0]
                raise DataError(f"non-finite entry at row {i}, column {j}")
            self.values = _readonly(v)
        n, p = self.values.shape
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise DataError(f"need at least 1 column, got {p}")
        if self.col_means is None:
            self.col_means = np.zeros(p)
        if self.col_scales is None:
            self.col_scales = np.ones(p)
        self.col_means = _readonly(np.asarray(self.col_means, dtype=np.float64).copy())
        self.col_scales = _readonly(np.asarray(self.col_scales, dtype=np.float64).copy())
        if self._centering is None:
            self._centering = np.zeros(p)
        self._centering = _readonly(np.asarray(self._centering, dtype=np.float64).copy())

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.values)

    def block(self, cols) -> np.ndarray:
        """Dense centered block of the given columns, shape (n, len(cols))."""
        cols = np.asarray(cols, dtype=np.intp)
        if self.is_sparse:
            b = np.asarray(self.values[:, cols].todense())
            off = self._centering[cols]
            if off.any():
                b = b - off
            return b
        return self.values[:, cols].copy(order="F")

    def matvec(self, beta: np.ndarray) -> np.ndarray:
        """Centered product X_c @ beta for a full-length coefficient vector."""
        out = self.values @ beta
        off = float(self._centering @ beta)
        if off != 0.0:
            out = out - off
        return np.asarray(out).ravel()

    def t_dot(self, r: np.ndarray) -> np.ndarray:
        """Centered product X_c^T r, length p."""
        out = np.asarray(self.values.T @ r).ravel()
        if self._centering.any():
            out = out - self._centering * float(r.sum())
        return out

    def col_sq_weighted(self, w: np.ndarray) -> np.ndarray:
        """Per-column weighted squared norms sum_i w_i * x_c[i,j]^2."""
        if self._squared is None:
            # lazy write-once cache; a concurrent first call recomputes
            # the same value, so the race is benign
            if self.is_sparse:
                sq = self.values.copy()
                sq.data = sq.data**2
            else:
                sq = np.asfortranarray(self.values**2)
            object.__setattr__(self, "_squared", sq)
        out = np.asarray(self._squared.T @ w).ravel()
        if self._centering.any():
            m = self._centering
            xw = np.asarray(self.values.T @ w).ravel()
            out = out - 2.0 * m * xw + m**2 * float(w.sum())
        return out

    def take_rows(self, idx) -> "DesignMatrix":
        """Row subset (for train/test splits); keeps raw storage semantics."""
        idx = np.asarray(idx, dtype=np.intp)
        if self.normalized:
            raise UsageError("row subsetting must happen before normalization")
        vals = self.values[idx, :] if not self.is_sparse else self.values.tocsr()[idx, :].tocsc()
        return DesignMatrix(vals, column_names=self.column_names)

    def take_columns(self, idx) -> "DesignMatrix":
        """Column subset (for screening); preserves per-column metadata."""
        idx = np.asarray(idx, dtype=np.intp)
        names = None
        if self.column_names is not None:
            names = tuple(self.column_names[j] for j in idx)
        sub = DesignMatrix(
            self.values[:, idx],
            col_means=self.col_means[idx],
            col_scales=self.col_scales[idx],
            normalized=self.normalized,
            column_names=names,
        )
        object.__setattr__(sub, "_centering", _readonly(self._centering[idx].copy()))
        return sub

    def toarray(self) -> np.ndarray:
        """Dense copy of the centered matrix."""
        return self.block(np.arange(self.p))


def _validate_csc(v: sparse.csc_matrix) -> None:
    n, p = v.shape
    indptr, indices = v.indptr, v.indices
    if np.any(np.diff(indptr) < 0):
        raise DataError("sparse column offsets must be nondecreasing")
    for j in range(p):
        rows = indices[indptr[j] : indptr[j + 1]]
        if rows.size and (np.any(np.diff(rows) <= 0)):
            raise DataError(f"sparse row indices not strictly increasing in column {j}")
        if rows.size and (rows[0] < 0 or rows[-1] >= n):
            raise DataError(f"sparse row index out of range in column {j}")
    if not np.all(np.isfinite(v.data)):
        raise DataError("non-finite entry in sparse matrix")


@dataclass
class ResponseVector:
    """Length-n response with an optional model-family tag.

    The family tag triggers family-specific validation: logistic
    responses must be 0/1 with both classes present, poisson responses
    must be nonnegative integers.
    """

    values: np.ndarray
    family: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            i = int(np.flatnonzero(~np.isfinite(v))[0])
            raise DataError(f"non-finite response at row {i}")
        self.values = _readonly(v)
        if self.family is not None:
            _validate_family_response(v, self.family)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def with_family(self, family: str) -> "ResponseVector":
        return ResponseVector(self.values.copy(), family=family)

    def take_rows(self, idx) -> "ResponseVector":
        return ResponseVector(self.values[np.asarray(idx, dtype=np.intp)], family=self.family)


def _validate_family_response(v: np.ndarray, family: str) -> None:
    if family not in FAMILIES:
        raise UsageError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if family == "logistic":
        uniq = np.unique(v)
        if not np.all(np.isin(uniq, (0.0, 1.0))):
            raise DataError("logistic response must contain only 0 and 1")
        if uniq.size < 2:
            raise DataError("logistic response must contain both classes")
    elif family == "poisson":
        if np.any(v < 0) or np.any(v != np.round(v)):
            raise DataError("poisson response must be nonnegative integers")


@dataclass
class GroupStructure:
    """Partition of the p columns into selection groups.

    ``group_of[j]`` is the group id of column j; ids must cover
    0..G-1.  ``nuisance_groups`` are forced into every model and are
    exempt from selection.
    """

    group_of: np.ndarray
    nuisance_groups: frozenset = frozenset()

    def __post_init__(self):
        g = np.asarray(self.group_of, dtype=np.intp).ravel()
        if g.size < 1:
            raise DataError("group assignment must cover at least one column")
        G = int(g.max()) + 1 if g.size else 0
        if g.min() < 0:
            raise DataError("group ids must be nonnegative")
        used = np.bincount(g, minlength=G)
        if np.any(used == 0):
            missing = int(np.flatnonzero(used == 0)[0])
            raise DataError(f"group id {missing} is unused; ids must cover 0..G-1")
        self.group_of = _readonly(g)
        self.nuisance_groups = frozenset(int(x) for x in self.nuisance_groups)
        if not all(0 <= x < G for x in self.nuisance_groups):
            raise DataError("nuisance group ids out of range")
        self._G = G
        cols = [[] for _ in range(G)]
        for j, gj in enumerate(g):
            cols[gj].append(j)
        self._cols = tuple(np.asarray(c, dtype=np.intp) for c in cols)
        self._max_size = int(used.max())
        self._trivial = G == g.size and bool(np.all(g == np.arange(g.size)))

    @classmethod
    def singletons(cls, p: int, nuisance_groups=frozenset()) -> "GroupStructure":
        """Default structure: one group per column."""
        return cls(np.arange(p), nuisance_groups)

    @property
    def G(self) -> int:
        return self._G

    @property
    def is_trivial(self) -> bool:
        """True for the singleton default (group j == column j)."""
        return self._trivial

    @property
    def max_group_size(self) -> int:
        return self._max_size

    @property
    def n_selectable(self) -> int:
        return self._G - len(self.nuisance_groups)

    def columns_of(self, g: int) -> np.ndarray:
        return self._cols[g]

    def columns_of_groups(self, groups) -> np.ndarray:
        """Ascending column indices of a collection of groups."""
        if not len(groups):
            return np.empty(0, dtype=np.intp)
        return np.sort(np.concatenate([self._cols[g] for g in groups]))


@dataclass
class FoldAssignment:
    """Deterministic K-fold partition of 0..n-1."""

    fold_of: np.ndarray
    K: int
    seed: int

    def __post_init__(self):
        f = np.asarray(self.fold_of, dtype=np.intp).ravel()
        if f.size < self.K:
            raise DataError("more folds than samples")
        counts = np.bincount(f, minlength=self.K)
        if counts.size != self.K or counts.max() - counts.min() > 1:
            raise DataError("fold sizes must differ by at most 1")
        self.fold_of = _readonly(f)

    @property
    def n(self) -> int:
        return self.fold_of.shape[0]

    def train_test(self, k: int):
        te = np.flatnonzero(self.fold_of == k)
        tr = np.flatnonzero(self.fold_of != k)
        return tr, te


@dataclass
class BackTransform:
    """Maps coefficients between the standardized and raw scales."""

    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float = 0.0

    @classmethod
    def identity(cls, p: int) -> "BackTransform":
        return cls(np.zeros(p), np.ones(p), 0.0)

    def to_raw(self, beta: np.ndarray, intercept: float):
        """Standardized-scale (beta, intercept) to raw scale."""
        beta_raw = beta / self.col_scales
        b0_raw = intercept + self.y_mean - float(beta_raw @ self.col_means)
        return beta_raw, b0_raw

    def to_standardized(self, beta_raw: np.ndarray, b0_raw: float):
        beta = beta_raw * self.col_scales
        b0 = b0_raw - self.y_mean + float(beta_raw @ self.col_means)
        return beta, b0


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


def _parse_numeric_csv(path, has_header: bool):
    """Parse a comma-separated file of decimal reals; rejects ragged or
    non-numeric rows with the offending row and column named."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if len(rows) < 2:
        raise DataError(f"{path}: fewer than 2 data rows")

    ncol = len(rows[0])
    data = np.empty((len(rows), ncol), dtype=np.float64)
    offset = 2 if has_header else 1
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise DataError(f"{path}: row {i + offset} has {len(row)} fields, expected {ncol}")
        for j, tok in enumerate(row):
            colname = header[j] if header else str(j)
            try:
                val = float(tok)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {tok.strip()!r} at row {i + offset}, column {colname!r}"
                )
            if not math.isfinite(val):
                raise DataError(
                    f"{path}: non-finite value {tok.strip()!r} at row {i + offset}, column {colname!r}"
                )
            data[i, j] = val
    return data, header


def load_csv_matrix(path, has_header: bool = True):
    """Numeric matrix from a CSV with no response column.

    Returns (values, header_names_or_None); used for covariance input
    and feature-only data.
    """
    data, header = _parse_numeric_csv(path, has_header)
    return data, tuple(header) if header else None


def load_csv(path, response_col, has_header: bool = True, family: str | None = None):
    """Load a comma-separated file into (DesignMatrix, ResponseVector).

    Parameters
    ----------
    path : str or Path
        File to read.  Every row must have the same field count and
        every field must parse as a decimal real.
    response_col : str or int
        Response column by header name (requires ``has_header``) or by
        0-based index.
    has_header : bool
        Whether the first line is a header row.
    family : str, optional
        Model family used to validate the response.

    Raises
    ------
    DataError
        Missing file, ragged rows, non-numeric or non-finite cells
        (named by row and column), unknown response column, or fewer
        than 2 data rows.
    """
    data, header = _parse_numeric_csv(path, has_header)
    ncol = data.shape[1]
    if isinstance(response_col, str) and not isinstance(response_col, int):
        try:
            resp_idx = int(response_col)
        except ValueError:
            if header is None:
                raise DataError("response column by name requires a header row")
            if response_col not in header:
                raise DataError(f"response column {response_col!r} not found in header")
            resp_idx = header.index(response_col)
    else:
        resp_idx = int(response_col)
    if resp_idx < 0:
        resp_idx += ncol
    if not 0 <= resp_idx < ncol:
        raise DataError(f"response column index {resp_idx} out of range (file has {ncol} columns)")

    keep = [j for j in range(ncol) if j != resp_idx]
    names = tuple(header[j] for j in keep) if header else None
    X = DesignMatrix(data[:, keep], column_names=names)
    y = ResponseVector(data[:, resp_idx], family=family)
    return X, y


def load_sparse(path, family: str | None = None):
    """Load label + "index:value" lines into a sparse DesignMatrix.

    Indices are 1-based and must be strictly increasing within each
    line; the predictor count is the largest index seen anywhere.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DataError(f"{path}: empty file")

    labels = []
    rows, cols, vals = [], [], []
    p = 0
    for i, ln in enumerate(lines, start=1):
        toks = ln.split()
        try:
            labels.append(float(toks[0]))
        except ValueError:
            raise DataError(f"{path}: line {i}: unparsable label {toks[0]!r}")
        prev = 0
        for tok in toks[1:]:
            try:
                idx_s, val_s = tok.split(":", 1)
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataError(f"{path}: line {i}: unparsable token {tok!r}")
            if idx <= prev:
                raise DataError(f"{path}: line {i}: index {idx} not strictly increasing")
            if not math.isfinite(val):
                raise DataError(f"{path}: line {i}: non-finite value in token {tok!r}")
            prev = idx
            p = max(p, idx)
            rows.append(i - 1)
            cols.append(idx - 1)
            vals.append(val)
    if p == 0:
        raise DataError(f"{path}: no features found")
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(len(lines), p)).tocsc()
    X = DesignMatrix(mat)
    y = ResponseVector(np.asarray(labels), family=family)
    return X, y


def save_csv(X: DesignMatrix, y: ResponseVector | None, path, response_name: str = "y") -> None:
    """Write the matrix (and optional response) with 17 significant digits.

    Values printed this way round-trip bit-exactly through
    :func:`load_csv`.
    """
    dense = X.values if not X.is_sparse else np.asarray(X.values.todense())
    names = list(X.column_names) if X.column_names else [f"x{j + 1}" for j in range(X.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if y is not None:
            w.writerow(names + [response_name])
            for i in range(X.n):
                w.writerow([format(v, ".17g") for v in dense[i]] + [format(y.values[i], ".17g")])
        else:
            w.writerow(names)
            for i in range(X.n):
                w.writerow([format(v, ".17g") for v in dense[i]])


def load_groups(path, p: int) -> np.ndarray:
    """Read one integer group id per line; line i maps to column i."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with fh:
        toks = [ln.strip() for ln in fh if ln.strip()]
    if len(toks) != p:
        raise DataError(f"groups file has {len(toks)} lines, expected {p}")
    try:
        ids = np.asarray([int(t) for t in toks], dtype=np.intp)
    except ValueError:
        bad = next(t for t in toks if not t.lstrip("-").isdigit())
        raise DataError(f"groups file: unparsable group id {bad!r}")
    return ids


# ---------------------------------------------------------------------------
# normalization, screening, folds
# ---------------------------------------------------------------------------


def normalize(X: DesignMatrix, y: ResponseVector):
    """Center and scale columns to unit population variance.

    Dense storage is physically centered; sparse storage is scaled only
    and the centering is folded into downstream intercepts through the
    recorded offsets.  For the gaussian family the response is centered
    and its mean stored in the returned :class:`BackTransform`.

    Raises
    ------
    DataError
        If any column has zero population variance (the index is
        reported).
    """
    n, p = X.n, X.p
    if X.is_sparse:
        v = X.values
        means = np.asarray(v.mean(axis=0)).ravel()
        sq_means = np.asarray(v.multiply(v).mean(axis=0)).ravel()
        variances = sq_means - means**2
    else:
        means = X.values.mean(axis=0)
        variances = X.values.var(axis=0)
    scales = np.sqrt(np.maximum(variances, 0.0))
    dead = np.flatnonzero(scales <= 1e-14 * (1.0 + np.abs(means)))
    if dead.size:
        raise DataError(f"zero-variance column {int(dead[0])}")

    if X.is_sparse:
        vals = X.values.copy()
        vals.data = vals.data / np.repeat(scales, np.diff(vals.indptr))
        Xn = DesignMatrix(
            vals,
            col_means=means,
            col_scales=scales,
            normalized=True,
            column_names=X.column_names,
        )
        object.__setattr__(Xn, "_centering", _readonly(means / scales))
    else:
        vals = (X.values - means) / scales
        Xn = DesignMatrix(
            vals,
            col_means=means,
            col_scales=scales,
            normalized=True,
            column_names=X.column_names,
        )
        assert np.all(np.abs(vals.mean(axis=0)) < 1e-10)
        assert np.all(np.abs(vals.var(axis=0) - 1.0) < 1e-8)

    y_mean = 0.0
    yv = y.values
    if y.family == "gaussian" or y.family is None:
        y_mean = float(yv.mean())
        yv = yv - y_mean
    yn = ResponseVector(yv, family=y.family)
    return Xn, yn, BackTransform(means, scales, y_mean)


def default_screen_size(n: int, p: int) -> int:
    """Standard sure-independence-screening size min(p, ceil(n / ln n))."""
    return min(p, int(math.ceil(n / math.log(n))))


def sis_screen(X: DesignMatrix, y: ResponseVector, m: int) -> np.ndarray:
    """Columns with the m largest marginal scores |x_j^T (y - ybar)| / n.

    Requires a normalized matrix.  Ties break toward the lower column
    index; the returned indices are ascending and refer to the columns
    of ``X`` as given.
    """
    if not 1 <= m <= X.p:
        raise UsageError(f"screening size {m} out of range 1..{X.p}")
    if not X.normalized:
        raise UsageError("sis_screen requires a normalized design matrix")
    r = y.values - y.values.mean()
    scores = np.abs(X.t_dot(r)) / X.n
    order = np.lexsort((np.arange(X.p), -scores))
    return np.sort(order[:m])


def make_folds(n: int, K: int, seed: int, strata=None) -> FoldAssignment:
    """Deterministic K-fold assignment, stratified when labels are given.

    Indices are dealt round-robin through one shuffled stream so fold
    sizes differ by at most one overall and within every stratum.
    """
    if not 2 <= K <= n:
        raise UsageError(f"fold count {K} out of range 2..{n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.intp)
    if strata is None:
        perm = rng.permutation(n)
        fold_of[perm] = np.arange(n) % K
    else:
        strata = np.asarray(strata).ravel()
        if strata.shape[0] != n:
            raise UsageError("strata length must equal n")
        pos = 0
        for c in np.unique(strata):
            members = np.flatnonzero(strata == c)
            members = rng.permutation(members)
            fold_of[members] = (pos + np.arange(members.size)) % K
            pos += members.size
    return FoldAssignment(fold_of, K, seed)
