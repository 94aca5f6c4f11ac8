"""Fixed-support-size best-subset solver built on iterative splicing.

A solve keeps an active set of groups, fits the model restricted to it,
scores every active group by how little the loss would suffer from its
removal (backward sacrifice) and every inactive group by how much the
loss would gain from its addition (forward sacrifice), and exchanges
the k worst actives for the k best inactives whenever the refit
improves the loss by more than a size-dependent threshold.  The
threshold forces strict descent, so the iteration terminates at a local
exchange optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import GroupStructure
from .errors import NumericalError, UsageError
from .families import get_family

JITTER = 1e-9
MAX_STEP_HALVINGS = 20


@dataclass
class SplicingConfig:
    """Knobs for one fixed-support solve.

    ``support_size`` counts selected non-nuisance groups.  ``k_max``
    bounds the swap size (default min(support_size, 5)).  The splice
    acceptance threshold is
    ``tau_const * s * log(p) * log(log(n)) / n`` with natural logs and
    the log-log factor replaced by 1 when n < 3.
    """

    support_size: int = 0
    k_max: int | None = None
    tau_const: float = 0.01
    max_splice_iter: int = 20
    lam: float = 0.0
    newton_tol: float = 1e-8
    newton_max_iter: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.support_size < 0:
            raise UsageError(f"support size must be >= 0, got {self.support_size}")
        if self.k_max is not None and self.k_max < 1:
            raise UsageError(f"k_max must be >= 1, got {self.k_max}")
        if self.lam < 0:
            raise UsageError(f"ridge penalty must be >= 0, got {self.lam}")

    def resolved_k_max(self, s: int) -> int:
        return self.k_max if self.k_max is not None else max(1, min(s, 5))


def tau_threshold(s: int, n: int, p: int, tau_const: float = 0.01) -> float:
    """Splice acceptance threshold; scales with support size and dimension."""
    loglog = math.log(math.log(n)) if n >= 3 else 1.0
    return tau_const * s * math.log(p) * loglog / n


@dataclass
class ActiveModel:
    """A fitted model restricted to an active set of groups.

    ``beta`` is full length p and exactly zero outside the active
    groups' columns.  ``grad`` caches ``X_c^T (y - mu) / n`` (the
    unpenalized negative gradient) and ``weights`` the per-sample
    Hessian weights, both at the fitted coefficients.
    """

    active: tuple[int, ...]
    beta: np.ndarray
    intercept: float
    loss: float
    grad: np.ndarray
    weights: np.ndarray
    converged: bool = True
    n_splices: int = 0
    trace: tuple[float, ...] = ()


@dataclass
class SacrificeTable:
    """Backward (xi, active) and forward (zeta, inactive) sacrifices."""

    xi: dict = field(default_factory=dict)
    zeta: dict = field(default_factory=dict)


def _solve_sym(M: np.ndarray, rhs: np.ndarray, coef_start: int, what: str) -> np.ndarray:
    """Solve M x = rhs, retrying with jitter on the coefficient block."""
    try:
        sol = np.linalg.solve(M, rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    M = M.copy()
    idx = np.arange(coef_start, M.shape[0])
    M[idx, idx] += JITTER
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"singular system for {what} even after jitter") from e
    if not np.all(np.isfinite(sol)):
        raise NumericalError(f"non-finite solution for {what}")
    return sol


def fit_on_active(
    X,
    y,
    family,
    groups: GroupStructure,
    active,
    lam: float = 0.0,
    warm: ActiveModel | None = None,
    newton_tol: float = 1e-8,
    newton_max_iter: int = 30,
) -> ActiveModel:
    """Fit the family restricted to the columns of the active groups.

    Gaussian models solve the ridge normal equations exactly (the
    intercept is unpenalized).  Logistic and poisson models run Newton
    iterations with step halving; an accepted step never increases the
    penalized loss.  Non-convergence within the iteration budget is not
    an error but clears the ``converged`` flag.
    """
    fam = get_family(family)
    yv = y.values if hasattr(y, "values") else np.asarray(y, dtype=np.float64)
    active = tuple(sorted(int(g) for g in set(active)))
    cols = groups.columns_of_groups(active)
    n, p = X.n, X.p
    k = cols.size
    B = X.block(cols) if k else np.empty((n, 0))

    if fam.tag == "gaussian":
        M = np.empty((k + 1, k + 1))
        cs = B.sum(axis=0)
        M[0, 0] = n
        M[0, 1:] = cs
        M[1:, 0] = cs
        gram = B.T @ B
        if lam:
            gram[np.diag_indices(k)] += 2.0 * n * lam
        M[1:, 1:] = gram
        rhs = np.concatenate(([yv.sum()], B.T @ yv))
        sol = _solve_sym(M, rhs, 1, f"active groups {active}")
        b0, b = float(sol[0]), sol[1:]
        r = yv - b0 - (B @ b if k else 0.0)
        loss = 0.5 * float(r @ r) / n + lam * float(b @ b)
        mu = yv - r
        w = np.ones(n)
        converged = True
    else:
        b = np.zeros(k)
        b0 = 0.0
        if warm is not None:
            b = warm.beta[cols].copy()
            b0 = float(warm.intercept)
        eta = fam.clip_eta(b0 + (B @ b if k else np.zeros(n)))
        loss, mu, w = fam.unit_stats(eta, yv)
        loss += lam * float(b @ b)
        converged = False
        for _ in range(newton_max_iter):
            resid = yv - mu
            g = np.empty(k + 1)
            g[0] = resid.sum() / n
            g[1:] = (B.T @ resid) / n - 2.0 * lam * b
            H = np.empty((k + 1, k + 1))
            H[0, 0] = w.sum() / n
            wB = B * w[:, None] if k else B
            H[0, 1:] = wB.sum(axis=0) / n
            H[1:, 0] = H[0, 1:]
            hblock = (B.T @ wB) / n
            if lam:
                hblock[np.diag_indices(k)] += 2.0 * lam
            H[1:, 1:] = hblock
            step = _solve_sym(H, g, 1, f"active groups {active}")
            accepted = False
            t = 1.0
            for _ in range(MAX_STEP_HALVINGS + 1):
                b0_t = b0 + t * step[0]
                b_t = b + t * step[1:]
                eta = fam.clip_eta(b0_t + (B @ b_t if k else np.zeros(n)))
                loss_t, mu_t, w_t = fam.unit_stats(eta, yv)
                loss_t += lam * float(b_t @ b_t)
                if loss_t <= loss:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            rel = (loss - loss_t) / max(abs(loss), 1e-10)
            b0, b, mu, w = b0_t, b_t, mu_t, w_t
            loss = loss_t
            if rel < newton_tol:
                converged = True
                break

    beta = np.zeros(p)
    if k:
        beta[cols] = b
    grad = X.t_dot(yv - mu) / n
    return ActiveModel(
        active=active,
        beta=beta,
        intercept=b0,
        loss=loss,
        grad=grad,
        weights=w,
        converged=converged,
    )


def compute_sacrifices(state: ActiveModel, X, y, family, groups: GroupStructure, lam: float = 0.0) -> SacrificeTable:
    """Score exchanges at the current fit.

    Active non-nuisance group G gets the backward sacrifice
    ``0.5 * beta_G' H_G beta_G`` and inactive group G the forward
    sacrifice ``0.5 * d_G' H_G^{-1} d_G`` where
    ``H_G = X_G' W X_G / n + 2*lam*I``.
    """
    n = X.n
    nuis = groups.nuisance_groups
    active = set(state.active)
    inactive = [g for g in range(groups.G) if g not in active]
    active_nn = [g for g in active if g not in nuis]

    table = SacrificeTable()
    if groups.max_group_size == 1:
        # all-singleton structures share one vectorized kernel so any
        # relabeling of singleton groups produces bit-identical values
        h = X.col_sq_weighted(state.weights) / n + 2.0 * lam
        bad = h <= 1e-12
        if np.any(bad):
            h = h + bad * JITTER
            still = np.flatnonzero(h <= 1e-12)
            if still.size:
                raise NumericalError(f"singular Hessian block for group {int(still[0])}")
        for g in active_nn:
            j = int(groups.columns_of(g)[0])
            table.xi[g] = 0.5 * h[j] * state.beta[j] ** 2
        for g in inactive:
            j = int(groups.columns_of(g)[0])
            table.zeta[g] = state.grad[j] ** 2 / (2.0 * h[j])
        return table

    w = state.weights
    for g in active_nn + inactive:
        cols = groups.columns_of(g)
        Bg = X.block(cols)
        Hg = (Bg.T @ (Bg * w[:, None])) / n
        if lam:
            Hg[np.diag_indices(cols.size)] += 2.0 * lam
        if g in active:
            bg = state.beta[cols]
            table.xi[g] = 0.5 * float(bg @ Hg @ bg)
        else:
            dg = state.grad[cols]
            try:
                z = np.linalg.solve(Hg, dg)
            except np.linalg.LinAlgError:
                Hg = Hg.copy()
                Hg[np.diag_indices(cols.size)] += JITTER
                try:
                    z = np.linalg.solve(Hg, dg)
                except np.linalg.LinAlgError as e:
                    raise NumericalError(f"singular Hessian block for group {g}") from e
            table.zeta[g] = 0.5 * float(dg @ z)
    return table


def splice_once(state: ActiveModel, config: SplicingConfig, X, y, family, groups: GroupStructure):
    """Try one exchange pass; return (state, improved).

    Swap sizes k = 1, 2, ... are tried in order and the first refit
    improving the loss by more than the threshold is accepted, so an
    accepted state is strictly better by more than tau.
    """
    nuis = groups.nuisance_groups
    active = set(state.active)
    s = len(active) - len(nuis)
    n_inactive = groups.G - len(active)
    if s < 1 or n_inactive < 1:
        return state, False

    table = compute_sacrifices(state, X, y, family, groups, config.lam)
    removal = sorted(table.xi, key=lambda g: (table.xi[g], g))
    addition = sorted(table.zeta, key=lambda g: (-table.zeta[g], g))
    tau = tau_threshold(s, X.n, X.p, config.tau_const)

    for k in range(1, min(config.resolved_k_max(s), s, n_inactive) + 1):
        candidate = (active - set(removal[:k])) | set(addition[:k])
        refit = fit_on_active(
            X, y, family, groups, candidate,
            lam=config.lam, warm=state,
            newton_tol=config.newton_tol, newton_max_iter=config.newton_max_iter,
        )
        if state.loss - refit.loss > tau:
            return refit, True
    return state, False


def solve_fixed_support(
    X,
    y,
    family,
    groups: GroupStructure | None,
    config: SplicingConfig,
    warm: ActiveModel | None = None,
) -> ActiveModel:
    """Best-subset fit at a fixed support size.

    Without a warm start the initial active set is the nuisance groups
    plus the ``s`` groups with the largest forward sacrifices at the
    nuisance-only fit.  A warm start's active set is truncated or
    extended to size ``s`` by its own sacrifice ranking; the plain
    initialization runs as well and the better fixed point is returned,
    so warm starts never degrade the found optimum.  Splicing repeats
    until no exchange improves the loss by more than the threshold or
    ``max_splice_iter`` exchanges were accepted.
    """
    if groups is None:
        groups = GroupStructure.singletons(X.p)
    s = config.support_size
    nuis = groups.nuisance_groups
    if s > groups.n_selectable:
        raise UsageError(f"support size {s} exceeds {groups.n_selectable} selectable groups")

    fit_kw = dict(
        lam=config.lam, newton_tol=config.newton_tol, newton_max_iter=config.newton_max_iter
    )

    def splice_to_fixed_point(init, start_model):
        state = fit_on_active(X, y, family, groups, init, warm=start_model, **fit_kw)
        trace = [state.loss]
        n_splices = 0
        improved = False
        while n_splices < config.max_splice_iter:
            state_next, improved = splice_once(state, config, X, y, family, groups)
            if not improved:
                break
            state = state_next
            trace.append(state.loss)
            n_splices += 1
        state.converged = state.converged and not improved
        state.n_splices = n_splices
        state.trace = tuple(trace)
        return state

    base = fit_on_active(X, y, family, groups, nuis, **fit_kw)
    if s == 0:
        base.trace = (base.loss,)
        return base

    table = compute_sacrifices(base, X, y, family, groups, config.lam)
    ranked = sorted(table.zeta, key=lambda g: (-table.zeta[g], g))
    cold_init = set(nuis) | set(ranked[:s])

    if warm is None:
        return splice_to_fixed_point(cold_init, base)

    init = set(warm.active) | set(nuis)
    cur = sorted(g for g in init if g not in nuis)
    if len(cur) != s:
        table_w = compute_sacrifices(warm, X, y, family, groups, config.lam)
        if len(cur) < s:
            add = sorted(
                (g for g in table_w.zeta if g not in init),
                key=lambda g: (-table_w.zeta[g], g),
            )
            init |= set(add[: s - len(cur)])
        else:
            drop = sorted(
                (g for g in cur if g in table_w.xi), key=lambda g: (table_w.xi[g], g)
            )
            init -= set(drop[: len(cur) - s])

    warm_state = splice_to_fixed_point(init, warm)
    if init == cold_init:
        return warm_state
    cold_state = splice_to_fixed_point(cold_init, base)
    return warm_state if warm_state.loss <= cold_state.loss else cold_state
