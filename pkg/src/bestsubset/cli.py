"""Command-line surface: fit, path, cv, spca, and bench.

Every successful run writes a JSON report with a fixed key set:

    command, family, n, p, selected, coefficients, intercept, deviance,
    ic, path, chosen_s, converged, seed, timing_ms, version

``selected`` holds 0-based ascending column indices in the original
(pre-screening) coordinates and ``coefficients`` the raw-scale values
aligned with it.  ``path`` and ``cv`` additionally write a companion
``<output>.curve.csv`` with columns ``s,deviance,ic_or_cvloss``;
``bench`` writes ``<output>.bench.csv`` with columns
``metric,nnz,runtime`` (means over repetitions, runtime in seconds).

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
failure.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
from scipy.stats import rankdata

from . import __version__
from .data import (
    DesignMatrix,
    GroupStructure,
    default_screen_size,
    load_csv,
    load_csv_matrix,
    load_groups,
    load_sparse,
    make_folds,
    normalize,
    sis_screen,
)
from .engine import SplicingConfig, solve_fixed_support
from .errors import BestSubsetError, DataError, UsageError
from .selection import (
    IC_KINDS,
    cross_validate,
    default_s_list,
    deviance,
    gsection_search,
    information_criterion,
    path_search,
)
from .spca import CovarianceView, covariance_from_data, spca_fixed_support, spca_path

REPORT_KEYS = (
    "command", "family", "n", "p", "selected", "coefficients", "intercept",
    "deviance", "ic", "path", "chosen_s", "converged", "seed", "timing_ms",
    "version",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bestsubset",
        description="Best-subset selection by splicing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--input", required=True, help="input data file")
        p.add_argument("--format", choices=("csv", "sparse"), default="csv",
                       help="csv (default) or label index:value sparse lines")
        p.add_argument("--response", default="-1",
                       help="response column name or 0-based index (csv only; default last)")
        p.add_argument("--no-header", action="store_true",
                       help="csv file has no header row")
        p.add_argument("--family", required=True,
                       choices=("gaussian", "logistic", "poisson"))
        p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                       help="ridge penalty on coefficients (default 0)")
        p.add_argument("--groups", help="file with one group id per line")
        p.add_argument("--always-include", default="",
                       help="comma-separated group ids forced into every model")
        p.add_argument("--screen", help="SIS screening size (integer or 'auto')")
        p.add_argument("--k-max", type=int, help="maximum splice swap size")
        p.add_argument("--max-splice-iter", type=int, default=20)
        p.add_argument("--threads", type=int, default=None,
                       help="worker pool size (default: BESTSUBSET_THREADS or cpu count)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", default="report.json",
                       help="report path (default report.json)")
        p.add_argument("--no-timing", action="store_true",
                       help="write zeros for wall-clock fields (byte-stable reports)")

    p_fit = sub.add_parser("fit", help="fixed support size fit")
    add_common(p_fit)
    p_fit.add_argument("--support-size", type=int, required=True)

    p_path = sub.add_parser("path", help="information-criterion path search")
    add_common(p_path)
    p_path.add_argument("--support-range", default=None, help="a:b inclusive (default auto)")
    p_path.add_argument("--ic", choices=IC_KINDS, default="gic")
    p_path.add_argument("--gsection", action="store_true",
                        help="golden-section search instead of the sequential path")

    p_cv = sub.add_parser("cv", help="cross-validated path search")
    add_common(p_cv)
    p_cv.add_argument("--support-range", default=None, help="a:b inclusive (default auto)")
    p_cv.add_argument("--folds", type=int, default=5)

    p_spca = sub.add_parser("spca", help="sparse principal component analysis")
    p_spca.add_argument("--input", required=True)
    p_spca.add_argument("--no-header", action="store_true")
    p_spca.add_argument("--covariance", action="store_true",
                        help="input is a p-by-p covariance matrix, not data")
    size = p_spca.add_mutually_exclusive_group(required=True)
    size.add_argument("--support-size", type=int)
    size.add_argument("--support-range", help="a:b inclusive")
    p_spca.add_argument("--k-max", type=int)
    p_spca.add_argument("--max-splice-iter", type=int, default=20)
    p_spca.add_argument("--seed", type=int, default=0)
    p_spca.add_argument("--output", default="report.json")
    p_spca.add_argument("--no-timing", action="store_true")

    p_bench = sub.add_parser("bench", help="repeated train/test benchmark")
    add_common(p_bench)
    p_bench.add_argument("--test-fraction", type=float, default=0.2)
    p_bench.add_argument("--reps", type=int, default=20)
    p_bench.add_argument("--tune", choices=("ic", "cv"), default="ic")
    p_bench.add_argument("--ic", choices=IC_KINDS, default="gic")
    p_bench.add_argument("--folds", type=int, default=5)
    p_bench.add_argument("--support-range", default=None, help="a:b inclusive (default auto)")

    return parser


def _parse_range(text: str | None):
    if text is None:
        return None
    try:
        a, b = text.split(":")
        lo, hi = int(a), int(b)
    except ValueError:
        raise UsageError(f"--support-range must look like a:b, got {text!r}")
    if lo > hi:
        raise UsageError(f"--support-range has a > b: {text!r}")
    return lo, hi


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("BESTSUBSET_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"BESTSUBSET_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _load(args, family):
    if args.format == "sparse":
        return load_sparse(args.input, family=family)
    return load_csv(args.input, args.response, has_header=not args.no_header, family=family)


def _make_groups(args, p: int) -> GroupStructure:
    nuisance = frozenset(
        int(t) for t in args.always_include.split(",") if t.strip() != ""
    )
    if args.groups:
        return GroupStructure(load_groups(args.groups, p), nuisance)
    return GroupStructure.singletons(p, nuisance)


def _config(args, support_size: int = 0) -> SplicingConfig:
    return SplicingConfig(
        support_size=support_size,
        k_max=getattr(args, "k_max", None),
        max_splice_iter=args.max_splice_iter,
        lam=getattr(args, "lam", 0.0),
        seed=args.seed,
    )


def _prepare(args):
    """load -> optional screen; returns raw data plus index bookkeeping."""
    X_raw, y = _load(args, args.family)
    p_full = X_raw.p
    orig_names = X_raw.column_names
    if args.screen is not None:
        if args.groups:
            raise UsageError("--screen cannot be combined with --groups")
        try:
            m = default_screen_size(X_raw.n, p_full) if args.screen == "auto" else int(args.screen)
        except ValueError:
            raise UsageError(f"--screen must be an integer or 'auto', got {args.screen!r}")
        Xn_full, yn_full, _ = normalize(X_raw, y)
        col_ids = sis_screen(Xn_full, yn_full, m)
        X_raw = X_raw.take_columns(col_ids)
    else:
        col_ids = np.arange(p_full)
    groups = _make_groups(args, X_raw.p)
    return X_raw, y, groups, col_ids, p_full, orig_names


def _names(selected, orig_names):
    """Human-readable labels: header names when present, else 1-based xj."""
    if orig_names is not None:
        return [orig_names[j] for j in selected]
    return [f"x{j + 1}" for j in selected]


def _base_report(command, family, n, p, seed):
    return {
        "command": command, "family": family, "n": n, "p": p,
        "selected": [], "coefficients": [], "intercept": None,
        "deviance": None, "ic": None, "path": [], "chosen_s": None,
        "converged": True, "seed": seed, "timing_ms": 0.0,
        "version": __version__,
    }


def _entry_dict(e, no_timing):
    dev = e.deviance
    if dev != dev:  # NaN from a failed solve
        dev = None
    return {
        "s": e.s, "selected": e.support, "coefficients": e.beta,
        "intercept": e.intercept, "deviance": dev, "ic": e.ic or None,
        "cv_mean": e.cv_mean, "cv_sd": e.cv_sd, "converged": e.converged,
        "wall_time_ms": 0.0 if no_timing else e.wall_time_ms,
        "failed": e.failed, "message": e.message,
    }


def _fill_from_report(rep, report, no_timing):
    rep["path"] = [_entry_dict(e, no_timing) for e in report.entries]
    rep["chosen_s"] = report.chosen_s
    chosen = report.chosen
    if chosen is not None:
        rep["selected"] = chosen.support
        rep["coefficients"] = chosen.beta
        rep["intercept"] = chosen.intercept
        rep["deviance"] = chosen.deviance
        rep["ic"] = chosen.ic
        rep["converged"] = chosen.converged
    return rep


def _write_json(path, rep):
    assert tuple(rep.keys()) == REPORT_KEYS
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rep, fh, indent=2)
        fh.write("\n")


def _stem(output: str) -> str:
    return output[:-5] if output.endswith(".json") else output


def _write_curve(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,deviance,ic_or_cvloss\n")
        for e in report.entries:
            if e.failed:
                continue
            val = e.cv_mean if report.criterion == "cv" else e.ic[report.criterion]
            fh.write(f"{e.s},{e.deviance!r},{val!r}\n")


def rank_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n1 = labels.sum()
    n0 = labels.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise DataError("AUC needs both classes in the evaluation set")
    r = rankdata(scores)
    return float((r[labels == 1].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_fit(args) -> dict:
    X_raw, y, groups, col_ids, p_full, orig_names = _prepare(args)
    Xn, yn, back = normalize(X_raw, y)
    config = _config(args, args.support_size)
    model = solve_fixed_support(Xn, yn, args.family, groups, config)
    cols = groups.columns_of_groups(model.active)
    dev = deviance(args.family, Xn, yn, model.intercept, model.beta)
    ics = {k: information_criterion(dev, int(cols.size), Xn.n, p_full, k) for k in IC_KINDS}
    beta_raw, b0_raw = back.to_raw(model.beta, model.intercept)

    rep = _base_report("fit", args.family, Xn.n, p_full, args.seed)
    rep["selected"] = [int(col_ids[j]) for j in cols]
    rep["coefficients"] = [float(beta_raw[j]) for j in cols]
    rep["intercept"] = float(b0_raw)
    rep["deviance"] = dev
    rep["ic"] = ics
    rep["chosen_s"] = args.support_size
    rep["converged"] = bool(model.converged)
    print(f"fit: selected {' '.join(_names(rep['selected'], orig_names))} deviance={dev:.6g}")
    return rep


def _cmd_path(args) -> dict:
    X_raw, y, groups, col_ids, p_full, orig_names = _prepare(args)
    Xn, yn, back = normalize(X_raw, y)
    config = _config(args)
    rng = _parse_range(args.support_range)
    if args.gsection:
        lo, hi = rng if rng else (0, default_s_list(Xn.n, groups.n_selectable)[-1])
        report = gsection_search(
            Xn, yn, args.family, groups, config, lo, hi,
            criterion=args.ic, back=back, col_ids=col_ids, p_for_ic=p_full,
        )
    else:
        s_list = list(range(rng[0], rng[1] + 1)) if rng else None
        report = path_search(
            Xn, yn, args.family, groups, config, s_list=s_list,
            criterion=args.ic, back=back, col_ids=col_ids, p_for_ic=p_full,
        )
    rep = _base_report("path", args.family, Xn.n, p_full, args.seed)
    _fill_from_report(rep, report, args.no_timing)
    _write_curve(_stem(args.output) + ".curve.csv", report)
    print(f"path: chosen s={rep['chosen_s']}: "
          f"{' '.join(_names(rep['selected'], orig_names))} ({args.ic})")
    return rep


def _cmd_cv(args) -> dict:
    X_raw, y, groups, col_ids, p_full, orig_names = _prepare(args)
    config = _config(args)
    rng = _parse_range(args.support_range)
    if rng:
        s_list = list(range(rng[0], rng[1] + 1))
    else:
        s_list = default_s_list(X_raw.n, groups.n_selectable)
    strata = y.values if args.family == "logistic" else None
    folds = make_folds(X_raw.n, args.folds, args.seed, strata=strata)
    report = cross_validate(
        X_raw, y, args.family, groups, config, s_list, folds,
        threads=_threads(args), col_ids=col_ids, p_for_ic=p_full,
    )
    rep = _base_report("cv", args.family, X_raw.n, p_full, args.seed)
    _fill_from_report(rep, report, args.no_timing)
    _write_curve(_stem(args.output) + ".curve.csv", report)
    print(f"cv: chosen s={rep['chosen_s']}: "
          f"{' '.join(_names(rep['selected'], orig_names))} (K={args.folds})")
    return rep


def _cmd_spca(args) -> dict:
    values, names = load_csv_matrix(args.input, has_header=not args.no_header)
    if args.covariance:
        S = CovarianceView(values)
        n = values.shape[0]
    else:
        X = DesignMatrix(values, column_names=names)
        S = covariance_from_data(X)
        n = X.n
    config = SplicingConfig(
        k_max=args.k_max, max_splice_iter=args.max_splice_iter, seed=args.seed
    )
    rng = _parse_range(args.support_range)
    if rng:
        loadings = spca_path(S, list(range(max(1, rng[0]), rng[1] + 1)), config)
    else:
        loadings = [spca_fixed_support(S, args.support_size, config)]

    rep = _base_report("spca", None, n, S.p, args.seed)
    rep["path"] = [
        {
            "s": len(l.support),
            "selected": [int(j) for j in l.support],
            "coefficients": [float(v) for v in l.v[list(l.support)]],
            "explained_variance": l.explained_variance,
            "converged": l.converged,
        }
        for l in loadings
    ]
    last = loadings[-1]
    rep["selected"] = [int(j) for j in last.support]
    rep["coefficients"] = [float(v) for v in last.v[list(last.support)]]
    rep["chosen_s"] = len(last.support)
    rep["converged"] = all(l.converged for l in loadings)
    print(f"spca: s={rep['chosen_s']} explained variance={last.explained_variance:.6g}")
    return rep


def _cmd_bench(args) -> dict:
    X_raw, y, groups, col_ids, p_full, orig_names = _prepare(args)
    n = X_raw.n
    n_test = int(round(args.test_fraction * n))
    if not 0 < n_test < n - 1:
        raise UsageError(f"--test-fraction {args.test_fraction} leaves no usable split")
    rng_range = _parse_range(args.support_range)
    config = _config(args)

    def tuned_fit(X_tr_raw, y_tr):
        """Tuned path entry in the (screened) local column coordinates."""
        if rng_range:
            s_list = list(range(rng_range[0], rng_range[1] + 1))
        else:
            s_list = default_s_list(X_tr_raw.n, groups.n_selectable)
        if args.tune == "cv":
            strata = y_tr.values if args.family == "logistic" else None
            folds = make_folds(X_tr_raw.n, args.folds, args.seed, strata=strata)
            report = cross_validate(
                X_tr_raw, y_tr, args.family, groups, config, s_list, folds,
                threads=_threads(args), p_for_ic=p_full,
            )
        else:
            Xn, yn, back = normalize(X_tr_raw, y_tr)
            report = path_search(
                Xn, yn, args.family, groups, config, s_list=s_list,
                criterion=args.ic, p_for_ic=p_full, back=back,
            )
        chosen = report.chosen
        if chosen is None:
            raise DataError("benchmark fit produced no usable support size")
        return chosen

    records = []
    for rep_i in range(args.reps):
        split_rng = np.random.default_rng(args.seed + rep_i)
        perm = split_rng.permutation(n)
        te, tr = perm[:n_test], perm[n_test:]
        t0 = time.perf_counter()
        chosen = tuned_fit(X_raw.take_rows(tr), y.take_rows(tr))
        runtime = time.perf_counter() - t0
        beta_full = np.zeros(X_raw.p)
        beta_full[chosen.support] = chosen.beta
        eta_te = chosen.intercept + X_raw.matvec(beta_full)[te]
        y_te = y.values[te]
        if args.family == "logistic":
            metric = rank_auc(eta_te, y_te)
        elif args.family == "poisson":
            metric = float(np.mean((np.exp(np.clip(eta_te, -30, 30)) - y_te) ** 2))
        else:
            metric = float(np.mean((eta_te - y_te) ** 2))
        records.append({
            "rep": rep_i, "seed": args.seed + rep_i, "metric": metric,
            "nnz": len(chosen.support),
            "runtime_s": 0.0 if args.no_timing else runtime,
            "selected": [int(col_ids[j]) for j in chosen.support],
        })

    final = tuned_fit(X_raw, y)
    rep = _base_report("bench", args.family, n, p_full, args.seed)
    rep["selected"] = [int(col_ids[j]) for j in final.support]
    rep["coefficients"] = final.beta
    rep["intercept"] = final.intercept
    rep["deviance"] = final.deviance
    rep["ic"] = final.ic
    rep["chosen_s"] = final.s
    rep["converged"] = final.converged
    rep["path"] = records

    mean_metric = float(np.mean([r["metric"] for r in records]))
    mean_nnz = float(np.mean([r["nnz"] for r in records]))
    mean_rt = float(np.mean([r["runtime_s"] for r in records]))
    with open(_stem(args.output) + ".bench.csv", "w", encoding="utf-8") as fh:
        fh.write("metric,nnz,runtime\n")
        fh.write(f"{mean_metric!r},{mean_nnz!r},{mean_rt!r}\n")
    kind = "auc" if args.family == "logistic" else "mse"
    print(f"bench: mean {kind}={mean_metric:.4f} nnz={mean_nnz:.2f} "
          f"runtime={mean_rt:.3f}s over {args.reps} reps")
    return rep


def run(argv=None) -> int:
    """Parse arguments, execute the pipeline, and write the report."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    t0 = time.perf_counter()
    try:
        handler = {
            "fit": _cmd_fit,
            "path": _cmd_path,
            "cv": _cmd_cv,
            "spca": _cmd_spca,
            "bench": _cmd_bench,
        }[args.command]
        rep = handler(args)
    except BestSubsetError as e:
        print(f"bestsubset {args.command}: error: {e}", file=sys.stderr)
        return e.exit_code
    rep["timing_ms"] = 0.0 if args.no_timing else (time.perf_counter() - t0) * 1000.0
    _write_json(args.output, rep)
    return 0


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
