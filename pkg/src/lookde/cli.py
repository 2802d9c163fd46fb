"""Command-line interface.

Exit codes: 0 success, 1 usage or I/O error, 2 optimiser did not converge,
3 numerical singularity.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataError,
    Dataset,
    NormStats,
    SplitSpec,
    load_csv,
    save_csv,
    train_test_split,
    zscore_apply,
    zscore_fit,
)
from .density import (
    KernelDensityModel,
    collapse_curve,
    loo_mll,
    loo_upper_bound,
    override_bandwidth,
    total_mll,
)
from .gmm import GmmFailure, fit_gmm, matched_component_count
from .persist import ModelFileError, StoredModel, _fmt_float, load_model, save_model, write_json
from .pipeline import PipelineConfig, compare_models
from .trainer import AdamConfig, DuplicateRowsError, EmConfig, FitError, FitStatus, fit_adam, fit_em

log = logging.getLogger("lookde")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_SINGULAR = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _columns(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else []


def _read(path, args) -> Dataset:
    return load_csv(path, drop_columns=_columns(getattr(args, "drop_columns", None)))


def _normalise(data: Dataset, enabled: bool) -> tuple[Dataset, NormStats]:
    stats = zscore_fit(data) if enabled else NormStats.identity(data.n_dims)
    return zscore_apply(data, stats), stats


def cmd_fit(args) -> int:
    raw = _read(args.input, args)
    data, stats = _normalise(raw, not args.no_normalize)
    prov = {"command": "fit", "input": os.fspath(args.input), "model_kind": args.model_kind,
            "normalize": not args.no_normalize, "seed": args.seed}

    if args.model_kind == "gmm":
        if args.k is None and args.match_params is None:
            raise UsageError("gmm needs --k or --match-params {a,pi}")
        k = args.k or matched_component_count(data.n_rows, data.n_dims, args.match_params)
        res = fit_gmm(data, k, seed=args.seed, max_iter=args.max_iter, threshold=args.threshold, reg=args.reg)
        prov.update(k=k, match_params=args.match_params, threshold=args.threshold,
                    max_iter=args.max_iter, reg=args.reg, iterations=res.iterations)
        if res.failure is GmmFailure.COVARIANCE_SINGULAR:
            print(f"gmm fit failed: singular covariance ({res.message})", file=sys.stderr)
            return EXIT_SINGULAR
        if res.failure is GmmFailure.NOT_CONVERGED:
            print(f"gmm fit failed: {res.message}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        prov["status"] = "converged"
        save_model(args.out, StoredModel(res.model, stats, raw.feature_names, raw.n_rows, prov))
        return EXIT_OK

    pi = args.model_kind == "pi-kde"
    try:
        if args.optimizer == "adam":
            if pi:
                raise UsageError("the adam optimizer fits a-kde only")
            cfg = AdamConfig(learning_rate=args.lr, batch_size=args.batch_size,
                             convergence_threshold=args.threshold, max_epochs=args.max_iter,
                             initial_bandwidth=args.init_bandwidth, seed=args.seed)
            model, trace = fit_adam(data, cfg)
        else:
            cfg = EmConfig(convergence_threshold=args.threshold, max_iterations=args.max_iter,
                           initial_bandwidth=args.init_bandwidth, fit_weights=pi)
            model, trace = fit_em(data, cfg)
    except DuplicateRowsError as exc:
        raise UsageError(f"{exc} (e.g. drop duplicate rows before fitting)") from None
    prov.update(optimizer=args.optimizer, config=dict(cfg.__dict__),
                status=trace.status.value, iterations=trace.n_iterations)
    save_model(args.out, StoredModel(model, stats, raw.feature_names, raw.n_rows, prov))
    if args.trace:
        trace.to_csv(args.trace)
    if trace.status is not FitStatus.CONVERGED:
        print(f"warning: no convergence after {trace.n_iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sample(args) -> int:
    stored = load_model(args.model)
    n = stored.n_train if args.n is None else args.n
    x = stored.sample_original(n, args.seed)
    save_csv(args.out, x, stored.feature_names)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    stored = load_model(args.model)
    raw = _read(args.input, args)
    data = zscore_apply(raw, stored.norm_stats)
    m = stored.model
    if isinstance(m, KernelDensityModel):
        total = total_mll(m, data).value
    else:
        total = float(np.sum(m.log_density(data.values)))
    out = {"model": os.fspath(args.model), "input": os.fspath(args.input), "kind": stored.kind,
           "n_points": data.n_rows, "total_mll": total, "mean_mll": total / data.n_rows}
    if isinstance(m, KernelDensityModel):
        out["train_loo_mll"] = loo_mll(m).value
        out["train_loo_mll_unweighted"] = loo_mll(m, weighted=False).value
        out["train_loo_upper_bound"] = loo_upper_bound(m.centers)
    print("\n".join(f"{k}: {v}" for k, v in out.items()))
    if args.out:
        write_json(args.out, out)
    return EXIT_OK


class _InSpace:
    """Samples a stored model, then maps the draws into another normalisation."""

    def __init__(self, stored: StoredModel, stats: NormStats):
        self.stored, self.stats = stored, stats

    def sample(self, n, seed):
        x = self.stored.sample_original(n, seed)
        return (x - self.stats.means) / self.stats.std_devs


def cmd_compare(args) -> int:
    train_raw = _read(args.input, args)
    test_raw = _read(args.test, args)
    if test_raw.n_dims != train_raw.n_dims:
        raise UsageError("train and test files have different column counts")
    overlap = {tuple(r) for r in train_raw.values} & {tuple(r) for r in test_raw.values}
    if overlap:
        print(f"warning: {len(overlap)} row(s) appear in both train and test data", file=sys.stderr)
    stats = zscore_fit(train_raw) if not args.no_normalize else NormStats.identity(train_raw.n_dims)
    train, test = zscore_apply(train_raw, stats), zscore_apply(test_raw, stats)

    models = {}
    for path in args.models:
        stored = load_model(path)
        if stored.model.n_dims != train.n_dims:
            raise UsageError(f"{path}: model dimension {stored.model.n_dims} != data dimension {train.n_dims}")
        name = Path(path).stem
        if name in models:
            raise UsageError(f"duplicate model name {name!r}; rename one of the files")
        models[name] = _InSpace(stored, stats)

    cfg = PipelineConfig(n_mc=args.n_mc, subsample_ratio=args.ratio,
                         n_model_samples=args.n_model_samples, master_seed=args.seed)
    report = compare_models(models, train, test, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    d["config"] = {**d["config"], "train": os.fspath(args.input), "test": os.fspath(args.test),
                   "models": [os.fspath(p) for p in args.models], "normalize": not args.no_normalize}
    write_json(out / "report.json", d)

    dataset = args.dataset_name or Path(args.input).stem
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "sample_test", "model", "KS", "CvM", "DeltaMean"])
        for ts in report.baseline:
            for m in report.comparison:
                s = report.comparison[m][ts]
                w.writerow([dataset, ts, m] + [_fmt_float(s[k]) for k in ("KS", "CvM", "DeltaMean")])
    with open(out / "ecdf.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "sample_test", "value", "fraction"])
        for name, ts, v, f in report.ecdf_table():
            w.writerow([name, ts, _fmt_float(v), _fmt_float(f)])
    return EXIT_OK


def _grid(text):
    return [float(s) for s in text.split(",")]


def cmd_collapse_demo(args) -> int:
    raw = _read(args.input, args)
    data, _ = _normalise(raw, not args.no_normalize)
    if data.has_duplicates:
        raise UsageError("data has repeated rows: the leave-one-out bound is undefined; deduplicate first")
    model = KernelDensityModel.a_kde(data.values, args.init_bandwidth)
    bound = loo_upper_bound(data.values)
    rows = []
    for s, tot in collapse_curve(model, data, args.j, args.sigmas):
        loo = loo_mll(override_bandwidth(model, args.j, s)).value
        rows.append((s, tot, loo, bound))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "total_mll", "loo_mll", "loo_bound"])
        for r in rows:
            w.writerow([_fmt_float(v) for v in r])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_split(args) -> int:
    data = _read(args.input, args)
    train, test = train_test_split(data, SplitSpec(args.train_fraction, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(out / "train.csv", train.values, train.feature_names)
    save_csv(out / "test.csv", test.values, test.feature_names)
    return EXIT_OK


DEFAULT_SIGMAS = [10.0 ** -k for k in range(1, 9)]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lookde", description="Adaptive KDE fitted by leave-one-out likelihood.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--drop-columns", default=None, help="comma-separated names or 0-based indices")
        sp.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fit", help="fit a density model")
    common(f)
    f.add_argument("--input", required=True)
    f.add_argument("--model-kind", choices=["a-kde", "pi-kde", "gmm"], default="a-kde")
    f.add_argument("--k", type=int, default=None)
    f.add_argument("--match-params", choices=["a", "pi"], default=None)
    f.add_argument("--threshold", type=float, default=1e-4)
    f.add_argument("--init-bandwidth", type=float, default=0.1)
    f.add_argument("--optimizer", choices=["em", "adam"], default="em")
    f.add_argument("--lr", type=float, default=0.05)
    f.add_argument("--batch-size", type=int, default=128)
    f.add_argument("--max-iter", type=int, default=10_000)
    f.add_argument("--reg", type=float, default=0.0, help="gmm only: add reg*I to covariances")
    f.add_argument("--no-normalize", action="store_true")
    f.add_argument("--trace", default=None, help="write the fit trace CSV here")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="draw samples in original units")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("evaluate", help="log-likelihood of a model on a CSV")
    common(e)
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="two-step Monte-Carlo model comparison")
    common(c)
    c.add_argument("--input", required=True, help="training CSV")
    c.add_argument("--test", required=True)
    c.add_argument("models", nargs="+")
    c.add_argument("--n-mc", type=int, default=1000)
    c.add_argument("--ratio", type=float, default=0.5)
    c.add_argument("--n-model-samples", type=int, default=None)
    c.add_argument("--no-normalize", action="store_true")
    c.add_argument("--dataset-name", default=None)
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("collapse-demo", help="plain vs leave-one-out likelihood under bandwidth collapse")
    common(d)
    d.add_argument("--input", required=True)
    d.add_argument("--j", type=int, default=0)
    d.add_argument("--sigmas", type=_grid, default=DEFAULT_SIGMAS)
    d.add_argument("--init-bandwidth", type=float, default=0.1)
    d.add_argument("--no-normalize", action="store_true")
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_collapse_demo)

    sp = sub.add_parser("split", help="random train/test split")
    common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--train-fraction", type=float, default=0.8)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_split)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DataError, ModelFileError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
