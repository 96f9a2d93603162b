"""Command-line interface.

Commands
--------
project
    Project one predictor subset; per-cluster parameters and KL as JSON.
varsel
    Forward search plus test-set evaluation; solution-path and per-size
    stats CSVs.
cv-varsel
    K-fold variant: the reference model is refit per fold (internal
    Laplace refit, a draws-per-fold directory, or an external refit
    command), the search re-run, and held-out performance pooled.
suggest-size
    Apply the size heuristic to a stats CSV.
simulate
    Run a seeded simulation study from a JSON config; aggregate CSVs and
    SVG plots.
report
    Render stats CSVs to an SVG plot.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The only environment override is PROJSEL_THREADS (worker count); flags
always win over it.
"""

import argparse
import json
import os
import shlex
import subprocess
import sys
import tempfile

import numpy as np

from . import __version__
from .dataio import (DataError, load_dataset, load_draws, load_stats,
                     save_dataset, write_metadata, write_path, write_stats,
                     write_table, _atomic_write)
from .families import InvalidParameterError
from .projection import ProjectionError, project
from .reference import (IngestionError, cluster_draws, clustering_features,
                        predictive_tensor, thin_draws)
from .search import (evaluate, fold_agreement, forward_search,
                     kfold_evaluate, suggest_size)
from .simulation import SimConfig, run_study
from .svgplot import bar_chart, box_plot, line_plot

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError("%s: %s" % (self.prog, message))


def _build_parser():
    parser = _Parser(prog="projsel", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version",
                        version="projsel %s" % __version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add_data_args(p, test=False):
        p.add_argument("--data", required=True, help="dataset CSV")
        p.add_argument("--response", required=True,
                       help="name of the response column")
        p.add_argument("--categories",
                       help="comma-separated ordered category labels for "
                            "string responses")
        if test:
            p.add_argument("--test", required=True,
                           help="held-out dataset CSV (same layout)")

    def add_draws_args(p):
        p.add_argument("--draws", required=True, help="reference draws file")
        p.add_argument("--draws-kind", required=True,
                       choices=["cumulative-params", "categorical-params",
                                "prob-tensor"])
        p.add_argument("--draws-link", default="probit",
                       choices=["probit", "logit"],
                       help="link of cumulative-params draws")

    def add_model_args(p, methods=False):
        p.add_argument("--family", default="cumulative",
                       choices=["cumulative", "categorical"])
        p.add_argument("--link", default="probit",
                       choices=["probit", "logit"],
                       help="submodel link (cumulative family)")
        if methods:
            p.add_argument("--method", default="augmented",
                           choices=["augmented", "latent", "both"])

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: PROJSEL_THREADS or 1)")

    p = sub.add_parser("project", help="project one predictor subset")
    add_data_args(p)
    add_draws_args(p)
    add_model_args(p)
    p.add_argument("--subset", default="",
                   help="comma-separated predictor names (empty: "
                        "intercept-only)")
    p.add_argument("--clusters", type=int, default=20)
    p.add_argument("--output", help="JSON output path (default: stdout)")
    add_common(p)

    p = sub.add_parser("varsel",
                       help="forward search + test-set evaluation")
    add_data_args(p, test=True)
    add_draws_args(p)
    add_model_args(p, methods=True)
    p.add_argument("--c-search", type=int, default=20)
    p.add_argument("--c-eval", type=int, default=400)
    p.add_argument("--g-max", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    add_common(p)

    p = sub.add_parser("cv-varsel", help="K-fold cross-validated search")
    add_data_args(p)
    add_model_args(p, methods=True)
    p.add_argument("--folds", type=int, required=True)
    p.add_argument("--c-search", type=int, default=20)
    p.add_argument("--c-eval", type=int, default=400)
    p.add_argument("--g-max", type=int, default=None)
    p.add_argument("--refit-draws-dir",
                   help="directory with full.csv and fold_<k>.csv draws "
                        "(needs --draws-kind)")
    p.add_argument("--refit-cmd",
                   help="external refit command template; {train} and "
                        "{draws} are substituted per fold")
    p.add_argument("--draws-kind",
                   choices=["cumulative-params", "categorical-params",
                            "prob-tensor"],
                   help="format of provided/refit draws files")
    p.add_argument("--draws-link", default="probit",
                   choices=["probit", "logit"])
    p.add_argument("--s-star", type=int, default=1000,
                   help="draw count for the internal Laplace refit")
    p.add_argument("--threshold-sd", type=float, default=2.5)
    p.add_argument("--coef-sd", type=float, default=1.0)
    p.add_argument("--out-dir", required=True)
    add_common(p)

    p = sub.add_parser("suggest-size",
                       help="apply the size heuristic to a stats CSV")
    p.add_argument("--stats", required=True)
    p.add_argument("--multiplier", type=float, default=1.0)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--config", required=True, help="JSON study config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("report", help="render stats CSVs to an SVG plot")
    p.add_argument("--stats", required=True, nargs="+")
    p.add_argument("--labels", help="comma-separated series labels")
    p.add_argument("--output", required=True, help="SVG output path")

    return parser


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _thread_count(args):
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise _UsageError("--threads must be positive")
        return args.threads
    env = os.environ.get("PROJSEL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise _UsageError("PROJSEL_THREADS must be an integer, got %r"
                              % env) from None
        if n < 1:
            raise _UsageError("PROJSEL_THREADS must be positive")
        return n
    return 1


def _split_csv_arg(value):
    return [v for v in (s.strip() for s in value.split(",")) if v] \
        if value else []


def _read_dataset(path, args):
    cats = _split_csv_arg(args.categories) if args.categories else None
    return load_dataset(path, response=args.response, categories=cats)


def _read_draws(args, path=None):
    link = args.draws_link if args.draws_kind == "cumulative-params" else None
    return load_draws(path or args.draws, args.draws_kind, link=link)


def _clustered_pair(draws, data, c_search, c_eval, seed):
    """Clustered (search) and thinned (eval) references from one DrawSet."""
    tensor = predictive_tensor(draws, data)
    feats = clustering_features(draws, data)
    zetas = draws.zetas if draws.kind == "cumulative" else None
    c_s = min(c_search, draws.S_star)
    c_e = min(c_eval, draws.S_star)
    clustered = cluster_draws(tensor, feats, c_s, seed=seed, zetas=zetas)
    thinned = thin_draws(tensor, c_e, features=feats, zetas=zetas)
    return clustered, thinned


def _methods(args):
    return ["augmented", "latent"] if args.method == "both" \
        else [args.method]


def _echo_config(args, keys):
    return {k: getattr(args, k.replace("-", "_")) for k in keys}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_project(args):
    threads = _thread_count(args)
    data = _read_dataset(args.data, args)
    draws = _read_draws(args)
    subset = data.column_indices(_split_csv_arg(args.subset))
    tensor = predictive_tensor(draws, data)
    feats = clustering_features(draws, data)
    zetas = draws.zetas if draws.kind == "cumulative" else None
    clustered = cluster_draws(tensor, feats, min(args.clusters, draws.S_star),
                              seed=args.seed, zetas=zetas)
    proj = project(data, clustered, subset, args.family, link=args.link,
                   threads=threads)
    clusters = []
    for c in range(proj.C):
        par = proj.params[c]
        if proj.family == "cumulative":
            entry = {"thresholds": list(par.thresholds),
                     "coefficients": list(par.coefficients)}
        else:
            entry = {"intercepts": list(par.intercepts),
                     "coefficients": [list(row) for row in par.coefficients]}
        clusters.append({"weight": float(proj.weights[c]),
                         "objective": float(proj.objectives[c]),
                         "mean_kl": float(proj.kls[c]),
                         "params": entry})
    out = {
        "family": proj.family,
        "link": proj.link,
        "subset": list(proj.names),
        "weighted_mean_kl": proj.weighted_mean_kl(),
        "clusters": clusters,
    }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.output:
        _atomic_write(args.output, lambda fh: fh.write(text))
    else:
        sys.stdout.write(text)
    return 0


def _cmd_varsel(args):
    threads = _thread_count(args)
    train = _read_dataset(args.data, args)
    test = _read_dataset(args.test, args)
    draws = _read_draws(args)
    clustered, thinned = _clustered_pair(draws, train, args.c_search,
                                         args.c_eval, args.seed)
    ref_test = predictive_tensor(draws, test).mean(axis=0)
    os.makedirs(args.out_dir, exist_ok=True)
    for method in _methods(args):
        path = forward_search(train, clustered, args.family, link=args.link,
                              method=method, G_max=args.g_max,
                              threads=threads)
        stats = evaluate(path, thinned, test, ref_test)
        write_path(os.path.join(args.out_dir, "path_%s.csv" % method), path,
                   stats=stats)
        write_stats(os.path.join(args.out_dir, "stats_%s.csv" % method),
                    stats)
    cfg = _echo_config(args, ["response", "categories", "family", "link",
                              "method", "c_search", "c_eval", "g_max",
                              "seed", "draws_kind", "draws_link"])
    write_metadata(os.path.join(args.out_dir, "metadata.json"), "varsel",
                   cfg, input_paths=[args.data, args.test, args.draws])
    return 0


def _fold_seed(seed, tag):
    return int(np.random.SeedSequence((seed, 0x5EED, tag))
               .generate_state(1)[0])


def _make_provider(args, data):
    """Build (provider, full_draws_loader) for cv-varsel's refit source."""
    if args.refit_draws_dir:
        if not args.draws_kind:
            raise _UsageError("--refit-draws-dir needs --draws-kind")

        def provider(f, train):
            path = os.path.join(args.refit_draws_dir,
                                "fold_%d.csv" % (f + 1))
            return _read_draws(args, path=path)

        def full():
            return _read_draws(args,
                               path=os.path.join(args.refit_draws_dir,
                                                 "full.csv"))

        return provider, full

    if args.refit_cmd:
        if not args.draws_kind:
            raise _UsageError("--refit-cmd needs --draws-kind")

        def refit(train, tag):
            with tempfile.TemporaryDirectory() as tmp:
                train_csv = os.path.join(tmp, "train.csv")
                draws_csv = os.path.join(tmp, "draws.csv")
                save_dataset(train_csv, train, response=args.response)
                argv = [tok.format(train=train_csv, draws=draws_csv)
                        for tok in shlex.split(args.refit_cmd)]
                try:
                    subprocess.run(argv, check=True, capture_output=True)
                except (subprocess.CalledProcessError, OSError) as err:
                    raise ProjectionError(
                        "refit command failed for %s: %s" % (tag, err)
                    ) from None
                if not os.path.exists(draws_csv):
                    raise ProjectionError(
                        "refit command wrote no draws file for %s" % tag)
                return _read_draws(args, path=draws_csv)

        return (lambda f, train: refit(train, "fold %d" % (f + 1)),
                lambda: refit(data, "full data"))

    from .simulation import fit_reference_laplace

    def provider(f, train):
        return fit_reference_laplace(
            train, family=args.family, link=args.link, S_star=args.s_star,
            seed=_fold_seed(args.seed, f + 1),
            threshold_sd=args.threshold_sd, coef_sd=args.coef_sd)

    def full():
        return fit_reference_laplace(
            data, family=args.family, link=args.link, S_star=args.s_star,
            seed=_fold_seed(args.seed, 0),
            threshold_sd=args.threshold_sd, coef_sd=args.coef_sd)

    return provider, full


def _cmd_cv_varsel(args):
    if args.refit_draws_dir and args.refit_cmd:
        raise _UsageError("--refit-draws-dir and --refit-cmd are exclusive")
    threads = _thread_count(args)
    data = _read_dataset(args.data, args)
    provider, load_full = _make_provider(args, data)
    full_draws = load_full()
    clustered_full, _ = _clustered_pair(full_draws, data, args.c_search,
                                        args.c_eval, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    for method in _methods(args):
        full_path = forward_search(data, clustered_full, args.family,
                                   link=args.link, method=method,
                                   G_max=args.g_max, threads=threads)
        stats, fold_paths = kfold_evaluate(
            data, provider, args.folds, args.family, link=args.link,
            method=method, G_max=args.g_max, seed=args.seed,
            C_search=args.c_search, C_eval=args.c_eval, workers=threads)
        agree = fold_agreement(fold_paths, full_path)
        write_path(os.path.join(args.out_dir, "path_%s.csv" % method),
                   full_path)
        write_stats(os.path.join(args.out_dir, "stats_%s.csv" % method),
                    stats)
        write_table(os.path.join(args.out_dir, "agreement_%s.csv" % method),
                    ["size"] + list(agree["names"]),
                    [[int(agree["sizes"][g])] + list(agree["proportions"][g])
                     for g in range(len(agree["sizes"]))])
    cfg = _echo_config(args, ["response", "categories", "family", "link",
                              "method", "folds", "c_search", "c_eval",
                              "g_max", "seed", "s_star", "threshold_sd",
                              "coef_sd", "refit_cmd", "refit_draws_dir"])
    write_metadata(os.path.join(args.out_dir, "metadata.json"), "cv-varsel",
                   cfg, input_paths=[args.data])
    return 0


def _cmd_suggest_size(args):
    stats = load_stats(args.stats)
    size = suggest_size(stats, multiplier=args.multiplier)
    print("NA" if size.value is None else size.value)
    return 0


_SIM_KEYS = ("N", "P", "J", "p0", "R", "link", "seed", "S_star", "C_search",
             "C_eval", "G_max", "nu", "s", "tau_fixed", "threshold_sd",
             "coef_sd", "multiplier")


def _load_sim_config(path, workers):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise DataError("%s: invalid JSON: %s" % (path, err)) from None
    if not isinstance(raw, dict):
        raise DataError("%s: config must be a JSON object" % path)
    unknown = sorted(set(raw) - set(_SIM_KEYS))
    if unknown:
        raise DataError("%s: unknown config keys: %s"
                        % (path, ", ".join(unknown)))
    try:
        return SimConfig(workers=workers, **raw)
    except (TypeError, ValueError) as err:
        raise DataError("%s: %s" % (path, err)) from None


def _pad_series(arrays):
    """Stack per-iteration vectors of unequal length, NaN-padded."""
    width = max(len(a) for a in arrays)
    out = np.full((len(arrays), width), np.nan)
    for i, a in enumerate(arrays):
        out[i, :len(a)] = a
    return out


def _write_study_plots(out_dir, results, tables):
    sizes = np.arange(_pad_series(
        [r.stats_aug.sizes for r in results]).shape[1])
    for method, attr in (("augmented", "stats_aug"), ("latent", "stats_lat")):
        delta = _pad_series([getattr(r, attr).delta_mlpd for r in results])
        line_plot(os.path.join(out_dir, "delta_mlpd_%s.svg" % method),
                  sizes, list(delta), hline=0.0,
                  title="MLPD difference to the reference (%s)" % method,
                  xlabel="submodel size", ylabel="delta MLPD")
    diff = _pad_series([r.stats_lat.mlpd - r.stats_aug.mlpd
                        for r in results])
    line_plot(os.path.join(out_dir, "mlpd_diff.svg"), sizes, list(diff),
              hline=0.0, title="MLPD: latent minus augmented",
              xlabel="submodel size", ylabel="MLPD difference")
    se_diff = _pad_series([r.stats_lat.se_delta - r.stats_aug.se_delta
                           for r in results])
    line_plot(os.path.join(out_dir, "se_diff.svg"), sizes, list(se_diff),
              hline=0.0, title="SE of delta MLPD: latent minus augmented",
              xlabel="submodel size", ylabel="SE difference")
    _, hist_rows = tables["size_diff_hist"]
    bar_chart(os.path.join(out_dir, "size_diff_hist.svg"),
              [row[0] for row in hist_rows],
              [row[1] for row in hist_rows],
              title="suggested size: latent minus augmented",
              xlabel="size difference")
    box_plot(os.path.join(out_dir, "runtimes.svg"),
             [[r.runtime_aug for r in results],
              [r.runtime_lat for r in results]],
             labels=["augmented", "latent"],
             title="search + evaluation runtime", ylabel="minutes")


def _cmd_simulate(args):
    threads = _thread_count(args)
    cfg = _load_sim_config(args.config, workers=threads)
    results, tables, failures = run_study(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    for name in ("persize", "iterations", "size_diff_hist", "gmin_table",
                 "runtimes"):
        header, rows = tables[name]
        write_table(os.path.join(args.out_dir, "%s.csv" % name), header,
                    rows)
    write_table(os.path.join(args.out_dir, "failures.csv"),
                ["iteration", "error"], failures)
    if results:
        _write_study_plots(args.out_dir, results, tables)
    echo = {k: getattr(cfg, k) for k in _SIM_KEYS}
    write_metadata(os.path.join(args.out_dir, "metadata.json"), "simulate",
                   echo, input_paths=[args.config])
    return 0


def _cmd_report(args):
    labels = (_split_csv_arg(args.labels) if args.labels
              else [os.path.splitext(os.path.basename(p))[0]
                    for p in args.stats])
    if len(labels) != len(args.stats):
        raise _UsageError("need one label per stats file")
    tables = [load_stats(p) for p in args.stats]
    widest = max(tables, key=lambda t: len(t.sizes))
    series = _pad_series([t.mlpd for t in tables])
    line_plot(args.output, widest.sizes, list(series), labels=labels,
              title="predictive performance by submodel size",
              xlabel="submodel size", ylabel="MLPD",
              hline=float(tables[0].mlpd_ref))
    return 0


_COMMANDS = {
    "project": _cmd_project,
    "varsel": _cmd_varsel,
    "cv-varsel": _cmd_cv_varsel,
    "suggest-size": _cmd_suggest_size,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except SystemExit as err:
        return int(err.code or 0)
    except (ProjectionError, np.linalg.LinAlgError, FloatingPointError,
            OverflowError, RuntimeError) as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return 3
    except (DataError, IngestionError, InvalidParameterError, KeyError,
            FileNotFoundError, IsADirectoryError, NotADirectoryError,
            PermissionError, ValueError) as err:
        print("data error: %s" % _strip_quotes(err), file=sys.stderr)
        return 2


def _strip_quotes(err):
    if isinstance(err, KeyError) and err.args:
        return err.args[0]
    return err


if __name__ == "__main__":
    sys.exit(main())
