"""File formats: dataset/draws/stats CSVs, metadata JSON, atomic writes.

All floats are written with 17 significant digits so every emitted file
reloads to the same doubles; writes go to a temporary file in the target
directory followed by an atomic rename.
"""

import csv
import hashlib
import json
import os
import tempfile

import numpy as np

from .families import Dataset
from .reference import DrawSet

__all__ = [
    "DataError",
    "load_dataset",
    "save_dataset",
    "load_draws",
    "save_draws",
    "write_table",
    "read_table",
    "write_stats",
    "load_stats",
    "write_path",
    "write_metadata",
    "sha256_file",
]

_FLOAT_FMT = "%.17g"


class DataError(ValueError):
    """Raised when an input file fails validation; messages locate the
    offending row and column where possible."""


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FMT % value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _atomic_write(path, write_body):
    """Write via a sibling temp file and rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows):
    """Write a CSV table with a header row and %.17g floats."""

    def body(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    _atomic_write(path, body)


def read_table(path):
    """Read a CSV table; returns (header, rows of strings)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("%s: empty file" % path) from None
        rows = [row for row in reader]
    return header, rows


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def load_dataset(path, response, categories=None):
    """Load a dataset CSV.

    Parameters
    ----------
    path : str
    response : str
        Name of the response column.  Its values must be integers 1..J, or
        strings from ``categories``.
    categories : sequence of str, optional
        Ordered category labels; maps string responses to codes 1..J.

    Returns
    -------
    Dataset

    Raises
    ------
    DataError
        Missing values, unknown categories, and non-numeric predictors are
        reported with their (row, column) location; data rows are numbered
        from 1, excluding the header.
    """
    header, rows = read_table(path)
    if response not in header:
        raise DataError("%s: no response column %r" % (path, response))
    if not rows:
        raise DataError("%s: no data rows" % path)
    r_idx = header.index(response)
    pred_cols = [(i, name) for i, name in enumerate(header) if i != r_idx]
    cat_map = None
    if categories is not None:
        categories = [str(c) for c in categories]
        cat_map = {c: j + 1 for j, c in enumerate(categories)}

    X = np.empty((len(rows), len(pred_cols)))
    y = np.empty(len(rows), dtype=int)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError("%s: row %d has %d fields, expected %d"
                            % (path, r + 1, len(row), len(header)))
        raw = row[r_idx].strip()
        if raw == "":
            raise DataError("%s: missing value at row %d, column %r"
                            % (path, r + 1, response))
        if cat_map is not None:
            if raw not in cat_map:
                raise DataError("%s: unknown category %r at row %d, column %r"
                                % (path, raw, r + 1, response))
            y[r] = cat_map[raw]
        else:
            try:
                y[r] = int(raw)
            except ValueError:
                raise DataError(
                    "%s: non-integer response %r at row %d, column %r "
                    "(declare ordered categories for string responses)"
                    % (path, raw, r + 1, response)) from None
        for c, (i, name) in enumerate(pred_cols):
            cell = row[i].strip()
            if cell == "":
                raise DataError("%s: missing value at row %d, column %r"
                                % (path, r + 1, name))
            try:
                X[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    "%s: non-numeric predictor %r at row %d, column %r"
                    % (path, cell, r + 1, name)) from None
    J = len(categories) if categories is not None else None
    try:
        return Dataset(X, y, columns=[name for _, name in pred_cols], J=J,
                       categories=categories)
    except ValueError as err:
        raise DataError("%s: %s" % (path, err)) from None


def save_dataset(path, data, response="y"):
    """Write a Dataset as CSV: predictors in column order, response last.

    The response is written as its category label when the dataset carries
    one, otherwise as the integer code.
    """
    header = list(data.columns) + [response]
    labels = data.categories
    rows = []
    for i in range(data.N):
        row = list(data.X[i])
        code = int(data.y[i])
        row.append(labels[code - 1] if labels is not None else code)
        rows.append(row)
    write_table(path, header, rows)


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------


def _parse_float(path, value, r, col):
    try:
        return float(value)
    except ValueError:
        raise DataError("%s: non-numeric value %r at row %d, column %r"
                        % (path, value, r + 1, col)) from None


def load_draws(path, kind, link=None):
    """Load a DrawSet from one of the three file formats.

    ``kind`` selects the format:

    * ``"cumulative-params"`` -- columns ``zeta_1..zeta_T`` then
      ``beta_<name>`` per predictor; needs ``link``.
    * ``"categorical-params"`` -- columns ``intercept_2..intercept_J`` then
      ``coef_<j>_<name>`` for j = 2..J (category 1 is pinned and absent).
    * ``"prob-tensor"`` -- long format with columns draw, obs, category,
      prob (indices 1-based).
    """
    from .reference import IngestionError

    header, rows = read_table(path)
    try:
        if kind == "cumulative-params":
            return _load_cumulative(path, header, rows, link)
        if kind == "categorical-params":
            return _load_categorical(path, header, rows)
        if kind == "prob-tensor":
            return _load_tensor(path, header, rows)
    except IngestionError as err:
        raise DataError("%s: %s" % (path, err)) from None
    raise DataError("unknown draws kind %r" % (kind,))


def _load_cumulative(path, header, rows, link):
    T = sum(1 for h in header if h.startswith("zeta_"))
    expect = ["zeta_%d" % (t + 1) for t in range(T)]
    if T == 0 or header[:T] != expect:
        raise DataError("%s: cumulative draws need columns zeta_1..zeta_T "
                        "first" % path)
    beta_cols = header[T:]
    if any(not h.startswith("beta_") for h in beta_cols):
        raise DataError("%s: predictor columns must be named beta_<name>"
                        % path)
    names = [h[len("beta_"):] for h in beta_cols]
    zetas = np.empty((len(rows), T))
    betas = np.empty((len(rows), len(beta_cols)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError("%s: row %d has %d fields, expected %d"
                            % (path, r + 1, len(row), len(header)))
        for t in range(T):
            zetas[r, t] = _parse_float(path, row[t], r, header[t])
        for c in range(len(beta_cols)):
            betas[r, c] = _parse_float(path, row[T + c], r, beta_cols[c])
    return DrawSet("cumulative", zetas=zetas, betas=betas, link=link,
                   beta_names=names or None)


def _load_categorical(path, header, rows):
    n_int = sum(1 for h in header if h.startswith("intercept_"))
    J = n_int + 1
    expect = ["intercept_%d" % j for j in range(2, J + 1)]
    if n_int == 0 or header[:n_int] != expect:
        raise DataError("%s: categorical draws need columns "
                        "intercept_2..intercept_J first" % path)
    coef_cols = header[n_int:]
    P = len(coef_cols) // n_int if n_int else 0
    names = []
    for j in range(2, J + 1):
        for p in range(P):
            col = coef_cols[(j - 2) * P + p]
            prefix = "coef_%d_" % j
            if not col.startswith(prefix):
                raise DataError("%s: expected column coef_%d_<name>, got %r"
                                % (path, j, col))
            if j == 2:
                names.append(col[len(prefix):])
    if len(coef_cols) != n_int * P:
        raise DataError("%s: coefficient columns must cover categories 2..J "
                        "uniformly" % path)
    S = len(rows)
    intercepts = np.zeros((S, J))
    coefs = np.zeros((S, J, P))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError("%s: row %d has %d fields, expected %d"
                            % (path, r + 1, len(row), len(header)))
        for j in range(2, J + 1):
            intercepts[r, j - 1] = _parse_float(path, row[j - 2], r,
                                                header[j - 2])
            for p in range(P):
                col = (j - 2) * P + p
                coefs[r, j - 1, p] = _parse_float(
                    path, row[n_int + col], r, coef_cols[col])
    return DrawSet("categorical", intercepts=intercepts, coefs=coefs,
                   beta_names=names or None)


def _load_tensor(path, header, rows):
    if header != ["draw", "obs", "category", "prob"]:
        raise DataError("%s: prob-tensor needs columns draw,obs,category,prob"
                        % path)
    if not rows:
        raise DataError("%s: no data rows" % path)
    try:
        S = max(int(row[0]) for row in rows)
        N = max(int(row[1]) for row in rows)
        J = max(int(row[2]) for row in rows)
    except (ValueError, IndexError):
        raise DataError("%s: draw/obs/category must be integers" % path) \
            from None
    tensor = np.full((S, N, J), np.nan)
    for r, row in enumerate(rows):
        s, i, j = int(row[0]), int(row[1]), int(row[2])
        if not (1 <= s and 1 <= i and 1 <= j):
            raise DataError("%s: indices must be 1-based at row %d"
                            % (path, r + 1))
        tensor[s - 1, i - 1, j - 1] = _parse_float(path, row[3], r, "prob")
    if np.isnan(tensor).any():
        s, i, j = [int(v[0]) + 1 for v in np.where(np.isnan(tensor))]
        raise DataError("%s: missing entry for draw %d, obs %d, category %d"
                        % (path, s, i, j))
    return DrawSet("raw", tensor=tensor)


def save_draws(path, draws):
    """Write a DrawSet in the format matching its kind (see load_draws)."""
    if draws.kind == "cumulative":
        T = draws.zetas.shape[1]
        names = draws.beta_names or ["x%d" % (p + 1)
                                     for p in range(draws.betas.shape[1])]
        header = (["zeta_%d" % (t + 1) for t in range(T)]
                  + ["beta_%s" % n for n in names])
        rows = [list(draws.zetas[s]) + list(draws.betas[s])
                for s in range(draws.S_star)]
        write_table(path, header, rows)
        return
    if draws.kind == "categorical":
        J = draws.J
        P = draws.coefs.shape[2]
        names = draws.beta_names or ["x%d" % (p + 1) for p in range(P)]
        header = ["intercept_%d" % j for j in range(2, J + 1)]
        for j in range(2, J + 1):
            header += ["coef_%d_%s" % (j, n) for n in names]
        rows = []
        for s in range(draws.S_star):
            row = list(draws.intercepts[s, 1:])
            for j in range(1, J):
                row += list(draws.coefs[s, j])
            rows.append(row)
        write_table(path, header, rows)
        return
    if draws.kind == "raw":
        S, N, J = draws.tensor.shape
        rows = [[s + 1, i + 1, j + 1, draws.tensor[s, i, j]]
                for s in range(S) for i in range(N) for j in range(J)]
        write_table(path, ["draw", "obs", "category", "prob"], rows)
        return
    raise ValueError("unknown draws kind %r" % (draws.kind,))


# ---------------------------------------------------------------------------
# statistics and solution paths
# ---------------------------------------------------------------------------

_STATS_HEADER = ["size", "mlpd", "se_mlpd", "gmpd", "delta_mlpd",
                 "se_delta_mlpd", "mlpd_ref", "se_mlpd_ref", "gmpd_ref"]


def write_stats(path, stats):
    """Write a PerfStats object as a per-size CSV."""
    rows = [[int(stats.sizes[g]), stats.mlpd[g], stats.se_mlpd[g],
             stats.gmpd[g], stats.delta_mlpd[g], stats.se_delta[g],
             stats.mlpd_ref, stats.se_mlpd_ref, stats.gmpd_ref]
            for g in range(len(stats.sizes))]
    write_table(path, _STATS_HEADER, rows)


class StatsTable:
    """Per-size statistics reloaded from a stats CSV.

    Carries the fields ``suggest_size`` needs (sizes, mlpd, mlpd_ref,
    se_delta) plus the rest of the written columns.
    """

    __slots__ = ("sizes", "mlpd", "se_mlpd", "gmpd", "delta_mlpd",
                 "se_delta", "mlpd_ref", "se_mlpd_ref", "gmpd_ref")

    def __init__(self, sizes, mlpd, se_mlpd, gmpd, delta_mlpd, se_delta,
                 mlpd_ref, se_mlpd_ref, gmpd_ref):
        self.sizes = sizes
        self.mlpd = mlpd
        self.se_mlpd = se_mlpd
        self.gmpd = gmpd
        self.delta_mlpd = delta_mlpd
        self.se_delta = se_delta
        self.mlpd_ref = mlpd_ref
        self.se_mlpd_ref = se_mlpd_ref
        self.gmpd_ref = gmpd_ref


def load_stats(path):
    """Reload a stats CSV written by ``write_stats``."""
    header, rows = read_table(path)
    if header != _STATS_HEADER:
        raise DataError("%s: not a stats table (header mismatch)" % path)
    if not rows:
        raise DataError("%s: no data rows" % path)
    cols = np.array([[_parse_float(path, v, r, header[c])
                      for c, v in enumerate(row)]
                     for r, row in enumerate(rows)])
    return StatsTable(
        sizes=cols[:, 0].astype(int), mlpd=cols[:, 1], se_mlpd=cols[:, 2],
        gmpd=cols[:, 3], delta_mlpd=cols[:, 4], se_delta=cols[:, 5],
        mlpd_ref=float(cols[0, 6]), se_mlpd_ref=float(cols[0, 7]),
        gmpd_ref=float(cols[0, 8]))


def write_path(path, solution_path, stats=None):
    """Write a solution path CSV: one row per size 1..G.

    When ``stats`` is given, each row also carries that size's MLPD.
    """
    header = ["size", "predictor"]
    if stats is not None:
        header.append("mlpd")
    rows = []
    for g, name in enumerate(solution_path.names, start=1):
        row = [g, name]
        if stats is not None:
            row.append(stats.mlpd[g])
        rows.append(row)
    write_table(path, header, rows)


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_metadata(path, command, config, input_paths=()):
    """Write the run-metadata JSON: config echo, version, formula notes,
    and input checksums.  Content is deterministic for fixed inputs."""
    from . import __version__

    meta = {
        "tool": "projsel",
        "version": __version__,
        "command": command,
        "config": config,
        "formulas": {
            "pseudo_variance": "geometric mean over all J categories of "
                               "-1/(d2 log p_j / d eta2) at eta=0",
            "se_mlpd": "sd(per-observation lpd, ddof=1)/sqrt(N)",
            "se_delta_mlpd": "paired: sd(lpd - lpd_ref, ddof=1)/sqrt(N)",
            "thinning": "equally spaced draw indices, centered",
        },
        "inputs": {p: sha256_file(p) for p in input_paths},
    }

    def body(fh):
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _atomic_write(path, body)
