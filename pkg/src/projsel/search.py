"""Forward search, predictive evaluation, and size suggestion.

The search phase ranks predictor subsets with a coarsely clustered
reference (cheap, many candidate projections); final per-size statistics
are recomputed against a finer thinned reference.  Performance is measured
by the mean log predictive density (MLPD) on held-out data, with standard
errors from per-observation quantities and paired differences against the
reference model.
"""

import concurrent.futures
import warnings

import numpy as np

from .families import CategoricalParams, CumulativeParams
from .latent import latent_predict_response, latent_project
from .projection import ProjectionError, project, submodel_predict
from .reference import (
    cluster_draws,
    clustering_features,
    predictive_tensor,
    thin_draws,
)

__all__ = [
    "SolutionPath",
    "PerfStats",
    "SuggestedSize",
    "forward_search",
    "evaluate",
    "kfold_evaluate",
    "suggest_size",
    "fold_agreement",
]

_LPD_FLOOR = 1e-300


class SolutionPath:
    """Nested predictor subsets produced by forward search.

    Attributes
    ----------
    method : str
        "augmented" or "latent".
    family : str
    link : str or None
    order : tuple of int
        Column indices in selection order; the size-g subset is order[:g].
    names : tuple of str
    submodels : list
        Search-phase projected submodels for sizes 0..G.
    data : Dataset
        The training data the search ran on (kept so evaluation can
        re-project at a different reference resolution).
    warnings : list of str
        Candidate projections skipped during the search.
    """

    __slots__ = ("method", "family", "link", "order", "names", "submodels",
                 "data", "warnings")

    def __init__(self, method, family, link, order, names, submodels, data,
                 warnings=()):
        self.method = method
        self.family = family
        self.link = link
        self.order = tuple(order)
        self.names = tuple(names)
        self.submodels = list(submodels)
        self.data = data
        self.warnings = list(warnings)

    @property
    def G(self):
        """Largest explored size."""
        return len(self.order)

    def subset(self, g):
        """The size-g subset (column indices, selection order)."""
        return self.order[:g]

    def __repr__(self):
        return "SolutionPath(method=%r, order=%s)" % (self.method,
                                                      list(self.names))


class PerfStats:
    """Per-size predictive performance with standard errors.

    All arrays are indexed by submodel size 0..G.  GMPD entries are
    ``exp`` of the matching MLPD entries by construction.

    Attributes
    ----------
    sizes : ndarray of int
    mlpd, se_mlpd, gmpd, delta_mlpd, se_delta : ndarray, shape (G+1,)
    mlpd_ref, se_mlpd_ref, gmpd_ref : float
        Reference-model statistics on the same observations.
    lpds : ndarray, shape (G+1, N)
        Per-observation log predictive densities (kept for SEs).
    lpds_ref : ndarray, shape (N,)
    """

    __slots__ = ("method", "sizes", "mlpd", "se_mlpd", "gmpd", "delta_mlpd",
                 "se_delta", "mlpd_ref", "se_mlpd_ref", "gmpd_ref", "lpds",
                 "lpds_ref", "n_test")

    def __init__(self, method, lpds, lpds_ref):
        lpds = np.asarray(lpds, dtype=float)
        lpds_ref = np.asarray(lpds_ref, dtype=float)
        self.method = method
        self.lpds = lpds
        self.lpds_ref = lpds_ref
        self.n_test = lpds.shape[1]
        self.sizes = np.arange(lpds.shape[0])
        self.mlpd = lpds.mean(axis=1)
        self.gmpd = np.exp(self.mlpd)
        self.se_mlpd = np.array([_se(row) for row in lpds])
        self.mlpd_ref = float(lpds_ref.mean())
        self.gmpd_ref = float(np.exp(self.mlpd_ref))
        self.se_mlpd_ref = _se(lpds_ref)
        self.delta_mlpd = self.mlpd - self.mlpd_ref
        self.se_delta = np.array([_se(row - lpds_ref) for row in lpds])

    @property
    def G(self):
        return len(self.sizes) - 1

    def __repr__(self):
        return "PerfStats(method=%r, sizes=0..%d, mlpd_ref=%.4f)" % (
            self.method, self.G, self.mlpd_ref)


class SuggestedSize:
    """Smallest size whose MLPD is within ``multiplier`` SEs of the reference.

    ``value`` is None when no size in the searched range qualifies.
    """

    __slots__ = ("value", "multiplier")

    def __init__(self, value, multiplier):
        self.value = value
        self.multiplier = float(multiplier)

    @property
    def absent(self):
        return self.value is None

    def __repr__(self):
        return "SuggestedSize(value=%s, multiplier=%g)" % (self.value,
                                                           self.multiplier)


def _se(x):
    """Standard error of a mean: sample sd / sqrt(n); 0 for n < 2."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    return float(x.std(ddof=1) / np.sqrt(x.size))


def _padded_init(submodel, family):
    """Warm starts for a one-predictor-larger subset (append a zero)."""
    if submodel is None:
        return None
    if family == "cumulative":
        return [CumulativeParams(p.thresholds,
                                 np.append(p.coefficients, 0.0))
                for p in submodel.params]
    return [CategoricalParams(
        p.intercepts,
        np.hstack([p.coefficients, np.zeros((p.coefficients.shape[0], 1))]))
        for p in submodel.params]


def _fit_subset(data, clustered, subset, family, link, method, init=None):
    """Project one subset with the requested method."""
    if method == "latent":
        return latent_project(data, clustered, subset)
    return project(data, clustered, subset, family, link, init=init)


def forward_search(data, clustered_search, family, link=None,
                   method="augmented", G_max=None, threads=1):
    """Greedy forward selection of predictors.

    At each size the candidate maximizing the cluster-weight-weighted
    projected objective joins the subset; ties break toward the lowest
    column index.  A candidate whose projection fails is skipped with a
    warning; if every candidate fails the path is returned truncated.

    Parameters
    ----------
    data : Dataset
    clustered_search : ClusteredReference
        Search-resolution reference (typically a small cluster count).
    family : str
    link : str or Link, optional
    method : {"augmented", "latent"}
    G_max : int, optional
        Largest size to explore; defaults to min(P, 19).
    threads : int
        Candidate projections within a step run in a thread pool.

    Returns
    -------
    SolutionPath
    """
    if method not in ("augmented", "latent"):
        raise ValueError("method must be 'augmented' or 'latent'")
    if method == "latent" and family != "cumulative":
        raise ValueError("latent projection requires the cumulative family")
    P = data.P
    if G_max is None:
        G_max = min(P, 19)
    if G_max > P:
        raise ValueError("G_max %d exceeds predictor count %d" % (G_max, P))

    skipped = []
    base = _fit_subset(data, clustered_search, [], family, link, method)
    order = []
    submodels = [base]
    current = base
    for _ in range(G_max):
        candidates = [j for j in range(P) if j not in order]
        init = _padded_init(current if method == "augmented" else None, family)
        fits = _candidate_fits(data, clustered_search, order, candidates,
                               family, link, method, init, threads, skipped)
        best_j = None
        best_fit = None
        for j, fit in fits:
            if fit is None:
                continue
            if best_fit is None or fit.score() > best_fit.score():
                best_j, best_fit = j, fit
        if best_fit is None:
            warnings.warn("forward search truncated at size %d: every "
                          "candidate projection failed" % len(order),
                          RuntimeWarning)
            break
        order.append(best_j)
        submodels.append(best_fit)
        current = best_fit
    return SolutionPath(
        method=method,
        family=family,
        link=_link_kind(family, link),
        order=order,
        names=[data.columns[j] for j in order],
        submodels=submodels,
        data=data,
        warnings=skipped,
    )


def _link_kind(family, link):
    if family != "cumulative":
        return None
    from .families import get_link

    return get_link(link).kind


def _candidate_fits(data, clustered, order, candidates, family, link, method,
                    init, threads, skipped):
    """Fit every candidate extension, in ascending column order."""

    def one(j):
        try:
            return _fit_subset(data, clustered, list(order) + [j], family,
                               link, method, init=init)
        except ProjectionError as err:
            msg = "size %d candidate %s skipped: %s" % (
                len(order) + 1, data.columns[j], err)
            warnings.warn(msg, RuntimeWarning)
            skipped.append(msg)
            return None

    if threads > 1 and len(candidates) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            fits = list(ex.map(one, candidates))
    else:
        fits = [one(j) for j in candidates]
    return list(zip(candidates, fits))


def _size_lpds(data, clustered, order, family, link, method, test):
    """Per-size, per-test-observation log predictive densities.

    Re-projects onto each nested subset of ``order`` against ``clustered``
    (the evaluation-resolution reference) and scores ``test``.

    Returns
    -------
    ndarray, shape (len(order)+1, N_test)
    """
    G = len(order)
    out = np.empty((G + 1, test.N))
    yidx = test.y - 1
    rows = np.arange(test.N)
    prev = None
    for g in range(G + 1):
        subset = list(order[:g])
        if method == "latent":
            fit = latent_project(data, clustered, subset)
            pmf = latent_predict_response(fit, test, link)
        else:
            init = _padded_init(prev, family) if g else None
            fit = project(data, clustered, subset, family, link, init=init)
            pmf = submodel_predict(fit, test)
            prev = fit
        out[g] = np.log(np.maximum(pmf[rows, yidx], _LPD_FLOOR))
    return out


def _reference_lpds(reference_test_probs, test):
    probs = np.asarray(reference_test_probs, dtype=float)
    if probs.shape != (test.N, test.J):
        raise ValueError("reference test probabilities must be N_test x J")
    if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise ValueError("reference test probabilities are not normalized")
    return np.log(np.maximum(probs[np.arange(test.N), test.y - 1],
                             _LPD_FLOOR))


def evaluate(path, clustered_eval, test, reference_test_probs):
    """Per-size predictive performance of a solution path on test data.

    Each size is re-projected against ``clustered_eval`` (typically thinned
    draws, finer than the search resolution) using the path's training
    data, then scored on ``test``.

    Parameters
    ----------
    path : SolutionPath
    clustered_eval : ClusteredReference
    test : Dataset
        Held-out observations; categories must lie in 1..J of the training
        data.
    reference_test_probs : ndarray, shape (N_test, J)
        Reference-model predictive probabilities for the test observations.

    Returns
    -------
    PerfStats
    """
    if test.N < 1:
        raise ValueError("test dataset is empty")
    if test.J != path.data.J:
        raise ValueError("test data have %d categories, training %d"
                         % (test.J, path.data.J))
    lpds_ref = _reference_lpds(reference_test_probs, test)
    lpds = _size_lpds(path.data, clustered_eval, path.order, path.family,
                      path.link, path.method, test)
    return PerfStats(path.method, lpds, lpds_ref)


def suggest_size(stats, multiplier=1.0):
    """Smallest size whose MLPD is within ``multiplier`` SEs of the reference.

    The rule accepts size g when
    ``MLPD(g) >= MLPD* - multiplier * SE(dMLPD(g))``; when no explored size
    qualifies the result is absent.
    """
    for g in range(len(stats.sizes)):
        if stats.mlpd[g] >= stats.mlpd_ref - multiplier * stats.se_delta[g]:
            return SuggestedSize(int(stats.sizes[g]), multiplier)
    return SuggestedSize(None, multiplier)


# ---------------------------------------------------------------------------
# K-fold cross-validation
# ---------------------------------------------------------------------------


def _stratified_folds(y, K, seed):
    """Fold label per observation, stratified by response category.

    Categories are dealt round-robin (with a running offset so overall
    fold sizes stay balanced) after a seeded shuffle within each category.
    """
    rng = np.random.default_rng(seed)
    N = y.size
    fold_of = np.empty(N, dtype=int)
    offset = 0
    for j in np.unique(y):
        idx = np.where(y == j)[0]
        rng.shuffle(idx)
        fold_of[idx] = (offset + np.arange(idx.size)) % K
        offset += idx.size
    return fold_of


def _subset_dataset(data, mask):
    from .families import Dataset

    return Dataset(data.X[mask], data.y[mask], columns=data.columns,
                   J=data.J, categories=data.categories)


def _kfold_fold_task(args):
    """Search and evaluate one CV fold (module-level for process pools)."""
    (f, train, test, draws, family, link, method, G_max, C_search, C_eval,
     kmeans_seed) = args
    tensor = predictive_tensor(draws, train)
    feats = clustering_features(draws, train)
    zetas = draws.zetas if draws.kind == "cumulative" else None
    C_s = min(C_search, tensor.shape[0])
    clustered_search = cluster_draws(tensor, feats, C_s, seed=kmeans_seed,
                                     zetas=zetas)
    path = forward_search(train, clustered_search, family, link=link,
                          method=method, G_max=G_max)
    C_e = min(C_eval, tensor.shape[0])
    thinned = thin_draws(tensor, C_e, features=feats, zetas=zetas)
    lpds = _size_lpds(train, thinned, path.order, family, path.link, method,
                      test)
    ref_pmf = predictive_tensor(draws, test).mean(axis=0)
    ref_lpds = np.log(np.maximum(
        ref_pmf[np.arange(test.N), test.y - 1], _LPD_FLOOR))
    return f, path, lpds, ref_lpds


def kfold_evaluate(data, draws_provider, K, family, link=None,
                   method="augmented", G_max=None, seed=0, C_search=20,
                   C_eval=400, workers=1):
    """Cross-validated solution paths and pooled predictive performance.

    Folds are stratified by response category.  For each fold the provider
    supplies reference draws refit on the training portion; the search runs
    there and the held-out portion is scored.  Per-observation lpds are
    pooled over all N observations before MLPD/SE computation.

    Parameters
    ----------
    data : Dataset
    draws_provider : callable
        ``draws_provider(fold_index, train_data) -> DrawSet``.  Called
        serially in the parent process, in fold order.
    K : int
        Fold count, 2..N.
    family, link, method, G_max : as in ``forward_search``.
    seed : int
        Drives both the fold assignment and per-fold k-means seeding.
    C_search, C_eval : int
        Reference resolutions for the search and evaluation phases (capped
        at the per-fold draw count).
    workers : int
        Folds run in a process pool when > 1; output is identical to the
        serial order either way.

    Returns
    -------
    (PerfStats, list of SolutionPath)
        Pooled statistics over sizes 0..min_f G_f, and one path per fold.
    """
    if not 2 <= K <= data.N:
        raise ValueError("K must lie in 2..N")
    if G_max is None:
        G_max = min(data.P, 19)
    fold_of = _stratified_folds(data.y, K, seed)
    counts = np.bincount(data.y, minlength=data.J + 1)[1:]
    for f in range(K):
        held = fold_of == f
        for j in range(1, data.J + 1):
            if counts[j - 1] - int(np.sum(data.y[held] == j)) < 1:
                raise ValueError(
                    "training portion of fold %d would lack response "
                    "category %d; use a smaller K" % (f + 1, j))

    tasks = []
    for f in range(K):
        held = fold_of == f
        train = _subset_dataset(data, ~held)
        test = _subset_dataset(data, held)
        draws = draws_provider(f, train)
        kseed = int(np.random.SeedSequence(seed, spawn_key=(f,))
                    .generate_state(1)[0])
        tasks.append((f, train, test, draws, family, link, method, G_max,
                      C_search, C_eval, kseed))

    results = [None] * K
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            for f, path, lpds, ref_lpds in ex.map(_kfold_fold_task, tasks):
                results[f] = (path, lpds, ref_lpds)
    else:
        for task in tasks:
            f, path, lpds, ref_lpds = _kfold_fold_task(task)
            results[f] = (path, lpds, ref_lpds)

    paths = [r[0] for r in results]
    G_common = min(p.G for p in paths)
    pooled = np.empty((G_common + 1, data.N))
    pooled_ref = np.empty(data.N)
    for f in range(K):
        held = np.where(fold_of == f)[0]
        _, lpds, ref_lpds = results[f]
        pooled[:, held] = lpds[: G_common + 1]
        pooled_ref[held] = ref_lpds
    return PerfStats(method, pooled, pooled_ref), paths


def fold_agreement(paths, full_path):
    """Proportion of folds placing each full-path predictor at each size.

    Parameters
    ----------
    paths : sequence of SolutionPath
        Per-fold paths.
    full_path : SolutionPath
        The full-data path whose predictors label the columns.

    Returns
    -------
    dict with keys "sizes" (1..G), "names" (full-path predictors, search
    order) and "proportions" (ndarray, sizes x predictors).
    """
    if not paths:
        raise ValueError("no fold paths given")
    G = full_path.G
    K = len(paths)
    table = np.zeros((G, G))
    for p in paths:
        for g in range(G):
            if g < p.G:
                j = p.order[g]
                if j in full_path.order:
                    table[g, full_path.order.index(j)] += 1.0
    table /= K
    return {
        "sizes": list(range(1, G + 1)),
        "names": list(full_path.names),
        "proportions": table,
    }
