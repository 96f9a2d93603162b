"""Simulation-study harness: sparse ordinal data, a Laplace reference, and
an iterated comparison of the augmented-data and latent projections.

Each study iteration builds thresholds on the link scale, draws sparse
coefficients from a regularized horseshoe, generates train/test datasets
from a cumulative model, approximates a reference posterior by a Laplace
fit at a penalized mode, and runs forward search plus test-set evaluation
once per projection method on the shared reference.  Aggregate tables feed
the reporting layer.
"""

import collections
import concurrent.futures
import hashlib
import time
import warnings

import numpy as np

from .families import Dataset, cumulative_pmf_matrix, get_link
from .projection import (
    ProjectionError,
    _categorical_loglik_derivs,
    _chain_to_gamma,
    _cumulative_loglik_derivs,
    _gamma_to_zeta,
    _newton_maximize,
    _zeta_to_gamma,
)
from .reference import DrawSet, cluster_draws, clustering_features, \
    predictive_tensor, thin_draws
from .search import evaluate, forward_search, suggest_size

__all__ = [
    "SimConfig",
    "SimIterationResult",
    "make_thresholds",
    "pseudo_variance",
    "tau0",
    "draw_rhs_coefficients",
    "generate_dataset",
    "fit_reference_laplace",
    "run_study",
    "aggregate_tables",
]


class SimConfig:
    """Settings for one simulation study.

    Parameters
    ----------
    N, P, J : int
        Observations per dataset (train and test alike), predictors,
        response categories.
    p0 : int
        Prior guess of the number of relevant predictors, 0 < p0 < P.
    R : int
        Iteration count.
    link : str
    seed : int
        Master seed; per-iteration seeds derive from it by iteration index.
    S_star : int
        Reference draw count.
    C_search, C_eval : int
        Reference resolutions (clustered search, thinned evaluation).
    G_max : int or None
        Largest searched size; None means all P predictors.
    nu, s : float
        Slab degrees of freedom and scale of the regularized horseshoe.
    tau_fixed : bool
        Fix the global scale at tau0 instead of half-Cauchy(0, tau0).
    threshold_sd, coef_sd : float
        Gaussian working-prior scales of the Laplace reference fit;
        coef_sd defaults to the slab scale ``s``.
    multiplier : float
        SE multiplier of the size-suggestion rule.
    workers : int
        Iterations run in a process pool when > 1.
    """

    __slots__ = ("N", "P", "J", "p0", "R", "link", "seed", "S_star",
                 "C_search", "C_eval", "G_max", "nu", "s", "tau_fixed",
                 "threshold_sd", "coef_sd", "multiplier", "workers")

    def __init__(self, N=100, P=20, J=5, p0=5, R=30, link="probit", seed=0,
                 S_star=2000, C_search=20, C_eval=400, G_max=None, nu=100.0,
                 s=1.0, tau_fixed=False, threshold_sd=2.5, coef_sd=None,
                 multiplier=1.0, workers=1):
        if not 0 < p0 < P:
            raise ValueError("p0 must lie strictly between 0 and P")
        if J < 2:
            raise ValueError("need at least two categories")
        if R < 1:
            raise ValueError("need at least one iteration")
        self.N = int(N)
        self.P = int(P)
        self.J = int(J)
        self.p0 = int(p0)
        self.R = int(R)
        self.link = link
        self.seed = int(seed)
        self.S_star = int(S_star)
        self.C_search = int(C_search)
        self.C_eval = int(C_eval)
        self.G_max = None if G_max is None else int(G_max)
        self.nu = float(nu)
        self.s = float(s)
        self.tau_fixed = bool(tau_fixed)
        self.threshold_sd = float(threshold_sd)
        self.coef_sd = self.s if coef_sd is None else float(coef_sd)
        self.multiplier = float(multiplier)
        self.workers = int(workers)


class SimIterationResult:
    """Everything retained from one study iteration.

    Both methods share the same train/test datasets and reference draws;
    the checksums make that assertable after the fact.
    """

    __slots__ = ("iteration", "beta", "zeta", "checksums", "stats_aug",
                 "stats_lat", "order_aug", "order_lat", "size_aug",
                 "size_lat", "runtime_aug", "runtime_lat")

    def __init__(self, iteration, beta, zeta, checksums, stats_aug,
                 stats_lat, order_aug, order_lat, size_aug, size_lat,
                 runtime_aug, runtime_lat):
        self.iteration = iteration
        self.beta = beta
        self.zeta = zeta
        self.checksums = checksums
        self.stats_aug = stats_aug
        self.stats_lat = stats_lat
        self.order_aug = tuple(order_aug)
        self.order_lat = tuple(order_lat)
        self.size_aug = size_aug
        self.size_lat = size_lat
        self.runtime_aug = runtime_aug
        self.runtime_lat = runtime_lat


# ---------------------------------------------------------------------------
# data-generating process
# ---------------------------------------------------------------------------


def make_thresholds(J, link):
    """Equally spaced thresholds on the probability scale: zeta_j = g(j/J)."""
    if J < 2:
        raise ValueError("need at least two categories")
    link = get_link(link)
    return link.forward(np.arange(1, J) / float(J))


def pseudo_variance(zeta, link):
    """Overall pseudo variance of the latent predictor at eta = 0.

    Per category j the pseudo variance is the inverse observed information
    of the latent predictor, -1 / (d^2 log p_j(eta) / d eta^2) at eta = 0
    (where all categories are equally likely by construction of
    ``make_thresholds``); the overall value is their geometric mean.  The
    mean runs over all J categories, using both boundary densities of each
    category (the edge categories have one boundary at infinity, where the
    density vanishes).
    """
    link = get_link(link)
    zeta = np.asarray(zeta, dtype=float)
    J = zeta.size + 1
    lo = np.concatenate([[-np.inf], zeta])
    hi = np.concatenate([zeta, [np.inf]])
    with np.errstate(invalid="ignore"):
        phi_lo = np.where(np.isfinite(lo), link.density(lo), 0.0)
        phi_hi = np.where(np.isfinite(hi), link.density(hi), 0.0)
        dphi_lo = np.where(np.isfinite(lo), link.density_prime(lo), 0.0)
        dphi_hi = np.where(np.isfinite(hi), link.density_prime(hi), 0.0)
    p = link.inverse(hi) - link.inverse(lo)
    # p_j(eta) = G(hi - eta) - G(lo - eta):
    #   dp/deta = phi_lo - phi_hi,  d2p/deta2 = dphi_hi - dphi_lo
    dp = phi_lo - phi_hi
    d2p = dphi_hi - dphi_lo
    d2logp = (d2p * p - dp ** 2) / p ** 2
    return float(np.exp(np.mean(np.log(-1.0 / d2logp))))


def tau0(p0, P, sigma, N):
    """Global-scale center of the regularized horseshoe.

    tau0 = p0 / (P - p0) * sigma / sqrt(N), with ``sigma`` the pseudo
    standard deviation.
    """
    if not 0 < p0 < P:
        raise ValueError("p0 must lie strictly between 0 and P")
    if N < 1:
        raise ValueError("N must be positive")
    return p0 / float(P - p0) * sigma / np.sqrt(N)


def draw_rhs_coefficients(P, tau0_value, nu, s, seed, tau_fixed=False):
    """Draw a coefficient vector from the regularized horseshoe prior.

    beta_p = tau * lambda~_p * z_p with z_p ~ N(0,1), local scales
    lambda_p ~ half-Cauchy(0,1), global scale tau ~ half-Cauchy(0, tau0)
    (or fixed at tau0), slab c^2 ~ Inv-Gamma(nu/2, nu s^2 / 2) and
    lambda~_p^2 = c^2 lambda_p^2 / (c^2 + tau^2 lambda_p^2).
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    z = rng.standard_normal(P)
    lam = np.abs(rng.standard_cauchy(P))
    tau = tau0_value if tau_fixed else abs(rng.standard_cauchy()) * tau0_value
    c2 = (nu * s * s / 2.0) / rng.gamma(nu / 2.0)
    lam_tilde = np.sqrt(c2 * lam ** 2 / (c2 + tau ** 2 * lam ** 2))
    return tau * lam_tilde * z


def generate_dataset(beta, zeta, link, N, seed):
    """Generate a dataset from the cumulative model (x ~ N(0,1))."""
    beta = np.asarray(beta, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    X = rng.standard_normal((N, beta.size))
    probs = cumulative_pmf_matrix(np.asarray(zeta, dtype=float), link,
                                  X @ beta)
    u = rng.random(N)
    y = 1 + (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    y = np.minimum(y, probs.shape[1])  # guard the cumsum-rounding edge
    return Dataset(X, y, J=probs.shape[1])


# ---------------------------------------------------------------------------
# Laplace reference
# ---------------------------------------------------------------------------


def _cumulative_laplace_mode(data, link, threshold_sd, coef_sd):
    """Penalized-ML mode and natural-space Hessian of the cumulative model."""
    link = get_link(link)
    N, J, k = data.N, data.J, data.P
    T = J - 1
    W = np.zeros((N, J))
    W[np.arange(N), data.y - 1] = 1.0
    pen = np.concatenate([np.full(T, 1.0 / threshold_sd ** 2),
                          np.full(k, 1.0 / coef_sd ** 2)])

    def evaluate(u, derivs=True):
        zeta = _gamma_to_zeta(u[:T])
        beta = u[T:]
        if not np.isfinite(zeta).all():
            return (-np.inf, None, None) if derivs else -np.inf
        theta = np.concatenate([zeta, beta])
        obj, grad_n, hess_n = _cumulative_loglik_derivs(zeta, beta, data.X,
                                                        W, link, derivs=derivs)
        obj -= 0.5 * float(pen @ theta ** 2)
        if not derivs:
            return obj
        grad_n = grad_n - pen * theta
        hess_n = hess_n - np.diag(pen)
        grad, hess = _chain_to_gamma(u, T, grad_n, hess_n)
        return obj, grad, hess

    q = np.bincount(data.y, minlength=J + 1)[1:].astype(float)
    F = np.clip(np.cumsum(q / q.sum())[:-1], 1e-3, 1 - 1e-3)
    for j in range(1, F.size):
        F[j] = max(F[j], F[j - 1] + 1e-6)
    zeta0 = link.forward(F)
    u0 = np.concatenate([_zeta_to_gamma(zeta0), np.zeros(k)])

    def natural(u):
        return np.concatenate([_gamma_to_zeta(u[:T]), u[T:]])

    u, _, _, _ = _newton_maximize(evaluate, u0, natural)
    zeta_hat = _gamma_to_zeta(u[:T])
    beta_hat = u[T:]
    _, _, hess_n = _cumulative_loglik_derivs(zeta_hat, beta_hat, data.X, W,
                                             link)
    return zeta_hat, beta_hat, hess_n - np.diag(pen)


def _categorical_laplace_mode(data, threshold_sd, coef_sd):
    """Penalized-ML mode and Hessian of the categorical model."""
    N, J, k = data.N, data.J, data.P
    m = 1 + k
    W = np.zeros((N, J))
    W[np.arange(N), data.y - 1] = 1.0
    X1 = np.concatenate([np.ones((N, 1)), data.X], axis=1)
    pen_row = np.concatenate([[1.0 / threshold_sd ** 2],
                              np.full(k, 1.0 / coef_sd ** 2)])
    pen = np.tile(pen_row, J - 1)

    def evaluate(u, derivs=True):
        obj, grad, hess = _categorical_loglik_derivs(u.reshape(J - 1, m),
                                                     X1, W)
        obj -= 0.5 * float(pen @ u ** 2)
        if not derivs:
            return obj
        return obj, grad - pen * u, hess - np.diag(pen)

    u0 = np.zeros((J - 1) * m)
    u, _, _, _ = _newton_maximize(evaluate, u0, lambda v: v)
    _, _, hess = _categorical_loglik_derivs(u.reshape(J - 1, m), X1, W)
    return u, hess - np.diag(pen)


def _laplace_samples(mean, hess, S, rng):
    """Draws from N(mean, (-hess)^{-1}) via a Cholesky factor."""
    cov = np.linalg.inv(-hess)
    cov = (cov + cov.T) / 2.0
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        vals = np.maximum(vals, 1e-12)
        L = vecs * np.sqrt(vals)
    return mean + rng.standard_normal((S, mean.size)) @ L.T


def fit_reference_laplace(data, family="cumulative", link="probit",
                          S_star=1000, seed=0, threshold_sd=2.5,
                          coef_sd=1.0):
    """Approximate reference posterior: Laplace fit at a penalized mode.

    The model is fit by penalized maximum likelihood under Gaussian working
    priors (thresholds/intercepts N(0, threshold_sd^2), coefficients
    N(0, coef_sd^2)), then ``S_star`` draws are taken from the Gaussian
    approximation at the mode.  Cumulative draws with non-monotone
    thresholds are rejected and resampled.

    Returns
    -------
    DrawSet
    """
    rng = np.random.default_rng(seed)
    if family == "categorical":
        m = 1 + data.P
        mode, hess = _categorical_laplace_mode(data, threshold_sd, coef_sd)
        flat = _laplace_samples(mode, hess, S_star, rng)
        theta = flat.reshape(S_star, data.J - 1, m)
        intercepts = np.concatenate(
            [np.zeros((S_star, 1)), theta[:, :, 0]], axis=1)
        coefs = np.concatenate(
            [np.zeros((S_star, 1, data.P)), theta[:, :, 1:]], axis=1)
        return DrawSet("categorical", intercepts=intercepts, coefs=coefs)
    if family != "cumulative":
        raise ValueError("unknown family %r" % (family,))

    T = data.J - 1
    zeta_hat, beta_hat, hess = _cumulative_laplace_mode(
        data, link, threshold_sd, coef_sd)
    mean = np.concatenate([zeta_hat, beta_hat])
    kept = []
    n_kept = 0
    for _ in range(200):
        flat = _laplace_samples(mean, hess, S_star, rng)
        ok = np.all(np.diff(flat[:, :T], axis=1) > 0, axis=1) if T > 1 \
            else np.ones(S_star, dtype=bool)
        kept.append(flat[ok])
        n_kept += int(ok.sum())
        if n_kept >= S_star:
            break
    else:
        raise ProjectionError(
            "Laplace sampling kept %d/%d draws after 200 batches; "
            "threshold posterior too diffuse" % (n_kept, S_star))
    flat = np.concatenate(kept, axis=0)[:S_star]
    return DrawSet("cumulative", zetas=flat[:, :T], betas=flat[:, T:],
                   link=get_link(link).kind)


# ---------------------------------------------------------------------------
# the study
# ---------------------------------------------------------------------------


def _checksum(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _iteration_seeds(master, r):
    """Five independent integer seeds for iteration r (0-based)."""
    ss = np.random.SeedSequence(master, spawn_key=(r,))
    state = ss.generate_state(5)
    return {name: int(state[i]) for i, name in enumerate(
        ("beta", "train", "test", "fit", "kmeans"))}


def _run_iteration(args):
    """One complete study iteration (module-level for process pools)."""
    cfg, r = args
    seeds = _iteration_seeds(cfg.seed, r)
    zeta = make_thresholds(cfg.J, cfg.link)
    sigma = np.sqrt(pseudo_variance(zeta, cfg.link))
    t0 = tau0(cfg.p0, cfg.P, sigma, cfg.N)
    beta = draw_rhs_coefficients(cfg.P, t0, cfg.nu, cfg.s, seeds["beta"],
                                 tau_fixed=cfg.tau_fixed)
    train = generate_dataset(beta, zeta, cfg.link, cfg.N, seeds["train"])
    test = generate_dataset(beta, zeta, cfg.link, cfg.N, seeds["test"])
    draws = fit_reference_laplace(
        train, family="cumulative", link=cfg.link, S_star=cfg.S_star,
        seed=seeds["fit"], threshold_sd=cfg.threshold_sd,
        coef_sd=cfg.coef_sd)

    tensor = predictive_tensor(draws, train)
    feats = clustering_features(draws, train)
    C_s = min(cfg.C_search, cfg.S_star)
    clustered_search = cluster_draws(tensor, feats, C_s,
                                     seed=seeds["kmeans"], zetas=draws.zetas)
    C_e = min(cfg.C_eval, cfg.S_star)
    thinned = thin_draws(tensor, C_e, features=feats, zetas=draws.zetas)
    ref_test = predictive_tensor(draws, test).mean(axis=0)
    G_max = cfg.P if cfg.G_max is None else cfg.G_max

    out = {}
    for method in ("augmented", "latent"):
        start = time.perf_counter()
        path = forward_search(train, clustered_search, "cumulative",
                              link=cfg.link, method=method, G_max=G_max)
        stats = evaluate(path, thinned, test, ref_test)
        minutes = (time.perf_counter() - start) / 60.0
        size = suggest_size(stats, cfg.multiplier)
        out[method] = (stats, tuple(path.names), size.value, minutes)

    checksums = {
        "train": _checksum(train.X, train.y),
        "test": _checksum(test.X, test.y),
        "draws": _checksum(draws.zetas, draws.betas),
    }
    return SimIterationResult(
        iteration=r + 1,
        beta=beta,
        zeta=zeta,
        checksums=checksums,
        stats_aug=out["augmented"][0],
        stats_lat=out["latent"][0],
        order_aug=out["augmented"][1],
        order_lat=out["latent"][1],
        size_aug=out["augmented"][2],
        size_lat=out["latent"][2],
        runtime_aug=out["augmented"][3],
        runtime_lat=out["latent"][3],
    )


def run_study(cfg):
    """Run the full R-iteration study.

    Iterations are independent and seeded by index, so results do not
    depend on ``cfg.workers``.  Per-iteration failures are recorded and
    skipped; the run aborts if more than 20% of iterations fail.

    Returns
    -------
    (results, tables, failures)
        ``results``: list of SimIterationResult in iteration order;
        ``tables``: aggregate tables from ``aggregate_tables``;
        ``failures``: list of (iteration, message).
    """
    tasks = [(cfg, r) for r in range(cfg.R)]
    results = []
    failures = []

    def handle(r, outcome, error):
        if error is not None:
            failures.append((r + 1, str(error)))
            warnings.warn("iteration %d failed: %s" % (r + 1, error),
                          RuntimeWarning)
        else:
            results.append(outcome)

    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=cfg.workers) as ex:
            futures = [ex.submit(_run_iteration, t) for t in tasks]
            for r, fut in enumerate(futures):
                try:
                    handle(r, fut.result(), None)
                except Exception as err:  # noqa: BLE001 - recorded, rethrown on quota
                    handle(r, None, err)
    else:
        for r, task in enumerate(tasks):
            try:
                handle(r, _run_iteration(task), None)
            except Exception as err:  # noqa: BLE001
                handle(r, None, err)

    if len(failures) > 0.2 * cfg.R:
        raise RuntimeError(
            "%d of %d study iterations failed; first failure: %s"
            % (len(failures), cfg.R, failures[0][1]))
    results.sort(key=lambda res: res.iteration)
    return results, aggregate_tables(results), failures


def _fmt_size(value):
    return "NA" if value is None else str(int(value))


def aggregate_tables(results):
    """Aggregate study outputs as {name: (header, rows)} tables.

    persize
        One row per iteration, method, and size: the per-size performance
        statistics (sources of the per-size curves and SE-difference
        figures).
    iterations
        One row per iteration: reference performance, suggested sizes,
        the MLPD/GMPD differences at G_min = min(size_aug, size_lat)
        (empty when either size is absent), the median across sizes of
        SE(dMLPD_lat) - SE(dMLPD_aug), and both selection orders.
    size_diff_hist
        Counts of size_lat - size_aug, with NA_aug / NA_lat / NA_both
        categories always enumerated.
    gmin_table
        Iterations where both sizes exist, sorted ascending by
        GMPD_lat - GMPD_aug at G_min.
    runtimes
        Per-iteration wall-clock minutes per method (not deterministic;
        kept out of the other tables).
    """
    persize = []
    iterations = []
    diffs = []
    na_aug = na_lat = na_both = 0
    gmin_rows = []
    runtimes = []
    for res in results:
        for method, stats in (("augmented", res.stats_aug),
                              ("latent", res.stats_lat)):
            for g in range(stats.G + 1):
                persize.append([
                    res.iteration, method, g, stats.mlpd[g],
                    stats.se_mlpd[g], stats.gmpd[g], stats.delta_mlpd[g],
                    stats.se_delta[g], stats.mlpd_ref,
                ])
        se_diff = np.median(res.stats_lat.se_delta - res.stats_aug.se_delta)
        if res.size_aug is None and res.size_lat is None:
            na_both += 1
        elif res.size_aug is None:
            na_aug += 1
        elif res.size_lat is None:
            na_lat += 1
        else:
            diffs.append(res.size_lat - res.size_aug)
        if res.size_aug is not None and res.size_lat is not None:
            gmin = min(res.size_aug, res.size_lat)
            mlpd_diff = (res.stats_lat.mlpd[gmin] - res.stats_aug.mlpd[gmin])
            gmpd_diff = (res.stats_lat.gmpd[gmin] - res.stats_aug.gmpd[gmin])
            gmin_rows.append([res.iteration, gmin,
                              res.stats_aug.gmpd[gmin],
                              res.stats_lat.gmpd[gmin], gmpd_diff,
                              mlpd_diff])
        else:
            gmin, mlpd_diff, gmpd_diff = None, None, None
        iterations.append([
            res.iteration, res.stats_aug.mlpd_ref, res.stats_aug.gmpd_ref,
            _fmt_size(res.size_aug), _fmt_size(res.size_lat),
            _fmt_size(gmin),
            "" if mlpd_diff is None else mlpd_diff,
            "" if gmpd_diff is None else gmpd_diff,
            se_diff,
            "+".join(res.order_aug), "+".join(res.order_lat),
        ])
        runtimes.append([res.iteration, res.runtime_aug, res.runtime_lat])

    hist = [["%d" % d, c] for d, c in
            sorted(collections.Counter(diffs).items())]
    hist += [["NA_aug", na_aug], ["NA_lat", na_lat], ["NA_both", na_both]]
    gmin_rows.sort(key=lambda row: row[4])

    return {
        "persize": (
            ["iteration", "method", "size", "mlpd", "se_mlpd", "gmpd",
             "delta_mlpd", "se_delta_mlpd", "mlpd_ref"], persize),
        "iterations": (
            ["iteration", "mlpd_ref", "gmpd_ref", "size_aug", "size_lat",
             "gmin", "mlpd_lat_minus_aug_at_gmin",
             "gmpd_lat_minus_aug_at_gmin", "median_se_delta_lat_minus_aug",
             "order_aug", "order_lat"], iterations),
        "size_diff_hist": (["category", "count"], hist),
        "gmin_table": (
            ["iteration", "gmin", "gmpd_aug", "gmpd_lat",
             "gmpd_lat_minus_aug", "mlpd_lat_minus_aug"], gmin_rows),
        "runtimes": (
            ["iteration", "runtime_aug_minutes", "runtime_lat_minutes"],
            runtimes),
    }
