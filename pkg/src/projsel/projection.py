"""Augmented-data projection: per-cluster weighted maximum likelihood.

The projection of a reference predictive a_{c,i,y} onto a predictor subset
solves, independently for each cluster c,

    theta_c = argmax_theta  sum_i sum_y  a_{c,i,y} * log p(y | x_i, theta),

a weighted maximum-likelihood problem over an augmented dataset with N*J
rows (each observation repeated once per candidate response value, laid out
in J blocks of N rows).  The attained objective also yields the mean KL
divergence from the cluster predictive to the fitted submodel through

    mean KL = (1/N) * [ sum_{i,y} a log a  -  objective ],

with the 0*log(0) := 0 convention.

The optimizer is an exact Newton method with analytic gradient and Hessian,
Armijo backtracking, and an eigenvalue-shift fallback when the Hessian is
not negative definite.  Threshold monotonicity is enforced by optimizing
(zeta_1, log successive gaps) instead of the thresholds themselves.
"""

import concurrent.futures

import numpy as np

from .families import (
    CategoricalParams,
    CumulativeParams,
    _category_log_probs,
    cumulative_pmf_matrix,
    categorical_pmf_matrix,
    get_link,
    softmax_rows,
)
from .reference import predictive_tensor, thin_draws

__all__ = [
    "AugmentedDataset",
    "ProjectedSubmodel",
    "ProjectionError",
    "build_augmented",
    "project",
    "project_cluster",
    "project_draw_by_draw",
    "submodel_predict",
]

GRAD_TOL = 1e-8
OBJ_RTOL = 1e-12
MAX_ITER = 100
PARAM_BOUND = 1e6
ARMIJO_C = 1e-4
_TINY = 1e-300
# Once the convergence contract (GRAD_TOL + OBJ_RTOL) is met, a few extra
# undamped Newton steps drive the gradient toward _GRAD_TARGET; quadratic
# local convergence makes this 1-2 cheap iterations and shrinks the
# parameter error far below the 1e-8 stopping resolution.
_GRAD_TARGET = 1e-11
_POLISH_STEPS = 5


class ProjectionError(RuntimeError):
    """Projection failure: non-convergence or separation-induced divergence.

    Attributes
    ----------
    last_params : ndarray
        The final iterate (natural parameter space).
    grad_norm : float
        Gradient infinity-norm at the final iterate.
    cluster : int or None
        Cluster index, attached by ``project``.
    """

    def __init__(self, message, last_params=None, grad_norm=None, cluster=None):
        super().__init__(message)
        self.last_params = last_params
        self.grad_norm = grad_norm
        self.cluster = cluster


class AugmentedDataset:
    """The N*J-row augmented dataset of one cluster's projection problem.

    Rows are laid out in J blocks of N: block j holds every observation with
    candidate response value j and weight a_{c,i,j}.

    Attributes
    ----------
    obs_index : ndarray, shape (N*J,)
        0-based original observation indices.
    y_value : ndarray, shape (N*J,)
        Candidate response value (1..J) of each row.
    weight : ndarray, shape (N*J,)
        a_{c,i,y} for row (i, y).
    X : ndarray, shape (N*J, k)
        Predictor sub-matrix, repeated per block.
    """

    __slots__ = ("N", "J", "obs_index", "y_value", "weight", "X",
                 "subset", "columns")

    def __init__(self, N, J, obs_index, y_value, weight, X, subset, columns):
        self.N = N
        self.J = J
        self.obs_index = obs_index
        self.y_value = y_value
        self.weight = weight
        self.X = X
        self.subset = tuple(subset)
        self.columns = tuple(columns)

    def weight_matrix(self):
        """Weights reshaped to (N, J)."""
        return self.weight.reshape(self.J, self.N).T

    def predictor_matrix(self):
        """One copy of the predictor sub-matrix, shape (N, k)."""
        return self.X[: self.N]


class ProjectedSubmodel:
    """Per-cluster projected parameters for one predictor subset.

    Attributes
    ----------
    family : str
    link : str or None
    subset : tuple of int
        Column indices, in selection order.
    names : tuple of str
        Column names matching ``subset``.
    params : list
        One CumulativeParams/CategoricalParams per cluster.
    weights : ndarray, shape (C,)
        Cluster weights |I_c|.
    objectives : ndarray, shape (C,)
        Attained weighted log-likelihoods.
    kls : ndarray, shape (C,)
        Mean KL divergences (over observations) per cluster.
    """

    __slots__ = ("family", "link", "subset", "names", "params", "weights",
                 "objectives", "kls", "n_obs")

    def __init__(self, family, link, subset, names, params, weights,
                 objectives, kls, n_obs):
        self.family = family
        self.link = link
        self.subset = tuple(subset)
        self.names = tuple(names)
        self.params = params
        self.weights = np.asarray(weights, dtype=float)
        self.objectives = np.asarray(objectives, dtype=float)
        self.kls = np.asarray(kls, dtype=float)
        self.n_obs = n_obs

    @property
    def C(self):
        return len(self.params)

    def score(self):
        """Cluster-weight-weighted total objective (forward-search criterion)."""
        return float(self.weights @ self.objectives)

    def weighted_mean_kl(self):
        """Cluster-weight-averaged mean KL divergence."""
        return float(self.weights @ self.kls / self.weights.sum())

    def __repr__(self):
        return "ProjectedSubmodel(family=%r, subset=%s, C=%d)" % (
            self.family, list(self.names), self.C)


def build_augmented(data, clustered, cluster, subset):
    """Build the augmented dataset for one cluster and predictor subset.

    Parameters
    ----------
    data : Dataset
    clustered : ClusteredReference
    cluster : int
        Cluster index 0..C-1.
    subset : sequence of column names or indices (may be empty).

    Returns
    -------
    AugmentedDataset
        J blocks of N rows; weight of row (i, y) equals a_{c,i,y}.
    """
    idx = data.column_indices(subset)
    W = clustered.probs[cluster]
    N, J = W.shape
    if N != data.N:
        raise ValueError("clustered reference covers %d observations, data has %d"
                         % (N, data.N))
    Xs = data.X[:, idx]
    return AugmentedDataset(
        N=N,
        J=J,
        obs_index=np.tile(np.arange(N), J),
        y_value=np.repeat(np.arange(1, J + 1), N),
        weight=W.T.reshape(-1).copy(),
        X=np.tile(Xs, (J, 1)),
        subset=idx,
        columns=[data.columns[i] for i in idx],
    )


def _wmul(W, T):
    """Elementwise W*T with exact zeros where W == 0 (0*log(0) := 0)."""
    with np.errstate(all="ignore"):
        prod = W * T
    return np.where(W != 0.0, prod, 0.0)


def _cumulative_loglik_derivs(zeta, beta, X, W, link, derivs=True):
    """Objective, gradient, and Hessian of the weighted cumulative log-likelihood.

    Derivatives are taken with respect to the natural parameters
    (zeta_1..zeta_{J-1}, beta_1..beta_k).  Every per-cell term is built
    from the ratios density/mass and density'/mass evaluated as
    exp(log density - log mass), so cells whose category mass underflows
    in double precision (or whose upper-tail CDF rounds to 1) still yield
    finite, correctly scaled derivatives.

    Parameters
    ----------
    zeta : ndarray, shape (J-1,)
    beta : ndarray, shape (k,)
    X : ndarray, shape (N, k)
    W : ndarray, shape (N, J)
        Nonnegative weights; zero-weight cells contribute exactly 0.
    link : str or Link
    derivs : bool
        When False, skip the derivative assembly and return
        (objective, None, None); line-search probes only need the value.

    Returns
    -------
    (objective, gradient, hessian)
        gradient has shape (J-1+k,), hessian (J-1+k, J-1+k).
    """
    link = get_link(link)
    N, J = W.shape
    T = J - 1
    k = X.shape[1]
    eta = X @ beta if k else np.zeros(N)
    z = zeta[None, :] - eta[:, None]                     # (N, T)
    logp = _category_log_probs(z, link)
    obj = float(_wmul(W, logp).sum())
    if not derivs:
        return obj, None, None

    # Per-category edge ratios: for category j with edges L = z_{j-1} and
    # R = z_j (z_0 = -inf, z_J = +inf), rL = density(L)/p_j,
    # rR = density(R)/p_j, and sL/sR the same with density'.  These stay
    # moderate wherever the exact values are; a genuinely degenerate
    # (near-zero-width) category can still overflow them, and such steps
    # are rejected by the solver's finiteness guards.
    with np.errstate(all="ignore"):
        logphi = link.log_density(z)
        dpod = link.density_ratio(z)                     # density'/density
        rL = np.zeros((N, J))
        rR = np.zeros((N, J))
        rR[:, :T] = np.exp(logphi - logp[:, :T])
        rL[:, 1:] = np.exp(logphi - logp[:, 1:])
        sL = np.zeros((N, J))
        sR = np.zeros((N, J))
        sR[:, :T] = dpod * rR[:, :T]
        sL[:, 1:] = dpod * rL[:, 1:]
        A = rL - rR                                      # dlog p_j / d eta

        # --- gradient -------------------------------------------------
        grad = np.empty(T + k)
        # d/d zeta_t: + w_t density_t / p_t - w_{t+1} density_t / p_{t+1}
        WrR = _wmul(W, rR)
        WrL = _wmul(W, rL)
        grad[:T] = (WrR[:, :T] - WrL[:, 1:]).sum(axis=0)
        if k:
            grad[T:] = X.T @ _wmul(W, A).sum(axis=1)

        # --- Hessian --------------------------------------------------
        H = np.zeros((T + k, T + k))
        # zeta-zeta block (tridiagonal)
        diag = (_wmul(W[:, :T], sR[:, :T] - rR[:, :T] * rR[:, :T])
                - _wmul(W[:, 1:], sL[:, 1:] + rL[:, 1:] * rL[:, 1:])
                ).sum(axis=0)
        for t in range(T):
            H[t, t] = diag[t]
        if T > 1:
            off = _wmul(W[:, 1:T], rL[:, 1:T] * rR[:, 1:T]).sum(axis=0)
            for t in range(T - 1):
                H[t, t + 1] = H[t + 1, t] = off[t]
        if k:
            # zeta-eta cross terms, per observation and threshold
            D = (_wmul(W[:, 1:], sL[:, 1:] + rL[:, 1:] * A[:, 1:])
                 - _wmul(W[:, :T], sR[:, :T] + rR[:, :T] * A[:, :T]))
            H[:T, T:] = D.T @ X
            H[T:, :T] = H[:T, T:].T
            h_eta = (_wmul(W, sR - sL) - _wmul(W, A * A)).sum(axis=1)
            H[T:, T:] = X.T @ (h_eta[:, None] * X)
    return obj, grad, H


def _categorical_loglik_derivs(theta, X1, W):
    """Objective, gradient, Hessian of the weighted multinomial log-likelihood.

    Parameters
    ----------
    theta : ndarray, shape (J-1, 1+k)
        Free parameters: row j-2 holds (alpha_j, beta_j) for category j >= 2
        (category 1 pinned to zero).
    X1 : ndarray, shape (N, 1+k)
        Design matrix with a leading column of ones.
    W : ndarray, shape (N, J)

    Returns
    -------
    (objective, gradient, hessian) with gradient flattened row-major.
    """
    N, J = W.shape
    m = X1.shape[1]
    lam = np.concatenate([np.zeros((N, 1)), X1 @ theta.T], axis=1)
    P = softmax_rows(lam)
    obj = float(_wmul(W, np.log(np.maximum(P, _TINY))).sum())

    Wsum = W.sum(axis=1)
    Glam = W[:, 1:] - Wsum[:, None] * P[:, 1:]            # (N, J-1)
    grad = (Glam.T @ X1).reshape(-1)

    q = P[:, 1:]
    H = np.zeros(((J - 1) * m, (J - 1) * m))
    for c1 in range(J - 1):
        for c2 in range(c1, J - 1):
            coef = q[:, c1] * q[:, c2]
            if c1 == c2:
                coef = coef - q[:, c1]
            coef = Wsum * coef
            block = X1.T @ (coef[:, None] * X1)
            H[c1 * m:(c1 + 1) * m, c2 * m:(c2 + 1) * m] = block
            if c2 != c1:
                H[c2 * m:(c2 + 1) * m, c1 * m:(c1 + 1) * m] = block.T
    return obj, grad, H


def _polish_to_target(evaluate, u, obj, grad, hess):
    """Reduce an already-converged iterate's gradient by full Newton steps.

    Steps are accepted only while they strictly shrink the gradient
    infinity-norm, so the returned point never violates the convergence
    contract the caller already certified.
    """
    gnorm = float(np.abs(grad).max()) if grad.size else 0.0
    for _ in range(_POLISH_STEPS):
        if gnorm <= _GRAD_TARGET or not grad.size:
            break
        try:
            d = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(d).all():
            break
        cand_obj, cand_grad, cand_hess = evaluate(u + d, derivs=True)
        cand_gnorm = float(np.abs(cand_grad).max())
        if not np.isfinite(cand_obj) or cand_gnorm >= gnorm:
            break
        u = u + d
        obj, grad, hess, gnorm = cand_obj, cand_grad, cand_hess, cand_gnorm
    return u, obj, gnorm


def _newton_maximize(evaluate, u0, natural_params):
    """Maximize a smooth concave-ish objective by damped Newton ascent.

    Parameters
    ----------
    evaluate : callable
        evaluate(u, derivs=True) -> (obj, grad, hess) or obj only.
    u0 : ndarray
        Starting point (unconstrained space).
    natural_params : callable
        u -> flat natural-parameter vector, used for the divergence guard.

    Returns
    -------
    (u, objective, grad_norm, iterations)
    """
    u = np.asarray(u0, dtype=float).copy()
    obj, grad, hess = evaluate(u, derivs=True)
    if not np.isfinite(obj):
        raise ProjectionError("objective not finite at the starting point",
                              last_params=natural_params(u), grad_norm=np.inf)
    rel_change = None
    for iteration in range(1, MAX_ITER + 1):
        gnorm = float(np.abs(grad).max()) if grad.size else 0.0
        if gnorm <= GRAD_TOL and (rel_change is None or rel_change <= OBJ_RTOL):
            u, obj, gnorm = _polish_to_target(evaluate, u, obj, grad, hess)
            return u, obj, gnorm, iteration - 1

        d = None
        try:
            d = np.linalg.solve(hess, -grad)
            if not np.isfinite(d).all() or float(grad @ d) <= 0.0:
                d = None
        except np.linalg.LinAlgError:
            d = None
        if d is None:
            # Hessian not usable as a negative-definite model: shift its
            # spectrum below zero, which interpolates toward gradient ascent.
            try:
                evmax = float(np.linalg.eigvalsh(hess).max())
            except np.linalg.LinAlgError:
                evmax = 0.0
            if not np.isfinite(evmax):
                evmax = 0.0
            shift = evmax + max(1.0, abs(evmax)) * 1e-6
            d = np.linalg.solve(hess - shift * np.eye(len(u)), -grad)

        slope = float(grad @ d)
        step = 1.0
        new_obj = None
        if gnorm <= 1e-5 and slope <= 1e-13 * max(1.0, abs(obj)):
            # Local phase: the predicted gain sits below the objective's
            # floating-point resolution, so a sufficient-decrease test can
            # no longer see progress.  Take the undamped Newton step (the
            # Hessian is negative definite this close to the optimum).
            cand_obj = evaluate(u + d, derivs=False)
            if np.isfinite(cand_obj):
                new_obj = cand_obj
        while new_obj is None and step >= 1e-14:
            cand = u + step * d
            cand_obj = evaluate(cand, derivs=False)
            if np.isfinite(cand_obj) and cand_obj >= obj + ARMIJO_C * step * slope:
                new_obj = cand_obj
                break
            step *= 0.5
        if new_obj is None:
            if gnorm <= GRAD_TOL:
                u, obj, gnorm = _polish_to_target(evaluate, u, obj, grad,
                                                  hess)
                return u, obj, gnorm, iteration - 1
            raise ProjectionError(
                "line search failed (gradient norm %.3e)" % gnorm,
                last_params=natural_params(u), grad_norm=gnorm)

        rel_change = abs(new_obj - obj) / max(abs(new_obj), 1.0)
        u = u + step * d
        obj = new_obj
        theta = natural_params(u)
        if np.abs(theta).max() > PARAM_BOUND:
            raise ProjectionError(
                "parameters diverged (separation suspected): |theta| > %g"
                % PARAM_BOUND,
                last_params=theta, grad_norm=None)
        obj, grad, hess = evaluate(u, derivs=True)

    gnorm = float(np.abs(grad).max()) if grad.size else 0.0
    if gnorm <= GRAD_TOL:
        u, obj, gnorm = _polish_to_target(evaluate, u, obj, grad, hess)
        return u, obj, gnorm, MAX_ITER
    raise ProjectionError(
        "no convergence after %d Newton iterations (gradient norm %.3e)"
        % (MAX_ITER, gnorm),
        last_params=natural_params(u), grad_norm=gnorm)


def _zeta_to_gamma(zeta):
    """Map strictly increasing thresholds to (zeta_1, log gaps)."""
    gamma = np.empty_like(zeta)
    gamma[0] = zeta[0]
    if zeta.size > 1:
        gamma[1:] = np.log(np.diff(zeta))
    return gamma


def _gamma_to_zeta(gamma):
    """Inverse of ``_zeta_to_gamma``."""
    zeta = np.empty_like(gamma)
    zeta[0] = gamma[0]
    if gamma.size > 1:
        zeta[1:] = np.exp(gamma[1:])
        np.cumsum(zeta, out=zeta)
    return zeta


def _cumulative_init(W, link):
    """Thresholds from a*-weighted cumulative frequencies through the link."""
    link = get_link(link)
    q = W.sum(axis=0)
    q = q / q.sum()
    F = np.cumsum(q)[:-1]
    F = np.clip(F, 1e-4, 1.0 - 1e-4)
    for j in range(1, F.size):
        F[j] = max(F[j], F[j - 1] + 1e-6)
    zeta = link.forward(np.minimum(F, 1.0 - 1e-7))
    for j in range(1, zeta.size):
        zeta[j] = max(zeta[j], zeta[j - 1] + 1e-6)
    return zeta


def _chain_to_gamma(u, T, grad_n, hess_n):
    """Transform natural-space (zeta, beta) derivatives to (gamma, beta).

    zeta_m depends on gamma_1 and, for t >= 2, on gamma_t through
    exp(gamma_t) for every m >= t; the extra curvature of the exp map adds
    to the Hessian diagonal.
    """
    k = grad_n.size - T
    # Non-finite natural-space derivatives (possible at extreme probe
    # points) propagate through; the solver rejects such steps, so the
    # arithmetic warnings carry no information.
    with np.errstate(all="ignore"):
        Jac = np.zeros((T, T))
        Jac[:, 0] = 1.0
        for t in range(1, T):
            Jac[t:, t] = np.exp(u[t])
        grad = grad_n.copy()
        grad[:T] = Jac.T @ grad_n[:T]
        hess = hess_n.copy()
        hess[:T, :T] = Jac.T @ hess_n[:T, :T] @ Jac
        if k:
            hess[:T, T:] = Jac.T @ hess_n[:T, T:]
            hess[T:, :T] = hess[:T, T:].T
        for t in range(1, T):
            hess[t, t] += np.exp(u[t]) * grad_n[t:T].sum()
    return grad, hess


def project_cluster(aug, family, link=None, init=None):
    """Solve one cluster's weighted maximum-likelihood projection.

    Parameters
    ----------
    aug : AugmentedDataset
    family : str
        "cumulative" or "categorical".
    link : str or Link
        Required for the cumulative family.
    init : CumulativeParams or CategoricalParams, optional
        Warm start; must match the subset dimension.

    Returns
    -------
    (params, objective)
        The maximizing parameters (thresholds strictly increasing for the
        cumulative family) and the attained weighted log-likelihood.

    Raises
    ------
    ProjectionError
        On non-convergence or separation-induced divergence.
    """
    W = aug.weight_matrix()
    X = aug.predictor_matrix()
    N, J = W.shape
    k = X.shape[1]
    if family == "cumulative":
        T = J - 1

        def evaluate(u, derivs=True):
            zeta = _gamma_to_zeta(u[:T])
            beta = u[T:]
            if not np.isfinite(zeta).all():
                return (-np.inf, None, None) if derivs else -np.inf
            if not derivs:
                return _cumulative_loglik_derivs(zeta, beta, X, W, link,
                                                 derivs=False)[0]
            obj, grad_n, hess_n = _cumulative_loglik_derivs(zeta, beta, X, W, link)
            grad, hess = _chain_to_gamma(u, T, grad_n, hess_n)
            return obj, grad, hess

        if init is not None:
            if init.coefficients.size != k or init.thresholds.size != T:
                raise ValueError("warm start has wrong dimensions")
            u0 = np.concatenate([_zeta_to_gamma(init.thresholds),
                                 init.coefficients])
        else:
            u0 = np.concatenate([_zeta_to_gamma(_cumulative_init(W, link)),
                                 np.zeros(k)])

        def natural(u):
            return np.concatenate([_gamma_to_zeta(u[:T]), u[T:]])

        u, obj, _, _ = _newton_maximize(evaluate, u0, natural)
        return CumulativeParams(_gamma_to_zeta(u[:T]), u[T:]), obj

    if family == "categorical":
        m = 1 + k

        def evaluate(u, derivs=True):
            theta = u.reshape(J - 1, m)
            out = _categorical_loglik_derivs(theta, X1, W)
            return out if derivs else out[0]

        X1 = np.concatenate([np.ones((N, 1)), X], axis=1)
        if init is not None:
            if init.coefficients.shape != (J, k):
                raise ValueError("warm start has wrong dimensions")
            theta0 = np.concatenate(
                [init.intercepts[1:, None], init.coefficients[1:]], axis=1)
            u0 = theta0.reshape(-1)
        else:
            u0 = np.zeros((J - 1) * m)

        u, obj, _, _ = _newton_maximize(evaluate, u0, lambda v: v)
        theta = u.reshape(J - 1, m)
        intercepts = np.concatenate([[0.0], theta[:, 0]])
        coefs = np.concatenate([np.zeros((1, k)), theta[:, 1:]], axis=0)
        return CategoricalParams(intercepts, coefs), obj

    raise ValueError("unknown family %r" % (family,))


def _entropy_term(W):
    """sum_{i,y} a log a with 0*log(0) := 0."""
    with np.errstate(all="ignore"):
        t = W * np.log(W)
    return float(np.where(W > 0.0, t, 0.0).sum())


def _project_one(args):
    data, clustered, subset, family, link, init, c = args
    aug = build_augmented(data, clustered, c, subset)
    try:
        params, obj = project_cluster(aug, family, link, init=init)
    except ProjectionError as err:
        raise ProjectionError(
            "cluster %d: %s" % (c, err),
            last_params=err.last_params,
            grad_norm=err.grad_norm,
            cluster=c) from None
    kl = (_entropy_term(aug.weight_matrix()) - obj) / aug.N
    return params, obj, kl


def project(data, clustered, subset, family, link=None, init=None, threads=1):
    """Project the clustered reference onto a predictor subset, per cluster.

    Parameters
    ----------
    data : Dataset
    clustered : ClusteredReference
    subset : sequence of column names or indices.
    family : str
    link : str or Link, optional
    init : optional warm start -- a single params object applied to every
        cluster, or a list with one entry per cluster.
    threads : int
        Clusters are independent; values > 1 solve them in a thread pool.
        Results are assembled in cluster order either way.

    Returns
    -------
    ProjectedSubmodel
    """
    C = clustered.C
    if isinstance(init, (list, tuple)):
        inits = list(init)
        if len(inits) != C:
            raise ValueError("need one warm start per cluster")
    else:
        inits = [init] * C
    tasks = [(data, clustered, subset, family, link, inits[c], c)
             for c in range(C)]
    results = [None] * C
    if threads > 1 and C > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            for c, res in enumerate(ex.map(_project_one, tasks)):
                results[c] = res
    else:
        for c, task in enumerate(tasks):
            results[c] = _project_one(task)
    idx = data.column_indices(subset)
    return ProjectedSubmodel(
        family=family,
        link=get_link(link).kind if family == "cumulative" else None,
        subset=idx,
        names=[data.columns[i] for i in idx],
        params=[r[0] for r in results],
        weights=clustered.weights,
        objectives=[r[1] for r in results],
        kls=[r[2] for r in results],
        n_obs=data.N,
    )


def project_draw_by_draw(data, draws, subset, family, link=None, threads=1):
    """Project every posterior draw individually (singleton clusters).

    Equivalent to ``project`` with thinning at C = S*; returns one
    parameter vector per draw.
    """
    tensor = predictive_tensor(draws, data)
    clustered = thin_draws(tensor, tensor.shape[0])
    return project(data, clustered, subset, family, link, threads=threads)


def submodel_predict(proj, newdata):
    """Mixture predictive of a projected submodel on new data.

    Parameters
    ----------
    proj : ProjectedSubmodel
    newdata : Dataset or ndarray
        A dataset containing the subset's columns, or a plain matrix whose
        columns already match the subset order.

    Returns
    -------
    ndarray, shape (N_new, J)
        Cluster-weight-weighted average of per-cluster pmfs; rows sum to 1.
    """
    from .families import Dataset

    if isinstance(newdata, Dataset):
        idx = newdata.column_indices(proj.names)
        Xs = newdata.X[:, idx]
    else:
        Xs = np.asarray(newdata, dtype=float)
        if Xs.ndim != 2 or Xs.shape[1] != len(proj.subset):
            raise ValueError("newdata must have %d columns" % len(proj.subset))
    wsum = proj.weights.sum()
    out = None
    for c, params in enumerate(proj.params):
        if proj.family == "cumulative":
            eta = Xs @ params.coefficients if Xs.shape[1] else np.zeros(Xs.shape[0])
            pmf = cumulative_pmf_matrix(params.thresholds, proj.link, eta)
        else:
            pmf = categorical_pmf_matrix(params, Xs)
        w = proj.weights[c] / wsum
        out = w * pmf if out is None else out + w * pmf
    return out
