"""Response families, link functions, and probability-mass evaluation.

Two discrete finite-support families are supported:

* ``cumulative`` -- ordinal (proportional-odds) models with
  p(y = j | zeta, eta) = g^{-1}(zeta_j - eta) - g^{-1}(zeta_{j-1} - eta),
  where zeta_0 = -inf, zeta_J = +inf, eta is the latent linear predictor
  and g is an invertible link (probit or logit).
* ``categorical`` -- nominal (multinomial-logit) models with softmax
  probabilities over J linear predictors, category 1 pinned to zero for
  identifiability.

Categories are coded 1..J throughout.  All functions here are pure and
operate on immutable inputs, so they are safe to call concurrently.
"""

import numpy as np
from scipy.special import (expit, log_expit, log_ndtr, logit as _logit_fn,
                           ndtr, ndtri)

__all__ = [
    "LINKS",
    "CategoricalParams",
    "CumulativeParams",
    "Dataset",
    "InvalidParameterError",
    "Link",
    "Support",
    "categorical_linear_predictors",
    "categorical_pmf",
    "categorical_pmf_matrix",
    "cumulative_log_pmf_matrix",
    "cumulative_pmf",
    "cumulative_pmf_matrix",
    "get_link",
    "log_pmf",
    "softmax_rows",
]

# Probabilities below this are clamped before taking logs, keeping weighted
# log-likelihoods finite even for extreme parameter values.
PMF_CLAMP = 1e-300

_SQRT_2PI = np.sqrt(2.0 * np.pi)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_LN2 = np.log(2.0)


class InvalidParameterError(ValueError):
    """Raised for structurally invalid family parameters."""


class Support:
    """Response support: J ordered or unordered categories coded 1..J.

    Parameters
    ----------
    J : int
        Number of response categories, at least 2.
    ordered : bool
        True for ordinal responses (cumulative family), False for
        nominal ones (categorical family).
    """

    __slots__ = ("J", "ordered")

    def __init__(self, J, ordered=True):
        J = int(J)
        if J < 2:
            raise InvalidParameterError("support needs J >= 2, got J=%d" % J)
        self.J = J
        self.ordered = bool(ordered)

    def __repr__(self):
        return "Support(J=%d, ordered=%r)" % (self.J, self.ordered)


class Link:
    """Invertible link g : (0,1) -> R with inverse, density and its derivative.

    Attributes
    ----------
    kind : str
        "probit" or "logit".
    forward : callable
        g, mapping probabilities to the real line.
    inverse : callable
        g^{-1}, mapping reals to (0,1); by convention inverse(-inf) = 0 and
        inverse(+inf) = 1.
    density : callable
        Derivative of ``inverse`` (the latent density), vanishing at +-inf.
    density_prime : callable
        Derivative of ``density``, needed for Hessians.
    log_inverse : callable
        log g^{-1}, with full relative accuracy in the lower tail where
        ``inverse`` underflows.
    log_survival : callable
        log(1 - g^{-1}), with full relative accuracy in the upper tail
        where ``1 - inverse`` cancels to zero.
    log_density : callable
        Log of ``density``, finite for all finite arguments.
    density_ratio : callable
        ``density_prime / density``, computed without forming either
        factor (bounded growth, no under/overflow).
    """

    __slots__ = ("kind", "forward", "inverse", "density", "density_prime",
                 "log_inverse", "log_survival", "log_density",
                 "density_ratio")

    def __init__(self, kind, forward, inverse, density, density_prime,
                 log_inverse, log_survival, log_density, density_ratio):
        self.kind = kind
        self.forward = forward
        self.inverse = inverse
        self.density = density
        self.density_prime = density_prime
        self.log_inverse = log_inverse
        self.log_survival = log_survival
        self.log_density = log_density
        self.density_ratio = density_ratio

    def __repr__(self):
        return "Link(%r)" % self.kind


def _probit_density(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _probit_density_prime(z):
    z = np.asarray(z, dtype=float)
    return -z * np.exp(-0.5 * z * z) / _SQRT_2PI


def _logit_density(z):
    p = expit(z)
    return p * (1.0 - p)


def _logit_density_prime(z):
    p = expit(z)
    return p * (1.0 - p) * (1.0 - 2.0 * p)


def _probit_log_survival(z):
    return log_ndtr(-np.asarray(z, dtype=float))


def _probit_log_density(z):
    z = np.asarray(z, dtype=float)
    return -0.5 * z * z - _LOG_SQRT_2PI


def _probit_density_ratio(z):
    return -np.asarray(z, dtype=float)


def _logit_log_survival(z):
    return log_expit(-np.asarray(z, dtype=float))


def _logit_log_density(z):
    z = np.asarray(z, dtype=float)
    return log_expit(z) + log_expit(-z)


def _logit_density_ratio(z):
    # density'/density = 1 - 2 expit(z) = -tanh(z / 2)
    return -np.tanh(np.asarray(z, dtype=float) / 2.0)


LINKS = {
    "probit": Link("probit", ndtri, ndtr, _probit_density,
                   _probit_density_prime, log_ndtr, _probit_log_survival,
                   _probit_log_density, _probit_density_ratio),
    "logit": Link("logit", _logit_fn, expit, _logit_density,
                  _logit_density_prime, log_expit, _logit_log_survival,
                  _logit_log_density, _logit_density_ratio),
}


def get_link(link):
    """Resolve a link given by name (or pass a Link through unchanged)."""
    if isinstance(link, Link):
        return link
    try:
        return LINKS[link]
    except KeyError:
        raise InvalidParameterError(
            "unknown link %r (expected 'probit' or 'logit')" % (link,)
        ) from None


class CumulativeParams:
    """Parameters of a cumulative (proportional-odds) model.

    Parameters
    ----------
    thresholds : array_like, shape (J-1,)
        Strictly increasing latent thresholds zeta.
    coefficients : array_like, shape (k,)
        Regression coefficients for the predictor subset (k may be 0).
    """

    __slots__ = ("thresholds", "coefficients")

    def __init__(self, thresholds, coefficients=()):
        zeta = np.atleast_1d(np.asarray(thresholds, dtype=float))
        if zeta.ndim != 1 or zeta.size < 1:
            raise InvalidParameterError("thresholds must be a 1-D vector of length J-1")
        if zeta.size > 1 and not np.all(np.diff(zeta) > 0):
            raise InvalidParameterError(
                "thresholds must be strictly increasing, got %s" % (zeta,)
            )
        self.thresholds = zeta
        self.coefficients = np.atleast_1d(np.asarray(coefficients, dtype=float))

    @property
    def J(self):
        return self.thresholds.size + 1

    def __repr__(self):
        return "CumulativeParams(thresholds=%s, coefficients=%s)" % (
            self.thresholds,
            self.coefficients,
        )


class CategoricalParams:
    """Parameters of a categorical (multinomial-logit) model.

    Category 1 is the reference: its intercept and coefficient row are
    identically zero.

    Parameters
    ----------
    intercepts : array_like, shape (J,)
        Per-category intercepts; entry 0 must be 0.
    coefficients : array_like, shape (J, k)
        Per-category coefficient rows; row 0 must be 0.
    """

    __slots__ = ("intercepts", "coefficients")

    def __init__(self, intercepts, coefficients):
        alpha = np.atleast_1d(np.asarray(intercepts, dtype=float))
        B = np.asarray(coefficients, dtype=float)
        if B.ndim == 1:
            B = B.reshape(alpha.size, -1) if B.size else B.reshape(alpha.size, 0)
        if alpha.ndim != 1 or alpha.size < 2:
            raise InvalidParameterError("intercepts must be a vector of length J >= 2")
        if B.shape[0] != alpha.size:
            raise InvalidParameterError(
                "coefficient matrix has %d rows for J=%d categories"
                % (B.shape[0], alpha.size)
            )
        if alpha[0] != 0.0 or (B.shape[1] and np.any(B[0] != 0.0)):
            raise InvalidParameterError("category-1 parameters must be pinned to zero")
        self.intercepts = alpha
        self.coefficients = B

    @property
    def J(self):
        return self.intercepts.size

    def __repr__(self):
        return "CategoricalParams(intercepts=%s, coefficients=%s)" % (
            self.intercepts,
            self.coefficients,
        )


class Dataset:
    """Predictor matrix plus a 1..J coded categorical response.

    Parameters
    ----------
    X : array_like, shape (N, P)
        Predictor matrix, finite values only (P may be 0).
    y : array_like, shape (N,)
        Integer responses in {1, ..., J}.
    columns : sequence of str, optional
        Predictor column names; defaults to x1..xP.
    J : int, optional
        Number of categories; defaults to max(y).
    categories : sequence of str, optional
        Original string labels in category order (kept for round-tripping).
    """

    __slots__ = ("X", "y", "columns", "J", "categories")

    def __init__(self, X, y, columns=None, J=None, categories=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise InvalidParameterError("X must be 2-D (N x P)")
        y = np.asarray(y, dtype=int)
        if y.ndim != 1 or y.size != X.shape[0]:
            raise InvalidParameterError("y must be a vector with one entry per row of X")
        if y.size < 1:
            raise InvalidParameterError("dataset must contain at least one observation")
        if not np.all(np.isfinite(X)):
            raise InvalidParameterError("X contains non-finite values")
        if J is None:
            J = int(y.max())
        J = int(J)
        if J < 2:
            raise InvalidParameterError("need at least two response categories")
        if y.min() < 1 or y.max() > J:
            raise InvalidParameterError("responses must lie in {1..%d}" % J)
        if columns is None:
            columns = ["x%d" % (p + 1) for p in range(X.shape[1])]
        columns = [str(c) for c in columns]
        if len(columns) != X.shape[1]:
            raise InvalidParameterError("need one column name per predictor")
        self.X = X
        self.y = y
        self.columns = columns
        self.J = J
        self.categories = list(categories) if categories is not None else None

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def P(self):
        return self.X.shape[1]

    def column_indices(self, subset):
        """Map a subset given as names or integer indices to integer indices."""
        idx = []
        for c in subset:
            if isinstance(c, (int, np.integer)):
                if not 0 <= int(c) < self.P:
                    raise KeyError("column index %d out of range" % int(c))
                idx.append(int(c))
            else:
                try:
                    idx.append(self.columns.index(str(c)))
                except ValueError:
                    raise KeyError("unknown column %r" % (c,)) from None
        return idx

    def __repr__(self):
        return "Dataset(N=%d, P=%d, J=%d)" % (self.N, self.P, self.J)


def _log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate across the whole range."""
    x = np.minimum(np.asarray(x, dtype=float), 0.0)
    with np.errstate(divide="ignore"):
        near = np.log(-np.expm1(x))
        far = np.log1p(-np.exp(x))
    return np.where(x > -_LN2, near, far)


def _category_log_probs(z, link):
    """Log category masses from threshold-minus-predictor edge arguments.

    Parameters
    ----------
    z : ndarray, shape (N, J-1)
        Edge arguments zeta_j - eta_i, nondecreasing along axis 1.
    link : Link

    Returns
    -------
    ndarray, shape (N, J)
        log p(y = j).  Each mass is formed from the log CDF when its
        category sits in the lower tail and from the log survival function
        in the upper tail, so masses far below the resolution of
        ``1 - inverse(z)`` keep full relative accuracy.
    """
    N, T = z.shape
    logF = link.log_inverse(z)
    logS = link.log_survival(z)
    logp = np.empty((N, T + 1))
    logp[:, 0] = logF[:, 0]
    logp[:, -1] = logS[:, -1]
    if T > 1:
        lower = logF[:, 1:] + _log1mexp(logF[:, :-1] - logF[:, 1:])
        upper = logS[:, :-1] + _log1mexp(logS[:, 1:] - logS[:, :-1])
        logp[:, 1:-1] = np.where(z[:, :-1] + z[:, 1:] <= 0.0, lower, upper)
    return logp


def _validated_edges(thresholds, eta):
    zeta = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if zeta.size > 1 and not np.all(np.diff(zeta) > 0):
        raise InvalidParameterError(
            "thresholds must be strictly increasing, got %s" % (zeta,)
        )
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    return zeta[None, :] - eta[:, None]


def cumulative_pmf_matrix(thresholds, link, eta):
    """Cumulative-model pmf rows for a vector of latent predictors.

    Parameters
    ----------
    thresholds : array_like, shape (J-1,)
        Strictly increasing thresholds.
    link : str or Link
    eta : array_like, shape (N,)
        Latent linear predictors.

    Returns
    -------
    ndarray, shape (N, J)
        Row i is p(y = . | zeta, eta_i); rows sum to 1 up to rounding.
        Tail masses are exact to relative precision even where the naive
        difference of CDF values would cancel to zero.
    """
    return np.exp(_category_log_probs(_validated_edges(thresholds, eta),
                                      get_link(link)))


def cumulative_log_pmf_matrix(thresholds, link, eta):
    """Log of ``cumulative_pmf_matrix``, finite wherever the mass is nonzero.

    Parameters
    ----------
    thresholds : array_like, shape (J-1,)
        Strictly increasing thresholds.
    link : str or Link
    eta : array_like, shape (N,)
        Latent linear predictors.

    Returns
    -------
    ndarray, shape (N, J)
        log p(y = . | zeta, eta_i), accurate deep into both tails.
    """
    return _category_log_probs(_validated_edges(thresholds, eta),
                               get_link(link))


def cumulative_pmf(params, link, eta):
    """Probability mass function of a cumulative model at one latent value.

    Parameters
    ----------
    params : CumulativeParams
    link : str or Link
    eta : float
        Latent linear predictor value.

    Returns
    -------
    ndarray, shape (J,)
        Nonnegative vector summing to 1.
    """
    return cumulative_pmf_matrix(params.thresholds, link, [float(eta)])[0]


def softmax_rows(lam):
    """Row-wise softmax with max-subtraction for numerical stability."""
    lam = np.asarray(lam, dtype=float)
    shifted = lam - lam.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def categorical_linear_predictors(params, X):
    """Linear predictors lambda_{ij} = alpha_j + x_i' beta_j (category 1 is 0).

    Parameters
    ----------
    params : CategoricalParams
    X : ndarray, shape (N, k)

    Returns
    -------
    ndarray, shape (N, J)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.coefficients.shape[1]:
        raise InvalidParameterError(
            "predictor matrix has %d columns, parameters expect %d"
            % (X.shape[1] if X.ndim == 2 else -1, params.coefficients.shape[1])
        )
    return params.intercepts[None, :] + X @ params.coefficients.T


def categorical_pmf_matrix(params, X):
    """Softmax pmf rows of a categorical model for each row of X."""
    return softmax_rows(categorical_linear_predictors(params, X))


def categorical_pmf(params, x):
    """Probability mass function of a categorical model at one predictor vector.

    Parameters
    ----------
    params : CategoricalParams
    x : array_like, shape (k,)

    Returns
    -------
    ndarray, shape (J,)
        Strictly positive vector summing to 1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != params.coefficients.shape[1]:
        raise InvalidParameterError(
            "x has length %d, parameters expect %d"
            % (x.size, params.coefficients.shape[1])
        )
    return categorical_pmf_matrix(params, x[None, :])[0]


def log_pmf(family, params, link=None, x=None, eta=None):
    """Elementwise log of a family pmf, clamped at log(1e-300).

    Parameters
    ----------
    family : str
        "cumulative" or "categorical".
    params : CumulativeParams or CategoricalParams
    link : str or Link, optional
        Required for the cumulative family.
    x : array_like, optional
        Predictor vector; used to form eta for the cumulative family
        (eta = x' beta) and required for the categorical family.
    eta : float, optional
        Cumulative family only: pass the latent predictor directly instead
        of ``x``.

    Returns
    -------
    ndarray, shape (J,)
    """
    if family == "cumulative":
        if eta is None:
            xv = np.zeros(params.coefficients.size) if x is None else np.atleast_1d(x)
            eta = float(np.dot(xv, params.coefficients))
        p = cumulative_pmf(params, link, eta)
    elif family == "categorical":
        if x is None:
            x = np.zeros(params.coefficients.shape[1])
        p = categorical_pmf(params, x)
    else:
        raise InvalidParameterError("unknown family %r" % (family,))
    return np.log(np.maximum(p, PMF_CLAMP))
