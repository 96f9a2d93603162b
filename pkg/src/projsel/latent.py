"""Latent-scale projection baseline for cumulative reference models.

Instead of matching the reference's response-scale predictive distribution,
this projection fits each cluster's mean latent predictor by unweighted
least squares and keeps the reference model's own (cluster-mean) thresholds
for response-scale prediction.  It exists as a comparison baseline: it is
cheap, but its predictions rely on thresholds the submodel never refit.
"""

import warnings

import numpy as np

from .families import cumulative_pmf_matrix
from .reference import clustering_features

__all__ = ["LatentProjectedSubmodel", "latent_project", "latent_predict_response"]


class LatentProjectedSubmodel:
    """Per-cluster least-squares fits on the latent predictor scale.

    Attributes
    ----------
    subset : tuple of int
        Column indices, in selection order.
    names : tuple of str
    coefs : ndarray, shape (C, k)
        Per-cluster least-squares coefficients (no intercept).
    zetas : ndarray, shape (C, J-1)
        Cluster-mean reference thresholds, used verbatim at prediction time.
    weights : ndarray, shape (C,)
        Cluster weights |I_c|.
    sses : ndarray, shape (C,)
        Residual sums of squares on the latent scale.
    rank_deficient : bool
        True if any cluster's design was rank deficient (minimum-norm
        solution used).
    """

    __slots__ = ("subset", "names", "coefs", "zetas", "weights", "sses",
                 "n_obs", "rank_deficient")

    def __init__(self, subset, names, coefs, zetas, weights, sses, n_obs,
                 rank_deficient=False):
        zetas = np.asarray(zetas, dtype=float)
        if zetas.shape[1] > 1 and not np.all(np.diff(zetas, axis=1) > 0):
            raise ValueError("cluster-mean thresholds must be strictly increasing")
        self.subset = tuple(subset)
        self.names = tuple(names)
        self.coefs = np.asarray(coefs, dtype=float)
        self.zetas = zetas
        self.weights = np.asarray(weights, dtype=float)
        self.sses = np.asarray(sses, dtype=float)
        self.n_obs = n_obs
        self.rank_deficient = bool(rank_deficient)

    @property
    def C(self):
        return self.coefs.shape[0]

    def score(self):
        """Cluster-weight-weighted objective, -SSE/2 per cluster.

        On the same scale as the augmented projection's weighted
        log-likelihood criterion: larger is better.
        """
        return float(self.weights @ (-0.5 * self.sses))

    def weighted_mean_kl(self):
        """Gaussian-surrogate divergence, SSE / (2 N) averaged over clusters."""
        per_cluster = self.sses / (2.0 * self.n_obs)
        return float(self.weights @ per_cluster / self.weights.sum())

    def __repr__(self):
        return "LatentProjectedSubmodel(subset=%s, C=%d)" % (
            list(self.names), self.C)


def _latent_targets(clustered, data, draws):
    """Per-cluster mean latent predictors and thresholds.

    Uses the summaries stored on the clustered reference when present;
    otherwise recomputes them from the raw draws and the stored assignments.
    """
    eta = clustered.latent_eta
    zeta = clustered.latent_zeta
    if eta is not None and zeta is not None:
        return eta, zeta
    if draws is None:
        raise ValueError(
            "clustered reference lacks latent summaries; pass the draws")
    if draws.kind != "cumulative":
        raise ValueError("latent projection requires a cumulative reference")
    feats = clustering_features(draws, data)
    C = clustered.C
    eta = np.empty((C, data.N))
    zeta = np.empty((C, draws.zetas.shape[1]))
    for c in range(C):
        members = np.where(clustered.assignments == c)[0]
        eta[c] = feats[members].mean(axis=0)
        zeta[c] = draws.zetas[members].mean(axis=0)
    return eta, zeta


def latent_project(data, clustered, subset, draws=None):
    """Project each cluster's mean latent predictor onto a predictor subset.

    Parameters
    ----------
    data : Dataset
    clustered : ClusteredReference
        Must carry latent summaries (built from cumulative draws), or pass
        ``draws`` so they can be recomputed.
    subset : sequence of column names or indices (may be empty).
    draws : DrawSet, optional
        Fallback source for the latent summaries.

    Returns
    -------
    LatentProjectedSubmodel
    """
    eta, zeta = _latent_targets(clustered, data, draws)
    idx = data.column_indices(subset)
    Xs = data.X[:, idx]
    C = clustered.C
    k = len(idx)
    coefs = np.zeros((C, k))
    sses = np.empty(C)
    rank_deficient = False
    for c in range(C):
        if k:
            sol, _, rank, _ = np.linalg.lstsq(Xs, eta[c], rcond=None)
            coefs[c] = sol
            if rank < k:
                rank_deficient = True
            resid = eta[c] - Xs @ sol
        else:
            resid = eta[c]
        sses[c] = float(resid @ resid)
    if rank_deficient:
        warnings.warn("rank-deficient design in latent projection; "
                      "minimum-norm coefficients used", RuntimeWarning)
    return LatentProjectedSubmodel(
        subset=idx,
        names=[data.columns[i] for i in idx],
        coefs=coefs,
        zetas=zeta,
        weights=clustered.weights,
        sses=sses,
        n_obs=data.N,
        rank_deficient=rank_deficient,
    )


def latent_predict_response(lat, newdata, link):
    """Response-scale mixture predictive of a latent projection.

    Per cluster the pmf is ``cumulative_pmf(zeta*_c, x^T beta_c)`` with the
    reference's cluster-mean thresholds; clusters are then averaged by
    weight.

    Parameters
    ----------
    lat : LatentProjectedSubmodel
    newdata : Dataset or ndarray
        A dataset containing the subset's columns, or a matrix whose columns
        already match the subset order.
    link : str or Link

    Returns
    -------
    ndarray, shape (N_new, J)
    """
    from .families import Dataset

    if isinstance(newdata, Dataset):
        idx = newdata.column_indices(lat.names)
        Xs = newdata.X[:, idx]
    else:
        Xs = np.asarray(newdata, dtype=float)
        if Xs.ndim != 2 or Xs.shape[1] != len(lat.subset):
            raise ValueError("newdata must have %d columns" % len(lat.subset))
    wsum = lat.weights.sum()
    out = None
    for c in range(lat.C):
        eta = Xs @ lat.coefs[c] if Xs.shape[1] else np.zeros(Xs.shape[0])
        pmf = cumulative_pmf_matrix(lat.zetas[c], link, eta)
        w = lat.weights[c] / wsum
        out = w * pmf if out is None else out + w * pmf
    return out
