"""Reference-model draws: predictive tensors, clustering, and thinning.

A reference model is represented by posterior draws -- either explicit
parameters of a known family (cumulative or categorical) or a raw per-draw
predictive probability tensor.  The draws are summarized into a
``ClusteredReference``: C clusters with weights |I_c| and probability
matrices a_{c,i,y}, the within-cluster means of the per-draw predictive
probabilities.  Those matrices are the projection targets everywhere else.

Clustering runs k-means on link-scale features (the latent predictor for
cumulative models, log-probability contrasts otherwise) with a self-contained
implementation: k-means++ seeding, 10 restarts, Lloyd iterations.  Distances
are computed by chunked broadcasting rather than matrix products so the
result is bit-identical regardless of BLAS threading.
"""

import numpy as np

from .families import (InvalidParameterError, _category_log_probs,
                       cumulative_pmf_matrix, get_link, softmax_rows)

__all__ = [
    "ClusteredReference",
    "DrawSet",
    "IngestionError",
    "cluster_draws",
    "clustering_features",
    "predictive_tensor",
    "thin_draws",
]


class IngestionError(ValueError):
    """Raised when supplied draws or tensors fail validation."""


class DrawSet:
    """Posterior draws of a reference model.

    Exactly one of three representations is held, chosen by ``kind``:

    * ``"cumulative"`` -- ``zetas`` (S x J-1), ``betas`` (S x P), plus the
      link name.
    * ``"categorical"`` -- ``intercepts`` (S x J) and ``coefs`` (S x J x P),
      category-1 entries pinned to zero.
    * ``"raw"`` -- ``tensor`` (S x N x J) of per-draw predictive
      probabilities (family-agnostic reference).

    Parameters are validated on construction; any cumulative draw with
    non-monotone thresholds raises an error naming the draw (1-based).
    """

    __slots__ = ("kind", "zetas", "betas", "intercepts", "coefs", "tensor",
                 "link", "beta_names")

    def __init__(self, kind, zetas=None, betas=None, intercepts=None,
                 coefs=None, tensor=None, link=None, beta_names=None):
        self.kind = kind
        self.zetas = self.betas = self.intercepts = self.coefs = self.tensor = None
        self.link = None
        self.beta_names = list(beta_names) if beta_names is not None else None
        if kind == "cumulative":
            zetas = np.atleast_2d(np.asarray(zetas, dtype=float))
            betas = np.asarray(betas, dtype=float)
            if betas.ndim == 1:
                betas = betas.reshape(zetas.shape[0], -1)
            if betas.shape[0] != zetas.shape[0]:
                raise IngestionError("zetas and betas disagree on draw count")
            bad = np.where(~np.all(np.diff(zetas, axis=1) > 0, axis=1))[0] \
                if zetas.shape[1] > 1 else np.array([], dtype=int)
            if bad.size:
                raise IngestionError(
                    "non-monotone thresholds in draw %d" % (bad[0] + 1)
                )
            self.zetas = zetas
            self.betas = betas
            self.link = get_link(link if link is not None else "probit").kind
        elif kind == "categorical":
            intercepts = np.atleast_2d(np.asarray(intercepts, dtype=float))
            coefs = np.asarray(coefs, dtype=float)
            if coefs.ndim == 2:
                coefs = coefs[:, :, None] if coefs.size else coefs.reshape(
                    intercepts.shape[0], intercepts.shape[1], 0)
            if coefs.shape[:2] != intercepts.shape:
                raise IngestionError("intercepts and coefficients disagree on shape")
            if np.any(intercepts[:, 0] != 0) or (coefs.shape[2] and np.any(coefs[:, 0, :] != 0)):
                raise IngestionError("category-1 parameters must be zero in every draw")
            self.intercepts = intercepts
            self.coefs = coefs
        elif kind == "raw":
            tensor = np.asarray(tensor, dtype=float)
            if tensor.ndim != 3:
                raise IngestionError("raw tensor must have shape (S, N, J)")
            _validate_tensor(tensor)
            self.tensor = tensor
        else:
            raise IngestionError("unknown draw kind %r" % (kind,))

    @property
    def S_star(self):
        if self.kind == "cumulative":
            return self.zetas.shape[0]
        if self.kind == "categorical":
            return self.intercepts.shape[0]
        return self.tensor.shape[0]

    @property
    def J(self):
        if self.kind == "cumulative":
            return self.zetas.shape[1] + 1
        if self.kind == "categorical":
            return self.intercepts.shape[1]
        return self.tensor.shape[2]

    @property
    def P(self):
        if self.kind == "cumulative":
            return self.betas.shape[1]
        if self.kind == "categorical":
            return self.coefs.shape[2]
        return None

    def __repr__(self):
        return "DrawSet(kind=%r, S_star=%d, J=%d)" % (self.kind, self.S_star, self.J)


def _validate_tensor(tensor, tol=1e-6):
    """Check every (s, i) slice is a pmf; name the first offender."""
    if np.any(tensor < -1e-12):
        s, i, _ = np.unravel_index(int(np.argmin(tensor)), tensor.shape)
        raise IngestionError(
            "negative probability at draw %d, observation %d" % (s + 1, i + 1)
        )
    sums = tensor.sum(axis=2)
    off = np.abs(sums - 1.0)
    if off.size and off.max() > tol:
        s, i = np.unravel_index(int(np.argmax(off)), off.shape)
        raise IngestionError(
            "probabilities at draw %d, observation %d sum to %.6f (expected 1)"
            % (s + 1, i + 1, sums[s, i])
        )


class ClusteredReference:
    """Clustered (or thinned) reference predictive a_{c,i,y}.

    Attributes
    ----------
    C : int
        Number of clusters.
    assignments : ndarray, shape (S*,)
        Cluster index per draw; -1 marks draws dropped by thinning.
    weights : ndarray, shape (C,)
        Cluster sizes |I_c| (all 1 in thinned mode).
    probs : ndarray, shape (C, N, J)
        Within-cluster means of the per-draw predictive probabilities.
    mode : str
        "clustered" or "thinned".
    latent_eta : ndarray or None, shape (C, N)
        Cluster-mean latent predictors (cumulative references only).
    latent_zeta : ndarray or None, shape (C, J-1)
        Cluster-mean thresholds (cumulative references only).
    """

    __slots__ = ("C", "assignments", "weights", "probs", "mode",
                 "latent_eta", "latent_zeta")

    def __init__(self, assignments, weights, probs, mode,
                 latent_eta=None, latent_zeta=None):
        probs = np.asarray(probs, dtype=float)
        weights = np.asarray(weights, dtype=float)
        self.C = probs.shape[0]
        if weights.shape != (self.C,) or np.any(weights <= 0):
            raise IngestionError("need one positive weight per cluster")
        off = np.abs(probs.sum(axis=2) - 1.0)
        if off.size and off.max() > 1e-7:
            raise IngestionError("cluster predictive rows must sum to 1")
        self.assignments = np.asarray(assignments, dtype=int)
        self.weights = weights
        self.probs = probs
        self.mode = mode
        self.latent_eta = latent_eta
        self.latent_zeta = latent_zeta

    @property
    def N(self):
        return self.probs.shape[1]

    @property
    def J(self):
        return self.probs.shape[2]

    def __repr__(self):
        return "ClusteredReference(C=%d, N=%d, J=%d, mode=%r)" % (
            self.C, self.N, self.J, self.mode)


def predictive_tensor(draws, data):
    """Per-draw predictive probabilities for every observation.

    Parameters
    ----------
    draws : DrawSet
    data : Dataset

    Returns
    -------
    ndarray, shape (S*, N, J)
        Entry (s, i, y) is p(y | x_i, theta_s); each (s, i) slice is a pmf.
    """
    if draws.kind == "raw":
        if draws.tensor.shape[1] != data.N:
            raise IngestionError(
                "raw tensor covers %d observations, dataset has %d"
                % (draws.tensor.shape[1], data.N)
            )
        return draws.tensor
    if draws.P != data.P:
        raise IngestionError(
            "draws expect %d predictors, dataset has %d" % (draws.P, data.P)
        )
    if draws.kind == "cumulative":
        link = get_link(draws.link)
        eta = data.X @ draws.betas.T  # (N, S)
        S, J = draws.S_star, draws.J
        z = draws.zetas[:, None, :] - eta.T[:, :, None]   # (S, N, J-1)
        logp = _category_log_probs(z.reshape(S * data.N, J - 1), link)
        return np.exp(logp).reshape(S, data.N, J)
    # categorical
    lam = np.einsum("nk,sjk->snj", data.X, draws.coefs) + draws.intercepts[:, None, :]
    return softmax_rows(lam)


def clustering_features(draws, data, family=None):
    """Link-scale feature matrix used to cluster the draws.

    Cumulative references use the per-draw latent predictor vectors
    (S* x N); categorical or raw references use per-draw log-probability
    contrasts log(p_ij / p_i1) for j = 2..J, concatenated per observation
    (S* x N(J-1)).

    Parameters
    ----------
    draws : DrawSet
    data : Dataset
    family : str, optional
        Override the family inferred from ``draws.kind``.

    Returns
    -------
    ndarray, shape (S*, D)
    """
    kind = family if family is not None else draws.kind
    if kind == "cumulative" and draws.kind == "cumulative":
        return (data.X @ draws.betas.T).T
    tensor = predictive_tensor(draws, data)
    logp = np.log(np.maximum(tensor, 1e-300))
    contrasts = logp[:, :, 1:] - logp[:, :, :1]
    return contrasts.reshape(tensor.shape[0], -1)


def _sqdist_chunked(F, centroids, chunk=512):
    """Squared Euclidean point-to-centroid distances without BLAS products."""
    S = F.shape[0]
    out = np.empty((S, centroids.shape[0]))
    for start in range(0, S, chunk):
        block = F[start:start + chunk]
        diff = block[:, None, :] - centroids[None, :, :]
        out[start:start + chunk] = np.einsum("scd,scd->sc", diff, diff)
    return out


def _kmeans_once(F, C, rng):
    """One k-means run: k-means++ seeding then Lloyd iterations."""
    S = F.shape[0]
    centroids = np.empty((C, F.shape[1]))
    first = int(rng.integers(S))
    centroids[0] = F[first]
    d2 = _sqdist_chunked(F, centroids[:1])[:, 0]
    for c in range(1, C):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(S))
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), u))
            idx = min(idx, S - 1)
        centroids[c] = F[idx]
        d2 = np.minimum(d2, _sqdist_chunked(F, centroids[c:c + 1])[:, 0])

    prev_inertia = np.inf
    labels = np.zeros(S, dtype=int)
    for _ in range(300):
        dist = _sqdist_chunked(F, centroids)
        labels = dist.argmin(axis=1)
        dmin = dist[np.arange(S), labels]
        counts = np.bincount(labels, minlength=C)
        empties = np.where(counts == 0)[0]
        if empties.size:
            # Re-seed each empty centroid from the point farthest from its
            # assigned centroid, then reassign.
            for c in empties:
                idx = int(np.argmax(dmin))
                centroids[c] = F[idx]
                dmin[idx] = -1.0
            continue
        inertia = dmin.sum()
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, F)
        centroids = sums / counts[:, None]
        if prev_inertia - inertia <= 1e-8 * max(inertia, 1e-300):
            break
        prev_inertia = inertia
    dist = _sqdist_chunked(F, centroids)
    labels = dist.argmin(axis=1)
    inertia = dist[np.arange(S), labels].sum()
    return labels, inertia


def _kmeans(F, C, seed, restarts=10):
    """Best-of-``restarts`` k-means partition, deterministic given seed."""
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _kmeans_once(F, C, rng)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    # Canonical labels: clusters numbered by first appearance.
    remap = {}
    out = np.empty_like(best_labels)
    for i, lab in enumerate(best_labels):
        if lab not in remap:
            remap[lab] = len(remap)
        out[i] = remap[lab]
    return out


def cluster_draws(tensor, features, C, seed, zetas=None):
    """Cluster draws by k-means on their features and average within clusters.

    Parameters
    ----------
    tensor : ndarray, shape (S*, N, J)
        Per-draw predictive probabilities.
    features : ndarray, shape (S*, D)
        Link-scale clustering features (see ``clustering_features``).
    C : int
        Cluster count, 1 <= C <= S*.
    seed : int
        Seed for k-means++ restarts; fixed seed gives bit-identical output.
    zetas : ndarray, optional, shape (S*, J-1)
        Per-draw thresholds of a cumulative reference.  When given, the
        result carries cluster-mean latent predictors and thresholds for
        the latent projection.

    Returns
    -------
    ClusteredReference
    """
    tensor = np.asarray(tensor, dtype=float)
    S = tensor.shape[0]
    if not 1 <= C <= S:
        raise IngestionError("cluster count %d outside 1..%d" % (C, S))
    features = np.asarray(features, dtype=float)
    if features.shape[0] != S:
        raise IngestionError("features and tensor disagree on draw count")
    labels = _kmeans(features, C, seed) if C > 1 else np.zeros(S, dtype=int)
    counts = np.bincount(labels, minlength=C).astype(float)
    if np.any(counts == 0):
        raise IngestionError(
            "could not form %d non-empty clusters; the draws hold fewer "
            "than %d distinct feature vectors" % (C, C))
    probs = np.zeros((C,) + tensor.shape[1:])
    np.add.at(probs, labels, tensor)
    probs /= counts[:, None, None]
    latent_eta = latent_zeta = None
    if zetas is not None:
        zetas = np.asarray(zetas, dtype=float)
        latent_eta = np.zeros((C, features.shape[1]))
        np.add.at(latent_eta, labels, features)
        latent_eta /= counts[:, None]
        latent_zeta = np.zeros((C, zetas.shape[1]))
        np.add.at(latent_zeta, labels, zetas)
        latent_zeta /= counts[:, None]
    return ClusteredReference(labels, counts, probs, "clustered",
                              latent_eta, latent_zeta)


def thin_indices(S, C):
    """Equally spaced 0-based draw indices, centered within S draws.

    C = S keeps every draw; C = 1 picks the median-position draw.
    """
    if not 1 <= C <= S:
        raise IngestionError("thinning count %d outside 1..%d" % (C, S))
    k = np.arange(C)
    return ((2 * k + 1) * S + 2 * C - 1) // (2 * C) - 1


def thin_draws(tensor, C, features=None, zetas=None):
    """Thin draws to C equally spaced singleton clusters.

    Parameters
    ----------
    tensor : ndarray, shape (S*, N, J)
    C : int
        Number of draws to keep, 1 <= C <= S*.
    features, zetas : ndarray, optional
        Per-draw latent predictors and thresholds of a cumulative
        reference, subsetted alongside the tensor for the latent
        projection.

    Returns
    -------
    ClusteredReference
        Mode "thinned"; every kept draw is its own cluster with weight 1;
        dropped draws are marked -1 in ``assignments``.
    """
    tensor = np.asarray(tensor, dtype=float)
    S = tensor.shape[0]
    sel = thin_indices(S, C)
    assignments = np.full(S, -1, dtype=int)
    assignments[sel] = np.arange(C)
    latent_eta = np.asarray(features, dtype=float)[sel] if features is not None else None
    latent_zeta = np.asarray(zetas, dtype=float)[sel] if zetas is not None else None
    return ClusteredReference(assignments, np.ones(C), tensor[sel].copy(),
                              "thinned", latent_eta, latent_zeta)
