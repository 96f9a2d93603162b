"""Tests for the augmented-data projection and its Newton solver."""

import numpy as np
import pytest

from projsel.families import (
    CategoricalParams,
    CumulativeParams,
    Dataset,
    categorical_pmf,
    cumulative_pmf_matrix,
)
from projsel.projection import (
    ProjectionError,
    _newton_maximize,
    build_augmented,
    project,
    project_cluster,
    project_draw_by_draw,
    submodel_predict,
)
from projsel.reference import ClusteredReference, DrawSet, cluster_draws, predictive_tensor


def _single_cluster(probs):
    """Wrap an (N, J) probability matrix as a one-cluster reference."""
    return ClusteredReference(
        assignments=np.zeros(1, dtype=int),
        weights=np.array([1.0]),
        probs=np.asarray(probs, dtype=float)[None, :, :],
        mode="clustered",
    )


def _cumulative_data_and_truth(seed, N=40, P=3, J=4, link="probit"):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(N, P))
    zeta = np.array([-0.8, 0.4, 1.3])[: J - 1]
    beta = np.array([0.7, -0.5, 0.3])[:P]
    eta = X @ beta
    probs = cumulative_pmf_matrix(zeta, link, eta)
    y = np.array([rng.choice(J, p=probs[i]) + 1 for i in range(N)])
    data = Dataset(X, y, J=J)
    return data, zeta, beta, probs


# ---------------------------------------------------------------------------
# augmented dataset layout
# ---------------------------------------------------------------------------


def test_build_augmented_block_layout():
    W = np.array([[0.1, 0.3, 0.6], [0.5, 0.2, 0.3]])
    data = Dataset(np.array([[1.0, 10.0], [2.0, 20.0]]), [1, 3], J=3,
                   columns=["a", "b"])
    clustered = _single_cluster(W)
    aug = build_augmented(data, clustered, 0, ["b"])
    assert (aug.N, aug.J) == (2, 3)
    assert aug.obs_index.tolist() == [0, 1, 0, 1, 0, 1]
    assert aug.y_value.tolist() == [1, 1, 2, 2, 3, 3]
    assert np.allclose(aug.weight, [0.1, 0.5, 0.3, 0.2, 0.6, 0.3])
    assert np.allclose(aug.X[:, 0], [10.0, 20.0, 10.0, 20.0, 10.0, 20.0])
    assert aug.columns == ("b",)
    assert aug.subset == (1,)
    assert np.allclose(aug.weight_matrix(), W)
    assert np.allclose(aug.predictor_matrix(), [[10.0], [20.0]])


def test_build_augmented_preserves_subset_order():
    data = Dataset(np.arange(6.0).reshape(2, 3), [1, 2], columns=["a", "b", "c"])
    clustered = _single_cluster(np.full((2, 2), 0.5))
    aug = build_augmented(data, clustered, 0, ["c", "a"])
    assert aug.subset == (2, 0)
    assert np.allclose(aug.predictor_matrix(), [[2.0, 0.0], [5.0, 3.0]])


def test_build_augmented_observation_count_mismatch():
    data = Dataset(np.zeros((3, 1)), [1, 2, 1], J=2)
    clustered = _single_cluster(np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        build_augmented(data, clustered, 0, [])


# ---------------------------------------------------------------------------
# self-projection: the reference model lies in the candidate space
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("link", ["probit", "logit"])
def test_self_projection_recovers_cumulative_truth(link):
    data, zeta, beta, probs = _cumulative_data_and_truth(20, link=link)
    proj = project(data, _single_cluster(probs), [0, 1, 2], "cumulative", link)
    assert proj.weighted_mean_kl() <= 1e-10
    assert np.abs(proj.params[0].thresholds - zeta).max() < 1e-5
    assert np.abs(proj.params[0].coefficients - beta).max() < 1e-5


def test_self_projection_recovers_categorical_truth():
    rng = np.random.default_rng(21)
    N, P, J = 50, 2, 3
    X = rng.normal(size=(N, P))
    intercepts = np.array([0.0, 0.4, -0.3])
    coefs = np.vstack([np.zeros(P), [0.8, -0.2], [-0.5, 0.6]])
    truth = CategoricalParams(intercepts, coefs)
    probs = np.array([categorical_pmf(truth, X[i]) for i in range(N)])
    y = np.array([rng.choice(J, p=probs[i]) + 1 for i in range(N)])
    data = Dataset(X, y, J=J)
    proj = project(data, _single_cluster(probs), [0, 1], "categorical")
    assert proj.weighted_mean_kl() <= 1e-10
    assert np.abs(proj.params[0].intercepts - intercepts).max() < 1e-5
    assert np.abs(proj.params[0].coefficients - coefs).max() < 1e-5


# ---------------------------------------------------------------------------
# KL bookkeeping
# ---------------------------------------------------------------------------


def test_kl_matches_direct_definition():
    data, _, _, _ = _cumulative_data_and_truth(22)
    rng = np.random.default_rng(23)
    W = rng.dirichlet(np.ones(4), size=40)
    proj = project(data, _single_cluster(W), [0, 1], "cumulative", "probit")
    params = proj.params[0]
    fitted = cumulative_pmf_matrix(
        params.thresholds, "probit", data.X[:, [0, 1]] @ params.coefficients)
    direct = np.mean(np.sum(W * (np.log(W) - np.log(fitted)), axis=1))
    assert abs(proj.kls[0] - direct) < 1e-10
    assert proj.kls[0] >= 0.0


def test_kl_weakly_decreasing_in_nested_subsets():
    data, _, _, _ = _cumulative_data_and_truth(24, N=60)
    rng = np.random.default_rng(25)
    zetas = np.sort(rng.normal(0, 1.0, (30, 3)), axis=1) + [[0.0, 0.5, 1.0]]
    draws = DrawSet("cumulative", zetas=zetas,
                    betas=rng.normal(0, 0.5, (30, 3)), link="probit")
    tensor = predictive_tensor(draws, data)
    from projsel.reference import clustering_features

    feats = clustering_features(draws, data)
    clustered = cluster_draws(tensor, feats, 3, seed=0)
    kls = []
    for subset in ([], [0], [0, 1], [0, 1, 2]):
        proj = project(data, clustered, subset, "cumulative", "probit")
        kls.append(proj.weighted_mean_kl())
    diffs = np.diff(kls)
    assert np.all(diffs <= 1e-9), "KL must not increase as the subset grows"


def test_score_is_weighted_objective_sum():
    data, _, _, probs = _cumulative_data_and_truth(26)
    rng = np.random.default_rng(27)
    W1 = rng.dirichlet(np.ones(4), size=40)
    clustered = ClusteredReference(
        assignments=np.array([0, 1, 1]),
        weights=np.array([1.0, 2.0]),
        probs=np.stack([probs, W1]),
        mode="clustered",
    )
    proj = project(data, clustered, [0], "cumulative", "probit")
    assert proj.score() == pytest.approx(
        1.0 * proj.objectives[0] + 2.0 * proj.objectives[1], abs=1e-12)


# ---------------------------------------------------------------------------
# closed-form intercept-only solutions
# ---------------------------------------------------------------------------


def test_intercept_only_categorical_matches_mean_weights():
    rng = np.random.default_rng(28)
    W = rng.dirichlet(np.ones(3), size=25)
    data = Dataset(rng.normal(size=(25, 2)), rng.integers(1, 4, 25), J=3)
    proj = project(data, _single_cluster(W), [], "categorical")
    fitted = categorical_pmf(proj.params[0], np.zeros(0))
    assert np.abs(fitted - W.mean(axis=0)).max() < 1e-8


def test_intercept_only_cumulative_matches_mean_weights():
    rng = np.random.default_rng(29)
    W = rng.dirichlet(np.ones(4), size=30)
    data = Dataset(rng.normal(size=(30, 2)), rng.integers(1, 5, 30), J=4)
    proj = project(data, _single_cluster(W), [], "cumulative", "logit")
    fitted = cumulative_pmf_matrix(
        proj.params[0].thresholds, "logit", np.zeros(1))[0]
    assert np.abs(fitted - W.mean(axis=0)).max() < 1e-8


def test_one_hot_weights_give_empirical_frequencies():
    # Point-mass weights collapse the augmented problem onto the observed
    # data, so the intercept-only fit is the empirical response distribution.
    rng = np.random.default_rng(30)
    y = rng.integers(1, 4, 40)
    y[:3] = [1, 2, 3]
    W = np.zeros((40, 3))
    W[np.arange(40), y - 1] = 1.0
    data = Dataset(rng.normal(size=(40, 1)), y, J=3)
    freq = np.bincount(y, minlength=4)[1:] / 40.0

    proj_cat = project(data, _single_cluster(W), [], "categorical")
    assert np.abs(categorical_pmf(proj_cat.params[0], np.zeros(0)) - freq).max() < 1e-8

    proj_cum = project(data, _single_cluster(W), [], "cumulative", "probit")
    fitted = cumulative_pmf_matrix(
        proj_cum.params[0].thresholds, "probit", np.zeros(1))[0]
    assert np.abs(fitted - freq).max() < 1e-8


# ---------------------------------------------------------------------------
# execution modes
# ---------------------------------------------------------------------------


def test_serial_and_threaded_projection_agree_exactly():
    data, _, _, _ = _cumulative_data_and_truth(31, N=50)
    rng = np.random.default_rng(32)
    probs = np.stack([rng.dirichlet(np.ones(4), size=50) for _ in range(5)])
    clustered = ClusteredReference(
        assignments=np.arange(5),
        weights=np.full(5, 3.0),
        probs=probs,
        mode="clustered",
    )
    serial = project(data, clustered, [0, 2], "cumulative", "probit", threads=1)
    threaded = project(data, clustered, [0, 2], "cumulative", "probit", threads=4)
    assert np.array_equal(serial.objectives, threaded.objectives)
    for a, b in zip(serial.params, threaded.params):
        assert np.array_equal(a.thresholds, b.thresholds)
        assert np.array_equal(a.coefficients, b.coefficients)


def test_draw_by_draw_equals_singleton_clusters():
    data, _, _, _ = _cumulative_data_and_truth(33, N=30)
    rng = np.random.default_rng(34)
    zetas = np.sort(rng.normal(0, 1.0, (4, 3)), axis=1) + [[0.0, 0.5, 1.0]]
    draws = DrawSet("cumulative", zetas=zetas,
                    betas=rng.normal(0, 0.4, (4, 3)), link="probit")
    proj = project_draw_by_draw(data, draws, [0, 1], "cumulative", "probit")
    assert proj.C == 4
    tensor = predictive_tensor(draws, data)
    for s in range(4):
        single = project(data, _single_cluster(tensor[s]), [0, 1],
                         "cumulative", "probit")
        assert np.array_equal(proj.params[s].thresholds,
                              single.params[0].thresholds)
        assert np.array_equal(proj.params[s].coefficients,
                              single.params[0].coefficients)


def test_warm_start_reaches_same_optimum():
    data, _, _, _ = _cumulative_data_and_truth(35, N=50)
    rng = np.random.default_rng(36)
    W = rng.dirichlet(np.ones(4), size=50)
    clustered = _single_cluster(W)
    parent = project(data, clustered, [0], "cumulative", "probit")
    warm = [CumulativeParams(p.thresholds, np.append(p.coefficients, 0.0))
            for p in parent.params]
    cold = project(data, clustered, [0, 1], "cumulative", "probit")
    warmed = project(data, clustered, [0, 1], "cumulative", "probit", init=warm)
    assert warmed.objectives[0] == pytest.approx(cold.objectives[0], abs=1e-9)
    assert np.abs(warmed.params[0].thresholds - cold.params[0].thresholds).max() < 1e-6


# ---------------------------------------------------------------------------
# solver guards
# ---------------------------------------------------------------------------


def test_newton_divergence_guard_raises():
    # A nearly flat concave objective drives the step past the bound.
    def evaluate(u, derivs=True):
        obj = float(u[0])
        if not derivs:
            return obj
        return obj, np.array([1.0]), np.array([[-1e-12]])

    with pytest.raises(ProjectionError, match="diverged"):
        _newton_maximize(evaluate, np.zeros(1), lambda u: u)


def test_projection_error_reports_cluster_index():
    data = Dataset(np.zeros((2, 1)), [1, 2], J=2)
    bad = ClusteredReference(
        assignments=np.zeros(1, dtype=int),
        weights=np.array([1.0]),
        probs=np.array([[[1.0, 0.0], [0.0, 1.0]]]),
        mode="clustered",
    )

    import projsel.projection as pj

    def boom(aug, family, link=None, init=None):
        raise ProjectionError("synthetic failure", grad_norm=1.0)

    orig = pj.project_cluster
    pj.project_cluster = boom
    try:
        with pytest.raises(ProjectionError, match="cluster 0") as err:
            project(data, bad, [0], "cumulative", "probit")
        assert err.value.cluster == 0
    finally:
        pj.project_cluster = orig


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def test_submodel_predict_is_cluster_mixture():
    data, _, _, probs = _cumulative_data_and_truth(37, N=20)
    rng = np.random.default_rng(38)
    W = rng.dirichlet(np.ones(4), size=20)
    clustered = ClusteredReference(
        assignments=np.array([0, 1, 1]),
        weights=np.array([1.0, 2.0]),
        probs=np.stack([probs, W]),
        mode="clustered",
    )
    proj = project(data, clustered, [1], "cumulative", "probit")
    pred = submodel_predict(proj, data)
    assert pred.shape == (20, 4)
    assert np.allclose(pred.sum(axis=1), 1.0, atol=1e-12)
    per_cluster = [
        cumulative_pmf_matrix(p.thresholds, "probit",
                              data.X[:, [1]] @ p.coefficients)
        for p in proj.params
    ]
    expected = (1.0 * per_cluster[0] + 2.0 * per_cluster[1]) / 3.0
    assert np.allclose(pred, expected, atol=1e-12)


def test_submodel_predict_accepts_plain_matrix_in_subset_order():
    data, _, _, _ = _cumulative_data_and_truth(39, N=20)
    rng = np.random.default_rng(40)
    W = rng.dirichlet(np.ones(4), size=20)
    proj = project(data, _single_cluster(W), [2, 0], "cumulative", "probit")
    from_dataset = submodel_predict(proj, data)
    from_matrix = submodel_predict(proj, data.X[:, [2, 0]])
    assert np.array_equal(from_dataset, from_matrix)
    with pytest.raises(ValueError):
        submodel_predict(proj, data.X)  # wrong column count
