"""Projection predictive variable selection for discrete finite-support responses.

The package projects a reference model's posterior predictive distribution
onto submodels restricted to predictor subsets, via weighted maximum
likelihood on an augmented dataset (each observation replicated once per
response category, weighted by the reference predictive probabilities), and
compares it with an approximate latent-space projection.  Forward search,
MLPD/GMPD evaluation with standard errors, size suggestion, K-fold
cross-validation, and a simulation-study harness sit on top; the ``projsel``
command-line tool exposes the whole pipeline on CSV/JSON files.
"""

__version__ = "0.1.0"

from .families import (
    CategoricalParams,
    CumulativeParams,
    Dataset,
    InvalidParameterError,
    Link,
    Support,
    categorical_pmf,
    cumulative_pmf,
    get_link,
    log_pmf,
)
from .reference import (
    ClusteredReference,
    DrawSet,
    IngestionError,
    cluster_draws,
    clustering_features,
    predictive_tensor,
    thin_draws,
    thin_indices,
)
from .projection import (
    ProjectedSubmodel,
    ProjectionError,
    build_augmented,
    project,
    project_cluster,
    project_draw_by_draw,
    submodel_predict,
)
from .latent import (
    LatentProjectedSubmodel,
    latent_predict_response,
    latent_project,
)
from .search import (
    PerfStats,
    SolutionPath,
    SuggestedSize,
    evaluate,
    fold_agreement,
    forward_search,
    kfold_evaluate,
    suggest_size,
)
from .simulation import (
    SimConfig,
    SimIterationResult,
    aggregate_tables,
    draw_rhs_coefficients,
    fit_reference_laplace,
    generate_dataset,
    make_thresholds,
    pseudo_variance,
    run_study,
    tau0,
)
from .dataio import (
    DataError,
    load_dataset,
    load_draws,
    load_stats,
    save_dataset,
    save_draws,
)

__all__ = [
    "CategoricalParams",
    "ClusteredReference",
    "CumulativeParams",
    "DataError",
    "Dataset",
    "DrawSet",
    "IngestionError",
    "InvalidParameterError",
    "LatentProjectedSubmodel",
    "Link",
    "PerfStats",
    "ProjectedSubmodel",
    "ProjectionError",
    "SimConfig",
    "SimIterationResult",
    "SolutionPath",
    "SuggestedSize",
    "Support",
    "__version__",
    "aggregate_tables",
    "build_augmented",
    "categorical_pmf",
    "cluster_draws",
    "clustering_features",
    "cumulative_pmf",
    "draw_rhs_coefficients",
    "evaluate",
    "fit_reference_laplace",
    "fold_agreement",
    "forward_search",
    "generate_dataset",
    "get_link",
    "kfold_evaluate",
    "latent_predict_response",
    "latent_project",
    "load_dataset",
    "load_draws",
    "load_stats",
    "log_pmf",
    "make_thresholds",
    "predictive_tensor",
    "project",
    "project_cluster",
    "project_draw_by_draw",
    "pseudo_variance",
    "run_study",
    "save_dataset",
    "save_draws",
    "submodel_predict",
    "suggest_size",
    "tau0",
    "thin_draws",
    "thin_indices",
]
