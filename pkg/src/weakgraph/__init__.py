"""Graph estimation with a family-wise guarantee against false edges.

Edges are kept only where a simultaneous confidence set for the
dependence measure excludes zero, so with probability at least
``1 - alpha`` every reported edge is a true one.
"""
from .asymptotics import (
    delta_diagnostics,
    delta_rectangle,
    gradient_rows,
    standard_errors,
    t_empirical,
    t_gaussian_plugin,
)
from .bootstrap import bootstrap_rectangle, super_accurate_intervals
from .errors import DataError, PreconditionError, WeakGraphError
from .estimators import (
    GraphEstimate,
    cluster_graph,
    correlation_graph,
    finite_sample_graph,
    graph_guarantee_check,
    l_centers,
    partial_corr_graph,
    restricted_graph,
    restricted_partial_corr,
)
from .harness import CoverageReport, ExperimentConfig, estimate_graph, run_coverage
from .io import export_graph, ingest_csv
from .linalg import (
    CovMatrix,
    DataMatrix,
    partial_correlations,
    precision,
    sample_correlations,
    sample_covariance,
)
from .models import ModelSpec, ground_truth, sample

__all__ = [
    "delta_diagnostics",
    "delta_rectangle",
    "gradient_rows",
    "standard_errors",
    "t_empirical",
    "t_gaussian_plugin",
    "bootstrap_rectangle",
    "super_accurate_intervals",
    "DataError",
    "PreconditionError",
    "WeakGraphError",
    "GraphEstimate",
    "cluster_graph",
    "correlation_graph",
    "finite_sample_graph",
    "graph_guarantee_check",
    "l_centers",
    "partial_corr_graph",
    "restricted_graph",
    "restricted_partial_corr",
    "CoverageReport",
    "ExperimentConfig",
    "estimate_graph",
    "run_coverage",
    "export_graph",
    "ingest_csv",
    "CovMatrix",
    "DataMatrix",
    "partial_correlations",
    "precision",
    "sample_correlations",
    "sample_covariance",
    "ModelSpec",
    "ground_truth",
    "sample",
]

__version__ = "0.1.0"
