"""Prediction, clustering and generation toolkit for WWTP microbiome tables."""

__version__ = "0.1.0"

from . import analysis, cluster_core, dataset, debp, devo, dpng, epmc, mlp, sitgan  # noqa: F401
