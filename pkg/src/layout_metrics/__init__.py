"""Evaluation toolkit for 2D layouts.

Layout-pair measures (transport-based similarity plus reference
implementations of earlier matching/raster/point-cloud measures),
collection-level comparison via a kernel MMD over the transport similarity,
and the perturbation/retrieval/correlation harness used to study measure
behavior.
"""

__version__ = "0.1.0"

from .assignment import Matching, TransportPlan, max_weight_matching, solve_transport, transport_objective
from .collection import (
    MaxIouReport,
    MmdReport,
    PairwiseMatrix,
    ltsim_mmd,
    maxiou_collection,
    median_sigma,
    pairwise_emd,
)
from .harness import PerturbConfig, RankedList, kendall_tau, measure_correlation, perturb, retrieve
from .measures import (
    MeasureValue,
    alignment,
    docemd,
    docsim,
    ltsim,
    ltsim_cost,
    ltsim_emd,
    maxiou_beta,
    meaniou,
    overlap,
    resolve_measure,
)
from .model import (
    BBox,
    Element,
    Layout,
    LayoutCollection,
    label_multiset,
    load_collection,
    load_vocabulary,
    save_collection,
)

__all__ = [
    "BBox",
    "Element",
    "Layout",
    "LayoutCollection",
    "Matching",
    "MaxIouReport",
    "MeasureValue",
    "MmdReport",
    "PairwiseMatrix",
    "PerturbConfig",
    "RankedList",
    "TransportPlan",
    "alignment",
    "docemd",
    "docsim",
    "kendall_tau",
    "label_multiset",
    "load_collection",
    "load_vocabulary",
    "ltsim",
    "ltsim_cost",
    "ltsim_emd",
    "ltsim_mmd",
    "max_weight_matching",
    "maxiou_beta",
    "maxiou_collection",
    "meaniou",
    "measure_correlation",
    "median_sigma",
    "overlap",
    "pairwise_emd",
    "perturb",
    "resolve_measure",
    "retrieve",
    "save_collection",
    "solve_transport",
    "transport_objective",
]
