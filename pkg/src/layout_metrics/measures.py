"""Layout-pair similarity/dissimilarity measures and single-layout principle
scores.

The transport-based measures (``ltsim_cost``, ``ltsim_emd``, ``ltsim``) treat
element matching as a soft, many-to-many alignment: mass is spread uniformly
over each layout's elements and moved at a cost that blends positional
similarity (generalized IoU) with label agreement, so layouts sharing no
category still receive a graded score. The remaining measures are faithful
reference implementations of earlier evaluation practice, kept here so their
behavior can be compared like-for-like: a matching-based weight average
(``docsim``), category-wise matched IoU over equal label multisets
(``maxiou_beta``), rasterized segmentation-map IoU (``meaniou``), and
point-cloud earth mover's distance per category (``docemd``).

Conventions shared by every measure: empty layouts are rejected rather than
given a score, and similarity values live in documented ranges noted on each
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.spatial.distance import cdist

from . import _engine, geometry
from .assignment import max_weight_matching
from .errors import (
    DegenerateSamplingError,
    EmptyLayoutError,
    InvalidSigmaError,
    MultisetMismatchError,
    UnknownMeasureError,
)
from .model import Element, Layout, label_multiset

#: Cost charged by docemd for each category occurring on one side only:
#: the canvas diagonal, an upper bound on any point-to-point ground cost.
UNMATCHED_CATEGORY_PENALTY = math.sqrt(2.0)

DEFAULT_RESOLUTION = 256
DEFAULT_GRID = 32


@dataclass(frozen=True)
class MeasureValue:
    """A measure result: the scalar plus the measure id and diagnostics."""

    value: float
    measure: str
    meta: dict[str, Any] = field(default_factory=dict, compare=False)


def _require_elements(*layouts: Layout) -> None:
    for layout in layouts:
        if len(layout.elements) == 0:
            raise EmptyLayoutError(f"layout {layout.id!r} has no elements")


def docsim(a: Layout, b: Layout) -> MeasureValue:
    """Matching-based similarity with size-scaled weights (>= 0).

    Same-category element pairs get weight min(area) * 2^(-center distance
    - shape difference); cross-category pairs are excluded from the matching
    entirely, so unmatched elements are ignored and the score is the mean
    weight over matched pairs (0 when no same-category pair exists). Note the
    min-area factor ties the score's scale to element sizes, so absolute
    values are not comparable across layouts.
    """
    _require_elements(a, b)
    m, n = len(a.elements), len(b.elements)
    weights = np.zeros((m, n), dtype=np.float64)
    forbidden = np.ones((m, n), dtype=bool)
    for i, ea in enumerate(a.elements):
        for j, eb in enumerate(b.elements):
            if ea.category != eb.category:
                continue
            forbidden[i, j] = False
            exponent = -geometry.center_distance(ea.bbox, eb.bbox) - geometry.shape_difference(
                ea.bbox, eb.bbox
            )
            weights[i, j] = min(geometry.area(ea.bbox), geometry.area(eb.bbox)) * 2.0**exponent
    # the weight rule is echoed in the metadata because absolute docsim
    # values are not comparable across implementations with other conventions
    rule = "min_area*2^-(center_dist+shape_l1)"
    if forbidden.all():
        return MeasureValue(0.0, "docsim", {"matched": 0, "weight_rule": rule})
    matching = max_weight_matching(weights, forbidden)
    return MeasureValue(
        matching.total_weight / matching.cardinality,
        "docsim",
        {"matched": matching.cardinality, "weight_rule": rule},
    )


def maxiou_beta(a: Layout, b: Layout) -> MeasureValue:
    """Average matched IoU within each category, in [0, 1].

    Defined only for layouts with identical label multisets: every element is
    matched one-to-one inside its category by maximum-weight matching on IoU,
    and the mean is taken over all element pairs.
    """
    _require_elements(a, b)
    if label_multiset(a) != label_multiset(b):
        raise MultisetMismatchError(
            f"label multisets of {a.id!r} and {b.id!r} differ; maxiou-beta is undefined"
        )
    total = 0.0
    for cat in sorted({e.category for e in a.elements}):
        boxes_a = [e.bbox for e in a.elements if e.category == cat]
        boxes_b = [e.bbox for e in b.elements if e.category == cat]
        weights = np.array(
            [[geometry.iou(ba, bb) for bb in boxes_b] for ba in boxes_a], dtype=np.float64
        )
        matching = max_weight_matching(weights, require_cardinality=len(boxes_a))
        total += matching.total_weight
    n = len(a.elements)
    return MeasureValue(total / n, "maxiou-beta", {"matched": n})


def _category_masks(layout: Layout, resolution: int) -> dict[int, np.ndarray]:
    """Rasterize a layout into per-category boolean grids.

    A cell is set when its center lies inside any element of the category
    (half-open on the right/bottom edges).
    """
    masks: dict[int, np.ndarray] = {}
    for e in layout.elements:
        mask = masks.get(e.category)
        if mask is None:
            mask = np.zeros((resolution, resolution), dtype=bool)
            masks[e.category] = mask
        c_lo = max(0, math.ceil(resolution * e.bbox.left - 0.5))
        c_hi = min(resolution, math.ceil(resolution * e.bbox.right - 0.5))
        r_lo = max(0, math.ceil(resolution * e.bbox.top - 0.5))
        r_hi = min(resolution, math.ceil(resolution * e.bbox.bottom - 0.5))
        if c_lo < c_hi and r_lo < r_hi:
            mask[r_lo:r_hi, c_lo:c_hi] = True
    return masks


def meaniou(a: Layout, b: Layout, resolution: int = DEFAULT_RESOLUTION) -> MeasureValue:
    """Segmentation-map IoU averaged over the union of present categories, in [0, 1].

    Categories appearing in only one layout score 0, a constant penalty per
    category mismatch. Rasterization error is bounded by O(perimeter /
    resolution).
    """
    _require_elements(a, b)
    if resolution < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    masks_a = _category_masks(a, resolution)
    masks_b = _category_masks(b, resolution)
    cats = sorted(set(masks_a) | set(masks_b))
    total = 0.0
    for cat in cats:
        mask_a = masks_a.get(cat)
        mask_b = masks_b.get(cat)
        if mask_a is None or mask_b is None:
            continue
        union = int(np.logical_or(mask_a, mask_b).sum())
        if union == 0:
            continue
        total += int(np.logical_and(mask_a, mask_b).sum()) / union
    return MeasureValue(total / len(cats), "meaniou", {"categories": len(cats), "resolution": resolution})


def _category_points(layout: Layout, grid: int) -> dict[int, np.ndarray]:
    """Lattice cell centers captured by each category's elements.

    Raises when a present category captures zero points: the grid is too
    coarse for the layout's smallest elements.
    """
    masks = _category_masks(layout, grid)
    points: dict[int, np.ndarray] = {}
    for cat, mask in masks.items():
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            raise DegenerateSamplingError(
                f"layout {layout.id!r} category {cat}: no grid points captured at grid {grid}"
            )
        pts = np.empty((rows.size, 2), dtype=np.float64)
        pts[:, 0] = (cols + 0.5) / grid
        pts[:, 1] = (rows + 0.5) / grid
        points[cat] = pts
    return points


def docemd(a: Layout, b: Layout, grid: int = DEFAULT_GRID) -> MeasureValue:
    """Summed per-category earth mover's distance between element point clouds
    (dissimilarity, >= 0).

    Each category's elements are sampled as lattice cell centers with equal
    per-side mass; the exact EMD under Euclidean ground cost is accumulated
    over categories present in both layouts. A category present on one side
    only contributes the canvas diagonal as a fixed penalty.
    """
    _require_elements(a, b)
    if grid < 1:
        raise ValueError(f"grid must be positive, got {grid}")
    points_a = _category_points(a, grid)
    points_b = _category_points(b, grid)
    total = 0.0
    shared = 0
    for cat in sorted(set(points_a) | set(points_b)):
        if cat in points_a and cat in points_b:
            cost = np.ascontiguousarray(cdist(points_a[cat], points_b[cat]))
            flows = _engine.transport_flows(cost)
            total += _engine.objective_from_flows(cost, flows)
            shared += 1
        else:
            total += UNMATCHED_CATEGORY_PENALTY
    unmatched = len(set(points_a) ^ set(points_b))
    return MeasureValue(total, "docemd", {"grid": grid, "shared_categories": shared,
                                          "unmatched_categories": unmatched,
                                          "unmatched_penalty": UNMATCHED_CATEGORY_PENALTY})


def ltsim_cost(e1: Element, e2: Element) -> float:
    """Transport cost between two elements, in [0, 1].

    1 - (positional similarity + label agreement) / 2, where positional
    similarity is (1 + GIoU) / 2. Zero exactly for same-category element
    pairs with GIoU 1.
    """
    d_bbox = geometry.delta_bbox(e1.bbox, e2.bbox)
    d_label = 1.0 if e1.category == e2.category else 0.0
    return 1.0 - (d_bbox + d_label) / 2.0


def ltsim_emd(a: Layout, b: Layout) -> MeasureValue:
    """Optimal transport dissimilarity between two layouts, in [0, 1].

    Builds the element-pair cost matrix from :func:`ltsim_cost`, solves the
    uniform-marginal transportation problem exactly, and returns the optimal
    objective. Symmetric up to float summation order.
    """
    _require_elements(a, b)
    boxes_a, cats_a, _ = _engine.pack_layouts([a])
    boxes_b, cats_b, _ = _engine.pack_layouts([b])
    value = _engine.pair_emd(boxes_a, cats_a, boxes_b, cats_b)
    return MeasureValue(float(value), "ltsim-emd", {"m": len(a.elements), "n": len(b.elements)})


def ltsim(a: Layout, b: Layout, sigma: float = 1.0) -> MeasureValue:
    """Transport similarity exp(-EMD / sigma), in (0, 1]; 1 iff EMD is 0."""
    if not isinstance(sigma, (int, float)) or isinstance(sigma, bool) or not math.isfinite(sigma) or sigma <= 0:
        raise InvalidSigmaError(f"sigma must be a positive finite number, got {sigma!r}")
    emd = ltsim_emd(a, b)
    return MeasureValue(
        math.exp(-emd.value / sigma), "ltsim", {"sigma": float(sigma), "emd": emd.value}
    )


def overlap(layout: Layout) -> MeasureValue:
    """Mean overlapped-area fraction per element (>= 0; 0 is overlap-free).

    For each element, the intersection area with every other element is summed
    and normalized by the element's own area; zero-area elements contribute 0.
    """
    _require_elements(layout)
    elements = layout.elements
    n = len(elements)
    total = 0.0
    for i, ei in enumerate(elements):
        ai = geometry.area(ei.bbox)
        if ai <= 0.0:
            continue
        for j, ej in enumerate(elements):
            if i != j:
                total += geometry.intersection_area(ei.bbox, ej.bbox) / ai
    return MeasureValue(total / n, "overlap", {"elements": n})


_ALIGN_COORDS = 6


def alignment(layout: Layout) -> MeasureValue:
    """Alignment violation score (>= 0; lower means better aligned; 0 for a
    single element).

    Each element's nearest alignment gap is the minimum, over the other
    elements and over six coordinates (left, horizontal center, right, top,
    vertical center, bottom), of the absolute coordinate difference; gaps are
    sharpened by -log(1 - gap) and averaged.
    """
    _require_elements(layout)
    n = len(layout.elements)
    if n == 1:
        return MeasureValue(0.0, "alignment", {"elements": 1})
    coords = np.empty((n, _ALIGN_COORDS), dtype=np.float64)
    for i, e in enumerate(layout.elements):
        cx, cy = e.bbox.center
        coords[i] = (e.bbox.left, cx, e.bbox.right, e.bbox.top, cy, e.bbox.bottom)
    diffs = np.abs(coords[:, None, :] - coords[None, :, :])
    diffs[np.arange(n), np.arange(n), :] = np.inf
    gaps = diffs.min(axis=(1, 2))
    gaps = np.clip(gaps, 0.0, 1.0 - 1e-12)
    return MeasureValue(float(np.mean(-np.log1p(-gaps))), "alignment", {"elements": n})


#: Layout-pair measure registry: name -> (factory, higher_is_better).
#: The factory binds the measure's tuning knobs and returns a two-layout callable.
_PAIR_MEASURES: dict[str, tuple[Callable[..., Callable[[Layout, Layout], MeasureValue]], bool]] = {
    "ltsim": (lambda sigma, resolution, grid: lambda a, b: ltsim(a, b, sigma=sigma), True),
    "ltsim-emd": (lambda sigma, resolution, grid: ltsim_emd, False),
    "docsim": (lambda sigma, resolution, grid: docsim, True),
    "maxiou-beta": (lambda sigma, resolution, grid: maxiou_beta, True),
    "meaniou": (lambda sigma, resolution, grid: lambda a, b: meaniou(a, b, resolution=resolution), True),
    "docemd": (lambda sigma, resolution, grid: lambda a, b: docemd(a, b, grid=grid), False),
}

PAIR_MEASURE_NAMES = tuple(_PAIR_MEASURES)


def resolve_measure(
    name: str,
    sigma: float = 1.0,
    resolution: int = DEFAULT_RESOLUTION,
    grid: int = DEFAULT_GRID,
) -> tuple[Callable[[Layout, Layout], MeasureValue], bool]:
    """Look up a layout-pair measure by identifier.

    Returns ``(callable, higher_is_better)``; hyphens and underscores in the
    name are interchangeable.
    """
    key = name.strip().lower().replace("_", "-")
    try:
        factory, higher_is_better = _PAIR_MEASURES[key]
    except KeyError:
        raise UnknownMeasureError(
            f"unknown measure {name!r}; expected one of {', '.join(PAIR_MEASURE_NAMES)}"
        ) from None
    return factory(sigma, resolution, grid), higher_is_better
