"""Scalar box-pair functions shared by all measures.

Everything here is pure double-precision arithmetic with no tolerances;
tolerances belong to tests. Degenerate (zero-area) boxes are legal inputs.
"""

from __future__ import annotations

import math

from .model import BBox


def area(b: BBox) -> float:
    """width x height."""
    return b.width * b.height


def intersection_area(b1: BBox, b2: BBox) -> float:
    """Area of the overlap region; 0 for disjoint or edge-touching boxes."""
    iw = min(b1.right, b2.right) - max(b1.left, b2.left)
    ih = min(b1.bottom, b2.bottom) - max(b1.top, b2.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def _corner_area(b: BBox) -> float:
    # Derived from the same corner differences as the intersection, so
    # identity pairs give IoU and GIoU of exactly 1.
    return (b.right - b.left) * (b.bottom - b.top)


def iou(b1: BBox, b2: BBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    inter = intersection_area(b1, b2)
    union = _corner_area(b1) + _corner_area(b2) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou(b1: BBox, b2: BBox) -> float:
    """Generalized IoU in [-1, 1].

    IoU minus the fraction of the smallest enclosing box not covered by the
    union. Returns 0 when the enclosing box itself has zero area (coincident
    or collinear degenerate boxes), where the definition is 0/0.
    """
    ew = max(b1.right, b2.right) - min(b1.left, b2.left)
    eh = max(b1.bottom, b2.bottom) - min(b1.top, b2.top)
    enclosing = ew * eh
    if enclosing <= 0.0:
        return 0.0
    inter = intersection_area(b1, b2)
    union = _corner_area(b1) + _corner_area(b2) - inter
    iou_val = inter / union if union > 0.0 else 0.0
    return iou_val - (enclosing - union) / enclosing


def delta_bbox(b1: BBox, b2: BBox) -> float:
    """(1 + GIoU) / 2, a positional similarity in [0, 1]."""
    return (1.0 + giou(b1, b2)) / 2.0


def center_distance(b1: BBox, b2: BBox) -> float:
    """Euclidean distance between box centers in canvas-normalized coordinates."""
    (x1, y1), (x2, y2) = b1.center, b2.center
    return math.hypot(x1 - x2, y1 - y2)


def shape_difference(b1: BBox, b2: BBox) -> float:
    """L1 difference of normalized widths and heights; position-independent."""
    return abs(b1.width - b2.width) + abs(b1.height - b2.height)
