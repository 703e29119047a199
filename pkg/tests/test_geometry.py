import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from layout_metrics import BBox
from layout_metrics.geometry import (
    area,
    center_distance,
    delta_bbox,
    giou,
    iou,
    shape_difference,
)


def box_strategy(min_size=0.0):
    def build(l, t, wf, hf):
        return BBox(l, t, min_size + (1.0 - l - min_size) * wf, min_size + (1.0 - t - min_size) * hf)

    frac = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)
    origin = st.floats(0.0, 1.0 - min_size, allow_nan=False, allow_infinity=False)
    return st.builds(build, origin, origin, frac, frac)


def test_area_fixtures():
    assert area(BBox(0, 0, 1, 1)) == 1.0
    assert area(BBox(0.2, 0.2, 0.4, 0.4)) == pytest.approx(0.16, abs=1e-12)
    assert area(BBox(0, 0, 0, 0.5)) == 0.0


def test_iou_fixtures():
    b = BBox(0.1, 0.2, 0.3, 0.4)
    assert iou(b, b) == 1.0
    assert iou(BBox(0, 0, 0.5, 1), BBox(0.5, 0, 0.5, 1)) == 0.0
    # hand evaluation: intersection 0.25^2, union 2*0.25 - 0.0625
    assert iou(BBox(0, 0, 0.5, 0.5), BBox(0.25, 0.25, 0.5, 0.5)) == pytest.approx(
        0.0625 / 0.4375, abs=1e-12
    )


def test_giou_fixtures():
    b = BBox(0.1, 0.2, 0.3, 0.4)
    assert giou(b, b) == 1.0
    assert giou(BBox(0, 0, 0.5, 1), BBox(0.5, 0, 0.5, 1)) == 0.0
    assert giou(BBox(0, 0, 0.1, 0.1), BBox(0.9, 0.9, 0.1, 0.1)) == pytest.approx(-0.98, abs=1e-12)


def test_giou_zero_enclosing_convention():
    point = BBox(0.5, 0.5, 0.0, 0.0)
    assert giou(point, point) == 0.0
    collinear = BBox(0.1, 0.5, 0.0, 0.0)
    assert giou(point, collinear) == 0.0


def test_delta_bbox_fixtures():
    b = BBox(0.1, 0.2, 0.3, 0.4)
    assert delta_bbox(b, b) == 1.0
    assert delta_bbox(BBox(0, 0, 0.5, 1), BBox(0.5, 0, 0.5, 1)) == pytest.approx(0.5, abs=1e-12)
    assert delta_bbox(BBox(0, 0, 0.1, 0.1), BBox(0.9, 0.9, 0.1, 0.1)) == pytest.approx(0.01, abs=1e-12)


def test_center_distance_fixtures():
    b = BBox(0.3, 0.3, 0.2, 0.2)
    assert center_distance(b, b) == 0.0
    assert center_distance(BBox(0.15, 0.4, 0.2, 0.2), BBox(0.65, 0.4, 0.2, 0.2)) == pytest.approx(0.5)
    assert center_distance(BBox(0, 0, 0.2, 0.2), BBox(0.8, 0.8, 0.2, 0.2)) == pytest.approx(
        math.sqrt(0.8**2 + 0.8**2), abs=1e-12
    )


def test_shape_difference_fixtures():
    b = BBox(0.3, 0.3, 0.2, 0.2)
    assert shape_difference(b, b) == 0.0
    assert shape_difference(BBox(0, 0, 0.5, 0.5), BBox(0.2, 0.4, 0.3, 0.2)) == pytest.approx(0.5)
    assert shape_difference(BBox(0, 0, 0.3, 0.3), BBox(0.6, 0.6, 0.3, 0.3)) == 0.0


@given(box_strategy(), box_strategy())
def test_symmetry(b1, b2):
    assert iou(b1, b2) == iou(b2, b1)
    assert giou(b1, b2) == giou(b2, b1)
    assert delta_bbox(b1, b2) == (1.0 + giou(b1, b2)) / 2.0


@given(box_strategy(min_size=1e-3))
def test_identity_on_non_degenerate(b):
    assert iou(b, b) == 1.0
    assert giou(b, b) == 1.0


@given(box_strategy(), box_strategy())
def test_giou_bounded_and_below_iou(b1, b2):
    g = giou(b1, b2)
    assert -1.0 <= g <= 1.0
    assert g <= iou(b1, b2) + 1e-12
    assert 0.0 <= delta_bbox(b1, b2) <= 1.0


def test_giou_equals_iou_when_enclosing_is_union():
    # stacked boxes that tile their enclosing box exactly
    top = BBox(0.2, 0.2, 0.4, 0.2)
    bottom = BBox(0.2, 0.4, 0.4, 0.3)
    assert giou(top, bottom) == pytest.approx(iou(top, bottom), abs=1e-12)


def test_giou_monotone_in_separation():
    values = []
    for step in range(30):
        offset = 0.02 * step
        values.append(giou(BBox(0.0, 0.4, 0.2, 0.2), BBox(offset, 0.4, 0.2, 0.2)))
    assert values[0] == 1.0
    for prev, cur in zip(values, values[1:]):
        assert cur <= prev + 1e-12
