"""Core layout data types and JSONL ingestion/serialization.

A layout is a set of category-labeled bounding boxes on the unit canvas.
Coordinates are stored as ``[left, top, width, height]`` fractions of the
canvas, which keeps area and IoU arithmetic uniform across datasets.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

#: Ingested boxes may exceed the canvas by at most this much (float slack).
CANVAS_SLACK = 1e-9

#: Layouts with more elements than this trigger an ingestion warning.
DEFAULT_ELEMENT_CAP = 25


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in normalized canvas coordinates."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
                raise ValueError(f"bbox field {name!r} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.width < 0 or self.height < 0:
            raise ValueError(f"bbox size must be non-negative, got {self.width}x{self.height}")
        if not (0.0 <= self.left <= 1.0 and 0.0 <= self.top <= 1.0):
            raise ValueError(f"bbox origin ({self.left}, {self.top}) outside the unit canvas")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)


@dataclass(frozen=True)
class Element:
    """A bounding box paired with a category id from the vocabulary."""

    bbox: BBox
    category: int

    def __post_init__(self):
        if not isinstance(self.category, int) or isinstance(self.category, bool) or self.category < 0:
            raise ValueError(f"category must be a non-negative int, got {self.category!r}")


@dataclass(frozen=True)
class Layout:
    """An identified multiset of elements; element order carries no meaning."""

    id: str
    elements: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class LayoutCollection:
    """A list of layouts sharing a category vocabulary.

    ``meta`` carries optional provenance (e.g. perturbation parameters read
    from a file header) and does not participate in equality.
    """

    layouts: tuple[Layout, ...]
    vocabulary: tuple[str, ...]
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layouts", tuple(self.layouts))
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        seen = set()
        for layout in self.layouts:
            if layout.id in seen:
                raise ValidationError(f"duplicate layout id {layout.id!r}")
            seen.add(layout.id)
            for k, element in enumerate(layout.elements):
                if element.category >= len(self.vocabulary):
                    raise ValidationError(
                        f"layout {layout.id!r} element {k}: unknown category id "
                        f"{element.category} (vocabulary has {len(self.vocabulary)} entries)"
                    )

    def __len__(self) -> int:
        return len(self.layouts)

    def __getitem__(self, i: int) -> Layout:
        return self.layouts[i]

    def by_id(self, layout_id: str) -> Layout:
        for layout in self.layouts:
            if layout.id == layout_id:
                return layout
        raise KeyError(layout_id)


def label_multiset(layout: Layout) -> Counter:
    """Bag of category ids of a layout's elements, ignoring geometry."""
    return Counter(e.category for e in layout.elements)


def multiset_key(layout: Layout) -> tuple[tuple[int, int], ...]:
    """Hashable canonical form of :func:`label_multiset`, for grouping."""
    return tuple(sorted(label_multiset(layout).items()))


def _parse_layout(obj, line_no: int) -> Layout:
    if not isinstance(obj, dict) or "id" not in obj or "elements" not in obj:
        raise ParseError(f"line {line_no}: expected an object with 'id' and 'elements'")
    layout_id = obj["id"]
    if not isinstance(layout_id, str):
        raise ParseError(f"line {line_no}: 'id' must be a string")
    raw_elements = obj["elements"]
    if not isinstance(raw_elements, list):
        raise ParseError(f"line {line_no}: 'elements' must be a list")
    if len(raw_elements) == 0:
        raise ValidationError(f"layout {layout_id!r}: empty layout")
    elements = []
    for k, raw in enumerate(raw_elements):
        if not isinstance(raw, dict) or "bbox" not in raw or "category" not in raw:
            raise ParseError(f"line {line_no}: element {k} must have 'bbox' and 'category'")
        bbox = raw["bbox"]
        if not isinstance(bbox, list) or len(bbox) != 4 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox
        ):
            raise ParseError(f"line {line_no}: element {k} bbox must be four numbers")
        category = raw["category"]
        if not isinstance(category, int) or isinstance(category, bool):
            raise ParseError(f"line {line_no}: element {k} category must be an integer")
        left, top, width, height = (float(v) for v in bbox)
        try:
            box = BBox(left, top, width, height)
            element = Element(box, category)
        except ValueError as exc:
            raise ValidationError(f"layout {layout_id!r} element {k}: {exc}") from exc
        if box.right > 1.0 + CANVAS_SLACK or box.bottom > 1.0 + CANVAS_SLACK:
            raise ValidationError(
                f"layout {layout_id!r} element {k}: box extends outside the unit canvas"
            )
        elements.append(element)
    return Layout(layout_id, tuple(elements))


def load_vocabulary(path) -> tuple[str, ...]:
    """Read a vocabulary file: a JSON array of category names."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not all(isinstance(v, str) for v in data):
        raise ParseError(f"{path}: vocabulary must be a JSON array of strings")
    return tuple(data)


def load_collection(path, vocab_path=None, element_cap: int = DEFAULT_ELEMENT_CAP) -> LayoutCollection:
    """Load a JSONL layout file into a validated collection.

    Each line is ``{"id": str, "elements": [{"bbox": [l,t,w,h], "category": int}, ...]}``;
    an optional first line ``{"meta": {...}}`` is kept as collection metadata.
    When ``vocab_path`` is omitted the vocabulary is inferred as generic names
    covering the largest category id seen, which is enough for every measure
    (only label noise needs real vocabulary sizes).

    Layouts with more than ``element_cap`` elements trigger a warning, not an
    error: the cap is a dataset-filtering convention, not a library limit.
    """
    vocabulary = load_vocabulary(vocab_path) if vocab_path is not None else None
    layouts = []
    meta = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if line_no == 1 and isinstance(obj, dict) and set(obj) == {"meta"}:
                meta = obj["meta"]
                continue
            layout = _parse_layout(obj, line_no)
            if len(layout) > element_cap:
                warnings.warn(
                    f"layout {layout.id!r} has {len(layout)} elements (cap {element_cap})",
                    stacklevel=2,
                )
            layouts.append(layout)
    if vocabulary is None:
        max_id = max((e.category for l in layouts for e in l.elements), default=-1)
        vocabulary = tuple(f"category_{i}" for i in range(max_id + 1))
    return LayoutCollection(tuple(layouts), vocabulary, meta=meta)


def save_collection(collection: LayoutCollection, path, meta: dict | None = None) -> None:
    """Write a collection in the JSONL format accepted by :func:`load_collection`.

    ``meta``, when given, is written as a ``{"meta": ...}`` header line.
    Floats are serialized with full precision so that a load/save round trip
    reproduces every coordinate bit-for-bit.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}) + "\n")
        for layout in collection.layouts:
            obj = {
                "id": layout.id,
                "elements": [
                    {
                        "bbox": [e.bbox.left, e.bbox.top, e.bbox.width, e.bbox.height],
                        "category": e.category,
                    }
                    for e in layout.elements
                ],
            }
            fh.write(json.dumps(obj) + "\n")
