"""Shared builders for test layouts and collections."""

import numpy as np
import pytest

from layout_metrics import BBox, Element, Layout, LayoutCollection
from layout_metrics import _engine


def element(l, t, w, h, cat=0):
    return Element(BBox(l, t, w, h), cat)


def layout(layout_id, *specs):
    """Build a layout from (l, t, w, h, cat) tuples."""
    return Layout(layout_id, tuple(element(*spec) for spec in specs))


def random_layout(rng, layout_id, n_elements, n_categories=5):
    specs = []
    for _ in range(n_elements):
        left = rng.uniform(0.0, 0.8)
        top = rng.uniform(0.0, 0.8)
        width = rng.uniform(0.02, 1.0 - left)
        height = rng.uniform(0.02, 1.0 - top)
        specs.append((left, top, width, height, int(rng.integers(0, n_categories))))
    return layout(layout_id, *specs)


def random_collection(seed, n_layouts, min_elements=3, max_elements=10, n_categories=5,
                      prefix="l"):
    rng = np.random.default_rng(seed)
    layouts = tuple(
        random_layout(rng, f"{prefix}{i:04d}", int(rng.integers(min_elements, max_elements + 1)),
                      n_categories)
        for i in range(n_layouts)
    )
    vocab = tuple(f"category_{i}" for i in range(n_categories))
    return LayoutCollection(layouts, vocab)


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Compile the numba kernels once so timed tests measure the algorithms."""
    _engine.warm_up()
