"""Experimental procedures: dataset perturbation, nearest-neighbor retrieval,
and rank correlation between measures.

Perturbation draws an independent random stream per element, keyed by
(seed, layout id, element index). Dropping layouts from a collection
therefore never changes how the remaining layouts are perturbed, which is
what makes subsampling studies comparable across runs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllTiedError,
    DegenerateSamplingError,
    EmptyLayoutError,
    LengthMismatchError,
    MultisetMismatchError,
    MultisetPrecheckFailedError,
    VocabularyTooSmallError,
)
from .measures import DEFAULT_GRID, DEFAULT_RESOLUTION, resolve_measure
from .model import BBox, Element, Layout, LayoutCollection, label_multiset

PERTURB_KINDS = ("positional", "label")


@dataclass(frozen=True)
class PerturbConfig:
    """Noise settings: per-element injection rate, noise kind, offset bound, seed."""

    rate: float
    kind: str
    max_offset: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must be in [0, 1], got {self.rate}")
        if self.kind not in PERTURB_KINDS:
            raise ValueError(f"kind must be one of {PERTURB_KINDS}, got {self.kind!r}")
        if self.max_offset < 0.0:
            raise ValueError(f"max_offset must be non-negative, got {self.max_offset}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class RankedList:
    """Retrieval result: (layout id, score) sorted best-first.

    Scores are always higher-is-better; dissimilarity measures are negated
    before ranking so downstream code has a single comparator. Ties are broken
    by ascending id.
    """

    items: tuple[tuple[str, float], ...]
    meta: dict = field(default_factory=dict, compare=False)


def _element_rng(seed: int, id_words: tuple[int, ...], index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, *id_words, index))))


def _id_words(layout_id: str) -> tuple[int, ...]:
    digest = hashlib.sha256(layout_id.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def perturb(collection: LayoutCollection, cfg: PerturbConfig) -> LayoutCollection:
    """Apply positional or label noise to a collection.

    Each element is independently selected with probability ``cfg.rate``.
    Positional noise translates the box by a per-axis offset uniform in
    [-max_offset, +max_offset], clamped so the box stays inside the unit
    canvas (never resized). Label noise replaces the category with a uniform
    draw from the rest of the vocabulary. Unselected elements are returned
    unchanged, and the same seed always reproduces the same output.
    """
    if cfg.kind == "label" and len(collection.vocabulary) < 2:
        raise VocabularyTooSmallError(
            f"label noise needs at least 2 categories, vocabulary has {len(collection.vocabulary)}"
        )
    vocab_size = len(collection.vocabulary)
    new_layouts = []
    for layout in collection.layouts:
        id_words = _id_words(layout.id)
        elements = []
        for index, element in enumerate(layout.elements):
            rng = _element_rng(cfg.seed, id_words, index)
            if rng.random() >= cfg.rate:
                elements.append(element)
                continue
            if cfg.kind == "positional":
                box = element.bbox
                dx = rng.uniform(-cfg.max_offset, cfg.max_offset)
                dy = rng.uniform(-cfg.max_offset, cfg.max_offset)
                left = min(max(box.left + dx, 0.0), max(0.0, 1.0 - box.width))
                top = min(max(box.top + dy, 0.0), max(0.0, 1.0 - box.height))
                elements.append(Element(BBox(left, top, box.width, box.height), element.category))
            else:
                draw = int(rng.integers(0, vocab_size - 1))
                if draw >= element.category:
                    draw += 1
                elements.append(Element(element.bbox, draw))
        new_layouts.append(Layout(layout.id, tuple(elements)))
    return LayoutCollection(tuple(new_layouts), collection.vocabulary)


def retrieve(
    query: Layout,
    collection: LayoutCollection,
    measure: str,
    k: int,
    sigma: float = 1.0,
    resolution: int = DEFAULT_RESOLUTION,
    grid: int = DEFAULT_GRID,
) -> RankedList:
    """Top-k nearest layouts to the query under a layout-pair measure.

    Layouts for which the measure is undefined on that particular pair
    (multiset mismatches under maxiou-beta, empty or unsampleable layouts)
    are skipped and counted in ``meta["skipped"]``; configuration errors
    propagate.
    """
    fn, higher_is_better = resolve_measure(measure, sigma=sigma, resolution=resolution, grid=grid)
    if not 1 <= k <= len(collection):
        raise ValueError(f"k must be in [1, {len(collection)}], got {k}")
    scored = []
    skipped = 0
    for layout in collection.layouts:
        try:
            value = fn(query, layout).value
        except (MultisetMismatchError, EmptyLayoutError, DegenerateSamplingError):
            skipped += 1
            continue
        scored.append((layout.id, value if higher_is_better else -value))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RankedList(tuple(scored[:k]), {"skipped": skipped, "measure": measure,
                                          "candidates": len(collection)})


def kendall_tau(scores_a, scores_b) -> float:
    """Tie-corrected Kendall rank correlation (tau-b) in [-1, 1].

    Exact O(n^2) pair counting with integer tallies; the tie-corrected
    denominator uses a single square root of an integer product, so perfect
    agreement and perfect reversal come out as exactly +/-1 even when both
    vectors carry consistent ties. Raises :class:`AllTiedError` when either
    vector is constant, where the correction has a zero denominator.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatchError(f"score vectors have lengths {a.size} and {b.size}")
    if a.ndim != 1 or a.size < 2:
        raise ValueError(f"need 1-D vectors of length >= 2, got shape {a.shape}")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise AllTiedError("rank correlation undefined: a score vector is constant")
    concordant = discordant = ties_a_only = ties_b_only = 0
    for i in range(a.size - 1):
        da = np.sign(a[i + 1:] - a[i])
        db = np.sign(b[i + 1:] - b[i])
        product = da * db
        concordant += int(np.count_nonzero(product > 0))
        discordant += int(np.count_nonzero(product < 0))
        ties_a_only += int(np.count_nonzero((da == 0) & (db != 0)))
        ties_b_only += int(np.count_nonzero((da != 0) & (db == 0)))
    denominator_sq = (concordant + discordant + ties_a_only) * (
        concordant + discordant + ties_b_only
    )
    if denominator_sq == 0:
        raise AllTiedError("rank correlation undefined for these scores")
    return (concordant - discordant) / math.sqrt(denominator_sq)


def measure_correlation(
    pairs,
    measures,
    sigma: float = 1.0,
    resolution: int = DEFAULT_RESOLUTION,
    grid: int = DEFAULT_GRID,
) -> np.ndarray:
    """Kendall tau between measures' rankings of the given layout pairs.

    Dissimilarity scores are negated before ranking so every column reads
    higher-is-more-similar. When maxiou-beta is requested, all pairs must be
    multiset-equal up front.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 layout pairs, got {len(pairs)}")
    resolved = [resolve_measure(m, sigma=sigma, resolution=resolution, grid=grid) for m in measures]
    needs_multisets = any(m.strip().lower().replace("_", "-") == "maxiou-beta" for m in measures)
    if needs_multisets:
        bad = [i for i, (a, b) in enumerate(pairs) if label_multiset(a) != label_multiset(b)]
        if bad:
            raise MultisetPrecheckFailedError(
                f"maxiou-beta requires multiset-equal pairs; offending pair indices: {bad}",
                indices=bad,
            )
    vectors = []
    for fn, higher_is_better in resolved:
        values = [fn(a, b).value for a, b in pairs]
        vectors.append(np.asarray(values) if higher_is_better else -np.asarray(values))
    count = len(vectors)
    taus = np.eye(count, dtype=np.float64)
    for i in range(count):
        for j in range(i + 1, count):
            taus[i, j] = taus[j, i] = kendall_tau(vectors[i], vectors[j])
    return taus
