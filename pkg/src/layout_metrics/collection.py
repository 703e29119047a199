"""Collection-level comparison: grouped Max.IoU, the pairwise transport-EMD
engine, and the kernel MMD estimator.

The pairwise engine is an embarrassingly parallel map over index pairs with a
canonical reduction: the pair index space is split into fixed-size chunks,
each chunk is computed by a compiled GIL-free kernel, and results land in a
write-once buffer partitioned by chunk. Values are therefore bit-identical
regardless of worker count. Streaming mode never materializes the matrices:
each chunk's kernel values are reduced with exactly-rounded summation
(``math.fsum``) and chunk sums are combined in index order, which preserves
the same determinism contract.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _engine
from .assignment import max_weight_matching
from .errors import (
    DegenerateSigmaError,
    EmptyLayoutError,
    InvalidSigmaError,
    NoComparablePairsError,
    TooFewLayoutsError,
)
from .measures import maxiou_beta
from .model import LayoutCollection, multiset_key

#: Pairs per work unit. Fixed (never derived from the worker count) so that
#: chunk boundaries, and hence streaming sums, do not depend on parallelism.
CHUNK_PAIRS = 4096

WORKERS_ENV_VAR = "LAYOUT_METRICS_WORKERS"

_MATRIX_MAGIC = b"LTPM"
_MATRIX_VERSION = 1
_KIND_CODES = {"emd": 0, "similarity": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class PairwiseMatrix:
    """Dense pairwise values between two collections, with layout ids."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    values: np.ndarray
    kind: str  # "emd" or "similarity"

    def save(self, path, sigma: float | None = None) -> None:
        """Write the binary matrix plus a JSON sidecar (ids and sigma).

        Layout: magic "LTPM", u32 version, u64 rows, u64 cols, kind byte,
        then row-major little-endian float64. Bit-exact across platforms.
        """
        rows, cols = self.values.shape
        with open(path, "wb") as fh:
            fh.write(_MATRIX_MAGIC)
            fh.write(struct.pack("<IQQB", _MATRIX_VERSION, rows, cols, _KIND_CODES[self.kind]))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        sidecar = {"rows": list(self.row_ids), "cols": list(self.col_ids),
                   "kind": self.kind, "sigma": sigma}
        with open(f"{path}.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh)

    @classmethod
    def load(cls, path) -> "PairwiseMatrix":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MATRIX_MAGIC:
                raise ValueError(f"{path}: not a pairwise matrix file")
            version, rows, cols, kind_code = struct.unpack("<IQQB", fh.read(21))
            if version != _MATRIX_VERSION:
                raise ValueError(f"{path}: unsupported version {version}")
            values = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols)
        with open(f"{path}.json", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        return cls(tuple(sidecar["rows"]), tuple(sidecar["cols"]),
                   values.astype(np.float64), _KIND_NAMES[kind_code])


@dataclass(frozen=True)
class MmdReport:
    """Unbiased squared-MMD estimate between two collections.

    ``mmd2`` may be slightly negative: the estimator is unbiased and the
    identical-collection signature is a non-positive value, so it is never
    clamped.
    """

    mmd2: float
    sigma: float
    s: int
    t: int
    pair_count: int


@dataclass(frozen=True)
class MaxIouReport:
    """Grouped Max.IoU score with how much of the generated side it covered."""

    score: float
    matched: int
    coverage: float


def resolve_workers(workers: int | None) -> int:
    """Default worker count: LAYOUT_METRICS_WORKERS, else the logical cores."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV_VAR)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    return workers


def _check_layouts(collection: LayoutCollection) -> None:
    if len(collection) == 0:
        raise TooFewLayoutsError("collection has no layouts")
    for layout in collection.layouts:
        if len(layout.elements) == 0:
            raise EmptyLayoutError(f"layout {layout.id!r} has no elements")


def _run_chunks(packed_a, packed_b, rows, cols, out, workers: int) -> None:
    """Fill ``out`` with the EMD of each (row, col) pair, chunk by chunk."""
    boxes_a, cats_a, offs_a = packed_a
    boxes_b, cats_b, offs_b = packed_b
    total = rows.shape[0]
    spans = [(lo, min(lo + CHUNK_PAIRS, total)) for lo in range(0, total, CHUNK_PAIRS)]

    def run(span):
        lo, hi = span
        _engine.emd_chunk(boxes_a, cats_a, offs_a, boxes_b, cats_b, offs_b,
                          rows[lo:hi], cols[lo:hi], out[lo:hi])

    if workers == 1 or len(spans) == 1:
        for span in spans:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))


def pairwise_emd(a: LayoutCollection, b: LayoutCollection, workers: int | None = None) -> PairwiseMatrix:
    """Transport EMD for every layout pair between two collections.

    When ``a`` and ``b`` are the same object only the upper triangle is
    computed and mirrored. The result is bit-identical for any worker count.
    """
    workers = resolve_workers(workers)
    _check_layouts(a)
    _check_layouts(b)
    packed_a = _engine.pack_layouts(a.layouts)
    row_ids = tuple(l.id for l in a.layouts)
    if a is b:
        s = len(a)
        rows, cols = (idx.astype(np.int64) for idx in np.triu_indices(s))
        flat = np.empty(rows.shape[0], dtype=np.float64)
        _run_chunks(packed_a, packed_a, rows, cols, flat, workers)
        values = np.zeros((s, s), dtype=np.float64)
        values[rows, cols] = flat
        values[cols, rows] = flat
        return PairwiseMatrix(row_ids, row_ids, values, "emd")
    packed_b = _engine.pack_layouts(b.layouts)
    col_ids = tuple(l.id for l in b.layouts)
    s, t = len(a), len(b)
    rows = np.repeat(np.arange(s, dtype=np.int64), t)
    cols = np.tile(np.arange(t, dtype=np.int64), s)
    flat = np.empty(s * t, dtype=np.float64)
    _run_chunks(packed_a, packed_b, rows, cols, flat, workers)
    return PairwiseMatrix(row_ids, col_ids, flat.reshape(s, t), "emd")


def _lower_median(values: np.ndarray) -> float:
    """Median of a vector, taking the lower of the two middle elements for
    even counts; deterministic and free of summation-order effects."""
    ordered = np.sort(values)
    return float(ordered[(ordered.size - 1) // 2])


def _triangle_values(collection: LayoutCollection, workers: int) -> np.ndarray:
    """EMD over all unordered distinct pairs, as a flat vector in index order."""
    s = len(collection)
    packed = _engine.pack_layouts(collection.layouts)
    rows, cols = (idx.astype(np.int64) for idx in np.triu_indices(s, k=1))
    out = np.empty(rows.shape[0], dtype=np.float64)
    _run_chunks(packed, packed, rows, cols, out, workers)
    return out


def median_sigma(real: LayoutCollection, workers: int | None = None) -> float:
    """Kernel bandwidth heuristic: the (lower) median EMD over all unordered
    distinct pairs of real layouts."""
    workers = resolve_workers(workers)
    if len(real) < 2:
        raise TooFewLayoutsError(f"need at least 2 layouts for the median, got {len(real)}")
    _check_layouts(real)
    sigma = _lower_median(_triangle_values(real, workers))
    if sigma <= 0.0:
        raise DegenerateSigmaError("median pairwise EMD is zero; all layouts are identical")
    return sigma


def _resolve_sigma(sigma, real_triangle: np.ndarray) -> float:
    if isinstance(sigma, str):
        if sigma != "auto":
            raise InvalidSigmaError(f"sigma must be a positive number or 'auto', got {sigma!r}")
        value = _lower_median(real_triangle)
        if value <= 0.0:
            raise DegenerateSigmaError("median pairwise EMD is zero; all layouts are identical")
        return value
    if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not math.isfinite(sigma) or sigma <= 0:
        raise InvalidSigmaError(f"sigma must be a positive finite number, got {sigma!r}")
    return float(sigma)


def _chunked_kernel_sum(emd_values: np.ndarray, sigma: float) -> float:
    """Sum exp(-emd/sigma) with per-chunk exact summation in index order."""
    chunk_sums = [
        math.fsum(np.exp(-emd_values[lo:lo + CHUNK_PAIRS] / sigma))
        for lo in range(0, emd_values.size, CHUNK_PAIRS)
    ]
    return math.fsum(chunk_sums)


def _streamed_kernel_sum(x: LayoutCollection, y: LayoutCollection | None,
                         sigma: float, workers: int) -> float:
    """Kernel block sum without materializing a matrix.

    With ``y`` None, sums over the strict upper triangle of ``x`` (i < j);
    otherwise over the full cross grid. Chunk indices are generated
    arithmetically so memory stays proportional to the chunk size.
    """
    packed_x = _engine.pack_layouts(x.layouts)
    if y is None:
        s = len(x)
        total = s * (s - 1) // 2
        packed_y = packed_x
        # first flat index of each triangle row, for exact integer decoding
        row_starts = np.zeros(s, dtype=np.int64)
        np.cumsum(np.arange(s - 1, 0, -1, dtype=np.int64), out=row_starts[1:])

        def decode(flat: np.ndarray):
            # flat index k over pairs i<j in row-major triangle order
            i = np.searchsorted(row_starts, flat, side="right") - 1
            j = flat - row_starts[i] + i + 1
            return i.astype(np.int64), j.astype(np.int64)
    else:
        t = len(y)
        total = len(x) * t
        packed_y = _engine.pack_layouts(y.layouts)

        def decode(flat: np.ndarray):
            return (flat // t).astype(np.int64), (flat % t).astype(np.int64)

    spans = [(lo, min(lo + CHUNK_PAIRS, total)) for lo in range(0, total, CHUNK_PAIRS)]

    def run(span):
        lo, hi = span
        rows, cols = decode(np.arange(lo, hi, dtype=np.int64))
        out = np.empty(hi - lo, dtype=np.float64)
        _engine.emd_chunk(*packed_x, *packed_y, rows, cols, out)
        return math.fsum(np.exp(-out / sigma))

    if workers == 1 or len(spans) == 1:
        chunk_sums = [run(span) for span in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunk_sums = list(pool.map(run, spans))
    return math.fsum(chunk_sums)


def ltsim_mmd(
    real: LayoutCollection,
    gen: LayoutCollection,
    sigma="auto",
    workers: int | None = None,
    streaming: bool = False,
    matrices: dict | None = None,
) -> MmdReport:
    """Unbiased squared-MMD estimate under the transport-similarity kernel.

    The kernel is exp(-EMD/sigma); ``sigma="auto"`` resolves to the median
    EMD over real layout pairs (always the real side, so auto mode is
    asymmetric by design). Streaming mode accumulates the three block sums
    without storing matrices. When ``matrices`` is a dict (dense mode only)
    the three EMD blocks are stored into it under ``real_real``, ``gen_gen``
    and ``real_gen``.
    """
    workers = resolve_workers(workers)
    s, t = len(real), len(gen)
    if s < 2 or t < 2:
        raise TooFewLayoutsError(f"MMD needs at least 2 layouts per side, got {s} and {t}")
    _check_layouts(real)
    _check_layouts(gen)
    pair_count = s * (s - 1) // 2 + t * (t - 1) // 2 + s * t

    if streaming:
        if matrices is not None:
            raise ValueError("matrices capture requires dense mode")
        real_triangle = _triangle_values(real, workers)
        sigma = _resolve_sigma(sigma, real_triangle)
        sum_rr = _chunked_kernel_sum(real_triangle, sigma)
        sum_gg = _streamed_kernel_sum(gen, None, sigma, workers)
        sum_cross = _streamed_kernel_sum(real, gen, sigma, workers)
        mmd2 = (2.0 * sum_rr / (s * (s - 1))
                + 2.0 * sum_gg / (t * (t - 1))
                - 2.0 * sum_cross / (s * t))
        return MmdReport(mmd2, sigma, s, t, pair_count)

    emd_rr = pairwise_emd(real, real, workers)
    sigma = _resolve_sigma(sigma, emd_rr.values[np.triu_indices(s, k=1)])
    emd_gg = pairwise_emd(gen, gen, workers)
    emd_cross = pairwise_emd(real, gen, workers)
    if matrices is not None:
        matrices["real_real"] = emd_rr
        matrices["gen_gen"] = emd_gg
        matrices["real_gen"] = emd_cross
    k_rr = np.exp(-emd_rr.values / sigma)
    k_gg = np.exp(-emd_gg.values / sigma)
    k_cross = np.exp(-emd_cross.values / sigma)
    term_rr = (float(k_rr.sum()) - float(np.trace(k_rr))) / (s * (s - 1))
    term_gg = (float(k_gg.sum()) - float(np.trace(k_gg))) / (t * (t - 1))
    term_cross = 2.0 * float(k_cross.sum()) / (s * t)
    return MmdReport(term_rr + term_gg - term_cross, sigma, s, t, pair_count)


def maxiou_collection(real: LayoutCollection, gen: LayoutCollection) -> MaxIouReport:
    """Grouped Max.IoU between collections.

    Layouts are grouped by label multiset on both sides; within each shared
    group, real and generated layouts are paired by maximum-weight matching
    on their pairwise maxiou-beta scores. Generated layouts whose multiset
    never occurs on the real side are simply not evaluated, which the
    coverage field makes visible.
    """
    _check_layouts(real)
    _check_layouts(gen)
    groups_real: dict = {}
    for layout in real.layouts:
        groups_real.setdefault(multiset_key(layout), []).append(layout)
    groups_gen: dict = {}
    for layout in gen.layouts:
        groups_gen.setdefault(multiset_key(layout), []).append(layout)
    shared = sorted(set(groups_real) & set(groups_gen))
    if not shared:
        raise NoComparablePairsError("no label multiset is shared between the collections")
    total = 0.0
    matched = 0
    for key in shared:
        reals = groups_real[key]
        gens = groups_gen[key]
        weights = np.array(
            [[maxiou_beta(lr, lg).value for lg in gens] for lr in reals], dtype=np.float64
        )
        matching = max_weight_matching(weights)
        total += matching.total_weight
        matched += matching.cardinality
    return MaxIouReport(total / matched, matched, matched / len(gen))
