"""Exact combinatorial solvers: rectangular maximum-weight bipartite matching
and the uniform-marginal transportation problem.

Matching semantics: among matchings of maximum possible cardinality restricted
to unforbidden entries, return one of maximum total weight, tie-broken to the
lexicographically smallest pair list so output is reproducible across runs and
platforms. Cardinality maximization is encoded as a large per-edge bonus on
top of ``scipy.optimize.linear_sum_assignment``; the bonus dominates any
weight rearrangement, so the solve stays exact.

The transport solver delegates to the compiled successive-shortest-path kernel
(:mod:`._engine`); plans are integral vertices scaled back to mass 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _engine
from .errors import DimensionMismatchError, InfeasibleError


@dataclass(frozen=True)
class Matching:
    """A one-to-one pairing of rows to columns with its total weight."""

    pairs: tuple[tuple[int, int], ...]
    total_weight: float

    @property
    def cardinality(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class TransportPlan:
    """Soft alignment gamma with uniform marginals 1/m (rows) and 1/n (cols)."""

    gamma: np.ndarray

    def marginal_error(self) -> float:
        """Largest deviation of a row/column sum from its required marginal."""
        m, n = self.gamma.shape
        row_err = np.abs(self.gamma.sum(axis=1) - 1.0 / m).max()
        col_err = np.abs(self.gamma.sum(axis=0) - 1.0 / n).max()
        mass_err = abs(self.gamma.sum() - 1.0)
        return float(max(row_err, col_err, mass_err))


def _validated_weights(weights, forbidden):
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError(f"weight matrix must be 2-D and non-empty, got shape {w.shape}")
    if forbidden is None:
        allowed = np.ones(w.shape, dtype=bool)
    else:
        allowed = ~np.asarray(forbidden, dtype=bool)
        if allowed.shape != w.shape:
            raise DimensionMismatchError(
                f"forbidden mask shape {allowed.shape} != weights shape {w.shape}"
            )
    if not np.isfinite(w[allowed]).all():
        raise ValueError("unmasked weights must be finite")
    return w, allowed


def _row_ordered_total(w, pairs):
    """Sum pair weights left-to-right in row order; keeps equality checks
    between solves of the same weight multiset exact."""
    total = 0.0
    for i, j in pairs:
        total += w[i, j]
    return total


def _solve_restricted(w, allowed):
    """(cardinality, total, row-sorted pairs) of an optimal restricted matching."""
    if not allowed.any():
        return 0, 0.0, []
    m, n = w.shape
    bonus = (2.0 * min(m, n) + 1.0) * max(1.0, float(np.abs(w[allowed]).max())) + 1.0
    shifted = np.where(allowed, w + bonus, 0.0)
    rows, cols = linear_sum_assignment(shifted, maximize=True)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if allowed[i, j]]
    pairs.sort()
    return len(pairs), _row_ordered_total(w, pairs), pairs


def max_weight_matching(weights, forbidden=None, require_cardinality=None) -> Matching:
    """Maximum-cardinality, maximum-weight matching over unforbidden entries.

    ``forbidden`` is an optional boolean mask of excluded entries. Weights may
    be negative; cardinality still takes precedence. When ``require_cardinality``
    is given and the mask admits no matching that large, raises
    :class:`InfeasibleError`.
    """
    w, allowed = _validated_weights(weights, forbidden)
    m, n = w.shape
    best_card, best_total, _ = _solve_restricted(w, allowed)
    if require_cardinality is not None and best_card < require_cardinality:
        raise InfeasibleError(
            f"no matching of cardinality {require_cardinality} exists "
            f"(maximum is {best_card})"
        )

    # Lexicographic refinement: fix pairs row by row, keeping (cardinality,
    # total) optimal at every step. Totals are always re-summed in row order
    # over the full combined pair list, so a completion that matches the
    # optimal weight multiset compares exactly equal to best_total.
    fixed: list[tuple[int, int]] = []
    free_cols = list(range(n))

    def completion(first_row, cols):
        """Optimal completion over rows >= first_row and the given columns,
        mapped back to original indices."""
        rows = list(range(first_row, m))
        if not rows or not cols:
            return []
        _, _, sub_pairs = _solve_restricted(w[np.ix_(rows, cols)], allowed[np.ix_(rows, cols)])
        return [(rows[a], cols[b]) for a, b in sub_pairs]

    def achieves_optimum(pairs):
        return len(pairs) == best_card and _row_ordered_total(w, pairs) == best_total

    for i in range(m):
        placed = False
        for j in free_cols:
            if not allowed[i, j]:
                continue
            cand = fixed + [(i, j)]
            if achieves_optimum(cand + completion(i + 1, [c for c in free_cols if c != j])):
                fixed.append((i, j))
                free_cols.remove(j)
                placed = True
                break
        if placed:
            continue
        if achieves_optimum(fixed + completion(i + 1, free_cols)):
            continue  # row i is unmatched in the lexicographically best optimum
        # float-summation corner between distinct equal-total optima: keep the
        # solver's own optimal completion (including row i) and stop refining.
        fixed.extend(completion(i, free_cols))
        break
    return Matching(tuple(fixed), _row_ordered_total(w, fixed))


def solve_transport(cost) -> TransportPlan:
    """Exactly optimal transport plan for uniform marginals.

    Marginals are scaled by m*n to integers, the integral min-cost flow is
    solved exactly, and flows are scaled back; the objective value is optimal,
    not approximate. Costs must be finite and non-negative.
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
        raise ValueError(f"cost matrix must be 2-D and non-empty, got shape {c.shape}")
    if not np.isfinite(c).all() or (c < 0).any():
        raise ValueError("cost entries must be finite and non-negative")
    m, n = c.shape
    flows = _engine.transport_flows(c)
    return TransportPlan(gamma=flows / float(m * n))


def transport_objective(cost, plan: TransportPlan) -> float:
    """Total transport cost of a plan: sum of gamma * cost."""
    c = np.asarray(cost, dtype=np.float64)
    if c.shape != plan.gamma.shape:
        raise DimensionMismatchError(
            f"cost shape {c.shape} != plan shape {plan.gamma.shape}"
        )
    return float(np.sum(plan.gamma * c))
