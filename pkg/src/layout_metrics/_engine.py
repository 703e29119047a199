"""Compiled kernels for the transport solver and the pairwise engine.

The transportation problem is solved exactly: marginals are scaled to
integers (each of the m sources supplies n units, each of the n sinks demands
m units) and routed by a primal-dual method, shortest augmenting paths with
node potentials plus blocking-flow pushes along tied shortest paths. Flow
amounts stay integral, so the returned flows are an exact vertex of the
scaled transportation polytope; only the cost arithmetic is floating point.

All kernels release the GIL so the pairwise engine can scale across threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF = np.inf


@njit(cache=True, nogil=True)
def transport_flows(cost):
    """Exact integer flows for the uniform-marginal transportation problem.

    ``cost`` is an (m, n) float64 matrix with finite non-negative entries.
    Returns an (m, n) int64 matrix whose rows sum to n and columns to m;
    dividing by m*n yields the optimal transport plan.

    Primal-dual phases: one multi-source Dijkstra over the residual graph
    with reduced costs settles every sink that still has demand, then a
    depth-first blocking flow pushes along shortest-path arcs until no
    augmenting path remains, and node potentials are updated once. Arcs
    qualify for the push step only when recomputing the exact relaxation
    expression reproduces the settled distance bit-for-bit, so no float
    tolerance ever decides optimality: parent arcs always qualify (they set
    the distance through the same operations), genuinely tied arcs are
    discovered, and near-ties are deferred to a later phase. Lattice-like
    cost matrices with massive ties, where one augmentation per Dijkstra
    degenerates, are the reason for the blocking-flow step.
    """
    m, n = cost.shape
    flows = np.zeros((m, n), dtype=np.int64)
    residual_supply = np.full(m, n, dtype=np.int64)
    residual_demand = np.full(n, m, dtype=np.int64)
    pot_src = np.zeros(m, dtype=np.float64)
    # column-minima start: initial reduced costs stay non-negative and the
    # cheapest arc into every sink is tight from the first phase
    pot_snk = np.empty(n, dtype=np.float64)
    for j in range(n):
        best = cost[0, j]
        for i in range(1, m):
            if cost[i, j] < best:
                best = cost[i, j]
        pot_snk[j] = best
    remaining = m * n

    dist_src = np.empty(m, dtype=np.float64)
    dist_snk = np.empty(n, dtype=np.float64)
    done_src = np.empty(m, dtype=np.bool_)
    done_snk = np.empty(n, dtype=np.bool_)
    par_src = np.empty(m, dtype=np.int64)
    par_snk = np.empty(n, dtype=np.int64)

    # blocking-flow state: current-arc pointers, dead marks, alternating
    # source/sink path stack
    cur_fwd = np.empty(m, dtype=np.int64)
    cur_bwd = np.empty(n, dtype=np.int64)
    dead_src = np.empty(m, dtype=np.bool_)
    dead_snk = np.empty(n, dtype=np.bool_)
    on_src = np.empty(m, dtype=np.bool_)
    on_snk = np.empty(n, dtype=np.bool_)
    path_src = np.empty(min(m, n) + 1, dtype=np.int64)
    path_snk = np.empty(min(m, n) + 1, dtype=np.int64)

    while remaining > 0:
        demanded = 0
        for i in range(m):
            dist_src[i] = 0.0 if residual_supply[i] > 0 else _INF
            done_src[i] = False
            par_src[i] = -1
        for j in range(n):
            dist_snk[j] = _INF
            done_snk[j] = False
            par_snk[j] = -1
            if residual_demand[j] > 0:
                demanded += 1

        # Dijkstra from all sources with remaining supply until every sink
        # that still has demand is settled
        n_targets = 0
        first_target = -1
        last_dist = 0.0
        while True:
            best = _INF
            best_is_src = True
            best_idx = -1
            for i in range(m):
                if not done_src[i] and dist_src[i] < best:
                    best = dist_src[i]
                    best_is_src = True
                    best_idx = i
            for j in range(n):
                if not done_snk[j] and dist_snk[j] < best:
                    best = dist_snk[j]
                    best_is_src = False
                    best_idx = j
            if best_idx < 0:
                break
            if best_is_src:
                i = best_idx
                done_src[i] = True
                di = dist_src[i]
                for j in range(n):
                    if not done_snk[j]:
                        # reduced cost; clamp rounding residue at zero
                        rc = cost[i, j] + pot_src[i] - pot_snk[j]
                        if rc < 0.0:
                            rc = 0.0
                        nd = di + rc
                        if nd < dist_snk[j]:
                            dist_snk[j] = nd
                            par_snk[j] = i
            else:
                j = best_idx
                done_snk[j] = True
                if residual_demand[j] > 0:
                    if n_targets == 0:
                        first_target = j
                    n_targets += 1
                    last_dist = dist_snk[j]
                    if n_targets == demanded:
                        break
                dj = dist_snk[j]
                for i in range(m):
                    if not done_src[i] and flows[i, j] > 0:
                        rc = -cost[i, j] + pot_snk[j] - pot_src[i]
                        if rc < 0.0:
                            rc = 0.0
                        nd = dj + rc
                        if nd < dist_src[i]:
                            dist_src[i] = nd
                            par_src[i] = j

        phase_radius = last_dist

        # blocking flow over bit-exact tight arcs between settled nodes
        for i in range(m):
            cur_fwd[i] = 0
            dead_src[i] = not done_src[i]
            on_src[i] = False
        for j in range(n):
            cur_bwd[j] = 0
            dead_snk[j] = not done_snk[j]
            on_snk[j] = False

        pushed_any = False
        for root in range(m):
            if residual_supply[root] <= 0:
                continue
            while residual_supply[root] > 0 and not dead_src[root]:
                # depth-first search for an augmenting path of tight arcs
                depth = 0
                path_src[0] = root
                on_src[root] = True
                target = -1
                while depth >= 0:
                    i = path_src[depth]
                    # scan forward arcs i -> j
                    j = cur_fwd[i]
                    descended = False
                    while j < n:
                        if not dead_snk[j] and not on_snk[j]:
                            rc = cost[i, j] + pot_src[i] - pot_snk[j]
                            if rc < 0.0:
                                rc = 0.0
                            if dist_src[i] + rc == dist_snk[j]:
                                if residual_demand[j] > 0:
                                    target = j
                                    break
                                # descend into j's backward scan
                                k = cur_bwd[j]
                                found = -1
                                while k < m:
                                    if (flows[k, j] > 0 and not dead_src[k]
                                            and not on_src[k]):
                                        rcb = -cost[k, j] + pot_snk[j] - pot_src[k]
                                        if rcb < 0.0:
                                            rcb = 0.0
                                        if dist_snk[j] + rcb == dist_src[k]:
                                            found = k
                                            break
                                    k += 1
                                cur_bwd[j] = k
                                if found >= 0:
                                    path_snk[depth] = j
                                    on_snk[j] = True
                                    depth += 1
                                    path_src[depth] = found
                                    on_src[found] = True
                                    descended = True
                                    break
                                dead_snk[j] = True
                        j += 1
                    cur_fwd[i] = j
                    if target >= 0 or descended:
                        if target >= 0:
                            break
                        continue
                    # dead end at source i: backtrack
                    dead_src[i] = True
                    on_src[i] = False
                    depth -= 1
                    if depth >= 0:
                        jp = path_snk[depth]
                        on_snk[jp] = False
                        cur_bwd[jp] += 1  # past the dead source
                        # resume the parent's forward scan at the same sink
                        # (it may still have other backward arcs)
                        cur_fwd[path_src[depth]] = jp
                if target < 0:
                    break  # root is dead
                # bottleneck over the path:
                # root supply, backward arcs, target demand
                delta = residual_supply[root]
                if residual_demand[target] < delta:
                    delta = residual_demand[target]
                for d in range(depth):
                    f = flows[path_src[d + 1], path_snk[d]]
                    if f < delta:
                        delta = f
                # apply: forward arcs gain, backward arcs lose
                for d in range(depth):
                    flows[path_src[d], path_snk[d]] += delta
                    flows[path_src[d + 1], path_snk[d]] -= delta
                flows[path_src[depth], target] += delta
                residual_supply[root] -= delta
                residual_demand[target] -= delta
                remaining -= delta
                pushed_any = True
                # unwind stack flags; current-arc pointers stay, so the same
                # path is retried first while it has capacity
                for d in range(depth + 1):
                    on_src[path_src[d]] = False
                    if d < depth:
                        on_snk[path_snk[d]] = False

        if not pushed_any:
            target = first_target
            delta = residual_demand[target]
            j = target
            while True:
                i = par_snk[j]
                if par_src[i] < 0:
                    if residual_supply[i] < delta:
                        delta = residual_supply[i]
                    break
                j_prev = par_src[i]
                if flows[i, j_prev] < delta:
                    delta = flows[i, j_prev]
                j = j_prev
            j = target
            while True:
                i = par_snk[j]
                flows[i, j] += delta
                if par_src[i] < 0:
                    residual_supply[i] -= delta
                    break
                j_prev = par_src[i]
                flows[i, j_prev] -= delta
                j = j_prev
            residual_demand[target] -= delta
            remaining -= delta

        # standard potential update: pi_v += min(dist_v, phase radius)
        for i in range(m):
            d = dist_src[i]
            if d > phase_radius:
                d = phase_radius
            pot_src[i] += d
        for j in range(n):
            d = dist_snk[j]
            if d > phase_radius:
                d = phase_radius
            pot_snk[j] += d
    return flows


@njit(cache=True, nogil=True)
def objective_from_flows(cost, flows):
    """Plan cost, summed in row-major order for reproducibility."""
    m, n = cost.shape
    scale = float(m * n)
    total = 0.0
    for i in range(m):
        for j in range(n):
            if flows[i, j] > 0:
                total += (flows[i, j] / scale) * cost[i, j]
    return total


@njit(cache=True, nogil=True, inline="always")
def _element_cost(l1, t1, w1, h1, c1, l2, t2, w2, h2, c2):
    r1 = l1 + w1
    b1 = t1 + h1
    r2 = l2 + w2
    b2 = t2 + h2
    # areas from corner differences keep identity pairs exact (GIoU == 1)
    a1 = (r1 - l1) * (b1 - t1)
    a2 = (r2 - l2) * (b2 - t2)
    iw = min(r1, r2) - max(l1, l2)
    ih = min(b1, b2) - max(t1, t2)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a1 + a2 - inter
    ew = max(r1, r2) - min(l1, l2)
    eh = max(b1, b2) - min(t1, t2)
    enclosing = ew * eh
    if enclosing <= 0.0:
        giou = 0.0
    else:
        iou = inter / union if union > 0.0 else 0.0
        giou = iou - (enclosing - union) / enclosing
    d_bbox = (1.0 + giou) / 2.0
    d_label = 1.0 if c1 == c2 else 0.0
    return 1.0 - (d_bbox + d_label) / 2.0


@njit(cache=True, nogil=True)
def transport_cost_matrix(boxes_a, cats_a, boxes_b, cats_b):
    """Element-pair transport costs: 1 - (positional + label similarity)/2."""
    m = boxes_a.shape[0]
    n = boxes_b.shape[0]
    cost = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            cost[i, j] = _element_cost(
                boxes_a[i, 0], boxes_a[i, 1], boxes_a[i, 2], boxes_a[i, 3], cats_a[i],
                boxes_b[j, 0], boxes_b[j, 1], boxes_b[j, 2], boxes_b[j, 3], cats_b[j],
            )
    return cost


@njit(cache=True, nogil=True)
def pair_emd(boxes_a, cats_a, boxes_b, cats_b):
    """Exact transport dissimilarity between two packed layouts."""
    cost = transport_cost_matrix(boxes_a, cats_a, boxes_b, cats_b)
    flows = transport_flows(cost)
    return objective_from_flows(cost, flows)


@njit(cache=True, nogil=True)
def emd_chunk(boxes_a, cats_a, offsets_a, boxes_b, cats_b, offsets_b, rows, cols, out):
    """EMD for a chunk of (row, col) layout index pairs, written into ``out``."""
    for p in range(rows.shape[0]):
        i = rows[p]
        j = cols[p]
        out[p] = pair_emd(
            boxes_a[offsets_a[i]:offsets_a[i + 1]],
            cats_a[offsets_a[i]:offsets_a[i + 1]],
            boxes_b[offsets_b[j]:offsets_b[j + 1]],
            cats_b[offsets_b[j]:offsets_b[j + 1]],
        )


def pack_layouts(layouts):
    """Flatten layouts into (boxes, categories, offsets) arrays for the kernels."""
    total = sum(len(l.elements) for l in layouts)
    boxes = np.empty((total, 4), dtype=np.float64)
    cats = np.empty(total, dtype=np.int64)
    offsets = np.empty(len(layouts) + 1, dtype=np.int64)
    pos = 0
    for k, layout in enumerate(layouts):
        offsets[k] = pos
        for e in layout.elements:
            boxes[pos, 0] = e.bbox.left
            boxes[pos, 1] = e.bbox.top
            boxes[pos, 2] = e.bbox.width
            boxes[pos, 3] = e.bbox.height
            cats[pos] = e.category
            pos += 1
    offsets[len(layouts)] = pos
    return boxes, cats, offsets


def warm_up():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    boxes = np.array([[0.1, 0.1, 0.2, 0.2], [0.5, 0.5, 0.3, 0.3]], dtype=np.float64)
    cats = np.array([0, 1], dtype=np.int64)
    offsets = np.array([0, 1, 2], dtype=np.int64)
    out = np.empty(1, dtype=np.float64)
    emd_chunk(boxes, cats, offsets, boxes, cats, offsets,
              np.array([0], dtype=np.int64), np.array([1], dtype=np.int64), out)
    cost = np.array([[0.0, 1.0], [1.0, 0.5]], dtype=np.float64)
    objective_from_flows(cost, transport_flows(cost))
