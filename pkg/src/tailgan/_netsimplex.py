"""Exact network simplex for the dense transportation problem.

Bipartite graph: n1 source nodes, n2 sink nodes, one artificial root.
Real arc a < n1*n2 runs source a//n2 -> sink a%n2 (uncapacitated, cost
from the dense matrix); artificial arc n1*n2 + v ties node v to the
root and carries the initial feasible flow. Strong feasibility is kept
with the classic asymmetric leaving-arc rule (strict bound on the
source-side leg, non-strict on the target side), which prevents
degenerate cycling. Entering arcs come from a block search over the arc
list with a relative-epsilon admission test, so float costs terminate.

Tree state is parent/pred/forward arrays; after each pivot the cut
subtree is re-rooted at the entering arc and node potentials plus
depths are recomputed from the root in one O(nodes) pass (cheap next to
the entering-arc scans at these problem sizes).

Two paths: a loop kernel compiled by numba when available, and a
vectorized-numpy variant using Dantzig's rule (most negative reduced
cost). Both are exact; they may return different optimal plans when
the optimum is degenerate, never different objectives.

Status codes: 0 optimal, 1 iteration cap, 2 unbounded cycle (cannot
happen on balanced inputs), 3 artificial flow remains (infeasible).
"""

from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, jit

EPSILON = 2.220446049250313e-15  # float64 machine epsilon, pivot admission scale
STATE_TREE = 0
STATE_LOWER = 1


def _arc_cost(a, M, n2, n1, C, supply, art_cost):
    if a < M:
        return C[a // n2, a % n2]
    v = a - M
    if supply[v] >= 0.0:
        return 0.0
    return art_cost


_arc_cost = jit(_arc_cost)


def _arc_ends(a, M, n2, n1, root, supply):
    """(source, target) of arc a; artificial arcs orient by supply sign."""
    if a < M:
        return a // n2, n1 + a % n2
    v = a - M
    if supply[v] >= 0.0:
        return v, root
    return root, v


_arc_ends = jit(_arc_ends)


def _recompute_potentials(parent, pred, forward, pi, depth, head, nxt, stack,
                          M, n2, n1, root, C, supply, art_cost):
    """Rebuild pi and depth for the whole tree from the root."""
    N = root
    for v in range(N + 1):
        head[v] = -1
        nxt[v] = -1
    for v in range(N):
        p = parent[v]
        nxt[v] = head[p]
        head[p] = v
    pi[root] = 0.0
    depth[root] = 0
    top = 0
    stack[top] = root
    top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        c = head[u]
        while c != -1:
            w = _arc_cost(pred[c], M, n2, n1, C, supply, art_cost)
            if forward[c]:
                pi[c] = pi[u] - w  # arc c -> u has zero reduced cost
            else:
                pi[c] = pi[u] + w
            depth[c] = depth[u] + 1
            stack[top] = c
            top += 1
            c = nxt[c]


_recompute_potentials = jit(_recompute_potentials)


def _find_join(u, v, parent, depth):
    while u != v:
        du = depth[u]
        dv = depth[v]
        if du >= dv:
            u = parent[u]
        if dv >= du:
            v = parent[v]
    return u


_find_join = jit(_find_join)


def _find_leaving(join, src, tgt, parent, pred, forward, flow):
    """Bound the cycle push; returns (delta, u_out, side).

    side 1: bound on the source leg (cut component contains src);
    side 2: bound on the target leg. side 0 means unbounded.
    """
    inf = np.inf
    delta = inf
    u_out = -1
    side = 0
    u = src
    while u != join:
        if forward[u]:
            d = flow[pred[u]]
            if d < delta:
                delta = d
                u_out = u
                side = 1
        u = parent[u]
    u = tgt
    while u != join:
        if not forward[u]:
            d = flow[pred[u]]
            if d <= delta:
                delta = d
                u_out = u
                side = 2
        u = parent[u]
    return delta, u_out, side


_find_leaving = jit(_find_leaving)


def _apply_flow(join, in_arc, val, src, tgt, parent, pred, forward, flow):
    flow[in_arc] += val
    u = src
    while u != join:
        if forward[u]:
            flow[pred[u]] -= val
        else:
            flow[pred[u]] += val
        u = parent[u]
    u = tgt
    while u != join:
        if forward[u]:
            flow[pred[u]] += val
        else:
            flow[pred[u]] -= val
        u = parent[u]


_apply_flow = jit(_apply_flow)


def _reroot(u_in, v_in, u_out, in_arc, in_arc_src, parent, pred, forward):
    """Reverse the parent chain u_in .. u_out and hang it from v_in."""
    new_parent = v_in
    new_pred = in_arc
    new_fw = in_arc_src == u_in
    u = u_in
    while True:
        old_parent = parent[u]
        old_pred = pred[u]
        old_fw = forward[u]
        parent[u] = new_parent
        pred[u] = new_pred
        forward[u] = new_fw
        if u == u_out:
            break
        new_parent = u
        new_pred = old_pred
        new_fw = not old_fw
        u = old_parent


_reroot = jit(_reroot)


def _ns_loop_impl(C, supply, max_iters):
    """Block-search network simplex; numba-compilable loop form."""
    n1, n2 = C.shape
    N = n1 + n2
    root = N
    M = n1 * n2
    M_total = M + N

    cmax = 0.0
    for i in range(n1):
        for j in range(n2):
            a = abs(C[i, j])
            if a > cmax:
                cmax = a
    art_cost = (cmax + 1.0) * (N + 1.0)

    flow = np.zeros(M_total)
    state = np.empty(M_total, dtype=np.int8)
    for a in range(M):
        state[a] = STATE_LOWER
    parent = np.empty(N + 1, dtype=np.int64)
    pred = np.empty(N + 1, dtype=np.int64)
    forward = np.zeros(N + 1, dtype=np.bool_)
    pi = np.zeros(N + 1)
    depth = np.zeros(N + 1, dtype=np.int64)
    head = np.empty(N + 1, dtype=np.int64)
    nxt = np.empty(N + 1, dtype=np.int64)
    stack = np.empty(N + 1, dtype=np.int64)

    parent[root] = -1
    pred[root] = -1
    for v in range(N):
        parent[v] = root
        pred[v] = M + v
        state[M + v] = STATE_TREE
        depth[v] = 1
        s = supply[v]
        if s >= 0.0:
            forward[v] = True
            flow[M + v] = s
            pi[v] = 0.0
        else:
            forward[v] = False
            flow[M + v] = -s
            pi[v] = art_cost

    block_size = int(np.sqrt(M_total)) + 1
    if block_size < 10:
        block_size = 10

    next_arc = 0
    iters = 0
    while True:
        # Entering arc: block search for a sufficiently negative reduced cost.
        in_arc = -1
        min_val = 0.0
        best_scale = 1.0
        cnt = block_size
        a = next_arc
        found = False
        for _ in range(M_total):
            if state[a] == STATE_LOWER:
                cost_a = _arc_cost(a, M, n2, n1, C, supply, art_cost)
                sa, ta = _arc_ends(a, M, n2, n1, root, supply)
                r = cost_a + pi[sa] - pi[ta]
                if r < min_val:
                    min_val = r
                    in_arc = a
                    sc = abs(cost_a)
                    if abs(pi[sa]) > sc:
                        sc = abs(pi[sa])
                    if abs(pi[ta]) > sc:
                        sc = abs(pi[ta])
                    best_scale = sc
            cnt -= 1
            if cnt == 0:
                if in_arc >= 0 and min_val < -(EPSILON * best_scale):
                    found = True
                    break
                cnt = block_size
            a += 1
            if a == M_total:
                a = 0
        if not found and not (in_arc >= 0 and min_val < -(EPSILON * best_scale)):
            break  # optimal
        next_arc = in_arc + 1
        if next_arc == M_total:
            next_arc = 0

        iters += 1
        if iters > max_iters:
            return flow, pi, 1, iters

        src, tgt = _arc_ends(in_arc, M, n2, n1, root, supply)
        join = _find_join(src, tgt, parent, depth)
        delta, u_out, side = _find_leaving(join, src, tgt, parent, pred, forward, flow)
        if side == 0:
            return flow, pi, 2, iters
        if delta > 0.0:
            _apply_flow(join, in_arc, delta, src, tgt, parent, pred, forward, flow)

        leaving_arc = pred[u_out]
        if leaving_arc != in_arc:
            if side == 1:
                u_in, v_in = src, tgt
            else:
                u_in, v_in = tgt, src
            state[in_arc] = STATE_TREE
            state[leaving_arc] = STATE_LOWER
            _reroot(u_in, v_in, u_out, in_arc, src, parent, pred, forward)
            _recompute_potentials(
                parent, pred, forward, pi, depth, head, nxt, stack,
                M, n2, n1, root, C, supply, art_cost,
            )

    # Feasibility: artificial arcs must carry no mass.
    total = 0.0
    for v in range(N):
        s = supply[v]
        total += s if s > 0.0 else -s
    art_flow = 0.0
    for v in range(N):
        if flow[M + v] > art_flow:
            art_flow = flow[M + v]
    if art_flow > 1e-9 * (total + 1.0):
        return flow, pi, 3, iters
    return flow, pi, 0, iters


_ns_loop = jit(_ns_loop_impl)


def _ns_numpy(C, supply, max_iters):
    """Dantzig-rule variant: entering arc via vectorized argmin over all arcs."""
    n1, n2 = C.shape
    N = n1 + n2
    root = N
    M = n1 * n2

    art_cost = (np.abs(C).max() + 1.0) * (N + 1.0) if C.size else 1.0
    flow = np.zeros(M + N)
    state = np.full(M + N, STATE_LOWER, dtype=np.int8)
    parent = np.full(N + 1, root, dtype=np.int64)
    pred = np.arange(M, M + N + 1, dtype=np.int64)
    parent[root] = -1
    pred[root] = -1
    forward = supply >= 0.0
    forward = np.append(forward, False)
    pi = np.where(supply >= 0.0, 0.0, art_cost)
    pi = np.append(pi, 0.0)
    depth = np.ones(N + 1, dtype=np.int64)
    depth[root] = 0
    state[M:] = STATE_TREE
    flow[M:] = np.abs(supply)

    head = np.empty(N + 1, dtype=np.int64)
    nxt = np.empty(N + 1, dtype=np.int64)
    stack = np.empty(N + 1, dtype=np.int64)

    # Artificial arc reduced costs depend only on node potentials.
    art_rc = lambda: np.where(supply >= 0.0, pi[:N] - pi[root], art_cost + pi[root] - pi[:N])

    iters = 0
    while True:
        rc = C + pi[:n1, None] - pi[None, n1:N]
        rc_flat = np.where(state[:M] == STATE_LOWER, rc.ravel(), 0.0)
        ra = np.where(state[M:] == STATE_LOWER, art_rc(), 0.0)
        a_real = int(np.argmin(rc_flat))
        a_art = int(np.argmin(ra)) if N else -1
        if a_art >= 0 and ra[a_art] < rc_flat[a_real]:
            in_arc = M + a_art
            min_val = ra[a_art]
        else:
            in_arc = a_real
            min_val = rc_flat[a_real]
        cost_a = _arc_cost(in_arc, M, n2, n1, C, supply, art_cost)
        sa, ta = _arc_ends(in_arc, M, n2, n1, root, supply)
        scale = max(abs(cost_a), abs(pi[sa]), abs(pi[ta]))
        if not min_val < -(EPSILON * scale):
            break  # optimal

        iters += 1
        if iters > max_iters:
            return flow, pi, 1, iters

        src, tgt = sa, ta
        join = _find_join(src, tgt, parent, depth)
        delta, u_out, side = _find_leaving(join, src, tgt, parent, pred, forward, flow)
        if side == 0:
            return flow, pi, 2, iters
        if delta > 0.0:
            _apply_flow(join, in_arc, delta, src, tgt, parent, pred, forward, flow)

        leaving_arc = pred[u_out]
        if leaving_arc != in_arc:
            u_in, v_in = (src, tgt) if side == 1 else (tgt, src)
            state[in_arc] = STATE_TREE
            state[leaving_arc] = STATE_LOWER
            _reroot(u_in, v_in, u_out, in_arc, src, parent, pred, forward)
            _recompute_potentials(
                parent, pred, forward, pi, depth, head, nxt, stack,
                M, n2, n1, root, C, supply, art_cost,
            )

    total = np.abs(supply).sum()
    if flow[M:].max(initial=0.0) > 1e-9 * (total + 1.0):
        return flow, pi, 3, iters
    return flow, pi, 0, iters


def solve_transport(C, supply, max_iters):
    """Solve min <C, X> s.t. row sums / col sums given by ``supply``.

    supply holds the n1 source masses followed by the negated n2 sink
    masses. Returns (flow over all arcs, node potentials, status,
    iterations); the real-arc flows are the first n1*n2 entries in
    row-major order.
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    supply = np.ascontiguousarray(supply, dtype=np.float64)
    if HAS_NUMBA:
        return _ns_loop(C, supply, max_iters)
    return _ns_numpy(C, supply, max_iters)
