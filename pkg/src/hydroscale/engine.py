"""Event-driven kernels for the lattice-gas simulators.

Everything here operates on flat arrays so the hot loops can be jitted by
numba; without numba the same functions run as plain Python.  The thinning
scheme is exact in law:

  * a global exponential clock rings at rate  h_sup * W_trunc * sum_x w(x),
    where w(x) = g(eta(x)) for the single process and
    w(x) = max(g(eta(x)), g(xi(x))) for the coupled pair;
  * the origin site is drawn proportionally to w(x) through a Fenwick tree;
  * the displacement is drawn from the truncated kernel via alias tables;
  * the proposal is accepted with probability (actual rate) / (bound rate).

Rejected proposals still advance time (thinning semantics).

Status codes returned by the loops: 0 = reached the target time,
1 = proposal budget exhausted, 2 = frozen (total weight zero; time jumps to
the target), 3 = sitewise-order violation while order checking was on,
4 = occupancy ceiling breached.
"""

import math

import numpy as np

try:
    from numba import njit as _njit

    def _jit(f):
        return _njit(cache=True)(f)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    def _jit(f):
        return f

    HAVE_NUMBA = False

STATUS_DONE = 0
STATUS_BUDGET = 1
STATUS_FROZEN = 2
STATUS_UNORDERED = 3
STATUS_CEILING = 4

# Incrementally tracked float totals are refreshed from the tree this often;
# for integer-valued g tables the incremental accumulation is already exact.
REFRESH_EVERY = 1 << 17


# ----------------------------------------------------------------- Fenwick

@_jit
def fenwick_build(values):
    n = values.size
    tree = np.zeros(n + 1, dtype=np.float64)
    for i in range(1, n + 1):
        tree[i] += values[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]
    return tree


@_jit
def fenwick_add(tree, idx, delta):
    i = idx + 1
    n = tree.size - 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@_jit
def fenwick_total(tree):
    n = tree.size - 1
    total = 0.0
    i = n
    while i > 0:
        total += tree[i]
        i -= i & (-i)
    return total


@_jit
def fenwick_find(tree, target):
    """Largest prefix with cumulative weight <= target; returns its 0-based
    successor, i.e. the site selected by the weighted draw."""
    n = tree.size - 1
    bit = 1
    while (bit << 1) <= n:
        bit <<= 1
    idx = 0
    while bit > 0:
        nxt = idx + bit
        if nxt <= n and tree[nxt] <= target:
            target -= tree[nxt]
            idx = nxt
        bit >>= 1
    if idx >= n:  # float dust at the right edge
        idx = n - 1
    return idx


# -------------------------------------------------------------- rate lookup

@_jit
def g_of(k, g_table, g_slope):
    last = g_table.size - 1
    if k <= last:
        return g_table[k]
    return g_table[last] + g_slope * (k - last)


@_jit
def h_of(k, h_table):
    last = h_table.size - 1
    if k <= last:
        return h_table[k]
    return h_table[last]


# ---------------------------------------------------------------- geometry

@_jit
def apply_disp(site, disp, strides, side, dim, no_wrap):
    """Destination flat index on the torus; -1 when no_wrap rejects."""
    out = 0
    for i in range(dim):
        c = (site // strides[i]) % side
        nc = c + disp[i]
        if no_wrap and (nc < 0 or nc >= side):
            return -1
        nc = nc % side
        out += nc * strides[i]
    return out


@_jit
def _alias_draw(alias_prob, alias_idx, rng):
    k = alias_prob.size
    u = rng.random()
    j = int(u * k)
    if j >= k:
        j = k - 1
    if u * k - j >= alias_prob[j]:
        j = alias_idx[j]
    return j


# ----------------------------------------------------- single-process loops

@_jit
def _propose_single(occ, tree, total, g_table, g_slope, h_table, h_sup,
                    disp, alias_prob, alias_idx, strides, side, dim,
                    no_wrap, rng):
    """Draw one proposal; returns (x, j, dest, accepted)."""
    x = fenwick_find(tree, rng.random() * total)
    j = _alias_draw(alias_prob, alias_idx, rng)
    dest = apply_disp(x, disp[j], strides, side, dim, no_wrap)
    if dest < 0:
        return x, j, dest, False
    if g_of(occ[x], g_table, g_slope) <= 0.0:  # float dust in the tree
        return x, j, dest, False
    accepted = rng.random() * h_sup < h_of(occ[dest], h_table)
    return x, j, dest, accepted


@_jit
def _apply_single(occ, tree, x, dest, g_table, g_slope):
    """Move one particle x -> dest; returns the total-weight delta."""
    gx = g_of(occ[x], g_table, g_slope)
    gd = g_of(occ[dest], g_table, g_slope)
    occ[x] -= 1
    occ[dest] += 1
    dx = g_of(occ[x], g_table, g_slope) - gx
    dd = g_of(occ[dest], g_table, g_slope) - gd
    fenwick_add(tree, x, dx)
    fenwick_add(tree, dest, dd)
    return dx + dd


@_jit
def run_events(occ, tree, micro_time, t_target,
               g_table, g_slope, h_table, h_sup, m0,
               disp, alias_prob, alias_idx, strides, side, dim,
               w_trunc, no_wrap, max_proposals, rng, counters):
    """Advance the configuration to micro time t_target.

    counters : int64[2], accumulates (proposals, accepted) across calls.
    m0       : occupancy ceiling, -1 when there is none.
    Returns (status, micro_time).
    """
    total = fenwick_total(tree)
    since_refresh = 0
    while True:
        if total <= 0.0:
            return STATUS_FROZEN, t_target
        lam = h_sup * w_trunc * total
        wait = -math.log(1.0 - rng.random()) / lam
        if micro_time + wait > t_target:
            return STATUS_DONE, t_target
        if counters[0] >= max_proposals:
            return STATUS_BUDGET, micro_time
        micro_time += wait
        counters[0] += 1
        x, j, dest, ok = _propose_single(
            occ, tree, total, g_table, g_slope, h_table, h_sup,
            disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
        if ok:
            counters[1] += 1
            total += _apply_single(occ, tree, x, dest, g_table, g_slope)
            if m0 >= 0 and occ[dest] > m0:
                return STATUS_CEILING, micro_time
            since_refresh += 1
            if since_refresh >= REFRESH_EVERY:
                total = fenwick_total(tree)
                since_refresh = 0


@_jit
def one_proposal(occ, tree, micro_time,
                 g_table, g_slope, h_table, h_sup, m0,
                 disp, alias_prob, alias_idx, strides, side, dim,
                 w_trunc, no_wrap, rng, counters):
    """One thinning proposal (the spec-level `step`).

    Returns (status, micro_time, x, j, accepted).  On a frozen
    configuration, time becomes +inf and no proposal is consumed.
    """
    total = fenwick_total(tree)
    if total <= 0.0:
        return STATUS_FROZEN, math.inf, -1, -1, False
    lam = h_sup * w_trunc * total
    micro_time += -math.log(1.0 - rng.random()) / lam
    counters[0] += 1
    x, j, dest, ok = _propose_single(
        occ, tree, total, g_table, g_slope, h_table, h_sup,
        disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
    status = STATUS_DONE
    if ok:
        counters[1] += 1
        _apply_single(occ, tree, x, dest, g_table, g_slope)
        if m0 >= 0 and occ[dest] > m0:
            status = STATUS_CEILING
    return status, micro_time, x, j, ok


@_jit
def count_conditional_events(occ, tree, n_events,
                             g_table, g_slope, h_table, h_sup,
                             disp, alias_prob, alias_idx, strides, side, dim,
                             no_wrap, max_proposals, rng, counts):
    """Frequencies of accepted (site, displacement) pairs from a FIXED
    configuration: the proposal machinery runs but moves are not applied,
    so every draw sees the same state.  counts is int64[L * K]."""
    total = fenwick_total(tree)
    k = alias_prob.size
    done = 0
    proposals = 0
    while done < n_events:
        proposals += 1
        if proposals > max_proposals:
            return STATUS_BUDGET
        x, j, dest, ok = _propose_single(
            occ, tree, total, g_table, g_slope, h_table, h_sup,
            disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
        if ok:
            counts[x * k + j] += 1
            done += 1
    return STATUS_DONE


# ----------------------------------------------------------- coupled loops

@_jit
def _propose_coupled(eta, xi, tree, total, g_table, g_slope, h_table, h_sup,
                     disp, alias_prob, alias_idx, strides, side, dim,
                     no_wrap, rng):
    """One coupled proposal.  Returns (x, j, dest, branch) with branch
    0 = both marginals move, 1 = eta only, 2 = xi only, 3 = rejected."""
    x = fenwick_find(tree, rng.random() * total)
    j = _alias_draw(alias_prob, alias_idx, rng)
    dest = apply_disp(x, disp[j], strides, side, dim, no_wrap)
    if dest < 0:
        return x, j, dest, 3
    g_eta = g_of(eta[x], g_table, g_slope)
    g_xi = g_of(xi[x], g_table, g_slope)
    bound = max(g_eta, g_xi) * h_sup
    if bound <= 0.0:
        return x, j, dest, 3
    r_eta = g_eta * h_of(eta[dest], h_table)
    r_xi = g_xi * h_of(xi[dest], h_table)
    r_min = min(r_eta, r_xi)
    z = rng.random() * bound
    if z < r_min:
        return x, j, dest, 0
    if z < r_eta:
        return x, j, dest, 1
    if z < r_eta + r_xi - r_min:
        return x, j, dest, 2
    return x, j, dest, 3


@_jit
def _pair_unordered(diff, a, b):
    return 1 if (diff[a] > 0 and diff[b] < 0) or (diff[a] < 0 and diff[b] > 0) else 0


@_jit
def _tracked_pairs(y, m, tracked, tracked_neg, strides, side, dim, pairs):
    """The two ordered pairs whose order indicator involves site y for
    tracked displacement m; writes (left, right) rows into pairs[0:2]."""
    y_minus = apply_disp(y, tracked_neg[m], strides, side, dim, False)
    y_plus = apply_disp(y, tracked[m], strides, side, dim, False)
    pairs[0, 0] = y_minus
    pairs[0, 1] = y
    pairs[1, 0] = y
    pairs[1, 1] = y_plus


@_jit
def _unordered_delta_sites(diff, x, dest, m, tracked, tracked_neg,
                           strides, side, dim, scratch):
    """Sum of U over the (deduplicated) pairs touching x or dest, for
    tracked displacement m, in the CURRENT diff state."""
    _tracked_pairs(x, m, tracked, tracked_neg, strides, side, dim, scratch[0:2])
    _tracked_pairs(dest, m, tracked, tracked_neg, strides, side, dim, scratch[2:4])
    s = 0
    for r in range(4):
        dup = False
        for q in range(r):
            if scratch[q, 0] == scratch[r, 0] and scratch[q, 1] == scratch[r, 1]:
                dup = True
                break
        if not dup:
            s += _pair_unordered(diff, scratch[r, 0], scratch[r, 1])
    return s


@_jit
def _apply_coupled(eta, xi, tree, x, dest, branch, g_table, g_slope,
                   diff, pairstats, n_tracked, tracked, tracked_neg,
                   strides, side, dim, cnt_u, scratch, before):
    """Apply a coupled move and maintain diff = eta - xi, the counts of
    positive/negative/absolute discrepancies, and the tracked unordered-pair
    counts.  Returns the total-weight delta."""
    w_x = max(g_of(eta[x], g_table, g_slope), g_of(xi[x], g_table, g_slope))
    w_d = max(g_of(eta[dest], g_table, g_slope), g_of(xi[dest], g_table, g_slope))
    if branch != 2:
        eta[x] -= 1
        eta[dest] += 1
    if branch != 1:
        xi[x] -= 1
        xi[dest] += 1
    if branch != 0:
        # diff changes only when exactly one marginal moves
        for m in range(n_tracked):
            before[m] = _unordered_delta_sites(
                diff, x, dest, m, tracked, tracked_neg, strides, side, dim, scratch)
        sgn = 1 if branch == 1 else -1
        for site, move in ((x, -sgn), (dest, sgn)):
            old = diff[site]
            new = old + move
            diff[site] = new
            if old > 0:
                pairstats[0] -= 1
            elif old < 0:
                pairstats[1] -= 1
            if new > 0:
                pairstats[0] += 1
            elif new < 0:
                pairstats[1] += 1
            pairstats[2] += abs(new) - abs(old)
        for m in range(n_tracked):
            after = _unordered_delta_sites(
                diff, x, dest, m, tracked, tracked_neg, strides, side, dim, scratch)
            cnt_u[m] += after - before[m]
    dx = max(g_of(eta[x], g_table, g_slope), g_of(xi[x], g_table, g_slope)) - w_x
    dd = max(g_of(eta[dest], g_table, g_slope), g_of(xi[dest], g_table, g_slope)) - w_d
    fenwick_add(tree, x, dx)
    fenwick_add(tree, dest, dd)
    return dx + dd


@_jit
def coupled_run_events(eta, xi, tree, micro_time, t_target,
                       g_table, g_slope, h_table, h_sup, m0,
                       disp, alias_prob, alias_idx, strides, side, dim,
                       w_trunc, no_wrap, max_proposals, rng, counters,
                       diff, pairstats, tracked, tracked_neg, cnt_u,
                       integral_u, check_order):
    """Advance the coupled pair to micro time t_target.

    diff       : int64[L], eta - xi, maintained in place
    pairstats  : int64[3], (#sites diff>0, #sites diff<0, sum |diff|)
    tracked    : int64[m, dim] displacements whose unordered-pair counts
                 cnt_u (int64[m]) and time integrals integral_u (float64[m])
                 are maintained
    check_order: when nonzero, abort with STATUS_UNORDERED if the pair
                 stops being sitewise ordered after an event
    """
    total = fenwick_total(tree)
    n_tracked = tracked.shape[0]
    scratch = np.empty((4, 2), dtype=np.int64)
    before = np.empty(max(n_tracked, 1), dtype=np.int64)
    since_refresh = 0
    while True:
        if total <= 0.0:
            for m in range(n_tracked):
                integral_u[m] += cnt_u[m] * (t_target - micro_time)
            return STATUS_FROZEN, t_target
        lam = h_sup * w_trunc * total
        wait = -math.log(1.0 - rng.random()) / lam
        if micro_time + wait > t_target:
            for m in range(n_tracked):
                integral_u[m] += cnt_u[m] * (t_target - micro_time)
            return STATUS_DONE, t_target
        if counters[0] >= max_proposals:
            return STATUS_BUDGET, micro_time
        for m in range(n_tracked):
            integral_u[m] += cnt_u[m] * wait
        micro_time += wait
        counters[0] += 1
        x, j, dest, branch = _propose_coupled(
            eta, xi, tree, total, g_table, g_slope, h_table, h_sup,
            disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
        if branch < 3:
            counters[1] += 1
            total += _apply_coupled(
                eta, xi, tree, x, dest, branch, g_table, g_slope,
                diff, pairstats, n_tracked, tracked, tracked_neg,
                strides, side, dim, cnt_u, scratch, before)
            if m0 >= 0 and (eta[dest] > m0 or xi[dest] > m0):
                return STATUS_CEILING, micro_time
            if check_order != 0 and pairstats[0] > 0 and pairstats[1] > 0:
                return STATUS_UNORDERED, micro_time
            since_refresh += 1
            if since_refresh >= REFRESH_EVERY:
                total = fenwick_total(tree)
                since_refresh = 0


@_jit
def coupled_one_proposal(eta, xi, tree, micro_time,
                         g_table, g_slope, h_table, h_sup, m0,
                         disp, alias_prob, alias_idx, strides, side, dim,
                         w_trunc, no_wrap, rng, counters,
                         diff, pairstats, tracked, tracked_neg, cnt_u,
                         integral_u):
    """One coupled thinning proposal; returns
    (status, micro_time, x, j, branch)."""
    total = fenwick_total(tree)
    n_tracked = tracked.shape[0]
    if total <= 0.0:
        return STATUS_FROZEN, math.inf, -1, -1, 3
    lam = h_sup * w_trunc * total
    wait = -math.log(1.0 - rng.random()) / lam
    for m in range(n_tracked):
        integral_u[m] += cnt_u[m] * wait
    micro_time += wait
    counters[0] += 1
    x, j, dest, branch = _propose_coupled(
        eta, xi, tree, total, g_table, g_slope, h_table, h_sup,
        disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
    status = STATUS_DONE
    if branch < 3:
        counters[1] += 1
        scratch = np.empty((4, 2), dtype=np.int64)
        before = np.empty(max(n_tracked, 1), dtype=np.int64)
        _apply_coupled(eta, xi, tree, x, dest, branch, g_table, g_slope,
                       diff, pairstats, n_tracked, tracked, tracked_neg,
                       strides, side, dim, cnt_u, scratch, before)
        if m0 >= 0 and (eta[dest] > m0 or xi[dest] > m0):
            status = STATUS_CEILING
    return status, micro_time, x, j, branch


@_jit
def coupled_count_conditional(eta, xi, tree, n_events,
                              g_table, g_slope, h_table, h_sup,
                              disp, alias_prob, alias_idx, strides, side, dim,
                              no_wrap, max_proposals, rng, counts):
    """Branch frequencies of accepted coupled events from a FIXED pair;
    counts is int64[L * K * 3] indexed by ((x * K) + j) * 3 + branch."""
    total = fenwick_total(tree)
    k = alias_prob.size
    done = 0
    proposals = 0
    while done < n_events:
        proposals += 1
        if proposals > max_proposals:
            return STATUS_BUDGET
        x, j, dest, branch = _propose_coupled(
            eta, xi, tree, total, g_table, g_slope, h_table, h_sup,
            disp, alias_prob, alias_idx, strides, side, dim, no_wrap, rng)
        if branch < 3:
            counts[(x * k + j) * 3 + branch] += 1
            done += 1
    return STATUS_DONE
