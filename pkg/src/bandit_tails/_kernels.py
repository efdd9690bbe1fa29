"""Compiled inner loops.

Everything here works on plain arrays: atom locations ``pts`` (sorted),
nonnegative weights ``w`` over those atoms with total ``tot`` (counts and
``n`` for empirical laws, probabilities and 1 otherwise), and ``upper``, the
largest point the reward class allows. For the finite-alphabet and bounded
classes KL_inf depends on the class only through ``upper``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

INF = math.inf

DUAL_MAX_ITER = 200
DUAL_REL_TOL = 1e-12
INDEX_MAX_ITER = 80
INDEX_TOL = 1e-10
BOUNDARY_SHRINK = 1.0 - 1e-12

SCHED_FINITE = 0
SCHED_THEOREM1 = 1


@njit(cache=True)
def kl_bernoulli(p, q):
    """Binary KL between success probabilities ``p`` and ``q``."""
    r = 0.0
    if p > 0.0:
        if q <= 0.0:
            return INF
        r += p * math.log(p / q)
    if p < 1.0:
        if q >= 1.0:
            return INF
        r += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return r if r > 0.0 else 0.0


@njit(cache=True)
def _dual_slope(pts, w, tot, x, lam):
    s = 0.0
    for i in range(pts.shape[0]):
        if w[i] > 0:
            s += w[i] * (x - pts[i]) / (1.0 - lam * (pts[i] - x))
    return s / tot


@njit(cache=True)
def _dual_objective(pts, w, tot, x, lam):
    s = 0.0
    for i in range(pts.shape[0]):
        if w[i] > 0:
            s += w[i] * math.log1p(-lam * (pts[i] - x))
    return s / tot


@njit(cache=True)
def weighted_mean(pts, w, tot):
    s = 0.0
    lo = math.inf
    hi = -math.inf
    for i in range(pts.shape[0]):
        if w[i] > 0:
            s += w[i] * pts[i]
            lo = min(lo, pts[i])
            hi = max(hi, pts[i])
    # rounding must not push the mean outside the charged points
    return min(max(s / tot, lo), hi)


@njit(cache=True)
def dual_klinf(pts, w, tot, x, upper):
    """KL_inf by maximising the concave dual over lambda in [0, 1/(upper - x)].

    Returns ``(value, lambda)``; lambda is NaN where the dual is degenerate
    (``x`` at or beyond ``upper``).
    """
    m = weighted_mean(pts, w, tot)
    if x <= m:
        return 0.0, 0.0
    if x >= upper:
        # Only a point mass at ``upper`` has mean >= upper, and it is
        # absolutely continuous w.r.t. nothing else.
        return INF, math.nan
    top = 0.0
    for i in range(pts.shape[0]):
        if w[i] > 0 and pts[i] >= upper:
            top += w[i]
    lam_max = 1.0 / (upper - x)
    if top <= 0.0:
        # No mass at the top: the objective stays finite on the closed
        # interval and may peak on its right end.
        if _dual_slope(pts, w, tot, x, lam_max) >= 0.0:
            return _dual_objective(pts, w, tot, x, lam_max), lam_max
        hi = lam_max
    else:
        hi = BOUNDARY_SHRINK * lam_max
        if _dual_slope(pts, w, tot, x, hi) >= 0.0:
            return _dual_objective(pts, w, tot, x, hi), hi
    lo = 0.0
    for _ in range(DUAL_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _dual_slope(pts, w, tot, x, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < DUAL_REL_TOL * lam_max:
            break
    lam = 0.5 * (lo + hi)
    val = _dual_objective(pts, w, tot, x, lam)
    return (val if val > 0.0 else 0.0), lam


@njit(cache=True)
def _binary_shape(pts, w, upper):
    """Classify the atoms of ``w`` relative to ``upper``.

    Returns ``(n_below, lo, top_weight)``: how many distinct atoms sit below
    ``upper``, the smallest of them, and the weight on ``upper`` itself.
    """
    n_below = 0
    lo = 0.0
    top = 0.0
    for i in range(pts.shape[0]):
        if w[i] > 0:
            if pts[i] >= upper:
                top += w[i]
            else:
                if n_below == 0:
                    lo = pts[i]
                n_below += 1
    return n_below, lo, top


@njit(cache=True)
def klinf_fast(pts, w, tot, x, upper):
    """KL_inf value with a closed form when only two points matter.

    If the law charges at most one point below ``upper``, every competitor
    can be taken on ``{lo, upper}`` and KL_inf is a binary KL.
    """
    n_below, lo, top = _binary_shape(pts, w, upper)
    if n_below == 1:
        m = lo + (top / tot) * (upper - lo)
        if x <= m:
            return 0.0
        if x >= upper:
            return INF
        return kl_bernoulli(top / tot, (x - lo) / (upper - lo))
    return dual_klinf(pts, w, tot, x, upper)[0]


@njit(cache=True)
def binary_index(p, budget):
    """Largest q >= p with kl(p, q) <= budget.

    Newton from the right of the root: kl(p, .) is convex and increasing on
    [p, 1], so iterates decrease monotonically onto the root. The start
    ``p + sqrt(budget / 2)`` lies right of the root by Pinsker.
    """
    if budget <= 0.0:
        return p
    if p >= 1.0:
        return 1.0
    q = p + math.sqrt(0.5 * budget)
    if q >= 1.0:
        q = 1.0 - 1e-15
        if kl_bernoulli(p, q) <= budget:
            return 1.0
    for _ in range(100):
        h = kl_bernoulli(p, q) - budget
        if h <= 1e-15:
            break
        dh = (q - p) / (q * (1.0 - q))
        step = h / dh
        q_new = q - step
        if q_new <= p:
            q_new = 0.5 * (q + p)
        if q - q_new < 1e-15:
            q = q_new
            break
        q = q_new
    return q


@njit(cache=True)
def index_value(pts, w, tot, budget, upper):
    """sup{x : KL_inf(law, x) <= budget} over x in [mean, upper]."""
    m = weighted_mean(pts, w, tot)
    if budget <= 0.0:
        return m
    n_below, lo, top = _binary_shape(pts, w, upper)
    if n_below == 0:
        return upper
    if n_below == 1:
        q = binary_index(top / tot, budget)
        if q >= 1.0:
            return upper
        x = lo + q * (upper - lo)
        # mapping q back to x rounds; near upper that can overshoot the budget
        step = np.spacing(x)
        while x > m and dual_klinf(pts, w, tot, x, upper)[0] > budget:
            x -= step
            step *= 2.0
        return x if x > m else m
    a = m
    b = upper
    for _ in range(INDEX_MAX_ITER):
        mid = 0.5 * (a + b)
        if dual_klinf(pts, w, tot, mid, upper)[0] <= budget:
            a = mid
        else:
            b = mid
        if b - a < INDEX_TOL:
            break
    return a


@njit(cache=True)
def schedule_value(kind, c1, c2, t, n):
    tt = t if t >= 3.0 else 3.0
    lt = math.log(tt)
    return _schedule(kind, c1, c2, lt, math.log(lt), n)


@njit(cache=True)
def _schedule(kind, c1, c2, lt, llt, n):
    if kind == SCHED_FINITE:
        f = lt + llt
    else:
        f = lt + 2.0 * llt + c1 * math.log1p(n) + c2
    return f if f > 0.0 else 0.0


@njit(cache=True)
def run_episode(cdf, atom_idx, n_atoms, pts, upper, range_width, kind, c1, c2,
                u, checkpoints, traj):
    """One episode of the KL_inf-UCB rule.

    ``cdf[a, :n_atoms[a]]`` is arm a's cumulative weight over its atoms and
    ``atom_idx[a, j]`` maps its j-th atom into ``pts``. ``u`` holds one
    uniform per round. Pull counts after each round listed in
    ``checkpoints`` are written into ``traj``.
    """
    K = cdf.shape[0]
    S = pts.shape[0]
    T = u.shape[0]
    counts = np.zeros((K, S), np.float64)
    N = np.zeros(K, np.int64)
    cp = 0
    n_cp = checkpoints.shape[0]
    for t in range(T):
        if t < K:
            a = t
        else:
            a = _select(counts, N, pts, upper, range_width, kind, c1, c2, t + 1.0)
        row = cdf[a]
        j = 0
        last = n_atoms[a] - 1
        while j < last and u[t] >= row[j]:
            j += 1
        counts[a, atom_idx[a, j]] += 1.0
        N[a] += 1
        while cp < n_cp and checkpoints[cp] == t + 1:
            for k in range(K):
                traj[cp, k] = N[k]
            cp += 1
    return N


@njit(cache=True)
def _select(counts, N, pts, upper, range_width, kind, c1, c2, t):
    """argmax of the indices, smallest arm on ties.

    The most pulled arm (the likely winner) is evaluated first. A
    challenger whose KL_inf at the current best value already exceeds its
    budget has index strictly below the best and is skipped without
    inverting; otherwise its index is computed in full.
    """
    K = N.shape[0]
    lt = math.log(t if t >= 3.0 else 3.0)
    llt = math.log(lt)
    lead = 0
    for k in range(1, K):
        if N[k] > N[lead]:
            lead = k
    n = float(N[lead])
    best = index_value(pts, counts[lead], n,
                       _schedule(kind, c1, c2, lt, llt, n) / n, upper)
    best_arm = lead
    for k in range(K):
        if k == lead:
            continue
        n = float(N[k])
        budget = _schedule(kind, c1, c2, lt, llt, n) / n
        wk = counts[k]
        m = weighted_mean(pts, wk, n)
        # Pinsker envelope: index <= mean + width * sqrt(budget / 2).
        if m + range_width * math.sqrt(0.5 * budget) < best:
            continue
        if best >= upper:
            if k > best_arm:
                continue
        elif best >= m and klinf_fast(pts, wk, n, best, upper) > budget:
            continue
        v = index_value(pts, wk, n, budget, upper)
        if v > best or (v == best and k < best_arm):
            best = v
            best_arm = k
    return best_arm


@njit(cache=True)
def run_episode_binary(w_lo, lo, upper, kind, c1, c2, u, checkpoints, traj):
    """``run_episode`` specialised to arms supported on ``{lo, upper}``.

    Arm a pays ``upper`` when its uniform is at least ``w_lo[a]`` (its
    weight on ``lo``; inverse-CDF order) and ``lo`` otherwise. Decisions
    match the general kernel round for round.

    Shortcut: a non-leading arm's state is frozen between its pulls and its
    budget only grows with t, so its index at round ``until[k]`` bounds its
    index at every earlier round. When the leader's KL_inf at the largest
    such bound is within the leader's budget, the leader's index dominates
    and no inversion is needed.
    """
    K = w_lo.shape[0]
    T = u.shape[0]
    width = upper - lo
    S = np.zeros(K, np.float64)
    N = np.zeros(K, np.int64)
    ub = np.zeros(K, np.float64)
    until = np.full(K, -1.0)
    cp = 0
    n_cp = checkpoints.shape[0]
    for t in range(T):
        if t < K:
            a = t
        else:
            tt = t + 1.0 if t + 1.0 >= 3.0 else 3.0
            lt = math.log(tt)
            llt = math.log(lt)
            lead = 0
            for k in range(1, K):
                if N[k] > N[lead]:
                    lead = k
            a = -1
            bound = -INF
            for k in range(K):
                if k == lead:
                    continue
                if S[k] >= N[k]:
                    bound = INF  # index pinned at upper: ties need the exact path
                    break
                if until[k] < tt:
                    until[k] = tt + math.floor(0.05 * tt) + 1.0
                    lt_h = math.log(until[k])
                    ub[k] = _binary_arm_index(S[k], N[k], lo, upper, kind, c1, c2,
                                              lt_h, math.log(lt_h))
                if ub[k] > bound:
                    bound = ub[k]
            if bound < upper:
                n = float(N[lead])
                p = S[lead] / n
                if lo + p * width > bound or p >= 1.0:
                    a = lead
                elif kl_bernoulli(p, (bound - lo) / width) <= _schedule(kind, c1, c2, lt, llt, n) / n:
                    a = lead
            if a < 0:
                a = _select_binary(S, N, lead, lo, upper, width, kind, c1, c2, lt, llt)
        if u[t] >= w_lo[a]:
            S[a] += 1.0
        N[a] += 1
        until[a] = -1.0
        while cp < n_cp and checkpoints[cp] == t + 1:
            for k in range(K):
                traj[cp, k] = N[k]
            cp += 1
    return N


@njit(cache=True)
def _select_binary(S, N, lead, lo, upper, width, kind, c1, c2, lt, llt):
    K = N.shape[0]
    best = _binary_arm_index(S[lead], N[lead], lo, upper, kind, c1, c2, lt, llt)
    a = lead
    for k in range(K):
        if k == lead:
            continue
        n = float(N[k])
        budget = _schedule(kind, c1, c2, lt, llt, n) / n
        p = S[k] / n
        m = lo + p * width
        if m + width * math.sqrt(0.5 * budget) < best:
            continue
        if best >= upper:
            if k > a:
                continue
        elif best >= m and p < 1.0:
            if kl_bernoulli(p, (best - lo) / width) > budget:
                continue
        v = _binary_arm_index(S[k], N[k], lo, upper, kind, c1, c2, lt, llt)
        if v > best or (v == best and k < a):
            best = v
            a = k
    return a


@njit(cache=True)
def _binary_arm_index(s, n_int, lo, upper, kind, c1, c2, lt, llt):
    n = float(n_int)
    budget = _schedule(kind, c1, c2, lt, llt, n) / n
    p = s / n
    m = lo + p * (upper - lo)
    if budget <= 0.0:
        return m
    if p >= 1.0:
        return upper
    q = binary_index(p, budget)
    if q >= 1.0:
        return upper
    x = lo + q * (upper - lo)
    return x if x > m else m


@njit(cache=True)
def assumption1_path(u, cdf, atom_idx_row, n_atoms, pts, upper, target, c1, c2, out):
    """Running max of ``n * KL_inf(emp_n, target) - g(n)`` along one path.

    ``out[n-1]`` receives the running maximum after ``n`` samples.
    """
    S = pts.shape[0]
    w = np.zeros(S, np.float64)
    best = -INF
    for i in range(u.shape[0]):
        j = 0
        while j < n_atoms - 1 and u[i] >= cdf[j]:
            j += 1
        w[atom_idx_row[j]] += 1.0
        n = i + 1.0
        val = n * klinf_fast(pts, w, n, target, upper) - (c1 * math.log1p(n) + c2)
        if val > best:
            best = val
        out[i] = best
    return best


@njit(cache=True)
def assumption2_path(u, cdf, atom_idx_row, n_atoms, pts, upper, target, n_grid, out):
    """KL_inf(emp_n, target) at each sample size in ``n_grid`` (sorted)."""
    S = pts.shape[0]
    w = np.zeros(S, np.float64)
    g = 0
    for i in range(u.shape[0]):
        j = 0
        while j < n_atoms - 1 and u[i] >= cdf[j]:
            j += 1
        w[atom_idx_row[j]] += 1.0
        while g < n_grid.shape[0] and n_grid[g] == i + 1:
            out[g] = klinf_fast(pts, w, i + 1.0, target, upper)
            g += 1


@njit(cache=True)
def ratio_grid(grid_w, pts, target_w, mu, upper, slack):
    """Evaluate KL(tilde, target) / KL_inf(tilde, mu) on simplex grid rows.

    Rows whose mean exceeds ``mu - slack`` get ``inf``.
    """
    n_rows = grid_w.shape[0]
    out = np.empty(n_rows, np.float64)
    for r in range(n_rows):
        row = grid_w[r]
        out[r] = ratio_value(row, pts, target_w, mu, upper, slack)
    return out


@njit(cache=True)
def ratio_value(row, pts, target_w, mu, upper, slack):
    m = weighted_mean(pts, row, 1.0)
    if m > mu - slack:
        return INF
    num = 0.0
    for i in range(pts.shape[0]):
        if row[i] > 0:
            if target_w[i] <= 0:
                return INF
            num += row[i] * math.log(row[i] / target_w[i])
    den = dual_klinf(pts, row, 1.0, mu, upper)[0]
    if den <= 0.0:
        return INF
    return num / den
