"""Hot numerical core shared by the simulator.

Everything in this module is written in nopython-compatible Python and
compiled with numba when it is importable; without numba the very same
functions run under plain CPython (slowly, but with identical results,
since the RNG uses explicit uint64 arithmetic and all state lives in
numpy arrays).

Contents:
  * Philox4x32-10 counter-based generator (one stream per replica).
  * Fenwick (binary indexed) trees over the size domain 1..N, used both
    for integer mass/count tails and for float kernel-weight marginals.
  * ``draw_pair`` - one exact sample from the coagulation jump chain.
  * ``run_trajectory_core`` - the full event loop with stopping-time
    detection, series sampling, checkpoint snapshots and event logging.

The per-event jump rates follow the Markov generator: an unordered pair
of clusters of sizes (m, n) merges at rate a(m,n)*L_m*L_n/N for m != n
and a(n,n)*L_n*(L_n-1)/(2N) for m == n.
"""

import math

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on minimal installs
    numba = None
    HAVE_NUMBA = False


def _maybe_jit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


# kernel family codes used throughout the core
FAMILY_CONSTANT = 0
FAMILY_ADDITIVE = 1
FAMILY_PRODUCT = 2
FAMILY_SUM = 3
FAMILY_MIXED = 4
FAMILY_TABLE = 5

# stopping-time detector codes
ST_MASS_TAIL = 0  # sum_{n>=thresh} n L_n >= level
ST_LARGEST = 1  # largest cluster >= thresh
ST_ABSORBED = 2  # particle count == 1
ST_MOMENT_TAIL = 3  # sum_{n>=thresh} n^p L_n >= level

# run_trajectory_core exit codes
STOP_TMAX = 0
STOP_ABSORBED = 1
STOP_ALL_HIT = 2
STOP_EVENT_BUDGET = 3

# proposals per event before falling back to exact O(K^2) enumeration
REJECTION_WINDOW = 10_000
# weight-tree rebuild cadence (floating point drift control)
REBUILD_INTERVAL = 1 << 20


# ---------------------------------------------------------------------------
# Philox4x32-10 (Random123), exposed as a uniform(0,1) stream.
#
# State layout (uint64 array of length 6):
#   [0] key word 0      [1] key word 1
#   [2] 64-bit counter  [3] stashed 53-bit draw
#   [4] stash-valid flag
#   [5] unused / reserved
# ---------------------------------------------------------------------------

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT21 = np.uint64(21)
_SHIFT11 = np.uint64(11)
_U64_0 = np.uint64(0)
_U64_1 = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _philox_block(rngs):
    """Advance the counter once; return the four 32-bit output words."""
    k0 = rngs[0]
    k1 = rngs[1]
    ctr = rngs[2]
    c0 = ctr & _MASK32
    c1 = (ctr >> _SHIFT32) & _MASK32
    c2 = _U64_0
    c3 = _U64_0
    for _ in range(10):
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        n0 = ((p1 >> _SHIFT32) ^ c1 ^ k0) & _MASK32
        n1 = p1 & _MASK32
        n2 = ((p0 >> _SHIFT32) ^ c3 ^ k1) & _MASK32
        n3 = p0 & _MASK32
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = (k0 + _PHILOX_W0) & _MASK32
        k1 = (k1 + _PHILOX_W1) & _MASK32
    rngs[2] = ctr + _U64_1
    return c0, c1, c2, c3


_philox_block = _maybe_jit(_philox_block)


def _next_uniform(rngs):
    """Uniform double on the open interval (0, 1); zero draws are redrawn."""
    while True:
        if rngs[4] == _U64_1:
            bits = rngs[3]
            rngs[4] = _U64_0
        else:
            c0, c1, c2, c3 = _philox_block(rngs)
            bits = (c0 << _SHIFT21) | (c1 >> _SHIFT11)
            rngs[3] = (c2 << _SHIFT21) | (c3 >> _SHIFT11)
            rngs[4] = _U64_1
        u = bits * _INV53
        if u > 0.0:
            return u


_next_uniform = _maybe_jit(_next_uniform)


# ---------------------------------------------------------------------------
# Fenwick trees over indices 1..n (slot 0 unused).  One generic source;
# numba specialises for int64 and float64 trees as needed.
# ---------------------------------------------------------------------------


def fen_build(values):
    """Turn a raw weight array (index 0 ignored) into a Fenwick tree, in place."""
    n = values.shape[0] - 1
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            values[j] += values[i]
    return values


fen_build = _maybe_jit(fen_build)


def fen_add(tree, i, v):
    n = tree.shape[0] - 1
    while i <= n:
        tree[i] += v
        i += i & (-i)


fen_add = _maybe_jit(fen_add)


def fen_prefix(tree, i):
    s = tree[0] * 0  # zero of the tree dtype
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


fen_prefix = _maybe_jit(fen_prefix)


def fen_find(tree, topbit, target):
    """Smallest index i with prefix(i) >= target (target in (0, total])."""
    n = tree.shape[0] - 1
    idx = 0
    bit = topbit
    rem = target
    while bit > 0:
        nxt = idx + bit
        if nxt <= n and tree[nxt] < rem:
            idx = nxt
            rem -= tree[nxt]
        bit >>= 1
    return idx + 1


fen_find = _maybe_jit(fen_find)


# ---------------------------------------------------------------------------
# Kernel evaluation and per-family proposal weights
# ---------------------------------------------------------------------------


def alpha_eval(family, p1, m, n, table):
    fm = m * 1.0
    fn = n * 1.0
    if family == FAMILY_CONSTANT:
        return p1
    if family == FAMILY_ADDITIVE:
        return p1 * (fm + fn)
    if family == FAMILY_PRODUCT:
        return (fm * fn) ** p1
    if family == FAMILY_SUM:
        return fm**p1 + fn**p1
    if family == FAMILY_MIXED:
        return (fm**p1) * fn + (fn**p1) * fm
    return table[m, n]


alpha_eval = _maybe_jit(alpha_eval)


def weight_of(family, p1, n):
    """Per-class factor w(n) for the factorised proposal of this family."""
    fn = n * 1.0
    if family == FAMILY_PRODUCT:
        return fn**p1  # n^a
    if family == FAMILY_SUM or family == FAMILY_MIXED:
        return fn**p1  # n^q
    return 1.0


weight_of = _maybe_jit(weight_of)


def diag_weight_of(family, p1, n):
    """Per-class factor v(n) tracked for the exact diagonal rate correction."""
    fn = n * 1.0
    if family == FAMILY_PRODUCT:
        return fn ** (2.0 * p1)  # n^{2a}
    if family == FAMILY_MIXED:
        return fn ** (p1 + 1.0)  # n^{q+1}
    return 0.0


diag_weight_of = _maybe_jit(diag_weight_of)


def total_rate_from_account(family, p1, N, K, wtot, vacc, lsdot, diag):
    """Exact total jump rate R from the maintained per-family aggregates.

    wtot  - sum over classes of w(n) L_n (weight-tree total)
    vacc  - sum of v(n) L_n (diagonal accumulator, product/mixed)
    lsdot - sum_m L_m S_m for the table family
    diag  - sum_n a(n,n) L_n for the table family
    """
    if family == FAMILY_CONSTANT:
        return p1 * (K * (K - 1.0)) / (2.0 * N)
    if family == FAMILY_ADDITIVE:
        return p1 * (K - 1.0)
    if family == FAMILY_PRODUCT:
        r = (wtot * wtot - vacc) / (2.0 * N)
        return r if r > 0.0 else 0.0
    if family == FAMILY_SUM:
        return wtot * (K - 1.0) / N
    if family == FAMILY_MIXED:
        r = wtot - vacc / N
        return r if r > 0.0 else 0.0
    r = (lsdot - diag) / (2.0 * N)
    return r if r > 0.0 else 0.0


total_rate_from_account = _maybe_jit(total_rate_from_account)


def enumerate_pair(counts, largest, family, p1, table, rngs):
    """Exact O(K^2) sample of an unordered pair, used as the rejection guard.

    Weight of {m, n} is a(m,n) L_m L_n for m < n and a(n,n) L_n (L_n - 1)/2
    on the diagonal, i.e. proportional to the generator's jump rates.
    """
    nnz = 0
    for s in range(1, largest + 1):
        if counts[s] > 0:
            nnz += 1
    sizes = np.empty(nnz, np.int64)
    j = 0
    for s in range(1, largest + 1):
        if counts[s] > 0:
            sizes[j] = s
            j += 1
    total = 0.0
    for i in range(nnz):
        m = sizes[i]
        lm = counts[m]
        if lm >= 2:
            total += alpha_eval(family, p1, m, m, table) * lm * (lm - 1.0) * 0.5
        for k in range(i + 1, nnz):
            n = sizes[k]
            total += alpha_eval(family, p1, m, n, table) * lm * counts[n]
    if total <= 0.0:
        return -1, -1
    target = _next_uniform(rngs) * total
    acc = 0.0
    last_m = np.int64(-1)
    last_n = np.int64(-1)
    for i in range(nnz):
        m = sizes[i]
        lm = counts[m]
        if lm >= 2:
            acc += alpha_eval(family, p1, m, m, table) * lm * (lm - 1.0) * 0.5
            last_m = m
            last_n = m
            if acc >= target:
                return m, m
        for k in range(i + 1, nnz):
            n = sizes[k]
            acc += alpha_eval(family, p1, m, n, table) * lm * counts[n]
            last_m = m
            last_n = n
            if acc >= target:
                return m, n
    # float roundoff left target unreached; the last positive-weight pair
    return last_m, last_n


enumerate_pair = _maybe_jit(enumerate_pair)


def draw_pair(
    counts,
    K,
    N,
    largest,
    family,
    p1,
    table,
    stab,
    count_tree,
    mass_tree,
    wtree,
    topbit,
    rngs,
):
    """Sample one unordered pair {m, n} exactly from the generator's law.

    Ordered pairs are proposed from the product of per-class marginals
    (each family's factorisation), and a proposed m == n is accepted with
    probability (L_n - 1)/L_n, which reproduces the L_n (L_n - 1) diagonal
    count.  After REJECTION_WINDOW failed proposals the exact enumeration
    path takes over so pathological states cannot livelock.
    """
    tmax = stab.shape[0] - 1
    proposals = 0
    while True:
        proposals += 1
        if proposals > REJECTION_WINDOW:
            return enumerate_pair(counts, largest, family, p1, table, rngs)
        if family == FAMILY_CONSTANT:
            m = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
            n = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
        elif family == FAMILY_ADDITIVE:
            # (m+n) L_m L_n splits into two equal-mass components
            if _next_uniform(rngs) < 0.5:
                m = fen_find(mass_tree, topbit, _next_uniform(rngs) * N)
                n = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
            else:
                m = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
                n = fen_find(mass_tree, topbit, _next_uniform(rngs) * N)
        elif family == FAMILY_PRODUCT:
            wtot = fen_prefix(wtree, wtree.shape[0] - 1)
            m = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
            n = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
        elif family == FAMILY_SUM:
            # (m^q + n^q) L_m L_n: two components of equal total U*K
            wtot = fen_prefix(wtree, wtree.shape[0] - 1)
            if _next_uniform(rngs) < 0.5:
                m = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
                n = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
            else:
                m = fen_find(count_tree, topbit, _next_uniform(rngs) * K)
                n = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
        elif family == FAMILY_MIXED:
            # m^q n + n^q m: two components of equal total U*N
            wtot = fen_prefix(wtree, wtree.shape[0] - 1)
            if _next_uniform(rngs) < 0.5:
                m = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
                n = fen_find(mass_tree, topbit, _next_uniform(rngs) * N)
            else:
                m = fen_find(mass_tree, topbit, _next_uniform(rngs) * N)
                n = fen_find(wtree, topbit, _next_uniform(rngs) * wtot)
        else:
            # table family: linear scans over the (small) tabulated sizes,
            # first row m with weight L_m S_m, then n | m with a(m,n) L_n
            lsdot = 0.0
            for s in range(1, tmax + 1):
                if counts[s] > 0:
                    lsdot += counts[s] * stab[s]
            target = _next_uniform(rngs) * lsdot
            acc = 0.0
            m = tmax
            for s in range(1, tmax + 1):
                if counts[s] > 0:
                    acc += counts[s] * stab[s]
                    if acc >= target:
                        m = s
                        break
            target = _next_uniform(rngs) * stab[m]
            acc = 0.0
            n = tmax
            for s in range(1, tmax + 1):
                if counts[s] > 0:
                    acc += table[m, s] * counts[s]
                    if acc >= target:
                        n = s
                        break
        if counts[m] == 0 or counts[n] == 0:
            continue  # float boundary artefact; redraw
        if m != n:
            return m, n
        lm = counts[m]
        if lm >= 2 and _next_uniform(rngs) * lm < lm - 1.0:
            return m, n


draw_pair = _maybe_jit(draw_pair)


# ---------------------------------------------------------------------------
# The event loop
# ---------------------------------------------------------------------------


def run_trajectory_core(
    counts,
    N,
    t0,
    family,
    p1,
    table,
    t_max,
    max_events,
    stop_all_hit,
    st_kind,
    st_thresh,
    st_level,
    st_p,
    hit_times,
    stride,
    ser_ks,
    ser_mp,
    ser_mr,
    ser_t,
    ser_K,
    ser_largest,
    ser_tails,
    ser_moms,
    cp_times,
    cp_cutoff,
    cp_nrep,
    cp_counts,
    cp_solmass,
    cp_K,
    cp_largest,
    log_events,
    ev_t,
    ev_m,
    ev_n,
    rngs,
):
    """Run the jump process from ``counts`` until a stop condition fires.

    Mutates ``counts`` in place and fills the provided output buffers.
    Returns (t_end, K, largest, n_events, status, n_series_rows).
    """
    # --- derived state, built fresh so the caller only hands us counts ----
    K = np.int64(0)
    largest = np.int64(0)
    for s in range(1, N + 1):
        c = counts[s]
        if c > 0:
            K += c
            largest = s

    count_tree = np.zeros(N + 1, np.int64)
    mass_tree = np.zeros(N + 1, np.int64)
    for s in range(1, N + 1):
        c = counts[s]
        if c > 0:
            count_tree[s] = c
            mass_tree[s] = s * c
    fen_build(count_tree)
    fen_build(mass_tree)

    topbit = 1
    while (topbit << 1) <= N:
        topbit <<= 1

    need_wtree = family == FAMILY_PRODUCT or family == FAMILY_SUM or family == FAMILY_MIXED
    wtree = np.zeros(N + 1 if need_wtree else 1, np.float64)
    vacc = 0.0
    if need_wtree:
        for s in range(1, N + 1):
            c = counts[s]
            if c > 0:
                wtree[s] = weight_of(family, p1, s) * c
                vacc += diag_weight_of(family, p1, s) * c
        fen_build(wtree)

    tmax_tab = table.shape[0] - 1
    stab = np.zeros(tmax_tab + 1, np.float64)
    if family == FAMILY_TABLE:
        for m in range(1, tmax_tab + 1):
            acc = 0.0
            for s in range(1, tmax_tab + 1):
                if counts[s] > 0:
                    acc += table[m, s] * counts[s]
            stab[m] = acc

    # --- stopping-time accumulators ---------------------------------------
    n_specs = st_kind.shape[0]
    st_acc = np.zeros(n_specs, np.float64)
    for i in range(n_specs):
        kind = st_kind[i]
        if kind == ST_MASS_TAIL or kind == ST_MOMENT_TAIL:
            thr = st_thresh[i]
            acc = 0.0
            for s in range(thr, N + 1):
                c = counts[s]
                if c > 0:
                    if kind == ST_MASS_TAIL:
                        acc += s * c * 1.0
                    else:
                        acc += (s * 1.0) ** st_p[i] * c
            st_acc[i] = acc
    n_unhit = 0
    t = t0
    for i in range(n_specs):
        hit_times[i] = -1.0
        kind = st_kind[i]
        hit = False
        if kind == ST_MASS_TAIL or kind == ST_MOMENT_TAIL:
            hit = st_acc[i] >= st_level[i]
        elif kind == ST_LARGEST:
            hit = largest >= st_thresh[i]
        else:
            hit = K == 1
        if hit:
            hit_times[i] = t
        else:
            n_unhit += 1

    # --- series / checkpoint / log bookkeeping ----------------------------
    n_ks = ser_ks.shape[0]
    n_mom = ser_mp.shape[0]
    mom_acc = np.zeros(n_mom, np.float64)
    for i in range(n_mom):
        r = ser_mr[i]
        p = ser_mp[i]
        acc = 0.0
        for s in range(r, N + 1):
            c = counts[s]
            if c > 0:
                acc += (s * 1.0) ** p * c
        mom_acc[i] = acc

    ser_rows = 0
    if stride > 0:
        ser_t[0] = t
        ser_K[0] = K
        ser_largest[0] = largest
        for i in range(n_ks):
            km1 = ser_ks[i] - 1
            pref = fen_prefix(mass_tree, km1 if km1 <= N else N)
            ser_tails[0, i] = (N - pref) / N
        for i in range(n_mom):
            ser_moms[0, i] = mom_acc[i] / N
        ser_rows = 1

    n_cp = cp_times.shape[0]
    cp_idx = 0
    solmass = np.int64(0)
    if n_cp > 0 and cp_cutoff > 0:
        cut = cp_cutoff if cp_cutoff <= N + 1 else N + 1
        for s in range(1, cut):
            c = counts[s]
            if c > 0:
                solmass += s * c
    elif n_cp > 0:
        solmass = N

    n_events = np.int64(0)
    status = STOP_TMAX
    updates = np.int64(0)

    while True:
        if K <= 1:
            status = STOP_ABSORBED
            break
        if stop_all_hit != 0 and n_unhit == 0 and n_specs > 0:
            status = STOP_ALL_HIT
            break
        if n_events >= max_events:
            status = STOP_EVENT_BUDGET
            break

        if need_wtree:
            wtot = fen_prefix(wtree, N)
        else:
            wtot = 0.0
        lsdot = 0.0
        diag = 0.0
        if family == FAMILY_TABLE:
            for s in range(1, tmax_tab + 1):
                c = counts[s]
                if c > 0:
                    lsdot += c * stab[s]
                    diag += table[s, s] * c
        R = total_rate_from_account(family, p1, N, K, wtot, vacc, lsdot, diag)
        if R <= 0.0:
            # K >= 2 but float cancellation produced a zero rate: rebuild once
            if need_wtree:
                for s in range(wtree.shape[0]):
                    wtree[s] = 0.0
                vacc = 0.0
                for s in range(1, N + 1):
                    c = counts[s]
                    if c > 0:
                        wtree[s] = weight_of(family, p1, s) * c
                        vacc += diag_weight_of(family, p1, s) * c
                fen_build(wtree)
                wtot = fen_prefix(wtree, N)
                R = total_rate_from_account(family, p1, N, K, wtot, vacc, lsdot, diag)
            if family == FAMILY_TABLE:
                lsdot = 0.0
                for m in range(1, tmax_tab + 1):
                    acc = 0.0
                    for s in range(1, tmax_tab + 1):
                        if counts[s] > 0:
                            acc += table[m, s] * counts[s]
                    stab[m] = acc
                    lsdot += counts[m] * acc
                R = total_rate_from_account(family, p1, N, K, wtot, vacc, lsdot, diag)
            if R <= 0.0:
                status = STOP_ABSORBED
                break

        wait = -math.log(_next_uniform(rngs)) / R
        t_next = t + wait
        if t_next > t_max:
            t = t_max
            status = STOP_TMAX
            break

        m, n = draw_pair(
            counts, K, N, largest, family, p1, table, stab,
            count_tree, mass_tree, wtree, topbit, rngs,
        )
        if m < 1:
            status = STOP_ABSORBED
            break

        # snapshot checkpoints that fall strictly before this event
        while cp_idx < n_cp and cp_times[cp_idx] < t_next:
            for s in range(cp_nrep + 1):
                cp_counts[cp_idx, s] = counts[s] if s <= N else 0
            cp_solmass[cp_idx] = solmass / N
            cp_K[cp_idx] = K
            cp_largest[cp_idx] = largest
            cp_idx += 1

        # apply the coagulation
        t = t_next
        mn = m + n
        counts[m] -= 1
        counts[n] -= 1
        counts[mn] += 1
        K -= 1
        if mn > largest:
            largest = mn
        fen_add(count_tree, m, -1)
        fen_add(count_tree, n, -1)
        fen_add(count_tree, mn, 1)
        fen_add(mass_tree, m, -m)
        fen_add(mass_tree, n, -n)
        fen_add(mass_tree, mn, mn)
        if need_wtree:
            fen_add(wtree, m, -weight_of(family, p1, m))
            fen_add(wtree, n, -weight_of(family, p1, n))
            fen_add(wtree, mn, weight_of(family, p1, mn))
            vacc += (
                diag_weight_of(family, p1, mn)
                - diag_weight_of(family, p1, m)
                - diag_weight_of(family, p1, n)
            )
            updates += 3
            if updates >= REBUILD_INTERVAL:
                updates = 0
                for s in range(wtree.shape[0]):
                    wtree[s] = 0.0
                vacc = 0.0
                for s in range(1, N + 1):
                    c = counts[s]
                    if c > 0:
                        wtree[s] = weight_of(family, p1, s) * c
                        vacc += diag_weight_of(family, p1, s) * c
                fen_build(wtree)
        if family == FAMILY_TABLE:
            for s in range(1, tmax_tab + 1):
                stab[s] += table[s, mn] - table[s, m] - table[s, n]

        n_events += 1
        if log_events != 0:
            ev_t[n_events - 1] = t
            ev_m[n_events - 1] = m
            ev_n[n_events - 1] = n

        # stopping-time accumulators and first hits
        if n_specs > 0:
            for i in range(n_specs):
                kind = st_kind[i]
                if kind == ST_MASS_TAIL:
                    thr = st_thresh[i]
                    d = 0.0
                    if mn >= thr:
                        d += mn
                    if m >= thr:
                        d -= m
                    if n >= thr:
                        d -= n
                    st_acc[i] += d
                elif kind == ST_MOMENT_TAIL:
                    thr = st_thresh[i]
                    p = st_p[i]
                    d = 0.0
                    if mn >= thr:
                        d += (mn * 1.0) ** p
                    if m >= thr:
                        d -= (m * 1.0) ** p
                    if n >= thr:
                        d -= (n * 1.0) ** p
                    st_acc[i] += d
                if hit_times[i] < 0.0:
                    kind = st_kind[i]
                    hit = False
                    if kind == ST_MASS_TAIL or kind == ST_MOMENT_TAIL:
                        hit = st_acc[i] >= st_level[i]
                    elif kind == ST_LARGEST:
                        hit = largest >= st_thresh[i]
                    else:
                        hit = K == 1
                    if hit:
                        hit_times[i] = t
                        n_unhit -= 1

        # series moments and sol-mass tracked incrementally
        for i in range(n_mom):
            r = ser_mr[i]
            p = ser_mp[i]
            d = 0.0
            if mn >= r:
                d += (mn * 1.0) ** p
            if m >= r:
                d -= (m * 1.0) ** p
            if n >= r:
                d -= (n * 1.0) ** p
            mom_acc[i] += d
        if n_cp > 0 and cp_cutoff > 0:
            if mn < cp_cutoff:
                pass  # m, n < mn < cutoff: sol mass unchanged
            else:
                if m < cp_cutoff:
                    solmass -= m
                if n < cp_cutoff:
                    solmass -= n

        if stride > 0 and n_events % stride == 0:
            ser_t[ser_rows] = t
            ser_K[ser_rows] = K
            ser_largest[ser_rows] = largest
            for i in range(n_ks):
                km1 = ser_ks[i] - 1
                pref = fen_prefix(mass_tree, km1 if km1 <= N else N)
                ser_tails[ser_rows, i] = (N - pref) / N
            for i in range(n_mom):
                ser_moms[ser_rows, i] = mom_acc[i] / N
            ser_rows += 1

    # flush any checkpoints not yet reached (state is frozen from here on
    # for absorbed runs; for other stops the remaining rows record t_end)
    while cp_idx < n_cp:
        for s in range(cp_nrep + 1):
            cp_counts[cp_idx, s] = counts[s] if s <= N else 0
        cp_solmass[cp_idx] = solmass / N
        cp_K[cp_idx] = K
        cp_largest[cp_idx] = largest
        cp_idx += 1

    return t, K, largest, n_events, status, ser_rows


run_trajectory_core = _maybe_jit(run_trajectory_core)


def warmup():
    """Compile the hot path on a toy system (no-op without numba)."""
    counts = np.zeros(5, np.int64)
    counts[1] = 4
    rngs = np.zeros(6, np.uint64)
    rngs[0] = np.uint64(12345)
    empty_i = np.empty(0, np.int64)
    empty_f = np.empty(0, np.float64)
    for fam in (FAMILY_CONSTANT, FAMILY_ADDITIVE, FAMILY_PRODUCT, FAMILY_SUM, FAMILY_MIXED):
        c = counts.copy()
        run_trajectory_core(
            c, 4, 0.0, fam, 1.5,
            np.ones((2, 2)), np.inf, 1 << 40, 0,
            empty_i, empty_i, empty_f, empty_f, empty_f,
            0, empty_i, empty_f, empty_i,
            empty_f, empty_i, empty_i,
            np.empty((0, 0)), np.empty((0, 0)),
            empty_f, 0, 0,
            np.empty((0, 1), np.int64), empty_f, empty_i, empty_i,
            0, empty_f, empty_i, empty_i,
            rngs,
        )
    c = np.zeros(5, np.int64)
    c[1] = 4
    tab = np.ones((5, 5))
    run_trajectory_core(
        c, 4, 0.0, FAMILY_TABLE, 0.0,
        tab, np.inf, 1 << 40, 0,
        empty_i, empty_i, empty_f, empty_f, empty_f,
        0, empty_i, empty_f, empty_i,
        empty_f, empty_i, empty_i,
        np.empty((0, 0)), np.empty((0, 0)),
        empty_f, 0, 0,
        np.empty((0, 1), np.int64), empty_f, empty_i, empty_i,
        0, empty_f, empty_i, empty_i,
        rngs,
    )
