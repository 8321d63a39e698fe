"""Compiled inner loops: the Fenwick index, tree growth and the coupled growth.

Increments are evaluated as a[p] * b[t] + c[p] + e[t] + table[idx[p], idx[t]]
from per-vertex arrays, which covers both the separable and the table kernels.
"""

import math

import numpy as np
from numba import njit

REBUILD_EVERY = 1 << 16


@njit(cache=True, nogil=True)
def fen_build(tree, values):
    size = tree.shape[0] - 1
    for i in range(1, size + 1):
        tree[i] = values[i - 1] if i - 1 < values.shape[0] else 0.0
    for i in range(1, size + 1):
        j = i + (i & -i)
        if j <= size:
            tree[j] += tree[i]


@njit(cache=True, nogil=True)
def fen_add(tree, pos, delta):
    size = tree.shape[0] - 1
    j = pos + 1
    while j <= size:
        tree[j] += delta
        j += j & -j


@njit(cache=True, nogil=True)
def fen_prefix(tree, count):
    """Sum of the first `count` leaves."""
    s = 0.0
    j = count
    while j > 0:
        s += tree[j]
        j -= j & -j
    return s


@njit(cache=True, nogil=True)
def fen_find(tree, target):
    """Largest 0-based index p with prefix(p) <= target, i.e. the leaf whose
    cumulative interval contains target."""
    size = tree.shape[0] - 1
    pos = 0
    step = 1
    while step * 2 <= size:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos


@njit(cache=True, nogil=True)
def fen_sample(tree, values, total, u, limit):
    """Draw a leaf with probability values[p] / total among the first `limit`."""
    p = fen_find(tree, u * total)
    if p >= limit:
        p = limit - 1
    # rounding can land on an empty leaf next to the intended one
    while values[p] <= 0.0 and p > 0:
        p -= 1
    if values[p] <= 0.0:
        while values[p] <= 0.0 and p < limit - 1:
            p += 1
    return p


@njit(cache=True, nogil=True)
def increment(a, b, c, e, idx, table, p, t):
    return a[p] * b[t] + c[p] + e[t] + table[idx[p], idx[t]]


@njit(cache=True, nogil=True)
def grow_kernel(n, h, a, b, c, e, idx, table, u, vbin, nbins, stride,
                keep_parent, probe_v, probe_gt, probe_at):
    """Grow one tree for n steps.

    Returns fitness, out-degree, parent (length 1 when not kept), the edge
    counts by (parent bin, child bin), the recorded Z_t / t at every multiple of
    `stride`, the final Z, the largest relative drift seen at a rebuild, and the
    probe series (fitness of vertex probe_v and the log normaliser at the
    requested times).
    """
    size = 1
    while size < n + 1:
        size *= 2
    tree = np.zeros(size + 1)
    fit = np.zeros(n + 1)
    deg = np.zeros(n + 1, dtype=np.int64)
    parent = np.full(n + 1 if keep_parent else 1, -1, dtype=np.int64)
    xi2 = np.zeros((nbins, nbins), dtype=np.int64)
    nrec = n // stride if stride > 0 else 0
    zrec = np.zeros(nrec)
    nprobe = probe_at.shape[0]
    probe_f = np.zeros(nprobe)
    probe_log = np.zeros(nprobe)
    pk = 0
    lognorm = 0.0

    fit[0] = h[0]
    fen_add(tree, 0, h[0])
    Z = h[0]
    drift = 0.0
    while pk < nprobe and probe_at[pk] <= 0:
        if probe_v == 0:
            probe_f[pk] = fit[0]
        pk += 1

    for t in range(1, n + 1):
        if probe_v >= 0 and t - 1 >= probe_v:
            lognorm += math.log((Z + probe_gt) / Z)
        p = fen_sample(tree, fit, Z, u[t], t)
        inc = increment(a, b, c, e, idx, table, p, t)
        fit[p] += inc
        fen_add(tree, p, inc)
        fit[t] = h[t]
        fen_add(tree, t, h[t])
        Z += inc + h[t]
        deg[p] += 1
        if keep_parent:
            parent[t] = p
        xi2[vbin[p], vbin[t]] += 1
        if stride > 0 and t % stride == 0:
            zrec[t // stride - 1] = Z / t
        while pk < nprobe and probe_at[pk] <= t:
            if probe_v >= 0 and probe_v <= t:
                probe_f[pk] = fit[probe_v]
                probe_log[pk] = lognorm
            pk += 1
        if t % REBUILD_EVERY == 0:
            exact = 0.0
            for i in range(t + 1):
                exact += fit[i]
            rel = abs(exact - Z) / exact
            if rel > drift:
                drift = rel
            Z = exact
            fen_build(tree, fit)
    return fit, deg, parent, xi2, zrec, Z, drift, probe_f, probe_log


@njit(cache=True, nogil=True)
def coupled_kernel(n, hm, am, bm, cm, em, idxm, tabm,
                   ht, at, bt, ct, et, idxt, tabt,
                   hp, ap, bp, cp, ep, idxp, tabp,
                   in_m, u0, u1, u2, u3, u4, tol):
    """Grow the lower, original and upper trees on one vertex sequence.

    The lower tree draws its parent freely.  The original tree keeps that
    parent with probability Z_lo f(v) / (Z f_lo(v)) when v lies outside the
    near-maximal set, and otherwise redraws among vertices inside the set; the
    upper tree follows the original one in the same way.  Every step checks the
    partition-function sandwich and, for the vertices it touched, the fitness
    and degree sandwiches.  Returns (fitness x3, degree x3, Z x3, violation
    count, worst acceptance ratio, count of empty-set fallbacks, final
    violation count over all vertices).
    """
    size = 1
    while size < n + 1:
        size *= 2
    fm = np.zeros(n + 1)
    ft = np.zeros(n + 1)
    fp = np.zeros(n + 1)
    dm = np.zeros(n + 1, dtype=np.int64)
    dt = np.zeros(n + 1, dtype=np.int64)
    dp = np.zeros(n + 1, dtype=np.int64)
    fen_m = np.zeros(size + 1)
    fen_tm = np.zeros(size + 1)
    fen_pm = np.zeros(size + 1)
    ftm = np.zeros(n + 1)
    fpm = np.zeros(n + 1)

    fm[0] = hm[0]
    ft[0] = ht[0]
    fp[0] = hp[0]
    fen_add(fen_m, 0, fm[0])
    Zm, Zt, Zp = fm[0], ft[0], fp[0]
    St, Sp = 0.0, 0.0
    if in_m[0]:
        ftm[0] = ft[0]
        fpm[0] = fp[0]
        fen_add(fen_tm, 0, ft[0])
        fen_add(fen_pm, 0, fp[0])
        St, Sp = ft[0], fp[0]
    violations = 0
    worst = 0.0
    empty = 0
    touched = np.zeros(4, dtype=np.int64)

    for t in range(1, n + 1):
        v = fen_sample(fen_m, fm, Zm, u0[t], t)
        vt = -1
        if not in_m[v]:
            ratio = Zm * ft[v] / (Zt * fm[v])
            if ratio > worst:
                worst = ratio
            if u1[t] <= ratio:
                vt = v
        if vt < 0:
            if St > 0.0:
                vt = fen_sample(fen_tm, ftm, St, u2[t], t)
            else:
                empty += 1
                vt = v
        vp = -1
        if not in_m[vt] and ft[vt] > 0.0:
            ratio = Zt * fp[vt] / (Zp * ft[vt])
            if ratio > worst:
                worst = ratio
            if u3[t] <= ratio:
                vp = vt
        if vp < 0:
            if Sp > 0.0:
                vp = fen_sample(fen_pm, fpm, Sp, u4[t], t)
            else:
                empty += 1
                vp = vt

        inc = increment(am, bm, cm, em, idxm, tabm, v, t)
        fm[v] += inc
        fen_add(fen_m, v, inc)
        Zm += inc + hm[t]
        dm[v] += 1
        fm[t] = hm[t]
        fen_add(fen_m, t, hm[t])

        inc = increment(at, bt, ct, et, idxt, tabt, vt, t)
        ft[vt] += inc
        Zt += inc + ht[t]
        dt[vt] += 1
        ft[t] = ht[t]
        if in_m[vt]:
            ftm[vt] += inc
            fen_add(fen_tm, vt, inc)
            St += inc

        inc = increment(ap, bp, cp, ep, idxp, tabp, vp, t)
        fp[vp] += inc
        Zp += inc + hp[t]
        dp[vp] += 1
        fp[t] = hp[t]
        if in_m[vp]:
            fpm[vp] += inc
            fen_add(fen_pm, vp, inc)
            Sp += inc

        if in_m[t]:
            ftm[t] = ht[t]
            fpm[t] = hp[t]
            fen_add(fen_tm, t, ht[t])
            fen_add(fen_pm, t, hp[t])
            St += ht[t]
            Sp += hp[t]

        scale = tol * (1.0 + Zp)
        if Zm > Zt + scale or Zt > Zp + scale:
            violations += 1
        touched[0] = v
        touched[1] = vt
        touched[2] = vp
        touched[3] = t
        for k in range(4):
            q = touched[k]
            if in_m[q]:
                continue
            fs = tol * (1.0 + fm[q])
            if fp[q] > ft[q] + fs or ft[q] > fm[q] + fs:
                violations += 1
            if dp[q] > dt[q] or dt[q] > dm[q]:
                violations += 1

    final = 0
    for q in range(n + 1):
        if in_m[q]:
            continue
        fs = tol * (1.0 + fm[q])
        if fp[q] > ft[q] + fs or ft[q] > fm[q] + fs or dp[q] > dt[q] or dt[q] > dm[q]:
            final += 1
    return fm, ft, fp, dm, dt, dp, Zm, Zt, Zp, violations, worst, empty, final
