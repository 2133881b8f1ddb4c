"""Pure-numpy backend: vectorized kernels mirroring kernels_numba.

Same keyed-draw pipeline as the numba backend, expressed as whole-generation
array operations.  Integer layers are bit-identical to the numba backend;
binomial draws agree in distribution (and in practice in value, up to rare
last-ulp differences of vectorized transcendentals).
"""

import numpy as np

from . import entropy as ent

_U = np.uint64
GOLD = _U(ent.GOLD)
MIX1 = _U(ent.MIX1)
MIX2 = _U(ent.MIX2)
M_CHILD = _U(ent.M_CHILD)
M_STREAM = _U(ent.M_STREAM)
M_BIN = _U(ent.M_BIN)
S30, S27, S31, S11 = _U(30), _U(27), _U(31), _U(11)
UNIT_SCALE = ent.UNIT_SCALE

NAME = "numpy"


def mix64(z):
    with np.errstate(over="ignore"):
        z = z + GOLD
        z = (z ^ (z >> S30)) * MIX1
        z = (z ^ (z >> S27)) * MIX2
        return z ^ (z >> S31)


def unit(z):
    return ((z >> S11).astype(np.float64) + 0.5) * UNIT_SCALE


def stream_unit(key, t):
    # t: int scalar or int64 array of per-element stream counters
    with np.errstate(over="ignore"):
        tt = (np.asarray(t, dtype=np.int64) + 1).astype(np.uint64)
        return unit(mix64(key ^ (tt * M_STREAM)))


def child_key(pkey, j):
    with np.errstate(over="ignore"):
        return mix64(pkey ^ (_U(j + 1) * M_CHILD))


def binomial_child_key(bkey, j):
    with np.errstate(over="ignore"):
        return mix64(bkey ^ (_U(j + 1) * M_BIN))


def _stirling_tail(v):
    v2 = v * v
    return (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / v2) / v2) / v2) / v2) / v / 166320.0


def _binomial_inversion(n, p, keys):
    # all elements: n*p <= ~30, p <= 1/2
    n = n.astype(np.int64)
    q = 1.0 - p
    s = p / q
    a = (n + 1).astype(np.float64) * s
    r0 = np.power(q, n.astype(np.float64))
    slot = np.zeros(n.shape[0], dtype=np.int64)
    u = stream_unit(keys, slot)
    r = r0.copy()
    x = np.zeros(n.shape[0], dtype=np.int64)
    pending = np.ones(n.shape[0], dtype=bool)
    while True:
        step = pending & (u > r)
        pending = step
        if not step.any():
            break
        u = np.where(step, u - r, u)
        x = np.where(step, x + 1, x)
        over = step & ((x > 150) | (x > n))
        if over.any():
            slot = np.where(over, slot + 1, slot)
            u = np.where(over, stream_unit(keys, slot), u)
            x = np.where(over, 0, x)
            r = np.where(over, r0, r)
        norm = step & ~over
        r = np.where(norm, r * (a / np.maximum(x, 1) - s), r)
    return x


def _pmf_ratio_products(nf, r, q, mf, yf):
    # F = pmf(y)/pmf(m) built from the one-step recurrence, masked loop
    s = r / q
    a = s * (nf + 1.0)
    f = np.ones(nf.shape[0])
    up = yf > mf
    if up.any():
        steps = (yf - mf).astype(np.int64)
        t = 1
        active = up.copy()
        while active.any():
            idx = np.nonzero(active)[0]
            f[idx] *= a[idx] / (mf[idx] + t) - s[idx]
            active[idx] = t < steps[idx]
            t += 1
    down = yf < mf
    if down.any():
        steps = (mf - yf).astype(np.int64)
        t = 1
        active = down.copy()
        while active.any():
            idx = np.nonzero(active)[0]
            f[idx] /= a[idx] / (yf[idx] + t) - s[idx]
            active[idx] = t < steps[idx]
            t += 1
    return f


def _binomial_btpe(n, p, keys):
    # all elements: n*p >= 30, p <= 1/2
    nf = n.astype(np.float64)
    r = p
    q = 1.0 - r
    fm = nf * r + r
    mf = np.floor(fm)
    nrq = nf * r * q
    p1 = np.floor(2.195 * np.sqrt(nrq) - 4.6 * q) + 0.5
    xm = mf + 0.5
    xl = xm - p1
    xr = xm + p1
    c = 0.134 + 20.5 / (15.3 + mf)
    al = (fm - xl) / (fm - xl * r)
    laml = al * (1.0 + 0.5 * al)
    al = (xr - fm) / (xr * q)
    lamr = al * (1.0 + 0.5 * al)
    p2 = p1 * (1.0 + 2.0 * c)
    p3 = p2 + c / laml
    p4 = p3 + c / lamr
    out = np.zeros(n.shape[0], dtype=np.int64)
    slot = np.zeros(n.shape[0], dtype=np.int64)
    pending = np.arange(n.shape[0])
    while pending.size:
        i = pending
        u = stream_unit(keys[i], slot[i]) * p4[i]
        v = stream_unit(keys[i], slot[i] + 1)
        slot[i] += 2
        y = np.zeros(i.size)
        accept = np.zeros(i.size, dtype=bool)
        retry = np.zeros(i.size, dtype=bool)
        need = np.zeros(i.size, dtype=bool)
        m1 = u <= p1[i]
        y[m1] = np.floor(xm[i][m1] - p1[i][m1] * v[m1] + u[m1])
        accept[m1] = True
        m2 = ~m1 & (u <= p2[i])
        if m2.any():
            x = xl[i][m2] + (u[m2] - p1[i][m2]) / c[i][m2]
            vv = v[m2] * c[i][m2] + 1.0 - np.abs(mf[i][m2] - x + 0.5) / p1[i][m2]
            y[m2] = np.floor(x)
            v[m2] = vv
            bad = vv > 1.0
            retry[m2] = bad
            need[m2] = ~bad
        m3 = ~m1 & ~m2 & (u <= p3[i])
        if m3.any():
            yy = np.floor(xl[i][m3] + np.log(v[m3]) / laml[i][m3])
            bad = yy < 0
            y[m3] = yy
            v[m3] = v[m3] * (u[m3] - p2[i][m3]) * laml[i][m3]
            retry[m3] = bad
            need[m3] = ~bad
        m4 = ~m1 & ~m2 & ~m3
        if m4.any():
            yy = np.floor(xr[i][m4] - np.log(v[m4]) / lamr[i][m4])
            bad = yy > nf[i][m4]
            y[m4] = yy
            v[m4] = v[m4] * (u[m4] - p3[i][m4]) * lamr[i][m4]
            retry[m4] = bad
            need[m4] = ~bad
        if need.any():
            tloc = np.nonzero(need)[0]
            gi = i[tloc]
            yk = y[tloc]
            vk = v[tloc]
            mk = mf[gi]
            nk = nf[gi]
            rk = r[gi]
            qk = q[gi]
            nrqk = nrq[gi]
            xmk = xm[gi]
            k = np.abs(yk - mk)
            acc_t = vk <= 0.0
            rej_t = np.zeros(tloc.size, dtype=bool)
            open_ = ~acc_t
            exact = open_ & ((k <= 20) | (k >= 0.5 * nrqk - 1.0))
            if exact.any():
                w_ = np.nonzero(exact)[0]
                f = _pmf_ratio_products(nk[w_], rk[w_], qk[w_], mk[w_], yk[w_])
                ok = vk[w_] <= f
                acc_t[w_] |= ok
                rej_t[w_] |= ~ok
            sq = open_ & ~exact
            if sq.any():
                w_ = np.nonzero(sq)[0]
                kk = k[w_]
                nq = nrqk[w_]
                rho = (kk / nq) * ((kk * (kk / 3.0 + 0.625) + 0.16666666666666666) / nq + 0.5)
                tt = -0.5 * kk * kk / nq
                logv = np.log(vk[w_])
                lo = logv < tt - rho
                hi = logv > tt + rho
                acc_t[w_] |= lo
                rej_t[w_] |= hi
                mid = ~lo & ~hi
                if mid.any():
                    w2 = w_[np.nonzero(mid)[0]]
                    x1 = yk[w2] + 1.0
                    f1 = mk[w2] + 1.0
                    z = nk[w2] + 1.0 - mk[w2]
                    wv = nk[w2] - yk[w2] + 1.0
                    bound = (xmk[w2] * np.log(f1 / x1)
                             + (nk[w2] - mk[w2] + 0.5) * np.log(z / wv)
                             + (yk[w2] - mk[w2]) * np.log(wv * rk[w2] / (x1 * qk[w2]))
                             + _stirling_tail(f1) + _stirling_tail(z)
                             + _stirling_tail(x1) + _stirling_tail(wv))
                    ok = np.log(vk[w2]) <= bound
                    acc_t[w2] |= ok
                    rej_t[w2] |= ~ok
            accept[tloc] = acc_t
            retry[tloc] = rej_t
        done = i[accept]
        out[done] = y[accept].astype(np.int64)
        pending = i[retry]
    return out


def binomial_keyed_array(ns, ps, keys):
    """Per-element keyed binomial draws; mirrors the scalar backend."""
    ns = np.asarray(ns, dtype=np.int64)
    ps = np.asarray(ps, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.uint64)
    out = np.zeros(ns.shape[0], dtype=np.int64)
    todo = (ns > 0) & (ps > 0.0)
    full = todo & (ps >= 1.0)
    out[full] = ns[full]
    todo &= ~full
    if not todo.any():
        return out
    idx = np.nonzero(todo)[0]
    n = ns[idx]
    p = ps[idx]
    k = keys[idx]
    flip = p > 0.5
    ph = np.where(flip, 1.0 - p, p)
    res = np.empty(idx.shape[0], dtype=np.int64)
    small = n * ph < 30.0
    if small.any():
        s = np.nonzero(small)[0]
        res[s] = _binomial_inversion(n[s], ph[s], k[s])
    big = np.nonzero(~small)[0]
    if big.size:
        res[big] = _binomial_btpe(n[big], ph[big], k[big])
    res = np.where(flip, n - res, res)
    out[idx] = res
    return out


def binomial_keyed(n, p, key):
    return int(binomial_keyed_array(
        np.array([n], dtype=np.int64),
        np.array([p], dtype=np.float64),
        np.array([key], dtype=np.uint64))[0])


def _split_columns(law_id, param, u0):
    """Split vectors of a whole generation as per-child columns.

    Returns (widths int64 array, list of per-child mass columns); absent
    children carry mass 0.0.
    """
    m = u0.shape[0]
    if law_id == 0:
        return np.full(m, 2, dtype=np.int64), [u0, 1.0 - u0]
    if law_id == 1:
        h = np.full(m, 0.5)
        return np.full(m, 2, dtype=np.int64), [h, h.copy()]
    if law_id == 2:
        binary = u0 < param
        third = 1.0 / 3.0
        c0 = np.where(binary, 0.5, third)
        c2 = np.where(binary, 0.0, third)
        widths = np.where(binary, 2, 3).astype(np.int64)
        return widths, [c0, c0.copy(), c2]
    if law_id == 3:
        v = 0.05 * u0
        cols = [1.0 - 0.75 * u0] + [v.copy() for _ in range(15)]
        return np.full(m, 16, dtype=np.int64), cols
    rr = np.exp(-1.0 / u0)
    return np.full(m, 2, dtype=np.int64), [rr, 1.0 - rr]


def _gen_split(pkeys, emix, law_id, param):
    with np.errstate(over="ignore"):
        ek = mix64(pkeys ^ emix)
    u0 = stream_unit(ek, np.zeros(pkeys.shape[0], dtype=np.int64))
    return _split_columns(law_id, param, u0)


def draw_split_key(ekey, law_id, param):
    u0 = stream_unit(np.array([ekey], dtype=np.uint64), np.zeros(1, dtype=np.int64))
    widths, cols = _split_columns(law_id, param, u0)
    w = int(widths[0])
    return np.array([cols[j][0] for j in range(w)])


def draw_child_counts(bkey, total, rho):
    w = rho.shape[0]
    out = np.zeros(w, dtype=np.int64)
    rem = int(total)
    acc = 1.0
    bkey_arr = np.array([bkey], dtype=np.uint64)
    for j in range(w):
        if j == w - 1:
            out[j] = rem
        else:
            pj = min(rho[j] / acc, 1.0)
            cc = int(binomial_keyed_array(
                np.array([rem], dtype=np.int64),
                np.array([pj], dtype=np.float64),
                binomial_child_key(bkey_arr, j))[0])
            out[j] = cc
            rem -= cc
            acc -= rho[j]
            if acc < 1e-300:
                acc = 1e-300
    return out


def _expand(pkeys, counts, masses, emix, bmix, law_id, param, keep_min,
            want_counts, want_masses):
    m = pkeys.shape[0]
    widths, cols = _gen_split(pkeys, emix, law_id, param)
    if want_counts:
        with np.errstate(over="ignore"):
            bk = mix64(pkeys ^ bmix)
        rem = counts.astype(np.int64).copy()
        acc = np.ones(m)
    out_k, out_c, out_m = [], [], []
    visited = 0
    for j, rho_j in enumerate(cols):
        exists = rho_j > 0.0
        if want_counts:
            is_last = widths == j + 1
            draw_n = np.where(exists & ~is_last, rem, 0)
            pj = np.minimum(rho_j / acc, 1.0)
            cj = binomial_keyed_array(draw_n, pj, binomial_child_key(bk, j))
            cj = np.where(is_last, rem, cj)
            cj = np.where(exists, cj, 0)
            upd = exists & ~is_last
            rem = rem - np.where(upd, cj, 0)
            acc = np.maximum(np.where(upd, acc - rho_j, acc), 1e-300)
            keep = exists & (cj >= keep_min)
        else:
            keep = exists
        visited += int(exists.sum())
        if keep.any():
            kidx = np.nonzero(keep)[0]
            out_k.append(child_key(pkeys[kidx], j))
            if want_counts:
                out_c.append(cj[kidx])
            if want_masses:
                out_m.append(masses[kidx] * rho_j[kidx])
    ck = np.concatenate(out_k) if out_k else np.empty(0, dtype=np.uint64)
    cc = (np.concatenate(out_c) if out_c else np.empty(0, dtype=np.int64)) if want_counts else None
    cm = (np.concatenate(out_m) if out_m else np.empty(0, dtype=np.float64)) if want_masses else None
    return ck, cc, cm, visited


def expand_counts(pkeys, counts, emix, bmix, law_id, param, keep_min):
    ck, cc, _, visited = _expand(pkeys, counts, None, emix, bmix, law_id,
                                 param, keep_min, True, False)
    return ck, cc, visited


def expand_counts_masses(pkeys, counts, masses, emix, bmix, law_id, param, keep_min):
    ck, cc, cm, visited = _expand(pkeys, counts, masses, emix, bmix, law_id,
                                  param, keep_min, True, True)
    return ck, cc, cm, visited


def expand_masses(pkeys, masses, emix, law_id, param):
    ck, _, cm, visited = _expand(pkeys, None, masses, emix, np.uint64(0),
                                 law_id, param, 0, False, True)
    return ck, cm, visited
