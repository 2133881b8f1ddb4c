"""numba backend: scalar @njit kernels for tree expansion.

Every draw is keyed: uniforms come from ``stream_unit(key, t)`` where the key
is a pure function of (seed, path), so results do not depend on expansion
order.  The vectorized numpy backend implements the identical pipeline; the
integer layers agree bit for bit across backends, float transcendentals may
differ in the last ulp (see backend.py).
"""

import math

import numpy as np
from numba import njit, types

from . import entropy as ent

U8 = types.uint64
I8 = types.int64
F8 = types.float64

GOLD = np.uint64(ent.GOLD)
MIX1 = np.uint64(ent.MIX1)
MIX2 = np.uint64(ent.MIX2)
M_CHILD = np.uint64(ent.M_CHILD)
M_STREAM = np.uint64(ent.M_STREAM)
M_BIN = np.uint64(ent.M_BIN)
ONE = np.uint64(1)
UNIT_SCALE = ent.UNIT_SCALE

NAME = "numba"


@njit(U8(U8), cache=True)
def mix64(z):
    z = z + GOLD
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


@njit(F8(U8), cache=True)
def unit(z):
    return ((z >> np.uint64(11)) + 0.5) * UNIT_SCALE


@njit(F8(U8, U8), cache=True)
def stream_unit(key, t):
    return unit(mix64(key ^ ((t + ONE) * M_STREAM)))


@njit(U8(U8, U8), cache=True)
def child_key(pkey, j):
    return mix64(pkey ^ ((j + ONE) * M_CHILD))


@njit(U8(U8, U8), cache=True)
def binomial_child_key(bkey, j):
    return mix64(bkey ^ ((j + ONE) * M_BIN))


@njit(F8(F8), cache=True)
def _stirling_tail(v):
    # 1/(12v) - 1/(360v^3) + 1/(1260v^5) - 1/(1680v^7), folded over /166320
    v2 = v * v
    return (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / v2) / v2) / v2) / v2) / v / 166320.0


@njit(I8(I8, F8, U8), cache=True)
def _binomial_inversion(n, p, key):
    # valid for n*p <= ~30 and p <= 1/2; one uniform per attempt
    q = 1.0 - p
    s = p / q
    a = (n + 1) * s
    r0 = q ** np.float64(n)
    t = np.uint64(0)
    while True:
        u = stream_unit(key, t)
        r = r0
        x = 0
        ok = True
        while u > r:
            u -= r
            x += 1
            if x > 150 or x > n:
                ok = False
                break
            r *= (a / x - s)
        if ok:
            return x
        t += ONE


@njit(I8(I8, F8, U8), cache=True)
def _binomial_btpe(n, p, key):
    # triangle / parallelogram / exponential-tails rejection, exact for
    # n*p >= 30 and p <= 1/2 (Kachitvichyanukul-Schmeiser construction)
    r = p
    q = 1.0 - r
    fm = n * r + r
    m = int(math.floor(fm))
    nrq = n * r * q
    p1 = math.floor(2.195 * math.sqrt(nrq) - 4.6 * q) + 0.5
    xm = m + 0.5
    xl = xm - p1
    xr = xm + p1
    c = 0.134 + 20.5 / (15.3 + m)
    al = (fm - xl) / (fm - xl * r)
    laml = al * (1.0 + 0.5 * al)
    al = (xr - fm) / (xr * q)
    lamr = al * (1.0 + 0.5 * al)
    p2 = p1 * (1.0 + 2.0 * c)
    p3 = p2 + c / laml
    p4 = p3 + c / lamr
    t = np.uint64(0)
    while True:
        u = stream_unit(key, t) * p4
        v = stream_unit(key, t + ONE)
        t += np.uint64(2)
        if u <= p1:
            return int(math.floor(xm - p1 * v + u))
        if u <= p2:
            x = xl + (u - p1) / c
            v = v * c + 1.0 - abs(m - x + 0.5) / p1
            if v > 1.0:
                continue
            y = int(math.floor(x))
        elif u <= p3:
            y = int(math.floor(xl + math.log(v) / laml))
            if y < 0:
                continue
            v = v * (u - p2) * laml
        else:
            y = int(math.floor(xr - math.log(v) / lamr))
            if y > n:
                continue
            v = v * (u - p3) * lamr
        if v <= 0.0:
            return y
        k = y - m if y >= m else m - y
        if k <= 20 or k >= 0.5 * nrq - 1.0:
            s = r / q
            a = s * (n + 1)
            f = 1.0
            if m < y:
                for i in range(m + 1, y + 1):
                    f *= (a / i - s)
            elif m > y:
                for i in range(y + 1, m + 1):
                    f /= (a / i - s)
            if v <= f:
                return y
            continue
        rho = (k / nrq) * ((k * (k / 3.0 + 0.625) + 0.16666666666666666) / nrq + 0.5)
        tt = -0.5 * k * k / nrq
        logv = math.log(v)
        if logv < tt - rho:
            return y
        if logv > tt + rho:
            continue
        x1 = float(y + 1)
        f1 = float(m + 1)
        z = float(n + 1 - m)
        w = float(n - y + 1)
        bound = (xm * math.log(f1 / x1)
                 + (n - m + 0.5) * math.log(z / w)
                 + (y - m) * math.log(w * r / (x1 * q))
                 + _stirling_tail(f1) + _stirling_tail(z)
                 + _stirling_tail(x1) + _stirling_tail(w))
        if logv <= bound:
            return y


@njit(I8(I8, F8, U8), cache=True)
def binomial_keyed(n, p, key):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if p > 0.5:
        pp = 1.0 - p
        if n * pp < 30.0:
            return n - _binomial_inversion(n, pp, key)
        return n - _binomial_btpe(n, pp, key)
    if n * p < 30.0:
        return _binomial_inversion(n, p, key)
    return _binomial_btpe(n, p, key)


@njit(I8[:](I8[:], F8[:], U8[:]), cache=True)
def binomial_keyed_array(ns, ps, keys):
    out = np.empty(ns.shape[0], dtype=np.int64)
    for i in range(ns.shape[0]):
        out[i] = binomial_keyed(ns[i], ps[i], keys[i])
    return out


@njit(I8(I8, F8, F8, F8[:]), cache=True)
def _fill_split(law_id, param, u0, rho):
    if law_id == 0:  # uniform stick
        rho[0] = u0
        rho[1] = 1.0 - u0
        return 2
    if law_id == 1:  # dirac half
        rho[0] = 0.5
        rho[1] = 0.5
        return 2
    if law_id == 2:  # two-three mixture
        if u0 < param:
            rho[0] = 0.5
            rho[1] = 0.5
            return 2
        rho[0] = 1.0 / 3.0
        rho[1] = 1.0 / 3.0
        rho[2] = 1.0 / 3.0
        return 3
    if law_id == 3:  # 0.75U law
        rho[0] = 1.0 - 0.75 * u0
        v = 0.05 * u0
        for j in range(1, 16):
            rho[j] = v
        return 16
    # heavy tail: atom exp(-1/U) in (0, 1/e)
    rr = math.exp(-1.0 / u0)
    rho[0] = rr
    rho[1] = 1.0 - rr
    return 2


@njit(cache=True)
def draw_split_key(ekey, law_id, param):
    """Split vector of the node whose environment-layer key is ``ekey``."""
    rho = np.zeros(16, dtype=np.float64)
    u0 = stream_unit(ekey, np.uint64(0))
    w = _fill_split(law_id, param, u0, rho)
    return rho[:w].copy()


@njit(cache=True)
def draw_child_counts(bkey, total, rho):
    """Exact multinomial split of ``total`` balls, conditional binomials."""
    w = rho.shape[0]
    out = np.zeros(w, dtype=np.int64)
    rem = total
    acc = 1.0
    for j in range(w):
        if j == w - 1:
            out[j] = rem
        else:
            pj = rho[j] / acc
            if pj > 1.0:
                pj = 1.0
            cc = binomial_keyed(rem, pj, binomial_child_key(bkey, np.uint64(j)))
            out[j] = cc
            rem -= cc
            acc -= rho[j]
            if acc < 1e-300:
                acc = 1e-300
    return out


@njit(cache=True)
def expand_counts(pkeys, counts, emix, bmix, law_id, param, keep_min):
    """One generation of count expansion; keeps children with count >= keep_min.

    Returns (child path keys, child counts, children visited).
    """
    m = pkeys.shape[0]
    bmax = 16 if law_id == 3 else (3 if law_id == 2 else 2)
    out_k = np.empty(m * bmax, dtype=np.uint64)
    out_c = np.empty(m * bmax, dtype=np.int64)
    rho = np.zeros(16, dtype=np.float64)
    t = 0
    visited = 0
    for i in range(m):
        pk = pkeys[i]
        ek = mix64(pk ^ emix)
        u0 = stream_unit(ek, np.uint64(0))
        w = _fill_split(law_id, param, u0, rho)
        bk = mix64(pk ^ bmix)
        rem = counts[i]
        acc = 1.0
        for j in range(w):
            if j == w - 1:
                cc = rem
            else:
                pj = rho[j] / acc
                if pj > 1.0:
                    pj = 1.0
                cc = binomial_keyed(rem, pj, binomial_child_key(bk, np.uint64(j)))
                rem -= cc
                acc -= rho[j]
                if acc < 1e-300:
                    acc = 1e-300
            visited += 1
            if cc >= keep_min and rho[j] > 0.0:
                out_k[t] = child_key(pk, np.uint64(j))
                out_c[t] = cc
                t += 1
    return out_k[:t].copy(), out_c[:t].copy(), visited


@njit(cache=True)
def expand_counts_masses(pkeys, counts, masses, emix, bmix, law_id, param, keep_min):
    """Count expansion that also carries box masses along."""
    m = pkeys.shape[0]
    bmax = 16 if law_id == 3 else (3 if law_id == 2 else 2)
    out_k = np.empty(m * bmax, dtype=np.uint64)
    out_c = np.empty(m * bmax, dtype=np.int64)
    out_m = np.empty(m * bmax, dtype=np.float64)
    rho = np.zeros(16, dtype=np.float64)
    t = 0
    visited = 0
    for i in range(m):
        pk = pkeys[i]
        ek = mix64(pk ^ emix)
        u0 = stream_unit(ek, np.uint64(0))
        w = _fill_split(law_id, param, u0, rho)
        bk = mix64(pk ^ bmix)
        rem = counts[i]
        acc = 1.0
        for j in range(w):
            if j == w - 1:
                cc = rem
            else:
                pj = rho[j] / acc
                if pj > 1.0:
                    pj = 1.0
                cc = binomial_keyed(rem, pj, binomial_child_key(bk, np.uint64(j)))
                rem -= cc
                acc -= rho[j]
                if acc < 1e-300:
                    acc = 1e-300
            visited += 1
            if cc >= keep_min and rho[j] > 0.0:
                out_k[t] = child_key(pk, np.uint64(j))
                out_c[t] = cc
                out_m[t] = masses[i] * rho[j]
                t += 1
    return out_k[:t].copy(), out_c[:t].copy(), out_m[:t].copy(), visited


@njit(cache=True)
def expand_masses(pkeys, masses, emix, law_id, param):
    """Environment-only expansion: all positive-mass children of a generation."""
    m = pkeys.shape[0]
    bmax = 16 if law_id == 3 else (3 if law_id == 2 else 2)
    out_k = np.empty(m * bmax, dtype=np.uint64)
    out_m = np.empty(m * bmax, dtype=np.float64)
    rho = np.zeros(16, dtype=np.float64)
    t = 0
    for i in range(m):
        pk = pkeys[i]
        ek = mix64(pk ^ emix)
        u0 = stream_unit(ek, np.uint64(0))
        w = _fill_split(law_id, param, u0, rho)
        for j in range(w):
            if rho[j] > 0.0:
                out_k[t] = child_key(pk, np.uint64(j))
                out_m[t] = masses[i] * rho[j]
                t += 1
    return out_k[:t].copy(), out_m[:t].copy(), t
