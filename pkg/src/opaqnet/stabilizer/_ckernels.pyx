# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled GF(2)/Pauli kernels for registers counts up to 64.

Same contracts as ``_pykernels``; masks are single machine words here.
"""

ctypedef unsigned long long u64

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil

cdef enum:
    MAXROWS = 64

GATE_CODES = {"H": 0, "S": 1, "X": 2, "Y": 3, "Z": 4, "CNOT": 5, "CZ": 6}


cdef inline int _pc(u64 v) nogil:
    return __builtin_popcountll(v)


cdef inline void _mul(u64 x1, u64 z1, int p1, u64 x2, u64 z2, int p2,
                      u64* xo, u64* zo, int* po) nogil:
    cdef u64 x = x1 ^ x2
    cdef u64 z = z1 ^ z2
    cdef int e = p1 + p2 + _pc(x1 & z1) + _pc(x2 & z2) + 2 * _pc(z1 & x2) - _pc(x & z)
    xo[0] = x
    zo[0] = z
    po[0] = e & 3


def pauli_mul(x1, z1, int p1, x2, z2, int p2):
    cdef u64 x, z
    cdef int p
    _mul(x1, z1, p1, x2, z2, p2, &x, &z, &p)
    return x, z, p


def anticommutes(u64 x1, u64 z1, u64 x2, u64 z2):
    return (_pc(x1 & z2) + _pc(z1 & x2)) & 1


cdef void _conj(u64* xp, u64* zp, int* pp, int code, int a, int b) nogil:
    cdef u64 x = xp[0]
    cdef u64 z = zp[0]
    cdef int p = pp[0]
    cdef u64 ba = (<u64>1) << a
    cdef u64 xa, za, xb, zb
    if code == 0:
        xa = (x >> a) & 1
        za = (z >> a) & 1
        if xa & za:
            p ^= 2
        x = (x & ~ba) | (za << a)
        z = (z & ~ba) | (xa << a)
    elif code == 1:
        xa = (x >> a) & 1
        if xa & (z >> a) & 1:
            p ^= 2
        z ^= xa << a
    elif code == 2:
        if (z >> a) & 1:
            p ^= 2
    elif code == 3:
        if ((x >> a) ^ (z >> a)) & 1:
            p ^= 2
    elif code == 4:
        if (x >> a) & 1:
            p ^= 2
    elif code == 5:
        xa = (x >> a) & 1
        za = (z >> a) & 1
        xb = (x >> b) & 1
        zb = (z >> b) & 1
        if xa & zb & (xb ^ za ^ 1):
            p ^= 2
        x ^= xa << b
        z ^= zb << a
    elif code == 6:
        xp[0] = x
        zp[0] = z
        pp[0] = p
        _conj(xp, zp, pp, 0, b, b)
        _conj(xp, zp, pp, 5, a, b)
        _conj(xp, zp, pp, 0, b, b)
        return
    xp[0] = x
    zp[0] = z
    pp[0] = p


def conjugate_rows(rows, int code, int a, int b):
    if code < 0 or code > 6:
        raise ValueError(f"unknown gate code {code}")
    cdef u64 x, z
    cdef int p
    out = []
    for r in rows:
        x = r[0]
        z = r[1]
        p = r[2]
        _conj(&x, &z, &p, code, a, b)
        out.append((x, z, p))
    return out


cdef int _load(rows, u64* xs, u64* zs, int* ps) except -1:
    cdef int k = 0
    for r in rows:
        if k >= MAXROWS:
            raise ValueError("too many rows for compiled kernel")
        xs[k] = r[0]
        zs[k] = r[1]
        ps[k] = r[2]
        k += 1
    return k


def eliminate(rows, u64 mask):
    cdef u64 xs[MAXROWS]
    cdef u64 zs[MAXROWS]
    cdef int ps[MAXROWS]
    cdef int k = _load(rows, xs, zs, ps)
    cdef u64 m = mask
    cdef u64 bit
    cdef int j, part, i, piv
    cdef u64 px, pz
    cdef int pp
    while m:
        j = __builtin_ctzll(m)
        m &= m - 1
        bit = (<u64>1) << j
        for part in range(2):
            piv = -1
            for i in range(k):
                if ((xs[i] if part == 0 else zs[i]) & bit):
                    piv = i
                    break
            if piv < 0:
                continue
            px = xs[piv]
            pz = zs[piv]
            pp = ps[piv]
            for i in range(piv, k - 1):
                xs[i] = xs[i + 1]
                zs[i] = zs[i + 1]
                ps[i] = ps[i + 1]
            k -= 1
            for i in range(k):
                if ((xs[i] if part == 0 else zs[i]) & bit):
                    _mul(xs[i], zs[i], ps[i], px, pz, pp, &xs[i], &zs[i], &ps[i])
    return [(xs[i], zs[i], ps[i]) for i in range(k)]


def solve(rows, u64 x, u64 z):
    cdef u64 xs[MAXROWS]
    cdef u64 zs[MAXROWS]
    cdef int ps[MAXROWS]
    cdef int k = _load(rows, xs, zs, ps)
    cdef u64 ax = 0, az = 0
    cdef int ap = 0
    cdef int part, j, i, piv
    cdef u64 bit, px, pz, target, cur
    cdef int pp
    for part in range(2):
        target = x if part == 0 else z
        for j in range(64):
            bit = (<u64>1) << j
            piv = -1
            for i in range(k):
                if ((xs[i] if part == 0 else zs[i]) & bit):
                    piv = i
                    break
            if piv < 0:
                continue
            px = xs[piv]
            pz = zs[piv]
            pp = ps[piv]
            for i in range(piv, k - 1):
                xs[i] = xs[i + 1]
                zs[i] = zs[i + 1]
                ps[i] = ps[i + 1]
            k -= 1
            for i in range(k):
                if ((xs[i] if part == 0 else zs[i]) & bit):
                    _mul(xs[i], zs[i], ps[i], px, pz, pp, &xs[i], &zs[i], &ps[i])
            cur = ax if part == 0 else az
            if (cur ^ target) & bit:
                _mul(ax, az, ap, px, pz, pp, &ax, &az, &ap)
        if part == 0 and ax != x:
            return -1
    if ax != x or az != z:
        return -1
    return ap
