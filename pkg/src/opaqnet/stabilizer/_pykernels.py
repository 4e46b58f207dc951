"""Pure-Python GF(2)/Pauli kernels.

A signed Pauli string on ``n`` qubits is a triple ``(x, z, p)``: ``x`` and ``z`` are
bit masks (bit ``i`` is register ``i``) and ``p`` is the exponent of ``i`` in front of
the Hermitian operator ``P(x, z) = prod_q i^(x_q z_q) X^(x_q) Z^(z_q)``.  Generators of
a stabilizer group always carry ``p`` in ``{0, 2}`` (a real sign).

This module is the reference implementation; ``_ckernels.pyx`` mirrors it for
``n <= 64`` and is checked against it in the test suite.
"""

GATE_CODES = {"H": 0, "S": 1, "X": 2, "Y": 3, "Z": 4, "CNOT": 5, "CZ": 6}


def pauli_mul(x1, z1, p1, x2, z2, p2):
    """Product of two phased Pauli strings, returned as ``(x, z, p)``."""
    x = x1 ^ x2
    z = z1 ^ z2
    e = (
        p1
        + p2
        + (x1 & z1).bit_count()
        + (x2 & z2).bit_count()
        + 2 * (z1 & x2).bit_count()
        - (x & z).bit_count()
    )
    return x, z, e & 3


def anticommutes(x1, z1, x2, z2):
    return ((x1 & z2).bit_count() + (z1 & x2).bit_count()) & 1


def _conj_one(x, z, p, code, a, b):
    ba = 1 << a
    if code == 0:  # H
        xa = (x >> a) & 1
        za = (z >> a) & 1
        if xa & za:
            p ^= 2
        x = (x & ~ba) | (za << a)
        z = (z & ~ba) | (xa << a)
    elif code == 1:  # S
        xa = (x >> a) & 1
        if xa & (z >> a) & 1:
            p ^= 2
        z ^= xa << a
    elif code == 2:  # X
        if (z >> a) & 1:
            p ^= 2
    elif code == 3:  # Y
        if ((x >> a) ^ (z >> a)) & 1:
            p ^= 2
    elif code == 4:  # Z
        if (x >> a) & 1:
            p ^= 2
    elif code == 5:  # CNOT a -> b
        xa = (x >> a) & 1
        za = (z >> a) & 1
        xb = (x >> b) & 1
        zb = (z >> b) & 1
        if xa & zb & (xb ^ za ^ 1):
            p ^= 2
        x ^= xa << b
        z ^= zb << a
    elif code == 6:  # CZ = H_b CNOT H_b
        x, z, p = _conj_one(x, z, p, 0, b, b)
        x, z, p = _conj_one(x, z, p, 5, a, b)
        x, z, p = _conj_one(x, z, p, 0, b, b)
    else:
        raise ValueError(f"unknown gate code {code}")
    return x, z, p


def conjugate_rows(rows, code, a, b):
    """Conjugate every row by the Clifford ``code`` acting on registers ``a`` (, ``b``)."""
    return [_conj_one(x, z, p, code, a, b) for (x, z, p) in rows]


def eliminate(rows, mask):
    """Generators of the subgroup of ``<rows>`` acting trivially on the ``mask`` registers.

    Rows must pairwise commute and be independent; the result is again an
    independent commuting set.
    """
    rows = list(rows)
    m = mask
    while m:
        j = (m & -m).bit_length() - 1
        m &= m - 1
        bit = 1 << j
        for part in (0, 1):
            piv = -1
            for i, r in enumerate(rows):
                if r[part] & bit:
                    piv = i
                    break
            if piv < 0:
                continue
            px, pz, pp = rows.pop(piv)
            for i, (x, z, p) in enumerate(rows):
                if (x, z)[part] & bit:
                    rows[i] = pauli_mul(x, z, p, px, pz, pp)
    return rows


def solve(rows, x, z):
    """Phase of the product of rows whose bits equal ``(x, z)``; ``-1`` if not in the span."""
    work = list(rows)
    acc = (0, 0, 0)
    tx, tz = x, z
    for part in (0, 1):
        target_bits = tx if part == 0 else tz
        n_bits = max(target_bits.bit_length(), max((r[part].bit_length() for r in work), default=0))
        for j in range(n_bits):
            bit = 1 << j
            piv = -1
            for i, r in enumerate(work):
                if r[part] & bit:
                    piv = i
                    break
            if piv < 0:
                continue
            prow = work.pop(piv)
            for i, r in enumerate(work):
                if r[part] & bit:
                    work[i] = pauli_mul(*r, *prow)
            cur = acc[part]
            if (cur ^ (tx if part == 0 else tz)) & bit:
                acc = pauli_mul(*acc, *prow)
        if part == 0 and acc[0] != tx:
            return -1
    if acc[0] != tx or acc[1] != tz:
        return -1
    return acc[2]
