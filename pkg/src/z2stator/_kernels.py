"""Compiled amplitude kernels.

Basis index bit ``q`` holds qubit ``q``.  A Pauli string is passed as an
X-mask, a Z-mask and a complex coefficient ``c`` such that the operator is
``c * X^xmask Z^zmask`` (Z factors act first).  Reductions accumulate over
fixed-size blocks and then sum the block partials in order, so results do not
depend on the number of threads.
"""

import numpy as np
from numba import config, njit, prange

# TBB on this platform is too old; OpenMP is threadsafe for concurrent callers.
if config.THREADING_LAYER == "default":
    config.THREADING_LAYER = "omp"

BLOCK = 4096
# Elementwise kernels may reassociate floating point; reductions keep a fixed order.
_ELEMENTWISE = dict(fastmath=True, error_model="numpy")


@njit(cache=True, inline="always")
def _parity(v):
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return v & 1


@njit(cache=True, inline="always")
def _popcount(v):
    v = v - ((v >> 1) & 0x5555555555555555)
    v = (v & 0x3333333333333333) + ((v >> 2) & 0x3333333333333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F0F0F0F0F
    return (v * 0x0101010101010101) >> 56


@njit(cache=True, inline="always")
def _pair_index(i, low):
    """Insert a zero bit at position ``low`` of ``i`` (``low`` is a one-bit mask)."""
    return ((i & ~(low - np.uint64(1))) << np.uint64(1)) | (i & (low - np.uint64(1)))


@njit(cache=True, parallel=True, **_ELEMENTWISE)
def apply_pauli(psi, xmask, zmask, coef):
    n = psi.shape[0]
    if xmask == 0:
        for b in prange(n):
            if _parity(np.uint64(b) & zmask):
                psi[b] = -coef * psi[b]
            else:
                psi[b] = coef * psi[b]
        return
    low = xmask & (~xmask + np.uint64(1))
    if zmask & ~low == 0:
        # signs are fixed: the pivot bit is 0 in bb and 1 in its partner
        f1 = -coef if zmask else coef
        for i in prange(n // 2):
            bb = _pair_index(np.uint64(i), low)
            partner = bb ^ xmask
            a0 = psi[bb]
            psi[bb] = f1 * psi[partner]
            psi[partner] = coef * a0
        return
    for i in prange(n // 2):
        bb = _pair_index(np.uint64(i), low)
        partner = bb ^ xmask
        a0 = psi[bb]
        a1 = psi[partner]
        s0 = -coef if _parity(bb & zmask) else coef
        s1 = -coef if _parity(partner & zmask) else coef
        psi[bb] = s1 * a1
        psi[partner] = s0 * a0


@njit(cache=True, parallel=True, **_ELEMENTWISE)
def rotate_pauli(psi, xmask, zmask, coef, c, s):
    """psi <- (c - i s P) psi."""
    n = psi.shape[0]
    mis = -1j * s
    if xmask == 0:
        for b in prange(n):
            sign = -1.0 if _parity(np.uint64(b) & zmask) else 1.0
            psi[b] = (c + mis * coef * sign) * psi[b]
        return
    low = xmask & (~xmask + np.uint64(1))
    if zmask & ~low == 0:
        f0 = mis * coef
        f1 = -f0 if zmask else f0
        for i in prange(n // 2):
            bb = _pair_index(np.uint64(i), low)
            partner = bb ^ xmask
            a0 = psi[bb]
            a1 = psi[partner]
            psi[bb] = c * a0 + f1 * a1
            psi[partner] = c * a1 + f0 * a0
        return
    for i in prange(n // 2):
        bb = _pair_index(np.uint64(i), low)
        partner = bb ^ xmask
        a0 = psi[bb]
        a1 = psi[partner]
        s0 = -coef if _parity(bb & zmask) else coef
        s1 = -coef if _parity(partner & zmask) else coef
        psi[bb] = c * a0 + mis * s1 * a1
        psi[partner] = c * a1 + mis * s0 * a0


@njit(cache=True, parallel=True)
def expectation_pauli(psi, xmask, zmask, coef):
    n = psi.shape[0]
    nblocks = max(1, n // BLOCK)
    size = n // nblocks
    partial = np.zeros(nblocks, dtype=np.complex128)
    for k in prange(nblocks):
        acc = 0.0 + 0.0j
        for b in range(k * size, (k + 1) * size):
            partner = np.uint64(b) ^ xmask
            s = -1.0 if _parity(partner & zmask) else 1.0
            acc += np.conj(psi[b]) * s * psi[partner]
        partial[k] = acc
    total = 0.0 + 0.0j
    for k in range(nblocks):
        total += partial[k]
    return coef * total


@njit(cache=True, parallel=True)
def z_expectations(psi, zmasks):
    """<Z-string> for each mask in ``zmasks`` in a single sweep."""
    n = psi.shape[0]
    m = zmasks.shape[0]
    nblocks = max(1, n // BLOCK)
    size = n // nblocks
    partial = np.zeros((nblocks, m))
    for k in prange(nblocks):
        for b in range(k * size, (k + 1) * size):
            w = psi[b].real * psi[b].real + psi[b].imag * psi[b].imag
            bb = np.uint64(b)
            for j in range(m):
                if _parity(bb & zmasks[j]):
                    partial[k, j] -= w
                else:
                    partial[k, j] += w
    out = np.zeros(m)
    for k in range(nblocks):
        for j in range(m):
            out[j] += partial[k, j]
    return out


@njit(cache=True, parallel=True, **_ELEMENTWISE)
def phase_by_popcount(psi, mask, table):
    """psi[b] *= table[popcount(b & mask)]."""
    n = psi.shape[0]
    for b in prange(n):
        psi[b] = psi[b] * table[_popcount(np.uint64(b) & mask)]


@njit(cache=True, parallel=True)
def norm_squared(psi):
    n = psi.shape[0]
    nblocks = max(1, n // BLOCK)
    size = n // nblocks
    partial = np.zeros(nblocks)
    for k in prange(nblocks):
        acc = 0.0
        for b in range(k * size, (k + 1) * size):
            acc += psi[b].real * psi[b].real + psi[b].imag * psi[b].imag
        partial[k] = acc
    total = 0.0
    for k in range(nblocks):
        total += partial[k]
    return total
