"""Hot loops: brute-force resonant sums and Cauchy products.

Every routine here exists twice: a numba kernel (loops) and a numpy path
(vectorized index tables / ``np.convolve``).  ``use_jit()`` picks one at call
time; both are oracle-tested against each other.
"""

from functools import lru_cache

import numpy as np

from ._jit import njit, use_jit

SZEGO, TRUNCATED, BETA, MODE_ANCHORED, POWER_PRODUCT, POWER_SUM, EXTENDED = range(7)


@njit(cache=True)
def coupling_scalar(code, beta, gamma, d1, d2, G, anchor, trunc, n, m, k, l):
    prod_zero = n == 0 or m == 0 or k == 0 or l == 0
    if code == SZEGO:
        return 1.0
    if code == TRUNCATED:
        return 1.0 if prod_zero else 0.0
    if code == BETA:
        return 1.0 if prod_zero else 1.0 - beta
    if code == MODE_ANCHORED:
        if n == anchor or m == anchor or k == anchor or l == anchor:
            return 1.0
        return 1.0 - beta
    if code == POWER_PRODUCT:
        if trunc and not prod_zero:
            return 0.0
        return ((n + 1.0) * (m + 1.0) * (k + 1.0) * (l + 1.0)) ** G
    if code == POWER_SUM:
        if trunc and not prod_zero:
            return 0.0
        return (n + m + 1.0) ** G
    # EXTENDED
    if n == 0 and m == 0 and k == 0 and l == 0:
        return gamma
    if (n == 0 or m == 0) and (k == 0 or l == 0):
        return 1.0 + d1 + d2 * (n + m)
    if prod_zero:
        return 1.0
    return 1.0 - beta


def coupling_vec(code, beta, gamma, d1, d2, G, anchor, trunc, n, m, k, l):
    """Vectorized twin of :func:`coupling_scalar` over integer index arrays."""
    n, m, k, l = (np.asarray(i, dtype=np.int64) for i in (n, m, k, l))
    prod_zero = (n == 0) | (m == 0) | (k == 0) | (l == 0)
    shape = np.broadcast(n, m, k, l).shape
    if code == SZEGO:
        return np.ones(shape)
    if code == TRUNCATED:
        return np.where(prod_zero, 1.0, 0.0)
    if code == BETA:
        return np.where(prod_zero, 1.0, 1.0 - beta)
    if code == MODE_ANCHORED:
        hit = (n == anchor) | (m == anchor) | (k == anchor) | (l == anchor)
        return np.where(hit, 1.0, 1.0 - beta)
    if code == POWER_PRODUCT:
        val = ((n + 1.0) * (m + 1.0) * (k + 1.0) * (l + 1.0)) ** G
        return np.where(prod_zero, val, 0.0) if trunc else val
    if code == POWER_SUM:
        val = (n + m + 1.0) ** G
        return np.where(prod_zero, val, 0.0) if trunc else val
    all_zero = (n == 0) & (m == 0) & (k == 0) & (l == 0)
    pair = ((n == 0) | (m == 0)) & ((k == 0) | (l == 0))
    out = np.where(prod_zero, 1.0, 1.0 - beta)
    out = np.where(pair, 1.0 + d1 + d2 * (n + m), out)
    return np.where(all_zero, gamma, out)


# -- brute-force resonant sum -------------------------------------------------


@njit(cache=True)
def _resonant_sum_jit(code, beta, gamma, d1, d2, G, anchor, trunc, a):
    nmax = a.shape[0]
    out = np.zeros(nmax, dtype=np.complex128)
    ac = np.conj(a)
    for n in range(nmax):
        acc = 0.0 + 0.0j
        for m in range(nmax):
            s = n + m
            k_lo = s - (nmax - 1)
            if k_lo < 0:
                k_lo = 0
            k_hi = s if s < nmax - 1 else nmax - 1
            for k in range(k_lo, k_hi + 1):
                l = s - k
                c = coupling_scalar(code, beta, gamma, d1, d2, G, anchor, trunc, n, m, k, l)
                if c != 0.0:
                    acc += c * ac[m] * a[k] * a[l]
        out[n] = acc
    return out


@lru_cache(maxsize=8)
def _resonant_triples(nmax):
    n, m, k = np.meshgrid(np.arange(nmax), np.arange(nmax), np.arange(nmax), indexing="ij")
    l = n + m - k
    keep = (l >= 0) & (l < nmax)
    return n[keep], m[keep], k[keep], l[keep]


def _resonant_sum_numpy(code, beta, gamma, d1, d2, G, anchor, trunc, a):
    n, m, k, l = _resonant_triples(a.shape[0])
    c = coupling_vec(code, beta, gamma, d1, d2, G, anchor, trunc, n, m, k, l)
    terms = c * np.conj(a[m]) * a[k] * a[l]
    return np.bincount(n, weights=terms.real, minlength=a.shape[0]) + 1j * np.bincount(
        n, weights=terms.imag, minlength=a.shape[0]
    )


def resonant_sum(params, a):
    """sum over m,k,l with n+m=k+l (all < Nmax) of C_nmkl conj(a_m) a_k a_l."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if use_jit():
        return _resonant_sum_jit(*params, a)
    return _resonant_sum_numpy(*params, a)


# -- Cauchy products ----------------------------------------------------------


@njit(cache=True)
def _pair_correlate_jit(v, pair_weight):
    nmax = v.shape[0]
    q = np.zeros(2 * nmax - 1, dtype=np.complex128)
    for i in range(nmax):
        vi = v[i]
        for j in range(nmax):
            q[i + j] += vi * v[j]
    if pair_weight.shape[0] > 0:
        for j in range(2 * nmax - 1):
            q[j] *= pair_weight[j]
    out = np.zeros(nmax, dtype=np.complex128)
    for n in range(nmax):
        acc = 0.0 + 0.0j
        for m in range(nmax):
            acc += np.conj(v[m]) * q[n + m]
        out[n] = acc
    return out


def _pair_correlate_numpy(v, pair_weight):
    q = np.convolve(v, v)
    if pair_weight.shape[0] > 0:
        q = q * pair_weight
    return np.correlate(q, v, mode="valid")


_EMPTY = np.zeros(0)
# past this length numpy's C correlate beats the compiled double loop
JIT_CONV_MAX = 64


def cubic_projection_conv(v, pair_weight=None):
    """Pi(|v|^2 v) restricted to modes < len(v) by direct Cauchy products, O(N^2).

    ``pair_weight[j]`` (length 2N-1), when given, multiplies the pair sum
    ``sum_{k+l=j} v_k v_l`` before the outer correlation.
    """
    v = np.ascontiguousarray(v, dtype=np.complex128)
    pw = _EMPTY if pair_weight is None else np.ascontiguousarray(pair_weight, dtype=np.float64)
    if use_jit() and v.shape[0] <= JIT_CONV_MAX:
        return _pair_correlate_jit(v, pw)
    return _pair_correlate_numpy(v, pw)


def _next_fast(n):
    return 1 << int(np.ceil(np.log2(max(n, 2))))


def cubic_projection_fft(v, pair_weight=None):
    """Transform-based twin of :func:`cubic_projection_conv`, O(N log N).

    Without a pair weight the product is formed on a 2N-point grid, which is
    the smallest grid whose aliases never land on modes 0..N-1.
    """
    v = np.asarray(v, dtype=np.complex128)
    nmax = v.shape[0]
    if pair_weight is None:
        grid = _next_fast(2 * nmax)
        u = np.fft.ifft(v, grid) * grid
        return np.fft.fft(np.abs(u) ** 2 * u)[:nmax] / grid
    size = _next_fast(3 * nmax)
    fv = np.fft.fft(v, size)
    q = np.fft.ifft(fv * fv)[: 2 * nmax - 1] * pair_weight
    rev = np.conj(v[::-1])
    full = np.fft.ifft(np.fft.fft(q, size) * np.fft.fft(rev, size))
    return full[nmax - 1 : 2 * nmax - 1]
