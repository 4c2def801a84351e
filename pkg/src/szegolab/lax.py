"""Hankel, Toeplitz and shift operators in mode components, and Lax-pair checks.

Vectors are finite mode sequences.  The antilinear Hankel operators conjugate
their argument once: ``[H_u h]_n = sum_m a_{n+m} conj(h_m)`` and ``K_u`` uses
``a_{n+m+1}``.
"""

from enum import Enum

import numpy as np
from scipy.linalg import hankel as _hankel_matrix
from scipy.linalg import toeplitz as _toeplitz_matrix
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, svds

from .flow import rhs_fast
from .kernels import Family
from .state import as_amplitudes


class OperatorKind(str, Enum):
    H = "H_u"
    K = "K_u"
    T = "T_b"
    S = "S"
    S_DAGGER = "S_dagger"
    B = "B_u"
    C = "C_u"
    D = "D_u"
    A = "A_u"


LAX_FAMILIES = (Family.SZEGO, Family.TRUNCATED, Family.BETA, Family.EXTENDED)


def _pad(v, n):
    out = np.zeros(n, dtype=complex)
    m = min(n, len(v))
    out[:m] = v[:m]
    return out


# -- primitives on a fixed working length ------------------------------------


def hankel_apply(a, h, shift=0):
    """sum_m a_{n+m+shift} conj(h_m) for n < len(h)."""
    L = len(h)
    col = _pad(a[shift:], L)
    row = _pad(a[shift + L - 1 :], L)
    return _hankel_matrix(col, row) @ np.conj(h)


def symbol_abs2(a):
    """Fourier coefficients of |u|^2 at k = -(N-1) .. N-1."""
    return np.correlate(a, a, "full")


def toeplitz_apply(symbol, h):
    """Pi(b h) with ``symbol`` holding b_k for k = -K..K (odd length, centred)."""
    L = len(h)
    K = (len(symbol) - 1) // 2
    pos = _pad(symbol[K:], L)
    neg = _pad(symbol[K::-1], L)
    return _toeplitz_matrix(pos, neg) @ h


def shift(h):
    return np.concatenate(([0.0 + 0j], h))


def shift_dagger(h):
    return np.array(h[1:], dtype=complex)


class Operators:
    """Lax operators of a state, acting on vectors of one working length."""

    def __init__(self, u, length, beta=0.0, delta1=0.0, delta2=0.0):
        self.a = np.asarray(as_amplitudes(u), dtype=complex)
        self.L = length
        self.beta = beta
        self.delta1 = delta1
        self.delta2 = delta2
        self.sym_u = symbol_abs2(self.a)
        self.sym_su = symbol_abs2(self.a[1:]) if self.a.size > 1 else np.zeros(1, complex)

    def H(self, h, a=None):
        return hankel_apply(self.a if a is None else a, h, 0)

    def K(self, h, a=None):
        return hankel_apply(self.a if a is None else a, h, 1)

    def T(self, h, symbol=None):
        return toeplitz_apply(self.sym_u if symbol is None else symbol, h)

    def B(self, h):
        return 0.5j * self.H(self.H(h)) - 1j * self.T(h)

    def C(self, h):
        return 0.5j * self.K(self.K(h)) - 1j * self.T(h)

    def B_shifted(self, h):
        sa = self.a[1:]
        return 0.5j * self.H(self.H(h, sa), sa) - 1j * self.T(h, self.sym_su)

    def D(self, h):
        return -1j * self.T(h, _sym_sub(self.sym_u, self.sym_su))

    def A_beta(self, h):
        return self.C(h) - self.beta * self.B_shifted(h)

    def A_extended(self, h):
        n = np.arange(len(h))
        g = abs(self.a[0]) ** 2
        return self.A_beta(h) - 1j * g * (self.delta1 + self.delta2 * (2 * n + 1)) * h


def _sym_sub(s1, s2):
    K1 = (len(s1) - 1) // 2
    K2 = (len(s2) - 1) // 2
    out = np.array(s1, dtype=complex)
    out[K1 - K2 : K1 + K2 + 1] -= s2
    return out


def apply_operator(kind, u, h, symbol=None, beta=0.0, delta1=0.0, delta2=0.0):
    """Apply one operator to ``h``; lengths of ``u`` (or ``symbol``) and ``h`` must agree."""
    kind = OperatorKind(kind)
    h = np.asarray(h, dtype=complex)
    if kind == OperatorKind.S:
        return shift(h)
    if kind == OperatorKind.S_DAGGER:
        return shift_dagger(h)
    if kind == OperatorKind.T:
        b = np.asarray(symbol if symbol is not None else u, dtype=complex)
        if b.size != 2 * h.size - 1:
            raise ValueError("symbol needs 2*len(h)-1 coefficients (modes -(L-1)..L-1)")
        return toeplitz_apply(b, h)
    a = as_amplitudes(u)
    if a.size != h.size:
        raise ValueError(f"length mismatch: state {a.size}, vector {h.size}")
    ops = Operators(a, h.size, beta, delta1, delta2)
    return {
        OperatorKind.H: ops.H,
        OperatorKind.K: ops.K,
        OperatorKind.B: ops.B,
        OperatorKind.C: ops.C,
        OperatorKind.D: ops.D,
        OperatorKind.A: ops.A_extended,
    }[kind](h)


# -- spectra ------------------------------------------------------------------


def k_matrix(state, size):
    """Descending singular values of the size x size Hankel block a_{n+m+1}."""
    a = as_amplitudes(state)
    if size > a.size // 2:
        raise ValueError(f"size {size} exceeds Nmax/2 = {a.size // 2}")
    G = _hankel_matrix(a[1 : size + 1], a[size : 2 * size])
    return np.linalg.svd(G, compute_uv=False)


def k_spectrum(state, top=None, method="auto"):
    """Singular values of the full Hankel matrix a_{n+m+1}, zero past the cutoff.

    Unlike a square block this uses every stored mode, so the values are the
    exact singular values of K_u restricted to the Galerkin space.  With
    ``top`` set and more than ``DENSE_LIMIT`` modes, ``method="auto"`` switches
    to Lanczos iteration on an FFT matvec.
    """
    a = as_amplitudes(state)
    L = a.size - 1
    if method == "iterative" or (method == "auto" and top is not None and L > DENSE_LIMIT):
        return _top_singular_values(a[1:], top)
    G = _hankel_matrix(a[1:], np.zeros(L, complex))
    sv = np.linalg.svd(G, compute_uv=False)
    return sv if top is None else sv[:top]


DENSE_LIMIT = 1024


def _top_singular_values(c, top):
    L = c.size
    if not np.any(c):
        return np.zeros(top)

    def mv(x):
        # (G x)_i = sum_j c_{i+j} x_j
        return fftconvolve(c, np.ravel(x)[::-1])[L - 1 : 2 * L - 1]

    def rmv(x):
        # G is complex symmetric, so G^H x = conj(G conj(x))
        return np.conj(mv(np.conj(np.ravel(x))))

    op = LinearOperator((L, L), matvec=mv, rmatvec=rmv, dtype=complex)
    v0 = np.ones(L, dtype=complex) / np.sqrt(L)
    sv = svds(op, k=top, tol=1e-14, v0=v0, return_singular_vectors=False)
    return np.sort(sv)[::-1]


def h_spectrum(state, top=None):
    a = as_amplitudes(state)
    G = _hankel_matrix(a, np.zeros(a.size, complex))
    sv = np.linalg.svd(G, compute_uv=False)
    return sv if top is None else sv[:top]


def numerical_rank(sv, rel=1e-10):
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel * sv[0]))


def spectrum_drift(states, top=5, which="K"):
    """Largest change of the top singular values, relative to sigma_1 at the start."""
    f = k_spectrum if which == "K" else h_spectrum
    ref = f(states[0], top)
    if ref[0] == 0:
        return 0.0
    worst = 0.0
    for s in states[1:]:
        sv = f(s, top)
        worst = max(worst, float(np.max(np.abs(sv - ref)) / ref[0]))
    return worst


# -- Lax residuals ------------------------------------------------------------


def _op_params(spec):
    if spec.family == Family.SZEGO:
        return 0.0
    if spec.family == Family.TRUNCATED:
        return 1.0
    return spec.beta


def lax_residual(spec, state, probe_count=8, pair="K", seed=0):
    """Max relative mismatch of dL/dt = [A, L] on random probe vectors.

    ``pair`` picks (C_u, K_u) or, for the cubic Szego kernel, (B_u, H_u).
    States reaching the upper half of the cutoff are zero-extended first, so
    the time derivative and all operator products are free of truncation.
    """
    if spec.family not in LAX_FAMILIES:
        raise ValueError(f"no known Lax structure for family {spec.family.value}")
    if pair == "H" and (spec.family != Family.SZEGO or spec.alpha != 0):
        raise ValueError("the (B_u, H_u) pair only applies to the pure Szego kernel")
    a = np.asarray(as_amplitudes(state), dtype=complex)
    if np.any(a[(a.size + 1) // 2 :] != 0):
        # zero-extend so the cubic term is not clipped by the cutoff
        a = _pad(a, 2 * a.size)
    nmax = a.size
    if not np.any(a):
        return 0.0
    udot = rhs_fast(spec, a)
    W = 2 * nmax
    beta = _op_params(spec)
    ops = Operators(a, W, beta, spec.delta1, spec.delta2)
    if pair == "H":
        L_op, A_op, dL = ops.H, ops.B, (lambda h: ops.H(h, udot))
    elif spec.family == Family.EXTENDED:
        L_op, A_op, dL = ops.K, ops.A_extended, (lambda h: ops.K(h, udot))
    else:
        L_op, A_op, dL = ops.K, ops.A_beta, (lambda h: ops.K(h, udot))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probe_count):
        h = np.zeros(W, complex)
        h[:nmax] = (rng.normal(size=nmax) + 1j * rng.normal(size=nmax)) / np.sqrt(2)
        lhs = dL(h)
        akh, kah = A_op(L_op(h)), L_op(A_op(h))
        scale = max(np.linalg.norm(lhs), np.linalg.norm(akh), np.linalg.norm(kah))
        worst = max(worst, float(np.linalg.norm(lhs - (akh - kah)) / scale))
    return worst
