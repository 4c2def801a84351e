"""Mode-space states, norms and conserved charges."""

from dataclasses import dataclass, field
import csv
import json
import math

import numpy as np

from .kernels import KernelSpec

DEFAULT_SOBOLEV = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ModeState:
    """Galerkin-truncated point ``(alpha_0, ..., alpha_{Nmax-1})``."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128).ravel()
        if a.size < 2:
            raise ValueError(f"Nmax must be >= 2, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise ValueError("mode amplitudes must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def nmax(self):
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    @classmethod
    def from_modes(cls, modes, nmax, time=0.0):
        """Build from a sparse ``{n: amplitude}`` mapping."""
        a = np.zeros(nmax, dtype=complex)
        for n, val in modes.items():
            a[int(n)] = val
        return cls(a, time)


def as_amplitudes(state):
    if isinstance(state, ModeState):
        return state.amplitudes
    return np.asarray(state, dtype=np.complex128)


@dataclass
class ChargeSet:
    N: float
    E: float
    H: float
    wiener: float
    sobolev: dict = field(default_factory=dict)
    tail_mass: float = 0.0
    S: float | None = None

    def as_row(self, s_list):
        row = [self.N, self.E, self.H, self.wiener, self.tail_mass]
        row += [self.sobolev[s] for s in s_list]
        row.append(math.nan if self.S is None else self.S)
        return row

    @staticmethod
    def header(s_list):
        return ["N", "E", "H", "wiener", "tail_mass"] + [f"H^{s:g}" for s in s_list] + ["S"]


def sobolev_norm(state, s):
    """sqrt(sum (1+n)^(2s) |alpha_n|^2)."""
    a = as_amplitudes(state)
    weights = (1.0 + np.arange(a.size)) ** (2.0 * s)
    return float(np.sqrt(np.dot(weights, np.abs(a) ** 2)))


def wiener_norm(state):
    return float(np.sum(np.abs(as_amplitudes(state))))


def particle_number(state):
    return float(np.sum(np.abs(as_amplitudes(state)) ** 2))


def energy(state):
    a = as_amplitudes(state)
    return float(np.dot(np.arange(a.size), np.abs(a) ** 2))


def tail_mass(state, fraction=0.1):
    """Share of N carried by the top ``fraction`` of modes."""
    a = as_amplitudes(state)
    w = np.abs(a) ** 2
    total = w.sum()
    if total == 0.0:
        return 0.0
    start = a.size - max(1, int(round(fraction * a.size)))
    return float(w[start:].sum() / total)


def hamiltonian(spec, state, method="fast"):
    """H = (1/4) sum_{n+m=k+l} C conj(a_n a_m) a_k a_l + (alpha/2)|a_0|^2.

    ``method="direct"`` uses the brute-force O(N^3) sum, ``"fast"`` the
    factorized Cauchy-product path.
    """
    from .flow import cubic_term

    a = as_amplitudes(state)
    r = cubic_term(spec, a, method=method)
    return float(0.25 * np.vdot(a, r).real + 0.5 * spec.alpha * abs(a[0]) ** 2)


def charges(spec, state, s_list=DEFAULT_SOBOLEV, method="fast", with_S=False):
    a = as_amplitudes(state)
    cs = ChargeSet(
        N=particle_number(a),
        E=energy(a),
        H=hamiltonian(spec, a, method=method),
        wiener=wiener_norm(a),
        sobolev={float(s): sobolev_norm(a, s) for s in s_list},
        tail_mass=tail_mass(a),
    )
    if with_S and spec.manifold_beta is not None:
        from .manifold import project_L1, reduced_charges

        ms = project_L1(a)
        if ms is not None:
            cs.S = reduced_charges(spec.manifold_beta, ms)[2]
    return cs


@dataclass
class Profile:
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    vmax: float
    theta_at_vmax: float


def position_profile(state, grid_size):
    """Sample u(theta) = sum alpha_n e^{i n theta} and v = u - alpha_0 on a uniform grid."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    a = as_amplitudes(state)
    folded = np.zeros(grid_size, dtype=complex)
    np.add.at(folded, np.arange(a.size) % grid_size, a)
    u = np.fft.ifft(folded) * grid_size
    v = u - a[0]
    theta = 2.0 * np.pi * np.arange(grid_size) / grid_size
    j = int(np.argmax(np.abs(v)))
    return Profile(theta, u, v, float(abs(v[j])), float(theta[j]))


def restrict_residue(state, p, q):
    """Zero every mode with n != p (mod q)."""
    if not (0 <= p < q):
        raise ValueError(f"need 0 <= p < q, got p={p}, q={q}")
    if math.gcd(p, q) != 1:
        raise ValueError(f"p and q must be coprime, got gcd({p},{q})={math.gcd(p, q)}")
    a = np.array(as_amplitudes(state))
    a[np.arange(a.size) % q != p] = 0.0
    t = state.time if isinstance(state, ModeState) else 0.0
    return ModeState(a, t)


# -- serialization ------------------------------------------------------------


def fmt(x):
    return repr(float(x))


def write_state_csv(path, state):
    a = as_amplitudes(state)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "re", "im"])
        for n, z in enumerate(a):
            w.writerow([n, fmt(z.real), fmt(z.imag)])


def read_state_csv(path, time=0.0):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    a = np.zeros(len(rows), dtype=complex)
    for r in rows:
        a[int(r["n"])] = complex(float(r["re"]), float(r["im"]))
    return ModeState(a, time)


def state_to_json(state, kernel=None):
    a = as_amplitudes(state)
    doc = {
        "Nmax": int(a.size),
        "time": float(state.time) if isinstance(state, ModeState) else 0.0,
        "kernel": kernel.to_dict() if kernel is not None else None,
        "re": [float(x) for x in a.real],
        "im": [float(x) for x in a.imag],
    }
    return json.dumps(doc, indent=1)


def state_from_json(text):
    doc = json.loads(text)
    a = np.asarray(doc["re"]) + 1j * np.asarray(doc["im"])
    if a.size != doc["Nmax"]:
        raise ValueError("Nmax does not match the amplitude count")
    kernel = KernelSpec.from_dict(doc["kernel"]) if doc.get("kernel") else None
    return ModeState(a, doc.get("time", 0.0)), kernel

