"""Spring networks, their matrices, and the amplitude encodings of their motion.

A network of N masses obeys ``M x'' = -F x``.  With ``y = sqrt(M) x`` this is
``y'' = -A y`` where ``A = M^-1/2 F M^-1/2 = B B^T`` and ``B`` has one column per
spring.  The encoded state stacks ``sqrt(M) x'`` and ``i B^T y`` and normalizes
by the total energy, so that it evolves under ``H = -[[0, B], [B^T, 0]]``.

Indices are 0-based in memory and 1-based in files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateState, InvalidInput

PSD_CLIP = 1e-9
RANK_TOL = 1e-10
NORM_TOL = 1e-10

ENCODING_KINDS = ("primary", "generalized", "alternative")


@dataclass(frozen=True, eq=False)
class SpringNetwork:
    """Masses plus a sorted list of springs ``(j, k, kappa)`` with ``j <= k``.

    ``j == k`` is a spring from mass ``j`` to the wall.  Zero-valued springs are
    dropped.  ``sparsity_d`` counts nonzeros per row of the symmetric spring
    matrix, diagonal included; when omitted it is the smallest valid value.
    """

    masses: np.ndarray
    springs: tuple
    sparsity_d: int | None = None

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float).reshape(-1)
        if masses.size == 0:
            raise InvalidInput("network needs at least one mass")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise InvalidInput("masses must be finite and strictly positive")
        n = masses.size
        merged = {}
        for entry in self.springs:
            if len(entry) != 3:
                raise InvalidInput(f"spring entry {entry!r} is not (j, k, kappa)")
            j, k, kappa = int(entry[0]), int(entry[1]), float(entry[2])
            if j > k:
                j, k = k, j
            if j < 0 or k >= n:
                raise InvalidInput(f"spring ({j}, {k}) out of range for {n} masses")
            if not np.isfinite(kappa) or kappa < 0:
                raise InvalidInput(f"spring ({j}, {k}) has invalid constant {kappa}")
            if (j, k) in merged:
                raise InvalidInput(f"duplicate spring ({j}, {k})")
            merged[(j, k)] = kappa
        springs = tuple((j, k, kappa) for (j, k), kappa in sorted(merged.items()) if kappa > 0)
        row_count = np.zeros(n, dtype=int)
        for j, k, _ in springs:
            row_count[j] += 1
            if k != j:
                row_count[k] += 1
        needed = max(int(row_count.max()), 1)
        d = needed if self.sparsity_d is None else int(self.sparsity_d)
        if d < needed:
            raise InvalidInput(f"a row has {needed} nonzeros but sparsity_d = {d}")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "springs", springs)
        object.__setattr__(self, "sparsity_d", d)

    @property
    def n_masses(self) -> int:
        return self.masses.size

    @property
    def n_springs(self) -> int:
        return len(self.springs)

    @property
    def m_max(self) -> float:
        return float(self.masses.max())

    @property
    def m_min(self) -> float:
        return float(self.masses.min())

    @property
    def kappa_max(self) -> float:
        return max((s[2] for s in self.springs), default=0.0)

    @property
    def aleph(self) -> float:
        return self.kappa_max / self.m_min

    def spring_arrays(self):
        """Return ``(j, k, kappa)`` as three aligned arrays."""
        if not self.springs:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        j, k, kappa = zip(*self.springs)
        return np.array(j), np.array(k), np.array(kappa, dtype=float)

    def kappa_matrix(self) -> np.ndarray:
        K = np.zeros((self.n_masses, self.n_masses))
        j, k, kappa = self.spring_arrays()
        K[j, k] = kappa
        K[k, j] = kappa
        return K


@dataclass(frozen=True, eq=False)
class EdgeIndex:
    """Bijection between springs ``(j, k)`` and columns of ``B``."""

    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {p: i for i, p in enumerate(self.pairs)})

    def __len__(self):
        return len(self.pairs)

    def position(self, j: int, k: int) -> int:
        if j > k:
            j, k = k, j
        try:
            return self._lookup[(j, k)]
        except KeyError:
            raise InvalidInput(f"no spring between {j} and {k}") from None

    def __contains__(self, pair) -> bool:
        j, k = pair
        return (min(j, k), max(j, k)) in self._lookup

    def pair(self, position: int) -> tuple:
        return self.pairs[position]


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    m_sqrt: np.ndarray
    F: np.ndarray
    A: np.ndarray
    B: np.ndarray
    edge_index: EdgeIndex

    @property
    def n(self) -> int:
        return self.m_sqrt.size

    @property
    def m(self) -> int:
        return len(self.edge_index)


@dataclass(frozen=True, eq=False)
class ClassicalState:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise InvalidInput("x and v must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidInput("state entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True, eq=False)
class EncodedState:
    """Unit amplitude vector plus the energy that normalized it.

    ``n_oscillators`` is the size of the first (velocity) block.
    """

    amplitudes: np.ndarray
    energy_E: float
    encoding_kind: str
    n_oscillators: int
    t: float = 0.0

    def __post_init__(self):
        if self.encoding_kind not in ENCODING_KINDS:
            raise InvalidInput(f"unknown encoding kind {self.encoding_kind!r}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def first_block(self) -> np.ndarray:
        return self.amplitudes[: self.n_oscillators]

    @property
    def second_block(self) -> np.ndarray:
        return self.amplitudes[self.n_oscillators:]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def with_amplitudes(self, amplitudes, t=None) -> "EncodedState":
        return EncodedState(amplitudes, self.energy_E, self.encoding_kind,
                            self.n_oscillators, self.t if t is None else t)


def _check_state(net: SpringNetwork, state: ClassicalState):
    if state.x.size != net.n_masses:
        raise InvalidInput(f"state has {state.x.size} entries, network has {net.n_masses} masses")


def stiffness_matrix(net: SpringNetwork) -> np.ndarray:
    """F with ``f_jj = sum_k kappa_jk`` (wall spring included) and ``f_jk = -kappa_jk``."""
    K = net.kappa_matrix()
    F = -K
    np.fill_diagonal(F, K.sum(axis=1))
    return F


def scaled_stiffness(net: SpringNetwork) -> np.ndarray:
    inv = 1.0 / np.sqrt(net.masses)
    return stiffness_matrix(net) * np.outer(inv, inv)


def incidence_factor(net: SpringNetwork) -> np.ndarray:
    """N x M matrix whose column for spring (j, k) is sqrt(kappa) (e_j - e_k) / sqrt(m)."""
    j, k, kappa = net.spring_arrays()
    B = np.zeros((net.n_masses, len(kappa)))
    cols = np.arange(len(kappa))
    root = np.sqrt(kappa)
    B[j, cols] = root / np.sqrt(net.masses[j])
    off = j != k
    B[k[off], cols[off]] = -root[off] / np.sqrt(net.masses[k[off]])
    return B


def build_matrices(net: SpringNetwork) -> SystemMatrices:
    return SystemMatrices(
        m_sqrt=np.sqrt(net.masses),
        F=stiffness_matrix(net),
        A=scaled_stiffness(net),
        B=incidence_factor(net),
        edge_index=EdgeIndex(tuple((j, k) for j, k, _ in net.springs)),
    )


def psd_eigh(A: np.ndarray):
    """Eigendecomposition of a symmetric PSD matrix with round-off negatives clipped to 0."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput("matrix must be square")
    scale = max(float(np.abs(A).max(initial=0.0)), 1e-300)
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * scale):
        raise InvalidInput("matrix is not symmetric")
    w, V = np.linalg.eigh((A + A.T) / 2)
    norm = max(float(np.abs(w).max(initial=0.0)), 1e-300)
    if w.size and w[0] < -PSD_CLIP * norm:
        raise InvalidInput(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    return np.clip(w, 0.0, None), V


def sqrtm_psd(A: np.ndarray) -> np.ndarray:
    w, V = psd_eigh(A)
    return (V * np.sqrt(w)) @ V.T


def spring_displacements(net: SpringNetwork, x: np.ndarray) -> np.ndarray:
    """``mu``: sqrt(kappa_jj) x_j for wall springs, sqrt(kappa_jk)(x_j - x_k) otherwise."""
    j, k, kappa = net.spring_arrays()
    x = np.asarray(x, dtype=float)
    diff = np.where(j == k, x[j], x[j] - x[k])
    return np.sqrt(kappa) * diff


def energy(net: SpringNetwork, state: ClassicalState):
    """Return ``(K, U, E)``."""
    _check_state(net, state)
    K = 0.5 * float(np.sum(net.masses * state.v ** 2))
    U = 0.5 * float(np.sum(spring_displacements(net, state.x) ** 2))
    return K, U, K + U


def encode_primary(net: SpringNetwork, state: ClassicalState) -> EncodedState:
    _check_state(net, state)
    _, _, E = energy(net, state)
    if not E > 0:
        raise DegenerateState("state has zero energy and cannot be encoded")
    scale = 1.0 / np.sqrt(2 * E)
    nu = np.sqrt(net.masses) * state.v * scale
    mu = spring_displacements(net, state.x) * scale
    amps = np.concatenate([nu.astype(complex), 1j * mu])
    return EncodedState(amps, E, "primary", net.n_masses, state.t)


def decode_primary(net: SpringNetwork, psi: EncodedState):
    """Return ``(sqrt(m) v, mu)`` recovered from a primary encoding."""
    if psi.encoding_kind != "primary":
        raise InvalidInput("decode_primary needs a primary encoding")
    if psi.n_oscillators != net.n_masses or psi.dim != net.n_masses + net.n_springs:
        raise InvalidInput("encoded state does not match the network")
    scale = np.sqrt(2 * psi.energy_E)
    return scale * psi.first_block.real, scale * psi.second_block.imag


def positions_from_mu(net: SpringNetwork, mu: np.ndarray) -> np.ndarray:
    """Least-squares displacements for given spring terms.

    Components in the kernel of A (free translations) are not recoverable and
    come back as zero.
    """
    j, k, kappa = net.spring_arrays()
    D = np.zeros((len(kappa), net.n_masses))
    rows = np.arange(len(kappa))
    D[rows, j] = np.sqrt(kappa)
    off = j != k
    D[rows[off], k[off]] = -np.sqrt(kappa[off])
    x, *_ = np.linalg.lstsq(D, np.asarray(mu, dtype=float), rcond=None)
    return x


def hamiltonian(mat: SystemMatrices) -> np.ndarray:
    n, m = mat.n, mat.m
    H = np.zeros((n + m, n + m))
    H[:n, n:] = -mat.B
    H[n:, :n] = -mat.B.T
    return H


def encode_generalized(A: np.ndarray, y, ydot) -> EncodedState:
    w, V = psd_eigh(A)
    y = np.asarray(y, dtype=float).reshape(-1)
    ydot = np.asarray(ydot, dtype=float).reshape(-1)
    if y.size != w.size or ydot.size != w.size:
        raise InvalidInput("y and ydot must match the size of A")
    root_y = V @ (np.sqrt(w) * (V.T @ y))
    E = 0.5 * float(ydot @ ydot) + 0.5 * float(root_y @ root_y)
    if not E > 0:
        raise DegenerateState("state has zero energy and cannot be encoded")
    amps = np.concatenate([ydot.astype(complex), 1j * root_y]) / np.sqrt(2 * E)
    return EncodedState(amps, E, "generalized", w.size)


def range_projector_parts(A: np.ndarray):
    """Eigenvectors spanning range(A) and their eigenvalues, using the rank tolerance."""
    w, V = psd_eigh(A)
    keep = w > RANK_TOL * max(float(w.max(initial=0.0)), 1e-300)
    return w[keep], V[:, keep]


def encode_alternative(mat: SystemMatrices, y, ydot) -> EncodedState:
    """Encoding ``(P y; -i B^+ P ydot) / sqrt(2 F)`` with the conserved quantity F.

    Uses ``B^+ = B^T A^+``, so ``(B^+)^T B^+ = A^+`` and no pseudo-inverse of B
    is formed explicitly.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    ydot = np.asarray(ydot, dtype=float).reshape(-1)
    if y.size != mat.n or ydot.size != mat.n:
        raise InvalidInput("y and ydot must have one entry per mass")
    w, V = range_projector_parts(mat.A)
    cy = V.T @ y
    cv = V.T @ ydot
    Py = V @ cy
    Bpv = mat.B.T @ (V @ (cv / w))
    F = 0.5 * float(cy @ cy) + 0.5 * float(np.sum(cv ** 2 / w))
    if not F > 1e-24 * max(float(y @ y + ydot @ ydot), 1e-300):
        raise DegenerateState("state lies in the kernel of A; F vanishes")
    amps = np.concatenate([Py.astype(complex), -1j * Bpv]) / np.sqrt(2 * F)
    return EncodedState(amps, F, "alternative", mat.n)


# ---------------------------------------------------------------- file format

def network_to_dict(net: SpringNetwork) -> dict:
    return {
        "n": net.n_masses,
        "masses": [float(m) for m in net.masses],
        "springs": [[j + 1, k + 1, float(kappa)] for j, k, kappa in net.springs],
        "d": net.sparsity_d,
    }


def network_from_dict(data: dict) -> SpringNetwork:
    try:
        masses = [float(m) for m in data["masses"]]
        springs = [(int(j) - 1, int(k) - 1, float(kappa)) for j, k, kappa in data["springs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed network description: {exc}") from None
    if "n" in data and int(data["n"]) != len(masses):
        raise InvalidInput(f"n = {data['n']} but {len(masses)} masses listed")
    for j, k, _ in springs:
        if min(j, k) < 0:
            raise InvalidInput("spring indices are 1-based")
    return SpringNetwork(masses, springs, data.get("d"))


def load_network(path) -> SpringNetwork:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read network file {path}: {exc}") from None
    return network_from_dict(data)


def save_network(net: SpringNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net)) + "\n")


# ---------------------------------------------------------------- generators

def random_network(n_masses: int, max_degree: int, seed: int, *, density: float = 0.6,
                   wall_probability: float = 0.5, mass_range=(0.5, 2.0),
                   kappa_range=(0.25, 1.0)) -> SpringNetwork:
    """Seeded random network whose rows have at most ``max_degree`` nonzeros."""
    if n_masses < 1 or max_degree < 1:
        raise InvalidInput("need at least one mass and max_degree >= 1")
    rng = np.random.default_rng(seed)
    masses = rng.uniform(*mass_range, size=n_masses)
    room = np.full(n_masses, max_degree)
    springs = []
    for j in range(n_masses):
        if rng.random() < wall_probability:
            springs.append((j, j, rng.uniform(*kappa_range)))
            room[j] -= 1
    pairs = [(j, k) for j in range(n_masses) for k in range(j + 1, n_masses)]
    for idx in rng.permutation(len(pairs)):
        j, k = pairs[idx]
        if room[j] > 0 and room[k] > 0 and rng.random() < density:
            springs.append((j, k, rng.uniform(*kappa_range)))
            room[j] -= 1
            room[k] -= 1
    if not springs:
        springs.append((0, 0, rng.uniform(*kappa_range)))
    return SpringNetwork(masses, springs, max_degree)


def random_state(n: int, seed: int, scale: float = 1.0) -> ClassicalState:
    rng = np.random.default_rng(seed)
    return ClassicalState(scale * rng.standard_normal(n), scale * rng.standard_normal(n))
