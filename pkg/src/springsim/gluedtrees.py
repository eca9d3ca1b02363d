"""Glued binary trees as a spring network, its chain reduction, and a simulated solve.

Vertices are numbered column by column: column 1 is ENTRANCE, column 2n is
EXIT, column ``l`` holds ``2^(l-1)`` vertices for ``l <= n`` and ``2^(2n-l)``
otherwise.  The two leaf columns are joined by a random alternating cycle, and
ENTRANCE and EXIT each carry a unit wall spring, so every diagonal of A is 3.

For column-symmetric motion the coordinates ``z_l = sum_{j in l} x_j / sqrt(N_l)``
obey ``z'' = -A~ z`` with ``A~`` tridiagonal: diagonal 3, off-diagonals
``-sqrt(2)`` except ``-2`` across the glued middle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .blockenc import simulation_cost_model
from .dynamics import NormalModes, SpectralPropagator, evolve_hamiltonian
from .errors import InvalidInput, ResourceLimit
from .estimate import born_samples
from .netcore import (ClassicalState, SpringNetwork, build_matrices, encode_primary,
                      hamiltonian, scaled_stiffness)

GRID_STEP = math.pi / (20 * math.sqrt(6))
SOLVE_MAX_N = 10


def column_sizes(n: int) -> list:
    return [2 ** (l - 1) if l <= n else 2 ** (2 * n - l) for l in range(1, 2 * n + 1)]


@dataclass(frozen=True, eq=False)
class GluedTreesInstance:
    depth_n: int
    labels: tuple
    network: SpringNetwork
    entrance_id: int
    exit_id: int
    columns: tuple

    def label_string(self, vertex: int) -> str:
        return format(self.labels[vertex], f"0{2 * self.depth_n}b")

    def wall_oracle(self, label: int) -> float:
        """kappa_jj of the vertex carrying ``label`` (0 for unknown labels)."""
        vertex = self._by_label.get(label)
        if vertex is None:
            return 0.0
        return self._wall[vertex]

    def __post_init__(self):
        object.__setattr__(self, "_by_label", {lab: v for v, lab in enumerate(self.labels)})
        wall = [0.0] * self.network.n_masses
        for j, k, kappa in self.network.springs:
            if j == k:
                wall[j] = kappa
        object.__setattr__(self, "_wall", wall)


def generate(n: int, seed: int) -> GluedTreesInstance:
    if n < 2:
        raise InvalidInput("depth must be at least 2")
    sizes = column_sizes(n)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    columns = tuple(np.arange(starts[i], starts[i + 1]) for i in range(2 * n))
    N = int(starts[-1])
    rng = np.random.default_rng(seed)
    springs = []
    for l in range(n - 1):
        for p, parent in enumerate(columns[l]):
            for c in (2 * p, 2 * p + 1):
                springs.append((int(parent), int(columns[l + 1][c]), 1.0))
    for l in range(n, 2 * n - 1):
        for p, child in enumerate(columns[l + 1]):
            for c in (2 * p, 2 * p + 1):
                springs.append((int(columns[l][c]), int(child), 1.0))
    left = rng.permutation(columns[n - 1])
    right = rng.permutation(columns[n])
    m = len(left)
    gluing = set()
    for i in range(m):
        gluing.add((int(left[i]), int(right[i])))
        gluing.add((int(left[(i + 1) % m]), int(right[i])))
    springs.extend((a, b, 1.0) for a, b in sorted(gluing))
    springs.append((0, 0, 1.0))
    springs.append((N - 1, N - 1, 1.0))
    labels = set()
    ordered = []
    while len(ordered) < N:
        lab = int(rng.integers(0, 1 << (2 * n), dtype=np.uint64)) if 2 * n < 64 else \
            int.from_bytes(rng.bytes((2 * n + 7) // 8), "big") % (1 << (2 * n))
        if lab not in labels:
            labels.add(lab)
            ordered.append(lab)
    net = SpringNetwork(np.ones(N), springs, 3)
    return GluedTreesInstance(n, tuple(ordered), net, 0, N - 1, columns)


@dataclass(frozen=True, eq=False)
class ReducedChain:
    n: int
    matrix: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def offdiagonal(self) -> np.ndarray:
        return np.diag(self.matrix, 1).copy()

    def modes(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors of the chain."""
        w, V = eigh_tridiagonal(self.diagonal, self.offdiagonal)
        return w, V


def reduce_to_chain(n: int) -> ReducedChain:
    if n < 2:
        raise InvalidInput("depth must be at least 2")
    off = np.full(2 * n - 1, -math.sqrt(2))
    off[n - 1] = -2.0
    M = np.diag(np.full(2 * n, 3.0)) + np.diag(off, 1) + np.diag(off, -1)
    return ReducedChain(n, M)


def column_projection(instance: GluedTreesInstance, x: np.ndarray) -> np.ndarray:
    return np.array([x[col].sum() / math.sqrt(len(col)) for col in instance.columns])


def column_lift(instance: GluedTreesInstance, z: np.ndarray) -> np.ndarray:
    """Column-symmetric displacement vector with column coordinates z."""
    x = np.zeros(instance.network.n_masses)
    for zl, col in zip(z, instance.columns):
        x[col] = zl / math.sqrt(len(col))
    return x


def _exit_weights(chain: ReducedChain):
    w, V = chain.modes()
    gamma = np.sqrt(np.clip(w, 0, None))
    c = V[-1, :] * V[0, :]
    return gamma, c, V


def exit_velocity(chain: ReducedChain, times) -> np.ndarray:
    """``z'_2n(t)`` for the start ``z(0) = 0, z'(0) = e_1``."""
    gamma, c, _ = _exit_weights(chain)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return np.cos(np.outer(times, gamma)) @ c


def p_exit(chain: ReducedChain, T: float) -> float:
    """Time average of ``z'_2n(t)^2`` over [0, T], integrated in closed form."""
    if not T > 0:
        raise InvalidInput("T must be positive")
    gamma, c, _ = _exit_weights(chain)
    plus = gamma[:, None] + gamma[None, :]
    minus = gamma[:, None] - gamma[None, :]
    # (1/T) int_0^T cos(a t) cos(b t) dt
    avg = 0.5 * (np.sinc(plus * T / np.pi) + np.sinc(minus * T / np.pi))
    return float(c @ avg @ c)


def p_exit_limit(chain: ReducedChain) -> tuple:
    """Infinite-time average computed two ways: from exit weights and from ENTRANCE overlaps."""
    _, c, V = _exit_weights(chain)
    return 0.5 * float(np.sum(c ** 2)), 0.5 * float(np.sum(V[0, :] ** 4))


def trial_vector(n: int) -> np.ndarray:
    l = np.arange(1, 2 * n + 1)
    return np.where(l <= n, 2.0 ** (-(2 + n - l) / 2), 2.0 ** (-(1 + l - n) / 2))


@dataclass(frozen=True)
class SpectralReport:
    gaps: tuple
    Delta: float
    Delta_prime: float
    gap_relation_ok: bool
    gap_relation_half_ok: bool
    lambda1_overlap: float
    v1_residual: float
    v1_residual_normalized: float
    smallest_eigenvalue: float


def spectral_report(chain: ReducedChain) -> SpectralReport:
    """Frequency gaps, the chain gap, ENTRANCE overlap of the lowest mode, trial residual.

    ``v1_residual`` is ``|A~ v1|`` for the unnormalized trial vector (it equals
    ``2^(-n/2)``); the normalized value is reported alongside.

    ``gap_relation_ok`` tests ``Delta >= Delta' / sqrt(6)``.  Since
    ``1 - sqrt(1 - u) >= u / 2`` is the sharp elementary bound, the guaranteed
    relation is ``Delta >= Delta' / (2 sqrt(6))``, reported as ``gap_relation_half_ok``.
    """
    w, V = chain.modes()
    gamma = np.sqrt(np.clip(w, 0, None))
    gaps = np.diff(gamma)
    Delta = float(gaps.min())
    Delta_prime = float(np.diff(w).min())
    v1 = trial_vector(chain.n)
    res = float(np.linalg.norm(chain.matrix @ v1))
    return SpectralReport(
        gaps=tuple(float(g) for g in gaps),
        Delta=Delta,
        Delta_prime=Delta_prime,
        gap_relation_ok=bool(Delta >= Delta_prime / math.sqrt(6)),
        gap_relation_half_ok=bool(Delta >= Delta_prime / (2 * math.sqrt(6))),
        lambda1_overlap=float(abs(V[0, 0])),
        v1_residual=res,
        v1_residual_normalized=res / float(np.linalg.norm(v1)),
        smallest_eigenvalue=float(w[0]),
    )


@dataclass(frozen=True)
class ExitTime:
    found: bool
    t: float | None
    value: float | None
    t_max: float


def find_exit_time(chain: ReducedChain, threshold: float, t_max: float | None = None,
                   step: float = GRID_STEP, chunk: int = 65536) -> ExitTime:
    """First grid time with ``z'_2n(t)^2 >= threshold``, scanning up to ``10 n^4``."""
    if not 0 < threshold < 1:
        raise InvalidInput("threshold must lie in (0, 1)")
    if t_max is None:
        t_max = 10.0 * chain.n ** 4
    gamma, c, _ = _exit_weights(chain)
    total = int(math.floor(t_max / step)) + 1
    for start in range(0, total, chunk):
        ts = np.arange(start, min(start + chunk, total)) * step
        vals = (np.cos(np.outer(ts, gamma)) @ c) ** 2
        hit = np.flatnonzero(vals >= threshold)
        if hit.size:
            i = hit[0]
            return ExitTime(True, float(ts[i]), float(vals[i]), t_max)
    return ExitTime(False, None, None, t_max)


def default_threshold(n: int) -> float:
    return 1.0 / (4 * n)


@dataclass(frozen=True)
class SolveReport:
    exit_label: int | None
    quantum_query_count: int
    shots: int
    oracle_queries: int
    time: float
    found: bool


def solve_instance(instance: GluedTreesInstance, rng_seed: int, threshold: float | None = None,
                   fail_bound: float = 1e-6, eps: float = 0.01) -> SolveReport:
    """Simulate the protocol: evolve the encoded state, sample, verify with the wall oracle.

    The evolution time comes from the reduced chain; ``ceil(ln(1/fail_bound)/threshold)``
    Born samples are drawn, each landing on ENTRANCE or EXIT with its kinetic weight.
    A sampled mass is checked by one query of ``kappa_jj`` on its label.  The query
    count adds the simulation cost model per shot.
    """
    n = instance.depth_n
    if n > SOLVE_MAX_N:
        raise ResourceLimit(f"solve is limited to n <= {SOLVE_MAX_N}")
    if threshold is None:
        threshold = default_threshold(n)
    hit = find_exit_time(reduce_to_chain(n), threshold)
    if not hit.found:
        return SolveReport(None, 0, 0, 0, float("nan"), False)
    net = instance.network
    N = net.n_masses
    v0 = np.zeros(N)
    v0[instance.entrance_id] = 1.0
    psi0 = encode_primary(net, ClassicalState(np.zeros(N), v0))
    prop = SpectralPropagator(hamiltonian(build_matrices(net)))
    psi = evolve_hamiltonian(None, psi0, hit.t, prop)
    shots = int(math.ceil(math.log(1 / fail_bound) / threshold))
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    per_shot = math.ceil(simulation_cost_model(net, hit.t, eps).queries)
    entrance_label = instance.labels[instance.entrance_id]
    oracle = 0
    used = 0
    checked = set()
    for idx in born_samples(psi.amplitudes, shots, rng):
        used += 1
        if idx >= N:
            continue
        label = instance.labels[idx]
        if label in checked:
            continue
        checked.add(label)
        oracle += 1
        if instance.wall_oracle(label) == 1.0 and label != entrance_label:
            return SolveReport(label, used * per_shot + oracle, used, oracle, hit.t, True)
    return SolveReport(None, used * per_shot + oracle, used, oracle, hit.t, False)


def classical_random_walk(instance: GluedTreesInstance, max_queries: int, seed: int):
    """Random walk from ENTRANCE that queries one neighbour list per step.

    Returns ``(found, queries)``.  Demonstration only.
    """
    rng = np.random.default_rng(seed)
    neighbours = [[] for _ in range(instance.network.n_masses)]
    for j, k, _ in instance.network.springs:
        if j != k:
            neighbours[j].append(k)
            neighbours[k].append(j)
    v = instance.entrance_id
    for q in range(1, max_queries + 1):
        v = neighbours[v][rng.integers(len(neighbours[v]))]
        if v == instance.exit_id:
            return True, q
    return False, max_queries


def full_exit_series(instance: GluedTreesInstance, times) -> np.ndarray:
    """``x'_EXIT(t)^2`` from the full network started at ``x'_ENTRANCE = 1``."""
    net = instance.network
    modes = NormalModes(scaled_stiffness(net))
    v0 = np.zeros(net.n_masses)
    v0[instance.entrance_id] = 1.0
    out = []
    for t in times:
        _, ydot = modes.propagate(np.zeros(net.n_masses), v0, t)
        out.append(ydot[instance.exit_id] ** 2)
    return np.array(out)
