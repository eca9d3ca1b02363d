"""Block encodings of the incidence factor B and of H built from explicit registers.

The unitary ``U_B^dagger`` is simulated step by step on the register tensor
``(j, k, x, f1, f2)``:

1. uniform superposition over ``d'`` neighbour slots (``d`` rounded up to a power of two),
2. neighbour lookup ``l -> a(j, l)`` (surplus slots point at dummy neighbours with kappa = 0),
3.-6. Hadamards on the comparison register ``x``, an inequality test written to ``f1``,
   and Hadamards again, which leaves amplitude ``count / 2^r`` on ``x = 0, f1 = 0``,
7. ``(j, k) -> (k, j)`` with flag ``f2`` when ``k < j``,
8. ``H Z`` on ``f2``.

Projecting the ancillas ``(x, f1, f2)`` onto zero and the second register's input
onto ``|0>`` gives ``B^T / Lambda`` with ``Lambda = sqrt(2 aleph d')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateState, InvalidInput, ResourceLimit
from .netcore import EncodedState, SpringNetwork, encode_primary, ClassicalState, energy

FULL_UNITARY_CAP = 2048
FULL_H_CAP = 4096
STATEVECTOR_CAP = 1 << 24


@dataclass(frozen=True)
class QuantizationConfig:
    r: int
    r_m: int
    r_kappa: int

    def __post_init__(self):
        if min(self.r, self.r_m, self.r_kappa) < 1:
            raise InvalidInput("all bit counts must be at least 1")


def quantize(value: float, max_value: float, bits: int) -> int:
    """Round-down binary fraction: ``value ~ max_value * q / 2^bits``.

    ``value == max_value`` maps to ``2^bits``.
    """
    if bits < 1:
        raise InvalidInput("bits must be positive")
    if max_value <= 0:
        raise InvalidInput("max_value must be positive")
    if value < 0 or value > max_value:
        raise InvalidInput(f"value {value} outside [0, {max_value}]")
    q = Fraction(value) / Fraction(max_value) * (1 << bits)
    return int(math.floor(q))


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def pad_network(net: SpringNetwork) -> SpringNetwork:
    """Pad to a power-of-two mass count with uncoupled masses of weight m_max.

    Using m_max (rather than 1) leaves m_min, m_max and hence aleph unchanged.
    The count is at least the padded sparsity so every row has d' distinct columns.
    """
    n2 = max(_next_pow2(net.n_masses), _next_pow2(net.sparsity_d))
    if n2 == net.n_masses:
        return net
    masses = np.concatenate([net.masses, np.full(n2 - net.n_masses, net.m_max)])
    return SpringNetwork(masses, net.springs, net.sparsity_d)


def padded_incidence(net: SpringNetwork) -> np.ndarray:
    """N x N^2 matrix whose column ``j*N + k`` (j <= k) is the column of B for spring (j, k)."""
    n = net.n_masses
    out = np.zeros((n, n * n))
    for j, k, kappa in net.springs:
        col = j * n + k
        out[j, col] = math.sqrt(kappa / net.masses[j])
        if k != j:
            out[k, col] = -math.sqrt(kappa / net.masses[k])
    return out


def padded_hamiltonian(net: SpringNetwork) -> np.ndarray:
    Bp = padded_incidence(net)
    n = net.n_masses
    Bsq = np.zeros((n * n, n * n))
    Bsq[np.arange(n) * n, :] = Bp
    return -np.block([[np.zeros_like(Bsq), Bsq], [Bsq.T, np.zeros_like(Bsq)]])


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """A block encoding with its extracted block and measured error.

    ``operator`` is the materialized unitary when ``full`` is set and the block
    otherwise.  ``target`` is unnormalized, so ``lam * block ~ target``.
    """

    operator: np.ndarray
    lam: float
    ancilla_dims: tuple
    target: np.ndarray
    block: np.ndarray
    error: float
    predicted_eps: float
    cfg: QuantizationConfig
    full: bool = False
    network: SpringNetwork | None = None

    def unitarity_error(self) -> float:
        if not self.full:
            raise InvalidInput("only a materialized unitary can be checked")
        U = self.operator
        return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


class _Oracles:
    """Quantized data and neighbour tables shared by every construction route."""

    def __init__(self, net: SpringNetwork, cfg: QuantizationConfig):
        if not net.springs:
            raise InvalidInput("network has no springs")
        self.net = net
        self.cfg = cfg
        n = net.n_masses
        self.n = n
        self.d_pad = _next_pow2(net.sparsity_d)
        self.lam = math.sqrt(2 * net.aleph * self.d_pad)
        kappa = net.kappa_matrix()
        self.m_bar = [quantize(m, net.m_max, cfg.r_m) for m in net.masses]
        self.neighbours = []
        for j in range(n):
            nb = [k for k in range(n) if kappa[j, k] > 0]
            dummies = [k for k in range(n) if kappa[j, k] == 0][: self.d_pad - len(nb)]
            self.neighbours.append(nb + dummies)
        self.k_bar = np.zeros((n, n), dtype=object)
        for j in range(n):
            for k in range(n):
                self.k_bar[j, k] = quantize(kappa[j, k], net.kappa_max, cfg.r_kappa)
        ratio = Fraction(net.m_min) / Fraction(net.m_max)
        self.x_max = np.zeros((n, n), dtype=np.int64)
        for j in range(n):
            for k in range(n):
                self.x_max[j, k] = self._largest_success(int(self.k_bar[j, k]), self.m_bar[j], ratio)

    def _largest_success(self, k_bar: int, m_bar: int, ratio: Fraction) -> int:
        """Largest x in 1..2^r passing the comparison (ties pass), or 0 if none does.

        Success means ``x^2 / 2^2r * aleph * m_max * m_bar / 2^r_m <= kappa_max * k_bar / 2^r_kappa``.
        """
        r, rm, rk = self.cfg.r, self.cfg.r_m, self.cfg.r_kappa
        if m_bar == 0:
            return 1 << r
        bound = Fraction(k_bar * (1 << (2 * r + rm))) * ratio / (m_bar * (1 << rk))
        return min(1 << r, math.isqrt(math.floor(bound)))

    def permutation(self, j: int) -> list:
        """Complete the neighbour table of row j to a permutation of 0..N-1."""
        head = self.neighbours[j]
        rest = [k for k in range(self.n) if k not in head]
        return head + rest


def predicted_error(net: SpringNetwork, cfg: QuantizationConfig) -> float:
    """``2^-r + (m_max/m_min) 2^-r_m + 2^(-r_kappa/2)``, unit constants."""
    return (2.0 ** -cfg.r + net.m_max / net.m_min * 2.0 ** -cfg.r_m
            + 2.0 ** (-cfg.r_kappa / 2))


def _fwht(T: np.ndarray, axis: int, bits: int) -> np.ndarray:
    """Normalized Walsh-Hadamard transform along ``axis`` of length 2^bits."""
    shape = T.shape
    T = np.moveaxis(T, axis, 0).reshape((2,) * bits + shape[:axis] + shape[axis + 1:])
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    for b in range(bits):
        T = np.tensordot(h, T, axes=([1], [b]))
        T = np.moveaxis(T, 0, b)
    T = T.reshape((1 << bits,) + shape[:axis] + shape[axis + 1:])
    return np.moveaxis(T, 0, axis)


def _apply_steps(orc: _Oracles, T: np.ndarray) -> np.ndarray:
    """Apply U_B^dagger to a batch tensor with axes (j, k, x, f1, f2, batch)."""
    n, r = orc.n, orc.cfg.r
    # 1. uniform superposition over the low log2(d') bits of k
    dbits = int(math.log2(orc.d_pad))
    if dbits:
        low = orc.d_pad
        T = T.reshape((n, n // low, low) + T.shape[2:])
        T = _fwht(T, 2, dbits)
        T = T.reshape((n, n) + T.shape[3:])
    # 2. neighbour lookup, a permutation of k for each j
    out = np.empty_like(T)
    for j in range(n):
        perm = orc.permutation(j)
        out[j, perm] = T[j]
    T = out
    # 3-6. comparison register: H, test into f1, H
    T = _fwht(T, 2, r)
    xs = np.arange(1, (1 << r) + 1)
    fail = xs[None, None, :] > orc.x_max[:, :, None]
    flipped = T[:, :, :, ::-1]
    T = np.where(fail[:, :, :, None, None, None], flipped, T)
    T = _fwht(T, 2, r)
    # 7. flag f2 ^= [k < j], then swap j, k where the flag is set
    jj, kk = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    lower = (kk < jj)[:, :, None, None, None, None]
    T = np.where(lower, T[:, :, :, :, ::-1], T)
    swapped = np.swapaxes(T, 0, 1)
    f2_set = np.zeros(T.shape[4], dtype=bool)
    f2_set[1] = True
    T = np.where(f2_set[None, None, None, None, :, None], swapped, T)
    # 8. H Z on f2
    hz = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2)
    T = np.moveaxis(np.tensordot(hz, T, axes=([1], [4])), 0, 4)
    return T


def _block_from_statevector(orc: _Oracles) -> np.ndarray:
    n, r = orc.n, orc.cfg.r
    T = np.zeros((n, n, 1 << r, 2, 2, n), dtype=complex)
    T[np.arange(n), 0, 0, 0, 0, np.arange(n)] = 1.0
    T = _apply_steps(orc, T)
    block_dag = T[:, :, 0, 0, 0, :].reshape(n * n, n)
    return block_dag.conj().T


def _block_from_formula(orc: _Oracles) -> np.ndarray:
    n, r = orc.n, orc.cfg.r
    scale = 1.0 / math.sqrt(2 * orc.d_pad)
    block = np.zeros((n, n * n))
    for j in range(n):
        for k in orc.neighbours[j]:
            amp = scale * orc.x_max[j, k] / (1 << r)
            if k >= j:
                block[j, j * n + k] += amp
            else:
                block[j, k * n + j] -= amp
    return block


def _full_unitary_dagger(orc: _Oracles) -> np.ndarray:
    n, r = orc.n, orc.cfg.r
    dim = n * n * (1 << r) * 4
    T = np.eye(dim, dtype=complex).reshape(n, n, 1 << r, 2, 2, dim)
    return _apply_steps(orc, T).reshape(dim, dim)


def block_encode_B(net: SpringNetwork, cfg: QuantizationConfig, mode: str = "auto") -> BlockEncoding:
    """Block encoding of the padded incidence factor.

    ``mode`` is ``statevector`` (apply the step sequence to each input column),
    ``formula`` (closed-form amplitudes ``count / 2^r``), ``unitary``
    (materialize all of ``U_B``), or ``auto``.
    """
    net = pad_network(net)
    orc = _Oracles(net, cfg)
    n, r = orc.n, cfg.r
    target = padded_incidence(net)
    anc = ((1 << r), 2, 2)
    if mode == "auto":
        mode = "statevector" if n ** 3 * (1 << r) * 4 <= STATEVECTOR_CAP else "formula"
    if mode == "statevector":
        block, operator, full = _block_from_statevector(orc), None, False
    elif mode == "formula":
        block, operator, full = _block_from_formula(orc), None, False
    elif mode == "unitary":
        dim = n * n * (1 << r) * 4
        if dim > FULL_UNITARY_CAP:
            raise ResourceLimit(f"full unitary would have dimension {dim} > {FULL_UNITARY_CAP}")
        operator = _full_unitary_dagger(orc).conj().T
        full = True
        a = int(np.prod(anc))
        block = operator[: n * n * a: n * a, : n * n * a: a]
    else:
        raise InvalidInput(f"unknown mode {mode!r}")
    error = float(np.linalg.norm(block - target / orc.lam, 2))
    return BlockEncoding(
        operator=operator if full else block,
        lam=orc.lam,
        ancilla_dims=anc,
        target=target,
        block=block,
        error=error,
        predicted_eps=predicted_error(net, cfg),
        cfg=cfg,
        full=full,
        network=net,
    )


def projector_block(n: int) -> np.ndarray:
    """``<0_a| U_cond |0_a>`` for ``U_cond = |+><+| (x) (2|0><0| - 1) + |-><-| (x) 1``."""
    P0 = np.zeros((n, n))
    P0[0, 0] = 1.0
    plus = np.array([[0.5, 0.5], [0.5, 0.5]])
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]])
    U = np.kron(plus, 2 * P0 - np.eye(n)) + np.kron(minus, np.eye(n))
    return U[:n, :n]


def conditional_reflection(n: int) -> np.ndarray:
    P0 = np.zeros((n, n))
    P0[0, 0] = 1.0
    plus = np.array([[0.5, 0.5], [0.5, 0.5]])
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]])
    return np.kron(plus, 2 * P0 - np.eye(n)) + np.kron(minus, np.eye(n))


def block_encode_H(be_B: BlockEncoding) -> BlockEncoding:
    """Block encoding of ``-[[0, B], [B^T, 0]]`` on the padded 2N^2 space.

    The off-diagonal block is ``(1 (x) |0><0|) G`` where ``G`` is the ancilla block
    of U_B and the projector comes from a conditional reflection.  When ``be_B``
    is a full unitary the operator is ``-C1 V C2`` with ``V`` the controlled
    swap of U_B and U_B^dagger and ``C1``, ``C2`` conditional reflections on two
    separate qubits, which is unitary.
    """
    net = be_B.network
    n = net.n_masses
    target = padded_hamiltonian(net)
    P = np.kron(np.eye(n), projector_block(n))
    if not be_B.full:
        G = np.zeros((n * n, n * n), dtype=complex)
        G[np.arange(n) * n, :] = be_B.block
        top = P @ G
        zero = np.zeros_like(top)
        block = -np.block([[zero, top], [top.conj().T, zero]])
        error = float(np.linalg.norm(block - target / be_B.lam, 2))
        return BlockEncoding(block, be_B.lam, be_B.ancilla_dims + (2,), target, block, error,
                             be_B.predicted_eps, be_B.cfg, False, net)
    U = be_B.operator
    dim = U.shape[0]
    if 8 * dim > FULL_H_CAP:
        raise ResourceLimit(f"full H encoding would have dimension {8 * dim} > {FULL_H_CAP}")
    a = dim // (n * n)
    V = np.block([[np.zeros_like(U), U], [U.conj().T, np.zeros_like(U)]])
    # register order: h, (j, k), anc_B, a1, a2 ; conditional reflection on (a, k) when h = 0
    C = _embed_reflection(n, a)
    eye2 = np.eye(2)
    C1 = np.kron(C, eye2)
    C2 = _swap_last_two(np.kron(C, eye2), 2 * dim)
    Vfull = np.kron(V, np.eye(4))
    Uh = -(C1 @ Vfull @ C2)
    stride = a * 4
    idx = np.arange(2 * n * n) * stride
    block = Uh[np.ix_(idx, idx)]
    error = float(np.linalg.norm(block - target / be_B.lam, 2))
    return BlockEncoding(Uh, be_B.lam, be_B.ancilla_dims + (2, 2), target, block, error,
                         be_B.predicted_eps, be_B.cfg, True, net)


def _embed_reflection(n: int, a: int) -> np.ndarray:
    """Reflection acting on the k register and a new qubit, active when the top qubit is 0.

    Returned on the space ``h (x) j (x) k (x) anc_B (x) a``.
    """
    Rc = conditional_reflection(n).reshape(2, n, 2, n)  # (a, k; a', k')
    blocks = np.zeros((n, a, 2, n, a, 2), dtype=float)
    # indices: (k, anc, a ; k', anc', a')
    for anc in range(a):
        blocks[:, anc, :, :, anc, :] = np.transpose(Rc, (1, 0, 3, 2))
    sub = blocks.reshape(n * a * 2, n * a * 2)
    top = np.kron(np.eye(n), sub)
    dim = top.shape[0]
    out = np.eye(2 * dim)
    out[:dim, :dim] = top
    return out


def _swap_last_two(M: np.ndarray, outer: int) -> np.ndarray:
    """Conjugate by the swap of the two trailing qubits."""
    S = np.zeros((4, 4))
    S[0, 0] = S[3, 3] = S[1, 2] = S[2, 1] = 1.0
    P = np.kron(np.eye(outer), S)
    return P @ M @ P


# ---------------------------------------------------------------- cost models

@dataclass(frozen=True)
class SimulationCost:
    """Reported estimate with unit constants."""

    queries: float
    gates: float
    tau: float
    eps_block: float


def simulation_cost_model(net: SpringNetwork, t: float, eps: float) -> SimulationCost:
    """Query and gate estimates for simulating to time t within error eps.

    The logarithm in the gate count uses ``max(tau, 1)``, matching the regime
    ``tau >= 1`` the estimate is derived for.
    """
    if t < 0 or not 0 < eps < 1:
        raise InvalidInput("need t >= 0 and 0 < eps < 1")
    tau = t * math.sqrt(net.aleph * net.sparsity_d)
    log_eps = math.log2(1 / eps)
    queries = tau + log_eps
    eps_block = eps / queries
    inner = net.n_masses * max(tau, 1.0) * net.m_max / (eps * net.m_min)
    gates = queries * math.log2(inner) ** 2
    return SimulationCost(queries, gates, tau, eps_block)


@dataclass(frozen=True, eq=False)
class PreparedState:
    state: EncodedState
    success_amplitude: float
    rounds_estimate: float
    subnormalized: np.ndarray


def prepare_initial_state(net: SpringNetwork, x0, v0) -> PreparedState:
    """Assemble the state-preparation output on the registers (c, j, k, flag).

    ``c = 0`` carries velocities and ``c = 1`` spring terms.  The subnormalized
    vector after projecting the flag onto ``|+>`` has norm equal to the success
    amplitude; normalizing it gives the primary encoding.
    """
    state = ClassicalState(x0, v0)
    _, _, E = energy(net, state)
    if not E > 0:
        raise DegenerateState("state has zero energy")
    n, d = net.n_masses, net.sparsity_d
    x, v = state.x, state.v
    alpha = float(np.linalg.norm(v))
    beta = float(np.linalg.norm(x))
    Z = math.sqrt(net.m_max * alpha ** 2 + 2 * net.kappa_max * d * beta ** 2)
    c0, c1 = math.sqrt(net.m_max) * alpha / Z, 1j * math.sqrt(2 * net.kappa_max * d) * beta / Z

    velocity = np.zeros(n, dtype=complex)
    if alpha > 0:
        velocity = c0 * (v / alpha) * np.sqrt(net.masses / net.m_max)

    kappa = net.kappa_matrix()
    # amplitude on (j, k, flag) before projecting the flag
    pos = np.zeros((n, n, 2), dtype=complex)
    if beta > 0:
        xhat = x / beta
        for j in range(n):
            nb = [k for k in range(n) if kappa[j, k] > 0]
            slots = nb + [None] * (d - len(nb))
            for k in slots:
                if k is None:
                    continue
                amp = c1 * xhat[j] / math.sqrt(d) * math.sqrt(kappa[j, k] / net.kappa_max)
                if k < j:
                    pos[k, j, 1] += amp
                else:
                    pos[j, k, 0] += amp
    pos[:, :, 1] *= -1.0  # Z on the flag
    projected = (pos[:, :, 0] + pos[:, :, 1]) / math.sqrt(2)

    springs = [(j, k) for j, k, _ in net.springs]
    spring_part = np.array([projected[j, k] for j, k in springs], dtype=complex)
    sub = np.concatenate([velocity, spring_part])
    amp = float(np.linalg.norm(sub))
    psi = EncodedState(sub / amp, E, "primary", n)
    reference = encode_primary(net, state)
    if np.abs(psi.amplitudes - reference.amplitudes).max() > 1e-10:
        raise RuntimeError("assembled state does not match the primary encoding")
    return PreparedState(psi, amp, float(math.ceil(1 / amp - 1e-12)), sub)


def success_amplitude_formula(net: SpringNetwork, x0, v0) -> float:
    state = ClassicalState(x0, v0)
    _, _, E = energy(net, state)
    alpha = float(np.linalg.norm(state.v))
    beta = float(np.linalg.norm(state.x))
    return math.sqrt(2 * E / (net.m_max * alpha ** 2 + 2 * net.kappa_max * net.sparsity_d * beta ** 2))
