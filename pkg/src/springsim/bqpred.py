"""Circuits over {H, X, Toffoli} compiled into spring networks through a clock chain.

The compiled matrix is ``A = 4 I - sum_l (|l+1><l| (x) W_l + h.c.)`` on
``clock (x) q qubits (x) ancilla``.  ``W_l = U_l (x) I_2`` for X and Toffoli; the
Hadamard is replaced by the nonnegative 4x4 ``H_enc`` on (qubit q, ancilla),
which acts as a Hadamard on the ancilla's ``|->`` subspace.  Starting from
``x'(0) = (1, -1, 0, ...)`` the velocity stays in that subspace and the clock
evolves under ``X' = 4 I - (unit hopping)``.

Qubits are 1-based in circuit files and 0-based here; qubit 1 is the most
significant bit and the ancilla is the least significant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Indeterminate, InvalidInput, ResourceLimit
from .netcore import SpringNetwork, psd_eigh

MAX_Q = 6
MAX_L = 12

H_ENC = np.array([[1.0, 0.0, 1.0, 0.0],
                  [0.0, 1.0, 0.0, 1.0],
                  [1.0, 0.0, 0.0, 1.0],
                  [0.0, 1.0, 1.0, 0.0]]) / math.sqrt(2)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


@dataclass(frozen=True)
class CircuitSpec:
    """``gates`` holds ``("H", target)``, ``("X", target)`` or ``("Toffoli", c1, c2, target)``, 0-based."""

    q: int
    gates: tuple

    def __post_init__(self):
        if self.q < 1:
            raise InvalidInput("circuit needs at least one qubit")
        gates = tuple(tuple(g) for g in self.gates)
        if not gates:
            raise InvalidInput("circuit needs at least one gate")
        prev = None
        for g in gates:
            kind = g[0]
            if kind == "H":
                if len(g) != 2 or g[1] != self.q - 1:
                    raise InvalidInput("every Hadamard must act on the last qubit")
                if prev == "H":
                    raise InvalidInput("two consecutive Hadamards are not allowed")
            elif kind == "X":
                if len(g) != 2:
                    raise InvalidInput("X takes one target")
            elif kind == "Toffoli":
                if len(g) != 4 or len({g[1], g[2], g[3]}) != 3:
                    raise InvalidInput("Toffoli takes two controls and a distinct target")
            else:
                raise InvalidInput(f"unknown gate {kind!r}")
            if any(not 0 <= i < self.q for i in g[1:]):
                raise InvalidInput(f"gate {g!r} targets a qubit out of range")
            prev = kind
        object.__setattr__(self, "gates", gates)

    @property
    def L(self) -> int:
        return len(self.gates)


def circuit_from_dict(data: dict) -> CircuitSpec:
    try:
        q = int(data["q"])
        gates = []
        for g in data["gates"]:
            kind = g[0]
            if kind == "H":
                if len(g) > 2:
                    raise InvalidInput("H takes at most one target")
                target = int(g[1]) - 1 if len(g) == 2 else q - 1
                gates.append(("H", target))
            else:
                gates.append((kind, *[int(i) - 1 for i in g[1:]]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidInput(f"malformed circuit description: {exc}") from None
    return CircuitSpec(q, tuple(gates))


def circuit_to_dict(c: CircuitSpec) -> dict:
    gates = []
    for g in c.gates:
        gates.append(["H"] if g[0] == "H" else [g[0], *[i + 1 for i in g[1:]]])
    return {"q": c.q, "gates": gates}


def load_circuit(path) -> CircuitSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read circuit file {path}: {exc}") from None
    return circuit_from_dict(data)


def _bit(index: int, qubit: int, q: int) -> int:
    return (index >> (q - 1 - qubit)) & 1


def gate_unitary(gate: tuple, q: int) -> np.ndarray:
    """The logical q-qubit unitary of one gate."""
    dim = 1 << q
    kind = gate[0]
    if kind == "H":
        t = gate[1]
        return np.kron(np.kron(np.eye(1 << t), HADAMARD), np.eye(1 << (q - 1 - t)))
    U = np.zeros((dim, dim))
    for i in range(dim):
        if kind == "X":
            j = i ^ (1 << (q - 1 - gate[1]))
        else:
            c1, c2, t = gate[1:]
            j = i ^ (1 << (q - 1 - t)) if _bit(i, c1, q) and _bit(i, c2, q) else i
        U[j, i] = 1.0
    return U


def encoded_gate(gate: tuple, q: int) -> np.ndarray:
    """``W_l`` on the q qubits plus the ancilla."""
    if gate[0] == "H":
        return np.kron(np.eye(1 << (q - 1)), H_ENC)
    return np.kron(gate_unitary(gate, q), np.eye(2))


def _clock_matrix(blocks, n_clock: int, width: int) -> np.ndarray:
    A = 4.0 * np.eye(n_clock * width)
    for l, W in enumerate(blocks):
        a, b = l * width, (l + 1) * width
        A[b:b + width, a:a + width] -= W
        A[a:a + width, b:b + width] -= W.T
    return A


@dataclass(frozen=True, eq=False)
class BqpInstance:
    circuit: CircuitSpec
    A: np.ndarray
    network: SpringNetwork
    output_index: int
    initial_v: np.ndarray

    @property
    def width(self) -> int:
        return 1 << (self.circuit.q + 1)


def network_from_matrix(A: np.ndarray) -> SpringNetwork:
    """Unit masses with ``kappa_jk = -a_jk`` and the wall springs making each row sum to ``a_jj``."""
    n = A.shape[0]
    springs = []
    for j in range(n):
        row_off = 0.0
        for k in range(n):
            if k != j and A[j, k] != 0:
                if A[j, k] > 0:
                    raise InvalidInput("positive off-diagonal entry has no spring reading")
                row_off += -A[j, k]
                if k > j:
                    springs.append((j, k, -A[j, k]))
        wall = A[j, j] - row_off
        if wall < -1e-12:
            raise InvalidInput(f"row {j} would need a negative wall spring")
        if wall > 0:
            springs.append((j, j, wall))
    return SpringNetwork(np.ones(n), springs)


def compile_circuit(c: CircuitSpec) -> BqpInstance:
    width = 1 << (c.q + 1)
    blocks = [encoded_gate(g, c.q) for g in c.gates]
    A = _clock_matrix(blocks, c.L + 1, width)
    net = network_from_matrix(A)
    v0 = np.zeros(A.shape[0])
    v0[0], v0[1] = 1.0, -1.0
    return BqpInstance(c, A, net, c.L * width, v0)


def instance_checks(inst: BqpInstance) -> dict:
    A = inst.A
    off = A - np.diag(np.diag(A))
    values = np.unique(np.round(off[off != 0], 12))
    allowed = np.round([-1.0, -1 / math.sqrt(2)], 12)
    walls = np.array([kappa for j, k, kappa in inst.network.springs if j == k])
    return {
        "diagonal_four": bool(np.allclose(np.diag(A), 4.0, atol=1e-12)),
        "offdiagonal_values_ok": bool(np.all(np.isin(values, allowed))),
        "wall_positive": bool(walls.size == A.shape[0] and np.all(walls > 0)),
        "wall_lower_bound_ok": bool(np.all(walls >= 4 - (1 + 2 / math.sqrt(2)) - 1e-12)),
        "sparsity": int(inst.network.sparsity_d),
        "sparsity_ok": bool(inst.network.sparsity_d <= 4),
        "kappa_max": float(inst.network.kappa_max),
        "kappa_ok": bool(inst.network.kappa_max <= 4 + 1e-12),
        "energy": 0.5 * float(inst.initial_v @ inst.initial_v),
    }


def clock_matrix(L: int) -> np.ndarray:
    """``X' = 4 I - unit hopping`` on L+1 clock positions."""
    return 4.0 * np.eye(L + 1) - np.eye(L + 1, k=1) - np.eye(L + 1, k=-1)


def _cos_sqrt(M: np.ndarray, t: float) -> np.ndarray:
    w, V = psd_eigh(M)
    return (V * np.cos(np.sqrt(w) * t)) @ V.T


def chain_alpha(L: int, t):
    """``<L+1| cos(sqrt(X') t) |1>`` in closed form; vectorized over t."""
    if L < 1:
        raise InvalidInput("L must be at least 1")
    l = np.arange(1, L + 2)
    theta = np.pi * l / (L + 2)
    weights = (2.0 / (L + 2)) * (-1.0) ** (l - 1) * np.sin(theta) ** 2
    gamma = np.sqrt(4 - 2 * np.cos(theta))
    t_arr = np.asarray(t, dtype=float)
    out = np.cos(np.multiply.outer(t_arr, gamma)) @ weights
    return float(out) if out.ndim == 0 else out


def chain_alpha_direct(L: int, t) -> float:
    return float(_cos_sqrt(clock_matrix(L), t)[L, 0])


def clock_states(c: CircuitSpec) -> list:
    """``U_{l-1} ... U_0 |0>`` for l = 1..L+1 (U_0 = identity)."""
    state = np.zeros(1 << c.q)
    state[0] = 1.0
    out = [state]
    for g in c.gates:
        state = gate_unitary(g, c.q) @ state
        out.append(state)
    return out


@dataclass(frozen=True, eq=False)
class RunReport:
    velocity: np.ndarray
    kinetic_fraction_output: float
    kinetic_fraction_register: float
    identity_residual: float


def _check_size(c: CircuitSpec):
    if c.q > MAX_Q or c.L > MAX_L:
        raise ResourceLimit(f"dense solve limited to q <= {MAX_Q}, L <= {MAX_L}")


def run_instance(inst: BqpInstance, t: float) -> RunReport:
    """``y'(t) = cos(sqrt(A) t) y'(0)`` and the output oscillator's kinetic fraction.

    ``kinetic_fraction_output`` is ``K_out / E`` for the single output oscillator
    (clock L+1, all qubits 0, ancilla 0).  ``kinetic_fraction_register`` adds its
    ancilla partner, i.e. the weight of ``|L+1>|0...0>`` in the encoded state.
    The structural identity is checked against
    ``sum_l alpha_l(t) |l> (x) U_{l-1}...U_0|0> (x) (|0> - |1>)``.
    """
    c = inst.circuit
    _check_size(c)
    if t < 0:
        raise InvalidInput("t must be nonnegative")
    ydot = _cos_sqrt(inst.A, t) @ inst.initial_v
    E = 0.5 * float(inst.initial_v @ inst.initial_v)
    out = inst.output_index
    frac = 0.5 * ydot[out] ** 2 / E
    pair = 0.5 * (ydot[out] ** 2 + ydot[out + 1] ** 2) / E
    alphas = _cos_sqrt(clock_matrix(c.L), t)[:, 0]
    minus = np.array([1.0, -1.0])
    expected = np.concatenate([a * np.kron(s, minus) for a, s in zip(alphas, clock_states(c))])
    residual = float(np.abs(ydot - expected).max())
    return RunReport(ydot, float(frac), float(pair), residual)


def select_conjugation(c: CircuitSpec):
    """``(A', S, X)`` with ``A'`` built from ``U_l (x) I_2``; ``A' = S X S^T`` should hold."""
    width = 1 << (c.q + 1)
    blocks = [np.kron(gate_unitary(g, c.q), np.eye(2)) for g in c.gates]
    A_prime = _clock_matrix(blocks, c.L + 1, width)
    S = np.zeros_like(A_prime)
    prod = np.eye(1 << c.q)
    for l in range(c.L + 1):
        if l > 0:
            prod = gate_unitary(c.gates[l - 1], c.q) @ prod
        S[l * width:(l + 1) * width, l * width:(l + 1) * width] = np.kron(prod, np.eye(2))
    X = np.kron(clock_matrix(c.L), np.eye(width))
    return A_prime, S, X


def minus_subspace_residual(inst: BqpInstance, t: float) -> float:
    """``|cos(sqrt(A) t) v0 - cos(sqrt(A') t) v0|_max``."""
    A_prime, _, _ = select_conjugation(inst.circuit)
    a = _cos_sqrt(inst.A, t) @ inst.initial_v
    b = _cos_sqrt(A_prime, t) @ inst.initial_v
    return float(np.abs(a - b).max())


# ---------------------------------------------------------------- averaging

def uniform_sum_counts(T_prime: int, m: int) -> list:
    """Number of ways m integers in 0..T' sum to s, for s = 0..m T' (exact integers)."""
    width = T_prime + 1
    counts = []
    for s in range(m * T_prime + 1):
        total = 0
        for k in range(0, min(m, s // width) + 1):
            total += (-1) ** k * math.comb(m, k) * math.comb(s - k * width + m - 1, m - 1)
        counts.append(total)
    return counts


@dataclass(frozen=True)
class OverlapReport:
    average: float
    f_support: int
    target: float
    deviation: float
    within_bound: bool
    T_prime: int
    m: int
    max_on_support: float


def averaged_overlap(L: int, eps: float, seed: int = 0, T_prime: int | None = None,
                     m: int | None = None) -> OverlapReport:
    """Average of ``alpha_{L+1}(t)^2`` under the law of a sum of m uniforms on 0..T'.

    The distribution is computed exactly, so ``seed`` has no effect; it is
    accepted so every workflow takes the same arguments.
    """
    del seed
    if not 0 < eps < 0.25:
        raise InvalidInput("eps must lie in (0, 1/4)")
    if T_prime is None:
        T_prime = 10 * (L + 2) ** 2
    if m is None:
        m = math.ceil(math.log2(1 / eps)) + 1
    counts = uniform_sum_counts(T_prime, m)
    total = (T_prime + 1) ** m
    if sum(counts) != total or min(counts) < 0:
        raise RuntimeError("uniform-sum counts are inconsistent")
    f = np.array([c / total for c in counts])
    alpha2 = chain_alpha(L, np.arange(len(counts))) ** 2
    average = float(f @ alpha2)
    target = 3 / (4 * (L + 2))
    dev = abs(average - target)
    return OverlapReport(average, len(counts), target, dev, bool(dev <= 2 * eps), T_prime, m,
                         float(alpha2.max()))


# ---------------------------------------------------------------- decision

def decide(inst: BqpInstance, times, yes_threshold: float, no_threshold: float) -> str:
    """``yes`` if some output fraction reaches ``yes_threshold``, ``no`` if all stay
    at or below ``no_threshold``; raises ``Indeterminate`` inside the promise gap."""
    times = list(times)
    if not times:
        raise InvalidInput("need at least one time")
    if not no_threshold < yes_threshold:
        raise InvalidInput("no_threshold must be below yes_threshold")
    best = max(run_instance(inst, t).kinetic_fraction_output for t in times)
    if best >= yes_threshold:
        return "yes"
    if best <= no_threshold:
        return "no"
    raise Indeterminate(f"output fraction {best:.3e} lies in the promise gap")


# ---------------------------------------------------------------- perfect transfer

def perfect_chain_coefficients(L: int):
    Lp = L + 1
    l = np.arange(0, L + 1, dtype=float)
    b = (5 * Lp ** 2 / 2 - 0.25 - 2 * (l - L / 2) ** 2) / 4
    return b, np.array([_u(L, k) for k in range(1, L + 1)])


def _u(L: int, l: float) -> float:
    Lp = L + 1
    return l * (2 * Lp - l) * (Lp ** 2 - l ** 2) / 16


def midpoint_gap(L: int) -> np.ndarray:
    """``b_l^2 - 8 u_{l+1/2}`` for l = 0..L, evaluated directly."""
    b, _ = perfect_chain_coefficients(L)
    return np.array([b[l] ** 2 - 8 * _u(L, l + 0.5) for l in range(L + 1)])


def midpoint_gap_polynomial(L: int) -> np.ndarray:
    """Polynomial form in ``beta = (l + 1/2)/L_+``; it equals ``256 * midpoint_gap(L)``."""
    Lp = L + 1
    beta = (np.arange(L + 1) + 0.5) / Lp
    inner = 3 - beta * (9 - beta * (5 + 4 * (2 - beta) * beta))
    return 1 + 16 * (Lp ** 4 - Lp ** 2) * (1 + (1 - beta) * beta) + 16 * Lp ** 4 * inner


def perfect_chain_matrix(L: int) -> np.ndarray:
    b, u = perfect_chain_coefficients(L)
    off = np.sqrt(u)
    return np.diag(b) - np.diag(off, 1) - np.diag(off, -1)


@dataclass(frozen=True)
class PerfectChainReport:
    b: tuple
    u: tuple
    persymmetric: bool
    u_positive: bool
    inequality_ok: bool
    midpoint_inequality_ok: bool
    spectrum: tuple
    printed_indexing_error: float
    shifted_indexing_error: float
    matching_indexing: str
    transfer_exp_max: float
    transfer_exp_argmax: float
    transfer_exp_at_2pi: float
    transfer_cos_max: float
    transfer_cos_argmax: float
    transfer_cos_at_2pi: float


def perfect_chain(L: int, grid_points: int = 4001) -> PerfectChainReport:
    """Coefficients, checks, and transfer amplitudes of the engineered chain.

    The spectrum is compared with ``(L + k + 1/2)^2 / 4`` for ``k = 0..L`` (as
    printed) and for ``k = 1..L+1``; ``matching_indexing`` names the one that fits.
    """
    if L < 1:
        raise InvalidInput("L must be at least 1")
    b, u = perfect_chain_coefficients(L)
    u_ext = np.concatenate([[0.0], u, [0.0]])
    ineq = b >= math.sqrt(2) * (np.sqrt(u_ext[:-1]) + np.sqrt(u_ext[1:])) - 1e-9 * b
    mid = np.array([b[l] ** 2 >= 8 * _u(L, l + 0.5) for l in range(L + 1)])
    X = perfect_chain_matrix(L)
    w, V = np.linalg.eigh(X)
    k = np.arange(L + 1)
    printed = 0.25 * (L + k + 0.5) ** 2
    shifted = 0.25 * (L + k + 1.5) ** 2
    err_printed = float(np.abs(w - printed).max() / w.max())
    err_shifted = float(np.abs(w - shifted).max() / w.max())
    matching = "k=0..L" if err_printed < 1e-9 else ("k=1..L+1" if err_shifted < 1e-9 else "neither")
    ts = np.linspace(0.0, 4 * np.pi, grid_points)
    root = np.sqrt(np.clip(w, 0, None))
    weights = V[L, :] * V[0, :]
    phase = np.exp(1j * np.outer(ts, root)) @ weights
    cosine = np.cos(np.outer(ts, root)) @ weights
    i_exp = int(np.argmax(np.abs(phase)))
    i_cos = int(np.argmax(np.abs(cosine)))
    return PerfectChainReport(
        b=tuple(float(x) for x in b),
        u=tuple(float(x) for x in u),
        persymmetric=bool(np.allclose(b, b[::-1]) and np.allclose(u, u[::-1])),
        u_positive=bool(np.all(u > 0)),
        inequality_ok=bool(np.all(ineq)),
        midpoint_inequality_ok=bool(np.all(mid)),
        spectrum=tuple(float(x) for x in w),
        printed_indexing_error=err_printed,
        shifted_indexing_error=err_shifted,
        matching_indexing=matching,
        transfer_exp_max=float(np.abs(phase[i_exp])),
        transfer_exp_argmax=float(ts[i_exp]),
        transfer_exp_at_2pi=float(abs(np.exp(2j * np.pi * root) @ weights)),
        transfer_cos_max=float(np.abs(cosine[i_cos])),
        transfer_cos_argmax=float(ts[i_cos]),
        transfer_cos_at_2pi=float(abs(np.cos(2 * np.pi * root) @ weights)),
    )
