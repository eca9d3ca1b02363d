"""Time evolution of spring networks and of their encoded states.

Four routes are provided and cross-checked against each other:

* ``evolve_newton``: velocity Verlet on ``M x'' = -F x`` (brute-force oracle),
* ``evolve_exact``: closed-form normal-mode solution,
* ``evolve_hamiltonian``: ``exp(-i t H)`` on an encoded state,
* ``qpe_emulate_evolution``: square-root phases from rounded eigenvalue estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidInput
from . import netcore
from .netcore import (ClassicalState, EncodedState, SpringNetwork, energy, psd_eigh,
                      scaled_stiffness, sqrtm_psd, stiffness_matrix)

BACKENDS = ("verlet", "exact_classical", "hamiltonian", "qpe_emulated")


@dataclass(frozen=True)
class EvolutionBackend:
    kind: str
    dt: float | None = None
    eps_pe: float | None = None
    delta_pe: float = 0.0

    def __post_init__(self):
        if self.kind not in BACKENDS:
            raise InvalidInput(f"unknown backend {self.kind!r}")
        if self.kind == "verlet" and self.dt is not None and not self.dt > 0:
            raise InvalidInput("dt must be positive")
        if self.kind == "qpe_emulated":
            if self.eps_pe is None or not self.eps_pe > 0:
                raise InvalidInput("eps_pe must be positive")
            if not 0 <= self.delta_pe < 1:
                raise InvalidInput("delta_pe must lie in [0, 1)")


def stability_bound(net: SpringNetwork) -> float:
    """Largest Verlet step accepted: 0.5 / sqrt(aleph d)."""
    return 0.5 / math.sqrt(net.aleph * net.sparsity_d)


def default_dt(net: SpringNetwork) -> float:
    return 0.01 / math.sqrt(net.aleph * net.sparsity_d)


def evolve_newton(net: SpringNetwork, state0: ClassicalState, t: float,
                  dt: float | None = None) -> ClassicalState:
    """Velocity Verlet; the final step is shortened to land exactly on ``t``."""
    if t < 0:
        raise InvalidInput("t must be nonnegative")
    if dt is None:
        dt = default_dt(net)
    if not dt > 0 or dt > stability_bound(net) * (1 + 1e-12):
        raise InvalidInput(f"dt = {dt} violates the stability bound {stability_bound(net)}")
    Minv_F = stiffness_matrix(net) / net.masses[:, None]
    x = state0.x.copy()
    v = state0.v.copy()
    a = -Minv_F @ x
    n_full = int(math.floor(t / dt))
    remainder = t - n_full * dt
    if remainder <= 1e-12 * max(dt, t):
        remainder = 0.0
    steps = [dt] * n_full + ([remainder] if remainder > 0 else [])
    for h in steps:
        v_half = v + 0.5 * h * a
        x = x + h * v_half
        a = -Minv_F @ x
        v = v_half + 0.5 * h * a
    return ClassicalState(x, v, state0.t + t)


class NormalModes:
    """Cached eigendecomposition of A for repeated exact propagation."""

    def __init__(self, A: np.ndarray):
        self.eigenvalues, self.vectors = psd_eigh(A)
        self.omega = np.sqrt(self.eigenvalues)

    def propagate(self, y0, ydot0, t: float):
        """Return ``(y(t), ydot(t))``; zero modes drift linearly."""
        c0 = self.vectors.T @ y0
        cd0 = self.vectors.T @ ydot0
        wt = self.omega * t
        cos = np.cos(wt)
        # sin(w t) / w, equal to t on the kernel
        sinc = t * np.sinc(wt / np.pi)
        c = cos * c0 + sinc * cd0
        cd = -self.omega * np.sin(wt) * c0 + cos * cd0
        return self.vectors @ c, self.vectors @ cd

    def cos_sqrt(self, t: float) -> np.ndarray:
        return (self.vectors * np.cos(self.omega * t)) @ self.vectors.T


def evolve_exact(net: SpringNetwork, state0: ClassicalState, t: float,
                 modes: NormalModes | None = None) -> ClassicalState:
    if modes is None:
        modes = NormalModes(scaled_stiffness(net))
    root_m = np.sqrt(net.masses)
    y, ydot = modes.propagate(root_m * state0.x, root_m * state0.v, t)
    return ClassicalState(y / root_m, ydot / root_m, state0.t + t)


class SpectralPropagator:
    """``exp(-i t H)`` for a real symmetric or Hermitian H via one eigendecomposition."""

    def __init__(self, H):
        H = np.asarray(H)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InvalidInput("H must be square")
        scale = max(float(np.abs(H).max(initial=0.0)), 1e-300)
        if not np.allclose(H, H.conj().T, rtol=0, atol=1e-12 * scale):
            raise InvalidInput("H is not symmetric")
        self.eigenvalues, self.vectors = np.linalg.eigh((H + H.conj().T) / 2)

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        coeff = self.vectors.conj().T @ psi
        return self.vectors @ (np.exp(-1j * t * self.eigenvalues) * coeff)


def evolve_hamiltonian(H, psi0, t: float, propagator: SpectralPropagator | None = None):
    """Apply ``exp(-i t H)``.

    Accepts an ``EncodedState`` (metadata is carried along) or a bare vector.
    """
    if propagator is None:
        propagator = SpectralPropagator(H)
    amps = psi0.amplitudes if isinstance(psi0, EncodedState) else np.asarray(psi0, complex)
    if amps.size != propagator.eigenvalues.size:
        raise InvalidInput("state dimension does not match H")
    norm = np.linalg.norm(amps)
    if abs(norm - 1) > 1e-8:
        raise InvalidInput(f"initial state has norm {norm}, expected 1")
    out = propagator.apply(amps, t)
    if isinstance(psi0, EncodedState):
        return psi0.with_amplitudes(out, psi0.t + t)
    return out


def _rounded_phases(gamma: np.ndarray, t: float, eps_pe: float) -> np.ndarray:
    grid = 2.0 * eps_pe
    x = np.round(gamma / grid) * grid
    return np.exp(-1j * t * np.sign(x) * np.sqrt(np.abs(x)))


def qpe_emulate_evolution(A: np.ndarray, psi0, t: float, eps_pe: float):
    """Evolve under ``-X (x) sqrt(A)`` using rounded eigenvalues of ``-X (x) A``.

    Each eigenvalue ``gamma = +-lambda_j`` is rounded to the grid of spacing
    ``2 eps_pe`` and the phase ``exp(-i t sign(x) sqrt|x|)`` is applied.  The
    failure branch of phase estimation is not modelled.
    """
    if not eps_pe > 0:
        raise InvalidInput("eps_pe must be positive")
    w, V = psd_eigh(A)
    n = w.size
    amps = psi0.amplitudes if isinstance(psi0, EncodedState) else np.asarray(psi0, complex)
    if amps.size != 2 * n:
        raise InvalidInput("state must live in the 2N-dimensional space")
    # eigenvectors of -X: |-> with +1, |+> with -1
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    blocks = amps.reshape(2, n)
    c_minus = V.T @ (minus @ blocks)
    c_plus = V.T @ (plus @ blocks)
    c_minus = c_minus * _rounded_phases(w, t, eps_pe)
    c_plus = c_plus * _rounded_phases(-w, t, eps_pe)
    out = (np.outer(minus, V @ c_minus) + np.outer(plus, V @ c_plus)).reshape(-1)
    if isinstance(psi0, EncodedState):
        return psi0.with_amplitudes(out, psi0.t + t)
    return out


def qpe_exact_evolution(A: np.ndarray, psi0, t: float):
    """Reference ``exp(-i t (-X (x) sqrt(A)))`` for comparison with the emulation."""
    H = -np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), sqrtm_psd(A))
    amps = psi0.amplitudes if isinstance(psi0, EncodedState) else np.asarray(psi0, complex)
    out = SpectralPropagator(H).apply(amps, t)
    if isinstance(psi0, EncodedState):
        return psi0.with_amplitudes(out, psi0.t + t)
    return out


def qpe_error_bound(A: np.ndarray, t: float, eps_pe: float) -> float:
    """``t * min(eps_pe sqrt(2 / lambda_min), sqrt(2 eps_pe))``."""
    w, _ = psd_eigh(A)
    lam_min = float(w.min())
    second = math.sqrt(2 * eps_pe)
    if lam_min <= 0:
        return t * second
    return t * min(eps_pe * math.sqrt(2 / lam_min), second)


def signed_sqrt_error(a):
    """``|sign(1 + a) sqrt|1 + a| - 1|``; works elementwise on arrays."""
    s = 1.0 + np.asarray(a, dtype=float)
    out = np.abs(np.sign(s) * np.sqrt(np.abs(s)) - 1.0)
    return float(out) if out.ndim == 0 else out


def signed_sqrt_bound(a):
    a = np.abs(np.asarray(a, dtype=float))
    out = math.sqrt(2) * np.minimum(a, np.sqrt(a))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QpeCost:
    """Reported estimate of the phase-estimation route; unit constants throughout."""

    queries: float
    eps_pe: float
    delta_pe: float
    branch: str
    crossover_eps: float


def qpe_cost_model(A_max_entry: float, d: int, t: float, eps: float,
                   norm_A_inv: float) -> QpeCost:
    if min(A_max_entry, d, eps, norm_A_inv) <= 0 or t < 0 or eps >= 1:
        raise InvalidInput("cost model inputs must be positive with eps < 1")
    spectral = t * math.sqrt(norm_A_inv) / eps
    quadratic = t ** 2 / eps ** 2
    branch = "t*sqrt(|A^-1|)/eps" if spectral <= quadratic else "t^2/eps^2"
    queries = A_max_entry * d * math.log2(1 / eps) * min(spectral, quadratic)
    lam_min = 1.0 / norm_A_inv
    if t > 0:
        eps_pe = max(eps * math.sqrt(lam_min) / (2 * math.sqrt(2) * t), eps ** 2 / (8 * t ** 2))
    else:
        eps_pe = math.inf
    return QpeCost(queries, eps_pe, eps ** 2 / 64, branch, crossover_eps(t, norm_A_inv))


def crossover_eps(t: float, norm_A_inv: float) -> float:
    """eps at which the two branches of the cost minimum coincide."""
    if t <= 0:
        return 0.0
    return t / math.sqrt(norm_A_inv)


def crossover_eps_numeric(t: float, norm_A_inv: float) -> float:
    f = lambda e: math.log(t * math.sqrt(norm_A_inv) / e) - math.log(t ** 2 / e ** 2)
    return brentq(f, 1e-12, 1e12, xtol=1e-15, rtol=1e-14)


def mode_average_ratio(A: np.ndarray, k: int, amplitude: float = 1.0, phase: float = 0.0,
                       periods: int = 3, samples: int = 4000) -> tuple:
    """Time averages of ``|ydot|^2`` and ``|y|^2`` along one normal mode of A.

    The start is ``y(0) = a cos(phase) v_k``, ``ydot(0) = -a omega_k sin(phase) v_k``;
    the trajectory comes from ``NormalModes.propagate`` and is sampled over a whole
    number of periods.  Returns ``(ratio, omega_k^2)``.
    """
    modes = NormalModes(A)
    omega = float(modes.omega[k])
    if not omega > 0:
        raise InvalidInput("mode has zero frequency")
    vk = modes.vectors[:, k]
    y0 = amplitude * math.cos(phase) * vk
    yd0 = -amplitude * omega * math.sin(phase) * vk
    T = periods * 2 * math.pi / omega
    y2 = yd2 = 0.0
    for t in np.linspace(0.0, T, samples, endpoint=False):
        y, yd = modes.propagate(y0, yd0, t)
        y2 += float(y @ y)
        yd2 += float(yd @ yd)
    return yd2 / y2, omega ** 2


# ---------------------------------------------------------------- time series

def trajectory(net: SpringNetwork, state0: ClassicalState, times, backend: str = "exact",
               dt: float | None = None, eps_pe: float | None = None):
    """Classical states at each requested time using the named backend.

    The encoded backends cannot see free translations (kernel modes of A), so
    positions decoded from them omit that component.
    """
    times = [float(t) for t in times]
    out = []
    if backend == "exact":
        modes = NormalModes(scaled_stiffness(net))
        return [evolve_exact(net, state0, t, modes) for t in times]
    if backend == "verlet":
        state, now = state0, 0.0
        for t in times:
            if t < now:
                raise InvalidInput("times must be sorted")
            state = evolve_newton(net, state, t - now, dt)
            now = t
            out.append(ClassicalState(state.x, state.v, state0.t + t))
        return out
    if backend == "hamiltonian":
        mats = netcore.build_matrices(net)
        psi0 = netcore.encode_primary(net, state0)
        prop = SpectralPropagator(netcore.hamiltonian(mats))
        root_m = np.sqrt(net.masses)
        for t in times:
            psi = evolve_hamiltonian(None, psi0, t, prop)
            nu, mu = netcore.decode_primary(net, psi)
            x = netcore.positions_from_mu(net, mu)
            out.append(ClassicalState(x, nu / root_m, state0.t + t))
        return out
    if backend == "qpe":
        if eps_pe is None:
            raise InvalidInput("qpe backend needs eps_pe")
        A = scaled_stiffness(net)
        root_m = np.sqrt(net.masses)
        w, V = netcore.range_projector_parts(A)
        psi0 = netcore.encode_generalized(A, root_m * state0.x, root_m * state0.v)
        scale = math.sqrt(2 * psi0.energy_E)
        for t in times:
            psi = qpe_emulate_evolution(A, psi0, t, eps_pe)
            ydot = scale * psi.first_block.real
            root_y = scale * psi.second_block.imag
            y = V @ ((V.T @ root_y) / np.sqrt(w))
            out.append(ClassicalState(y / root_m, ydot / root_m, state0.t + t))
        return out
    raise InvalidInput(f"unknown backend {backend!r}")


def format_csv(net: SpringNetwork, states) -> str:
    n = net.n_masses
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"v_{i + 1}" for i in range(n)]
    header += ["K", "U", "E"]
    lines = [",".join(header)]
    for s in states:
        K, U, E = energy(net, s)
        values = [s.t, *s.x, *s.v, K, U, E]
        lines.append(",".join(format(float(v), ".17g") for v in values))
    return "\n".join(lines) + "\n"
