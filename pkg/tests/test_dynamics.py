import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from springsim.dynamics import (EvolutionBackend, NormalModes, SpectralPropagator, crossover_eps,
                                crossover_eps_numeric, evolve_exact, evolve_hamiltonian,
                                evolve_newton, format_csv, mode_average_ratio, qpe_cost_model,
                                qpe_emulate_evolution, qpe_error_bound, qpe_exact_evolution,
                                signed_sqrt_bound, signed_sqrt_error, stability_bound, trajectory)
from springsim.errors import InvalidInput
from springsim.netcore import (ClassicalState, SpringNetwork, build_matrices, encode_generalized,
                               encode_primary, energy, hamiltonian, random_network, random_state,
                               scaled_stiffness)

from conftest import net_and_state

ONE = SpringNetwork([1.0], [(0, 0, 1.0)])
PAIR = SpringNetwork([1.0, 1.0], [(0, 1, 1.0)])
TRI = SpringNetwork([1.0, 2.0, 1.5], [(0, 1, 1.0), (1, 2, 0.5), (0, 0, 0.7)])

# x(2), v(2) for TRI from x(0) = e_1, v(0) = 0; computed with scipy.linalg.expm on the
# first-order system [[0, I], [-A, 0]] and frozen
TRI_X2 = [-0.6769061755694898, 0.38691447097287435, 0.07589152825500334]
TRI_V2 = [-0.4140117981673638, -0.05212770320202518, 0.12202801118553881]


def test_exact_matches_frozen_oracle():
    s = evolve_exact(TRI, ClassicalState([1, 0, 0], [0, 0, 0]), 2.0)
    assert np.allclose(s.x, TRI_X2, atol=1e-12)
    assert np.allclose(s.v, TRI_V2, atol=1e-12)


def test_single_mass_cosine():
    for t in (0.3, 1.0, math.pi, 17.2):
        s = evolve_exact(ONE, ClassicalState([1.0], [0.0]), t)
        assert s.x[0] == pytest.approx(math.cos(t), abs=1e-13)
    dt = 1e-3
    s = evolve_newton(ONE, ClassicalState([1.0], [0.0]), math.pi, dt)
    assert abs(s.x[0] + 1) < 10 * dt ** 2


def test_pair_modes():
    s = evolve_newton(PAIR, ClassicalState([1, 1], [0, 0]), 5.0, 1e-3)
    assert np.allclose(s.x, [1, 1])
    for t in (0.5, 2.0, 7.0):
        s = evolve_exact(PAIR, ClassicalState([1, -1], [0, 0]), t)
        assert np.allclose(s.x, np.cos(math.sqrt(2) * t) * np.array([1, -1]), atol=1e-12)


def test_free_translation():
    s = evolve_exact(PAIR, ClassicalState([0, 0], [1, 1]), 3.5)
    assert np.allclose(s.x, [3.5, 3.5], atol=1e-12)
    assert np.allclose(s.v, [1, 1], atol=1e-12)


def test_verlet_agrees_with_exact():
    net = random_network(12, 4, seed=3)
    state0 = random_state(12, seed=4)
    dt = 1e-3 * stability_bound(net)
    a = evolve_exact(net, state0, 2.0)
    b = evolve_newton(net, state0, 2.0, dt)
    assert np.abs(a.x - b.x).max() <= 1e-6
    assert np.abs(a.v - b.v).max() <= 1e-6


def test_verlet_rejects_unstable_step():
    with pytest.raises(InvalidInput):
        evolve_newton(ONE, ClassicalState([1.0], [0.0]), 1.0, dt=2 * stability_bound(ONE))
    with pytest.raises(InvalidInput):
        EvolutionBackend("qpe_emulated")
    with pytest.raises(InvalidInput):
        EvolutionBackend("bogus")


def test_hamiltonian_two_by_two():
    H = hamiltonian(build_matrices(ONE))
    psi0 = np.array([1.0, 0.0], dtype=complex)
    assert np.allclose(evolve_hamiltonian(H, psi0, 0.0), psi0)
    for t in (0.4, 2.2):
        assert np.allclose(evolve_hamiltonian(H, psi0, t), [math.cos(t), 1j * math.sin(t)])


def test_hamiltonian_rejects_bad_input():
    with pytest.raises(InvalidInput):
        SpectralPropagator(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidInput):
        evolve_hamiltonian(np.eye(2), np.array([1.0, 1.0]), 1.0)


@given(net_and_state(max_n=6), st.sampled_from([0.1, 1.0, 10.0, 100.0]))
def test_encoding_equivalence(data, t):
    net, x, v = data
    state0 = ClassicalState(x, v)
    psi0 = encode_primary(net, state0)
    lhs = encode_primary(net, evolve_exact(net, state0, t)).amplitudes
    rhs = evolve_hamiltonian(hamiltonian(build_matrices(net)), psi0, t)
    assert np.linalg.norm(lhs - rhs.amplitudes) <= 1e-8
    assert abs(rhs.norm() - 1) <= 1e-10


@given(net_and_state(max_n=6), st.floats(0.0, 100.0))
def test_exact_energy_conservation(data, t):
    net, x, v = data
    state0 = ClassicalState(x, v)
    E0 = energy(net, state0)[2]
    E = energy(net, evolve_exact(net, state0, t))[2]
    assert abs(E - E0) <= 1e-9 * E0


def test_verlet_energy_drift():
    net = random_network(8, 3, seed=11)
    state0 = random_state(8, seed=12)
    E0 = energy(net, state0)[2]
    s = evolve_newton(net, state0, 20.0, 1e-3 * stability_bound(net))
    assert abs(energy(net, s)[2] - E0) <= 1e-5 * E0


@given(st.integers(0, 1000), st.integers(0, 7))
def test_mode_averages(seed, k):
    A = scaled_stiffness(random_network(8, 3, seed, wall_probability=1.0))
    ratio, omega2 = mode_average_ratio(A, k, amplitude=1.3, phase=0.4, samples=500)
    assert abs(ratio - omega2) <= 1e-8 * max(omega2, 1.0)


def test_qpe_on_grid_is_exact():
    A = np.array([[1.0]])
    psi0 = np.array([1.0, 0.0], dtype=complex)
    a = qpe_emulate_evolution(A, psi0, 1.0, 0.5)
    b = qpe_exact_evolution(A, psi0, 1.0)
    assert np.allclose(a, b, atol=1e-14)


def test_qpe_fine_grid_limit():
    net = random_network(6, 3, seed=2, wall_probability=1.0)
    A = scaled_stiffness(net)
    s = random_state(6, seed=3)
    psi0 = encode_generalized(A, s.x, s.v)
    a = qpe_emulate_evolution(A, psi0, 3.0, 1e-12)
    b = qpe_exact_evolution(A, psi0, 3.0)
    assert np.linalg.norm(a.amplitudes - b.amplitudes) <= 1e-5


@given(st.integers(0, 10_000), st.floats(1e-4, 0.2), st.floats(0.1, 10.0))
def test_qpe_error_within_bound(seed, eps_pe, t):
    rng = np.random.default_rng(seed)
    A = np.diag(rng.uniform(0.05, 4.0, size=4))
    psi0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    psi0 /= np.linalg.norm(psi0)
    err = np.linalg.norm(qpe_emulate_evolution(A, psi0, t, eps_pe) - qpe_exact_evolution(A, psi0, t))
    lam_min = np.diag(A).min()
    bound = t * math.sqrt(2) * min(eps_pe / math.sqrt(lam_min), math.sqrt(eps_pe))
    assert err <= bound + 1e-12
    assert qpe_error_bound(A, t, eps_pe) == pytest.approx(bound)


def test_signed_sqrt_examples():
    assert signed_sqrt_error(0.0) == 0.0
    assert signed_sqrt_error(-2.0) == pytest.approx(2.0)
    assert signed_sqrt_bound(-2.0) == pytest.approx(2.0)


@given(st.floats(-10.0, 10.0))
def test_signed_sqrt_bound_holds(a):
    assert signed_sqrt_error(a) <= signed_sqrt_bound(a) + 1e-15


def test_qpe_cost_model():
    assert qpe_cost_model(1.0, 4, 0.0, 0.1, 2.0).queries == 0.0
    prev = 0.0
    for eps in (0.2, 0.1, 0.05, 0.025):
        q = qpe_cost_model(1.0, 4, 2.0, eps, 10.0).queries
        assert q > prev
        prev = q
    assert crossover_eps_numeric(2.0, 10.0) == pytest.approx(crossover_eps(2.0, 10.0), rel=1e-10)
    c = crossover_eps(2.0, 10.0)
    assert qpe_cost_model(1.0, 4, 2.0, 0.9 * c, 10.0).branch == "t*sqrt(|A^-1|)/eps"
    assert qpe_cost_model(1.0, 4, 2.0, 0.99, 10.0).branch == "t^2/eps^2"


def test_trajectory_backends_agree():
    state0 = ClassicalState([1, 0, 0], [0, 0.3, 0])
    times = [0.5, 1.0, 2.0]
    ref = trajectory(TRI, state0, times, "exact")
    for backend, kw in (("verlet", {"dt": 1e-3 * stability_bound(TRI)}), ("hamiltonian", {}),
                        ("qpe", {"eps_pe": 1e-10})):
        got = trajectory(TRI, state0, times, backend, **kw)
        for a, b in zip(ref, got):
            assert np.abs(a.x - b.x).max() <= 1e-4
            assert np.abs(a.v - b.v).max() <= 1e-4
    with pytest.raises(InvalidInput):
        trajectory(TRI, state0, times, "qpe")


def test_format_csv():
    text = format_csv(ONE, [ClassicalState([1.0], [0.0], 0.0)])
    lines = text.splitlines()
    assert lines[0] == "t,x_1,v_1,K,U,E"
    assert lines[1] == "0,1,0,0,0.5,0.5"


def test_normal_modes_cos_sqrt():
    A = scaled_stiffness(TRI)
    C = NormalModes(A).cos_sqrt(1.3)
    w, V = np.linalg.eigh(A)
    assert np.allclose(C, V @ np.diag(np.cos(np.sqrt(w) * 1.3)) @ V.T)
