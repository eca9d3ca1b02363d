import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from springsim.dynamics import NormalModes
from springsim.errors import InvalidInput, ResourceLimit
from springsim.gluedtrees import (column_lift, column_projection, column_sizes, exit_velocity,
                                  find_exit_time, full_exit_series, generate, p_exit, p_exit_limit,
                                  reduce_to_chain, solve_instance, spectral_report, trial_vector)
from springsim.netcore import scaled_stiffness

# n = 3 values from scipy.linalg.eig (general solver) on the 6x6 chain, frozen
P_INF_N3 = 0.11486486486486486
MU1_N3 = 0.09678807408844592


def _degrees(net):
    deg = np.zeros(net.n_masses, dtype=int)
    wall = np.zeros(net.n_masses, dtype=bool)
    for j, k, _ in net.springs:
        if j == k:
            wall[j] = True
        else:
            deg[j] += 1
            deg[k] += 1
    return deg, wall


def test_smallest_instance():
    inst = generate(2, seed=0)
    assert inst.network.n_masses == 6
    assert [len(c) for c in inst.columns] == [1, 2, 2, 1]
    glue = [(j, k) for j, k, _ in inst.network.springs
            if j in inst.columns[1] and k in inst.columns[2]]
    assert len(glue) == 4


@pytest.mark.parametrize("n", [2, 3, 5])
def test_degree_histogram(n):
    inst = generate(n, seed=n)
    deg, wall = _degrees(inst.network)
    ends = [inst.entrance_id, inst.exit_id]
    assert all(deg[e] == 2 and wall[e] for e in ends)
    others = np.setdiff1d(np.arange(inst.network.n_masses), ends)
    assert (deg[others] == 3).all() and not wall[others].any()
    assert column_sizes(n) == [2 ** min(l, 2 * n - 1 - l) for l in range(2 * n)]


def test_seeds_relabel():
    a, b = generate(4, 1), generate(4, 2)
    assert a.labels != b.labels
    assert [len(c) for c in a.columns] == [len(c) for c in b.columns]
    assert a.wall_oracle(a.labels[a.exit_id]) == 1.0
    assert a.wall_oracle(a.labels[5]) == 0.0
    assert len(a.label_string(0)) == 8


def test_reduced_chain_n2():
    chain = reduce_to_chain(2)
    assert np.allclose(chain.offdiagonal, [-math.sqrt(2), -2, -math.sqrt(2)])
    assert np.allclose(chain.diagonal, 3.0)


def test_frozen_n3_values():
    chain = reduce_to_chain(3)
    a, b = p_exit_limit(chain)
    assert a == pytest.approx(P_INF_N3, abs=1e-14)
    assert b == pytest.approx(P_INF_N3, abs=1e-14)
    assert spectral_report(chain).smallest_eigenvalue == pytest.approx(MU1_N3, abs=1e-13)


def test_p_exit_bounds():
    for n in range(2, 65):
        chain = reduce_to_chain(n)
        a, b = p_exit_limit(chain)
        assert a >= 1 / (4 * n)
        assert abs(a - b) <= 1e-12


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_finite_time_bound(n):
    chain = reduce_to_chain(n)
    rep = spectral_report(chain)
    limit = p_exit_limit(chain)[0]
    for T in (10.0, 100.0, 1000.0):
        slack = 1 / (T * rep.Delta) + rep.lambda1_overlap ** 4 / 2
        assert abs(p_exit(chain, T) - limit) <= slack


def test_p_exit_matches_quadrature():
    chain = reduce_to_chain(3)
    ts = np.linspace(0, 20, 200001)
    vals = exit_velocity(chain, ts) ** 2
    trap = float(np.sum((vals[1:] + vals[:-1]) / 2) * (ts[1] - ts[0])) / 20
    assert p_exit(chain, 20.0) == pytest.approx(trap, abs=1e-8)


def test_spectral_report():
    for n in range(2, 33):
        rep = spectral_report(reduce_to_chain(n))
        assert rep.v1_residual == pytest.approx(2 ** (-n / 2), abs=1e-12)
        assert rep.lambda1_overlap <= 2 ** (-(n - 2) / 2) + 1e-12
        assert rep.gap_relation_half_ok
        assert rep.smallest_eigenvalue > 0
    assert min(spectral_report(reduce_to_chain(n)).Delta * n ** 3 for n in range(4, 65)) >= 1.0


def test_smallest_eigenvalue_halves():
    mus = [spectral_report(reduce_to_chain(n)).smallest_eigenvalue for n in range(4, 21)]
    ratios = np.array(mus[1:]) / np.array(mus[:-1])
    assert ((ratios > 0.4) & (ratios < 0.6)).all()


@settings(max_examples=10)
@given(st.integers(2, 12))
def test_chain_persymmetric(n):
    _, V = reduce_to_chain(n).modes()
    assert np.abs(np.abs(V[0]) - np.abs(V[-1])).max() <= 1e-10


def test_trial_vector_shape():
    v = trial_vector(3)
    assert np.allclose(v, v[::-1])
    assert v[2] == pytest.approx(0.5)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_reduction_commutes_with_evolution(n):
    inst = generate(n, seed=11)
    chain = reduce_to_chain(n)
    modes_full = NormalModes(scaled_stiffness(inst.network))
    modes_chain = NormalModes(chain.matrix)
    z0 = np.zeros(2 * n)
    z0[0] = 0.3
    zd0 = np.zeros(2 * n)
    zd0[0] = 1.0
    for t in (0.5, 5.0, 25.0, 50.0):
        y, yd = modes_full.propagate(column_lift(inst, z0), column_lift(inst, zd0), t)
        z, zd = modes_chain.propagate(z0, zd0, t)
        assert np.abs(column_projection(inst, y) - z).max() <= 1e-8
        assert np.abs(column_projection(inst, yd) - zd).max() <= 1e-8


def test_full_series_matches_chain():
    inst = generate(4, seed=2)
    ts = np.linspace(0, 50, 26)
    assert np.abs(full_exit_series(inst, ts) - exit_velocity(reduce_to_chain(4), ts) ** 2).max() <= 1e-8


def test_exit_time_examples():
    hit = find_exit_time(reduce_to_chain(20), 0.05)
    assert hit.found and 30 <= hit.t <= 50
    hit = find_exit_time(reduce_to_chain(4), 1 / 32)
    assert hit.found and hit.t <= 10 * 4 ** 4
    assert not find_exit_time(reduce_to_chain(4), 0.999).found
    with pytest.raises(InvalidInput):
        find_exit_time(reduce_to_chain(4), 1.5)


def test_solve_small_instances():
    for seed in range(5):
        inst = generate(3, seed)
        rep = solve_instance(inst, seed)
        assert rep.found and rep.exit_label == inst.labels[inst.exit_id]
    with pytest.raises(ResourceLimit):
        solve_instance(generate(11, 0), 0)


def test_query_count_polynomial():
    ns = np.arange(3, 9)
    qs = [solve_instance(generate(int(n), 1), 1).quantum_query_count for n in ns]
    slope = np.polyfit(np.log(ns), np.log(qs), 1)[0]
    assert slope <= 5
