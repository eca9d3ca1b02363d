"""Energy fractions read off an encoded state, exactly and by simulated sampling."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import NormalModes, evolve_exact
from .errors import InvalidInput
from .netcore import (ClassicalState, EncodedState, SpringNetwork, encode_primary,
                      scaled_stiffness)


@dataclass(frozen=True)
class SubsetOracle:
    """A set of masses (``vertices``) or springs (``edges``), 0-based."""

    kind: str
    members: tuple

    def __post_init__(self):
        if self.kind == "vertices":
            members = tuple(sorted({int(m) for m in self.members}))
            if members and members[0] < 0:
                raise InvalidInput("vertex indices must be nonnegative")
        elif self.kind == "edges":
            pairs = set()
            for m in self.members:
                if len(m) != 2:
                    raise InvalidInput(f"edge {m!r} is not a pair")
                j, k = int(m[0]), int(m[1])
                if min(j, k) < 0:
                    raise InvalidInput("edge indices must be nonnegative")
                pairs.add((min(j, k), max(j, k)))
            members = tuple(sorted(pairs))
        else:
            raise InvalidInput(f"unknown subset kind {self.kind!r}")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class EstimateReport:
    exact_value: float
    estimate: float
    epsilon: float
    delta: float
    shots_used: int
    ae_query_model: float

    def to_dict(self) -> dict:
        return asdict(self)


def subset_indices(psi: EncodedState, V: SubsetOracle, springs=None) -> np.ndarray:
    """Basis positions of V inside the encoded vector.

    Edge subsets need the network's spring list; pairs with no spring have zero
    amplitude and are skipped.
    """
    n = psi.n_oscillators
    if V.kind == "vertices":
        if V.members and V.members[-1] >= n:
            raise InvalidInput(f"vertex {V.members[-1]} out of range for {n} oscillators")
        return np.array(V.members, dtype=int)
    if psi.encoding_kind == "generalized":
        raise InvalidInput("a generalized encoding has no spring block")
    if springs is None:
        raise InvalidInput("edge subsets need the network's spring list")
    lookup = {(j, k): i for i, (j, k, *_) in enumerate(springs)}
    if psi.dim != n + len(lookup):
        raise InvalidInput("spring list does not match the encoded state")
    out = []
    for j, k in V.members:
        if k >= n:
            raise InvalidInput(f"edge ({j}, {k}) out of range")
        if (j, k) in lookup:
            out.append(n + lookup[(j, k)])
    return np.array(out, dtype=int)


def exact_fraction(psi: EncodedState, V: SubsetOracle, springs=None) -> float:
    """``<psi|P_V|psi>``: K_V/E for vertex sets, U_V/E for spring sets."""
    idx = subset_indices(psi, V, springs)
    return float(np.sum(np.abs(psi.amplitudes[idx]) ** 2))


def hoeffding_shots(eps: float, delta: float) -> int:
    return int(math.ceil(math.log(2 / delta) / (2 * eps ** 2)))


def ae_queries(eps: float, delta: float) -> float:
    """Amplitude-estimation query model ``ceil(ln(1/delta)/eps)`` with unit constant."""
    return float(math.ceil(math.log(1 / delta) / eps))


def born_samples(amplitudes: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling over ``|amplitude|^2`` in basis order."""
    weights = np.abs(amplitudes) ** 2
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = rng.random(shots)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, amplitudes.size - 1)


def sample_estimate(psi: EncodedState, V: SubsetOracle, eps: float, delta: float,
                    rng_seed: int, springs=None) -> EstimateReport:
    if not (0 < eps < 1 and 0 < delta < 1):
        raise InvalidInput("eps and delta must lie in (0, 1)")
    idx = subset_indices(psi, V, springs)
    shots = hoeffding_shots(eps, delta)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    draws = born_samples(psi.amplitudes, shots, rng)
    member = np.zeros(psi.dim, dtype=bool)
    member[idx] = True
    hits = int(np.count_nonzero(member[draws]))
    return EstimateReport(
        exact_value=exact_fraction(psi, V, springs),
        estimate=hits / shots,
        epsilon=eps,
        delta=delta,
        shots_used=shots,
        ae_query_model=ae_queries(eps, delta),
    )


def kinetic_energy_timeseries(net: SpringNetwork, state0: ClassicalState, times,
                              V: SubsetOracle):
    """``[(t, fraction)]`` for the subset V along the exact trajectory."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or times != sorted(times):
        raise InvalidInput("times must be sorted and nonnegative")
    modes = NormalModes(scaled_stiffness(net))
    out = []
    for t in times:
        psi = encode_primary(net, evolve_exact(net, state0, t, modes))
        out.append((t, exact_fraction(psi, V, net.springs)))
    return out
