"""Direct simulation of X_i(t+1) = max_j (X_j(t) + xi_{j,i}(t+1)).

This is the O(N^2)-per-step reference engine.  Positions are kept as offsets
from the current front plus the front itself, which keeps lattice runs exact
over long horizons.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .disorder import DisorderSpec, TwoStateSpec, masses, p_zero, xi_from_uniform


@dataclass(frozen=True)
class ParticleState:
    offsets: np.ndarray  # X_i - front, all <= 0
    front: float
    time: int = 0

    @classmethod
    def zeros(cls, N: int) -> "ParticleState":
        return cls(np.zeros(N), 0.0, 0)

    @classmethod
    def from_positions(cls, positions, time: int = 0) -> "ParticleState":
        positions = np.asarray(positions, dtype=float)
        front = float(positions.max())
        return cls(positions - front, front, time)

    @property
    def N(self) -> int:
        return len(self.offsets)

    @property
    def positions(self) -> np.ndarray:
        return self.front + self.offsets


def step_with_disorder(state: ParticleState, xi: np.ndarray) -> ParticleState:
    """Deterministic update for a given N x N disorder array ``xi[j, i]``."""
    cand = (state.offsets[:, None] + xi).max(axis=0)
    lead = cand.max()
    return ParticleState(cand - lead, state.front + lead, state.time + 1)


def step_from_uniforms(state: ParticleState, spec: DisorderSpec,
                       u: np.ndarray) -> ParticleState:
    """Update driven by an N x N array of uniforms; lets two laws share draws."""
    return step_with_disorder(state, xi_from_uniform(spec, state.N, u))


def step_naive(state: ParticleState, spec: DisorderSpec,
               rng: np.random.Generator) -> ParticleState:
    """One step consuming exactly N**2 uniforms in (j, i) row-major order."""
    N = state.N
    return step_from_uniforms(state, spec, rng.random((N, N)))


def run_naive(state: ParticleState, spec: DisorderSpec, horizon: int,
              rng: np.random.Generator) -> list[ParticleState]:
    out = []
    for _ in range(horizon):
        state = step_naive(state, spec, rng)
        out.append(state)
    return out


def ground_state_energy(fronts) -> np.ndarray:
    """Zero-temperature polymer ground-state energies, -front, from an all-zero start."""
    return -np.asarray(fronts, dtype=float)


def depth_counts(state: ParticleState, scale: float = 1.0) -> tuple[int, ...]:
    """Occupation vector of a lattice-valued state (depths in units of ``scale``)."""
    depths = np.rint(-state.offsets / scale).astype(np.int64)
    return tuple(int(c) for c in np.bincount(depths))


def run_coupled_two_state(rho: float, r_low, r_high, N: int, horizon: int,
                          rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two two-state systems driven by the same edge uniforms.

    Edge (j, i) is zero-energy under rate r when u_{j,i} < p0(r).  Since
    p0(r_low) >= p0(r_high) for r_low <= r_high, the low-r system dominates the
    other pathwise.  Only edges leaving current leaders can matter in the
    two-state model, and only whether u < p0(r_low); those edges are sampled
    sparsely, which keeps the cost near O(N) per step instead of O(N^2).

    Returns the two front trajectories (length ``horizon + 1``, starting at 0).
    """
    if r_low > r_high:
        raise ValueError("need r_low <= r_high")
    p_lo = p_zero(TwoStateSpec(rho, r_low), N)
    p_hi = p_zero(TwoStateSpec(rho, r_high), N)
    lead_a = np.ones(N, dtype=bool)  # low r
    lead_b = np.ones(N, dtype=bool)  # high r
    front_a = front_b = 0
    fronts_a = np.zeros(horizon + 1, dtype=np.int64)
    fronts_b = np.zeros(horizon + 1, dtype=np.int64)
    for t in range(1, horizon + 1):
        rows = np.flatnonzero(lead_a | lead_b)
        cells = len(rows) * N
        k = int(rng.binomial(cells, p_lo))
        flat = rng.choice(cells, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
        u = rng.random(k) * p_lo  # uniforms conditioned on u < p_lo
        src = rows[flat // N]
        dst = flat % N
        hit_a = lead_a[src]
        hit_b = lead_b[src] & (u < p_hi)
        new_a = np.zeros(N, dtype=bool)
        new_a[dst[hit_a]] = True
        new_b = np.zeros(N, dtype=bool)
        new_b[dst[hit_b]] = True
        if not new_a.any():
            front_a -= 1
            new_a[:] = True
        if not new_b.any():
            front_b -= 1
            new_b[:] = True
        lead_a, lead_b = new_a, new_b
        fronts_a[t] = front_a
        fronts_b[t] = front_b
    return fronts_a, fronts_b


def enumerate_step_law(state: ParticleState, spec: DisorderSpec
                       ) -> dict[tuple[tuple[int, ...], int], float]:
    """Exact one-step law of (occupation vector, front drop) over all disorder arrays.

    Enumerates every assignment of the support values to the N**2 edges, so it
    is only practical for N <= 3.  Lattice-valued laws only.
    """
    values, probs = masses(spec, state.N)
    N = state.N
    keep = probs > 0
    values, probs = values[keep], probs[keep]
    idx = np.array(list(product(range(len(values)), repeat=N * N)), dtype=np.int64)
    xi = values[idx].reshape(-1, N, N)
    weight = np.prod(probs[idx], axis=1)
    cand = (state.offsets[None, :, None] + xi).max(axis=1)
    lead = cand.max(axis=1)
    drops = np.rint(-lead).astype(np.int64)
    depths = np.rint(lead[:, None] - cand).astype(np.int64)
    width = int(depths.max()) + 1
    hist = np.zeros((len(depths), width), dtype=np.int64)
    np.add.at(hist, (np.repeat(np.arange(len(depths)), N), depths.ravel()), 1)
    keys, inverse = np.unique(np.column_stack([drops, hist]), axis=0, return_inverse=True)
    totals = np.bincount(inverse.ravel(), weights=weight)
    law: dict[tuple[tuple[int, ...], int], float] = {}
    for key, p in zip(keys, totals):
        counts = tuple(int(c) for c in key[1:])
        while counts[-1] == 0:
            counts = counts[:-1]
        law[(counts, int(key[0]))] = law.get((counts, int(key[0])), 0.0) + float(p)
    return law
