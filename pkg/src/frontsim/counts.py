"""Occupation-vector engine: evolves counts of particles by depth behind the front.

A configuration ``x`` stores ``x[l]`` = number of particles ``l`` units behind
the current front.  One step draws the new depths from the multinomial kernel

    s_k(x) = S_k(x) - S_{k+1}(x),   S_k(x) = prod_{d < k} P(xi <= -(k - d)) ** x[d],

i.e. S_k is the probability that a given particle lands at depth >= k.  The
cost per step is proportional to the number of occupied depths, independent
of N.

Depths are always re-anchored at the current front.  The reduced chain used
in the literature measures depth from the previous front instead; the two
differ only by ``front_drop``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np

from .disorder import DisorderSpec, log_tail_table

ROW_RESIDUAL = 1e-12


@dataclass(frozen=True)
class Configuration:
    """Particle counts by depth; trailing empty depths are dropped."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError(f"negative count in {counts}")
        while counts and counts[-1] == 0:
            counts = counts[:-1]
        if not counts:
            raise ValueError("empty configuration")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def plus(cls, N: int) -> "Configuration":
        """All N particles at the front."""
        return cls((N,))

    @classmethod
    def triangle(cls, N: int) -> "Configuration":
        """All N particles one unit behind the reference front."""
        return cls((0, N))

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def leaders(self) -> int:
        return self.counts[0]

    @property
    def is_canonical(self) -> bool:
        return self.counts[0] >= 1

    def as_dict(self) -> dict[int, int]:
        return {d: c for d, c in enumerate(self.counts) if c}

    def __getitem__(self, depth: int) -> int:
        return self.counts[depth] if 0 <= depth < len(self.counts) else 0


@dataclass(frozen=True)
class KernelRow:
    """Depth probabilities s_0..s_K and the mass left beyond depth K."""

    probs: np.ndarray
    residual: float
    source: Configuration

    @property
    def total(self) -> float:
        return float(math.fsum(self.probs)) + self.residual


def shift_canonical(x: Configuration) -> tuple[Configuration, int]:
    """Re-anchor ``x`` at its shallowest occupied depth; returns (x_tilde, shift)."""
    shift = next(i for i, c in enumerate(x.counts) if c)
    return (x if shift == 0 else Configuration(x.counts[shift:])), shift


def _log_survival(nz: list[tuple[int, int]], logc: np.ndarray, k: int) -> float:
    """log S_k for the occupied depths ``nz`` = [(d, x_d), ...]."""
    total = 0.0
    last = len(logc)
    for d, xd in nz:
        if d >= k:
            break
        j = k - d
        if j >= last:
            return -math.inf
        total += xd * logc[j]
    return total


def kernel_row(x: Configuration, spec: DisorderSpec, N: int) -> KernelRow:
    """Evaluate s_k(x) in log space until the remaining mass drops below 1e-12."""
    if not x.is_canonical:
        raise ValueError(f"kernel_row needs a canonical configuration (x_0 >= 1), got {x.counts}")
    if x.N != N:
        raise ValueError(f"configuration holds {x.N} particles, expected N = {N}")
    logc = log_tail_table(spec, N)
    nz = [(d, c) for d, c in enumerate(x.counts) if c]
    probs = []
    log_s = 0.0
    k = 0
    while True:
        log_next = _log_survival(nz, logc, k + 1)
        # s_k = S_k - S_{k+1} = S_k * (1 - S_{k+1}/S_k)
        probs.append(math.exp(log_s) * -math.expm1(log_next - log_s))
        k += 1
        log_s = log_next
        if log_s == -math.inf or math.exp(log_s) < ROW_RESIDUAL:
            break
    residual = 0.0 if log_s == -math.inf else math.exp(log_s)
    return KernelRow(np.array(probs), residual, x)


def _sample_depths(counts: tuple[int, ...], logc: np.ndarray, N: int,
                   rng: np.random.Generator) -> list[int]:
    """Multinomial draw over depths as sequential conditional binomials.

    The class-k conditional probability is s_k / S_k = 1 - S_{k+1}/S_k, so the
    row is generated lazily and no truncation is ever needed.
    """
    nz = [(d, c) for d, c in enumerate(counts) if c]
    y = []
    remaining = N
    log_s = 0.0
    k = 0
    while remaining:
        log_next = _log_survival(nz, logc, k + 1)
        if log_next == -math.inf:
            y.append(remaining)
            break
        p = -math.expm1(log_next - log_s)
        n = int(rng.binomial(remaining, p)) if p < 1.0 else remaining
        y.append(n)
        remaining -= n
        log_s = log_next
        k += 1
    return y


class CountsStepper:
    """Fast stepping on raw count tuples; the loop behind ``step_counts``."""

    def __init__(self, spec: DisorderSpec, N: int, rng: np.random.Generator):
        self.N = N
        self.rng = rng
        self.logc = log_tail_table(spec, N)

    def step(self, counts: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
        if counts[0] == 0:
            counts = counts[next(i for i, c in enumerate(counts) if c):]
        y = _sample_depths(counts, self.logc, self.N, self.rng)
        drop = 0
        while y[drop] == 0:
            drop += 1
        return tuple(y[drop:]), drop


def step_counts(x: Configuration, spec: DisorderSpec, N: int,
                rng: np.random.Generator) -> tuple[Configuration, int]:
    """One transition; returns the new configuration (anchored at the new front)
    and how far the front dropped."""
    if x.N != N:
        raise ValueError(f"configuration holds {x.N} particles, expected N = {N}")
    y, drop = CountsStepper(spec, N, rng).step(x.counts)
    total = sum(y)
    assert total == N, f"mass not conserved: {total} != {N}"
    return Configuration(y), drop


def iter_chain(start: Configuration, spec: DisorderSpec, N: int,
               rng: np.random.Generator) -> Iterator[tuple[tuple[int, ...], int]]:
    stepper = CountsStepper(spec, N, rng)
    counts = start.counts
    while True:
        counts, drop = stepper.step(counts)
        yield counts, drop


def run_chain(start: Configuration, spec: DisorderSpec, N: int, horizon: int,
              rng: np.random.Generator) -> list[tuple[Configuration, int]]:
    """``horizon`` successive (configuration, front_drop) pairs after ``start``."""
    if start.N != N:
        raise ValueError(f"configuration holds {start.N} particles, expected N = {N}")
    out = []
    chain = iter_chain(start, spec, N, rng)
    for _ in range(horizon):
        counts, drop = next(chain)
        out.append((Configuration(counts), drop))
    return out


def _full_row(x: Configuration, spec: DisorderSpec, N: int) -> list[float]:
    """Untruncated row (finite because every tail has finite support)."""
    logc = log_tail_table(spec, N)
    nz = [(d, c) for d, c in enumerate(x.counts) if c]
    probs, log_s, k = [], 0.0, 0
    while log_s != -math.inf:
        log_next = _log_survival(nz, logc, k + 1)
        probs.append(math.exp(log_s) * -math.expm1(log_next - log_s))
        log_s = log_next
        k += 1
    return probs


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def transition_law(x: Configuration, spec: DisorderSpec, N: int
                   ) -> dict[tuple[tuple[int, ...], int], float]:
    """Exact one-step law of (new counts, front_drop) by enumerating the multinomial.

    Cost grows like N**K; intended for small N.
    """
    xt, _ = shift_canonical(x)
    row = _full_row(xt, spec, N)
    law: dict[tuple[tuple[int, ...], int], float] = {}
    for y in _compositions(N, len(row)):
        log_p = math.lgamma(N + 1)
        for n, s in zip(y, row):
            if n:
                if s <= 0.0:
                    break
                log_p += n * math.log(s) - math.lgamma(n + 1)
        else:
            drop = next(i for i, c in enumerate(y) if c)
            key = (Configuration(y[drop:]).counts, drop)
            law[key] = law.get(key, 0.0) + math.exp(log_p)
    return law


def enumerate_configurations(N: int, max_depth: int) -> Iterator[Configuration]:
    """Every x in Omega(N) supported on depths 0..max_depth."""
    for counts in product(range(N + 1), repeat=max_depth + 1):
        if sum(counts) == N:
            yield Configuration(counts)
