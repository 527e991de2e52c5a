"""Renewal cycles of the front and the speed estimator built on them.

A cycle starts with every particle at the front and ends at the first time
the configuration, measured from the previous front, is all N particles one
unit behind it.  Cycles are i.i.d., so the front speed is the ratio of mean
displacement to mean cycle length.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import particle
from .counts import Configuration, CountsStepper
from .disorder import DisorderSpec, MixtureSpec, lattice_of

DEFAULT_CYCLE_CAP = 1_000_000

COUNTS, NAIVE = "counts", "naive"


class CycleCapExceeded(RuntimeError):
    """A renewal cycle ran longer than the configured cap."""


@dataclass(frozen=True)
class CycleRecord:
    tau_increments: tuple[int, ...]
    move_depths: tuple[float, ...]
    cycle_length: int
    displacement: float

    @property
    def n_moves(self) -> int:
        return len(self.tau_increments)


@dataclass(frozen=True)
class SpeedEstimate:
    v_hat: float
    stderr: float
    n_cycles: int
    mean_cycle_length: float
    mean_moves_per_cycle: float
    N: Optional[int] = None
    spec: Optional[DisorderSpec] = field(default=None, compare=False)


def replicate_stream(seed: int, N: int, index: int, purpose: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for (purpose, N, index) under a master seed.

    The key is passed as the ``spawn_key`` of a ``SeedSequence``, so streams
    for different keys are independent and reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, N, index)))


def _displacement(spec: DisorderSpec, length: int, depth_sum: float) -> float:
    if isinstance(spec, MixtureSpec):
        return spec.lambda0 * length - spec.scale * depth_sum
    return -float(depth_sum)


def _counts_cycles(spec, N, n_cycles, rng, cap, start, trace):
    stepper = CountsStepper(lattice_of(spec), N, rng)
    plus = (N,)
    counts = plus if start is None else start.counts
    cycles = []
    for _ in range(n_cycles):
        taus, depths = [], []
        t = last = 0
        while True:
            counts, drop = stepper.step(counts)
            t += 1
            if trace is not None:
                trace.append((len(trace) + 1, drop, counts))
            if drop:
                taus.append(t - last)
                depths.append(drop)
                last = t
                if drop == 1 and counts == plus:
                    break
            if t >= cap:
                raise CycleCapExceeded(f"cycle exceeded {cap} steps at N = {N}")
        cycles.append(CycleRecord(tuple(taus), tuple(depths), t,
                                  _displacement(spec, t, sum(depths))))
        counts = plus
    return cycles


def _naive_cycles(spec, N, n_cycles, rng, cap, start):
    if isinstance(spec, MixtureSpec):
        top, scale = spec.lambda0, spec.scale
    else:
        top, scale = 0.0, 1.0
    tol = 1e-9 * max(1.0, abs(top), scale)  # absolute, for real-valued mixtures
    if start is None:
        state = particle.ParticleState.zeros(N)
    else:
        offsets = -scale * np.repeat(np.arange(len(start.counts)), start.counts).astype(float)
        state = particle.ParticleState(offsets, 0.0)
    cycles = []
    for _ in range(n_cycles):
        taus, depths = [], []
        t = last = 0
        origin = state.front
        while True:
            new = particle.step_naive(state, spec, rng)
            t += 1
            drop = (top - (new.front - state.front)) / scale
            state = new
            if drop * scale > tol:
                rounded = round(drop)
                depth = rounded if abs(drop - rounded) * scale <= tol else drop
                taus.append(t - last)
                depths.append(depth)
                last = t
                if depth == 1 and np.all(state.offsets > -tol):
                    break
            if t >= cap:
                raise CycleCapExceeded(f"cycle exceeded {cap} steps at N = {N}")
        cycles.append(CycleRecord(tuple(taus), tuple(depths), t, state.front - origin))
    return cycles


def collect_cycles(spec: DisorderSpec, N: int, n_cycles: int, rng: np.random.Generator,
                   engine: str = COUNTS, cap: int = DEFAULT_CYCLE_CAP,
                   start: Optional[Configuration] = None,
                   trace: Optional[list] = None) -> list[CycleRecord]:
    """Run until ``n_cycles`` complete renewal cycles have been observed.

    The first cycle starts from ``start`` (default: all particles together);
    every later one starts from the renewal state.  With ``engine="naive"``
    the particles themselves are simulated.  ``trace``, if given, receives one
    ``(t, front_drop, counts)`` tuple per step (counts engine only).
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    if start is not None and start.N != N:
        raise ValueError(f"start holds {start.N} particles, expected N = {N}")
    if engine == COUNTS:
        return _counts_cycles(spec, N, n_cycles, rng, cap, start, trace)
    if engine == NAIVE:
        return _naive_cycles(spec, N, n_cycles, rng, cap, start)
    raise ValueError(f"unknown engine {engine!r}")


def _replicate_job(args):
    spec, N, n, seed, index, engine, cap, purpose = args
    return collect_cycles(spec, N, n, replicate_stream(seed, N, index, purpose), engine, cap)


def split_counts(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts) if base + (i < extra) > 0]


def collect_cycles_parallel(spec: DisorderSpec, N: int, n_cycles: int, seed: int,
                            replicates: int = 1, engine: str = COUNTS,
                            cap: int = DEFAULT_CYCLE_CAP,
                            workers: Optional[int] = None,
                            purpose: int = 0) -> list[CycleRecord]:
    """Split the cycles over seeded replicates and concatenate them in replicate order.

    The output depends on (seed, N, replicates) only, never on ``workers``.
    """
    sizes = split_counts(n_cycles, replicates)
    jobs = [(spec, N, n, seed, i, engine, cap, purpose) for i, n in enumerate(sizes)]
    if workers is None:
        workers = int(os.environ.get("FRONTSIM_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_replicate_job, jobs))
    else:
        parts = [_replicate_job(job) for job in jobs]
    return [c for part in parts for c in part]


def estimate_speed(cycles: Sequence[CycleRecord], batch_size: int = 1,
                   N: Optional[int] = None, spec: Optional[DisorderSpec] = None) -> SpeedEstimate:
    """Ratio estimator sum(displacement) / sum(cycle_length).

    The standard error comes from the delta method applied to batch totals of
    ``batch_size`` consecutive cycles (cycles are i.i.d., so 1 is the default).
    """
    n = len(cycles)
    if n < 2:
        raise ValueError("need at least two cycles")
    lengths = np.array([c.cycle_length for c in cycles], dtype=float)
    disp = np.array([c.displacement for c in cycles], dtype=float)
    total_len = lengths.sum()
    if total_len <= 0:
        raise ValueError("degenerate cycles: total length is zero")
    v_hat = math.fsum(disp) / float(total_len)
    edges = np.arange(0, n, batch_size)
    batch_len = np.add.reduceat(lengths, edges)
    batch_disp = np.add.reduceat(disp, edges)
    nb = len(edges)
    if nb < 2:
        stderr = math.nan
    else:
        resid = batch_disp - v_hat * batch_len
        stderr = math.sqrt(nb / (nb - 1) * float(np.sum(resid**2))) / total_len
    moves = np.array([c.n_moves for c in cycles], dtype=float)
    return SpeedEstimate(v_hat, stderr, n, float(lengths.mean()), float(moves.mean()), N, spec)


def count_front_moves(trajectory) -> int:
    """N_t: number of steps in a (configuration, front_drop) trajectory where the front moved."""
    return sum(1 for _, drop in trajectory if drop >= 1)
