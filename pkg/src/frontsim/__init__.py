"""Simulation and large-N analytics for the N-particle front with selection."""

from .analytics import (ExponentSplit, VChainSpec, expected_T_triangle_limit, expected_tau_limit,
                        g_theta, limit_speed, split_exponent)
from .counts import Configuration, kernel_row, run_chain, shift_canonical, step_counts
from .disorder import (InvalidSpec, LatticeSpec, MixtureSpec, TailSpec, TwoStateSpec, p_zero,
                       sample_xi, tail_ge)
from .particle import ParticleState, ground_state_energy, step_naive
from .renewal import CycleRecord, SpeedEstimate, collect_cycles, estimate_speed

__version__ = "0.1.0"

__all__ = [
    "Configuration", "CycleRecord", "ExponentSplit", "InvalidSpec", "LatticeSpec",
    "MixtureSpec", "ParticleState", "SpeedEstimate", "TailSpec", "TwoStateSpec", "VChainSpec",
    "collect_cycles", "estimate_speed", "expected_T_triangle_limit", "expected_tau_limit",
    "g_theta", "ground_state_energy", "kernel_row", "limit_speed", "p_zero", "run_chain",
    "sample_xi", "shift_canonical", "split_exponent", "step_counts", "step_naive", "tail_ge",
]
