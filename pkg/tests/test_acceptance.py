"""Acceptance criteria 1-10.

Each test records a single PASS/FAIL line (shown in the pytest terminal summary)
before asserting.  Run ``pytest tests/test_acceptance.py -v`` to see them.
"""
import math

import numpy as np
from scipy.stats import chi2, poisson

import oracles
from frontsim.analytics import VChainSpec, g_theta, limit_speed
from frontsim.cli import main
from frontsim.counts import (Configuration, CountsStepper, enumerate_configurations,
                             kernel_row, transition_law)
from frontsim.disorder import LatticeSpec, MixtureSpec, TailSpec, TwoStateSpec, p_zero
from frontsim.particle import run_coupled_two_state
from frontsim.renewal import collect_cycles, estimate_speed, replicate_stream

SEED = 20240601


def tv(a: dict, b: dict) -> float:
    return 0.5 * math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def failed(checks: dict) -> str:
    bad = [k for k, v in checks.items() if not v]
    return f"; failed: {', '.join(bad)}" if bad else ""


def speed_run(spec, N, n_cycles, index=0):
    cycles = collect_cycles(spec, N, n_cycles, replicate_stream(SEED, N, index))
    return estimate_speed(cycles, N=N, spec=spec), cycles


def test_criterion_01_kernel_exactness(report):
    spec = TwoStateSpec(1.0, 0.5)
    worst, checked = 0.0, 0
    for N in (1, 2, 3):
        for x in enumerate_configurations(N, 2):
            positions = [-d for d, c in enumerate(x.counts) for _ in range(c)]
            brute = oracles.brute_force_two_state(positions, p_zero(spec, N))
            worst = max(worst, tv(transition_law(x, spec, N), brute))
            checked += 1
    ok = worst < 1e-10
    report(1, ok, f"max TV {worst:.2e} over {checked} configurations (N = 1..3)")
    assert ok


def test_criterion_02_telescoping_and_mass(report):
    rng = np.random.default_rng(SEED)
    families = [
        TwoStateSpec(1.0, 0.5),
        LatticeSpec(0.5, 1.0, 0.5, TailSpec.from_pmf({2: 0.5, 3: 0.3, 6: 0.2})),
        MixtureSpec(2.0, 1.0, 0.4, 0.4, 0.6, ((0.0, 0.7), (-3.0, 0.3))),
    ]
    steppers = {}
    worst_row, bad_mass, n = 0.0, 0, 10**5
    for i in range(n):
        spec = families[i % 3]
        N = int(np.exp(rng.uniform(0, math.log(10**6))))
        width = int(rng.integers(1, 9))
        counts = rng.multinomial(N, rng.dirichlet(np.ones(width)))
        x = Configuration(counts)
        xt = Configuration(counts[np.flatnonzero(counts)[0]:])
        worst_row = max(worst_row, abs(kernel_row(xt, spec, N).total - 1.0))
        key = (i % 3, N)
        if key not in steppers:
            steppers[key] = CountsStepper(spec, N, rng)
        y, _ = steppers[key].step(x.counts)
        bad_mass += sum(y) != N
    ok = worst_row < 1e-10 and bad_mass == 0
    report(2, ok, f"max |sum s_k - 1| = {worst_row:.1e}, mass violations {bad_mass} / {n}")
    assert ok


def test_criterion_03_noncritical_two_state_speed(report):
    N = 10**5
    est, _ = speed_run(TwoStateSpec(1.0, 0.4), N, 20_000)
    target = -1 / 3
    tol = max(3 * est.stderr, 0.01)
    ok = abs(est.v_hat - target) < tol
    exact = -1 / oracles.expected_tau(N, 1.0, 0.4)
    report(3, ok, f"v_hat {est.v_hat:.5f} +- {est.stderr:.5f}, limit {target:.5f}, "
                  f"tol {tol:.4f}; exact finite-N speed {exact:.5f}")
    assert ok


def test_criterion_04_critical_two_state_speed(report):
    spec = TwoStateSpec(1.0, "1/2")
    limit = -1 / (3 - math.exp(-1))
    big, cycles = speed_run(spec, 10**5, 100_000)
    small, _ = speed_run(spec, 10**3, 100_000)
    L = np.array([c.cycle_length for c in cycles], dtype=float)
    len_se = L.std() / math.sqrt(len(L))
    checks = {
        "speed": abs(big.v_hat - limit) < max(3 * big.stderr, 0.01),
        "cycle length": abs(L.mean() - (3 - math.exp(-1))) < max(3 * len_se, 0.01),
        "monotone": abs(big.v_hat - limit) < abs(small.v_hat - limit),
        "limit formula": math.isclose(limit_speed(spec), limit, rel_tol=1e-14),
    }
    ok = all(checks.values())
    report(4, ok, f"v_hat(1e5) {big.v_hat:.5f} +- {big.stderr:.5f}, v_hat(1e3) "
                  f"{small.v_hat:.5f}, limit {limit:.5f}, mean length {L.mean():.4f}"
                  + failed(checks))
    assert ok


def test_criterion_05_poisson_limit(report):
    N, n = 10**5, 10**5
    stepper = CountsStepper(TwoStateSpec(1.0, "1/2"), N, replicate_stream(SEED, N, 5))
    z0 = np.empty(n, dtype=np.int64)
    for i in range(n):
        y, d1 = stepper.step((N,))
        y, d2 = stepper.step(y)
        z0[i] = y[0] if d1 + d2 == 0 else 0
    top = 6
    observed = np.array([np.sum(z0 == k) for k in range(top)] + [np.sum(z0 >= top)])
    probs = np.append(poisson.pmf(np.arange(top), 1.0), poisson.sf(top - 1, 1.0))
    expected = n * probs
    stat = float(np.sum((observed - expected) ** 2 / expected))
    p = float(chi2.sf(stat, len(observed) - 1))
    ok = p > 0.001
    report(5, ok, f"chi-square {stat:.2f} on {len(observed) - 1} df, p = {p:.3f}, "
                  f"mean Z0(2) {z0.mean():.4f}")
    assert ok


def test_criterion_06_critical_lattice_speed(report):
    spec = LatticeSpec(1.0, 1.0, 0.5, TailSpec.point(2))
    g = g_theta(VChainSpec(1.0, 1, 0.5))
    target = -1 / (2 - 1 / g)
    est, cycles = speed_run(spec, 10**5, 40_000)
    L = np.array([c.cycle_length for c in cycles], dtype=float)
    M = np.array([c.n_moves for c in cycles], dtype=float)

    def close(x, want):
        return abs(x.mean() - want) < max(3 * x.std() / math.sqrt(len(x)), 0.01)

    checks = {
        "speed": abs(est.v_hat - target) < max(3 * est.stderr, 0.01),
        "cycle length": close(L, 2 * g - 1),
        "moves per cycle": close(M, g),
    }
    ok = all(checks.values())
    report(6, ok, f"v_hat {est.v_hat:.5f} +- {est.stderr:.5f} vs {target:.5f} (g = {g:.6f}); "
                  f"length {L.mean():.4f} vs {2 * g - 1:.4f}; moves {M.mean():.4f}"
                  + failed(checks))
    assert ok


def test_criterion_07_g_endpoints(report):
    low = g_theta(VChainSpec(1.0, 1, 1e-8))
    high = g_theta(VChainSpec(1.0, 1, 1 - 1e-8))
    grid = [g_theta(VChainSpec(1.0, 1, th)) for th in np.linspace(0.05, 0.95, 19)]
    ok = (abs(low - math.e) < 1e-6 and abs(high - (2 - math.exp(-1))) < 1e-6
          and min(grid) >= 1 and all(a >= b for a, b in zip(grid, grid[1:])))
    report(7, ok, f"g(1e-8) - e = {low - math.e:.1e}, g(1-1e-8) - (2-1/e) = "
                  f"{high - 2 + math.exp(-1):.1e}, grid {grid[0]:.4f} .. {grid[-1]:.4f}")
    assert ok


def test_criterion_08_zero_exponent(report):
    N = 10**4
    paths, horizon, ordered = 20, 2000, 0
    for path in range(paths):
        low, high = run_coupled_two_state(1.0, 0.0, 0.4, N, horizon,
                                          replicate_stream(SEED, N, path, purpose=2))
        ordered += bool(np.all(low >= high))
    est, _ = speed_run(TwoStateSpec(1.0, 0.0), N, 1000)
    ok = ordered == paths and -0.05 < est.v_hat <= 0
    report(8, ok, f"ordered paths {ordered}/{paths}; v_hat(r=0, N=1e4) {est.v_hat:.5f}")
    assert ok


def test_criterion_09_mixture_reduction(report):
    N = 10**5
    lat = LatticeSpec(1.0, 1.0, 0.5, TailSpec.point(2))
    mix = MixtureSpec(2.0, 1.0, 1.0, 1.0, 0.5, ((0.0, 1.0),))
    v_lat, _ = speed_run(lat, N, 40_000)
    v_mix, _ = speed_run(mix, N, 40_000)
    target = limit_speed(mix)
    affine = abs(v_mix.v_hat - (2.0 + 1.0 * v_lat.v_hat)) < 1e-12
    close = abs(v_mix.v_hat - target) < max(3 * v_mix.stderr, 0.01)
    ok = affine and close and math.isclose(target, 2.0 + limit_speed(lat), rel_tol=1e-14)
    report(9, ok, f"v_hat mixture {v_mix.v_hat:.5f} = 2 + ({v_lat.v_hat:.5f}); "
                  f"limit {target:.5f}")
    assert ok


def test_criterion_10_determinism(report, tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text("""
seed = 99
N = [100, 10000]
engine = "counts"
n_cycles = 2000
replicates = 3

[disorder]
family = "lattice"
rho = 1.0
r = 1
theta = 0.5
tail = [[-2, 0.5], [-3, 0.5]]
""")
    blobs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        blobs.append((out / "results.csv").read_bytes())
    ok = blobs[0] == blobs[1]
    report(10, ok, f"results.csv identical across runs ({len(blobs[0])} bytes)")
    assert ok
