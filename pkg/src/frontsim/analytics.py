"""Large-N limits of the front model and the quantities they are built from."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import solve
from scipy.stats import poisson

from .disorder import (DisorderSpec, Exponent, LatticeSpec, MixtureSpec, TwoStateSpec,
                       p_zero)

CRITICAL_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentSplit:
    """1/r = m + eta with m integer and eta in [0, 1)."""

    m: int
    eta: float
    r: Exponent

    @property
    def critical(self) -> bool:
        return self.eta == 0.0


def split_exponent(r: Exponent) -> ExponentSplit:
    """Integer and fractional parts of 1/r.

    Exact for ``Fraction`` input.  A float r counts as critical when 1/r is
    within 1e-9 of an integer; a warning flags that classification.
    """
    if r <= 0:
        raise ValueError(f"need r > 0, got {r}")
    if isinstance(r, Fraction):
        inv = 1 / r
        m = inv.numerator // inv.denominator
        return ExponentSplit(m, float(inv - m), r)
    inv = 1.0 / r
    nearest = round(inv)
    if nearest >= 1 and abs(inv - nearest) < CRITICAL_TOL:
        if inv != nearest:
            warnings.warn(f"float r={r!r} treated as critical (1/r ~ {nearest}); "
                          "pass r as a 'p/q' fraction to make this exact", stacklevel=2)
        return ExponentSplit(int(nearest), 0.0, r)
    m = math.floor(inv)
    return ExponentSplit(m, inv - m, r)


@dataclass(frozen=True)
class VChainSpec:
    """Limiting chain of leader counts: V' ~ Poisson(rho**m * G(V))."""

    rho: float
    m: int
    theta: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")

    @property
    def intensity(self) -> float:
        return self.rho ** self.m


def laplace_Y(k: int, s: float, t: int, N: int, spec: TwoStateSpec) -> float:
    """Leading-order E_k[exp(s Y(t))] = exp{(e^s - 1) k (N p0)^t}.

    The o(1) correction in the exponent is dropped, so for t >= 1 this is an
    asymptotic approximation in N, not an exact finite-N transform.  At t = 0
    Y(0) = k, so the exact value e^{sk} is returned.
    """
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    if t < 0:
        raise ValueError("need t >= 0")
    if t == 0:
        return math.exp(s * k)
    return math.exp(math.expm1(s) * k * (N * p_zero(spec, N)) ** t)


def rate_function(x: float, t: int, rho: float) -> float:
    """Cramer rate x (log x - log rho^t) + rho^t - x; +inf for x <= 0."""
    if x <= 0:
        return math.inf
    mean = rho ** t
    return x * (math.log(x) - t * math.log(rho)) + mean - x


def G_func(k: int, theta: float) -> float:
    """Limiting fraction one unit behind after a move from k leaders: 1 - theta**k, G(0) = 1."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return 1.0 if k == 0 else -math.expm1(k * math.log(theta))


def v_chain_matrix(spec: VChainSpec, k_max: int) -> np.ndarray:
    """Transition matrix on states 0..k_max; mass beyond k_max is left out."""
    lam = spec.intensity * np.array([G_func(k, spec.theta) for k in range(k_max + 1)])
    levels = np.arange(k_max + 1)
    return poisson.pmf(levels[None, :], lam[:, None])


def _truncation_level(spec: VChainSpec, tol: float) -> int:
    # rows are Poisson(intensity * G) with G <= 1, so this bounds every row's tail
    level = poisson.isf(tol * 1e-3, spec.intensity)
    if not math.isfinite(level):
        raise ConvergenceError(f"tol = {tol} is below what the Poisson tail can resolve")
    return max(2, int(level) + 1)


def _hitting_mean(spec: VChainSpec, k_max: int) -> float:
    P = v_chain_matrix(spec, k_max)
    Q = P[1:, 1:]
    h = solve(np.eye(k_max) - Q, np.ones(k_max))
    return 1.0 + float(P[0, 1:] @ h)


def g_theta(spec: VChainSpec, tol: float = 1e-10) -> float:
    """E_0[T_0]: mean number of steps for the V-chain started at 0 to return to 0.

    Solves h(t) = 1 + sum_{l >= 1} P(t -> l) h(l) on a truncated state space and
    certifies the truncation by doubling it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k_max = _truncation_level(spec, tol)
    value = _hitting_mean(spec, k_max)
    check = _hitting_mean(spec, 2 * k_max)
    if abs(check - value) > tol:
        raise ConvergenceError(f"g(theta) changed by {abs(check - value):.3g} when doubling "
                               f"the truncation level {k_max}")
    return check


def expected_tau_limit(rho: float, r: Exponent) -> float:
    """lim E[tau] from all-together: 1 + m, minus exp(-rho^m) in the critical case."""
    split = split_exponent(r)
    if split.critical:
        return 1 + split.m - math.exp(-rho ** split.m)
    return 1.0 + split.m


def expected_T_triangle_limit(spec: VChainSpec, tol: float = 1e-10) -> tuple[float, float]:
    """Critical-case limits of (E[cycle length], E[cycle displacement])."""
    g = g_theta(spec, tol)
    return (spec.m + 1) * g - 1, -g


def limit_speed(spec: DisorderSpec, tol: float = 1e-10) -> float:
    """N -> infinity limit of the front speed for any supported family."""
    if isinstance(spec, MixtureSpec):
        return spec.lambda0 + spec.scale * limit_speed(spec.lattice(), tol)
    if spec.r == 0:
        # comparison with r > 0 pins the speed between 0 and -1/(1 + floor(1/r))
        return 0.0
    split = split_exponent(spec.r)
    if not split.critical:
        return -1.0 / (1 + split.m)
    if isinstance(spec, TwoStateSpec):
        return -1.0 / expected_tau_limit(spec.rho, spec.r)
    if isinstance(spec, LatticeSpec):
        if spec.theta <= 0:
            return -1.0 / expected_tau_limit(spec.rho, spec.r)
        g = g_theta(VChainSpec(spec.rho, split.m, spec.theta), tol)
        return -1.0 / (split.m + 1 - 1.0 / g)
    raise TypeError(f"unsupported spec {spec!r}")


def limits_report(spec: DisorderSpec, tol: float = 1e-10) -> dict:
    """Every large-N limit and intermediate quantity for ``spec``, JSON-ready."""
    lat = spec.lattice() if isinstance(spec, MixtureSpec) else spec
    report: dict = {"limit_speed": limit_speed(spec, tol)}
    if lat.r == 0:
        report.update(m=None, eta=None, critical=False)
        return report
    split = split_exponent(lat.r)
    report.update(m=split.m, eta=split.eta, critical=split.critical)
    if isinstance(lat, TwoStateSpec) or lat.theta == 0:
        report["expected_tau_limit"] = expected_tau_limit(lat.rho, lat.r)
    elif split.critical:
        vspec = VChainSpec(lat.rho, split.m, lat.theta)
        g = g_theta(vspec, tol)
        length, disp = expected_T_triangle_limit(vspec, tol)
        report.update(g_theta=g, expected_cycle_length=length,
                      expected_cycle_displacement=disp)
    else:
        report.update(expected_cycle_length=split.m + 1.0, expected_cycle_displacement=-1.0)
    if isinstance(spec, MixtureSpec):
        report["lattice_limit_speed"] = limit_speed(lat, tol)
    return report
