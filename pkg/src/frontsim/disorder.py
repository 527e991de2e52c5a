"""Edge-weight laws for the N-particle front model.

Three families are supported:

``TwoStateSpec``
    xi = 0 with probability p0(N), -1 otherwise.
``LatticeSpec``
    xi on the non-positive integers: 0 with p0(N), -1 with p1(N), and with
    probability theta a tail value -k (k >= 2) drawn from a ``TailSpec``.
``MixtureSpec``
    two atoms lambda0 > lambda1 plus a real tail below lambda1.  On-lattice
    mixtures are the affine image ``lambda0 + (lambda0 - lambda1) * xi`` of a
    lattice law, which is how the counts engine runs them.

In every family p0(N) = min(1, rho * N**-(1 + r)).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

Exponent = Union[float, Fraction]

_LATTICE_TOL = 1e-9


class InvalidSpec(ValueError):
    """Raised when a disorder law is ill-defined (for the requested N)."""


def parse_exponent(value) -> Exponent:
    """Read an exponent r given as a number or as an exact ``"p/q"`` string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            frac = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidSpec(f"cannot parse exponent {value!r}") from exc
        return frac
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidSpec(f"exponent must be a number or 'p/q' string, got {value!r}")
    return float(value)


def _check_common(rho: float, r: Exponent) -> None:
    if not (rho > 0 and math.isfinite(rho)):
        raise InvalidSpec(f"rho must be positive and finite, got {rho}")
    if r < 0:
        raise InvalidSpec(f"r must be non-negative, got {r}")


@dataclass(frozen=True)
class TailSpec:
    """Law of the tail variable on depths k >= 2, i.e. P(vartheta = -k).

    ``probs`` holds ``(k, q_k)`` pairs with increasing k; the probabilities are
    renormalized on construction and ``truncation_mass`` records how much mass
    was discarded when an infinite law was cut to a finite support.
    """

    probs: tuple[tuple[int, float], ...]
    truncation_mass: float = 0.0

    def __post_init__(self):
        if not self.probs:
            raise InvalidSpec("tail needs at least one depth")
        depths = [k for k, _ in self.probs]
        if any(int(k) != k or k < 2 for k in depths):
            raise InvalidSpec(f"tail depths must be integers >= 2, got {depths}")
        if len(set(depths)) != len(depths):
            raise InvalidSpec("duplicate tail depth")
        weights = [float(q) for _, q in self.probs]
        if any(q < 0 or not math.isfinite(q) for q in weights):
            raise InvalidSpec("tail probabilities must be finite and non-negative")
        total = math.fsum(weights)
        if total <= 0:
            raise InvalidSpec("tail has zero total mass")
        if not 0.0 <= self.truncation_mass < 1.0:
            raise InvalidSpec("truncation_mass must lie in [0, 1)")
        pairs = sorted((int(k), q / total) for k, q in zip(depths, weights))
        object.__setattr__(self, "probs", tuple(pairs))

    @classmethod
    def point(cls, k: int = 2) -> "TailSpec":
        return cls(((k, 1.0),))

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, float]) -> "TailSpec":
        return cls(tuple(pmf.items()))

    @classmethod
    def truncate(cls, pmf: Callable[[int], float], tol: float = 1e-12,
                 max_depth: int = 100_000) -> "TailSpec":
        """Cut an infinite law ``pmf(k)``, k >= 2, once the kept mass reaches 1 - tol."""
        pairs, kept = [], 0.0
        for k in range(2, max_depth + 1):
            q = float(pmf(k))
            if q > 0:
                pairs.append((k, q))
                kept += q
            if kept >= 1.0 - tol:
                break
        else:
            raise InvalidSpec(f"tail mass {kept} still short of 1 - {tol} at depth {max_depth}")
        return cls(tuple(pairs), truncation_mass=max(0.0, 1.0 - kept))

    @property
    def depths(self) -> np.ndarray:
        return np.array([k for k, _ in self.probs], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([q for _, q in self.probs], dtype=float)

    @property
    def max_depth(self) -> int:
        return self.probs[-1][0]

    @property
    def mean_abs(self) -> float:
        """E|vartheta|; finite by construction."""
        return math.fsum(k * q for k, q in self.probs)


@dataclass(frozen=True)
class TwoStateSpec:
    rho: float
    r: Exponent

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "r", parse_exponent(self.r))
        _check_common(self.rho, self.r)


@dataclass(frozen=True)
class LatticeSpec:
    rho: float
    r: Exponent
    theta: float
    tail: TailSpec = TailSpec.point(2)

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "r", parse_exponent(self.r))
        object.__setattr__(self, "theta", float(self.theta))
        _check_common(self.rho, self.r)
        if not 0.0 <= self.theta < 1.0:
            raise InvalidSpec(f"theta must lie in [0, 1), got {self.theta}")


@dataclass(frozen=True)
class MixtureSpec:
    """Atoms at lambda0 (mass p0) and lambda1 (mass p1) plus a real tail below lambda1.

    ``tail`` holds ``(value, probability)`` pairs, renormalized on construction.
    """

    lambda0: float
    lambda1: float
    rho: float
    r: Exponent
    theta: float
    tail: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "rho", "theta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "r", parse_exponent(self.r))
        _check_common(self.rho, self.r)
        if not self.lambda1 < self.lambda0:
            raise InvalidSpec("need lambda1 < lambda0")
        if not 0.0 <= self.theta < 1.0:
            raise InvalidSpec(f"theta must lie in [0, 1), got {self.theta}")
        if not self.tail:
            raise InvalidSpec("mixture tail needs at least one value")
        values = [float(v) for v, _ in self.tail]
        weights = [float(q) for _, q in self.tail]
        if any(v >= self.lambda1 for v in values):
            raise InvalidSpec("mixture tail must lie strictly below lambda1")
        if any(q < 0 for q in weights) or math.fsum(weights) <= 0:
            raise InvalidSpec("mixture tail weights must be non-negative with positive sum")
        total = math.fsum(weights)
        pairs = sorted(((v, q / total) for v, q in zip(values, weights)), reverse=True)
        object.__setattr__(self, "tail", tuple(pairs))

    @property
    def scale(self) -> float:
        return self.lambda0 - self.lambda1

    def to_real(self, lattice_value):
        """Affine map from lattice units to real positions."""
        return self.lambda0 + self.scale * lattice_value

    def lattice(self) -> LatticeSpec:
        """The lattice law whose affine image is this mixture.

        Raises ``InvalidSpec`` when a tail value is not of the form
        ``lambda0 - k * (lambda0 - lambda1)`` for an integer k >= 2.
        """
        pairs = []
        for v, q in self.tail:
            depth = (self.lambda0 - v) / self.scale
            k = round(depth)
            if abs(depth - k) > _LATTICE_TOL or k < 2:
                raise InvalidSpec(
                    f"tail value {v} is off the lattice lambda0 - k*(lambda0 - lambda1); "
                    "use the naive engine for off-lattice mixtures")
            pairs.append((k, q))
        merged: dict[int, float] = {}
        for k, q in pairs:
            merged[k] = merged.get(k, 0.0) + q
        return LatticeSpec(self.rho, self.r, self.theta, TailSpec.from_pmf(merged))


DisorderSpec = Union[TwoStateSpec, LatticeSpec, MixtureSpec]


def p_zero(spec: DisorderSpec, N: int) -> float:
    """Mass of the top atom, rho * N**-(1 + r) clamped to [0, 1]."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return min(1.0, spec.rho * float(N) ** -(1.0 + float(spec.r)))


def lattice_of(spec: DisorderSpec) -> Union[TwoStateSpec, LatticeSpec]:
    """Lattice-valued law driving the counts engine for ``spec``."""
    return spec.lattice() if isinstance(spec, MixtureSpec) else spec


@lru_cache(maxsize=256)
def masses(spec: DisorderSpec, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Support values in decreasing order and their probabilities at this N."""
    p0 = p_zero(spec, N)
    if isinstance(spec, TwoStateSpec):
        values, probs = [0.0, -1.0], [p0, 1.0 - p0]
    else:
        p1 = 1.0 - p0 - spec.theta
        if p1 < -1e-15:
            raise InvalidSpec(f"p1(N) = {p1} < 0 at N = {N}: p0 + theta exceeds 1")
        p1 = max(p1, 0.0)
        if isinstance(spec, LatticeSpec):
            tail_values = [-float(k) for k, _ in spec.tail.probs]
            tail_probs = [spec.theta * q for _, q in spec.tail.probs]
            values = [0.0, -1.0] + tail_values
        else:
            tail_values = [v for v, _ in spec.tail]
            tail_probs = [spec.theta * q for _, q in spec.tail]
            values = [spec.lambda0, spec.lambda1] + tail_values
        probs = [p0, p1] + tail_probs
    values_arr = np.array(values, dtype=float)
    probs_arr = np.array(probs, dtype=float)
    values_arr.flags.writeable = False
    probs_arr.flags.writeable = False
    return values_arr, probs_arr


@lru_cache(maxsize=256)
def _cdf(spec: DisorderSpec, N: int) -> np.ndarray:
    _, probs = masses(spec, N)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return cdf


def xi_from_uniform(spec: DisorderSpec, N: int, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from uniforms to edge weights, top atom first.

    ``u < p0`` always maps to the top atom, so two laws evaluated on the same
    uniforms are ordered whenever their p0 are.
    """
    values, _ = masses(spec, N)
    idx = np.searchsorted(_cdf(spec, N), u, side="right")
    return values[np.minimum(idx, len(values) - 1)]


def sample_xi(spec: DisorderSpec, N: int, rng: np.random.Generator, size=None):
    """Draw edge weights; a scalar when ``size`` is None."""
    u = rng.random(size)
    out = xi_from_uniform(spec, N, np.asarray(u))
    return float(out) if size is None else out


def tail_ge(spec: DisorderSpec, N: int, k: int) -> float:
    """P(xi <= -k) in lattice units (for a mixture: P(xi <= lambda0 - k*scale))."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return 1.0
    lat = lattice_of(spec)
    p0 = p_zero(lat, N)
    if k == 1:
        return 1.0 - p0
    if isinstance(lat, TwoStateSpec):
        return 0.0
    masses(lat, N)  # validates p1 >= 0
    return lat.theta * math.fsum(q for d, q in lat.tail.probs if d >= k)


@lru_cache(maxsize=256)
def log_tail_table(spec: DisorderSpec, N: int) -> np.ndarray:
    """``log P(xi <= -k)`` for k = 0..K+1 in lattice units; the last entry is -inf."""
    lat = lattice_of(spec)
    masses(lat, N)
    p0 = p_zero(lat, N)
    logs = [0.0, math.log1p(-p0) if p0 < 1.0 else -math.inf]
    if isinstance(lat, LatticeSpec) and lat.theta > 0:
        cum = 0.0
        tail = dict(lat.tail.probs)
        # suffix sums of the tail, from the deepest level up
        suffix = {}
        for k in range(lat.tail.max_depth, 1, -1):
            cum += tail.get(k, 0.0)
            suffix[k] = cum
        log_theta = math.log(lat.theta)
        for k in range(2, lat.tail.max_depth + 1):
            # sum of logs: theta * suffix can underflow for tiny theta
            logs.append(log_theta + math.log(suffix[k]) if suffix[k] > 0 else -math.inf)
    logs.append(-math.inf)
    table = np.array(logs, dtype=float)
    table.flags.writeable = False
    return table


def spec_to_dict(spec: DisorderSpec) -> dict:
    def exp_repr(r):
        return f"{r.numerator}/{r.denominator}" if isinstance(r, Fraction) else r

    if isinstance(spec, TwoStateSpec):
        return {"family": "two_state", "rho": spec.rho, "r": exp_repr(spec.r)}
    if isinstance(spec, LatticeSpec):
        return {"family": "lattice", "rho": spec.rho, "r": exp_repr(spec.r),
                "theta": spec.theta,
                "tail": [[-k, q] for k, q in spec.tail.probs]}
    return {"family": "mixture", "lambda0": spec.lambda0, "lambda1": spec.lambda1,
            "rho": spec.rho, "r": exp_repr(spec.r), "theta": spec.theta,
            "tail": [[v, q] for v, q in spec.tail]}


def spec_from_dict(d: Mapping) -> DisorderSpec:
    """Build a spec from a config table (see README for the grammar)."""
    family = d.get("family")
    try:
        if family == "two_state":
            return TwoStateSpec(d["rho"], d["r"])
        tail = d.get("tail", [[-2, 1.0]])
        if family == "lattice":
            pmf: dict[int, float] = {}
            for value, q in tail:
                if float(value) != int(value) or value > -2:
                    raise InvalidSpec(f"lattice tail values must be integers <= -2, got {value}")
                pmf[-int(value)] = pmf.get(-int(value), 0.0) + float(q)
            return LatticeSpec(d["rho"], d["r"], d["theta"], TailSpec.from_pmf(pmf))
        if family == "mixture":
            return MixtureSpec(d["lambda0"], d["lambda1"], d["rho"], d["r"], d["theta"],
                               tuple((float(v), float(q)) for v, q in tail))
    except KeyError as exc:
        raise InvalidSpec(f"disorder table missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"malformed disorder table: {exc}") from exc
    raise InvalidSpec(f"unknown disorder family {family!r}")


def spec_hash(spec: DisorderSpec) -> str:
    blob = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]

