"""Model parameters, rational approximants and the complex tan potential."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import PoleProximity

GOLDEN_ALPHA = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_POLE_GUARD = 1e-8

ArrayLike = Union[int, float, np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the non-Hermitian Maryland chain.

    Hopping is fixed to one.  ``theta`` is stored reduced into ``[0, pi)``
    because the potential only depends on it modulo pi.
    """

    V: float
    epsilon: float
    theta: float = 0.0
    alpha: float = GOLDEN_ALPHA

    def __post_init__(self):
        if not (self.V >= 0.0 and math.isfinite(self.V)):
            raise ValueError(f"V must be finite and >= 0, got {self.V}")
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        reduced = math.fmod(float(self.theta), math.pi)
        if reduced < 0.0:
            reduced += math.pi
        if reduced >= math.pi:
            reduced = 0.0
        object.__setattr__(self, "theta", reduced)

    @property
    def mu(self) -> complex:
        return quasi_energy(self)

    def replace(self, **changes) -> "ModelParams":
        values = dict(V=self.V, epsilon=self.epsilon, theta=self.theta, alpha=self.alpha)
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True, order=True)
class RationalApproximant:
    p: int
    q: int = field()

    def __post_init__(self):
        if not (isinstance(self.p, (int, np.integer)) and isinstance(self.q, (int, np.integer))):
            raise TypeError("p and q must be integers")
        if not 0 < self.p < self.q:
            raise ValueError(f"need 0 < p < q, got {self.p}/{self.q}")
        if math.gcd(int(self.p), int(self.q)) != 1:
            raise ValueError(f"{self.p}/{self.q} is not in lowest terms")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))

    @property
    def value(self) -> float:
        return self.p / self.q

    @property
    def size(self) -> int:
        return self.q

    def __str__(self) -> str:
        return f"{self.p}/{self.q}"

    @classmethod
    def parse(cls, text: str) -> "RationalApproximant":
        try:
            p, q = text.split("/")
            return cls(int(p), int(q))
        except ValueError as exc:
            raise ValueError(f"cannot parse approximant {text!r}; expected 'p/q'") from exc


def fibonacci_approximants(count: int) -> list[RationalApproximant]:
    """First ``count`` ratios F_n / F_{n+1} with 0 < F_n < F_{n+1}: 1/2, 2/3, 3/5, ..."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    a, b = 1, 2
    for _ in range(count):
        out.append(RationalApproximant(a, b))
        a, b = b, a + b
    return out


def fibonacci_approximant(index: int) -> RationalApproximant:
    """Approximant whose denominator is the Fibonacci number F_index (F_1 = F_2 = 1).

    ``index`` must be >= 3; F_13 = 233, F_14 = 377 and F_15 = 610.
    """
    if index < 3:
        raise ValueError("Fibonacci index must be >= 3 (denominator >= 2)")
    return fibonacci_approximants(index - 2)[-1]


def approximant_for_size(q: int) -> RationalApproximant:
    """Fibonacci approximant with denominator exactly ``q``."""
    a, b = 1, 2
    while b < q:
        a, b = b, a + b
    if b != q:
        raise ValueError(f"{q} is not a Fibonacci number >= 2")
    return RationalApproximant(a, b)


def complex_tan(x: ArrayLike, eps: ArrayLike) -> np.ndarray | complex:
    """tan(x + i*eps) for real x and eps >= 0, without overflow at large eps.

    Uses tan(x+iy) = (sin 2x + i sinh 2y) / (cos 2x + cosh 2y) with numerator
    and denominator divided by cosh 2y.
    """
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps, dtype=float)
    t = np.exp(-2.0 * np.abs(eps))
    t2 = t * t
    sech = 2.0 * t / (1.0 + t2)
    tanh = np.sign(eps) * (1.0 - t2) / (1.0 + t2)
    num = np.sin(2.0 * x) * sech + 1j * tanh
    den = np.cos(2.0 * x) * sech + 1.0
    out = num / den
    return out[()] if out.ndim == 0 else out


def _pole_distance(arg: np.ndarray) -> np.ndarray:
    shifted = np.mod(arg - math.pi / 2.0, math.pi)
    return np.minimum(shifted, math.pi - shifted)


def potential_value(params: ModelParams, alpha_eff: float, n: ArrayLike, *,
                    ring_size: int | None = None,
                    pole_guard: float = DEFAULT_POLE_GUARD):
    """V tan(pi * alpha_eff * n + theta_arg + i*epsilon).

    theta_arg is ``params.theta`` on the infinite chain, or
    ``params.theta / ring_size`` for the flux-threaded ring.
    """
    theta_arg = params.theta if ring_size is None else params.theta / ring_size
    arg = math.pi * alpha_eff * np.asarray(n, dtype=float) + theta_arg
    if params.epsilon == 0.0 and np.any(_pole_distance(arg) < pole_guard):
        raise PoleProximity(
            "Hermitian potential evaluated within "
            f"{pole_guard:g} of a tan pole")
    return params.V * complex_tan(arg, params.epsilon)


def ring_phases(approx: RationalApproximant, flux_theta: float = 0.0,
                sites: np.ndarray | None = None) -> np.ndarray:
    """Real part of the tan argument on a ring, pi*(p*n mod q)/q + flux_theta/q.

    The integer reduction keeps the phase exact for large n.
    """
    if sites is None:
        sites = np.arange(1, approx.q + 1)
    reduced = (approx.p * np.asarray(sites, dtype=np.int64)) % approx.q
    return math.pi * reduced / approx.q + flux_theta / approx.q


def ring_potential(params: ModelParams, approx: RationalApproximant,
                   flux_theta: float, pole_guard: float = DEFAULT_POLE_GUARD) -> np.ndarray:
    """On-site potential for sites n = 1..q of the ring threaded by flux ``flux_theta``."""
    arg = ring_phases(approx, flux_theta)
    if params.epsilon == 0.0 and np.any(_pole_distance(arg) < pole_guard):
        raise PoleProximity("ring potential hits a tan pole at epsilon = 0")
    return params.V * complex_tan(arg, params.epsilon)


def quasi_energy(params: ModelParams) -> complex:
    """Floquet quasi-energy mu = -2(theta + i epsilon) of the associated kicked problem."""
    return -2.0 * complex(params.theta, params.epsilon)
