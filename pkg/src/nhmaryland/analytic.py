"""Closed-form side of the non-Hermitian Maryland model.

Everything here is an exact formula or a quadrature of an analytic periodic
integrand: Lyapunov exponents, critical strengths, the parametric spectral
curve with its branch filter, the mobility edge, and explicit eigenstates in
Fourier and physical space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (BranchAmbiguity, NearResonance, NonzeroWinding, NotExtended,
                     OutOfPhase, ResolutionTooCoarse, SingularIntegrand, SmallDivisor)
from .model import ModelParams

BRANCH_TOL = 1e-8
REAL_AXIS_TOL = 1e-12


class PhaseLabel(str, enum.Enum):
    LOCALIZED = "Localized"
    MOBILITY_EDGE = "MobilityEdge"
    DELOCALIZED = "Delocalized"
    CRITICAL = "Critical"

    def __str__(self) -> str:
        return self.value


# --------------------------------------------------------------------------
# complex angles and Lyapunov exponents

def lower_arccos(z):
    """arccos on the branch with Im <= 0 (principal value, negated when needed)."""
    phi = np.arccos(np.asarray(z, dtype=complex))
    phi = np.where(phi.imag > 0.0, -phi, phi)
    return phi[()] if phi.ndim == 0 else phi


def _arcosh_of_segment_sum(re, im_offset):
    # arcosh{[|z+2| + |z-2|]/4} for z = re + i*im_offset; the argument is >= 1
    arg = (np.hypot(2.0 + re, im_offset) + np.hypot(2.0 - re, im_offset)) / 4.0
    if np.any(arg < 1.0 - 1e-12):
        raise AssertionError("arcosh argument below 1; triangle inequality violated")
    return np.arccosh(np.maximum(arg, 1.0))


def lyapunov_exponent(E, V: float):
    """Closed-form Lyapunov exponent of the epsilon -> infinity cocycle.

    arcosh{[sqrt((2+E_R)^2 + (V-E_I)^2) + sqrt((2-E_R)^2 + (V-E_I)^2)] / 4},
    i.e. |Im phi| with cos phi = (E - iV)/2.  Vanishes exactly on the segment
    {E_I = V, |E_R| <= 2}.
    """
    if V < 0:
        raise ValueError("V must be >= 0")
    E = np.asarray(E, dtype=complex)
    out = _arcosh_of_segment_sum(E.real, V - E.imag)
    return float(out) if out.ndim == 0 else out


def lyapunov_exponent_at(E, V: float, epsilon: float):
    """Lyapunov exponent of the chain at finite epsilon.

    The acceleration of the complexified cocycle is quantized, so the
    exponent is the larger of the two asymptotic branches,
    max(|Im phi_-|, |Im phi_+| - 2 epsilon) with cos phi_pm = (E +- iV)/2.
    It coincides with :func:`lyapunov_exponent` wherever the first branch
    dominates; the two differ inside the region bounded by the spectral loops
    and on the part of the segment that does not carry extended states.
    """
    E = np.asarray(E, dtype=complex)
    minus = _arcosh_of_segment_sum(E.real, V - E.imag)
    plus = _arcosh_of_segment_sum(E.real, V + E.imag)
    out = np.maximum(minus, plus - 2.0 * epsilon)
    return float(out) if out.ndim == 0 else out


def critical_epsilons(V: float) -> tuple[float, float]:
    """(epsilon_1, epsilon_2): onsets of the mobility-edge and delocalized phases."""
    if V <= 0:
        raise ValueError("V must be > 0")
    eps1 = 0.5 * math.asinh(V)
    a = (2.0 + V * V) / 2.0
    eps2 = 0.5 * math.acosh(math.sqrt(a + math.sqrt(a * a - 1.0)))
    return eps1, eps2


def classify_phase(epsilon: float, V: float, rtol: float = 1e-12) -> PhaseLabel:
    if V <= 0:
        raise ValueError("V must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    eps1, eps2 = critical_epsilons(V)
    if math.isclose(epsilon, eps1, rel_tol=rtol) or math.isclose(epsilon, eps2, rel_tol=rtol):
        return PhaseLabel.CRITICAL
    if epsilon < eps1:
        return PhaseLabel.LOCALIZED
    if epsilon < eps2:
        return PhaseLabel.MOBILITY_EDGE
    return PhaseLabel.DELOCALIZED


# --------------------------------------------------------------------------
# spectral curve and branch filter

@dataclass(frozen=True)
class BranchAngles:
    phi_plus: complex
    phi_minus: complex

    @property
    def gap(self) -> float:
        """Im(phi_- - phi_+), equal to 2 epsilon on the point spectrum."""
        return float(np.imag(self.phi_minus - self.phi_plus))


def _branch_arrays(E, epsilon, V, tol, on_curve):
    E = np.asarray(E, dtype=complex)
    phi_p = lower_arccos((E + 1j * V) / 2.0)
    phi_m = lower_arccos((E - 1j * V) / 2.0)
    im_p, im_m = np.imag(phi_p), np.imag(phi_m)
    valid = (im_p < im_m) & (im_m < 0.0)
    if on_curve:
        valid &= np.abs((im_m - im_p) - 2.0 * epsilon) < tol
    return phi_p, phi_m, valid


def branch_condition(E: complex, epsilon: float, V: float, *, tol: float = BRANCH_TOL,
                     on_curve: bool = True) -> tuple[BranchAngles, bool]:
    """Branch angles phi_pm and whether E carries an exponentially localized state.

    ``on_curve=False`` drops the Im(phi_- - phi_+) = 2 epsilon check and only
    tests the ordering Im(phi_+) < Im(phi_-) < 0.
    """
    if V <= 0:
        raise ValueError("V must be > 0")
    phi_p, phi_m, valid = _branch_arrays(E, epsilon, V, tol, on_curve)
    return BranchAngles(complex(phi_p), complex(phi_m)), bool(valid)


def _curve_squared(omega, epsilon, V):
    z = np.asarray(omega, dtype=float) + 1j * epsilon
    c, s = np.cos(z), np.sin(z)
    return 4.0 * c * c + V * V * (c * c) / (s * s)


def curve_identity_residual(E, omega, epsilon, V):
    """|E^2/(4cos^2 z) - V^2/(4sin^2 z) - 1| with z = omega + i epsilon."""
    z = np.asarray(omega, dtype=float) + 1j * epsilon
    c, s = np.cos(z), np.sin(z)
    return np.abs(np.asarray(E) ** 2 / (4.0 * c * c) - V * V / (4.0 * s * s) - 1.0)


def spectral_curve_point(omega: float, epsilon: float, V: float,
                         previous: complex | None = None) -> complex:
    """E(omega) = sqrt(4cos^2(omega+i eps) + V^2 cot^2(omega+i eps)) with Im E >= 0.

    On the real axis both roots qualify; ``previous`` (the neighbouring
    sample) then picks the continuous one.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    root = complex(np.sqrt(_curve_squared(omega, epsilon, V)))
    if root.imag < 0:
        root = -root
    if abs(root.imag) < REAL_AXIS_TOL and root.real != 0.0:
        if previous is None:
            raise BranchAmbiguity(
                f"E(omega={omega}) = +-{abs(root.real):.6g} is real; pass the "
                "neighbouring sample to resolve by continuity")
        if abs(-root - previous) < abs(root - previous):
            root = -root
    return root


def spectral_curve(omegas, epsilon: float, V: float) -> np.ndarray:
    """Vectorised :func:`spectral_curve_point` with continuity on the real axis."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    E = np.sqrt(_curve_squared(omegas, epsilon, V))
    E = np.where(E.imag < 0, -E, E)
    ambiguous = np.flatnonzero((np.abs(E.imag) < REAL_AXIS_TOL) & (E.real != 0.0))
    if ambiguous.size:
        clear = np.flatnonzero(~np.isin(np.arange(E.size), ambiguous))
        if clear.size == 0:
            raise BranchAmbiguity("every sample lies on the real axis")
        for i in ambiguous:
            j = clear[np.argmin(np.abs(clear - i))]
            if abs(-E[i] - E[j]) < abs(E[i] - E[j]):
                E[i] = -E[i]
    return E


@dataclass
class CurveSamples:
    """Struct-of-arrays sampling of the parametric curve."""

    omega: np.ndarray
    energy: np.ndarray
    branch_valid: np.ndarray
    self_test: np.ndarray

    def __len__(self) -> int:
        return self.omega.size

    def take(self, idx) -> "CurveSamples":
        return CurveSamples(self.omega[idx], self.energy[idx],
                            self.branch_valid[idx], self.self_test[idx])


def sample_curve(epsilon: float, V: float, resolution: int = 1024) -> CurveSamples:
    omega = np.linspace(0.0, math.pi, resolution, endpoint=False)
    energy = spectral_curve(omega, epsilon, V)
    _, _, valid = _branch_arrays(energy, epsilon, V, BRANCH_TOL, True)
    return CurveSamples(omega, energy, valid, curve_identity_residual(energy, omega, epsilon, V))


@dataclass
class LoopSet:
    arcs: list[CurveSamples]
    phase_label: PhaseLabel
    loop_count: int
    samples: CurveSamples
    epsilon: float = 0.0
    V: float = 1.0

    def points(self) -> np.ndarray:
        """All branch-valid energies, concatenated."""
        if not self.arcs:
            return np.empty(0, dtype=complex)
        return np.concatenate([a.energy for a in self.arcs])

    def polygons(self) -> list[np.ndarray]:
        return [a.energy for a in self.arcs]


_LABEL_BY_COUNT = {0: PhaseLabel.DELOCALIZED, 1: PhaseLabel.LOCALIZED, 2: PhaseLabel.MOBILITY_EDGE}


def _cyclic_runs(mask: np.ndarray) -> list[np.ndarray]:
    n = mask.size
    if mask.all():
        return [np.arange(n)]
    if not mask.any():
        return []
    start = int(np.flatnonzero(~mask)[0])
    order = (np.arange(n) + start) % n
    runs, current = [], []
    for i in order:
        if mask[i]:
            current.append(i)
        elif current:
            runs.append(np.array(current))
            current = []
    if current:
        runs.append(np.array(current))
    return runs


def point_spectrum_loops(epsilon: float, V: float, resolution: int = 1024,
                         max_resolution: int = 1 << 18) -> LoopSet:
    """Branch-valid arcs of the spectral curve, grouped into loops.

    The curve is pi-periodic in omega, so runs of valid samples are grouped
    cyclically.  Isolated valid or invalid samples (noise at the junctions
    with the segment) trigger a doubling of the resolution.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if resolution < 256:
        raise ValueError("resolution must be >= 256")
    res = resolution
    while True:
        samples = sample_curve(epsilon, V, res)
        runs = _cyclic_runs(samples.branch_valid)
        gaps = _cyclic_runs(~samples.branch_valid)
        if len(runs) <= 2 and all(r.size >= 2 for r in runs) and all(g.size >= 2 for g in gaps):
            break
        res *= 2
        if res > max_resolution:
            raise ResolutionTooCoarse(
                f"{len(runs)} valid runs persist at resolution {res // 2}")
    arcs = [samples.take(r) for r in runs]
    return LoopSet(arcs, _LABEL_BY_COUNT[len(arcs)], len(arcs), samples, epsilon, V)


def _curve_near(omega, epsilon, V, reference):
    """Curve point at ``omega`` on the root nearest ``reference`` (continuity on the real axis)."""
    root = np.sqrt(_curve_squared(omega, epsilon, V))
    return np.where(np.abs(root - reference) <= np.abs(-root - reference), root, -root)


def loop_distance(points, loops: LoopSet, iterations: int = 60) -> np.ndarray:
    """Distance from each point to the branch-valid arcs of the curve.

    The nearest sample brackets the minimiser between its neighbours; a
    golden-section search in omega then resolves the distance to the curve
    itself, which matters where |dE/d omega| is large.
    """
    from scipy.spatial import cKDTree

    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if loops.loop_count == 0:
        return np.full(pts.shape, np.inf)
    omega = np.concatenate([a.omega for a in loops.arcs])
    energy = np.concatenate([a.energy for a in loops.arcs])
    starts = np.cumsum([0] + [len(a) for a in loops.arcs])
    lo_idx = np.empty(omega.size, dtype=int)
    hi_idx = np.empty(omega.size, dtype=int)
    for k in range(len(loops.arcs)):
        i0, i1 = starts[k], starts[k + 1]
        idx = np.arange(i0, i1)
        lo_idx[idx] = np.maximum(idx - 1, i0)
        hi_idx[idx] = np.minimum(idx + 1, i1 - 1)
    tree = cKDTree(np.column_stack([energy.real, energy.imag]))
    d0, j = tree.query(np.column_stack([pts.real, pts.imag]))
    ref = energy[j]
    step = math.pi / len(loops.samples)
    # arcs are cyclic runs, so neighbours may straddle omega = 0; work with offsets
    a = -np.where(lo_idx[j] != j, step, 0.0)
    b = np.where(hi_idx[j] != j, step, 0.0)
    w0 = omega[j]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    eps, V = loops.epsilon, loops.V

    def dist(t):
        return np.abs(_curve_near(w0 + t, eps, V, ref) - pts)

    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = dist(c), dist(d)
    for _ in range(iterations):
        left = fc < fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        c_new = np.where(left, b - g * (b - a), d)
        d_new = np.where(left, c, a + g * (b - a))
        fc, fd = np.where(left, dist(c_new), fd), np.where(left, fc, dist(d_new))
        c, d = c_new, d_new
    return np.minimum(d0, np.minimum(fc, fd))


def point_in_polygon(point: complex, polygon: np.ndarray) -> bool:
    """Even-odd ray casting test for a closed polygon given as complex vertices."""
    x, y = point.real, point.imag
    xs, ys = polygon.real, polygon.imag
    xj, yj = np.roll(xs, 1), np.roll(ys, 1)
    crosses = ((ys > y) != (yj > y))
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = (xj - xs) * (y - ys) / (yj - ys) + xs
    return bool(np.count_nonzero(crosses & (x < x_cross)) % 2)


def enclosure_count(point: complex, loops: LoopSet) -> int:
    return sum(point_in_polygon(point, arc) for arc in loops.polygons())


# --------------------------------------------------------------------------
# mobility edge

def segment_angle_imag(omega, V: float):
    """|Im phi| with cos phi = iV + cos omega (closed form, no arccos)."""
    c2 = np.cos(np.asarray(omega, dtype=float)) ** 2
    a = (1.0 + V * V + c2) / 2.0
    out = np.arccosh(np.sqrt(a + np.sqrt(a * a - c2)))
    return float(out) if np.ndim(out) == 0 else out


def extended_cos_bound(epsilon: float, V: float) -> float:
    """Bound c such that E = iV + 2cos(omega) is extended iff |cos omega| < c.

    0 marks an empty window (below epsilon_1) and 1 the whole segment
    (above epsilon_2).
    """
    eps1, eps2 = critical_epsilons(V)
    if epsilon <= eps1:
        return 0.0
    if epsilon >= eps2:
        return 1.0
    s = math.sinh(2.0 * epsilon)
    return min(1.0, math.cosh(2.0 * epsilon) * math.sqrt(max(0.0, 1.0 - V * V / (s * s))))


def mobility_edge_omega0(epsilon: float, V: float) -> tuple[float, float]:
    """(omega_0, E_0) with cos omega_0 = cosh(2eps) sqrt(1 - V^2/sinh^2(2eps)), E_0 = 2cos omega_0."""
    eps1, eps2 = critical_epsilons(V)
    tol = 1e-12
    if epsilon < eps1 - tol or epsilon > eps2 + tol:
        raise OutOfPhase(
            f"epsilon={epsilon} outside [{eps1:.6g}, {eps2:.6g}]; the window is "
            + ("empty" if epsilon < eps1 else "the whole segment"))
    s = math.sinh(2.0 * epsilon)
    c = math.cosh(2.0 * epsilon) * math.sqrt(max(0.0, 1.0 - V * V / (s * s)))
    c = min(c, 1.0)
    return math.acos(c), 2.0 * c


def is_extended(omega, epsilon: float, V: float):
    """True where iV + 2cos(omega) carries a normalisable delta-comb solution."""
    out = np.abs(np.cos(omega)) < extended_cos_bound(epsilon, V)
    return bool(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# solvability

def solvability_residual(E: complex, epsilon: float, V: float,
                         quadrature_points: int = 2048, *, stability: float = 1e-10,
                         max_points: int = 1 << 22) -> float:
    """(1/2pi) * integral of log|g(x)| over a period, by periodic trapezoid rule.

    The grid starts at ``quadrature_points`` and doubles until two successive
    values agree to ``stability``.
    """
    if quadrature_points < 64:
        raise ValueError("quadrature_points must be >= 64")
    n = 1 << int(math.ceil(math.log2(quadrature_points)))
    previous = None
    while True:
        x = 2.0 * math.pi * np.arange(n) / n
        c = 2.0 * np.cos(x)
        num = np.abs(E + 1j * V - c)
        den = np.abs(E - 1j * V - c)
        if den.min() < 1e-10 * V or num.min() < 1e-10 * V:
            raise SingularIntegrand(f"E={E} lies on the segment; log|g| is singular")
        value = float(np.mean(np.log(num) - np.log(den))) - 2.0 * epsilon
        if previous is not None and abs(value - previous) < stability:
            return value
        previous = value
        n *= 2
        if n > max_points:
            return value


# --------------------------------------------------------------------------
# extended states

@dataclass
class ExtendedStateSolution:
    """Delta-comb amplitudes U_l (l = -1, -2, ...) of an extended eigenstate.

    ``U[k]`` holds U_{-(k+1)}; ``G[k]`` holds G_{-k} for k = 0..len(U), so
    ``G[0]`` is G_0 = -i.
    """

    omega: float
    energy: complex
    U: np.ndarray
    G: np.ndarray
    decay_rate: float
    predicted_rate: float
    fit_r2: float
    cutoff: float

    @property
    def l_values(self) -> np.ndarray:
        return -np.arange(1, self.U.size + 1)

    def amplitude(self, l: int) -> complex:
        if l >= 0:
            return 0j
        k = -l - 1
        return complex(self.U[k]) if k < self.U.size else 0j


def _W(x, E, V):
    return (-E + 2.0 * np.cos(x)) / V


def extended_state_amplitudes(omega: float, params: ModelParams, cutoff: float = 1e-12,
                              fit_terms: int = 4096, max_terms: int = 1_000_000
                              ) -> ExtendedStateSolution:
    """Amplitudes of the delta-comb solution on the segment, E = iV + 2cos(omega).

    U_{-1} = 1 and U_{l-1} = e^{2i theta - 2 eps} (1+iG_l)/(1-iG_l) U_l for l <= -1;
    U_l = 0 for l >= 0.  Stored down to |U_l| < cutoff; the decay rate is a
    least-squares slope of log|U_l| over ``max(fit_terms, stored)`` terms,
    accumulated in log space.
    """
    V, eps, alpha = params.V, params.epsilon, params.alpha
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    if V <= 0 or eps <= 0:
        raise NotExtended("extended states need V > 0 and epsilon > 0")
    predicted = 2.0 * eps - segment_angle_imag(omega, V)
    if not is_extended(omega, eps, V) or predicted <= 0:
        raise NotExtended(
            f"omega={omega} is outside the extended window at epsilon={eps} "
            f"(asymptotic rate {predicted:.4g} <= 0)")
    E = 1j * V + 2.0 * math.cos(omega)
    phase = complex(math.cos(2 * params.theta), math.sin(2 * params.theta)) * math.exp(-2 * eps)
    log_phase = -2.0 * eps

    chunk = 4096
    G_all = [np.array([-1j])]
    logs = [np.array([0.0])]
    U_parts = [np.array([1.0 + 0j])]
    current, log_current = 1.0 + 0j, 0.0
    stored_done = False
    k = 1  # index of l = -k
    n_stored = 1
    while True:
        ls = -np.arange(k, k + chunk)
        G = _W(omega + 2.0 * math.pi * alpha * ls, E, V)
        ratio = (1.0 + 1j * G) / (1.0 - 1j * G)
        G_all.append(G)
        step_logs = log_phase + np.log(np.abs(ratio))
        cum = log_current + np.cumsum(step_logs)
        logs.append(cum)
        if not stored_done:
            vals = current * np.cumprod(phase * ratio)
            small = np.flatnonzero(np.abs(vals) < cutoff)
            if small.size:
                vals = vals[:small[0] + 1]
                stored_done = True
            U_parts.append(vals)
            n_stored += vals.size
            current = vals[-1]
        log_current = cum[-1]
        k += chunk
        total = k
        if stored_done and total >= fit_terms + 1:
            break
        if total > max_terms:
            raise NotExtended(f"|U_l| did not fall below {cutoff} within {max_terms} terms")
    U = np.concatenate(U_parts)[:n_stored]
    G = np.concatenate(G_all)[:n_stored + 1]
    log_u = np.concatenate(logs)[:max(fit_terms, n_stored)]
    lvals = np.arange(1, log_u.size + 1, dtype=float)
    slope, intercept = np.polyfit(lvals, log_u, 1)
    fitted = slope * lvals + intercept
    ss_res = float(np.sum((log_u - fitted) ** 2))
    ss_tot = float(np.sum((log_u - log_u.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExtendedStateSolution(omega, E, U, G, -float(slope), predicted, r2, cutoff)


@dataclass
class ExtendedWavefunction:
    n: np.ndarray
    psi: np.ndarray
    tail_bound: float


def extended_state_wavefunction(solution: ExtendedStateSolution, params: ModelParams,
                                n_range: tuple[int, int],
                                resonance_guard: float = 1e-8) -> ExtendedWavefunction:
    """Physical-space amplitudes psi_n, n in [n_min, n_max], of an extended state.

    psi(x) = u(x) / (1 - iW(x)) is a comb at x_l = omega + 2 pi alpha l.  For
    l <= -1 its weights are V U_l / (2i(cos omega - cos x_l)).  At x_0 = omega
    the factor 1 - iW vanishes, so that weight is not fixed by u; the
    recurrence for psi itself gives
    Psi_0 = e^{2 eps - 2i theta} (1 - iG_{-1}) Psi_{-1} / (1 + iG_0).
    """
    V, eps, alpha, theta = params.V, params.epsilon, params.alpha, params.theta
    omega = solution.omega
    n_lo, n_hi = n_range
    n = np.arange(n_lo, n_hi + 1)
    ls = solution.l_values
    x_l = omega + 2.0 * math.pi * alpha * ls
    den = math.cos(omega) - np.cos(x_l)
    bad = np.abs(den) < resonance_guard
    if np.any(bad & (np.abs(solution.U) >= solution.cutoff)):
        l_bad = int(ls[np.flatnonzero(bad)[0]])
        raise NearResonance(f"small denominator at l={l_bad}; raise the cutoff or move omega")
    weights = V * solution.U / (2j * den)
    G_m1, G_0 = solution.G[1], solution.G[0]
    psi0 = (math.exp(2 * eps) * complex(math.cos(2 * theta), -math.sin(2 * theta))
            * (1 - 1j * G_m1) * weights[0] / (1 + 1j * G_0))
    psi = np.exp(-1j * np.outer(n, x_l)) @ weights + psi0 * np.exp(-1j * n * omega)
    psi /= 2.0 * math.pi
    # geometric tail estimate from the last stored amplitude and the fitted rate
    q = math.exp(-max(solution.decay_rate, 1e-12))
    tail = abs(solution.U[-1]) * q / (1 - q) * V / (4 * math.pi * max(np.abs(den).min(), resonance_guard))
    return ExtendedWavefunction(n, psi, float(tail))


def chain_residual(params: ModelParams, n: np.ndarray, psi: np.ndarray, E: complex) -> np.ndarray:
    """(H psi - E psi)_n on interior sites of an infinite-chain segment."""
    pot = params.V * np.tan(math.pi * params.alpha * n[1:-1] + params.theta + 1j * params.epsilon)
    return psi[2:] + psi[:-2] + (pot - E) * psi[1:-1]


# --------------------------------------------------------------------------
# localized states in Fourier space

@dataclass
class LocalizedFourierProfile:
    omega: float
    energy: complex
    Omega0: complex
    Omega: np.ndarray          # Omega_n for n = -harmonics..harmonics
    harmonics: int
    alpha: float
    functional_residual: float
    winding: int

    def u(self, x) -> np.ndarray:
        """u(x) = exp(-i Omega_0 x - sum_{n != 0} pi alpha Omega_n e^{in(x + pi alpha)} / sin(pi alpha n))."""
        return _u_from_coefficients(np.asarray(x, dtype=float), self.Omega0, self.Omega,
                                    self.harmonics, self.alpha)

    def Omega_n(self, n: int) -> complex:
        return complex(self.Omega[n + self.harmonics])


def _u_from_coefficients(x, Omega0, Omega, harmonics, alpha):
    ns = np.arange(-harmonics, harmonics + 1)
    keep = ns != 0
    ns, coef = ns[keep], Omega[keep]
    factor = math.pi * alpha * coef / np.sin(math.pi * alpha * ns)
    series = np.exp(1j * np.outer(x + math.pi * alpha, ns)) @ factor
    return np.exp(-1j * Omega0 * x - series)


def fourier_coefficients_of_log(log_g: np.ndarray, alpha: float, harmonics: int):
    """Omega_n = -i/(4 pi^2 alpha) * integral_{-pi}^{pi} log g(x) e^{-inx} dx.

    ``log_g`` is sampled on the uniform grid x_k = -pi + 2 pi k / N.
    """
    N = log_g.size
    if N < 2 * harmonics + 1:
        raise ValueError("grid too coarse for the requested harmonics")
    ns = np.arange(-harmonics, harmonics + 1)
    for nn in ns[ns != 0]:
        if abs(math.sin(math.pi * alpha * nn)) < 1e-6:
            raise SmallDivisor(f"|sin(pi alpha n)| < 1e-6 at n={nn}")
    c = np.fft.fft(log_g) / N
    # x_k starts at -pi, so the FFT picks up a factor e^{i n pi}
    c_n = c[ns % N] * np.where(ns % 2 == 0, 1.0, -1.0)
    return -1j * c_n / (2.0 * math.pi * alpha)


def localized_fourier_profile(omega: float, params: ModelParams, harmonics: int = 128,
                              grid_points: int | None = None,
                              residual_points: int = 512) -> LocalizedFourierProfile:
    """Fourier-space solution u(x) of u(x - 2 pi alpha) = g(x) u(x) for a localized state."""
    V, eps, alpha, theta = params.V, params.epsilon, params.alpha, params.theta
    if harmonics < 32:
        raise ValueError("harmonics must be >= 32")
    E = spectral_curve_point(omega, eps, V, previous=spectral_curve_point(omega + 1e-3, eps, V)
                             if abs(np.sqrt(_curve_squared(omega, eps, V)).imag) < REAL_AXIS_TOL
                             else None)
    _, valid = branch_condition(E, eps, V)
    if not valid:
        raise OutOfPhase(f"E(omega={omega}) = {E:.6g} is not on the point spectrum")
    N = grid_points or max(4096, 1 << int(math.ceil(math.log2(16 * harmonics))))

    def g(x):
        W = _W(x, E, V)
        return (math.exp(-2 * eps) * complex(math.cos(2 * theta), math.sin(2 * theta))
                * (1 + 1j * W) / (1 - 1j * W))

    x = -math.pi + 2.0 * math.pi * np.arange(N) / N
    gx = g(x)
    arg = np.unwrap(np.angle(gx))
    closing = np.angle(gx[0]) + 2 * math.pi * round((arg[-1] - np.angle(gx[0])) / (2 * math.pi))
    total_turn = np.unwrap(np.append(np.angle(gx), np.angle(gx[0])))
    winding = int(round((total_turn[-1] - total_turn[0]) / (2 * math.pi)))
    del closing
    if winding != 0:
        raise NonzeroWinding(f"g(x) winds {winding} times around the origin")
    log_g = np.log(np.abs(gx)) + 1j * arg
    Omega = fourier_coefficients_of_log(log_g, alpha, harmonics)
    Omega0 = complex(Omega[harmonics])

    xr = -math.pi + 2.0 * math.pi * np.arange(residual_points) / residual_points
    u_x = _u_from_coefficients(xr, Omega0, Omega, harmonics, alpha)
    u_shift = _u_from_coefficients(xr - 2 * math.pi * alpha, Omega0, Omega, harmonics, alpha)
    resid = float(np.max(np.abs(u_shift - g(xr) * u_x)) / np.max(np.abs(u_x)))
    return LocalizedFourierProfile(omega, E, Omega0, Omega, harmonics, alpha, resid, winding)


def constant_log_profile(value: complex, alpha: float, harmonics: int = 32,
                         grid_points: int = 256) -> np.ndarray:
    """Omega_n for g(x) = exp(value); the non-zero harmonics vanish identically."""
    return fourier_coefficients_of_log(np.full(grid_points, value, dtype=complex), alpha, harmonics)


Evaluator = Callable[[np.ndarray], np.ndarray]
