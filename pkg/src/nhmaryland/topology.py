"""Point-gap winding numbers from flux threading: determinant phase and spectral flow."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .analytic import PhaseLabel
from .errors import BaseOnSpectrum, BreakdownPivot, MatchingAmbiguity
from .model import ModelParams, RationalApproximant, ring_potential
from .spectral import build_real_space_hamiltonian, eigendecompose

JUMP_LIMIT = math.pi / 2
MAX_BISECTIONS = 24
DEGENERACY_FLOOR = 1e-7
W2_NUDGE = 2e-4


class Method(str, enum.Enum):
    DETERMINANT = "Determinant"
    SPECTRAL_FLOW = "SpectralFlow"


@dataclass
class WindingResult:
    base_energy: complex
    winding: int
    phase_trace: list[tuple[float, float]]
    method: Method
    max_step_jump: float
    raw_winding: float = 0.0


# --------------------------------------------------------------------------
# determinant

def _batched_log_det(potentials: np.ndarray, E_B: complex):
    """Mantissa m and log scale s with det(H - E_B) = m e^s for each row of potentials.

    Uses det = tr(prod_n [[V_n - E, -1], [1, 0]]) - 2(-1)^L with the running
    product rescaled at every site.
    """
    k, L = potentials.shape
    a = np.ones(k, dtype=complex)
    b = np.zeros(k, dtype=complex)
    c = np.zeros(k, dtype=complex)
    d = np.ones(k, dtype=complex)
    log_scale = np.zeros(k)
    for n in range(L):
        m = potentials[:, n] - E_B
        a, b, c, d = m * a - c, m * b - d, a, b
        nrm = np.maximum.reduce([np.abs(a), np.abs(b), np.abs(c), np.abs(d)])
        a, b, c, d = a / nrm, b / nrm, c / nrm, d / nrm
        log_scale += np.log(nrm)
    corner = 2.0 * (-1.0) ** L * np.exp(-log_scale)
    return a + d - corner, log_scale


def periodic_tridiagonal_log_determinant(params: ModelParams, approx: RationalApproximant,
                                         flux_theta, E_B: complex, *, fallback: bool = True):
    """(mantissa, log_scale) of det(H(flux) - E_B) for one flux value or an array of them."""
    if approx.q < 3:
        raise ValueError("ring must have at least 3 sites")
    thetas = np.atleast_1d(np.asarray(flux_theta, dtype=float))
    pots = np.stack([ring_potential(params, approx, float(t)) for t in thetas])
    mant, scale = _batched_log_det(pots, E_B)
    bad = ~(np.isfinite(mant) & np.isfinite(scale)) | (np.abs(mant) < 1e-300)
    if np.any(bad):
        if not fallback:
            raise BreakdownPivot("transfer product broke down; dense LU needed")
        for i in np.flatnonzero(bad):
            H = build_real_space_hamiltonian(params, approx, float(thetas[i])).data
            sign, logdet = np.linalg.slogdet(H - E_B * np.eye(approx.q))
            mant[i], scale[i] = sign, logdet
    if np.ndim(flux_theta) == 0:
        return complex(mant[0]), float(scale[0])
    return mant, scale


def periodic_tridiagonal_determinant(params: ModelParams, approx: RationalApproximant,
                                     flux_theta: float, E_B: complex) -> complex:
    """det(H(flux_theta) - E_B) of the periodic ring in O(L)."""
    mant, scale = periodic_tridiagonal_log_determinant(params, approx, flux_theta, E_B)
    return mant * math.exp(scale) if scale < 700 else complex(mant * np.exp(np.longdouble(scale)))


# --------------------------------------------------------------------------
# winding by determinant phase

def _check_off_spectrum(E_B, params, approx, min_distance, probes=(0.0, math.pi / 3, 2 * math.pi / 3)):
    for th in probes:
        w = eigendecompose(build_real_space_hamiltonian(params, approx, th), vectors=False).eigenvalues
        dist = float(np.min(np.abs(w - E_B)))
        if dist < min_distance:
            raise BaseOnSpectrum(
                f"E_B={E_B} lies {dist:.2e} from an eigenvalue at flux {th:.4f}")


def _det_phase(params, approx, thetas, E_B):
    mant, _ = periodic_tridiagonal_log_determinant(params, approx, thetas, E_B)
    return np.angle(mant)


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def _adaptive_phase(params, approx, E_B, a, b, pa, pb, depth):
    """Unwrapped phase increment from a to b, bisecting while a step exceeds pi/2."""
    step = _wrap(pb - pa)
    if abs(step) < JUMP_LIMIT:
        return step, [(b, step)], abs(step)
    if depth >= MAX_BISECTIONS:
        raise BaseOnSpectrum(
            f"phase jump {step:.3f} unresolved on [{a:.6g}, {b:.6g}]; E_B is on or next to the spectral flow")
    m = 0.5 * (a + b)
    pm = float(_det_phase(params, approx, np.array([m]), E_B)[0])
    s1, t1, j1 = _adaptive_phase(params, approx, E_B, a, m, pa, pm, depth + 1)
    s2, t2, j2 = _adaptive_phase(params, approx, E_B, m, b, pm, pb, depth + 1)
    return s1 + s2, t1 + t2, max(j1, j2)


def _winding_determinant(E_B, params, approx, theta_steps, min_distance, check_spectrum):
    if check_spectrum:
        _check_off_spectrum(E_B, params, approx, min_distance)
    thetas = np.linspace(0.0, math.pi, theta_steps + 1)
    phases = _det_phase(params, approx, thetas, E_B)
    total = 0.0
    trace = [(0.0, 0.0)]
    max_jump = 0.0
    for i in range(theta_steps):
        step, sub, jump = _adaptive_phase(params, approx, E_B, thetas[i], thetas[i + 1],
                                          phases[i], phases[i + 1], 0)
        for th, inc in sub:
            total += inc
            trace.append((float(th), total))
        max_jump = max(max_jump, jump)
    return _finish(E_B, total, trace, Method.DETERMINANT, max_jump)


def _finish(E_B, total, trace, method, max_jump):
    raw = total / (2 * math.pi)
    w = int(round(raw))
    if abs(raw - w) > 1e-3:
        raise BaseOnSpectrum(f"accumulated phase {raw:.5f} x 2pi is not an integer")
    return WindingResult(complex(E_B), w, trace, method, max_jump, raw)


# --------------------------------------------------------------------------
# spectral flow

@dataclass
class SpectralFlow:
    thetas: np.ndarray
    eigenvalues: np.ndarray          # (n_theta, L); column l follows trajectory l
    end_permutation: np.ndarray      # trajectory l ends on the theta = 0 eigenvalue end_permutation[l]
    initial: np.ndarray = field(repr=False, default=None)

    @property
    def L(self) -> int:
        return self.eigenvalues.shape[1]

    def cycle_lengths(self) -> list[int]:
        return permutation_cycles(self.end_permutation)

    def is_single_cycle(self) -> bool:
        return self.cycle_lengths() == [self.L]

    def swept_angles(self, E_B: complex) -> np.ndarray:
        """Delta phi_l: total angle swept by E_l(theta) - E_B over the flux path."""
        rel = self.eigenvalues - E_B
        steps = np.angle(rel[1:] / rel[:-1])
        return steps.sum(axis=0)


def permutation_cycles(perm: np.ndarray) -> list[int]:
    seen = np.zeros(perm.size, dtype=bool)
    lengths = []
    for start in range(perm.size):
        if seen[start]:
            continue
        n, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = int(perm[j])
            n += 1
        lengths.append(n)
    return sorted(lengths, reverse=True)


def match_eigenvalues(current: np.ndarray, nxt: np.ndarray, ambiguity: float = 0.1,
                      floor: float = DEGENERACY_FLOOR) -> np.ndarray:
    """Greedy nearest-neighbour bijection current[i] -> nxt[perm[i]].

    Raises MatchingAmbiguity when the runner-up is within ``ambiguity``
    (relative) of the best candidate, unless both sit on the same
    degenerate point, or when the greedy choice collides.
    """
    L = current.size
    k = min(4, L)
    tree = cKDTree(np.column_stack([nxt.real, nxt.imag]))
    dist, idx = tree.query(np.column_stack([current.real, current.imag]), k=k)
    dist, idx = dist.reshape(L, k), idx.reshape(L, k)
    taken = np.zeros(L, dtype=bool)
    perm = np.empty(L, dtype=int)
    for i in np.argsort(dist[:, 0], kind="stable"):
        d1 = dist[i, 0]
        choice = None
        for j in range(k):
            cand = idx[i, j]
            same_point = abs(nxt[cand] - nxt[idx[i, 0]]) <= floor
            if j > 0 and not same_point:
                break
            if not taken[cand]:
                choice = cand
                break
        if choice is None:
            raise MatchingAmbiguity(f"eigenvalue {current[i]} has no free match")
        if k > 1:
            # nearest candidate that is a genuinely different point
            others = [dist[i, j] for j in range(1, k)
                      if abs(nxt[idx[i, j]] - nxt[idx[i, 0]]) > floor]
            if others and d1 > floor and others[0] < (1.0 + ambiguity) * d1:
                raise MatchingAmbiguity(
                    f"candidates at {d1:.3e} and {others[0]:.3e} from {current[i]}")
        taken[choice] = True
        perm[i] = choice
    return perm


def _eigvals_at(params, approx, theta):
    return eigendecompose(build_real_space_hamiltonian(params, approx, theta), vectors=False).eigenvalues


def spectral_flow_trace(params: ModelParams, approx: RationalApproximant, theta_steps: int = 64,
                        max_refinements: int = 12) -> SpectralFlow:
    """Follow every eigenvalue of the ring as the flux runs over [0, pi].

    Steps whose matching is ambiguous are bisected up to ``max_refinements`` times.
    """
    if theta_steps < 32:
        raise ValueError("theta_steps must be >= 32")
    grid = list(np.linspace(0.0, math.pi, theta_steps + 1))
    values = [_eigvals_at(params, approx, t) for t in grid]
    thetas = [grid[0]]
    track = [values[0]]
    for i in range(theta_steps):
        _advance(params, approx, grid[i], grid[i + 1], values[i + 1], thetas, track, 0, max_refinements)
    start = track[0]
    end_perm = match_eigenvalues(track[-1], start)
    return SpectralFlow(np.array(thetas), np.array(track), end_perm, start)


def _advance(params, approx, a, b, vb, thetas, track, depth, max_depth):
    cur = track[-1]
    try:
        perm = match_eigenvalues(cur, vb)
    except MatchingAmbiguity:
        if depth >= max_depth:
            raise
        m = 0.5 * (a + b)
        vm = _eigvals_at(params, approx, m)
        _advance(params, approx, a, m, vm, thetas, track, depth + 1, max_depth)
        _advance(params, approx, m, b, vb, thetas, track, depth + 1, max_depth)
        return
    thetas.append(b)
    track.append(vb[perm])


def _winding_flow(E_B, params, approx, theta_steps, min_distance):
    flow = spectral_flow_trace(params, approx, max(theta_steps, 32))
    if np.min(np.abs(flow.eigenvalues - E_B)) < min_distance:
        raise BaseOnSpectrum(f"E_B={E_B} lies on the spectral flow")
    rel = flow.eigenvalues - E_B
    steps = np.angle(rel[1:] / rel[:-1])
    cumulative = np.cumsum(steps.sum(axis=1))
    trace = [(0.0, 0.0)] + [(float(t), float(s)) for t, s in zip(flow.thetas[1:], cumulative)]
    return _finish(E_B, float(cumulative[-1]), trace, Method.SPECTRAL_FLOW, float(np.abs(steps).max()))


def winding_number(E_B: complex, params: ModelParams, approx: RationalApproximant,
                   theta_steps: int = 256, method: Method | str = Method.DETERMINANT,
                   min_distance: float = 1e-4, check_spectrum: bool = True) -> WindingResult:
    """w(E_B) = (1/2 pi i) integral_0^pi d/dtheta log det(H(theta/L) - E_B) dtheta."""
    if theta_steps < 64:
        raise ValueError("theta_steps must be >= 64")
    method = Method(method)
    if method is Method.DETERMINANT:
        return _winding_determinant(complex(E_B), params, approx, theta_steps, min_distance,
                                    check_spectrum)
    return _winding_flow(complex(E_B), params, approx, theta_steps, min_distance)


@dataclass
class Diagnosis:
    w1: int
    w2: int
    phase: PhaseLabel
    base1: complex
    base2: complex


def phase_from_windings(w1: int, w2: int) -> PhaseLabel:
    if w1 != w2:
        return PhaseLabel.MOBILITY_EDGE
    return PhaseLabel.LOCALIZED if w1 == 1 else PhaseLabel.DELOCALIZED


def mobility_edge_diagnosis(params: ModelParams, approx: RationalApproximant,
                            theta_steps: int = 256) -> Diagnosis:
    """(w1, w2, phase) from windings around iV and iV + 2.

    Fibonacci rings keep an eigenvalue pinned at iV + 2 for every flux, so when
    that base sits on the spectrum it is moved outward to iV + 2 + 2e-4; the
    base actually used is reported.
    """
    base1 = 1j * params.V
    w1 = winding_number(base1, params, approx, theta_steps).winding
    base2 = 2.0 + 1j * params.V
    try:
        w2 = winding_number(base2, params, approx, theta_steps).winding
    except BaseOnSpectrum:
        base2 = base2 + W2_NUDGE
        w2 = winding_number(base2, params, approx, theta_steps).winding
    return Diagnosis(w1, w2, phase_from_windings(w1, w2), base1, base2)
