"""Finite rings: Hamiltonians in real and Fourier space, diagonalisation, IPR,
transfer matrices and the long-double eigenvalue polisher."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg

from .errors import (ConvergenceFailure, LengthMismatch, PoleProximity,
                     ResonantDenominator, ZeroVector)
from .model import DEFAULT_POLE_GUARD, ModelParams, RationalApproximant, ring_potential

MAX_DIMENSION = 2048
RESIDUAL_CONTRACT = 1e-8
PI_LD = np.longdouble("3.14159265358979323846264338327950288")


class Structure(str, enum.Enum):
    TRIDIAGONAL_PLUS_CORNERS = "TridiagonalPlusCorners"
    TRIANGULAR_PLUS_WRAP = "TriangularPlusWrap"
    DENSE = "Dense"


class StateClass(str, enum.Enum):
    LOCALIZED = "Localized"
    EXTENDED = "Extended"

    def __str__(self) -> str:
        return self.value


@dataclass
class ComplexMatrix:
    data: np.ndarray
    structure: Structure = Structure.DENSE
    params: ModelParams | None = None
    approx: RationalApproximant | None = None
    flux_theta: float = 0.0

    @property
    def L(self) -> int:
        return self.data.shape[0]


def _require_nonhermitian(params: ModelParams):
    if params.epsilon <= 0.0:
        raise ValueError("finite-ring diagonalisation needs epsilon > 0; the "
                         "Hermitian limit has an unbounded potential")


def build_real_space_hamiltonian(params: ModelParams, approx: RationalApproximant,
                                 flux_theta: float = 0.0) -> ComplexMatrix:
    """Ring of L = q sites with V tan(pi p n/q + flux_theta/L + i eps) on site n = 1..L."""
    _require_nonhermitian(params)
    L = approx.q
    H = np.zeros((L, L), dtype=complex)
    H[np.arange(L), np.arange(L)] = ring_potential(params, approx, flux_theta)
    idx = np.arange(L - 1)
    H[idx, idx + 1] = 1.0
    H[idx + 1, idx] = 1.0
    H[0, L - 1] += 1.0
    H[L - 1, 0] += 1.0
    return ComplexMatrix(H, Structure.TRIDIAGONAL_PLUS_CORNERS, params, approx, flux_theta)


def hopping_coefficient(l: int, epsilon: float) -> complex:
    """S_l: 2i(-e^{-2 eps})^{|l|} for l <= -1, i for l = 0, and 0 for l >= 1."""
    if l >= 1:
        return 0j
    if l == 0:
        return 1j
    return 2j * (-math.exp(-2.0 * epsilon)) ** (-l)


def fourier_diagonal(approx: RationalApproximant, V: float) -> np.ndarray:
    n = np.arange(1, approx.q + 1)
    reduced = (approx.p * n) % approx.q
    return 2.0 * np.cos(2.0 * math.pi * reduced / approx.q) + 1j * V


def build_fourier_hamiltonian(params: ModelParams, approx: RationalApproximant,
                              flux_theta: float = 0.0,
                              tail_cutoff: float | None = None) -> ComplexMatrix:
    """Ring Hamiltonian in the momentum basis of :func:`fourier_map`.

    Row n carries 2cos(2 pi p n/q) + iV on the diagonal and the one-way hopping
    V S_{-k} to component n + k, k >= 1.  Components past the end wrap with
    phi_{n+L} = e^{2i flux_theta} phi_n.  By default every wrap is summed in
    closed form (a geometric series in c = (-e^{-2eps})^L e^{2i flux_theta});
    ``tail_cutoff`` instead drops hoppings with |S| below it.
    """
    _require_nonhermitian(params)
    L, V = approx.q, params.V
    r = math.exp(-2.0 * params.epsilon)
    n = np.arange(L)
    k = n[None, :] - n[:, None]              # j - n
    wrap = np.exp(2j * flux_theta)
    if tail_cutoff is None:
        c = (-r) ** L * wrap
        base = 2j * V * (-r) ** k.astype(float)
        H = np.where(k > 0, base / (1.0 - c), base * c / (1.0 - c))
    else:
        kmax = max(1, int(math.ceil(math.log(2.0 / tail_cutoff) / (2.0 * params.epsilon))))
        H = np.zeros((L, L), dtype=complex)
        for hop in range(1, kmax + 1):
            cols = n + hop
            phase = wrap ** (cols // L)
            H[n, cols % L] += 2j * V * (-r) ** hop * phase
    H[n, n] += fourier_diagonal(approx, V)
    return ComplexMatrix(H, Structure.TRIANGULAR_PLUS_WRAP, params, approx, flux_theta)


def fourier_map(state, approx: RationalApproximant, theta: float = 0.0,
                direction: str = "forward") -> np.ndarray:
    """phi_n = L^{-1/2} sum_l psi_l e^{2 pi i (p/q) n l + 2i theta n / L}, n, l = 1..L.

    ``direction="inverse"`` applies the adjoint.  Conjugating the real-space
    ring Hamiltonian with this map gives :func:`build_fourier_hamiltonian`.
    """
    v = np.asarray(state, dtype=complex)
    L = approx.q
    if v.shape[0] != L:
        raise LengthMismatch(f"state has length {v.shape[0]}, ring has {L} sites")
    idx = np.arange(1, L + 1)
    F = np.exp(2j * math.pi * ((approx.p * np.outer(idx, idx)) % L) / L)
    F *= np.exp(2j * theta * idx / L)[:, None]
    F /= math.sqrt(L)
    if direction == "forward":
        return F @ v
    if direction == "inverse":
        return F.conj().T @ v
    raise ValueError("direction must be 'forward' or 'inverse'")


# --------------------------------------------------------------------------
# diagonalisation

@dataclass
class StateDiagnostics:
    ipr: np.ndarray
    localization_center: np.ndarray
    classified: np.ndarray        # StateClass values
    ambiguous: np.ndarray         # IPR inside the guard band
    tau: float


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray | None
    residuals: np.ndarray | None

    def __len__(self) -> int:
        return self.eigenvalues.size

    def diagnostics(self, tau: float | None = None, band: tuple[float, float] = (2.0, 10.0)
                    ) -> StateDiagnostics:
        if self.right_eigenvectors is None:
            raise ValueError("eigenvectors were not computed")
        return state_diagnostics(self.right_eigenvectors, tau=tau, band=band)


def lexicographic_order(values: np.ndarray) -> np.ndarray:
    return np.lexsort((values.imag, values.real))


def eigendecompose(matrix: ComplexMatrix | np.ndarray, *, vectors: bool = True,
                   max_dimension: int = MAX_DIMENSION) -> SpectralDecomposition:
    """All eigenpairs via LAPACK, sorted by (Re, Im); vectors are unit-normalised."""
    H = matrix.data if isinstance(matrix, ComplexMatrix) else np.asarray(matrix, dtype=complex)
    L = H.shape[0]
    if L > max_dimension:
        raise ValueError(f"dimension {L} exceeds the configured maximum {max_dimension}")
    try:
        if vectors:
            w, v = scipy.linalg.eig(H, check_finite=True)
        else:
            w, v = scipy.linalg.eigvals(H, check_finite=True), None
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigenvalue iteration failed: {exc}") from exc
    bad = np.flatnonzero(~np.isfinite(w))
    if bad.size:
        raise ConvergenceFailure("non-finite eigenvalue", int(bad[0]))
    order = lexicographic_order(w)
    w = w[order]
    residuals = None
    if v is not None:
        v = v[:, order]
        v = v / np.linalg.norm(v, axis=0)
        scale = np.linalg.norm(H, 2) if L <= 64 else np.linalg.norm(H, 1)
        residuals = np.linalg.norm(H @ v - v * w, axis=0) / max(scale, 1e-300)
    return SpectralDecomposition(w, v, residuals)


def ipr(state) -> float:
    """sum |psi|^4 / (sum |psi|^2)^2."""
    a = np.abs(np.asarray(state))
    peak = a.max(initial=0.0)
    if peak == 0.0:
        raise ZeroVector("IPR of the zero vector is undefined")
    p = (a / peak) ** 2
    total = p.sum()
    if total == 0.0:
        raise ZeroVector("IPR of the zero vector is undefined")
    return float(np.sum(p * p) / (total * total))


def state_diagnostics(vectors: np.ndarray, tau: float | None = None,
                      band: tuple[float, float] = (2.0, 10.0)) -> StateDiagnostics:
    """IPR, max-modulus site and Localized/Extended label for each column.

    tau defaults to 5/L; IPR values in [band[0]/L, band[1]/L] are flagged ambiguous.
    """
    L = vectors.shape[0]
    p = np.abs(vectors) ** 2
    totals = p.sum(axis=0)
    if np.any(totals == 0.0):
        raise ZeroVector("zero eigenvector column")
    values = np.sum(p * p, axis=0) / totals ** 2
    tau = 5.0 / L if tau is None else tau
    centers = np.argmax(p, axis=0)           # first maximum wins ties
    classified = np.where(values > tau, StateClass.LOCALIZED, StateClass.EXTENDED)
    ambiguous = (values >= band[0] / L) & (values <= band[1] / L)
    return StateDiagnostics(values, centers, classified, ambiguous, tau)


# --------------------------------------------------------------------------
# transfer matrices

@numba.njit(cache=True)
def _lyapunov_kernel(E, V, eps, alpha, theta, steps, renorm):
    t = math.exp(-2.0 * eps)
    sech = 2.0 * t / (1.0 + t * t)
    tanh = (1.0 - t * t) / (1.0 + t * t)
    a, b, c, d = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    logsum = 0.0
    min_pole = 1.0
    for n in range(1, steps + 1):
        frac = alpha * n
        frac -= math.floor(frac)
        x = math.pi * frac + theta
        s2, c2 = math.sin(2.0 * x), math.cos(2.0 * x)
        if eps == 0.0:
            dist = abs(((x - math.pi / 2.0) % math.pi))
            dist = min(dist, math.pi - dist)
            min_pole = min(min_pole, dist)
        pot = V * (s2 * sech + 1j * tanh) / (c2 * sech + 1.0)
        m = E - pot
        # [[m, -1], [1, 0]] @ [[a, b], [c, d]]
        a, b, c, d = m * a - c, m * b - d, a, b
        if n % renorm == 0:
            nrm = max(abs(a), abs(b), abs(c), abs(d))
            a /= nrm
            b /= nrm
            c /= nrm
            d /= nrm
            logsum += math.log(nrm)
    fro = math.sqrt(abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2)
    return (logsum + math.log(fro)) / steps, min_pole


def transfer_matrix_lyapunov(E: complex, params: ModelParams, steps: int = 100_000,
                             phase_samples: int = 8, renorm_every: int = 16,
                             pole_guard: float = DEFAULT_POLE_GUARD) -> float:
    """Growth rate of the 2x2 transfer-matrix product along the incommensurate chain.

    Averaged over ``phase_samples`` equispaced theta in [0, pi); the running
    product is rescaled every ``renorm_every`` steps and the log-norms summed.
    """
    if steps < 10_000:
        raise ValueError("steps must be >= 1e4")
    if phase_samples < 1 or renorm_every < 1:
        raise ValueError("phase_samples and renorm_every must be >= 1")
    thetas = params.theta + math.pi * np.arange(phase_samples) / phase_samples
    rates = []
    for th in thetas:
        rate, pole = _lyapunov_kernel(complex(E), float(params.V), float(params.epsilon),
                                      float(params.alpha), float(th), int(steps), int(renorm_every))
        if params.epsilon == 0.0 and pole < pole_guard:
            raise PoleProximity("transfer matrix chain passes within the guard of a tan pole")
        rates.append(rate)
    return float(np.mean(rates))


# --------------------------------------------------------------------------
# unilateral eigenstates of the Fourier ring

@dataclass
class UnilateralState:
    phi: np.ndarray
    energy: complex
    residual: float
    center: int


def unilateral_fourier_state(center: int, params: ModelParams, approx: RationalApproximant,
                             flux_theta: float = 0.0, guard: float = 1e-10) -> UnilateralState:
    """Fourier-space eigenstate supported on components n <= center (1-based).

    phi_center = 1 and phi_n = 0 above it; below, with s_n the tail sum
    sum_{k>=1} (-r)^k phi_{n+k}, phi_n = -iV s_n / (cos_n - cos_center).
    The residual is ||H phi - E phi|| / ||phi|| on the full ring, wrap rows included.
    """
    L, V = approx.q, params.V
    if not 1 <= center <= L:
        raise ValueError(f"center must lie in 1..{L}")
    r = math.exp(-2.0 * params.epsilon)
    cosines = np.cos(2.0 * math.pi * ((approx.p * np.arange(1, L + 1)) % L) / L)
    cos_c = cosines[center - 1]
    phi = np.zeros(L, dtype=complex)
    phi[center - 1] = 1.0
    s = 0j                                     # tail sum seen from row center-1
    s = -r * (phi[center - 1] + s)
    for n in range(center - 1, 0, -1):
        den = cosines[n - 1] - cos_c
        if abs(den) < guard:
            raise ResonantDenominator(f"cos collision between components {n} and {center}")
        phi[n - 1] = -1j * V * s / den
        s = -r * (phi[n - 1] + s)
    energy = 2.0 * cos_c + 1j * V
    H = build_fourier_hamiltonian(params, approx, flux_theta).data
    residual = float(np.linalg.norm(H @ phi - energy * phi) / np.linalg.norm(phi))
    return UnilateralState(phi, complex(energy), residual, center)


# --------------------------------------------------------------------------
# long-double polishing of eigenvalues

def _ld_ring_potential(params: ModelParams, approx: RationalApproximant, flux_theta: float):
    n = np.arange(1, approx.q + 1)
    x = PI_LD * ((approx.p * n) % approx.q).astype(np.longdouble) / approx.q
    x = x + np.longdouble(flux_theta) / approx.q
    t = np.exp(np.longdouble(-2.0) * np.longdouble(params.epsilon))
    sech = 2 * t / (1 + t * t)
    tanh = (1 - t * t) / (1 + t * t)
    num = np.sin(2 * x) * sech + 1j * tanh.astype(np.clongdouble)
    den = np.cos(2 * x) * sech + 1
    return np.longdouble(params.V) * (num / den)


def real_space_characteristic(z: np.ndarray, potential: np.ndarray):
    """det(H - z) and its z-derivative for a periodic tridiagonal ring, vectorised over z.

    det = tr(prod_n [[V_n - z, -1], [1, 0]]) - 2(-1)^L.
    """
    z = np.asarray(z)
    one = np.ones_like(z)
    zero = np.zeros_like(z)
    a, b, c, d = one, zero, zero, one
    da, db, dc, dd = zero, zero, zero, zero
    for v in potential:
        m = v - z
        da, db, dc, dd = (m * da - a - dc, m * db - b - dd, da, db)
        a, b, c, d = m * a - c, m * b - d, a, b
    L = potential.size
    return a + d - 2 * (-1) ** L, da + dd


def fourier_characteristic(z: np.ndarray, diag: np.ndarray, V, r, c_wrap):
    """det(H~ - z) and derivative for the Fourier ring in O(L) per point.

    The matrix is diag(delta) + 2iV[(-r)^{j-n}/(1-c) above, c (-r)^{j-n}/(1-c)
    on and below]: an upper triangular part plus a rank-one correction, whose
    determinant follows a backward two-term recursion (P, sigma).
    """
    z = np.asarray(z)
    b = c_wrap / (1 - c_wrap)
    P = np.ones_like(z)
    sig = np.zeros_like(z)
    dP = np.zeros_like(z)
    dsig = np.zeros_like(z)
    two_iv = 2j * V
    for dn in diag[::-1]:
        delta = dn - z
        dsig = -sig + (delta - two_iv) * dsig + dP
        sig = (delta - two_iv) * sig + P
        dP = -P + delta * dP
        P = delta * P
    return P + two_iv * b * sig, dP + two_iv * b * dsig


def _fourier_inputs(params, approx, flux_theta):
    n = np.arange(1, approx.q + 1)
    ang = 2 * PI_LD * ((approx.p * n) % approx.q).astype(np.longdouble) / approx.q
    diag = (2 * np.cos(ang)).astype(np.clongdouble) + 1j * np.longdouble(params.V)
    r = np.exp(np.longdouble(-2.0) * np.longdouble(params.epsilon))
    wrap = np.exp(np.clongdouble(2j) * np.longdouble(flux_theta))
    c_wrap = (-r) ** approx.q * wrap
    return diag, np.longdouble(params.V), r, c_wrap


def characteristic_function(params: ModelParams, approx: RationalApproximant,
                            flux_theta: float = 0.0, representation: str = "real"):
    """Callable z -> (det(H - z), d/dz det) in long double for either representation."""
    if representation == "real":
        pot = _ld_ring_potential(params, approx, flux_theta)
        return lambda z: real_space_characteristic(z, pot)
    if representation == "fourier":
        diag, V, r, c_wrap = _fourier_inputs(params, approx, flux_theta)
        return lambda z: fourier_characteristic(z, diag, V, r, c_wrap)
    raise ValueError("representation must be 'real' or 'fourier'")


def refine_eigenvalues(initial: np.ndarray, func, max_iter: int = 60,
                       tol: float = 1e-16) -> np.ndarray:
    """Aberth-Ehrlich simultaneous Newton polish of all roots in long double."""
    z = np.asarray(initial, dtype=np.clongdouble).copy()
    n = z.size
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        f, df = func(z)
        ratio = f / df
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1)
        inv = 1 / diff
        np.fill_diagonal(inv, 0)
        w = ratio / (1 - ratio * inv.sum(axis=1))
        w = np.where(np.isfinite(w), w, 0)
        w[~active] = 0
        z = z - w
        small = np.abs(w) <= tol * np.maximum(np.abs(z), 1)
        active &= ~small
        if not active.any():
            break
    return z.astype(complex)


def refined_spectrum(params: ModelParams, approx: RationalApproximant, flux_theta: float = 0.0,
                     representation: str = "real") -> np.ndarray:
    """LAPACK eigenvalues of the chosen representation, polished on its own characteristic function."""
    if representation == "real":
        H = build_real_space_hamiltonian(params, approx, flux_theta)
    else:
        H = build_fourier_hamiltonian(params, approx, flux_theta)
    w = eigendecompose(H, vectors=False).eigenvalues
    func = characteristic_function(params, approx, flux_theta, representation)
    z = refine_eigenvalues(w, func)
    return z[lexicographic_order(z)]


def multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest displacement under the optimal one-to-one matching of two point sets."""
    from scipy.optimize import linear_sum_assignment

    if a.size != b.size:
        raise LengthMismatch("multisets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.spatial import cKDTree

    pa = np.column_stack([a.real, a.imag])
    pb = np.column_stack([b.real, b.imag])
    d1 = cKDTree(pb).query(pa)[0].max()
    d2 = cKDTree(pa).query(pb)[0].max()
    return float(max(d1, d2))
