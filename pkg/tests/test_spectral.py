import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhmaryland import analytic as A
from nhmaryland import spectral as S
from nhmaryland.errors import LengthMismatch, ResonantDenominator, ZeroVector
from nhmaryland.model import ModelParams, RationalApproximant, approximant_for_size


def char_poly_roots(H: np.ndarray, dps: int = 50) -> np.ndarray:
    """Eigenvalues from the exact characteristic polynomial (Faddeev-LeVerrier in mpmath)."""
    with mpmath.workdps(dps):
        n = H.shape[0]
        A_ = mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in H])
        M = mpmath.zeros(n)
        coeffs = [mpmath.mpc(1)]
        I = mpmath.eye(n)
        for k in range(1, n + 1):
            M = A_ * M + coeffs[-1] * I
            AM = A_ * M
            c = -sum(AM[i, i] for i in range(n)) / k
            coeffs.append(c)
        roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=400)
        return np.array([complex(r) for r in roots])


class TestBuilders:
    def test_real_space_structure(self):
        a = approximant_for_size(13)
        H = S.build_real_space_hamiltonian(ModelParams(1.0, 0.1), a).data
        nnz = np.count_nonzero(H, axis=1)
        assert nnz[0] == nnz[-1] == 3 and np.all(nnz == 3)
        assert H[0, -1] == H[-1, 0] == 1
        assert S.build_real_space_hamiltonian(ModelParams(1.0, 0.1), a).structure.value == "TridiagonalPlusCorners"

    def test_rejects_hermitian(self):
        with pytest.raises(ValueError):
            S.build_real_space_hamiltonian(ModelParams(1.0, 0.0), approximant_for_size(13))

    def test_hopping_coefficients(self):
        assert S.hopping_coefficient(-1, 0.5) == pytest.approx(-2j * math.exp(-1))
        assert S.hopping_coefficient(-1, 0.5) == pytest.approx(-0.7358j, abs=1e-4)
        assert S.hopping_coefficient(-2, 0.5) == pytest.approx(0.2707j, abs=1e-4)
        assert S.hopping_coefficient(0, 0.3) == 1j
        assert S.hopping_coefficient(3, 0.3) == 0

    def test_fourier_hopping_moduli(self):
        # |H[n, l]| = 2V r^k / |1 - c| with k = (l - n) mod L, and k = L on the diagonal
        p = ModelParams(1.0, 0.5)
        a = approximant_for_size(21)
        L, r = a.q, math.exp(-1.0)
        H = S.build_fourier_hamiltonian(p, a, 0.4).data
        off = H - np.diag(S.fourier_diagonal(a, 1.0))
        n, l = np.indices((L, L))
        k = (l - n) % L
        k[k == 0] = L
        c = (-r) ** L * np.exp(0.8j)
        assert np.allclose(np.abs(off), 2 * r ** k / abs(1 - c), rtol=1e-10, atol=1e-14)
        assert H[0, 1] == pytest.approx(S.hopping_coefficient(-1, 0.5) / (1 - c))

    def test_truncated_tail_matches_closed_form(self):
        p = ModelParams(1.0, 0.3)
        a = approximant_for_size(34)
        full = S.build_fourier_hamiltonian(p, a, 0.4).data
        cut = S.build_fourier_hamiltonian(p, a, 0.4, tail_cutoff=1e-18).data
        assert np.abs(full - cut).max() < 1e-15

    @pytest.mark.parametrize("eps", [0.1, 0.46, 0.6])
    def test_fourier_map_conjugates(self, eps):
        a = approximant_for_size(21)
        p = ModelParams(1.0, eps)
        Hr = S.build_real_space_hamiltonian(p, a, 0.8).data
        Hf = S.build_fourier_hamiltonian(p, a, 0.8).data
        F = np.column_stack([S.fourier_map(e, a, 0.8) for e in np.eye(a.q)])
        assert np.abs(F @ Hr @ F.conj().T - Hf).max() < 1e-12

    def test_flux_period(self):
        a = approximant_for_size(34)
        p = ModelParams(1.0, 0.2)
        w0 = S.eigendecompose(S.build_real_space_hamiltonian(p, a, 0.0), vectors=False).eigenvalues
        wpi = S.eigendecompose(S.build_real_space_hamiltonian(p, a, math.pi), vectors=False).eigenvalues
        assert S.multiset_distance(w0, wpi) < 1e-6


class TestFourierMap:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), theta=st.floats(0, 3.0))
    def test_round_trip_and_norm(self, seed, theta):
        a = approximant_for_size(21)
        v = np.random.default_rng(seed).normal(size=(21, 2)) @ np.array([1, 1j])
        f = S.fourier_map(v, a, theta)
        assert np.linalg.norm(f) == pytest.approx(np.linalg.norm(v), rel=1e-12)
        assert np.allclose(S.fourier_map(f, a, theta, "inverse"), v, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            S.fourier_map(np.ones(5), approximant_for_size(8))


class TestEigendecompose:
    def test_diagonal(self):
        d = S.eigendecompose(np.diag([1, 2j, -3]))
        assert np.allclose(d.eigenvalues, [-3, 2j, 1])
        assert np.allclose(np.abs(d.right_eigenvectors), np.eye(3)[:, [2, 1, 0]])

    def test_swap(self):
        assert np.allclose(S.eigendecompose(np.array([[0, 1], [1, 0]])).eigenvalues, [-1, 1])

    def test_characteristic_polynomial_oracle(self):
        H = S.build_real_space_hamiltonian(ModelParams(1.0, 0.1), approximant_for_size(13)).data
        w = S.eigendecompose(H, vectors=False).eigenvalues
        roots = char_poly_roots(H)
        assert S.multiset_distance(w, roots) < 1e-8

    def test_contracts(self):
        for eps in (0.1, 0.46, 0.6):
            d = S.eigendecompose(S.build_real_space_hamiltonian(ModelParams(1.0, eps), approximant_for_size(89)))
            assert d.residuals.max() < 1e-8
            assert d.eigenvalues.imag.min() >= -1e-8
            assert np.allclose(np.linalg.norm(d.right_eigenvectors, axis=0), 1)
            order = np.lexsort((d.eigenvalues.imag, d.eigenvalues.real))
            assert np.array_equal(order, np.arange(d.eigenvalues.size))

    def test_size_limit(self):
        with pytest.raises(ValueError):
            S.eigendecompose(np.eye(5), max_dimension=4)


class TestIPR:
    def test_delta_and_uniform(self):
        e = np.zeros(10)
        e[3] = 2.0
        assert S.ipr(e) == 1.0
        assert S.ipr(np.ones(50)) == pytest.approx(1 / 50)

    def test_zero(self):
        with pytest.raises(ZeroVector):
            S.ipr(np.zeros(4))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=40))
    def test_bounds(self, values):
        v = np.array(values)
        if not np.any(v):
            return
        L = v.size
        assert 1 / L - 1e-12 <= S.ipr(v) <= 1 + 1e-12

    def test_diagnostics_center_ties(self):
        v = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        d = S.state_diagnostics(v)
        assert list(d.localization_center) == [0, 2]

    def test_delocalized_ring(self):
        d = S.eigendecompose(S.build_real_space_hamiltonian(ModelParams(1.0, 0.6), approximant_for_size(610)))
        assert d.diagnostics().ipr.max() < 10 / 610


class TestTransferMatrix:
    def test_origin_oracle(self):
        val = S.transfer_matrix_lyapunov(0, ModelParams(1.0, 0.1), 1_000_000, 8)
        assert val == pytest.approx(math.acosh(math.sqrt(5) / 2), abs=1e-2)

    def test_far_energy_epsilon_independent(self):
        a = S.transfer_matrix_lyapunov(3 + 0.5j, ModelParams(1.0, 0.1), 100_000, 8)
        b = S.transfer_matrix_lyapunov(3 + 0.5j, ModelParams(1.0, 0.6), 100_000, 8)
        assert abs(a - b) < 0.02

    def test_segment_point_at_eps_03(self):
        # the closed form vanishes on the segment; at eps = 0.3 the chain still localizes
        val = S.transfer_matrix_lyapunov(1j + 1, ModelParams(1.0, 0.3), 100_000, 8)
        assert A.lyapunov_exponent(1j + 1, 1.0) == 0.0
        assert val == pytest.approx(A.lyapunov_exponent_at(1j + 1, 1.0, 0.3), abs=1e-2)
        assert val > 0.3

    @pytest.mark.parametrize("E,eps", [(1 + 1j, 0.1), (0.5 + 2j, 0.3), (-1.5 + 0.3j, 0.1), (1j, 0.6),
                                       (0.2 + 1j, 0.46), (1.8 + 1j, 0.46), (2.5 - 0.5j, 0.2)])
    def test_finite_epsilon_exponent(self, E, eps):
        val = S.transfer_matrix_lyapunov(E, ModelParams(1.0, eps), 100_000, 8)
        assert val == pytest.approx(A.lyapunov_exponent_at(E, 1.0, eps), abs=1e-2)

    def test_rejects_short_chains(self):
        with pytest.raises(ValueError):
            S.transfer_matrix_lyapunov(0, ModelParams(1.0, 0.1), 100)


class TestUnilateral:
    def test_exact_state(self):
        a = approximant_for_size(233)
        s = S.unilateral_fourier_state(116, ModelParams(1.0, 0.6), a)
        assert s.residual < 1e-6
        assert np.all(s.phi[116:] == 0) and s.phi[115] == 1
        assert s.energy.imag == 1.0 and abs(s.energy.real) <= 2

    def test_resonance(self):
        a = approximant_for_size(233)
        with pytest.raises(ResonantDenominator):
            S.unilateral_fourier_state(200, ModelParams(1.0, 0.6), a)


class TestRepresentations:
    @pytest.mark.parametrize("eps", [0.1, 0.46])
    def test_raw_multisets(self, eps):
        a = approximant_for_size(89)
        p = ModelParams(1.0, eps)
        wr = S.eigendecompose(S.build_real_space_hamiltonian(p, a, 0.3), vectors=False).eigenvalues
        wf = S.eigendecompose(S.build_fourier_hamiltonian(p, a, 0.3), vectors=False).eigenvalues
        assert S.multiset_distance(wr, wf) < 1e-8

    def test_characteristic_functions_match_dense(self):
        a = approximant_for_size(13)
        p = ModelParams(1.3, 0.4)
        z = np.array([0.3 + 0.2j, -1 + 2j])
        for rep, builder in (("real", S.build_real_space_hamiltonian), ("fourier", S.build_fourier_hamiltonian)):
            H = builder(p, a, 0.6).data
            f, df = S.characteristic_function(p, a, 0.6, rep)(z.astype(np.clongdouble))
            dense = np.array([np.linalg.det(H - x * np.eye(13)) for x in z])
            assert np.allclose(f.astype(complex), dense, rtol=1e-10)

    def test_refinement_reduces_gap_at_high_eps(self):
        a = approximant_for_size(89)
        p = ModelParams(1.0, 0.6)
        zr = S.refined_spectrum(p, a, 0.3, "real")
        zf = S.refined_spectrum(p, a, 0.3, "fourier")
        assert S.multiset_distance(zr, zf) < 1e-10

    def test_aberth_on_polynomial(self):
        roots = np.array([1, -2, 0.5j, 3 - 1j])
        func = lambda z: (np.prod([z - r for r in roots], axis=0),
                          sum(np.prod([z - r for j, r in enumerate(roots) if j != i], axis=0)
                              for i in range(4)))
        z = S.refine_eigenvalues(roots + 0.05 * np.array([1, 1j, -1, 1]), func)
        assert S.multiset_distance(z, roots.astype(complex)) < 1e-14
