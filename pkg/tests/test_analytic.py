import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhmaryland import analytic as A
from nhmaryland.errors import NotExtended, OutOfPhase, SingularIntegrand, SmallDivisor
from nhmaryland.model import ModelParams

EPS1, EPS2 = A.critical_epsilons(1.0)


class TestLyapunovClosedForm:
    def test_zero_on_segment(self):
        assert A.lyapunov_exponent(1j + 2 * math.cos(0.7), 1.0) == pytest.approx(0.0, abs=1e-7)
        assert A.lyapunov_exponent(2 + 1j, 1.0) == 0.0

    def test_origin(self):
        assert A.lyapunov_exponent(0, 1.0) == pytest.approx(float(mpmath.acosh(mpmath.sqrt(5) / 2)), abs=1e-12)
        assert A.lyapunov_exponent(0, 1.0) == pytest.approx(0.481212, abs=1e-6)

    @settings(max_examples=80, deadline=None)
    @given(re=st.floats(-5, 5), im=st.floats(-5, 5), V=st.floats(0, 4))
    def test_nonnegative_and_branch_identity(self, re, im, V):
        E = complex(re, im)
        L = A.lyapunov_exponent(E, V)
        assert L >= 0
        phi = A.lower_arccos((E - 1j * V) / 2)
        assert L == pytest.approx(abs(phi.imag), abs=1e-7)

    @settings(max_examples=60, deadline=None)
    @given(re=st.floats(-4, 4), im=st.floats(-1, 4), eps=st.floats(0.01, 1.0))
    def test_finite_epsilon_form_dominates(self, re, im, eps):
        E = complex(re, im)
        assert A.lyapunov_exponent_at(E, 1.0, eps) >= A.lyapunov_exponent(E, 1.0) - 1e-12

    def test_finite_epsilon_form_converges_to_closed_form(self):
        E = 0.5 + 2j
        assert A.lyapunov_exponent_at(E, 1.0, 50.0) == pytest.approx(A.lyapunov_exponent(E, 1.0))


class TestThresholds:
    def test_values(self):
        assert EPS1 == pytest.approx(0.4407, abs=1e-4)
        assert EPS2 == pytest.approx(0.5306, abs=1e-4)
        assert EPS1 < EPS2

    def test_small_V(self):
        e1, e2 = A.critical_epsilons(1e-8)
        assert e1 < 1e-7 and e2 < 1e-3

    @pytest.mark.parametrize("eps,label", [(0.1, "Localized"), (0.46, "MobilityEdge"), (0.6, "Delocalized"),
                                           (EPS1, "Critical"), (EPS2, "Critical")])
    def test_classify(self, eps, label):
        assert A.classify_phase(eps, 1.0).value == label


class TestCurve:
    def test_quarter_period(self):
        eps = 0.1
        expected = 1j * math.sqrt(4 * math.sinh(eps) ** 2 + math.tanh(eps) ** 2)
        E = A.spectral_curve_point(math.pi / 2, eps, 1.0)
        assert E == pytest.approx(expected, abs=1e-12)
        assert E == pytest.approx(0.22376j, abs=1e-5)

    def test_identity_and_upper_half_plane(self):
        for eps in (0.05, 0.3, 0.46, 0.7):
            s = A.sample_curve(eps, 1.0, 2048)
            assert s.self_test.max() < 1e-10
            assert s.energy.imag.min() >= -1e-12

    def test_large_circle(self):
        eps = 0.01
        om = np.linspace(0, math.pi, 4096, endpoint=False)
        E = A.spectral_curve(om, eps, 1.0)
        R = 1 / (2 * eps)
        assert np.max(np.abs(np.abs(E - 1j * R) / R - 1)) < 0.05

    def test_reflection_symmetry(self):
        om = np.linspace(0.01, 3.13, 501)
        assert np.allclose(A.spectral_curve(math.pi - om, 0.1, 1.0), -A.spectral_curve(om, 0.1, 1.0).conj())

    def test_real_axis_touchpoint_by_continuity(self):
        # at eps > eps2 the curve crosses the real axis at omega = 0
        E = A.spectral_curve(np.array([0.0, 1e-3, 2e-3]), 0.6, 1.0)
        assert abs(E[0] - E[1]) < 0.05

    def test_localized_positive_lyapunov(self):
        loops = A.point_spectrum_loops(0.2, 1.0)
        assert A.lyapunov_exponent(loops.points(), 1.0).min() > 0


class TestBranches:
    def test_localized_point(self):
        E = A.spectral_curve_point(math.pi / 2, 0.1, 1.0)
        angles, valid = A.branch_condition(E, 0.1, 1.0)
        assert valid
        assert np.cos(angles.phi_plus) == pytest.approx((E + 1j) / 2, abs=1e-12)
        assert np.cos(angles.phi_minus) == pytest.approx((E - 1j) / 2, abs=1e-12)
        assert angles.gap == pytest.approx(0.2, abs=1e-10)

    def test_delocalized_curve_invalid(self):
        s = A.sample_curve(0.6, 1.0, 2048)
        assert not s.branch_valid.any()

    @pytest.mark.parametrize("eps,count,label", [(0.1, 1, "Localized"), (0.46, 2, "MobilityEdge"),
                                                 (0.6, 0, "Delocalized")])
    def test_loop_counts(self, eps, count, label):
        loops = A.point_spectrum_loops(eps, 1.0)
        assert loops.loop_count == count and loops.phase_label.value == label

    def test_subloops_each_enclose_one_band_edge(self):
        loops = A.point_spectrum_loops(0.46, 1.0)
        for poly in loops.polygons():
            assert A.point_in_polygon(2 + 1j, poly) + A.point_in_polygon(-2 + 1j, poly) == 1

    def test_loop_distance_is_exact_on_curve(self):
        loops = A.point_spectrum_loops(0.1, 1.0)
        om = np.random.default_rng(1).uniform(0, math.pi, 100)
        assert A.loop_distance(A.spectral_curve(om, 0.1, 1.0), loops).max() < 1e-10

    @settings(max_examples=50, deadline=None)
    @given(re=st.floats(-4, 4), im=st.floats(-3, 4))
    def test_reconstruction(self, re, im):
        angles, _ = A.branch_condition(complex(re, im), 0.2, 1.0, on_curve=False)
        assert angles.phi_plus.imag <= 0 and angles.phi_minus.imag <= 0
        assert np.cos(angles.phi_plus) == pytest.approx(complex(re, im + 1) / 2, abs=1e-9)


class TestMobilityEdge:
    def test_at_eps_046(self):
        w0, E0 = A.mobility_edge_omega0(0.46, 1.0)
        assert math.cos(w0) == pytest.approx(0.4649, abs=1e-3)
        assert E0 == pytest.approx(0.930, abs=1e-3)

    def test_thresholds(self):
        assert A.mobility_edge_omega0(EPS1, 1.0)[1] == pytest.approx(0.0, abs=1e-6)
        assert A.mobility_edge_omega0(EPS2, 1.0)[1] == pytest.approx(2.0, abs=1e-6)

    def test_segment_angle_extremes(self):
        assert A.segment_angle_imag(math.pi / 2, 1.0) == pytest.approx(2 * EPS1)
        assert A.segment_angle_imag(0.0, 1.0) == pytest.approx(2 * EPS2)

    def test_window_matches_condition(self):
        om = np.linspace(0, math.pi, 400)
        for eps in (0.46, 0.5):
            inside = A.is_extended(om, eps, 1.0)
            assert np.array_equal(inside, A.segment_angle_imag(om, 1.0) < 2 * eps)

    @pytest.mark.parametrize("eps", [0.3, 0.7])
    def test_out_of_phase(self, eps):
        with pytest.raises(OutOfPhase):
            A.mobility_edge_omega0(eps, 1.0)

    def test_delocalized_window_independent_of_eps(self):
        assert A.extended_cos_bound(0.6, 1.0) == A.extended_cos_bound(0.9, 1.0) == 1.0


class TestSolvability:
    def test_on_curve(self):
        E = A.spectral_curve_point(math.pi / 2, 0.1, 1.0)
        assert abs(A.solvability_residual(E, 0.1, 1.0)) < 1e-8

    def test_off_curve(self):
        assert A.solvability_residual(10 + 10j, 0.1, 1.0) < -0.05

    @settings(max_examples=30, deadline=None)
    @given(re=st.floats(-4, 4), im=st.floats(-2, 4), eps=st.floats(0.05, 0.8))
    def test_matches_branch_angles(self, re, im, eps):
        E = complex(re, im)
        if abs(im - 1) < 0.05 and abs(re) < 2.05:
            return
        angles, _ = A.branch_condition(E, eps, 1.0, on_curve=False)
        assert A.solvability_residual(E, eps, 1.0) == pytest.approx(angles.gap - 2 * eps, abs=1e-8)

    def test_singular(self):
        with pytest.raises(SingularIntegrand):
            A.solvability_residual(1j, 0.2, 1.0, 1024)


class TestExtendedStates:
    def test_boundary_values(self):
        sol = A.extended_state_amplitudes(math.pi / 2, ModelParams(1.0, 0.6))
        assert sol.U[0] == 1 and sol.amplitude(0) == 0 and sol.amplitude(5) == 0

    def test_decay_rate_at_center(self):
        sol = A.extended_state_amplitudes(math.pi / 2, ModelParams(1.0, 0.6))
        assert sol.decay_rate == pytest.approx(1.2 - 2 * EPS1, abs=1e-2)
        assert sol.fit_r2 > 0.999

    def test_not_extended_below_eps1(self):
        with pytest.raises(NotExtended):
            A.extended_state_amplitudes(1.0, ModelParams(1.0, 0.3))

    def test_outside_window(self):
        # eps = 0.46 keeps only |cos omega| < 0.465
        with pytest.raises(NotExtended):
            A.extended_state_amplitudes(0.2, ModelParams(1.0, 0.46))

    @pytest.mark.parametrize("omega", [0.4, math.pi / 2, 2.5])
    def test_wavefunction_residual(self, omega):
        p = ModelParams(1.0, 0.6, theta=0.37)
        sol = A.extended_state_amplitudes(omega, p, 1e-14)
        wf = A.extended_state_wavefunction(sol, p, (-50, 50))
        r = A.chain_residual(p, wf.n, wf.psi, sol.energy)
        assert np.abs(r).max() / np.abs(wf.psi).max() < 1e-6
        # bounded: no exponential growth across the window
        assert np.abs(wf.psi).max() / np.abs(wf.psi).min() < 1e3

    def test_mobility_edge_phase_state(self):
        p = ModelParams(1.0, 0.5)
        sol = A.extended_state_amplitudes(math.pi / 2, p, 1e-13)
        wf = A.extended_state_wavefunction(sol, p, (-30, 30))
        r = A.chain_residual(p, wf.n, wf.psi, sol.energy)
        assert np.abs(r).max() / np.abs(wf.psi).max() < 1e-6


class TestLocalizedProfile:
    def test_real_omega0_and_functional_equation(self):
        prof = A.localized_fourier_profile(math.pi / 2, ModelParams(1.0, 0.2), 128)
        assert abs(prof.Omega0.imag) < 1e-10
        assert prof.functional_residual < 1e-6
        assert prof.winding == 0

    def test_generic_point(self):
        prof = A.localized_fourier_profile(1.1, ModelParams(1.0, 0.2, theta=0.4), 128)
        assert abs(prof.Omega0.imag) < 1e-10
        assert prof.functional_residual < 1e-6

    def test_constant_log(self):
        om = A.constant_log_profile(0.3j, 0.618)
        nonzero = np.delete(om, om.size // 2)
        assert np.abs(nonzero).max() < 1e-14

    def test_small_divisor(self):
        with pytest.raises(SmallDivisor):
            A.fourier_coefficients_of_log(np.zeros(256, complex), 0.5, 32)

    def test_off_spectrum_rejected(self):
        with pytest.raises(OutOfPhase):
            A.localized_fourier_profile(1.0, ModelParams(1.0, 0.6), 64)
