import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhmaryland.errors import PoleProximity
from nhmaryland.model import (GOLDEN_ALPHA, ModelParams, RationalApproximant, approximant_for_size,
                              complex_tan, fibonacci_approximant, fibonacci_approximants,
                              potential_value, quasi_energy, ring_phases)


class TestParams:
    def test_theta_reduced_mod_pi(self):
        p = ModelParams(1.0, 0.1, theta=math.pi + 0.25)
        assert p.theta == pytest.approx(0.25)
        assert ModelParams(1.0, 0.1, theta=-0.25).theta == pytest.approx(math.pi - 0.25)

    @pytest.mark.parametrize("kw", [dict(V=-1, epsilon=0.1), dict(V=1, epsilon=-0.1),
                                    dict(V=1, epsilon=0.1, alpha=1.2), dict(V=float("nan"), epsilon=0)])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    @pytest.mark.parametrize("theta,eps,mu", [(0, 0, 0), (0, 0.5, -1j), (math.pi / 4, 0.1, -math.pi / 2 - 0.2j)])
    def test_quasi_energy(self, theta, eps, mu):
        assert quasi_energy(ModelParams(1.0, eps, theta)) == pytest.approx(mu)


class TestApproximants:
    def test_first_entries(self):
        assert [str(a) for a in fibonacci_approximants(3)] == ["1/2", "2/3", "3/5"]

    def test_ring_sizes(self):
        assert approximant_for_size(233) == RationalApproximant(144, 233)
        assert approximant_for_size(610) == RationalApproximant(377, 610)
        assert fibonacci_approximant(14).q == 377

    def test_invariants(self):
        for a in fibonacci_approximants(30):
            assert math.gcd(a.p, a.q) == 1 and 0 < a.p < a.q
            assert abs(a.value - GOLDEN_ALPHA) < 1 / a.q ** 2

    @pytest.mark.parametrize("p,q", [(2, 4), (3, 2), (0, 5)])
    def test_rejects(self, p, q):
        with pytest.raises(ValueError):
            RationalApproximant(p, q)

    def test_parse(self):
        assert RationalApproximant.parse("89/144") == RationalApproximant(89, 144)
        with pytest.raises(ValueError):
            RationalApproximant.parse("12")

    def test_not_fibonacci(self):
        with pytest.raises(ValueError):
            approximant_for_size(100)


class TestPotential:
    def test_large_epsilon_tends_to_iV(self):
        assert potential_value(ModelParams(1.0, 300.0), GOLDEN_ALPHA, 7) == pytest.approx(1j, abs=1e-12)

    def test_half_epsilon_oracle(self):
        expected = complex(mpmath.tan(0.5j))
        assert potential_value(ModelParams(1.0, 0.5), GOLDEN_ALPHA, 0) == pytest.approx(expected, abs=1e-12)
        assert expected.imag == pytest.approx(math.tanh(0.5))

    def test_pole_guard_at_zero_epsilon(self):
        with pytest.raises(PoleProximity):
            potential_value(ModelParams(1.0, 0.0, theta=math.pi / 2), 0.3, 0)
        assert np.isfinite(potential_value(ModelParams(1.0, 0.0, theta=0.3), 0.3, 0))

    def test_ring_flux_convention(self):
        a = approximant_for_size(13)
        p = ModelParams(1.0, 0.2, theta=0.9)
        direct = potential_value(p, a.value, np.arange(1, 14), ring_size=13)
        phases = ring_phases(a, 0.9)
        assert np.allclose(direct, complex_tan(phases, 0.2))

    @settings(max_examples=60, deadline=None)
    @given(x=st.floats(-20, 20), eps=st.floats(0.0, 15.0))
    def test_complex_tan_matches_numpy(self, x, eps):
        ref = np.tan(complex(x, eps))
        if abs(np.cos(complex(x, eps))) < 1e-6:
            return
        assert complex_tan(x, eps) == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_no_overflow(self):
        assert np.isfinite(complex_tan(1.0, 350.0))

    @settings(max_examples=40, deadline=None)
    @given(eps=st.floats(1e-3, 5.0), theta=st.floats(0, 6.0), idx=st.integers(3, 14))
    def test_imaginary_part_nonnegative(self, eps, theta, idx):
        a = fibonacci_approximant(idx)
        v = potential_value(ModelParams(1.3, eps, theta), a.value, np.arange(a.q))
        assert v.imag.min() >= 0.0

    @settings(max_examples=40, deadline=None)
    @given(eps=st.floats(1e-2, 3.0), theta=st.floats(0, 3.0), n=st.integers(-500, 500))
    def test_periodicities(self, eps, theta, n):
        a = approximant_for_size(89)
        p = ModelParams(1.0, eps, theta)
        v = potential_value(p, a.value, n)
        assert potential_value(p, a.value, n + a.q) == pytest.approx(v, rel=1e-10)
        shifted = ModelParams(1.0, eps, theta + math.pi)
        assert potential_value(shifted, a.value, n) == pytest.approx(v, rel=1e-10)
