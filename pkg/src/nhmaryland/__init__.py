"""Non-Hermitian Maryland model: closed forms and finite-ring numerics."""

from .analytic import (PhaseLabel, branch_condition, classify_phase, critical_epsilons,
                       extended_state_amplitudes, extended_state_wavefunction,
                       localized_fourier_profile, lyapunov_exponent, lyapunov_exponent_at,
                       mobility_edge_omega0, point_spectrum_loops, solvability_residual,
                       spectral_curve, spectral_curve_point)
from .model import (GOLDEN_ALPHA, ModelParams, RationalApproximant, fibonacci_approximant,
                    fibonacci_approximants, potential_value, quasi_energy)
from .spectral import (build_fourier_hamiltonian, build_real_space_hamiltonian, eigendecompose,
                       fourier_map, ipr, transfer_matrix_lyapunov, unilateral_fourier_state)
from .topology import (mobility_edge_diagnosis, periodic_tridiagonal_determinant,
                       spectral_flow_trace, winding_number)

__version__ = "0.1.0"
