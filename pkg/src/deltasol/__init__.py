"""deltasol: solitary waves of the 1D Schrodinger equation with a point oscillator.

Library + CLI for constructing the solitary-wave family, the exact spectral
data of its linearization, the radiation-coupling (Fermi-golden-rule type)
criterion with its damping coefficient, conservative time evolution, and
quantitative fits of the predicted relaxation laws.
"""

from .nonlinearity import (FieldState, Grid, Nonlinearity, charge, hamiltonian,
                           inner, potential_U, symplectic_form, weighted_norm)
from .solitary import SolitonParams, amplitudes_for_frequency, charge_derivative, soliton_field
from .spectral import (BranchedFrequency, Linearization, SpectralBasis, determinant_D,
                       discrete_eigenvalue, eigenfunction_u, k_pm, mu_formula,
                       resolvent_apply, resolvent_kernel, spectral_condition)
from .fgr import FgrReport, DampingReport, damping_coefficient, fgr_inner_product, fgr_scan
from .evolution import (EvolutionConfig, Trajectory, evolve, evolve_linearized, free_flow,
                        step_linearized, step_nonlinear)
from .modulation import (ModulationTrack, ModulationTracker, dispersive_decay_check,
                         extract_frame, fit_decay_laws, fit_ricatti, prepare_initial_data,
                         scattering_residual, track)

__version__ = "0.1.0"
