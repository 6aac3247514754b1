"""qi_lab: quantum-interference decomposition for multi-system scattering,
with engines for shaped electron-light spectra and free/bound-electron
spontaneous emission, plus the brute-force oracles that pin every closed
form."""

__version__ = "0.1.0"

from .emission import (BoundElectronParams, CavityParams, CODATA2018,
                       EmissionRates, FreeElectronParams, PhysicalConstants,
                       bloch_map, bunching_sensitivity, companion_rates,
                       optimal_atom_position, optimize_length, rate_qi, rates,
                       resonance_sweep, sinc, velocity_from_kinetic)
from .errors import (InvariantViolation, QiLabError, TruncationError,
                     UnresolvedOscillationError, ValidationError)
from .pinem import (GainLossSpectrum, InteractionCoupling, ModulationParams,
                    PinemLadderOperator, coupling_sweep, initial_amplitudes,
                    s_matrix_element, spectrum, spectrum_from_state)
from .qi_core import (FinalSelector, IdentityOperator, MatrixOperator,
                      ProductState, QIBreakdown, ScatteringOperator,
                      SystemState, decompose, direct_probability,
                      marginal_spectrum, random_unitary_operator, swap_operator)

__all__ = [
    "__version__",
    # core
    "SystemState", "ProductState", "ScatteringOperator", "IdentityOperator",
    "MatrixOperator", "FinalSelector", "QIBreakdown", "direct_probability",
    "decompose", "marginal_spectrum", "random_unitary_operator", "swap_operator",
    # pinem
    "ModulationParams", "InteractionCoupling", "GainLossSpectrum",
    "PinemLadderOperator", "initial_amplitudes", "s_matrix_element", "spectrum",
    "spectrum_from_state", "coupling_sweep",
    # emission
    "PhysicalConstants", "CODATA2018", "FreeElectronParams",
    "BoundElectronParams", "CavityParams", "EmissionRates",
    "velocity_from_kinetic", "rate_qi", "companion_rates", "rates",
    "optimize_length", "bunching_sensitivity", "bloch_map", "resonance_sweep",
    "optimal_atom_position", "sinc",
    # errors
    "QiLabError", "ValidationError", "TruncationError",
    "UnresolvedOscillationError", "InvariantViolation",
]
