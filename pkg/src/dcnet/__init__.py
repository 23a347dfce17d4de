"""Simulation and analysis of dissipatively coupled bosonic mode networks."""

from .circuit import (Circuit, Diagnostic, Dissipator, InvalidCircuit, ModeRef, add_mode_loss,
                      build_chain, build_double_chain, build_honeycomb, build_square_lattice,
                      build_two_arm, validate)
from .dynamics import (SpectrumResult, Trajectory, asymptotic_state, conserved_quantities,
                       drift_matrix, evolve, heat_residual, spectrum)
from .stationary import (LocalizedState, find_localized_states, kernel_basis, loss_robustness,
                         single_photon_stationarity)

__version__ = "0.1.0"

__all__ = [
    "Circuit", "Diagnostic", "Dissipator", "InvalidCircuit", "ModeRef", "add_mode_loss",
    "build_chain", "build_double_chain", "build_honeycomb", "build_square_lattice", "build_two_arm",
    "validate", "SpectrumResult", "Trajectory", "asymptotic_state", "conserved_quantities",
    "drift_matrix", "evolve", "heat_residual", "spectrum", "LocalizedState", "find_localized_states",
    "kernel_basis", "loss_robustness", "single_photon_stationarity",
]
