"""Quantum-simulation toolkit for two-level nuclear pairing models.

Pauli-string operators and Jordan-Wigner mapping, the Agassi/LMG/ANNNI
Hamiltonians, exact and Trotterized dynamics, an MLP phase classifier on
C_z time series, and VQE / ADAPT-VQE ground-state solvers.
"""

__version__ = "0.1.0"

from .pauli import PauliString, PauliSum, FermionTerm, jordan_wigner  # noqa: E402
from .models import AgassiParams, PhaseLabel, build_agassi, build_lmg, label_phase  # noqa: E402
from .dynamics import StateVector, probe_state, correlation_series  # noqa: E402

__all__ = [
    "PauliString",
    "PauliSum",
    "FermionTerm",
    "jordan_wigner",
    "AgassiParams",
    "PhaseLabel",
    "build_agassi",
    "build_lmg",
    "label_phase",
    "StateVector",
    "probe_state",
    "correlation_series",
]
