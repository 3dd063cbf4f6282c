"""Cat-state macroscopicity and Ramsey sensitivity under dephasing."""

from __future__ import annotations

from .linalg_core import AdditiveObservable
from .macroscopicity import diagnose, double_commutator_spectrum, optimal_eta, q_fit
from .metrology import RamseySignal, ghz_closed_form, ghz_optimum, scaling_study
from .states import StateKind, StateSpec

__version__ = "0.1.0"

__all__ = [
    "AdditiveObservable",
    "RamseySignal",
    "StateKind",
    "StateSpec",
    "diagnose",
    "double_commutator_spectrum",
    "ghz_closed_form",
    "ghz_optimum",
    "optimal_eta",
    "q_fit",
    "scaling_study",
]
