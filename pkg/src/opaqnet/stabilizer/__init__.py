"""Exact stabilizer backend: weighted tableaus and Pauli-coefficient operators."""
from . import kernels
from .pauli import InterfaceTooLarge, PauliCoefficients, PauliString
from .tableau import (
    BasisPrep,
    Tableau,
    apply_branch,
    apply_clifford,
    apply_prep,
    apply_projection,
    apply_replacement,
    den_coefficients,
    init_tableau,
    reduce_to,
    weight,
)


def to_dense(c: PauliCoefficients, limit: int = 8):
    return c.to_dense(limit)


__all__ = [
    "BasisPrep",
    "InterfaceTooLarge",
    "PauliCoefficients",
    "PauliString",
    "Tableau",
    "apply_branch",
    "apply_clifford",
    "apply_prep",
    "apply_projection",
    "apply_replacement",
    "den_coefficients",
    "init_tableau",
    "kernels",
    "reduce_to",
    "to_dense",
    "weight",
]
