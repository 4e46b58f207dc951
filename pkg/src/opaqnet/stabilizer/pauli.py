"""Signed Pauli strings and exact Pauli-coefficient expansions of operators."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import product

import numpy as np

LETTERS = "IXZY"  # index = x | (z << 1)

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

DEFAULT_DENSE_LIMIT = 8


class InterfaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """Hermitian signed Pauli string on ``n`` registers (bit ``i`` = register ``i``)."""

    n: int
    x: int
    z: int
    sign: int = 1

    @classmethod
    def from_letters(cls, letters: str, regs, n: int, sign: int = 1) -> "PauliString":
        if len(letters) != len(regs):
            raise ValueError(f"Pauli '{letters}' has {len(letters)} letters for {len(regs)} registers")
        x = z = 0
        for ch, r in zip(letters.upper(), regs):
            if not 0 <= r < n:
                raise IndexError(f"register index {r} out of range for {n} registers")
            if ch in "XY":
                x |= 1 << r
            if ch in "ZY":
                z |= 1 << r
            if ch not in "IXYZ":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(n, x, z, sign)

    @property
    def phase(self) -> int:
        return 0 if self.sign > 0 else 2

    def letters(self, regs=None) -> str:
        regs = range(self.n) if regs is None else regs
        return "".join(LETTERS[((self.x >> r) & 1) | (((self.z >> r) & 1) << 1)] for r in regs)

    def __str__(self) -> str:
        return ("+" if self.sign > 0 else "-") + self.letters()


def label_matrix(label: str) -> np.ndarray:
    return reduce(np.kron, (PAULI_MATRICES[c] for c in label), np.ones((1, 1), dtype=complex))


@dataclass(frozen=True)
class PauliCoefficients:
    """Operator ``sum_Q coeff(Q) Q`` on the ordered register tuple ``iface``.

    Labels are strings over ``IXYZ`` with ``label[k]`` acting on ``iface[k]``.
    Zero coefficients are never stored.
    """

    iface: tuple
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "iface", tuple(self.iface))
        clean = {k: Fraction(v) for k, v in self.coeffs.items() if v != 0}
        for k in clean:
            if len(k) != len(self.iface):
                raise ValueError(f"label {k!r} does not match interface of size {len(self.iface)}")
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def zero(cls, iface) -> "PauliCoefficients":
        return cls(tuple(iface), {})

    @classmethod
    def maximally_mixed(cls, iface, weight=Fraction(1)) -> "PauliCoefficients":
        k = len(tuple(iface))
        return cls(tuple(iface), {"I" * k: Fraction(weight) / 2**k})

    @property
    def identity_label(self) -> str:
        return "I" * len(self.iface)

    def trace(self) -> Fraction:
        return self.coeffs.get(self.identity_label, Fraction(0)) * 2 ** len(self.iface)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "PauliCoefficients") -> "PauliCoefficients":
        if self.iface != other.iface:
            raise ValueError("interface mismatch")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return PauliCoefficients(self.iface, out)

    def __sub__(self, other: "PauliCoefficients") -> "PauliCoefficients":
        return self + other.scale(-1)

    def scale(self, factor) -> "PauliCoefficients":
        f = Fraction(factor)
        return PauliCoefficients(self.iface, {k: v * f for k, v in self.coeffs.items()})

    def normalized(self) -> "PauliCoefficients":
        tr = self.trace()
        if tr == 0:
            raise ZeroDivisionError("cannot normalize a zero-trace operator")
        return self.scale(1 / tr)

    def depolarize(self, registers, p) -> "PauliCoefficients":
        """Damp every term acting non-trivially on ``registers`` by ``1 - p``."""
        p = Fraction(p)
        pos = [self.iface.index(r) for r in registers]
        out = {}
        for k, v in self.coeffs.items():
            if any(k[i] != "I" for i in pos):
                v = v * (1 - p)
            out[k] = v
        return PauliCoefficients(self.iface, out)

    def to_dense(self, limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
        k = len(self.iface)
        if k > limit:
            raise InterfaceTooLarge(f"interface of {k} registers exceeds dense limit {limit}")
        dim = 2**k
        out = np.zeros((dim, dim), dtype=complex)
        for label, c in self.coeffs.items():
            out += float(c) * label_matrix(label)
        return out

    def as_strings(self) -> dict:
        return {k: f"{v.numerator}/{v.denominator}" for k, v in sorted(self.coeffs.items())}

    @classmethod
    def from_strings(cls, iface, data: dict) -> "PauliCoefficients":
        return cls(tuple(iface), {k: Fraction(v) for k, v in data.items()})


def all_labels(k: int):
    return ("".join(t) for t in product("IXYZ", repeat=k))


def dense_to_coefficients(mat: np.ndarray, iface) -> dict:
    """Float Pauli expansion of a dense operator (oracle use only)."""
    k = len(tuple(iface))
    out = {}
    for label in all_labels(k):
        c = np.trace(label_matrix(label) @ mat) / 2**k
        out[label] = c
    return out
