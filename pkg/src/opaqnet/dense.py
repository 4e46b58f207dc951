"""Explicit density-matrix simulation of branch programs.

Register 0 is the most significant tensor factor.  Used as the independent oracle
for the stabilizer backend and as the common backend of the benchmark.
"""
from __future__ import annotations

from functools import lru_cache, reduce

import numpy as np

from .stabilizer.pauli import PAULI_MATRICES, PauliCoefficients, PauliString
from .stabilizer.tableau import BasisPrep, normalize_basis

MAX_DENSE_REGISTERS = 10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)
SINGLE = {"H": _H, "S": _S, "X": PAULI_MATRICES["X"], "Y": PAULI_MATRICES["Y"], "Z": PAULI_MATRICES["Z"]}
KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


class DenseTooLarge(ValueError):
    pass


def _check_n(n: int) -> None:
    if n > MAX_DENSE_REGISTERS:
        raise DenseTooLarge(f"{n} registers exceeds dense bound {MAX_DENSE_REGISTERS}")


def embed(ops: dict, n: int) -> np.ndarray:
    """Tensor product with ``ops[r]`` on register ``r`` and identity elsewhere."""
    eye = np.eye(2, dtype=complex)
    return reduce(np.kron, [ops.get(r, eye) for r in range(n)], np.ones((1, 1), dtype=complex))


def gate_matrix(name: str, regs, n: int) -> np.ndarray:
    regs = tuple(regs)
    if name in SINGLE:
        return embed({regs[0]: SINGLE[name]}, n)
    a, b = regs
    target = PAULI_MATRICES["X"] if name == "CNOT" else PAULI_MATRICES["Z"]
    if name not in ("CNOT", "CZ"):
        raise ValueError(f"unsupported gate {name!r}")
    return embed({a: _P0}, n) + embed({a: _P1, b: target}, n)


def pauli_matrix(p: PauliString) -> np.ndarray:
    ops = {}
    for r in range(p.n):
        letter = p.letters([r])
        if letter != "I":
            ops[r] = PAULI_MATRICES[letter]
    return p.sign * embed(ops, p.n)


def prep_density(prep: BasisPrep, n: int) -> np.ndarray:
    return _prep_density(prep, n).copy()


@lru_cache(maxsize=256)
def _prep_density(prep: BasisPrep, n: int) -> np.ndarray:
    _check_n(n)
    psi = reduce(np.kron, [KETS[normalize_basis(b)] for b in prep.bases], np.ones(1, dtype=complex))
    for name, regs in prep.gates:
        psi = gate_matrix(name, regs, n) @ psi
    return np.outer(psi, psi.conj())


def _step_ops(step, n: int):
    kind = step[0]
    if kind == "gate":
        return ("kraus", [gate_matrix(step[1], step[2], n)])
    if kind == "project":
        p, outcome = step[1], step[2]
        return ("kraus", [(np.eye(2**n, dtype=complex) + outcome * pauli_matrix(p)) / 2])
    if kind == "prep":
        r, basis = step[1], normalize_basis(step[2])
        ket = KETS[basis].reshape(2, 1)
        return ("kraus", [embed({r: ket @ KETS[v].reshape(1, 2).conj()}, n) for v in ("0", "1")])
    if kind == "replace":
        return ("replace", prep_density(step[1], n))
    raise ValueError(f"unknown step kind {kind!r}")


@lru_cache(maxsize=4096)
def compile_steps(steps: tuple, n: int) -> tuple:
    """Fuse a step list into Kraus groups; runs of single-Kraus steps become one matrix."""
    _check_n(n)
    out = []
    for st in steps:
        kind, payload = _step_ops(st, n)
        if kind == "kraus" and len(payload) == 1 and out and out[-1][0] == "kraus" and len(out[-1][1]) == 1:
            out[-1] = ("kraus", [payload[0] @ out[-1][1][0]])
        else:
            out.append((kind, payload))
    return tuple((k, tuple(v) if k == "kraus" else v) for k, v in out)


def apply_ops(rho: np.ndarray, ops) -> np.ndarray:
    for kind, payload in ops:
        if kind == "kraus":
            rho = sum(K @ rho @ K.conj().T for K in payload)
        else:
            rho = payload * np.trace(rho).real
    return rho


def dense_apply_branch(rho: np.ndarray, branch, n: int | None = None) -> np.ndarray:
    n = int(round(np.log2(rho.shape[0]))) if n is None else n
    steps = tuple(getattr(branch, "compiled", branch))
    return apply_ops(rho, compile_steps(steps, n))


def partial_trace(rho: np.ndarray, keep, n: int) -> np.ndarray:
    """Reduced operator on the ordered registers ``keep``."""
    keep = list(keep)
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    sub = np.einsum("".join(row) + "".join(col) + "->" + out, t) if n else t
    k = len(keep)
    return sub.reshape(2**k, 2**k)


def coefficients_to_dense(c: PauliCoefficients) -> np.ndarray:
    return c.to_dense(limit=MAX_DENSE_REGISTERS)


class DenseBackend:
    """State backend over explicit matrices (protocol shared with ``TableauBackend``)."""

    name = "dense"

    def __init__(self, n: int, prep: BasisPrep):
        _check_n(n)
        self.n = n
        self.prep = prep
        self._ops: dict = {}

    def initial(self):
        return prep_density(self.prep, self.n)

    def apply(self, state, branch):
        ops = self._ops.get(id(branch))
        if ops is None:
            ops = self._ops[id(branch)] = (branch, compile_steps(tuple(branch.compiled), self.n))
        return apply_ops(state, ops[1])

    def weight(self, state) -> float:
        return float(state.trace().real)

    def alive(self, state) -> bool:
        return state.trace().real > 1e-12

    def reduce(self, state, iface, names=None):
        return partial_trace(state, iface, self.n)

