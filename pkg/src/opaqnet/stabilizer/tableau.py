"""Weighted mixed-state stabilizer tableaus.

A tableau holds a rational weight ``w`` and ``s <= n`` independent commuting
signed Pauli generators; it denotes ``w / 2^n * sum_{g in <generators>} g``.
Destabilizers are not stored: projections use an anticommutation scan and a
group-membership solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from . import kernels
from .pauli import LETTERS, PauliCoefficients, PauliString

GATES = {"H": 1, "S": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2, "CZ": 2}
BASES = {"0": ("Z", 1), "1": ("Z", -1), "+": ("X", 1), "-": ("X", -1)}
BASIS_ALIASES = {"|0>": "0", "|1>": "1", "|+>": "+", "|->": "-", "plus": "+", "minus": "-"}


def normalize_basis(b: str) -> str:
    b = BASIS_ALIASES.get(b, b)
    if b not in BASES:
        raise ValueError(f"unknown basis state {b!r}")
    return b


@dataclass(frozen=True)
class BasisPrep:
    """Index-level preparation: one basis letter per register, then Clifford gates."""

    bases: tuple
    gates: tuple = ()

    def rows(self, n: int) -> list:
        if len(self.bases) != n:
            raise ValueError(f"preparation covers {len(self.bases)} registers, expected {n}")
        rows = []
        for r, b in enumerate(self.bases):
            letter, sign = BASES[normalize_basis(b)]
            rows.append((1 << r if letter == "X" else 0, 1 << r if letter == "Z" else 0, 0 if sign > 0 else 2))
        k = kernels.for_width(n)
        for name, regs in self.gates:
            rows = _conjugate(k, rows, name, regs, n)
        return rows


# Index-level program steps:
#   ("prep", r, basis) | ("gate", name, regs) | ("project", PauliString, outcome) | ("replace", BasisPrep)


@dataclass(frozen=True)
class Tableau:
    n: int
    weight: Fraction
    generators: tuple

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("negative weight")

    @property
    def s(self) -> int:
        return len(self.generators)

    def pauli_strings(self) -> list:
        return [PauliString(self.n, x, z, 1 if p == 0 else -1) for x, z, p in self.generators]

    def canonical(self) -> "Tableau":
        return Tableau(self.n, self.weight, canonical_generators(self.generators, self.n))

    def same_state(self, other: "Tableau") -> bool:
        if self.n != other.n or self.weight != other.weight:
            return False
        if self.weight == 0:
            return True
        return canonical_generators(self.generators, self.n) == canonical_generators(other.generators, other.n)


def _check_regs(regs, n):
    for r in regs:
        if not 0 <= r < n:
            raise IndexError(f"register index {r} out of range for {n} registers")


def _conjugate(k, rows, name, regs, n):
    if name not in GATES:
        raise ValueError(f"unsupported gate {name!r}")
    regs = tuple(regs)
    if len(regs) != GATES[name]:
        raise ValueError(f"gate {name} takes {GATES[name]} register(s), got {len(regs)}")
    _check_regs(regs, n)
    if len(regs) == 2 and regs[0] == regs[1]:
        raise ValueError(f"gate {name} needs two distinct registers")
    a = regs[0]
    b = regs[1] if len(regs) == 2 else a
    return k.conjugate_rows(rows, kernels.GATE_CODES[name], a, b)


def init_tableau(prep: BasisPrep, n: int) -> Tableau:
    return Tableau(n, Fraction(1), tuple(prep.rows(n)))


def apply_clifford(g: Tableau, name: str, regs) -> Tableau:
    rows = _conjugate(kernels.for_width(g.n), g.generators, name, regs, g.n)
    return Tableau(g.n, g.weight, tuple(rows))


def apply_projection(g: Tableau, pauli: PauliString, outcome: int) -> Tableau:
    """Sandwich by ``(I + outcome * pauli) / 2``."""
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    if pauli.n != g.n:
        raise ValueError("Pauli width does not match tableau")
    if g.weight == 0:
        return g
    k = kernels.for_width(g.n)
    qx, qz = pauli.x, pauli.z
    qp = (pauli.phase + (0 if outcome > 0 else 2)) & 3
    gens = list(g.generators)
    anti = [i for i, (x, z, _) in enumerate(gens) if k.anticommutes(x, z, qx, qz)]
    if anti:
        first = gens[anti[0]]
        for i in anti[1:]:
            gens[i] = k.pauli_mul(*gens[i], *first)
        gens[anti[0]] = (qx, qz, qp)
        return Tableau(g.n, g.weight / 2, tuple(gens))
    if qx == 0 and qz == 0:
        return g if qp == 0 else Tableau(g.n, Fraction(0), g.generators)
    ph = k.solve(gens, qx, qz)
    if ph < 0:
        gens.append((qx, qz, qp))
        return Tableau(g.n, g.weight / 2, tuple(gens))
    if ph == qp:
        return g
    return Tableau(g.n, Fraction(0), g.generators)


def apply_prep(g: Tableau, reg: int, basis: str) -> Tableau:
    """Discard register ``reg`` and re-prepare it in ``basis``; weight unchanged."""
    _check_regs((reg,), g.n)
    letter, sign = BASES[normalize_basis(basis)]
    k = kernels.for_width(g.n)
    rows = k.eliminate(g.generators, 1 << reg)
    bit = 1 << reg
    rows.append((bit if letter == "X" else 0, bit if letter == "Z" else 0, 0 if sign > 0 else 2))
    return Tableau(g.n, g.weight, tuple(rows))


def apply_replacement(g: Tableau, prep: BasisPrep) -> Tableau:
    return Tableau(g.n, g.weight, tuple(prep.rows(g.n)))


def apply_step(g: Tableau, step) -> Tableau:
    kind = step[0]
    if kind == "gate":
        return apply_clifford(g, step[1], step[2])
    if kind == "project":
        return apply_projection(g, step[1], step[2])
    if kind == "prep":
        return apply_prep(g, step[1], step[2])
    if kind == "replace":
        return apply_replacement(g, step[1])
    raise ValueError(f"unknown step kind {kind!r}")


def apply_branch(g: Tableau, branch) -> Tableau:
    """Run a branch program; ``branch`` is a step sequence or has a ``compiled`` attribute."""
    steps = getattr(branch, "compiled", branch)
    for st in steps:
        if g.weight == 0:
            break
        g = apply_step(g, st)
    return g


def weight(g: Tableau) -> Fraction:
    return g.weight


def reduce_to(g: Tableau, iface, names=None) -> PauliCoefficients:
    """Exact Pauli expansion of the partial trace onto the ordered register indices ``iface``."""
    iface = tuple(iface)
    _check_regs(iface, g.n)
    names = iface if names is None else tuple(names)
    if g.weight == 0:
        return PauliCoefficients.zero(names)
    keep = 0
    for r in iface:
        keep |= 1 << r
    comp = ((1 << g.n) - 1) & ~keep
    k = kernels.for_width(g.n)
    rows = k.eliminate(g.generators, comp)
    base = g.weight / 2 ** len(iface)
    coeffs = {}
    x = z = p = 0
    # Gray-code walk over the 2^|rows| subgroup elements.
    coeffs[_label(0, 0, iface)] = base
    for i in range(1, 1 << len(rows)):
        j = (i & -i).bit_length() - 1
        x, z, p = k.pauli_mul(x, z, p, *rows[j])
        if p & 1:
            raise ArithmeticError("non-Hermitian group element in stabilizer subgroup")
        coeffs[_label(x, z, iface)] = base if p == 0 else -base
    return PauliCoefficients(names, coeffs)


def _label(x, z, iface) -> str:
    return "".join(LETTERS[((x >> r) & 1) | (((z >> r) & 1) << 1)] for r in iface)


def den_coefficients(g: Tableau) -> PauliCoefficients:
    return reduce_to(g, range(g.n))


def canonical_generators(gens, n: int) -> tuple:
    """Reduced row-echelon form of the generator set (unique per stabilizer group)."""
    k = kernels.for_width(n)
    rows = [(x, z, p) for x, z, p in gens]
    out = []
    for col in range(2 * n - 1, -1, -1):
        part, bitpos = (0, col - n) if col >= n else (1, col)
        bit = 1 << bitpos
        piv = next((i for i, r in enumerate(rows) if r[part] & bit), -1)
        if piv < 0:
            continue
        prow = rows.pop(piv)
        rows = [k.pauli_mul(*r, *prow) if r[part] & bit else r for r in rows]
        out = [k.pauli_mul(*r, *prow) if r[part] & bit else r for r in out]
        out.append(prow)
    return tuple(sorted(out, key=lambda r: (r[0], r[1]), reverse=True))


def is_valid(g: Tableau) -> bool:
    """Generators pairwise commute, are Hermitian and independent."""
    for (x1, z1, p1), (x2, z2, p2) in combinations(g.generators, 2):
        if (bin(x1 & z2).count("1") + bin(z1 & x2).count("1")) & 1:
            return False
    if any(p & 1 for _, _, p in g.generators):
        return False
    return len(canonical_generators(g.generators, g.n)) == len(g.generators)
