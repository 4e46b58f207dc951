"""Seeded generators for randomized suites: stabilizer programs, toy nets, classical models.

Everything here takes a ``random.Random`` so that runs are reproducible from a seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import dense
from .pomset import Pomset
from .stabilizer.pauli import PauliString
from .stabilizer.tableau import BasisPrep, apply_step, den_coefficients, init_tableau, reduce_to

SINGLE_GATES = ("H", "S", "X", "Y", "Z")
TWO_GATES = ("CNOT", "CZ")
BASIS_LETTERS = ("0", "1", "+", "-")


# ---------------------------------------------------------------- stabilizer programs


def random_prep(rng: random.Random, n: int, gates: int = 2) -> BasisPrep:
    bases = tuple(rng.choice(BASIS_LETTERS) for _ in range(n))
    gs = []
    for _ in range(rng.randint(0, gates)):
        if n >= 2 and rng.random() < 0.5:
            a, b = rng.sample(range(n), 2)
            gs.append((rng.choice(TWO_GATES), (a, b)))
        else:
            gs.append((rng.choice(SINGLE_GATES), (rng.randrange(n),)))
    return BasisPrep(bases, tuple(gs))


def random_pauli(rng: random.Random, n: int) -> PauliString:
    while True:
        letters = "".join(rng.choice("IXYZ") for _ in range(n))
        if letters != "I" * n:
            return PauliString.from_letters(letters, list(range(n)), n, rng.choice((1, -1)))


def random_step(rng: random.Random, n: int):
    u = rng.random()
    if u < 0.45:
        if n >= 2 and rng.random() < 0.4:
            a, b = rng.sample(range(n), 2)
            return ("gate", rng.choice(TWO_GATES), (a, b))
        return ("gate", rng.choice(SINGLE_GATES), (rng.randrange(n),))
    if u < 0.8:
        return ("project", random_pauli(rng, n), rng.choice((1, -1)))
    if u < 0.95:
        return ("prep", rng.randrange(n), rng.choice(BASIS_LETTERS))
    return ("replace", random_prep(rng, n))


def random_program(rng: random.Random, n: int, length: int) -> list:
    return [random_step(rng, n) for _ in range(length)]


@dataclass
class OracleCase:
    n: int
    prep: BasisPrep
    steps: list
    ok: bool = True
    detail: str = ""


def check_program(prep: BasisPrep, steps, n: int, tol: float = 1e-10, rng: random.Random | None = None) -> tuple:
    """Compare tableau and dense simulation step by step.

    Checks full denotations, exact weights against traces, projection weight
    ratios in {0, 1/2, 1}, and the partial trace onto a random register subset.
    Returns ``(ok, message)``.
    """
    rng = rng or random.Random(0)
    g = init_tableau(prep, n)
    rho = dense.prep_density(prep, n)
    for i, st in enumerate(steps):
        before = g.weight
        g = apply_step(g, st)
        rho = dense.apply_ops(rho, dense.compile_steps((st,), n))
        if st[0] == "project" and before != 0:
            ratio = g.weight / before
            if ratio not in (0, Fraction(1, 2), 1):
                return False, f"step {i}: projection weight ratio {ratio}"
        if abs(float(g.weight) - np.trace(rho).real) > tol:
            return False, f"step {i}: weight {g.weight} vs trace {np.trace(rho).real}"
        gap = np.abs(den_coefficients(g).to_dense(limit=n) - rho).max()
        if gap > tol:
            return False, f"step {i}: denotation gap {gap:.3e}"
    k = rng.randint(1, n)
    keep = tuple(sorted(rng.sample(range(n), k)))
    red = reduce_to(g, keep).to_dense(limit=k)
    gap = np.abs(red - dense.partial_trace(rho, keep, n)).max()
    if gap > tol:
        return False, f"partial trace onto {keep}: gap {gap:.3e}"
    return True, ""


def oracle_suite(cases: int, max_qubits: int, seed: int = 0, max_length: int = 12) -> list:
    """Seeded dense-versus-tableau equivalence cases."""
    rng = random.Random(seed)
    out = []
    for _ in range(cases):
        n = rng.randint(1, max_qubits)
        prep = random_prep(rng, n)
        steps = random_program(rng, n, rng.randint(1, max_length))
        ok, msg = check_program(prep, steps, n, rng=rng)
        out.append(OracleCase(n, prep, steps, ok, msg))
    return out


# ---------------------------------------------------------------- toy nets


def _gate_step(name, regs):
    return {"gate": {"name": name, "regs": list(regs)}}


def _proj_step(pauli, regs, outcome):
    return {"project": {"pauli": pauli, "regs": list(regs), "outcome": outcome}}


def _lane_branches(rng: random.Random, reg: str, label: str) -> list:
    if rng.random() < 0.5:
        prog = [_gate_step(rng.choice(SINGLE_GATES), [reg]) for _ in range(rng.randint(1, 2))]
        return [{"outcome": "u", "label": label, "program": prog}]
    letter = rng.choice("XYZ")
    pre = [_gate_step(rng.choice(SINGLE_GATES), [reg])] if rng.random() < 0.5 else []
    return [
        {"outcome": "p", "label": label, "program": pre + [_proj_step(letter, [reg], 1)]},
        {"outcome": "m", "label": label, "program": pre + [_proj_step(letter, [reg], -1)]},
    ]


def random_toy_net(rng: random.Random, max_lanes: int = 3, max_len: int = 2, alphabet=("a", "b")) -> dict:
    """Parallel lanes after a fork; lane ``i`` owns register ``r{i}``; lane 0 starts with a secret choice.

    Returns a model dictionary whose single target ``all`` is the full observation
    pomset shared by every complete run.
    """
    lanes = rng.randint(2, max_lanes)
    regs = [f"r{i}" for i in range(lanes)]
    places = ["s"]
    transitions = []
    fork_label = rng.choice(("go", "tau"))
    fork_prog = []
    if rng.random() < 0.6:
        a, b = rng.sample(regs, 2)
        fork_prog = [_gate_step("H", [a]), _gate_step("CNOT", [a, b])]
    transitions.append(
        {
            "id": "t_fork",
            "pre": ["s"],
            "post": [f"l{i}_0" for i in range(lanes)],
            "access": list(regs) if fork_prog else [],
            "branches": [{"outcome": "u", "label": fork_label, "program": fork_prog}],
        }
    )
    nodes, order = [], []
    if fork_label != "tau":
        nodes.append(fork_label)
    root = 0 if fork_label != "tau" else None
    for i in range(lanes):
        length = rng.randint(1, max_len)
        places.extend(f"l{i}_{j}" for j in range(length + 1))
        prev = root
        for j in range(length):
            label = rng.choice(alphabet + ("tau",))
            alts = ["sec", "non"] if (i == 0 and j == 0) else [""]
            for alt in alts:
                transitions.append(
                    {
                        "id": f"t{i}_{j}{'_' + alt if alt else ''}",
                        "pre": [f"l{i}_{j}"],
                        "post": [f"l{i}_{j + 1}"],
                        "access": [regs[i]],
                        "controllable": bool(alt),
                        "branches": _lane_branches(rng, regs[i], label),
                    }
                )
            if label != "tau":
                nodes.append(label)
                cur = len(nodes) - 1
                if prev is not None:
                    order.append((prev, cur))
                prev = cur
    target = Pomset.build(nodes, order)
    k = rng.randint(1, min(2, lanes))
    return {
        "name": "toy",
        "observable_alphabet": _alphabet(transitions),
        "control_places": places,
        "quantum_registers": regs,
        "initial_marking": ["s"],
        "initial_state": {"assign": {r: rng.choice(BASIS_LETTERS) for r in regs}},
        "attacker_interface": sorted(rng.sample(regs, k)),
        "secret": {"mode": "event-predicate", "transitions": ["t0_0_sec"]},
        "transitions": transitions,
        "targets": {"all": target.to_json()},
    }


# ---------------------------------------------------------------- classical (diagonal) models


def random_diagonal_model(rng: random.Random, n_regs: int = 3, length: int = 3) -> dict:
    """A sequential net of classical operations on computational-basis registers.

    The first step is a choice between a secret and a non-secret transition.  Every
    state stays diagonal: only X, CNOT, Z projections, basis resets, and fair coins
    (reset to ``+`` immediately measured in Z) appear.  Targets are all structural
    label words of the chain.
    """
    regs = [f"c{i}" for i in range(n_regs)]
    places = [f"p{j}" for j in range(length + 2)]
    transitions = []
    iface = sorted(rng.sample(regs, rng.randint(1, 2)), key=regs.index)

    def ops(focus=None, kinds=("flip", "cnot", "measure", "coin", "reset")):
        kind = rng.choice(kinds)
        r = focus or rng.choice(regs)
        if kind == "flip":
            return [[_gate_step("X", [r])]], False
        if kind == "cnot":
            a, b = rng.sample(regs, 2) if focus is None else (rng.choice([x for x in regs if x != r]), r)
            return [[_gate_step("CNOT", [a, b])]], False
        if kind == "reset":
            return [[{"prep": {"reg": r, "basis": rng.choice("01")}}]], False
        if kind == "measure":
            return [[_proj_step("Z", [r], 1)], [_proj_step("Z", [r], -1)]], True
        coin = {"prep": {"reg": r, "basis": "+"}}
        return [[coin, _proj_step("Z", [r], 1)], [coin, _proj_step("Z", [r], -1)]], True

    def branches(progs, reveal, base):
        out = []
        for k, prog in enumerate(progs):
            label = f"{base}{k}" if reveal else base
            out.append({"outcome": str(k), "label": label, "program": prog})
        return out

    words = [()]
    # secret choice
    choice_label = rng.choice(("s", "tau"))
    choice_labels = set()
    for alt in ("sec", "non"):
        # the alternatives act on an interface register so the posteriors can differ
        progs, is_meas = ops(rng.choice(iface))
        if rng.random() < 0.7:
            more, meas2 = ops()
            progs, is_meas = [p + q for p in progs for q in more], is_meas or meas2
        reveal = is_meas and choice_label != "tau" and rng.random() < 0.5
        bs = branches(progs, reveal, choice_label)
        choice_labels |= {b["label"] for b in bs}
        transitions.append(
            {
                "id": f"t_{alt}",
                "pre": [places[0]],
                "post": [places[1]],
                "access": sorted({r for p in progs for st in p for r in _regs_of(st)}, key=regs.index),
                "controllable": True,
                "branches": bs,
            }
        )
    words = [w + ((lab,) if lab != "tau" else ()) for w in words for lab in sorted(choice_labels)]
    for j in range(1, length + 1):
        # resets are rarer later on: they erase whatever the secret choice left behind
        progs, is_meas = ops(kinds=("flip", "cnot", "cnot", "measure", "measure", "coin", "reset"))
        base = rng.choice(("a", "b", "tau"))
        reveal = is_meas and base != "tau" and rng.random() < 0.6
        bs = branches(progs, reveal, base)
        transitions.append(
            {
                "id": f"t{j}",
                "pre": [places[j]],
                "post": [places[j + 1]],
                "access": sorted({r for p in progs for st in p for r in _regs_of(st)}, key=regs.index),
                "branches": bs,
            }
        )
        labs = sorted({b["label"] for b in bs})
        words = [w + ((lab,) if lab != "tau" else ()) for w in words for lab in labs]
    words = sorted(set(words))
    return {
        "name": "diagonal",
        "observable_alphabet": _alphabet(transitions),
        "control_places": places,
        "quantum_registers": regs,
        "initial_marking": [places[0]],
        "initial_state": {"assign": {r: rng.choice("01") for r in regs}},
        "attacker_interface": iface,
        "secret": {"mode": "event-predicate", "transitions": ["t_sec"]},
        "transitions": transitions,
        "targets": {f"w{i}": list(w) for i, w in enumerate(words)},
    }


def _alphabet(transitions) -> list:
    return sorted({b["label"] for t in transitions for b in t["branches"]} - {"tau"})


def _regs_of(step: dict) -> list:
    (kind, body), = step.items()
    if kind == "prep":
        return [body["reg"]]
    return list(body.get("regs", []))


__all__ = [
    "OracleCase",
    "check_program",
    "oracle_suite",
    "random_diagonal_model",
    "random_pauli",
    "random_prep",
    "random_program",
    "random_step",
    "random_toy_net",
]
