"""Net model: control places, qubit registers, branch instruments, labels, attacker view.

Models are read from JSON.  Program steps are tagged records::

    {"prep": {"reg": "q1", "basis": "0"}}
    {"gate": {"name": "CNOT", "regs": ["q1", "q2"]}}
    {"project": {"pauli": "ZZ", "regs": ["q1", "q2"], "outcome": -1}}
    {"replace_all": {"assign": {...}, "gates": [...]}}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .stabilizer.pauli import PauliString
from .stabilizer.tableau import GATES, BasisPrep, normalize_basis

TAU = "tau"
TAU_ALIASES = {"tau", "τ", ""}
ORACLE_MAX_REGISTERS = 6

Marking = frozenset


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.code} [{self.subject}]: {self.message}"


@dataclass(frozen=True)
class PrepSpec:
    assign: tuple  # ((register, basis), ...)
    gates: tuple = ()  # ((name, (register, ...)), ...)

    def compile(self, index: dict) -> BasisPrep:
        bases = ["0"] * len(index)
        seen = set()
        for reg, b in self.assign:
            bases[index[reg]] = b
            seen.add(reg)
        missing = set(index) - seen
        if missing:
            raise ModelError(f"preparation does not cover registers {sorted(missing)}")
        return BasisPrep(tuple(bases), tuple((g, tuple(index[r] for r in regs)) for g, regs in self.gates))

    def to_json(self) -> dict:
        return {
            "assign": {r: b for r, b in self.assign},
            "gates": [{"name": g, "regs": list(regs)} for g, regs in self.gates],
        }


@dataclass(frozen=True)
class Branch:
    outcome: str
    label: str
    program: tuple  # raw step records (register names)
    compiled: tuple = field(default=(), compare=False, repr=False)

    @property
    def observable(self) -> bool:
        return self.label != TAU


@dataclass(frozen=True)
class Transition:
    id: str
    pre: frozenset
    post: frozenset
    access: frozenset
    branches: tuple
    controllable: bool = False
    masking: bool = False
    evaluation_cut: bool = False

    @property
    def places(self) -> frozenset:
        return self.pre | self.post


@dataclass(frozen=True)
class SecretSpec:
    mode: str  # "marking-set" | "event-predicate"
    marking_sets: tuple = ()
    transitions: frozenset = frozenset()


@dataclass(frozen=True)
class NetModel:
    control_places: frozenset
    quantum_registers: tuple
    transitions: tuple
    initial_marking: frozenset
    initial_state: PrepSpec
    attacker_interface: tuple
    secret: SecretSpec
    observable_alphabet: frozenset
    targets: dict = field(default_factory=dict, compare=False)
    architecture: dict | None = field(default=None, compare=False)
    name: str = ""

    @property
    def flow(self) -> frozenset:
        arcs = set()
        for t in self.transitions:
            arcs |= {(p, t.id) for p in t.pre}
            arcs |= {(t.id, p) for p in t.post}
        return frozenset(arcs)

    @property
    def register_index(self) -> dict:
        return {r: i for i, r in enumerate(self.quantum_registers)}

    @property
    def n(self) -> int:
        return len(self.quantum_registers)

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(f"unknown transition {tid!r}")

    def interface_indices(self) -> tuple:
        idx = self.register_index
        return tuple(idx[r] for r in self.attacker_interface)

    def initial_prep(self) -> BasisPrep:
        return self.initial_state.compile(self.register_index)

    @property
    def controllable(self) -> frozenset:
        return frozenset(t.id for t in self.transitions if t.controllable)


# ---------------------------------------------------------------- firing rule


def enabled(m, t: Transition) -> bool:
    return t.pre <= m and not ((m - t.pre) & t.post)


def fire(m, t: Transition) -> frozenset:
    if not enabled(m, t):
        raise ModelError(f"transition {t.id} not enabled at {sorted(m)}")
    return frozenset((m - t.pre) | t.post)


def structurally_independent(t1: Transition, t2: Transition) -> bool:
    if t1.id == t2.id:
        raise ValueError("independence is only defined for distinct transitions")
    return not (t1.places & t2.places) and not (t1.access & t2.access)


# ---------------------------------------------------------------- parsing


def _step_regs(step: dict) -> list:
    (kind, body), = step.items()
    if kind == "prep":
        return [body["reg"]]
    if kind in ("gate", "project"):
        return list(body["regs"])
    return []


def _parse_prep(obj, registers: set) -> PrepSpec:
    if not isinstance(obj, dict) or "assign" not in obj:
        raise ModelError("preparation needs an 'assign' map")
    assign = []
    for reg, b in obj["assign"].items():
        if reg not in registers:
            raise ModelError(f"unknown register {reg!r} in preparation")
        try:
            assign.append((reg, normalize_basis(str(b))))
        except ValueError as exc:
            raise ModelError(str(exc)) from None
    gates = []
    for g in obj.get("gates", []):
        name, regs = g["name"], tuple(g["regs"])
        if name not in GATES:
            raise ModelError(f"unsupported gate {name!r}")
        for r in regs:
            if r not in registers:
                raise ModelError(f"unknown register {r!r} in preparation")
        gates.append((name, regs))
    return PrepSpec(tuple(assign), tuple(gates))


def _parse_step(step, registers: set):
    if not isinstance(step, dict) or len(step) != 1:
        raise ModelError(f"program step must be a single tagged record, got {step!r}")
    (kind, body), = step.items()
    if kind == "prep":
        if body["reg"] not in registers:
            raise ModelError(f"unknown register {body['reg']!r}")
        try:
            basis = normalize_basis(str(body["basis"]))
        except ValueError as exc:
            raise ModelError(str(exc)) from None
        return {"prep": {"reg": body["reg"], "basis": basis}}
    if kind == "gate":
        name = body["name"]
        if name not in GATES:
            raise ModelError(f"unsupported gate {name!r}; only stabilizer primitives are allowed")
        regs = list(body["regs"])
        if len(regs) != GATES[name]:
            raise ModelError(f"gate {name} takes {GATES[name]} register(s)")
        for r in regs:
            if r not in registers:
                raise ModelError(f"unknown register {r!r}")
        return {"gate": {"name": name, "regs": regs}}
    if kind == "project":
        pauli = str(body["pauli"]).upper()
        regs = list(body["regs"])
        if len(pauli) != len(regs) or set(pauli) - set("IXYZ"):
            raise ModelError(f"bad Pauli projection {pauli!r} on {regs}")
        for r in regs:
            if r not in registers:
                raise ModelError(f"unknown register {r!r}")
        outcome = int(body["outcome"])
        if outcome not in (1, -1):
            raise ModelError("projection outcome must be +1 or -1")
        return {"project": {"pauli": pauli, "regs": regs, "outcome": outcome}}
    if kind == "replace_all":
        return {"replace_all": _parse_prep(body, registers).to_json()}
    raise ModelError(f"unknown program step {kind!r}; arbitrary Kraus maps are not supported")


def compile_program(program, index: dict) -> tuple:
    n = len(index)
    out = []
    for step in program:
        (kind, body), = step.items()
        if kind == "prep":
            out.append(("prep", index[body["reg"]], body["basis"]))
        elif kind == "gate":
            out.append(("gate", body["name"], tuple(index[r] for r in body["regs"])))
        elif kind == "project":
            regs = [index[r] for r in body["regs"]]
            out.append(("project", PauliString.from_letters(body["pauli"], regs, n), body["outcome"]))
        elif kind == "replace_all":
            out.append(("replace", _parse_prep(body, set(index)).compile(index)))
    return tuple(out)


def _label(raw) -> str:
    return TAU if raw is None or str(raw) in TAU_ALIASES else str(raw)


def model_from_dict(d: dict, strict: bool = True) -> NetModel:
    if not isinstance(d, dict):
        raise ModelError("model must be a JSON object")
    places_list = list(d.get("control_places", []))
    if len(set(places_list)) != len(places_list):
        raise ModelError("duplicate place id")
    places = frozenset(places_list)
    regs = []
    for r in d.get("quantum_registers", []):
        if isinstance(r, dict):
            if int(r.get("dim", 2)) != 2:
                raise ModelError(f"register {r.get('id')!r}: only qubit registers (dim 2) are supported")
            r = r["id"]
        regs.append(str(r))
    if len(set(regs)) != len(regs):
        raise ModelError("duplicate register id")
    if places & set(regs):
        raise ModelError(f"ids used both as place and register: {sorted(places & set(regs))}")
    regset = set(regs)
    index = {r: i for i, r in enumerate(regs)}
    alphabet = frozenset(str(a) for a in d.get("observable_alphabet", []))

    transitions = []
    seen = set()
    for td in d.get("transitions", []):
        tid = str(td["id"])
        if tid in seen or tid in places or tid in regset:
            raise ModelError(f"duplicate id {tid!r}")
        seen.add(tid)
        for key in ("pre", "post"):
            for p in td.get(key, []):
                if p not in places:
                    raise ModelError(f"unknown place {p!r} in {key} of {tid}")
        access = frozenset(td.get("access", []))
        for r in access:
            if r not in regset:
                raise ModelError(f"unknown register {r!r} in access of {tid}")
        branches = []
        for bd in td.get("branches", []):
            program = tuple(_parse_step(s, regset) for s in bd.get("program", []))
            branches.append(
                Branch(str(bd.get("outcome", "0")), _label(bd.get("label")), program, compile_program(program, index))
            )
        transitions.append(
            Transition(
                tid,
                frozenset(td.get("pre", [])),
                frozenset(td.get("post", [])),
                access,
                tuple(branches),
                bool(td.get("controllable", False)),
                bool(td.get("masking", False)),
                bool(td.get("evaluation_cut", False)),
            )
        )

    m0 = frozenset(d.get("initial_marking", []))
    for p in m0:
        if p not in places:
            raise ModelError(f"unknown place {p!r} in initial marking")
    prep = _parse_prep(d.get("initial_state", {"assign": {}}), regset)
    iface = tuple(d.get("attacker_interface", []))
    for r in iface:
        if r not in regset:
            raise ModelError(f"unknown register {r!r} in attacker interface")

    sd = d.get("secret", {"mode": "event-predicate", "transitions": []})
    mode = sd.get("mode")
    if mode == "marking-set":
        sets = tuple(frozenset(s) for s in sd.get("markings", []))
        for s in sets:
            for p in s:
                if p not in places:
                    raise ModelError(f"unknown place {p!r} in secret marking")
        secret = SecretSpec(mode, sets, frozenset())
    elif mode == "event-predicate":
        ts = frozenset(sd.get("transitions", []))
        for t in ts:
            if t not in seen:
                raise ModelError(f"unknown transition {t!r} in secret predicate")
        secret = SecretSpec(mode, (), ts)
    else:
        raise ModelError(f"secret mode must be 'marking-set' or 'event-predicate', got {mode!r}")

    model = NetModel(
        places,
        tuple(regs),
        tuple(transitions),
        m0,
        prep,
        iface,
        secret,
        alphabet,
        dict(d.get("targets", {})),
        d.get("architecture"),
        str(d.get("name", "")),
    )
    if strict:
        errs = [x for x in validate_model(model) if x.severity == "error"]
        if errs:
            raise ModelError("; ".join(str(e) for e in errs))
    return model


def parse_model(text: str, strict: bool = True) -> NetModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return model_from_dict(d, strict=strict)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ModelError(f"malformed model: {exc!r}") from None


def load_model(path, strict: bool = True) -> NetModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), strict=strict)


def model_to_dict(m: NetModel) -> dict:
    out = {
        "control_places": sorted(m.control_places),
        "quantum_registers": list(m.quantum_registers),
        "observable_alphabet": sorted(m.observable_alphabet),
        "initial_marking": sorted(m.initial_marking),
        "initial_state": m.initial_state.to_json(),
        "attacker_interface": list(m.attacker_interface),
        "transitions": [],
    }
    if m.name:
        out["name"] = m.name
    for t in m.transitions:
        td = {
            "id": t.id,
            "pre": sorted(t.pre),
            "post": sorted(t.post),
            "access": [r for r in m.quantum_registers if r in t.access],
            "controllable": t.controllable,
            "masking": t.masking,
            "branches": [{"outcome": b.outcome, "label": b.label, "program": list(b.program)} for b in t.branches],
        }
        if t.evaluation_cut:
            td["evaluation_cut"] = True
        out["transitions"].append(td)
    if m.secret.mode == "marking-set":
        out["secret"] = {"mode": "marking-set", "markings": [sorted(s) for s in m.secret.marking_sets]}
    else:
        out["secret"] = {"mode": "event-predicate", "transitions": sorted(m.secret.transitions)}
    if m.targets:
        out["targets"] = m.targets
    if m.architecture is not None:
        out["architecture"] = m.architecture
    return out


def serialize(m: NetModel) -> str:
    return json.dumps(model_to_dict(m), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------- validation


def validate_model(m: NetModel) -> list:
    diags = []
    if m.control_places & set(m.quantum_registers):
        diags.append(Diagnostic("id clash", "model", "place and register id spaces overlap"))
    for r in m.attacker_interface:
        if r not in m.quantum_registers:
            diags.append(Diagnostic("interface", r, "attacker register is not a quantum register"))
    for p in m.initial_marking - m.control_places:
        diags.append(Diagnostic("initial marking", p, "initial marking names an unknown place"))
    for t in m.transitions:
        if not t.branches:
            diags.append(Diagnostic("no branches", t.id, "transition has no branches"))
        outcomes = [b.outcome for b in t.branches]
        if len(set(outcomes)) != len(outcomes):
            diags.append(Diagnostic("duplicate outcome", t.id, "branch outcome ids must be distinct"))
        for p in t.places - m.control_places:
            diags.append(Diagnostic("unknown place", t.id, f"arc endpoint {p!r} is not a place"))
        for b in t.branches:
            if b.label != TAU and b.label not in m.observable_alphabet:
                diags.append(Diagnostic("label", f"{t.id}/{b.outcome}", f"label {b.label!r} not in alphabet"))
            for step in b.program:
                if "replace_all" in step and set(t.access) != set(m.quantum_registers):
                    diags.append(
                        Diagnostic("access violation", f"{t.id}/{b.outcome}", "replace_all needs global access")
                    )
                for r in _step_regs(step):
                    if r not in t.access:
                        diags.append(
                            Diagnostic("access violation", f"{t.id}/{b.outcome}", f"step touches {r!r} outside Acc")
                        )
        if t.masking:
            if any(b.label != TAU for b in t.branches):
                diags.append(Diagnostic("masking must be invisible", t.id, "masking branch carries a visible label"))
            if t.controllable:
                diags.append(Diagnostic("masking", t.id, "masking transitions are not controllable transitions"))
    if m.secret.mode == "event-predicate":
        ids = {t.id for t in m.transitions}
        for tid in m.secret.transitions - ids:
            diags.append(Diagnostic("secret", tid, "secret predicate names an unknown transition"))
    if not any(d.severity == "error" for d in diags):
        diags.extend(check_channels(m))
    return diags


def _adjoint_identity(model: NetModel, t: Transition) -> np.ndarray:
    """Sum over branches of the Heisenberg-picture image of the identity."""
    from . import dense

    n = model.n
    dim = 2**n
    total = np.zeros((dim, dim), dtype=complex)
    for b in t.branches:
        y = np.eye(dim, dtype=complex)
        for kind, payload in reversed(dense.compile_steps(tuple(b.compiled), n)):
            if kind == "kraus":
                y = sum(K.conj().T @ y @ K for K in payload)
            else:
                y = np.trace(payload @ y) * np.eye(dim, dtype=complex)
        total += y
    return total


def check_channels(m: NetModel) -> list:
    """Each transition's branches must sum to a trace-preserving map (dense check)."""
    if m.n > ORACLE_MAX_REGISTERS:
        return [
            Diagnostic(
                "not oracle-checked",
                "model",
                f"channel completeness not checked for {m.n} > {ORACLE_MAX_REGISTERS} registers",
                "note",
            )
        ]
    out = []
    eye = np.eye(2**m.n)
    for t in m.transitions:
        if not t.branches:
            continue
        if not np.allclose(_adjoint_identity(m, t), eye, atol=1e-9):
            out.append(Diagnostic("incomplete instrument", t.id, "branches do not sum to a channel"))
    return out
