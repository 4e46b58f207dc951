"""Targeted exploration, posterior aggregation, leakage and opacity verdicts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import NetModel
from .stabilizer.pauli import PauliCoefficients
from .stabilizer.tableau import apply_branch, init_tableau, reduce_to
from .unfolding import DEFAULT_TAU_BOUND, Configuration, TargetFamily, Unfolding

EPS_TOL = 1e-12
DEFAULT_MAX_CONFIGS = 200_000


class ExplorationLimit(RuntimeError):
    pass


class TableauBackend:
    """Exact stabilizer backend."""

    name = "tableau"

    def __init__(self, model: NetModel):
        self.n = model.n
        self.prep = model.initial_prep()

    def initial(self):
        return init_tableau(self.prep, self.n)

    def apply(self, state, branch):
        return apply_branch(state, branch)

    def weight(self, state):
        return state.weight

    def alive(self, state) -> bool:
        return state.weight > 0

    def reduce(self, state, iface, names=None):
        return reduce_to(state, iface, names)


@dataclass
class ExplorationResult:
    model: NetModel
    family: TargetFamily
    unfolding: Unfolding
    backend: object
    reachable: list  # configurations in BFS order (size, then key)
    cache: dict  # event set -> (configuration, state)
    visited: int = 0
    pruned: int = 0
    allow: object = None
    silent_extended: set = field(default_factory=set)  # event sets with a live silent extension

    def state(self, c: Configuration):
        return self.cache[c.events][1]


def make_allow(model: NetModel, cut: bool = True, extra=None):
    """Transition filter: masking transitions are applied analytically, cut transitions stop a round."""

    def allow(c, t):
        if t.masking:
            return False
        if cut and t.evaluation_cut:
            return False
        return extra is None or extra(c, t)

    return allow


def explore(
    model: NetModel,
    fam: TargetFamily,
    backend=None,
    allow=None,
    cut: bool = True,
    tau_bound: int = DEFAULT_TAU_BOUND,
    max_configs: int = DEFAULT_MAX_CONFIGS,
    check_races: bool = True,
    unfolding: Unfolding | None = None,
) -> ExplorationResult:
    """Breadth-first targeted exploration by configuration size, then canonical key."""
    backend = backend or TableauBackend(model)
    u = unfolding or Unfolding(model, tau_bound=tau_bound, check_races=check_races)
    flt = make_allow(model, cut, allow)
    c0 = u.initial()
    s0 = backend.initial()
    res = ExplorationResult(model, fam, u, backend, [], {}, 1, 0, flt)
    if not backend.alive(s0):
        res.pruned = 1
        return res
    res.cache[c0.events] = (c0, s0)
    res.reachable.append(c0)
    seen = {c0.events}
    frontier = [c0]
    while frontier:
        nxt = []
        for c in frontier:
            state = res.cache[c.events][1]
            for e in u.extensions(c, fam, flt):
                ev2 = c.events | {e.id}
                if ev2 in seen:
                    if not e.observable and ev2 in res.cache:
                        res.silent_extended.add(c.events)
                    continue
                seen.add(ev2)
                res.visited += 1
                if res.visited > max_configs:
                    raise ExplorationLimit(f"more than {max_configs} configurations visited")
                s2 = backend.apply(state, e.bt.branch)
                if not backend.alive(s2):
                    res.pruned += 1
                    continue
                c2 = u.extend(c, e)
                u.guard(c2)
                res.cache[ev2] = (c2, s2)
                if not e.observable:
                    res.silent_extended.add(c.events)
                nxt.append(c2)
        nxt.sort(key=lambda c: c.key)
        res.reachable.extend(nxt)
        frontier = nxt
    return res


def secret_bit(model: NetModel, u: Unfolding, c: Configuration) -> int:
    s = model.secret
    if s.mode == "event-predicate":
        return int(any(u.events[i].tid in s.transitions for i in c.events))
    return int(c.marking in s.marking_sets)


def is_maximal(res: ExplorationResult, c: Configuration) -> bool:
    """No silent extension of ``c`` is itself reachable (as recorded during exploration)."""
    return c.events not in res.silent_extended


def is_maximal_direct(res: ExplorationResult, c: Configuration) -> bool:
    """Recomputes maximality from the enabled events instead of the exploration record."""
    u = res.unfolding
    for e in u.candidate_events(c, res.allow):
        if e.observable:
            continue
        if u.extend(c, e).events in res.cache:
            return False
    return True


@dataclass
class PosteriorAggregate:
    observation: str
    obs_key: bytes
    b: int
    omega: object  # PauliCoefficients (exact) or ndarray (dense backend)
    p: object
    S: bool
    witness: list | None
    members: list = field(default_factory=list)  # per-configuration reduced operators
    member_keys: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return isinstance(self.omega, PauliCoefficients)


def _trace(x):
    if isinstance(x, PauliCoefficients):
        return x.trace()
    return float(np.trace(x).real)


def maximal_members(res: ExplorationResult, key: bytes, b: int) -> list:
    u = res.unfolding
    out = []
    for c in res.reachable:
        if u.obs_key(c) != key or secret_bit(res.model, u, c) != b:
            continue
        if is_maximal(res, c):
            out.append(c)
    return out


def aggregate(res: ExplorationResult, transform=None, per_member: bool = True) -> list:
    """Per target and secret bit: sum of interface reductions over maximal configurations.

    ``transform(obs_key, operator)`` post-processes each reduced operator (masking).
    With ``per_member=False`` (and no transform) the global states of a class are
    summed first and reduced once; ``members`` is then left empty.
    """
    model, fam, u = res.model, res.family, res.unfolding
    iface = model.interface_indices()
    names = tuple(model.attacker_interface)
    groups = {(k, b): [] for k in fam.keys for b in (0, 1)}
    for c in res.reachable:
        k = u.obs_key(c)
        if k not in fam.keys:
            continue
        b = secret_bit(model, u, c)
        if (k, b) in groups and is_maximal(res, c):
            groups[(k, b)].append(c)
    out = []
    for k, name in zip(fam.keys, fam.names):
        for b in (0, 1):
            members = groups[(k, b)]
            ops = []
            if not per_member and transform is None and members:
                total = res.state(members[0])
                for c in members[1:]:
                    total = total + res.state(c)
                omega = res.backend.reduce(total, iface, names)
                witness = u.describe(members[0])
                out.append(PosteriorAggregate(name, k, b, omega, _trace(omega), True, witness, [], [c.key for c in members]))
                continue
            for c in members:
                op = res.backend.reduce(res.state(c), iface, names)
                if transform is not None:
                    op = transform(k, op)
                ops.append(op)
            if ops:
                omega = ops[0]
                for op in ops[1:]:
                    omega = omega + op
            elif res.backend.name == "dense":
                omega = np.zeros((2 ** len(iface), 2 ** len(iface)), dtype=complex)
            else:
                omega = PauliCoefficients.zero(names)
            witness = u.describe(members[0]) if members else None
            out.append(
                PosteriorAggregate(
                    name, k, b, omega, _trace(omega), bool(members), witness, ops, [c.key for c in members]
                )
            )
    return out


def pair_aggregates(aggs) -> list:
    """``[(a0, a1), ...]`` in target order."""
    by = {}
    order = []
    for a in aggs:
        if a.obs_key not in by:
            by[a.obs_key] = [None, None]
            order.append(a.obs_key)
        by[a.obs_key][a.b] = a
    return [tuple(by[k]) for k in order]


# ---------------------------------------------------------------- distances


@dataclass(frozen=True)
class Surd:
    """Exact value ``coef * sqrt(radicand)`` with square-free ``radicand``."""

    coef: Fraction
    radicand: int = 1

    def __float__(self) -> float:
        return float(self.coef) * math.sqrt(self.radicand)

    def __str__(self) -> str:
        c = self.coef
        frac = f"{c.numerator}/{c.denominator}"
        if self.radicand == 1 or c == 0:
            return frac
        return f"{frac}*sqrt({self.radicand})"


def _squarefree(n: int):
    out, rad = 1, 1
    f = 2
    while f * f <= n:
        while n % (f * f) == 0:
            out *= f
            n //= f * f
        if n % f == 0:
            rad *= f
            n //= f
        f += 1
    return out, rad * n


def exact_sqrt(q: Fraction) -> Surd:
    if q < 0:
        raise ValueError("negative radicand")
    if q == 0:
        return Surd(Fraction(0))
    num = q.numerator * q.denominator
    a, b = _squarefree(num)
    return Surd(Fraction(a, q.denominator), b)


def trace_distance(x: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> float:
    for m in (x, y):
        if not np.allclose(m, m.conj().T, atol=tol):
            raise ValueError("non-Hermitian input")
        if abs(np.trace(m).real - 1) > tol:
            raise ValueError("input is not unit trace")
    ev = np.linalg.eigvalsh(x - y)
    return float(0.5 * np.abs(ev).sum())


def trace_distance_exact(x: PauliCoefficients, y: PauliCoefficients) -> Surd | None:
    """Single-register Bloch formula; ``None`` for wider interfaces."""
    if len(x.iface) != 1:
        return None
    q = sum(((x.coeffs.get(P, Fraction(0)) - y.coeffs.get(P, Fraction(0))) ** 2 for P in "XYZ"), Fraction(0))
    return exact_sqrt(q)


def distance(x, y):
    """(float, exact-or-None) trace distance of two normalized operators."""
    if isinstance(x, PauliCoefficients):
        ex = trace_distance_exact(x, y)
        if ex is not None:
            return float(ex), ex
        return trace_distance(x.to_dense(), y.to_dense()), None
    return trace_distance(x, y), None


def _normalize(op):
    if isinstance(op, PauliCoefficients):
        return op.normalized()
    return op / np.trace(op).real


@dataclass
class Leakage:
    value: float
    exact: Surd | None
    case: str


def leakage(a0: PosteriorAggregate, a1: PosteriorAggregate) -> Leakage:
    if a0.b != 0 or a1.b != 1 or a0.obs_key != a1.obs_key:
        raise ValueError("leakage needs the b=0 and b=1 aggregates of one observation")
    if _positive(a1.p) and _positive(a0.p):
        v, ex = distance(_normalize(a1.omega), _normalize(a0.omega))
        return Leakage(v, ex, "distance")
    if _positive(a1.p):
        return Leakage(1.0, Surd(Fraction(1)), "secret-only")
    return Leakage(0.0, Surd(Fraction(0)), "no-secret")


def _positive(p) -> bool:
    return p > 0 if isinstance(p, Fraction) else p > 1e-12


def robust_upper_bound(a0: PosteriorAggregate, a1: PosteriorAggregate) -> float:
    if not a0.members or not a1.members:
        raise ValueError("robust upper bound needs both sides nonempty")
    best = 0.0
    n0 = [_normalize(x) for x in a0.members if _positive(_trace(x))]
    n1 = [_normalize(x) for x in a1.members if _positive(_trace(x))]
    for s1 in n1:
        for s0 in n0:
            best = max(best, distance(s1, s0)[0])
    return best


# ---------------------------------------------------------------- report


@dataclass
class ObservationVerdict:
    name: str
    a0: PosteriorAggregate
    a1: PosteriorAggregate
    leak: Leakage
    upper: float | None

    def to_json(self) -> dict:
        def frac(p):
            return f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else p

        d = {
            "obs": self.name,
            "S0": int(self.a0.S),
            "S1": int(self.a1.S),
            "p0": frac(self.a0.p),
            "p1": frac(self.a1.p),
            "leakage": self.leak.value,
            "leakage_exact": str(self.leak.exact) if self.leak.exact is not None else None,
            "upper_bound": self.upper,
            "witness0": self.a0.witness,
            "witness1": self.a1.witness,
        }
        if self.a0.exact:
            d["interface"] = list(self.a0.omega.iface)
            d["omega0"] = self.a0.omega.as_strings()
            d["omega1"] = self.a1.omega.as_strings()
        return d


@dataclass
class OpacityReport:
    epsilon: float
    verdicts: list
    explored: int = 0
    reachable: int = 0

    @property
    def structural_opaque(self) -> bool:
        return all(v.a0.S or not v.a1.S for v in self.verdicts)

    @property
    def max_leakage(self) -> float:
        return max((v.leak.value for v in self.verdicts), default=0.0)

    @property
    def epsilon_opaque(self) -> bool:
        return self.max_leakage <= self.epsilon + EPS_TOL

    @property
    def worst(self) -> ObservationVerdict | None:
        if not self.verdicts:
            return None
        return max(self.verdicts, key=lambda v: (v.leak.value, -self.verdicts.index(v)))

    def verdict(self, name: str) -> ObservationVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_json(self) -> dict:
        w = self.worst
        return {
            "structural_opaque": self.structural_opaque,
            "epsilon": self.epsilon,
            "epsilon_opaque": self.epsilon_opaque,
            "max_leakage": self.max_leakage,
            "worst_observation": w.name if w else None,
            "explored_configurations": self.explored,
            "reachable_configurations": self.reachable,
            "per_observation": [v.to_json() for v in self.verdicts],
        }


def verdicts_from(aggs) -> list:
    out = []
    for a0, a1 in pair_aggregates(aggs):
        leak = leakage(a0, a1)
        upper = robust_upper_bound(a0, a1) if _positive(a0.p) and _positive(a1.p) else None
        out.append(ObservationVerdict(a0.observation, a0, a1, leak, upper))
    return out


def report(
    model: NetModel,
    fam: TargetFamily,
    epsilon: float,
    allow=None,
    transform=None,
    cut: bool = True,
    tau_bound: int = DEFAULT_TAU_BOUND,
    backend=None,
) -> OpacityReport:
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    res = explore(model, fam, backend=backend, allow=allow, cut=cut, tau_bound=tau_bound)
    aggs = aggregate(res, transform)
    return OpacityReport(epsilon, verdicts_from(aggs), res.visited, len(res.reachable))


def marking_secret_warnings(model: NetModel, res: ExplorationResult) -> list:
    """Marking-set secrets never met by any targeted configuration."""
    if model.secret.mode != "marking-set":
        return []
    seen = {c.marking for c in res.reachable}
    return [sorted(s) for s in model.secret.marking_sets if s not in seen]
