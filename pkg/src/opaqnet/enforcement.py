"""Supervisory disabling, invisible masking, and counterexample-guided policy synthesis.

Masking is applied analytically to interface operators at the evaluation cut, so an
arbitrary rational strength stays exact.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np

from .model import NetModel
from .pomset import Pomset
from .stabilizer.pauli import PauliCoefficients, label_matrix
from .unfolding import TargetFamily, Unfolding
from .verifier import (
    EPS_TOL,
    OpacityReport,
    PosteriorAggregate,
    Surd,
    aggregate,
    explore,
    is_maximal,
    verdicts_from,
)

ALL = "all"
DEFAULT_PARTIAL_CAP = 2
ROUND_DEN = 10**9


class PolicyError(ValueError):
    pass


class SynthesisError(RuntimeError):
    pass


# ---------------------------------------------------------------- policy


@dataclass(frozen=True)
class Masking:
    scope: object  # ALL or observation canonical key (bytes)
    mask: str
    registers: tuple
    p: Fraction
    channel: str = "depolarize"
    scope_name: str = ALL


@dataclass(frozen=True)
class Disable:
    scope: object  # ALL or configuration structure key (bytes)
    transitions: frozenset
    scope_name: str = ALL


@dataclass(frozen=True)
class EnforcementPolicy:
    delta: tuple = ()
    mu: tuple = ()

    def disabled_all(self) -> frozenset:
        out = frozenset()
        for d in self.delta:
            if d.scope == ALL:
                out |= d.transitions
        return out

    def union(self, other: "EnforcementPolicy") -> "EnforcementPolicy":
        mu = list(self.mu)
        for m in other.mu:
            for i, old in enumerate(mu):
                if (old.scope, old.mask) == (m.scope, m.mask):
                    # sequential depolarisations compose multiplicatively
                    p = 1 - (1 - old.p) * (1 - m.p)
                    mu[i] = Masking(old.scope, old.mask, old.registers, p, old.channel, old.scope_name)
                    break
            else:
                mu.append(m)
        delta = {}
        for d in self.delta + other.delta:
            key = (d.scope, d.scope_name)
            delta[key] = delta.get(key, frozenset()) | d.transitions
        return EnforcementPolicy(
            tuple(Disable(s, ts, nm) for (s, nm), ts in sorted(delta.items(), key=lambda kv: kv[0][1])),
            tuple(mu),
        )

    def to_json(self) -> dict:
        return {
            "delta": [{"scope": d.scope_name, "transitions": sorted(d.transitions)} for d in self.delta],
            "mu": [
                {
                    "scope": m.scope_name,
                    "mask": m.mask,
                    "registers": list(m.registers),
                    "channel": m.channel,
                    "p": f"{m.p.numerator}/{m.p.denominator}",
                    "p_float": float(m.p),
                }
                for m in self.mu
            ],
        }

    def describe(self) -> str:
        parts = [f"disable {sorted(d.transitions)} @ {d.scope_name}" for d in self.delta]
        parts += [f"{m.channel}({m.p}) on {list(m.registers)} @ {m.scope_name}" for m in self.mu]
        return "; ".join(parts) or "(empty)"


def _obs_scope_key(scope, model: NetModel | None):
    if scope == ALL:
        return ALL
    if model is not None and scope in model.targets:
        return Pomset.from_json(model.targets[scope]).key
    p = Pomset.from_json(scope)
    if model is not None and not set(p.labels) <= model.observable_alphabet:
        raise PolicyError(f"masking scope {scope!r} is neither {ALL!r}, a target name, nor an observation")
    return p.key


def policy_from_json(d: dict, model: NetModel) -> EnforcementPolicy:
    catalog = {e["id"]: e for e in (model.architecture or {}).get("masking_catalog", [])}
    delta = []
    for item in d.get("delta", []):
        scope = item.get("scope", ALL)
        if scope == ALL:
            key = ALL
        else:
            # explicit configuration scopes are lists of branch-transition names in causal order
            key = ("names", tuple(sorted(scope)))
        delta.append(Disable(key, frozenset(item["transitions"]), ALL if scope == ALL else json.dumps(scope)))
    mu = []
    for item in d.get("mu", []):
        entry = catalog.get(item["mask"], {})
        regs = tuple(item.get("registers", entry.get("registers", model.attacker_interface)))
        scope = item.get("scope", ALL)
        mu.append(
            Masking(
                _obs_scope_key(scope, model),
                item["mask"],
                regs,
                Fraction(str(item["p"])),
                item.get("channel", entry.get("channel", "depolarize")),
                scope,
            )
        )
    pol = EnforcementPolicy(tuple(delta), tuple(mu))
    check_policy(pol, model)
    return pol


def check_policy(pol: EnforcementPolicy, model: NetModel) -> None:
    ctrl = model.controllable
    for d in pol.delta:
        bad = d.transitions - ctrl
        if bad:
            raise PolicyError(f"policy disables uncontrollable transitions {sorted(bad)}")
    for m in pol.mu:
        if not set(m.registers) <= set(model.attacker_interface):
            raise PolicyError(f"masking {m.mask} acts outside the attacker interface")
        if not 0 <= m.p <= 1:
            raise PolicyError("masking strength must lie in [0, 1]")


# ---------------------------------------------------------------- masking algebra


def depolarize_operator(op, iface, registers, p):
    """Depolarize ``registers`` of an interface operator (exact or dense)."""
    if isinstance(op, PauliCoefficients):
        return op.depolarize(registers, p)
    # dense: project onto the Pauli basis, damp, rebuild
    k = len(iface)
    pos = [list(iface).index(r) for r in registers]
    out = np.zeros_like(op)
    for letters in product("IXYZ", repeat=k):
        label = "".join(letters)
        P = label_matrix(label)
        c = np.trace(P @ op) / 2**k
        if any(label[i] != "I" for i in pos):
            c = c * (1 - float(p))
        out = out + c * P
    return out


def masking_effect(agg: PosteriorAggregate, registers, p, channel: str = "depolarize", iface=None) -> PosteriorAggregate:
    iface = tuple(iface if iface is not None else agg.omega.iface)
    if not set(registers) <= set(iface):
        raise PolicyError("masking register outside the attacker interface violates localizability")
    if channel == "twirl":
        p = Fraction(1)
    p = Fraction(p) if not isinstance(p, float) else p
    if not 0 <= p <= 1:
        raise PolicyError("masking strength must lie in [0, 1]")
    omega = depolarize_operator(agg.omega, iface, registers, p)
    members = [depolarize_operator(m, iface, registers, p) for m in agg.members]
    return PosteriorAggregate(agg.observation, agg.obs_key, agg.b, omega, agg.p, agg.S, agg.witness, members, agg.member_keys)


def required_masking_strength(D, eps):
    """``max(0, 1 - eps/D)``; exact when ``D`` and ``eps`` are rational."""
    if isinstance(D, Surd) and D.radicand == 1:
        D = D.coef
    if isinstance(D, Fraction) and not isinstance(eps, float):
        eps = Fraction(eps)
        if D == 0:
            return Fraction(0)
        return max(Fraction(0), 1 - eps / D)
    D = float(D)
    if D <= 0:
        return 0.0
    return max(0.0, 1 - float(eps) / D)


def rational_upper(x) -> Fraction:
    """A rational not below ``x`` (exact inputs pass through)."""
    if isinstance(x, Fraction):
        return x
    return Fraction(math.ceil(x * ROUND_DEN), ROUND_DEN)


# ---------------------------------------------------------------- hitting sets


def minimal_hitting_sets(families) -> list:
    fams = [frozenset(f) for f in families]
    if any(not f for f in fams):
        raise SynthesisError("uncontrollably reachable secret: a configuration has no controllable transition")
    universe = sorted(set().union(*fams)) if fams else []
    found = []
    for size in range(0, len(universe) + 1):
        for combo in combinations(universe, size):
            s = frozenset(combo)
            if any(f <= s for f in found):
                continue
            if all(s & f for f in fams):
                found.append(s)
    return sorted(found, key=lambda s: (len(s), sorted(s)))


# ---------------------------------------------------------------- closed loop


class ClosedLoop:
    """Base model restricted by a policy: disabled events are never generated, masks act at the cut."""

    def __init__(self, model: NetModel, policy: EnforcementPolicy):
        check_policy(policy, model)
        self.model = model
        self.policy = policy
        self._all = policy.disabled_all()
        self._scoped = [d for d in policy.delta if d.scope != ALL]
        self.unfolding = None

    def allow(self, c, t) -> bool:
        if t.id in self._all:
            return False
        if self._scoped:
            names = tuple(sorted(self.unfolding.events[i].name() for i in c.events))
            for d in self._scoped:
                if d.scope[1] == names and t.id in d.transitions:
                    return False
        return True

    def transform(self, obs_key, op):
        iface = self.model.attacker_interface
        for m in self.policy.mu:
            if m.scope == ALL or m.scope == obs_key:
                op = depolarize_operator(op, iface, m.registers, m.p)
        return op

    def explore(self, fam: TargetFamily, cut: bool = True):
        self.unfolding = Unfolding(self.model)
        return explore(self.model, fam, allow=self.allow, cut=cut, unfolding=self.unfolding)

    def analyze(self, fam: TargetFamily, eps=0, cut: bool = True):
        res = self.explore(fam, cut)
        aggs = aggregate(res, self.transform if self.policy.mu else None)
        rep = OpacityReport(float(eps), verdicts_from(aggs), res.visited, len(res.reachable))
        return rep, res


def closed_loop(model: NetModel, pol: EnforcementPolicy) -> ClosedLoop:
    return ClosedLoop(model, pol)


# ---------------------------------------------------------------- architecture


@dataclass(frozen=True)
class MaskEntry:
    id: str
    registers: tuple
    channel: str = "depolarize"


@dataclass(frozen=True)
class AdmissibilitySpec:
    required: tuple = ()  # target names or pomset descriptions that must stay reachable
    forbid_deadlock: bool = False
    completion_place: str | None = None


@dataclass(frozen=True)
class CostModel:
    disable: dict = field(default_factory=dict)
    mask: dict = field(default_factory=dict)
    default_disable: Fraction = Fraction(1)
    default_mask: Fraction = Fraction(1)

    def disable_price(self, tid) -> Fraction:
        return Fraction(self.disable.get(tid, self.default_disable))

    def mask_price(self, mid) -> Fraction:
        return Fraction(self.mask.get(mid, self.default_mask))


@dataclass
class ControlledArchitecture:
    model: NetModel
    catalog: tuple = ()
    admissibility: AdmissibilitySpec = AdmissibilitySpec()
    cost: CostModel = CostModel()

    def __post_init__(self):
        for e in self.catalog:
            if not set(e.registers) <= set(self.model.attacker_interface):
                raise PolicyError(f"masking {e.id} is not localizable to the attacker interface")
            if e.channel not in ("depolarize", "twirl"):
                raise PolicyError(f"unsupported masking channel {e.channel!r}")

    @classmethod
    def from_model(cls, model: NetModel, catalog=None) -> "ControlledArchitecture":
        arch = model.architecture or {}
        entries = arch.get("masking_catalog", []) if catalog is None else catalog
        cat = tuple(MaskEntry(e["id"], tuple(e["registers"]), e.get("channel", "depolarize")) for e in entries)
        adm = arch.get("admissibility", {})
        spec = AdmissibilitySpec(
            tuple(adm.get("required", [])), bool(adm.get("forbid_deadlock", False)), adm.get("completion_place")
        )
        cost = arch.get("cost", {})

        def prices(v):
            return ({}, Fraction(str(v))) if not isinstance(v, dict) else (
                {k: Fraction(str(x)) for k, x in v.items() if k != "default"},
                Fraction(str(v.get("default", 1))),
            )

        dmap, ddef = prices(cost.get("disable", 1))
        mmap, mdef = prices(cost.get("mask", 1))
        return cls(model, cat, spec, CostModel(dmap, mmap, ddef, mdef))


def policy_cost(pol: EnforcementPolicy, cost: CostModel) -> Fraction:
    total = Fraction(0)
    for d in pol.delta:
        for t in d.transitions:
            total += cost.disable_price(t)
    for m in pol.mu:
        total += cost.mask_price(m.mask) * m.p
    return total


def admissible(arch: ControlledArchitecture, pol: EnforcementPolicy, fam: TargetFamily) -> bool:
    spec = arch.admissibility
    loop = ClosedLoop(arch.model, pol)
    if spec.required:
        req = TargetFamily.from_spec(list(spec.required), arch.model)
        rep, _ = loop.analyze(req)
        if not all(v.a0.S or v.a1.S for v in rep.verdicts):
            return False
    if spec.forbid_deadlock:
        if spec.completion_place is None:
            raise PolicyError("deadlock check needs a completion place")
        names = list(fam.names) + [r for r in spec.required if r not in fam.names]
        check = TargetFamily.from_spec(names, arch.model) if spec.required else fam
        res = loop.explore(check)
        u = res.unfolding
        for c in res.reachable:
            if u.obs_key(c) in check.keys and is_maximal(res, c) and spec.completion_place not in c.marking:
                return False
    return True


# ---------------------------------------------------------------- synthesis


@dataclass
class SynthesisResult:
    success: bool
    policy: EnforcementPolicy | None
    log: list
    reason: str = ""
    report: OpacityReport | None = None

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "reason": self.reason,
            "policy": self.policy.to_json() if self.policy is not None else None,
            "iterations": self.log,
            "final_report": self.report.to_json() if self.report is not None else None,
        }


def _tc(res, member_keys, model) -> list:
    u = res.unfolding
    ctrl = model.controllable
    return [frozenset(u.events[i].tid for i in key if u.events[i].tid in ctrl) for key in member_keys]


def _candidate_sort_key(pol, cost):
    disabled = sorted(t for d in pol.delta for t in d.transitions)
    masks = sorted(m.mask for m in pol.mu)
    return (policy_cost(pol, cost), len(disabled), disabled, masks)


def synthesize(
    arch: ControlledArchitecture,
    fam: TargetFamily,
    eps,
    K: int,
    partial_cap: int = DEFAULT_PARTIAL_CAP,
    jobs: int = 1,
) -> SynthesisResult:
    """Counterexample-guided loop: verify, pick a violating observation, repair, filter, apply cheapest."""
    if K < 0:
        raise ValueError("iteration bound must be nonnegative")
    model = arch.model
    eps_q = Fraction(str(eps)) if not isinstance(eps, Fraction) else eps
    policy = EnforcementPolicy()
    log = []
    rep = None
    for k in range(K):
        loop = ClosedLoop(model, policy)
        rep, res = loop.analyze(fam, float(eps_q))
        entry = {"iteration": k, "policy": policy.to_json(), "max_leakage": rep.max_leakage}
        if rep.max_leakage <= float(eps_q) + EPS_TOL:
            entry["result"] = "feasible"
            log.append(entry)
            return SynthesisResult(True, policy, log, "", rep)
        violating = [v for v in rep.verdicts if v.leak.value > float(eps_q) + EPS_TOL]
        star = min(violating, key=lambda v: (-v.leak.value, v.a0.obs_key))
        entry["violating"] = {"obs": star.name, "leakage": star.leak.value, "p0": str(star.a0.p), "p1": str(star.a1.p)}
        cands = []
        if star.a0.p == 0:
            entry["kind"] = "structural"
            try:
                hs = minimal_hitting_sets(_tc(res, star.a1.member_keys, model))
            except SynthesisError as exc:
                entry["result"] = str(exc)
                log.append(entry)
                return SynthesisResult(False, None, log, str(exc), rep)
            cands = [EnforcementPolicy((Disable(ALL, h),), ()) for h in hs if h]
        else:
            entry["kind"] = "quantitative"
            for m in arch.catalog:
                if m.channel == "twirl":
                    p = Fraction(1)
                elif set(m.registers) == set(model.attacker_interface):
                    need = required_masking_strength(star.leak.exact or star.leak.value, eps_q)
                    p = rational_upper(need)
                else:
                    p = rational_upper(required_masking_strength(star.leak.value, float(eps_q)))
                if p > 0:
                    cands.append(EnforcementPolicy((), (Masking(star.a0.obs_key, m.id, m.registers, p, m.channel, star.name),)))
            tc = sorted(set().union(*_tc(res, star.a1.member_keys, model))) if star.a1.member_keys else []
            for size in range(1, min(partial_cap, len(tc)) + 1):
                for combo in combinations(tc, size):
                    cands.append(EnforcementPolicy((Disable(ALL, frozenset(combo)),), ()))
        merged = [policy.union(c) for c in cands]
        if jobs > 1 and len(merged) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                flags = list(pool.map(lambda p: admissible(arch, p, fam), merged))
        else:
            flags = [admissible(arch, p, fam) for p in merged]
        entry["candidates"] = [
            {"update": c.describe(), "cost": str(policy_cost(p, arch.cost)), "admissible": ok}
            for c, p, ok in zip(cands, merged, flags)
        ]
        adm = [(p, c) for p, c, ok in zip(merged, cands, flags) if ok]
        if not adm:
            entry["result"] = "no admissible candidate"
            log.append(entry)
            return SynthesisResult(False, None, log, "no admissible candidate", rep)
        best, chosen = min(adm, key=lambda pc: _candidate_sort_key(pc[0], arch.cost))
        entry["chosen"] = chosen.describe()
        entry["cost"] = str(policy_cost(best, arch.cost))
        log.append(entry)
        policy = best
    return SynthesisResult(False, None, log, f"iteration bound {K} exhausted", rep)
