"""Branch-expanded unfolding of the control net.

Events are interned by structure: a branch transition together with, for every
preset place, the event that produced the consumed token (``-1`` for the initial
marking).  Conditions are never materialised; causality and conflict follow from
this token provenance.  Because events are interned, the event-id set of a
configuration is already a canonical key.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .model import TAU, ModelError, NetModel, Transition, enabled, fire, structurally_independent
from .pomset import Pomset, canonical_form

INITIAL = -1
DEFAULT_TAU_BOUND = 10_000
DEFAULT_LINEARIZATION_BOUND = 12


class DivergenceError(RuntimeError):
    pass


class RegisterRace(ModelError):
    pass


@dataclass(frozen=True)
class BranchTransition:
    transition: Transition
    branch: object  # model.Branch

    @property
    def id(self) -> tuple:
        return (self.transition.id, self.branch.outcome)

    @property
    def label(self) -> str:
        return self.branch.label

    @property
    def pre(self):
        return self.transition.pre

    @property
    def post(self):
        return self.transition.post


def branch_expand(m: NetModel) -> list:
    return [BranchTransition(t, b) for t in m.transitions for b in t.branches]


@dataclass(eq=False, slots=True)
class Event:
    # interned: one object per structural event, identity is the id
    id: int
    tid: str
    outcome: str
    label: str
    consumed: tuple  # ((place, producer), ...)
    causes: frozenset
    past: frozenset  # strict causal past
    bt: BranchTransition = field(compare=False, repr=False)
    observable: bool = field(default=True, compare=False)

    def name(self) -> str:
        return f"{self.tid}/{self.outcome}"


@dataclass(unsafe_hash=True, slots=True)
class Configuration:
    # treated as immutable; not frozen only because frozen construction is slow on the hot path
    events: frozenset
    tokens: tuple  # sorted ((place, producer), ...)
    obs: frozenset = field(default=frozenset(), compare=False)  # observable events
    marking: frozenset = field(default=None, compare=False)

    def __post_init__(self):
        if self.marking is None:
            self.marking = frozenset(p for p, _ in self.tokens)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def key(self) -> tuple:
        return tuple(sorted(self.events))


class TargetFamily:
    """Target observation pomsets with a prefix-closure index of canonical forms."""

    def __init__(self, pomsets, names=None):
        self.pomsets = list(pomsets)
        self.names = list(names) if names is not None else [p.describe() for p in self.pomsets]
        self.labels = frozenset(lab for p in self.pomsets for lab in p.labels)
        self._prefix = set()
        for p in self.pomsets:
            for ideal in p.ideals():
                self._prefix.add(p.restrict(ideal).key)
        self.keys = [p.key for p in self.pomsets]

    @classmethod
    def from_spec(cls, spec, model: NetModel | None = None) -> "TargetFamily":
        """``spec`` is a list of names (looked up in the model), chains, or node/order objects."""
        if isinstance(spec, dict) and "targets" in spec:
            spec = spec["targets"]
        pomsets, names = [], []
        for item in spec:
            if isinstance(item, str) and model is not None and item in model.targets:
                pomsets.append(Pomset.from_json(model.targets[item]))
                names.append(item)
            else:
                p = Pomset.from_json(item)
                pomsets.append(p)
                names.append(p.describe())
        return cls(pomsets, names)

    def __len__(self) -> int:
        return len(self.pomsets)

    def is_prefix_key(self, key: bytes) -> bool:
        return key in self._prefix

    def name_of(self, key: bytes) -> str | None:
        for k, nm in zip(self.keys, self.names):
            if k == key:
                return nm
        return None


def pomset_prefix(p: Pomset, fam: TargetFamily) -> bool:
    return fam.is_prefix_key(p.key)


def calibration_family(m: int, fg=("req", "swap_ok", "done"), cal="cal") -> TargetFamily:
    """Foreground chain in parallel with a chain of ``m`` calibration labels."""
    p = Pomset.chain(fg).parallel(Pomset.chain([cal] * m))
    return TargetFamily([p], [f"E_{m}"])


def _static_index(model: NetModel) -> tuple:
    """Branch list and place index of a model, cached on the (immutable) model object."""
    cached = model.__dict__.get("_unfolding_index")
    if cached is not None:
        return cached
    branches = sorted(branch_expand(model), key=lambda bt: bt.id)
    groups: dict = {}
    for bt in branches:
        groups.setdefault(bt.transition.id, []).append(bt)
    entries = [
        (k, g[0].transition, tuple(sorted(g[0].transition.pre)), g, any(bt.label == TAU for bt in g), frozenset(bt.label for bt in g))
        for k, g in enumerate(groups.values())
    ]
    # index each transition by the first place of its preset; empty presets are always candidates
    by_place: dict = {}
    free = []
    for entry in entries:
        if entry[2]:
            by_place.setdefault(entry[2][0], []).append(entry)
        else:
            free.append(entry)
    cached = (branches, by_place, free)
    object.__setattr__(model, "_unfolding_index", cached)
    return cached


class Unfolding:
    """Interning store for events plus the extension operator."""

    def __init__(self, model: NetModel, tau_bound: int = DEFAULT_TAU_BOUND, check_races: bool = True):
        self.model = model
        self.branches, self._by_place, self._free = _static_index(model)
        self._prefix_cache: dict = {}
        self._enabled_cache: dict = {}
        self.events: list[Event] = []
        self._intern: dict = {}
        self._obs_cache: dict = {}
        self._key_cache: dict = {}
        self.tau_bound = tau_bound
        self.check_races = check_races

    def initial(self) -> Configuration:
        return Configuration(frozenset(), tuple(sorted((p, INITIAL) for p in self.model.initial_marking)))

    def event(self, bt: BranchTransition, consumed: tuple) -> Event:
        key = (bt.transition.id, bt.branch.outcome, consumed)
        e = self._intern.get(key)
        if e is None:
            causes = frozenset(prod for _, prod in consumed if prod != INITIAL)
            past = set(causes)
            for c in causes:
                past |= self.events[c].past
            e = Event(len(self.events), bt.transition.id, bt.branch.outcome, bt.label, consumed, causes, frozenset(past), bt, bt.label != TAU)
            self.events.append(e)
            self._intern[key] = e
        return e

    def _group_events(self, tid: str, group: list, consumed: tuple) -> list:
        key = (tid, consumed)
        evs = self._intern.get(key)
        if evs is None:
            evs = self._intern[key] = [self.event(bt, consumed) for bt in group]
        return evs

    def extend(self, c: Configuration, e: Event) -> Configuration:
        pre = e.bt.pre
        tokens = [tp for tp in c.tokens if tp[0] not in pre]
        tokens.extend((p, e.id) for p in e.bt.post)
        tokens.sort()
        obs = c.obs | {e.id} if e.observable else c.obs
        marking = (c.marking - pre) | e.bt.post
        return Configuration(c.events | {e.id}, tuple(tokens), obs, marking)

    def candidate_events(self, c: Configuration, allow=None, labels=None) -> list:
        """Events enabled at ``c``; ``allow(c, transition)`` may veto.

        With ``labels``, transitions whose branches are all observable with labels
        outside that set are skipped before any event is interned.
        """
        marking = c.marking
        tokens = dict(c.tokens)
        out = []
        for t, pre, group, silent, glabels in self._enabled_at(marking):
            if labels is not None and not silent and labels.isdisjoint(glabels):
                continue
            if allow is not None and not allow(c, t):
                continue
            consumed = tuple((p, tokens[p]) for p in pre)
            out.extend(self._group_events(t.id, group, consumed))
        return out

    def _enabled_at(self, marking: frozenset) -> list:
        entries = self._enabled_cache.get(marking)
        if entries is None:
            found = list(self._free)
            for p in marking:
                found.extend(self._by_place.get(p, ()))
            found.sort(key=lambda en: en[0])
            entries = [en[1:] for en in found if enabled(marking, en[1])]
            self._enabled_cache[marking] = entries
        return entries

    def check_race(self, c: Configuration, e: Event) -> None:
        acc = e.bt.transition.access
        if not acc:
            return
        for f in c.events:
            if f in e.past:
                continue
            other = self.events[f].bt.transition
            if other.access & acc:
                raise RegisterRace(
                    f"concurrent events {self.events[f].name()} and {e.name()} share registers {sorted(other.access & acc)}"
                )

    def obs_events(self, c: Configuration) -> frozenset:
        return c.obs

    def obs_pomset(self, c: Configuration) -> Pomset:
        return self._pomset_of(c.obs)

    def _structure(self, obs: frozenset) -> tuple:
        ids = sorted(obs)
        pos = {v: k for k, v in enumerate(ids)}
        order = frozenset((pos[a], pos[b]) for b in ids for a in self.events[b].past if a in pos)
        return tuple(self.events[i].label for i in ids), order

    def _pomset_of(self, obs: frozenset) -> Pomset:
        p = self._obs_cache.get(obs)
        if p is None:
            p = self._obs_cache[obs] = Pomset(*self._structure(obs))
        return p

    def _key_of(self, obs: frozenset) -> bytes:
        k = self._key_cache.get(obs)
        if k is None:
            k = self._key_cache[obs] = canonical_form(*self._structure(obs))
        return k

    def obs_key(self, c: Configuration) -> bytes:
        return self._key_of(c.obs)

    def tau_run(self, c: Configuration) -> int:
        """Silent events not below any observable event of ``c``."""
        covered = set()
        taus = []
        for i in c.events:
            e = self.events[i]
            if e.observable:
                covered |= e.past
            else:
                taus.append(i)
        return sum(1 for i in taus if i not in covered)

    def extensions(self, c: Configuration, fam: TargetFamily, allow=None) -> list:
        out = []
        cache = self._prefix_cache.setdefault(fam, {})
        for e in self.candidate_events(c, allow, fam.labels):
            if e.observable:
                if e.label not in fam.labels:
                    continue
                obs = c.obs | {e.id}
                ok = cache.get(obs)
                if ok is None:
                    ok = cache[obs] = fam.is_prefix_key(self._key_of(obs))
                if not ok:
                    continue
            if self.check_races:
                self.check_race(c, e)
            out.append(e)
        return out

    def guard(self, c: Configuration) -> None:
        if len(c) > self.tau_bound and self.tau_run(c) > self.tau_bound:
            raise DivergenceError(f"more than {self.tau_bound} consecutive silent events; model may diverge")

    def causal_pairs(self, c: Configuration) -> set:
        return {(a, b) for b in c.events for a in self.events[b].past}

    def describe(self, c: Configuration) -> list:
        return [self.events[i].name() for i in topological(self, c)]


def topological(u: Unfolding, c: Configuration) -> list:
    return sorted(c.events, key=lambda i: (len(u.events[i].past), i))


def obs_pomset(u: Unfolding, c: Configuration) -> Pomset:
    return u.obs_pomset(c)


def extensions(u: Unfolding, c: Configuration, fam: TargetFamily, allow=None) -> list:
    return u.extensions(c, fam, allow)


def linearizations(u: Unfolding, c: Configuration, bound: int = DEFAULT_LINEARIZATION_BOUND) -> list:
    if len(c) > bound:
        raise ValueError(f"configuration of size {len(c)} exceeds linearization bound {bound}")
    ids = sorted(c.events)
    preds = {i: u.events[i].past & c.events for i in ids}
    out = []

    def rec(done, seq):
        if len(seq) == len(ids):
            out.append(tuple(seq))
            return
        for i in ids:
            if i not in done and preds[i] <= done:
                seq.append(i)
                rec(done | {i}, seq)
                seq.pop()

    rec(frozenset(), [])
    return out


def config_marking(u: Unfolding, c: Configuration, check: bool = False) -> frozenset:
    m = u.model
    lins = linearizations(u, c, bound=max(len(c), 1)) if check else [tuple(topological(u, c))]
    results = set()
    for seq in lins:
        mk = m.initial_marking
        for i in seq:
            mk = fire(mk, u.events[i].bt.transition)
        results.add(frozenset(mk))
    if len(results) != 1:
        raise AssertionError("marking depends on the linearization")
    mk = results.pop()
    assert mk == c.marking
    return mk


def check_independence(u: Unfolding, c: Configuration) -> list:
    """Pairs of concurrent events whose transitions are not structurally independent."""
    bad = []
    for a, b in combinations(sorted(c.events), 2):
        ea, eb = u.events[a], u.events[b]
        if a in eb.past or b in ea.past:
            continue
        ta, tb = ea.bt.transition, eb.bt.transition
        if ta.id == tb.id or not structurally_independent(ta, tb):
            bad.append((ea.name(), eb.name()))
    return bad
