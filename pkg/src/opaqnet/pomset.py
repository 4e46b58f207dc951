"""Labelled partial orders and their canonical byte forms.

Canonical labelling: colour refinement seeded with (label, down-set size, up-set
size), then individualisation/refinement with twin pruning.  The certificate of
a pomset is the lexicographically least encoding over all discrete leaves.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache


@dataclass(frozen=True)
class Pomset:
    labels: tuple
    order: frozenset  # strict, transitively closed set of (i, j) with i < j in the order

    @classmethod
    def build(cls, labels, pairs=()) -> "Pomset":
        labels = tuple(labels)
        n = len(labels)
        succ = [set() for _ in range(n)]
        for a, b in pairs:
            succ[a].add(b)
        closed = set()
        for s in range(n):
            stack, seen = list(succ[s]), set()
            while stack:
                v = stack.pop()
                if v in seen:
                    continue
                seen.add(v)
                stack.extend(succ[v])
            if s in seen:
                raise ValueError("order relation has a cycle")
            closed |= {(s, v) for v in seen}
        return cls(labels, frozenset(closed))

    @classmethod
    def chain(cls, labels) -> "Pomset":
        labels = tuple(labels)
        return cls.build(labels, [(i, i + 1) for i in range(len(labels) - 1)])

    @classmethod
    def from_json(cls, obj) -> "Pomset":
        """A list of labels is a chain; otherwise ``{"nodes": [{id, label}], "order": [[a, b]]}``."""
        if isinstance(obj, str):
            return cls.chain([s.strip() for s in obj.replace("<", ",").split(",") if s.strip()])
        if isinstance(obj, list):
            return cls.chain(obj)
        ids = [n["id"] for n in obj["nodes"]]
        pos = {v: i for i, v in enumerate(ids)}
        return cls.build([n["label"] for n in obj["nodes"]], [(pos[a], pos[b]) for a, b in obj.get("order", [])])

    def to_json(self) -> dict:
        cover = self.covering()
        return {
            "nodes": [{"id": f"n{i}", "label": lab} for i, lab in enumerate(self.labels)],
            "order": [[f"n{a}", f"n{b}"] for a, b in sorted(cover)],
        }

    @property
    def size(self) -> int:
        return len(self.labels)

    def covering(self) -> set:
        return {
            (a, b)
            for a, b in self.order
            if not any((a, c) in self.order and (c, b) in self.order for c in range(self.size))
        }

    def parallel(self, other: "Pomset") -> "Pomset":
        k = self.size
        return Pomset(self.labels + other.labels, self.order | {(a + k, b + k) for a, b in other.order})

    def restrict(self, nodes) -> "Pomset":
        nodes = sorted(nodes)
        pos = {v: i for i, v in enumerate(nodes)}
        return Pomset(
            tuple(self.labels[v] for v in nodes),
            frozenset((pos[a], pos[b]) for a, b in self.order if a in pos and b in pos),
        )

    def ideals(self):
        """All downward-closed node subsets (as frozensets)."""
        preds = [frozenset(a for a, b in self.order if b == v) for v in range(self.size)]
        out = {frozenset()}
        frontier = [frozenset()]
        while frontier:
            nxt = []
            for ideal in frontier:
                for v in range(self.size):
                    if v not in ideal and preds[v] <= ideal:
                        grown = ideal | {v}
                        if grown not in out:
                            out.add(grown)
                            nxt.append(grown)
            frontier = nxt
        return out

    def linear_extensions(self):
        preds = [frozenset(a for a, b in self.order if b == v) for v in range(self.size)]

        def rec(done, seq):
            if len(seq) == self.size:
                yield tuple(seq)
                return
            for v in range(self.size):
                if v not in done and preds[v] <= done:
                    seq.append(v)
                    yield from rec(done | {v}, seq)
                    seq.pop()

        yield from rec(frozenset(), [])

    @cached_property
    def key(self) -> bytes:
        return canonical_form(self.labels, self.order)

    def describe(self) -> str:
        if not self.labels:
            return "(empty)"
        cover = self.covering()
        if len(cover) == self.size - 1 and all(
            sum(1 for a, _ in cover if a == v) <= 1 and sum(1 for _, b in cover if b == v) <= 1
            for v in range(self.size)
        ):
            start = next(v for v in range(self.size) if not any(b == v for _, b in cover))
            seq = [start]
            nxt = {a: b for a, b in cover}
            while seq[-1] in nxt:
                seq.append(nxt[seq[-1]])
            return " < ".join(self.labels[v] for v in seq)
        parts = [f"{self.labels[a]}#{a} < {self.labels[b]}#{b}" for a, b in sorted(cover)]
        lone = [f"{lab}#{v}" for v, lab in enumerate(self.labels) if not any(v in e for e in cover)]
        return "; ".join(parts + lone)


def _rank(signatures: list) -> list:
    order = sorted(set(signatures))
    pos = {s: i for i, s in enumerate(order)}
    return [pos[s] for s in signatures]


def _refine(colours, preds, succs):
    n = len(colours)
    while True:
        sigs = [
            (colours[v], tuple(sorted(colours[u] for u in preds[v])), tuple(sorted(colours[u] for u in succs[v])))
            for v in range(n)
        ]
        new = _rank(sigs)
        if len(set(new)) == len(set(colours)):
            return new
        colours = new


def _encode(labels, order, perm) -> bytes:
    # perm[k] = node placed at position k
    n = len(perm)
    pos = {v: k for k, v in enumerate(perm)}
    lab = "\x1f".join(labels[v] for v in perm)
    bits = ["0"] * (n * n)
    for a, b in order:
        bits[pos[a] * n + pos[b]] = "1"
    return f"{n}\x1e{lab}\x1e{''.join(bits)}".encode()


def canonical_form(labels, order) -> bytes:
    return _canonical(tuple(labels), frozenset(order))


@lru_cache(maxsize=65536)
def _canonical(labels: tuple, order: frozenset) -> bytes:
    n = len(labels)
    if n == 0:
        return b"0\x1e\x1e"
    preds = [[a for a, b in order if b == v] for v in range(n)]
    succs = [[b for a, b in order if a == v] for v in range(n)]
    seed = [(labels[v], len(preds[v]), len(succs[v])) for v in range(n)]
    colours = _refine(_rank(seed), preds, succs)
    twin = [(labels[v], frozenset(preds[v]), frozenset(succs[v])) for v in range(n)]
    best = [None]

    def search(col):
        if len(set(col)) == n:
            perm = sorted(range(n), key=lambda v: col[v])
            enc = _encode(labels, order, perm)
            if best[0] is None or enc < best[0]:
                best[0] = enc
            return
        sizes = {}
        for c in col:
            sizes[c] = sizes.get(c, 0) + 1
        target = min(c for c, k in sizes.items() if k > 1)
        cell = [v for v in range(n) if col[v] == target]
        tried = set()
        for v in cell:
            if twin[v] in tried:
                continue
            tried.add(twin[v])
            split = [(c, 0 if (c != target or u == v) else 1) for u, c in enumerate(col)]
            search(_refine(_rank(split), preds, succs))

    search(colours)
    return best[0]


def is_isomorphic(p: Pomset, q: Pomset) -> bool:
    return p.key == q.key

