import random
from itertools import combinations, permutations, product

import pytest

from opaqnet.pomset import Pomset, canonical_form, is_isomorphic


def posets(n):
    """Every strict order on range(n) contained in the natural order (all posets up to isomorphism)."""
    pairs = list(combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        rel = {pairs[i] for i in range(len(pairs)) if mask >> i & 1}
        if all((a, d) in rel for a, b in rel for c, d in rel if b == c):
            yield frozenset(rel)


def brute_canonical(labels, order):
    n = len(labels)
    best = None
    for perm in permutations(range(n)):
        # perm[i] is the new name of node i
        inv = sorted(range(n), key=lambda i: perm[i])
        enc = (tuple(labels[i] for i in inv), tuple(sorted((perm[a], perm[b]) for a, b in order)))
        if best is None or enc < best:
            best = enc
    return best


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_canonical_form_matches_brute_force(n):
    by_brute, by_key = {}, {}
    for order in posets(n):
        for labels in product("ab", repeat=n):
            key = canonical_form(labels, order)
            brute = brute_canonical(labels, order)
            by_brute.setdefault(brute, set()).add(key)
            by_key.setdefault(key, set()).add(brute)
    assert all(len(v) == 1 for v in by_brute.values())
    assert all(len(v) == 1 for v in by_key.values())


def test_relabelling_invariance_on_larger_posets():
    rng = random.Random(9)
    for _ in range(200):
        n = rng.randint(4, 9)
        labels = [rng.choice("abc") for _ in range(n)]
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.25]
        p = Pomset.build(labels, pairs)
        perm = list(range(n))
        rng.shuffle(perm)
        q = Pomset.build([labels[perm.index(i)] for i in range(n)], [(perm[a], perm[b]) for a, b in pairs])
        assert p.key == q.key


def test_distinct_shapes_differ():
    chain = Pomset.chain(["a", "b"])
    anti = Pomset.build(["a", "b"])
    rev = Pomset.chain(["b", "a"])
    assert len({chain.key, anti.key, rev.key}) == 3
    assert not is_isomorphic(chain, rev)


def test_from_json_forms():
    assert Pomset.from_json("req<fail").key == Pomset.chain(["req", "fail"]).key
    assert Pomset.from_json(["x", "y"]).key == Pomset.chain(["x", "y"]).key
    p = Pomset.from_json({"nodes": [{"id": "u", "label": "a"}, {"id": "v", "label": "b"}], "order": [["v", "u"]]})
    assert p.key == Pomset.chain(["b", "a"]).key
    assert Pomset.from_json(p.to_json()).key == p.key


def test_cycle_rejected():
    with pytest.raises(ValueError):
        Pomset.build(["a", "b"], [(0, 1), (1, 0)])


def test_ideals_and_extensions():
    p = Pomset.chain(["a", "b", "c"]).parallel(Pomset.chain(["d"]))
    assert len(p.ideals()) == 4 * 2
    assert len(list(p.linear_extensions())) == 4


def test_describe():
    assert Pomset.chain(["req", "fail"]).describe() == "req < fail"
    assert Pomset.build([]).describe() == "(empty)"
