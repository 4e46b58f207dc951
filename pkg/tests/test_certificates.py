import random
from fractions import Fraction

import pytest

from opaqnet import certificates as C
from opaqnet import enforcement, randomized, verifier
from opaqnet.stabilizer import PauliCoefficients, init_tableau, reduce_to
from opaqnet.stabilizer.tableau import apply_step
from opaqnet.unfolding import TargetFamily

F = Fraction


def agg(iface, coeffs, b=0):
    om = PauliCoefficients(tuple(iface), {k: F(v) for k, v in coeffs.items()})
    return verifier.PosteriorAggregate("o", b"o", b, om, om.trace(), not om.is_zero(), None)


def test_normal_form_classes():
    c = C.emit_certificate(agg("q", {"I": F(1, 2), "Z": F(1, 2)}))
    assert c.cls == C.PURE and c.generators == ("+Z",) and c.weight == 1
    c = C.emit_certificate(agg("q", {"I": F(1, 2)}))
    assert c.cls == C.MIXED and c.weight == 1
    c = C.emit_certificate(agg("q", {}))
    assert c.cls == C.MIXED and c.weight == 0
    c = C.emit_certificate(agg("q", {"I": F(1, 2), "Z": F(1, 4), "X": F(1, 4)}))
    assert c.cls == C.GENERAL and c.coefficients["X"] == F(1, 4)


def test_bell_pair_generators():
    a = agg("ab", {"II": F(1, 8), "XX": F(1, 8), "ZZ": F(1, 8), "YY": F(-1, 8)}, b=1)
    c = C.emit_certificate(a)
    assert c.cls == C.PURE and c.weight == F(1, 2)
    assert C.group_expansion(c.generators, 2) == a.omega.normalized().coeffs
    assert C.check_certificate(c, a)


def test_group_expansion_errors():
    with pytest.raises(C.CertificateError):
        C.group_expansion(["+X", "+Z"], 1)
    with pytest.raises(C.CertificateError):
        C.group_expansion(["+Z", "-Z"], 1)


def _random_aggregate(rng, k):
    n = k + rng.randint(0, 2)
    g = init_tableau(randomized.random_prep(rng, n, gates=3), n)
    for st in randomized.random_program(rng, n, rng.randint(0, 6)):
        g = apply_step(g, st)
    iface = tuple(f"r{i}" for i in range(k))
    om = reduce_to(g, range(k), iface)
    if rng.random() < 0.3:
        om = om + om.depolarize(iface[:1], F(1, 3))
    return verifier.PosteriorAggregate("o", b"o", 0, om, om.trace(), not om.is_zero(), None)


def test_round_trip_random():
    rng = random.Random(5)
    classes = set()
    for _ in range(150):
        a = _random_aggregate(rng, rng.randint(1, 3))
        c = C.emit_certificate(a)
        classes.add(c.cls)
        assert C.check_certificate(c, a)
        assert C.denotation(c).coeffs == a.omega.coeffs
        again = C.PosteriorCertificate.from_json(c.to_json())
        assert C.check_certificate(again, a)
    assert classes == {C.PURE, C.MIXED, C.GENERAL}


def test_tampering_detected():
    a = agg("q", {"I": F(1, 4), "Z": F(1, 4)})
    c = C.emit_certificate(a)
    bad = agg("q", {"I": F(1, 4), "Z": F(1, 5)})
    assert not C.check_certificate(c, bad)
    doubled = C.PosteriorCertificate(c.interface, c.weight * 2, c.cls, c.generators, raw={})
    assert not C.check_certificate(doubled, a)
    forged = C.PosteriorCertificate(c.interface, c.weight, c.cls, ("-Z",), raw={})
    assert not C.check_certificate(forged, a)
    with pytest.raises(C.CertificateError):
        C.check_certificate(c, agg("p", {"I": F(1, 4), "Z": F(1, 4)}))


def test_zero_leakage_ratio():
    c0 = C.emit_certificate(agg("q", {"I": F(1, 4), "X": F(1, 4)}))
    c1 = C.emit_certificate(agg("q", {"I": F(1, 2), "X": F(1, 2)}, b=1))
    assert C.check_zero_leakage(c1, c0) == 2
    c2 = C.emit_certificate(agg("q", {"I": F(1, 2), "X": F(-1, 2)}, b=1))
    assert C.check_zero_leakage(c2, c0) is None
    with pytest.raises(C.CertificateError):
        C.check_zero_leakage(C.emit_certificate(agg("q", {})), c0)


def _fg(repeater):
    fam = TargetFamily.from_spec(["O_fg"], repeater)
    return verifier.pair_aggregates(verifier.aggregate(verifier.explore(repeater, fam)))[0]


def test_repeater_certificates(repeater):
    a0, a1 = _fg(repeater)
    c0, c1 = C.emit_certificate(a0), C.emit_certificate(a1)
    assert c0.cls == C.PURE and c1.cls == C.MIXED
    assert C.check_certificate(c0, a0) and C.check_certificate(c1, a1)
    assert C.check_zero_leakage(c1, c0) is None


def test_twirled_repeater_is_certified_zero(repeater):
    a0, a1 = (enforcement.masking_effect(a, ("qM",), 0, channel="twirl") for a in _fg(repeater))
    c0, c1 = C.emit_certificate(a0), C.emit_certificate(a1)
    assert C.check_zero_leakage(c1, c0) == F(a1.p) / F(a0.p)
