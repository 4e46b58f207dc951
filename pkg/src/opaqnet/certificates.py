"""Posterior certificates: canonical normal forms of interface aggregates.

A certificate is reconstructible from its own fields, so a checker needs only
exact rational arithmetic, not the exploration that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .stabilizer import kernels
from .stabilizer.pauli import LETTERS, PauliCoefficients

PURE = "pure-stabilizer"
MIXED = "maximally-mixed"
GENERAL = "general"


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class PosteriorCertificate:
    interface: tuple
    weight: Fraction
    cls: str
    generators: tuple = ()  # signed labels such as "+Z", "-XX"
    coefficients: dict = field(default_factory=dict)  # normalized, general class only
    raw: dict = field(default_factory=dict)  # unnormalized aggregate coefficients
    observation: str = ""
    secret_bit: int = 0

    def to_json(self) -> dict:
        d = {
            "observation": self.observation,
            "secret_bit": self.secret_bit,
            "interface": list(self.interface),
            "weight": f"{self.weight.numerator}/{self.weight.denominator}",
            "class": self.cls,
            "raw_coefficients": {k: _fs(v) for k, v in sorted(self.raw.items())},
        }
        if self.cls == PURE:
            d["generators"] = list(self.generators)
        elif self.cls == GENERAL:
            d["coefficients"] = {k: _fs(v) for k, v in sorted(self.coefficients.items())}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PosteriorCertificate":
        return cls(
            tuple(d["interface"]),
            Fraction(d["weight"]),
            d["class"],
            tuple(d.get("generators", ())),
            {k: Fraction(v) for k, v in d.get("coefficients", {}).items()},
            {k: Fraction(v) for k, v in d.get("raw_coefficients", {}).items()},
            d.get("observation", ""),
            int(d.get("secret_bit", 0)),
        )


def _fs(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def _bits(label: str):
    x = z = 0
    for i, ch in enumerate(label):
        k = LETTERS.index(ch)
        x |= (k & 1) << i
        z |= (k >> 1) << i
    return x, z


def _label(x: int, z: int, k: int) -> str:
    return "".join(LETTERS[((x >> i) & 1) | (((z >> i) & 1) << 1)] for i in range(k))


def group_expansion(generators, k: int) -> dict:
    """Normalized expansion ``2^-k * sum_{g in <generators>} g`` of signed labels."""
    mod = kernels.for_width(max(k, 1))
    rows = []
    for g in generators:
        sign, body = g[0], g[1:]
        x, z = _bits(body)
        rows.append((x, z, 0 if sign == "+" else 2))
    out = {}
    base = Fraction(1, 2**k)
    for mask in range(1 << len(rows)):
        x = z = p = 0
        for i, r in enumerate(rows):
            if mask >> i & 1:
                x, z, p = mod.pauli_mul(x, z, p, *r)
        if p & 1:
            raise CertificateError("generators do not commute")
        lab = _label(x, z, k)
        if lab in out:
            raise CertificateError("generators are not independent")
        out[lab] = base if p == 0 else -base
    return out


def _stabilizer_generators(norm: dict, k: int):
    """Generators when ``norm`` is a pure stabilizer state, else ``None``."""
    if len(norm) != 2**k or any(abs(v) != Fraction(1, 2**k) for v in norm.values()):
        return None
    gens = []
    span = {(0, 0)}
    for lab in sorted(norm):
        x, z = _bits(lab)
        if (x, z) in span:
            continue
        gens.append(("+" if norm[lab] > 0 else "-") + lab)
        span |= {(sx ^ x, sz ^ z) for sx, sz in span}
        if len(gens) == k:
            break
    try:
        if len(gens) != k or group_expansion(gens, k) != norm:
            return None
    except CertificateError:
        return None
    return tuple(gens)


def emit_certificate(agg) -> PosteriorCertificate:
    omega: PauliCoefficients = agg.omega
    p = Fraction(agg.p)
    if p == 0:
        return PosteriorCertificate((), Fraction(0), MIXED, observation=agg.observation, secret_bit=agg.b)
    k = len(omega.iface)
    norm = omega.normalized().coeffs
    raw = dict(omega.coeffs)
    common = dict(raw=raw, observation=agg.observation, secret_bit=agg.b)
    if set(norm) == {"I" * k}:
        return PosteriorCertificate(omega.iface, p, MIXED, **common)
    gens = _stabilizer_generators(norm, k)
    if gens is not None:
        return PosteriorCertificate(omega.iface, p, PURE, generators=gens, **common)
    return PosteriorCertificate(omega.iface, p, GENERAL, coefficients=dict(norm), **common)


def denotation(cert: PosteriorCertificate) -> PauliCoefficients:
    k = len(cert.interface)
    if cert.weight == 0:
        return PauliCoefficients.zero(cert.interface)
    if cert.cls == MIXED:
        norm = {"I" * k: Fraction(1, 2**k)}
    elif cert.cls == PURE:
        norm = group_expansion(cert.generators, k)
    elif cert.cls == GENERAL:
        norm = cert.coefficients
    else:
        raise CertificateError(f"unknown certificate class {cert.cls!r}")
    return PauliCoefficients(cert.interface, norm).scale(cert.weight)


def check_certificate(cert: PosteriorCertificate, agg) -> bool:
    omega: PauliCoefficients = agg.omega if hasattr(agg, "omega") else agg
    if cert.weight == 0:
        return omega.is_zero()
    if tuple(cert.interface) != tuple(omega.iface):
        raise CertificateError("interface mismatch")
    den = denotation(cert)
    if den.coeffs != omega.coeffs:
        return False
    return not cert.raw or cert.raw == omega.coeffs


def check_zero_leakage(c1: PosteriorCertificate, c0: PosteriorCertificate):
    """Exact ratio ``alpha`` with ``den(c1) = alpha * den(c0)``, or ``None``."""
    if c1.weight <= 0 or c0.weight <= 0:
        raise CertificateError("zero-leakage test needs positive weights")
    d1, d0 = denotation(c1), denotation(c0)
    if d1.iface != d0.iface:
        return None
    ident = "I" * len(d1.iface)
    alpha = d1.coeffs[ident] / d0.coeffs[ident]
    if d1.coeffs == d0.scale(alpha).coeffs:
        return alpha
    return None
