"""Hand-rolled classical simulator for computational-basis models, used as a test oracle.

It reads the model dictionary directly and shares no code with the library.
"""
from fractions import Fraction

COIN = "+"


def _run(program, bits):
    bits = dict(bits)
    factor = Fraction(1)
    for st in program:
        (kind, body), = st.items()
        if kind == "gate":
            regs = body["regs"]
            assert all(bits[r] != COIN for r in regs)
            if body["name"] == "X":
                bits[regs[0]] ^= 1
            elif body["name"] == "CNOT":
                bits[regs[1]] ^= bits[regs[0]]
            else:
                raise ValueError(body["name"])
        elif kind == "prep":
            bits[body["reg"]] = COIN if body["basis"] == "+" else int(body["basis"])
        elif kind == "project":
            assert body["pauli"] == "Z"
            (r,) = body["regs"]
            want = 0 if body["outcome"] == 1 else 1
            if bits[r] == COIN:
                factor /= 2
            elif bits[r] != want:
                return None, Fraction(0)
            bits[r] = want
        else:
            raise ValueError(kind)
    return bits, factor


def terminal_distribution(d):
    """``{(word, secret, interface bits): probability}`` over runs that stop."""
    secret = set(d["secret"]["transitions"])
    iface = d["attacker_interface"]
    start = {r: int(b) for r, b in d["initial_state"]["assign"].items()}
    todo = [(frozenset(d["initial_marking"]), start, (), 0, Fraction(1))]
    out = {}
    while todo:
        marking, bits, word, s, pr = todo.pop()
        moves = [t for t in d["transitions"] if set(t["pre"]) <= marking]
        if not moves:
            key = (word, s, tuple(bits[r] for r in iface))
            out[key] = out.get(key, Fraction(0)) + pr
            continue
        for t in moves:
            m2 = (marking - set(t["pre"])) | set(t["post"])
            for b in t["branches"]:
                bits2, f = _run(b["program"], bits)
                if f == 0:
                    continue
                w2 = word if b["label"] == "tau" else word + (b["label"],)
                todo.append((m2, bits2, w2, s | (t["id"] in secret), pr * f))
    return out


def tv_leakage(d, word):
    dist = terminal_distribution(d)
    word = tuple(word)
    post = [{}, {}]
    for (w, s, x), pr in dist.items():
        if w == word:
            post[s][x] = post[s].get(x, Fraction(0)) + pr
    p0, p1 = sum(post[0].values()), sum(post[1].values())
    if p1 == 0:
        return Fraction(0), p0, p1
    if p0 == 0:
        return Fraction(1), p0, p1
    xs = set(post[0]) | set(post[1])
    tv = sum(abs(post[1].get(x, 0) / p1 - post[0].get(x, 0) / p0) for x in xs) / 2
    return tv, p0, p1
