"""Kernel selection: compiled GF(2)/Pauli routines when available, pure Python otherwise.

Set ``OPAQNET_PURE_PYTHON=1`` to force the fallback (used by the kernel benchmark
and by the equivalence tests).
"""
from __future__ import annotations

import os
import random
import time
from types import ModuleType

from . import _pykernels

try:  # pragma: no cover - depends on the build
    from . import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

COMPILED_MAX_QUBITS = 64

if _ckernels is not None and os.environ.get("OPAQNET_PURE_PYTHON") != "1":
    default: ModuleType = _ckernels
    BACKEND = "cython"
else:
    default = _pykernels
    BACKEND = "python"

GATE_CODES = _pykernels.GATE_CODES


def for_width(n: int) -> ModuleType:
    """Kernel module able to handle ``n`` registers."""
    if n > COMPILED_MAX_QUBITS:
        return _pykernels
    return default


def available() -> dict[str, ModuleType]:
    mods = {"python": _pykernels}
    if _ckernels is not None:
        mods["cython"] = _ckernels
    return mods


def _workload(mod: ModuleType, n: int, rounds: int, seed: int) -> None:
    rng = random.Random(seed)
    rows = [(0, 1 << i, 0) for i in range(n)]
    names = list(GATE_CODES.values())
    for _ in range(rounds):
        code = rng.choice(names)
        a = rng.randrange(n)
        b = rng.randrange(n - 1)
        b = b + 1 if b >= a else b
        rows = mod.conjugate_rows(rows, code, a, b)
        mask = rng.getrandbits(n) | 1
        mod.eliminate(rows, mask)
        x, z = rng.getrandbits(n), rng.getrandbits(n)
        mod.solve(rows, x, z)


def benchmark(n: int = 16, rounds: int = 2000, seed: int = 0, repeat: int = 3) -> list[dict]:
    """Time a fixed random conjugate/eliminate/solve workload on every available kernel."""
    out = []
    for name, mod in available().items():
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            _workload(mod, n, rounds, seed)
            best = min(best, time.perf_counter() - t0)
        out.append({"kernel": name, "n": n, "rounds": rounds, "seconds": best})
    base = next(r["seconds"] for r in out if r["kernel"] == "python")
    for r in out:
        r["speedup_vs_python"] = base / r["seconds"] if r["seconds"] > 0 else float("inf")
    return out
