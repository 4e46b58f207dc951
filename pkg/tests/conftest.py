import json
from importlib import resources

import pytest

from opaqnet.model import model_from_dict


def repeater_dict() -> dict:
    return json.loads(resources.files("opaqnet").joinpath("data", "repeater.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def repeater():
    return model_from_dict(repeater_dict())


@pytest.fixture
def repeater_raw():
    return repeater_dict()


def tiny_model(transitions, places, regs=("q",), init=None, marking=None, iface=None, secret=None, alphabet=None, **extra):
    """Build a small model dictionary; labels default into the alphabet."""
    labels = {b.get("label", "tau") for t in transitions for b in t["branches"]} - {"tau"}
    d = {
        "control_places": list(places),
        "quantum_registers": list(regs),
        "observable_alphabet": sorted(alphabet if alphabet is not None else labels),
        "initial_marking": list(marking if marking is not None else places[:1]),
        "initial_state": {"assign": init or {r: "0" for r in regs}},
        "attacker_interface": list(iface if iface is not None else regs[:1]),
        "secret": secret or {"mode": "event-predicate", "transitions": []},
        "transitions": transitions,
    }
    d.update(extra)
    return d
