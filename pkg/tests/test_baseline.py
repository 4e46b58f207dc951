import random

import numpy as np
import pytest

from conftest import tiny_model
from opaqnet import baseline, randomized, verifier
from opaqnet.model import model_from_dict
from opaqnet.pomset import Pomset
from opaqnet.unfolding import TargetFamily, calibration_family


def exact(model, fam):
    return verifier.aggregate(verifier.explore(model, fam))


def test_shuffle_count():
    assert [baseline.shuffle_count(m) for m in (0, 1, 2, 4, 8)] == [1, 4, 10, 35, 165]
    with pytest.raises(ValueError):
        baseline.shuffle_count(-1)


@pytest.mark.parametrize("m", [0, 2])
def test_interleaving_matches_quotient(repeater, m):
    fam = calibration_family(m)
    stats = {}
    inter = baseline.interleaving_aggregate(repeater, fam, stats=stats)
    assert baseline.max_discrepancy(inter, exact(repeater, fam)) <= 1e-10
    assert baseline.max_discrepancy(inter, baseline.quotient_dense_aggregate(repeater, fam)) <= 1e-10
    if m == 0:
        assert stats["executions"] == stats["classes"]
    else:
        assert stats["executions"] > stats["classes"]


def test_accounting_modes_agree(repeater):
    fam = calibration_family(2)
    a = baseline.interleaving_aggregate(repeater, fam, mode=baseline.DIVIDE)
    b = baseline.interleaving_aggregate(repeater, fam, mode=baseline.REPRESENTATIVE)
    assert baseline.max_discrepancy(a, b) <= 1e-12
    with pytest.raises(ValueError):
        baseline.interleaving_aggregate(repeater, fam, mode="sum")


def test_standard_targets(repeater):
    fam = TargetFamily.from_spec(["O_fg", "O_fail"], repeater)
    inter = baseline.interleaving_aggregate(repeater, fam)
    assert baseline.max_discrepancy(inter, exact(repeater, fam)) <= 1e-10
    assert [a.S for a in inter] == [a.S for a in exact(repeater, fam)]


def test_concurrent_observables():
    d = tiny_model(
        [
            {"id": "fork", "pre": ["s"], "post": ["pa", "pb"], "branches": [{"outcome": "u"}]},
            {
                "id": "ta",
                "pre": ["pa"],
                "post": [],
                "access": ["q"],
                "branches": [
                    {"outcome": "0", "label": "a", "program": [{"gate": {"name": "H", "regs": ["q"]}}]},
                ],
            },
            {
                "id": "tb",
                "pre": ["pb"],
                "post": [],
                "access": ["r"],
                "branches": [
                    {"outcome": "+", "label": "b", "program": [{"project": {"pauli": "X", "regs": ["r"], "outcome": 1}}]},
                    {"outcome": "-", "label": "b", "program": [{"project": {"pauli": "X", "regs": ["r"], "outcome": -1}}]},
                ],
            },
        ],
        ["s", "pa", "pb"],
        regs=("q", "r"),
        iface=("q", "r"),
        secret={"mode": "event-predicate", "transitions": ["ta"]},
    )
    m = model_from_dict(d)
    fam = TargetFamily([Pomset.build(["a", "b"])])
    stats = {}
    inter = baseline.interleaving_aggregate(m, fam, stats=stats)
    assert stats["executions"] == 4 and stats["classes"] == 2
    assert baseline.max_discrepancy(inter, exact(m, fam)) <= 1e-12
    assert inter[1].p == pytest.approx(1.0)


def test_toy_nets_agree():
    rng = random.Random(11)
    checked = 0
    for _ in range(15):
        m = model_from_dict(randomized.random_toy_net(rng))
        fam = TargetFamily.from_spec(["all"], m)
        try:
            inter = baseline.interleaving_aggregate(m, fam, cap=200_000)
        except baseline.ExecutionExplosion:
            continue
        assert baseline.max_discrepancy(inter, exact(m, fam)) <= 1e-10
        checked += 1
    assert checked >= 10


def test_empty_family(repeater):
    assert baseline.interleaving_aggregate(repeater, TargetFamily([])) == []


def test_execution_cap(repeater):
    with pytest.raises(baseline.ExecutionExplosion):
        baseline.interleaving_aggregate(repeater, calibration_family(4), cap=50)


def test_foata_normal_form(repeater):
    t = {x.id: x for x in repeater.transitions}
    cal, req = t["t_cal"], t["t_req"]
    a = baseline.foata([(req, "0"), (cal, "0")])
    b = baseline.foata([(cal, "0"), (req, "0")])
    assert a == b
    assert len(a) == 1


def test_bench_rows(repeater):
    rows = baseline.bench(repeater, [0, 2], repeat=1, min_time=0)
    assert [r.n_seq for r in rows] == [1, 10]
    assert all(r.agree for r in rows)
    csv = baseline.bench_csv(rows)
    assert csv.splitlines()[0] == "m,n_seq,t_interleaving_ms,t_quotient_ms,speedup"
    assert len(csv.splitlines()) == 3
    plot = baseline.bench_plot_data(rows)
    assert [r["n_seq"] for r in plot["rows"]] == [1, 10]


@pytest.mark.slow
def test_speedup_grows(repeater):
    rows = baseline.bench(repeater, [0, 4], repeat=3, min_time=0.3)
    assert rows[1].speedup > rows[0].speedup
    assert rows[1].speedup > 5
    assert np.isfinite(rows[1].t_interleaving)
