"""Shared checks for the unit and acceptance suites."""
from opaqnet import randomized, verifier
from opaqnet.baseline import execution_pomset
from opaqnet.stabilizer import PauliCoefficients, apply_branch, den_coefficients, init_tableau, reduce_to
from opaqnet.stabilizer.tableau import apply_step
from opaqnet.unfolding import linearizations


def check_invariance(model, res, max_size):
    """Every linearization of every explored configuration: same denotation, same pomset.

    Returns the number of linearizations checked.
    """
    u = res.unfolding
    checked = 0
    for c in res.reachable:
        if len(c) > max_size:
            continue
        want_state = res.state(c)
        want_key = u.obs_key(c)
        for lin in linearizations(u, c, bound=max_size):
            g = init_tableau(model.initial_prep(), model.n)
            for i in lin:
                g = apply_branch(g, u.events[i].bt.branch)
            assert g.weight == want_state.weight
            assert den_coefficients(g).coeffs == den_coefficients(want_state).coeffs
            steps = [(u.events[i].bt.transition, u.events[i].outcome) for i in lin]
            labels = [u.events[i].label for i in lin]
            assert execution_pomset(steps, labels).key == want_key
            checked += 1
    return checked


def random_aggregate(rng, iface, b):
    """A nonzero exact aggregate on ``iface``: a sum of a few reduced random stabilizer states."""
    n = len(iface) + 1
    total = PauliCoefficients.zero(iface)
    for _ in range(rng.randint(1, 3)):
        g = init_tableau(randomized.random_prep(rng, n, gates=3), n)
        for st in randomized.random_program(rng, n, 4):
            g = apply_step(g, st)
        total = total + reduce_to(g, range(len(iface)), iface)
    if total.trace() == 0:
        total = PauliCoefficients.maximally_mixed(iface)
    return verifier.PosteriorAggregate("x", b"x", b, total, total.trace(), True, None)
