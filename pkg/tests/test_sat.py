"""The CDCL solver, checked against an independent solver and by model checking."""

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from leakbound.sat import SAT, UNKNOWN, UNSAT, Solver, _luby, solve

pysat_solvers = pytest.importorskip("pysat.solvers")


def random_cnf(rng, nvars, nclauses, k=3):
    return [[v if rng.random() < 0.5 else -v for v in rng.sample(range(1, nvars + 1), k)]
            for _ in range(nclauses)]


def reference(nvars, clauses, assumptions=()):
    with pysat_solvers.Minisat22(bootstrap_with=clauses) as s:
        return s.solve(assumptions=list(assumptions))


def pigeonhole(holes):
    """``holes + 1`` pigeons into ``holes`` holes: unsatisfiable."""
    var = lambda p, h: p * holes + h + 1  # noqa: E731
    clauses = [[var(p, h) for h in range(holes)] for p in range(holes + 1)]
    for h in range(holes):
        for p, q in itertools.combinations(range(holes + 1), 2):
            clauses.append([-var(p, h), -var(q, h)])
    return (holes + 1) * holes, clauses


def satisfies(model, clauses):
    return all(any(model[abs(l)] == (l > 0) for l in c) for c in clauses)


def test_trivial_instances():
    assert solve((1, [[1]])).model[1] is True
    assert solve((1, [[1], [-1]])).status == UNSAT
    assert solve((2, [[]])).status == UNSAT
    assert solve((3, [])).status == SAT
    assert solve((2, [[1, -1], [2]])).status == SAT      # tautologies are dropped


def test_luby_sequence():
    assert [_luby(i) for i in range(1, 16)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


@pytest.mark.parametrize("holes", [3, 4, 5])
def test_pigeonhole_is_unsat(holes):
    assert solve(pigeonhole(holes)).status == UNSAT
    assert solve(pigeonhole(holes), restarts=True).status == UNSAT


def test_conflict_budget_gives_unknown():
    res = solve(pigeonhole(6), conflict_budget=5)
    assert res.status == UNKNOWN
    assert res.stats["conflicts"] == 6


def test_literal_range_is_checked():
    with pytest.raises(ValueError):
        solve((2, [[3]]))
    with pytest.raises(ValueError):
        Solver(2, [[1]], order=[1])
    with pytest.raises(ValueError):
        Solver(2, [[1, 2]]).solve([5])


def test_results_are_deterministic():
    rng = random.Random(5)
    clauses = random_cnf(rng, 60, 250)
    a, b = solve((60, clauses)), solve((60, clauses))
    assert a.status == b.status and a.model == b.model


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(5, 40), st.floats(3.0, 5.5), st.booleans())
def test_agrees_with_reference_solver(seed, nvars, ratio, restarts):
    rng = random.Random(seed)
    clauses = random_cnf(rng, nvars, int(nvars * ratio), k=min(3, nvars))
    res = solve((nvars, clauses), restarts=restarts)
    assert res.sat == reference(nvars, clauses)
    if res.sat:
        assert satisfies(res.model, clauses)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_incremental_assumptions_agree_with_reference(seed):
    rng = random.Random(seed)
    nvars = rng.randint(8, 30)
    clauses = random_cnf(rng, nvars, int(nvars * 3.8))
    solver = Solver(nvars, clauses)
    for _ in range(8):
        assumptions = [v if rng.random() < 0.5 else -v for v in rng.sample(range(1, nvars + 1), rng.randint(0, 5))]
        res = solver.solve(assumptions)
        assert res.sat == reference(nvars, clauses, assumptions)
        if res.sat:
            assert satisfies(res.model, clauses)
            assert all(res.value(l) for l in assumptions)


def test_assumption_unsat_does_not_poison_later_calls():
    solver = Solver(3, [[1, 2], [-1, 3]])
    assert solver.solve([1, -3]).status == UNSAT
    assert solver.solve([1]).status == SAT
    assert solver.solve([-1, -2]).status == UNSAT
    res = solver.solve()
    assert res.sat and satisfies(res.model, [[1, 2], [-1, 3]])


def test_decision_order_and_default_phase():
    # unconstrained variables are decided negative first
    res = Solver(3, [[1, 2, 3]], order=[3, 2, 1]).solve()
    assert res.model[1:] == [True, False, False]
    res = Solver(3, [[1, 2, 3]], order=[1, 2, 3]).solve()
    assert res.model[1:] == [False, False, True]
