import random
from fractions import Fraction

import pytest

from etasynth import lp
from etasynth.linarith import Atom, LinearTerm, Rel, Variable, parse

X = Variable("x")
Y = Variable("y")


def test_infeasible_pair():
    assert lp.feasible(parse("x <= 1 & 2 <= x")).status is lp.LPStatus.INFEASIBLE


def test_feasible_box_returns_witness_inside():
    res = lp.feasible(parse("x <= 1 & 0 <= x"))
    assert res.is_feasible
    assert 0 <= res.witness[X] <= 1


def test_simple_max():
    res = lp.optimize(parse("x <= 3"), LinearTerm.var(X), "max")
    assert res.status is lp.LPStatus.OPTIMAL and res.value == 3


def test_unbounded_reported():
    res = lp.optimize(parse("0 <= x"), LinearTerm.var(X), "max")
    assert res.status is lp.LPStatus.UNBOUNDED
    assert res.value is None


def test_min_direction():
    res = lp.optimize(parse("0 <= x & x <= 3"), LinearTerm.var(X), "min")
    assert res.value == 0


def test_equality_constraints():
    res = lp.optimize(parse("x = 2 & y <= x"), LinearTerm.var(Y), "max")
    assert res.value == 2
    assert res.witness[X] == 2


def test_objective_with_constant_offset():
    obj = LinearTerm.build({X: 2}, Fraction(7))
    res = lp.optimize(parse("x <= 5 & 0 <= x"), obj, "max")
    assert res.value == 17


def test_strict_feasibility():
    strict = [Atom.make(LinearTerm.build({X: 1}, Fraction(-1)), Rel.LT),
              Atom.make(LinearTerm.build({X: -1}), Rel.LE)]
    assert lp.feasible_strict(strict) is True      # 0 <= x < 1
    degenerate = [Atom.make(LinearTerm.build({X: 1}), Rel.LT),
                  Atom.make(LinearTerm.build({X: -1}), Rel.LE)]
    assert lp.feasible_strict(degenerate) is False  # 0 <= x < 0


def _random_instance(rng):
    nvars = rng.randint(1, 5)
    vs = [Variable(f"v{i}") for i in range(nvars)]
    atoms = []
    for _ in range(rng.randint(1, 8)):
        term = LinearTerm.build(
            {v: Fraction(rng.randint(-3, 3)) for v in vs}, Fraction(rng.randint(-6, 6))
        )
        atoms.append(Atom.make(term, Rel.EQ if rng.random() < 0.15 else Rel.LE))
    obj = LinearTerm.build({v: Fraction(rng.randint(-3, 3)) for v in vs})
    return vs, atoms, obj


def test_randomized_exactness_and_duality():
    """The witness satisfies every constraint exactly and achieves the
    value; no sampled feasible point beats the reported optimum."""
    rng = random.Random(7)
    optima = 0
    for _ in range(400):
        vs, atoms, obj = _random_instance(rng)
        res = lp.optimize(atoms, obj, "max")
        if res.status is not lp.LPStatus.OPTIMAL:
            continue
        optima += 1
        assert all(a.evaluate(res.witness) for a in atoms)
        assert obj.evaluate(res.witness) == res.value
        base = {v: res.witness.get(v, Fraction(0)) for v in vs}
        for _ in range(25):
            probe = {
                v: base[v] + Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for v in vs
            }
            if all(a.evaluate(probe) for a in atoms):
                assert obj.evaluate(probe) <= res.value
    assert optima > 50


def test_min_max_consistency():
    rng = random.Random(11)
    for _ in range(100):
        vs, atoms, obj = _random_instance(rng)
        mx = lp.optimize(atoms, obj, "max")
        mn = lp.optimize(atoms, obj.scale(-1), "min")
        assert mx.status == mn.status
        if mx.status is lp.LPStatus.OPTIMAL:
            assert mx.value == -mn.value


def test_degenerate_instances_terminate():
    # many redundant constraints through one vertex (classic cycling bait)
    atoms = []
    for k in range(1, 9):
        atoms.append(Atom.make(LinearTerm.build({X: k, Y: 1}), Rel.LE))
        atoms.append(Atom.make(LinearTerm.build({X: -k, Y: 1}), Rel.LE))
    atoms.append(Atom.make(LinearTerm.build({Y: -1}, Fraction(-5))))
    res = lp.optimize(atoms, LinearTerm.var(Y), "max")
    assert res.status is lp.LPStatus.OPTIMAL
    assert res.value == 0
