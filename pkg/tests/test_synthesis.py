import random
from fractions import Fraction

import pytest

from conftest import CLOCKS, demo_paths, edge, state
from oracles import grid_infinite_run, path_member

from etasynth import lp
from etasynth.automata import EnergyTimedPath, SETA
from etasynth.casestudy import HydacConfig, build_hydac
from etasynth.intervals import Interval, rat
from etasynth.linarith import Atom, LinearTerm, Rel
from etasynth.relations import W0, W1, apply, build_binary, compose_chain, greatest_fixpoint
from etasynth.synthesis import (
    SynthesisError,
    cycle_min_iterable_level,
    decide_infinite_run,
    decide_infinite_run_uncertain,
    minimal_upper_bound,
    upper_bound_exists,
)


def test_decision_on_demo_model(demo_seta, E06):
    decision = decide_infinite_run(demo_seta, "s0", Interval.point(0), E06)
    assert decision.satisfiable
    w = decision.witness
    assert w.entry_state == "s2"
    assert w.entry_interval == Interval.closed(5, 5)
    assert w.stable == Interval.closed(Fraction(5, 3), 6)


def test_decision_is_reproducible(demo_seta, E06):
    runs = [decide_infinite_run(demo_seta, "s0", Interval.point(0), E06) for _ in range(3)]
    assert len({r.tasks_processed for r in runs}) == 1
    assert len({str(r.witness.entry_interval) for r in runs}) == 1


def test_acyclic_graph_is_false(E06):
    p = demo_paths()
    seta = SETA(frozenset({"a", "b"}), "a", {("a", "b"): p["p01"]})
    assert not decide_infinite_run(seta, "a", Interval.point(0), E06)


def test_pure_loss_loop_empties(E06):
    # the self-loop loses at least one unit per lap above level 3
    p = demo_paths()
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p["p11"]})
    decision = decide_infinite_run(seta, "m", Interval.closed(6, 6), E06)
    assert not decision.satisfiable


def test_non_flat_is_rejected(E06):
    p = demo_paths()
    seta = SETA(
        frozenset({"m", "a", "b"}),
        "m",
        {
            ("m", "a"): p["p01"],
            ("a", "m"): p["p12"],
            ("m", "b"): p["p01"],
            ("b", "m"): p["p12"],
        },
    )
    with pytest.raises(SynthesisError, match="flat"):
        decide_infinite_run(seta, "m", Interval.point(0), Interval.closed(0, 20))


# -- random flat models against the grid oracle --------------------------------


def _random_flat_seta(rng: random.Random):
    """A random tree with self-loops at some nodes: flat by construction."""
    n = rng.randint(1, 4)
    nodes = [f"n{i}" for i in range(n)]
    edges = {}
    for i in range(1, n):
        parent = nodes[rng.randrange(i)]
        edges[(parent, nodes[i])] = _random_path(rng)
    for node in nodes:
        if rng.random() < 0.7:
            edges[(node, node)] = _random_path(rng)
    if not edges:
        edges[(nodes[0], nodes[0])] = _random_path(rng)
    return SETA(frozenset(nodes), nodes[0], edges)


def _random_path(rng: random.Random) -> EnergyTimedPath:
    k = rng.randint(1, 2)
    states = [state(f"q{i}", rng.randint(-3, 3)) for i in range(k)]
    states.append(state("qe", rng.randint(-3, 3)))
    edges = []
    for i in range(k):
        last = i == k - 1
        edges.append(
            edge(rng.randint(-3, 4), "x = 1" if last else None, reset=last)
        )
    return EnergyTimedPath(tuple(states), tuple(edges), CLOCKS)


def test_random_flat_models_agree_with_grid_oracle():
    """The bounded-depth grid oracle never finds a run the decision
    procedure rejects, and positive answers carry verifiable witnesses."""
    rng = random.Random(424242)
    checked = oracle_yes = tool_yes = 0
    for trial in range(50):
        seta = _random_flat_seta(rng)
        E = Interval.closed(0, rng.randint(4, 8))
        w_start = Fraction(rng.randint(0, int(E.hi) * 2), 2)
        I0 = Interval.point(w_start)
        decision = decide_infinite_run(seta, None, I0, E)
        checked += 1
        if grid_infinite_run(seta, E, seta.initial, I0, grid_den=2, depth=12):
            oracle_yes += 1
            assert decision.satisfiable, f"trial {trial}: oracle found a run, tool said no"
        if decision.satisfiable:
            tool_yes += 1
            _verify_witness(seta, E, decision)
    assert checked == 50 and oracle_yes >= 10 and tool_yes >= oracle_yes


def _verify_witness(seta, E, decision):
    w = decision.witness
    assert not w.entry_interval.is_empty()
    assert w.stable.contains_interval(w.entry_interval.intersect(w.stable))
    assert not w.entry_interval.intersect(w.stable).is_empty()
    # iterate the cycle a dozen laps from inside the fixpoint, step by step
    rel = compose_chain([build_binary(seta.path_of[e], E) for e in w.cycle])
    level = w.entry_interval.intersect(w.stable).lo
    for _ in range(12):
        atoms = list(rel.substituted({W0: LinearTerm.const(level)}))
        if w.stable.lo is not None:
            atoms.append(Atom.make(LinearTerm.build({W1: -1}, w.stable.lo), Rel.LE))
        if w.stable.hi is not None:
            atoms.append(Atom.make(LinearTerm.build({W1: 1}, -w.stable.hi), Rel.LE))
        res = lp.feasible(atoms)
        assert res.is_feasible, "witness level could not take another lap"
        level = res.witness[W1]


def test_termination_bound_matches_oracle_iteration(demo_seta, E06):
    """Wherever the start interval misses the fixpoint, forward iteration
    empties in exactly as many steps as direct LP image iteration."""
    from oracles import path_image

    for node, start in (("s2", Interval.closed(0, 1)), ("s1", Interval.closed(4, 4))):
        path = demo_seta.path_of[(node, node)]
        rel = build_binary(path, E06)
        nu = greatest_fixpoint(rel, E06)
        assert start.intersect(nu).is_empty()
        cur_tool, cur_oracle = start, start
        steps_tool = steps_oracle = 0
        while not cur_tool.is_empty():
            cur_tool = apply(rel, cur_tool)
            steps_tool += 1
            assert steps_tool < 50
        while not cur_oracle.is_empty():
            cur_oracle = path_image(path, E06, cur_oracle)
            steps_oracle += 1
        assert steps_tool == steps_oracle


# -- uncertainty ---------------------------------------------------------------


def _steerable_loop() -> EnergyTimedPath:
    """Half a second of forced drift (+-1/4 l/s), then half a second split
    freely between draining (-1) and filling (+1): the end window has a
    fixed quarter-litre width and its centre can be steered either way."""
    return EnergyTimedPath(
        (state("drift", 0, eps="1/4"), state("drain", -1), state("fill", 1), state("end", 0)),
        (
            edge(0, "x = 1/2"),
            edge(0),
            edge(0, "x = 1", True),
        ),
        CLOCKS,
    )


def test_uncertain_steerable_loop_decidable_cases():
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): _steerable_loop()})
    # plenty of room: any central level can be held forever
    assert decide_infinite_run_uncertain(seta, "m", 2, Interval.closed(0, 4)) is True
    # the window cannot fit inside a band narrower than its fixed width
    assert decide_infinite_run_uncertain(seta, "m", Fraction(1, 10), Interval.closed(0, Fraction(1, 5))) is False


def test_uncontrolled_drift_is_never_stable():
    # no control at all: the adversary walks the level out of any band
    p = EnergyTimedPath(
        (state("u0", 0, eps="1/4"), state("u1", 0)),
        (edge(0, "x = 1", True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    assert decide_infinite_run_uncertain(seta, "m", 2, Interval.closed(0, 4)) is False


def test_uncertain_requires_restriction():
    p = EnergyTimedPath(
        (state("u0", 0, eps="1/4"), state("u1", 0)),
        (edge(0, "x <= 1", True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    with pytest.raises(SynthesisError, match="restriction"):
        decide_infinite_run_uncertain(seta, "m", 1, Interval.closed(0, 2))


def test_uncertain_rejects_level_outside_bounds():
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): _steerable_loop()})
    assert decide_infinite_run_uncertain(seta, "m", 9, Interval.closed(0, 4)) is False


def test_uncertain_general_route_agrees_with_depth1():
    """The interval-family formula and the depth-1 chain construction
    agree on a steerable single-loop model."""
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): _steerable_loop()})
    from etasynth.synthesis import _decide_uncertain_depth1, _decide_uncertain_general

    for w0, E in (
        (Fraction(2), Interval.closed(0, 4)),
        (Fraction(1, 10), Interval.closed(0, Fraction(1, 5))),
        (Fraction(1, 2), Interval.closed(0, Fraction(3, 4))),
    ):
        fast = _decide_uncertain_depth1(seta, "m", w0, E)
        slow = _decide_uncertain_general(seta, "m", w0, E, max_intervals=1, max_disjuncts=50_000)
        assert fast == slow, (w0, E)


def test_hydac_eps_decisions():
    cfg = HydacConfig(variant="h1", epsilon=rat("0.1"))
    seta, _ = build_hydac(cfg)
    # the synthesised minimal bound is 3509/490 ~ 7.1612: anything above
    # admits a strategy, anything below does not
    assert decide_infinite_run_uncertain(seta, "m", 6, Interval.closed(rat("4.9"), rat("7.2")))
    assert not decide_infinite_run_uncertain(seta, "m", 6, Interval.closed(rat("4.9"), rat("7.1")))

    cfg2 = HydacConfig(variant="h2", epsilon=rat("0.1"))
    seta2, _ = build_hydac(cfg2)
    # the published minimal bound for this variant is 9.1
    assert not decide_infinite_run_uncertain(seta2, "m", 6, Interval.closed(rat("4.9"), rat("8.9")))


# -- upper bounds ---------------------------------------------------------------


def test_upper_bound_exists_demo(demo_seta):
    assert upper_bound_exists(demo_seta, 0, 0) is True


def test_upper_bound_exists_fails_on_strict_loss():
    # every lap loses at least one unit whatever the upper bound
    p = EnergyTimedPath(
        (state("l0", 0), state("l1", 0)),
        (edge(-1, "x = 1", True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    assert upper_bound_exists(seta, 5, 0) is False


def test_upper_bound_exists_below_lower_bound():
    p = demo_paths()
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p["p22"]})
    assert upper_bound_exists(seta, -1, 0) is False


def test_min_iterable_level_matches_bound_sweep(demo_seta, E06):
    """The least iterable entry level of a cycle agrees with a sweep of
    fixpoints over growing upper bounds."""
    a_min = cycle_min_iterable_level(demo_seta, [("s2", "s2")], 0)
    assert a_min is not None
    path = demo_seta.path_of[("s2", "s2")]
    best = None
    u = Fraction(2)
    while u <= 40:
        nu = greatest_fixpoint(build_binary(path, Interval.closed(0, u)), Interval.closed(0, u))
        if not nu.is_empty():
            best = nu.lo if best is None else min(best, nu.lo)
        u += Fraction(1, 2)
    assert best is not None
    assert a_min <= best
    assert best - a_min < Fraction(1, 1000) or a_min == best


def test_minimal_upper_bound_preserving_cycle():
    # a cycle that neither gains nor loses keeps exactly the entry level
    p = EnergyTimedPath(
        (state("z0", 0), state("z1", 0)),
        (edge(0, "x = 1", True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    res = minimal_upper_bound(seta, 1, w0=3)
    assert res.upper_bound == 3
    res2 = minimal_upper_bound(seta, 1, w0=Fraction(1, 2))
    assert not res2.found()


def test_minimal_upper_bound_requires_depth1(demo_seta):
    with pytest.raises(SynthesisError, match="depth-1"):
        minimal_upper_bound(demo_seta, 0)


def test_minimal_upper_bound_monotone_in_lower_bound():
    p = demo_paths()
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p["p22"]})
    previous = None
    for L in (0, Fraction(1, 2), 1, Fraction(3, 2)):
        res = minimal_upper_bound(seta, L)
        assert res.found()
        if previous is not None:
            assert res.upper_bound >= previous
        previous = res.upper_bound


def test_minimal_upper_bound_with_path_prefix():
    p = demo_paths()
    seta = SETA(
        frozenset({"a", "b"}),
        "a",
        {("a", "b"): p["p01"], ("b", "b"): p["p22"]},
    )
    res = minimal_upper_bound(seta, 0, w0=0)
    assert res.found()
    # entering at 0, the charge path lands at 4; the cycle then needs
    # room for one more gain segment before settling
    assert res.upper_bound >= 4
    base = minimal_upper_bound(seta, 0)
    assert base.found() and base.upper_bound <= res.upper_bound
