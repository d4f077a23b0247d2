import itertools
from fractions import Fraction

import pytest

from conftest import CLOCKS, INV_X1, demo_paths, edge, state, MODELS_DIR

from etasynth import model_io
from etasynth.automata import (
    ClockConstraint,
    EnergyTimedPath,
    ModelError,
    SETA,
    check_restriction_R,
    is_flat,
    min_accumulated_imprecision,
    simple_cycles,
    validate,
)
from etasynth.casestudy import HydacConfig, build_hydac
from etasynth.intervals import rat
from etasynth.model_io import ModelSyntaxError


def test_clock_constraint_parsing():
    cc = ClockConstraint.parse("x <= 2 & y >= 1")
    assert cc.conjuncts == (("x", "<=", rat(2)), ("y", ">=", rat(1)))
    with pytest.raises(ModelError):
        ClockConstraint.parse("x <= -1")


def test_demo_model_validates(demo_seta):
    assert validate(demo_seta) == []


def test_undeclared_clock_is_diagnosed():
    from etasynth.automata import EtpState

    inv_y = ClockConstraint.parse("y <= 1")
    bad = EnergyTimedPath(
        (state("a", 0), EtpState("b", Fraction(1), Fraction(0), inv_y)),
        (edge(0, "x = 1", True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): bad})
    diags = validate(seta)
    assert any("undeclared" in d and "y" in d for d in diags)


def test_missing_final_reset_is_diagnosed():
    p = EnergyTimedPath((state("a", 0), state("b", 1)), (edge(0, "x = 1", False),), CLOCKS)
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    diags = validate(seta)
    assert any("reset" in d for d in diags)


def test_unbounded_duration_is_diagnosed():
    from etasynth.automata import EtpState

    unbounded = EnergyTimedPath(
        (EtpState("a", Fraction(0)), EtpState("b", Fraction(1))),
        (edge(0, None, True),),
        CLOCKS,
    )
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): unbounded})
    diags = validate(seta)
    assert any("unbounded" in d for d in diags)


def test_missing_macro_state_is_diagnosed(demo_seta):
    seta = SETA(frozenset({"s0"}), "s0", dict(demo_seta.path_of))
    diags = validate(seta)
    assert diags


def test_is_flat_demo(demo_seta):
    flat, depth1 = is_flat(demo_seta)
    assert flat is True
    assert depth1 is False  # two tree paths join at s2


def test_is_flat_hydac():
    seta, _ = build_hydac(HydacConfig())
    flat, depth1 = is_flat(seta)
    assert flat is True and depth1 is True


def test_two_cycles_through_one_state_not_flat():
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
    flat, _ = is_flat(seta)
    assert flat is False


def _brute_force_simple_cycles(seta: SETA):
    """Exhaustive simple-cycle enumeration over node permutations."""
    nodes = sorted(seta.macro_states)
    edges = set(seta.path_of)
    found = set()
    for size in range(1, len(nodes) + 1):
        for combo in itertools.permutations(nodes, size):
            ok = all(
                (combo[i], combo[(i + 1) % size]) in edges for i in range(size)
            )
            if ok:
                canon = min(tuple(combo[i:] + combo[:i]) for i in range(size))
                found.add(canon)
    return found


def test_flatness_agrees_with_brute_force_enumeration(demo_seta):
    import random

    rng = random.Random(31)
    p = demo_paths()["p01"]
    for _ in range(40):
        n = rng.randint(2, 6)
        nodes = [f"n{i}" for i in range(n)]
        edges = {}
        for _ in range(rng.randint(1, 2 * n)):
            a, b = rng.choice(nodes), rng.choice(nodes)
            edges[(a, b)] = p
        seta = SETA(frozenset(nodes), "n0", edges)
        brute = _brute_force_simple_cycles(seta)
        mine = {
            min(tuple(c[i:] + c[:i]) for i in range(len(c)))
            for c in map(tuple, simple_cycles(seta))
        }
        assert mine == brute
        counts = {}
        for cyc in brute:
            for node in set(cyc):
                counts[node] = counts.get(node, 0) + 1
        assert is_flat(seta)[0] == all(v <= 1 for v in counts.values())


def test_restriction_on_demo(demo_seta):
    rep = check_restriction_R(demo_seta)
    assert rep.ok and rep.min_duration == 1


def test_restriction_on_hydac_is_full_cycle_duration():
    seta, _ = build_hydac(HydacConfig(variant="h1", epsilon=rat("0.1")))
    rep = check_restriction_R(seta)
    assert rep.ok and rep.min_duration == 20


def test_restriction_failure_named():
    p = EnergyTimedPath((state("a", 0), state("b", 1)), (edge(0, "x <= 1", True),), CLOCKS)
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): p})
    rep = check_restriction_R(seta)
    assert not rep.ok
    assert rep.offending_path == ("m", "m")


def test_min_accumulated_imprecision_hydac():
    # every nonzero-consumption slot contributes its band for the full
    # two seconds: five slots at 0.1 each
    seta, _ = build_hydac(HydacConfig(variant="h1", epsilon=rat("0.1")))
    q = min_accumulated_imprecision(seta.path_of[("m", "m")])
    assert q == 1


def test_restriction_lp_witness_is_attained(demo_seta):
    rep = check_restriction_R(demo_seta)
    assert min(rep.per_path.values()) == rep.min_duration
    for path in demo_seta.path_of.values():
        assert path.min_duration() >= rep.min_duration


# -- model files --------------------------------------------------------------


def test_model_file_loads_and_matches_programmatic(demo_seta):
    loaded = model_io.load_seta(str(MODELS_DIR / "two_loops.model"))
    assert loaded.macro_states == demo_seta.macro_states
    assert loaded.initial == demo_seta.initial
    assert set(loaded.path_of) == set(demo_seta.path_of)
    for key in loaded.path_of:
        got, want = loaded.path_of[key], demo_seta.path_of[key]
        assert [s.rate for s in got.states] == [s.rate for s in want.states]
        assert [t.update for t in got.transitions] == [t.update for t in want.transitions]


def test_model_round_trip(demo_seta):
    text = model_io.dump_seta(demo_seta)
    again = model_io.load_seta_text(text)
    assert again.macro_states == demo_seta.macro_states
    for key, path in again.path_of.items():
        want = demo_seta.path_of[key]
        assert [s.rate for s in path.states] == [s.rate for s in want.states]
        assert [(t.update, t.resets) for t in path.transitions] == [
            (t.update, t.resets) for t in want.transitions
        ]


def test_model_errors_are_line_anchored():
    text = "clocks: [x]\nmacro_states: [m]\ninitial: m\ntransitions:\n  - from: m\n    to: m\n    path:\n      states:\n        - {id: a, rate: fast}\n      edges: []\n"
    with pytest.raises(ModelSyntaxError) as err:
        model_io.load_seta_text(text)
    assert "line 9" in str(err.value)


def test_model_exact_decimal_rates():
    text = (
        "clocks: [x]\nmacro_states: [m]\ninitial: m\ntransitions:\n"
        "  - from: m\n    to: m\n    path:\n      states:\n"
        '        - {id: a, rate: -1.2, invariant: "x <= 2"}\n'
        '        - {id: b, rate: 5/3, invariant: "x <= 2"}\n'
        "      edges:\n"
        '        - {guard: "x = 2", update: 0.5, resets: [x]}\n'
    )
    seta = model_io.load_seta_text(text)
    path = seta.path_of[("m", "m")]
    assert path.states[0].rate == Fraction(-6, 5)
    assert path.states[1].rate == Fraction(5, 3)
    assert path.transitions[0].update == Fraction(1, 2)


def test_preset_file_is_rejected_by_seta_loader(tmp_path):
    f = tmp_path / "p.model"
    f.write_text("preset: h1\neps: 0.1\n")
    with pytest.raises(ModelSyntaxError, match="preset"):
        model_io.load_seta(str(f))
