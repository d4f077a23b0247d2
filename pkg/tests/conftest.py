import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from etasynth.automata import ClockConstraint, EnergyTimedPath, EtpState, EtpTransition, SETA
from etasynth.casestudy import HydacConfig, build_hydac, synthesize_bounds
from etasynth.intervals import Interval, rat
from etasynth.strategies import make_controller, permissive_strategy, strategy_family

INV_X1 = ClockConstraint.parse("x <= 1")
CLOCKS = frozenset({"x"})


def state(name, rate, eps=0) -> EtpState:
    return EtpState(name, Fraction(rate), Fraction(eps), INV_X1)


def edge(update, guard=None, reset=False, delta=0) -> EtpTransition:
    return EtpTransition(
        guard=ClockConstraint.parse(guard) if guard else ClockConstraint.true(),
        update=Fraction(update),
        update_imprecision=Fraction(delta),
        resets=frozenset({"x"}) if reset else frozenset(),
    )


def demo_paths():
    """The three-state branching model with two self-loops used throughout."""
    p01 = EnergyTimedPath((state("a0", 0), state("a1", -1)), (edge(4, "x = 1", True),), CLOCKS)
    p02 = EnergyTimedPath(
        (state("b0", 0), state("b1", 5), state("b2", 2)),
        (edge(4), edge(-5, "x = 1", True)),
        CLOCKS,
    )
    p11 = EnergyTimedPath(
        (state("c0", -1), state("c1", 3), state("c2", -1)),
        (edge(-3), edge(-1, "x = 1", True)),
        CLOCKS,
    )
    p12 = EnergyTimedPath((state("d0", -1), state("d1", 2)), (edge(2, "x = 1", True),), CLOCKS)
    p22 = EnergyTimedPath(
        (state("e0", 2), state("e1", 5), state("e2", 2), state("e3", 2)),
        (edge(-3), edge(0), edge(0, "x = 1", True)),
        CLOCKS,
    )
    return {"p01": p01, "p02": p02, "p11": p11, "p12": p12, "p22": p22}


@pytest.fixture(scope="session")
def demo_seta() -> SETA:
    p = demo_paths()
    return SETA(
        frozenset({"s0", "s1", "s2"}),
        "s0",
        {
            ("s0", "s1"): p["p01"],
            ("s0", "s2"): p["p02"],
            ("s1", "s1"): p["p11"],
            ("s1", "s2"): p["p12"],
            ("s2", "s2"): p["p22"],
        },
        name="two_loops",
    )


@pytest.fixture(scope="session")
def E06() -> Interval:
    return Interval.closed(0, 6)


MODELS_DIR = Path(__file__).parent.parent / "models"

_ARTIFACT_CACHE = {}


def variant_artifacts(variant: str, eps: str):
    """Heavy per-variant pipeline outputs (bounds, permissive strategy,
    1/100-grid schedule family, controller), shared across the suite."""
    key = (variant, eps)
    if key not in _ARTIFACT_CACHE:
        cfg = HydacConfig(variant=variant, epsilon=rat(eps))
        bounds = synthesize_bounds(cfg)
        _, slots = build_hydac(cfg)
        ps = permissive_strategy(slots, bounds.energy, bounds.operating)
        fam = strategy_family(ps, bounds.operating)
        controller = make_controller(
            slots, bounds.energy, bounds.operating, cfg.safety, fam=fam
        )
        _ARTIFACT_CACHE[key] = (bounds, slots, ps, fam, controller)
    return _ARTIFACT_CACHE[key]


@pytest.fixture(scope="session")
def h1_artifacts():
    return variant_artifacts("h1", "0")


@pytest.fixture(scope="session")
def h2_artifacts():
    return variant_artifacts("h2", "0")


@pytest.fixture(scope="session")
def h1_eps_artifacts():
    return variant_artifacts("h1", "0.1")


@pytest.fixture(scope="session")
def h2_eps_artifacts():
    return variant_artifacts("h2", "0.1")
