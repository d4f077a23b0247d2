"""The hydraulic oil-pump case study.

A machine consumes oil from an accumulator in a fixed 20-second cyclic
pattern of ten 2-second slots; a pump (2.2 l/s) can be switched on and
off once per slot (variant h1) or only in every other slot (variant
h2).  The oil level must stay inside safety bounds; consumption rates
may carry a noise band of +-epsilon l/s, where a nominal rate of zero
becomes the band [-epsilon; 0] and pumping-dominated (positive) rates
stay precise.

The builders produce depth-1 flat models (one macro-state with one
self-loop) plus the slot layout that strategy synthesis and simulation
work from.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .automata import ClockConstraint, EnergyTimedPath, EtpState, EtpTransition, ModelError, SETA
from .intervals import Interval, fmt_rat, rat

DEFAULT_MACHINE_RATES: Tuple[Fraction, ...] = tuple(
    rat(x) for x in ("0", "-1.2", "0", "0", "-1.2", "-2.5", "0", "-1.7", "-0.5", "0")
)
SLOT_SECONDS = Fraction(2)
CYCLE_SECONDS = Fraction(20)
# h2 restricts pumping to every other slot; the even slots (2nd, 4th, ...)
# are the ones that keep the big mid-cycle consumption coverable
H2_PUMP_SLOTS = (1, 3, 5, 7, 9)


@dataclass(frozen=True)
class HydacConfig:
    variant: str = "h1"
    epsilon: Fraction = Fraction(0)
    pump_rate: Fraction = rat("2.2")
    v_min: Fraction = rat("4.9")
    v_max: Fraction = rat("25.1")
    machine_rates: Tuple[Fraction, ...] = DEFAULT_MACHINE_RATES

    def __post_init__(self):
        if self.variant not in ("h1", "h2"):
            raise ModelError(f"variant must be h1 or h2, got {self.variant!r}")
        if self.epsilon < 0:
            raise ModelError("epsilon must be >= 0")
        if len(self.machine_rates) != 10:
            raise ModelError("machine_rates must list ten per-slot rates")
        if any(r > 0 for r in self.machine_rates):
            raise ModelError("machine rates are consumptions and must be <= 0")

    @property
    def pump_slots(self) -> Tuple[int, ...]:
        return tuple(range(10)) if self.variant == "h1" else H2_PUMP_SLOTS

    @property
    def safety(self) -> Interval:
        return Interval(self.v_min, self.v_max)

    def label(self) -> str:
        base = self.variant.upper()
        return f"{base}(eps)" if self.epsilon else base


@dataclass(frozen=True)
class Slot:
    """One 2-second consumption period, possibly with a pump window.

    Two noise layers live here.  The synthesis band (``consumption_eps``
    and ``pump_eps``) attaches the machine's +-eps flow noise to every
    state of a slot with nonzero consumption; zero-consumption slots
    carry no synthesis band, which is the reading that reproduces the
    published minimal bounds.  The drift band (``drift_lo``/``drift_hi``,
    relative to the nominal rate) is the full differential-inclusion
    noise, where a zero rate drifts within [-eps; 0]; it drives the
    simulated envelopes and the operating-range margin.
    """

    index: int
    consumption_rate: Fraction        # nominal rate while the pump is off
    consumption_eps: Fraction
    pump: bool
    pump_rate: Fraction = Fraction(0)  # nominal rate while the pump is on
    pump_eps: Fraction = Fraction(0)
    drift_lo: Fraction = Fraction(0)   # adversarial rate offset, lower side
    drift_hi: Fraction = Fraction(0)   # adversarial rate offset, upper side
    state_indices: Tuple[int, ...] = ()

    @property
    def start(self) -> Fraction:
        return SLOT_SECONDS * self.index


def hydac_slots(cfg: HydacConfig) -> List[Slot]:
    eps = cfg.epsilon
    slots = []
    for k, m in enumerate(cfg.machine_rates):
        band = eps if m < 0 else Fraction(0)
        drift_lo = -eps
        drift_hi = eps if m < 0 else Fraction(0)
        pump = k in cfg.pump_slots
        slots.append(
            Slot(
                index=k,
                consumption_rate=m,
                consumption_eps=band,
                pump=pump,
                pump_rate=cfg.pump_rate + m if pump else Fraction(0),
                pump_eps=band if pump else Fraction(0),
                drift_lo=drift_lo,
                drift_hi=drift_hi,
            )
        )
    return slots


def build_hydac(cfg: HydacConfig) -> Tuple[SETA, List[Slot]]:
    """The pump model as a single macro-state with one self-loop ETP.

    Pump slots hold three states (consume, pump-on, consume) with free
    internal delays; the slot boundary is pinned by the guard x = 2 with
    a reset, so each slot lasts exactly two seconds.
    """
    inv = ClockConstraint.parse("x <= 2")
    free = EtpTransition()
    boundary = EtpTransition(guard=ClockConstraint.parse("x = 2"), resets=frozenset({"x"}))
    states: List[EtpState] = []
    transitions: List[EtpTransition] = []
    slots = hydac_slots(cfg)
    placed: List[Slot] = []
    for slot in slots:
        first = len(states)
        if slot.pump:
            states.append(EtpState(f"s{slot.index}_a", slot.consumption_rate, slot.consumption_eps, inv))
            states.append(EtpState(f"s{slot.index}_on", slot.pump_rate, slot.pump_eps, inv))
            states.append(EtpState(f"s{slot.index}_b", slot.consumption_rate, slot.consumption_eps, inv))
            transitions.extend([free, free, boundary])
            idx = (first, first + 1, first + 2)
        else:
            states.append(EtpState(f"s{slot.index}", slot.consumption_rate, slot.consumption_eps, inv))
            transitions.append(boundary)
            idx = (first,)
        placed.append(
            Slot(
                slot.index,
                slot.consumption_rate,
                slot.consumption_eps,
                slot.pump,
                slot.pump_rate,
                slot.pump_eps,
                slot.drift_lo,
                slot.drift_hi,
                idx,
            )
        )
    states.append(EtpState("wrap", Fraction(0), Fraction(0), inv))
    path = EnergyTimedPath(tuple(states), tuple(transitions), frozenset({"x"}))
    seta = SETA(frozenset({"m"}), "m", {("m", "m"): path}, name=cfg.label())
    return seta, placed


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Breakpoint:
    time: Fraction
    level_min: Fraction
    level_nominal: Fraction
    level_max: Fraction
    pump_on: bool


@dataclass
class Trajectory:
    """Piecewise-linear oil-level evolution with a min/nominal/max envelope.

    ``accumulated_volume`` is the time integral of the nominal level in
    litre-seconds per second, so the mean level is accumulated/duration.
    The first time any tracked curve leaves the safety bounds is
    recorded in ``violation`` as (time, violated bound).
    """

    breakpoints: List[Breakpoint] = field(default_factory=list)
    accumulated_volume: Fraction = Fraction(0)
    mean_level: Fraction = Fraction(0)
    violation: Optional[Tuple[Fraction, Fraction]] = None
    cycle_end_levels: List[Fraction] = field(default_factory=list)
    pump_seconds: Fraction = Fraction(0)


StrategySource = Callable[[int, Fraction], "object"]


def _segments_for_cycle(slots: Sequence[Slot], switches: Dict[int, Tuple[Fraction, Fraction]]):
    """(length, nominal rate, lo drift, hi drift, model band, pump_on) per
    linear piece of one 20 s cycle."""
    segs = []
    for slot in slots:
        if slot.pump and slot.index in switches:
            on_abs, off_abs = switches[slot.index]
            on = on_abs - slot.start
            off = off_abs - slot.start
        else:
            on = off = Fraction(0)
        if on < 0 or off < on or off > SLOT_SECONDS:
            raise ModelError(f"switch times outside slot {slot.index + 1} window")
        pieces = [
            (on, slot.consumption_rate, slot.consumption_eps, False),
            (off - on, slot.pump_rate, slot.pump_eps, True),
            (SLOT_SECONDS - off, slot.consumption_rate, slot.consumption_eps, False),
        ]
        for length, rate, band, pump_on in pieces:
            if length > 0:
                segs.append((length, rate, slot.drift_lo, slot.drift_hi, band, pump_on))
    return segs


def simulate(
    cfg: HydacConfig,
    strategy: StrategySource,
    w0,
    duration,
    mode: str = "nominal",
    seed: int = 0,
    safety: Optional[Interval] = None,
) -> Trajectory:
    """Exact piecewise-linear integration of the controlled tank level.

    The controller is re-invoked at every cycle start with the observed
    level (the realised level in adversarial mode).  Envelope mode
    propagates the full drift bands within each cycle, re-anchoring at
    cycle starts; adversarial mode draws one rate per segment from the
    model's noise band.  ``duration`` must be a whole number of cycles.
    """
    import random as _random

    w0 = rat(w0)
    duration = rat(duration)
    if duration <= 0 or duration % CYCLE_SECONDS != 0:
        raise ModelError("duration must be a positive multiple of the 20 s cycle")
    if mode not in ("nominal", "envelope", "adversarial"):
        raise ModelError(f"unknown simulation mode {mode!r}")
    bounds = cfg.safety if safety is None else safety
    rng = _random.Random(seed)
    slots = hydac_slots(cfg)

    traj = Trajectory()
    t = Fraction(0)
    w = w0
    lo = hi = w0
    traj.breakpoints.append(Breakpoint(t, lo, w, hi, False))

    def record_violation(time0, v0, v1, length):
        if traj.violation is not None:
            return
        for limit, side in ((bounds.lo, -1), (bounds.hi, 1)):
            if limit is None:
                continue
            out0 = (v0 - limit) * side > 0
            out1 = (v1 - limit) * side > 0
            if out0:
                traj.violation = (time0, limit)
                return
            if out1 and v1 != v0:
                cross = time0 + length * (limit - v0) / (v1 - v0)
                traj.violation = (cross, limit)
                return

    cycles = int(duration / CYCLE_SECONDS)
    for cycle in range(cycles):
        observed = w
        chosen = strategy(cycle, observed)
        switches = _coerce_switches(chosen)
        lo = hi = w  # the controller re-observes at the cycle boundary
        for length, rate, d_lo, d_hi, band, pump_on in _segments_for_cycle(slots, switches):
            if mode == "adversarial" and band:
                offset = band * Fraction(rng.randint(-(2**20), 2**20), 2**20)
            else:
                offset = Fraction(0)
            w_next = w + (rate + offset) * length
            lo_next = lo + (rate + d_lo) * length if mode == "envelope" else w_next
            hi_next = hi + (rate + d_hi) * length if mode == "envelope" else w_next
            record_violation(t, w, w_next, length)
            if mode == "envelope":
                record_violation(t, lo, lo_next, length)
                record_violation(t, hi, hi_next, length)
            traj.accumulated_volume += (w + w_next) * length / 2
            if pump_on:
                traj.pump_seconds += length
            t += length
            w, lo, hi = w_next, lo_next, hi_next
            traj.breakpoints.append(Breakpoint(t, lo, w, hi, pump_on))
        traj.cycle_end_levels.append(w)

    traj.mean_level = traj.accumulated_volume / duration
    return traj


def _coerce_switches(chosen) -> Dict[int, Tuple[Fraction, Fraction]]:
    """Accept a ConcreteStrategy or a plain {slot: (on, off)} mapping."""
    if hasattr(chosen, "switch_times"):
        return {k: (on, off) for k, on, off in chosen.switch_times}
    return {int(k): (rat(a), rat(b)) for k, (a, b) in dict(chosen).items()}


def report(traj: Trajectory, fmt: str = "summary") -> str:
    """Summary lines or CSV rows for a simulated trajectory."""
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["time", "level_min", "level_nominal", "level_max", "pump_on"])
        for bp in traj.breakpoints:
            writer.writerow(
                [fmt_rat(bp.time), fmt_rat(bp.level_min), fmt_rat(bp.level_nominal),
                 fmt_rat(bp.level_max), int(bp.pump_on)]
            )
        return out.getvalue()
    if fmt == "summary":
        lines = [
            f"accumulated volume = {fmt_rat(traj.accumulated_volume)} l",
            f"mean level = {fmt_rat(traj.mean_level)} l",
        ]
        if traj.violation is None:
            lines.append("no violation")
        else:
            t, bound = traj.violation
            lines.append(f"violation of {fmt_rat(bound)} at t = {fmt_rat(t)} s")
        return "\n".join(lines)
    raise ModelError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# bound synthesis pipeline
# ---------------------------------------------------------------------------


def initial_idle_drift(slots: Sequence[Slot]) -> Fraction:
    """Unavoidable adversarial drop across the leading zero-consumption
    slots of a cycle, with the pump initially off.  A level closer to
    the floor than this cannot be defended at the start of a cycle, so
    the operating range a controller is handed starts this far above
    the floor."""
    drop = Fraction(0)
    for slot in slots:
        if slot.consumption_rate != 0:
            break
        drop += -slot.drift_lo * SLOT_SECONDS
    return drop


@dataclass
class HydacBounds:
    """Outcome of minimal-bound synthesis for one pump model."""

    config: HydacConfig
    upper_bound: Fraction
    stable: Interval          # greatest stable interval of the cycle at U*
    operating: Interval       # stable range a controller may be started in

    @property
    def energy(self) -> Interval:
        return Interval(self.config.v_min, self.upper_bound)


def synthesize_bounds(cfg: HydacConfig) -> HydacBounds:
    """Minimal safe upper bound and stable operating range for a variant."""
    from .synthesis import minimal_upper_bound

    seta, slots = build_hydac(cfg)
    result = minimal_upper_bound(seta, cfg.v_min)
    if not result.found():
        raise ModelError(f"no safe upper bound exists for {cfg.label()}")
    margin = initial_idle_drift(slots)
    operating = Interval(result.stable.lo, result.stable.hi).intersect(
        Interval.at_least(cfg.v_min + margin)
    )
    return HydacBounds(cfg, result.upper_bound, result.stable, operating)
