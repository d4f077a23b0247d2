"""Pump strategy synthesis: permissive constraints and optimal schedules.

A permissive strategy is one quantifier-free conjunction over the entry
level w0 and the per-slot switch times t_on/t_off: every satisfying
point keeps all realised trajectories inside the energy bounds and
steers the end-of-cycle window back into the stable interval.  Concrete
schedules are then picked by minimising the cycle-average oil level, a
quadratic function of the switch times, with projected gradient descent
from many feasible starts; the final point is repaired onto the
constraint polytope exactly and the reported mean is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import lp
from .casestudy import CYCLE_SECONDS, SLOT_SECONDS, Slot
from .intervals import Interval, fmt_rat, rat
from .linarith import Atom, LinearTerm, Rel, Variable, conj_formula

W0 = Variable("w0", "energy")


class StrategyError(Exception):
    pass


# ---------------------------------------------------------------------------
# quadratic forms over named variables (exact, compiled to floats on demand)
# ---------------------------------------------------------------------------


class QuadForm:
    """const + sum lin[v]*v + sum quad[(u,v)]*u*v with rational coefficients."""

    __slots__ = ("const", "lin", "quad")

    def __init__(self, const=Fraction(0), lin=None, quad=None):
        self.const = const
        self.lin: Dict[Variable, Fraction] = lin or {}
        self.quad: Dict[Tuple[Variable, Variable], Fraction] = quad or {}

    @staticmethod
    def of_linear(term: "Lin") -> "QuadForm":
        return QuadForm(term.const, dict(term.lin))

    def add(self, other: "QuadForm") -> "QuadForm":
        lin = dict(self.lin)
        for v, c in other.lin.items():
            lin[v] = lin.get(v, Fraction(0)) + c
        quad = dict(self.quad)
        for k, c in other.quad.items():
            quad[k] = quad.get(k, Fraction(0)) + c
        return QuadForm(self.const + other.const, lin, quad)

    def scale(self, k) -> "QuadForm":
        k = rat(k)
        return QuadForm(
            self.const * k,
            {v: c * k for v, c in self.lin.items()},
            {p: c * k for p, c in self.quad.items()},
        )

    def evaluate(self, point: Dict[Variable, Fraction]) -> Fraction:
        total = self.const
        for v, c in self.lin.items():
            total += c * point[v]
        for (u, v), c in self.quad.items():
            total += c * point[u] * point[v]
        return total

    def compile(self, order: Sequence[Variable]):
        """(H, g, c) floats with H symmetric: f(x) = c + g.x + 0.5 x'Hx."""
        idx = {v: i for i, v in enumerate(order)}
        n = len(order)
        H = np.zeros((n, n))
        g = np.zeros(n)
        for v, coef in self.lin.items():
            g[idx[v]] = float(coef)
        for (u, v), coef in self.quad.items():
            i, j = idx[u], idx[v]
            if i == j:
                H[i, i] += 2.0 * float(coef)
            else:
                H[i, j] += float(coef)
                H[j, i] += float(coef)
        return H, g, float(self.const)


class Lin:
    """Lightweight linear expression used while assembling the objective."""

    __slots__ = ("const", "lin")

    def __init__(self, const=Fraction(0), lin=None):
        self.const = rat(const)
        self.lin: Dict[Variable, Fraction] = lin or {}

    @staticmethod
    def var(v: Variable, k=1) -> "Lin":
        return Lin(0, {v: rat(k)})

    def add(self, other: "Lin") -> "Lin":
        lin = dict(self.lin)
        for v, c in other.lin.items():
            lin[v] = lin.get(v, Fraction(0)) + c
        return Lin(self.const + other.const, lin)

    def add_const(self, k) -> "Lin":
        return Lin(self.const + rat(k), dict(self.lin))

    def scale(self, k) -> "Lin":
        k = rat(k)
        return Lin(self.const * k, {v: c * k for v, c in self.lin.items()})

    def sub(self, other: "Lin") -> "Lin":
        return self.add(other.scale(-1))

    def mul(self, other: "Lin") -> QuadForm:
        quad: Dict[Tuple[Variable, Variable], Fraction] = {}
        lin: Dict[Variable, Fraction] = {}
        for v, c in self.lin.items():
            if other.const:
                lin[v] = lin.get(v, Fraction(0)) + c * other.const
        for v, c in other.lin.items():
            if self.const:
                lin[v] = lin.get(v, Fraction(0)) + c * self.const
        for u, cu in self.lin.items():
            for v, cv in other.lin.items():
                key = (u, v) if u.name <= v.name else (v, u)
                quad[key] = quad.get(key, Fraction(0)) + cu * cv
        return QuadForm(self.const * other.const, lin, quad)

    def to_term(self) -> LinearTerm:
        return LinearTerm.build(self.lin, self.const)


# ---------------------------------------------------------------------------
# permissive strategies
# ---------------------------------------------------------------------------


@dataclass
class PermissiveStrategy:
    """All safe switch-time choices for one machine cycle, as a conjunction."""

    slots: List[Slot]
    energy: Interval
    stable: Interval
    constraint_atoms: List[Atom]
    time_vars: List[Tuple[int, Variable, Variable]]  # (slot index, t_on, t_off)
    nominal_mean: QuadForm
    worst_mean: QuadForm
    uncertain: bool

    @property
    def constraint(self):
        return conj_formula(self.constraint_atoms)

    def dump(self) -> str:
        return str(self.constraint)

    def variables(self) -> List[Variable]:
        out = [W0]
        for _, a, b in self.time_vars:
            out.extend([a, b])
        return out

    def satisfied_by(self, w0: Fraction, times: Dict[Variable, Fraction]) -> bool:
        point = {W0: w0, **times}
        return all(a.evaluate(point) for a in self.constraint_atoms)

    def feasible_for(self, w0) -> bool:
        pinned = _pin_w0(self.constraint_atoms, rat(w0))
        if pinned is None:
            return False
        return lp.feasible(pinned).is_feasible


def _pin_w0(atoms: Sequence[Atom], w0: Fraction) -> Optional[List[Atom]]:
    out = []
    for a in atoms:
        na = Atom.make(a.term.substitute(W0, LinearTerm.const(w0)), a.rel)
        triv = na.is_trivial()
        if triv is False:
            return None
        if triv is None:
            out.append(na)
    return out


def permissive_strategy(
    slots: Sequence[Slot],
    energy: Interval,
    stable: Interval,
    end_target: Optional[Interval] = None,
) -> PermissiveStrategy:
    """Constraint over (w0, t_on_i, t_off_i) keeping every realised
    trajectory inside ``energy`` and the end-of-cycle window inside
    ``end_target`` (the stable interval by default).

    Level bounds are imposed at slot starts, both pump switches and slot
    ends; trajectories are piecewise linear, so that covers the extrema.
    """
    target = stable if end_target is None else end_target
    atoms: List[Atom] = []
    time_vars: List[Tuple[int, Variable, Variable]] = []
    if target.is_empty() or energy.is_empty():
        return PermissiveStrategy(
            list(slots), energy, stable, [Atom.make(LinearTerm.const(1), Rel.LE)],
            [], QuadForm(), QuadForm(), False,
        )

    level = Lin.var(W0)      # nominal level
    spread = Lin(0)          # accumulated adversarial half-width
    uncertain = any(s.consumption_eps or s.pump_eps for s in slots)

    def bound(lvl: Lin, spr: Lin):
        lo_term = lvl.sub(spr).to_term()
        hi_term = lvl.add(spr).to_term()
        if energy.lo is not None:
            atoms.append(Atom.make(LinearTerm.const(energy.lo) - lo_term, Rel.LE))
        if energy.hi is not None:
            atoms.append(Atom.make(hi_term - LinearTerm.const(energy.hi), Rel.LE))

    bound(level, spread)
    for slot in slots:
        if slot.pump:
            t_on = Variable(f"t_on_{slot.index + 1}", "delay")
            t_off = Variable(f"t_off_{slot.index + 1}", "delay")
            time_vars.append((slot.index, t_on, t_off))
            atoms.append(Atom.make(LinearTerm.var(t_on, -1), Rel.LE))
            atoms.append(Atom.make(LinearTerm.var(t_on) - LinearTerm.var(t_off), Rel.LE))
            atoms.append(Atom.make(LinearTerm.var(t_off) - LinearTerm.const(SLOT_SECONDS), Rel.LE))
            on = Lin.var(t_on)
            dur = Lin.var(t_off).sub(on)
            off_tail = Lin(SLOT_SECONDS).sub(Lin.var(t_off))
            level = level.add(on.scale(slot.consumption_rate))
            spread = spread.add(on.scale(slot.consumption_eps))
            bound(level, spread)
            level = level.add(dur.scale(slot.pump_rate))
            spread = spread.add(dur.scale(slot.pump_eps))
            bound(level, spread)
            level = level.add(off_tail.scale(slot.consumption_rate))
            spread = spread.add(off_tail.scale(slot.consumption_eps))
            bound(level, spread)
        else:
            level = level.add_const(slot.consumption_rate * SLOT_SECONDS)
            spread = spread.add_const(slot.consumption_eps * SLOT_SECONDS)
            bound(level, spread)

    lo_term = level.sub(spread).to_term()
    hi_term = level.add(spread).to_term()
    atoms.append(Atom.make(LinearTerm.const(target.lo) - lo_term, Rel.LE))
    atoms.append(Atom.make(hi_term - LinearTerm.const(target.hi), Rel.LE))

    nominal_mean, worst_mean = _mean_forms(slots, time_vars)
    cleaned = []
    for a in atoms:
        if a.is_trivial() is False:
            cleaned = [Atom.make(LinearTerm.const(1), Rel.LE)]
            break
        if a.is_trivial() is None:
            cleaned.append(a)
    else:
        cleaned = list(dict.fromkeys(cleaned))
    return PermissiveStrategy(
        list(slots), energy, stable, cleaned, time_vars, nominal_mean, worst_mean, uncertain
    )


def _mean_forms(slots: Sequence[Slot], time_vars) -> Tuple[QuadForm, QuadForm]:
    """Cycle-average of the nominal level and of the upper envelope."""
    tv = {k: (a, b) for k, a, b in time_vars}
    level = Lin.var(W0)
    spread = Lin(0)
    integral = QuadForm()
    spread_integral = QuadForm()

    def piece(start: Lin, slope: Fraction, length: Lin) -> QuadForm:
        # integral of a linear piece: start*len + slope*len^2/2
        return start.mul(length).add(length.mul(length).scale(Fraction(slope, 2)))

    for slot in slots:
        if slot.pump:
            t_on, t_off = tv[slot.index]
            on = Lin.var(t_on)
            dur = Lin.var(t_off).sub(on)
            tail = Lin(SLOT_SECONDS).sub(Lin.var(t_off))
            for slope, eps, length in (
                (slot.consumption_rate, slot.consumption_eps, on),
                (slot.pump_rate, slot.pump_eps, dur),
                (slot.consumption_rate, slot.consumption_eps, tail),
            ):
                integral = integral.add(piece(level, slope, length))
                spread_integral = spread_integral.add(piece(spread, eps, length))
                level = level.add(length.scale(slope))
                spread = spread.add(length.scale(eps))
        else:
            length = Lin(SLOT_SECONDS)
            integral = integral.add(piece(level, slot.consumption_rate, length))
            spread_integral = spread_integral.add(piece(spread, slot.consumption_eps, length))
            level = level.add_const(slot.consumption_rate * SLOT_SECONDS)
            spread = spread.add_const(slot.consumption_eps * SLOT_SECONDS)

    horizon = SLOT_SECONDS * len(slots)
    nominal = integral.scale(Fraction(1) / horizon)
    worst = integral.add(spread_integral).scale(Fraction(1) / horizon)
    return nominal, worst


# ---------------------------------------------------------------------------
# optimal schedules
# ---------------------------------------------------------------------------


@dataclass
class ConcreteStrategy:
    """A concrete per-cycle schedule: absolute switch seconds per pump slot."""

    w0: Fraction
    switch_times: List[Tuple[int, Fraction, Fraction]]  # (slot index, on, off)
    predicted_mean_level: Fraction
    nominal_mean_level: Fraction

    def times_by_var(self, ps: PermissiveStrategy) -> Dict[Variable, Fraction]:
        by_slot = {k: (on, off) for k, on, off in self.switch_times}
        out: Dict[Variable, Fraction] = {}
        for k, a, b in ps.time_vars:
            on, off = by_slot[k]
            start = SLOT_SECONDS * k
            out[a] = on - start
            out[b] = off - start
        return out

    def describe(self) -> str:
        lines = [f"w0 = {fmt_rat(self.w0)}"]
        for k, on, off in self.switch_times:
            if on != off:
                lines.append(f"slot {k + 1}: pump on at {fmt_rat(on)} s, off at {fmt_rat(off)} s")
        lines.append(f"predicted mean level = {fmt_rat(self.predicted_mean_level)}")
        return "\n".join(lines)


def optimal_strategy(
    ps: PermissiveStrategy,
    w0,
    seed: int = 0,
    starts: int = 32,
    iterations: int = 260,
    warm: Optional[Dict[Variable, Fraction]] = None,
) -> ConcreteStrategy:
    """Switch times minimising the cycle-average level at the given entry.

    Multi-start projected gradient descent on the quadratic objective
    (worst-case mean when the model is uncertain), followed by an exact
    LP repair onto the constraint polytope and an exact mean evaluation.
    A ``warm`` schedule (say, the optimum of a nearby entry level) joins
    the candidate pool.
    """
    w0 = rat(w0)
    pinned = _pin_w0(ps.constraint_atoms, w0)
    if pinned is None or not lp.feasible(pinned).is_feasible:
        raise StrategyError(f"no safe schedule exists from w0 = {fmt_rat(w0)}")
    order: List[Variable] = []
    for _, a, b in ps.time_vars:
        order.extend([a, b])
    if not order:
        mean = ps.nominal_mean.evaluate({W0: w0})
        worst = ps.worst_mean.evaluate({W0: w0})
        return ConcreteStrategy(w0, [], worst if ps.uncertain else mean, mean)

    objective = ps.worst_mean if ps.uncertain else ps.nominal_mean
    H, g, _ = objective.compile([W0] + order)
    # fold w0 into the linear part
    n = len(order)
    g_t = g[1:] + H[1:, 0] * float(w0)
    H_t = H[1:, 1:]

    A_rows, b_rows = [], []
    var_idx = {v: i for i, v in enumerate(order)}
    for a in pinned:
        row = np.zeros(n)
        for v, c in a.term.coeffs:
            row[var_idx[v]] = float(c)
        A_rows.append(row)
        b_rows.append(-float(a.term.constant))
        if a.rel is Rel.EQ:
            A_rows.append(-row)
            b_rows.append(float(a.term.constant))
    A = np.array(A_rows)
    b = np.array(b_rows)

    rng = np.random.default_rng(seed)
    slot_dur = float(SLOT_SECONDS)
    X = rng.uniform(0.0, slot_dur, size=(starts, n))
    # order each (on, off) pair and include the all-off and all-on corners
    for i in range(0, n, 2):
        lo = np.minimum(X[:, i], X[:, i + 1])
        hi = np.maximum(X[:, i], X[:, i + 1])
        X[:, i], X[:, i + 1] = lo, hi
    X[0] = 0.0
    X[1] = np.tile([0.0, slot_dur], n // 2)

    mu = 1e3
    step = 2e-3
    for it in range(iterations):
        if it == iterations // 2:
            mu = 1e5
            step = 5e-4
        grad = g_t + X @ H_t
        viol = X @ A.T - b
        np.maximum(viol, 0.0, out=viol)
        grad += 2.0 * mu * (viol @ A)
        X -= step * grad
        np.clip(X, 0.0, slot_dur, out=X)
        for i in range(0, n, 2):
            lo = np.minimum(X[:, i], X[:, i + 1])
            hi = np.maximum(X[:, i], X[:, i + 1])
            X[:, i], X[:, i + 1] = lo, hi

    scores = X @ g_t + 0.5 * np.einsum("ij,jk,ik->i", X, H_t, X)
    scores += 1e6 * np.maximum(X @ A.T - b, 0.0).sum(axis=1)
    ranked = np.argsort(scores)

    candidates = [X[int(idx)] for idx in ranked[:3]]
    if warm is not None:
        candidates.insert(0, np.array([float(warm.get(v, 0)) for v in order]))
    best_point: Optional[Dict[Variable, Fraction]] = None
    best_value: Optional[Fraction] = None
    for cand in candidates:
        exact = _repair(pinned, order, cand)
        exact = _polish(objective, pinned, order, exact, w0)
        value = objective.evaluate({W0: w0, **exact})
        if best_value is None or value < best_value:
            best_value, best_point = value, exact

    point = {W0: w0, **best_point}
    nominal = ps.nominal_mean.evaluate(point)
    predicted = ps.worst_mean.evaluate(point) if ps.uncertain else nominal
    switches = []
    for k, a, bvar in ps.time_vars:
        start = SLOT_SECONDS * k
        switches.append((k, start + best_point[a], start + best_point[bvar]))
    return ConcreteStrategy(w0, switches, predicted, nominal)


def _polish(
    objective: QuadForm,
    pinned: Sequence[Atom],
    order: Sequence[Variable],
    start: Dict[Variable, Fraction],
    w0: Fraction,
    max_iters: int = 30,
) -> Dict[Variable, Fraction]:
    """Exact conditional-gradient refinement: repeatedly step from the
    current feasible point toward the LP minimiser of the linearised
    objective, with closed-form exact line search on the quadratic."""
    x = dict(start)
    for _ in range(max_iters):
        grad = _exact_gradient(objective, x, w0, order)
        lin_obj = LinearTerm.build(grad, 0)
        res = lp.optimize(pinned, lin_obj, "min")
        if res.status is not lp.LPStatus.OPTIMAL:
            break
        y = {v: res.witness.get(v, Fraction(0)) for v in order}
        d = {v: y[v] - x[v] for v in order}
        slope = sum(grad[v] * d[v] for v in order)
        if slope >= 0:
            break
        curv = _direction_curvature(objective, d)
        if curv > 0:
            t = -slope / (2 * curv)
            t = Fraction(1) if t > 1 else t
        else:
            # concave along the segment: an endpoint wins, and the far one improves
            t = Fraction(1)
        if t <= 0:
            break
        x = {v: x[v] + t * d[v] for v in order}
        if slope + 2 * curv * t == 0 and t < 1:
            break
    return x


def _exact_gradient(
    objective: QuadForm, x: Dict[Variable, Fraction], w0: Fraction, order: Sequence[Variable]
) -> Dict[Variable, Fraction]:
    full = {W0: w0, **x}
    grad = {v: objective.lin.get(v, Fraction(0)) for v in order}
    for (u, v), c in objective.quad.items():
        if u == v:
            if u in grad:
                grad[u] += 2 * c * full[u]
        else:
            if u in grad and v in full:
                grad[u] += c * full[v]
            if v in grad and u in full:
                grad[v] += c * full[u]
    return grad


def _direction_curvature(objective: QuadForm, d: Dict[Variable, Fraction]) -> Fraction:
    total = Fraction(0)
    for (u, v), c in objective.quad.items():
        du = d.get(u, Fraction(0))
        dv = d.get(v, Fraction(0))
        if du and dv:
            total += c * du * dv
    return total


def _repair(
    pinned: Sequence[Atom], order: Sequence[Variable], candidate: np.ndarray
) -> Dict[Variable, Fraction]:
    """Exact nearest feasible point (L1) to the float candidate."""
    grid = 10**6
    snapped = {v: Fraction(round(candidate[i] * grid), grid) for i, v in enumerate(order)}
    if all(a.evaluate(snapped) for a in pinned):
        return snapped
    atoms: List[Atom] = list(pinned)
    objective = LinearTerm.const(0)
    shift: Dict[Variable, Tuple[Variable, Variable]] = {}
    for v in order:
        up = Variable(f"_up_{v.name}", "auxiliary")
        dn = Variable(f"_dn_{v.name}", "auxiliary")
        shift[v] = (up, dn)
        atoms.append(Atom.make(LinearTerm.var(up, -1), Rel.LE))
        atoms.append(Atom.make(LinearTerm.var(dn, -1), Rel.LE))
        # v = snapped + up - dn
        atoms = [
            Atom.make(
                a.term.substitute(
                    v,
                    LinearTerm.build({up: 1, dn: -1}, snapped[v]),
                ),
                a.rel,
            )
            if a.term.coeff(v) != 0
            else a
            for a in atoms
        ]
        objective = objective + LinearTerm.var(up) + LinearTerm.var(dn)
    res = lp.optimize(atoms, objective, "min")
    if res.status is not lp.LPStatus.OPTIMAL:
        raise StrategyError("schedule repair failed unexpectedly")
    out = {}
    for v in order:
        up, dn = shift[v]
        out[v] = snapped[v] + res.witness.get(up, Fraction(0)) - res.witness.get(dn, Fraction(0))
    return out


# ---------------------------------------------------------------------------
# strategy families and worst-case means
# ---------------------------------------------------------------------------


@dataclass
class StrategyFamily:
    """Optimal schedules on a grid of entry levels (one cycle each)."""

    ps: PermissiveStrategy
    entries: List[ConcreteStrategy] = field(default_factory=list)

    def worst_mean(self) -> Fraction:
        return max(s.predicted_mean_level for s in self.entries)

    def lookup(self, w0: Fraction) -> ConcreteStrategy:
        best = min(self.entries, key=lambda s: abs(s.w0 - w0))
        return best


def schedule_for(ps: PermissiveStrategy, fam: StrategyFamily, w0: Fraction) -> ConcreteStrategy:
    """The family schedule nearest to w0, exactly revalidated at w0 (and
    repaired onto the polytope when the neighbouring schedule misses)."""
    near = fam.lookup(w0)
    times = near.times_by_var(ps)
    if ps.satisfied_by(w0, times):
        point = {W0: w0, **times}
        nominal = ps.nominal_mean.evaluate(point)
        predicted = ps.worst_mean.evaluate(point) if ps.uncertain else nominal
        switches = [
            (k, SLOT_SECONDS * k + times[a], SLOT_SECONDS * k + times[b])
            for k, a, b in ps.time_vars
        ]
        return ConcreteStrategy(w0, switches, predicted, nominal)
    return optimal_strategy(ps, w0, starts=6, iterations=120)


def make_controller(
    slots: Sequence[Slot],
    energy: Interval,
    operating: Interval,
    global_safety: Interval,
    fam: Optional[StrategyFamily] = None,
    seed: int = 0,
) -> Callable[[int, Fraction], ConcreteStrategy]:
    """A per-cycle strategy source.

    Inside the operating range the per-level optimal schedule applies
    (enforcing the synthesised energy bound); outside it, a transient
    schedule under the global safety bounds steers the level into the
    operating range, again with minimal mean.
    """
    steady = permissive_strategy(slots, energy, operating)
    transient = permissive_strategy(slots, global_safety, operating)

    def controller(cycle: int, w: Fraction) -> ConcreteStrategy:
        if operating.contains(w):
            if fam is not None:
                return schedule_for(steady, fam, w)
            return optimal_strategy(steady, w, seed=seed, starts=8, iterations=150)
        return optimal_strategy(transient, w, seed=seed, starts=12, iterations=200)

    return controller


def strategy_family(
    ps: PermissiveStrategy,
    window: Interval,
    grid_step=Fraction(1, 100),
    seed: int = 0,
    anchor_every: int = 25,
    starts: int = 32,
    quick_starts: int = 6,
) -> StrategyFamily:
    """Per-entry optimal schedules over a grid of the stable window.

    Full multi-start optimisation at anchor points, fewer starts in
    between (entry levels close together have nearly identical optimal
    schedules, and every reported point is exactly repaired anyway).
    """
    step = rat(grid_step)
    fam = StrategyFamily(ps)
    w = window.lo
    count = 0
    warm: Optional[Dict[Variable, Fraction]] = None
    while w <= window.hi:
        anchor = count % anchor_every == 0
        entry = optimal_strategy(
            ps, w, seed=seed,
            starts=starts if anchor else quick_starts,
            iterations=260 if anchor else 120,
            warm=warm,
        )
        fam.entries.append(entry)
        warm = entry.times_by_var(ps)
        w += step
        count += 1
    if not fam.entries or fam.entries[-1].w0 != window.hi:
        fam.entries.append(optimal_strategy(ps, window.hi, seed=seed, starts=starts, warm=warm))
    return fam
