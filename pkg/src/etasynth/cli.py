"""Command-line front end.

Subcommands: ``check`` (infinite-run decision), ``fixpoint`` (stable
interval of a cycle), ``synth-ub`` (minimal safe upper bound),
``strategy``, ``simulate`` and the ``hydac`` preset pipeline.  Exit
codes: 0 success/yes, 1 no/no-solution, 2 input error, 3 resource cap.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Tuple

import click

from . import model_io, qe
from .automata import ModelError, SETA
from .casestudy import (
    HydacConfig,
    build_hydac,
    report as traj_report,
    simulate,
    synthesize_bounds,
)
from .intervals import Interval, fmt_rat, rat
from .linarith import LinarithError
from .qe import ResourceCapExceeded
from .strategies import (
    StrategyError,
    make_controller,
    optimal_strategy,
    permissive_strategy,
    strategy_family,
)
from .synthesis import (
    SynthesisError,
    UnfoldCapExceeded,
    decide_infinite_run,
    minimal_upper_bound,
)

EXIT_OK = 0
EXIT_NO = 1
EXIT_INPUT = 2
EXIT_RESOURCE = 3


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_interval(text: str) -> Interval:
    try:
        lo, _, hi = text.partition(",")
        return Interval.closed(rat(lo.strip()), rat(hi.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"expected LO,HI rationals, got {text!r}") from exc


def _load_seta(path: str) -> SETA:
    try:
        return model_io.load_seta(path)
    except FileNotFoundError:
        _fail(f"model file not found: {path}", EXIT_INPUT)
    except ModelError as exc:
        _fail(str(exc), EXIT_INPUT)


@click.group()
def main():
    """Energy timed automata: decisions, bound synthesis and pump strategies."""


@main.command()
@click.option("--model", required=True, help="model file")
@click.option("--init", "init_state", default=None, help="initial macro-state")
@click.option("--interval", required=True, help="initial energy interval LO,HI")
@click.option("--energy", required=True, help="energy constraint LO,HI")
@click.option("--max-unfold", default=10_000, show_default=True)
@click.option("--max-disjuncts", default=qe.DEFAULT_DISJUNCT_CAP, show_default=True)
def check(model, init_state, interval, energy, max_unfold, max_disjuncts):
    """Decide the energy-constrained infinite-run problem."""
    seta = _load_seta(model)
    try:
        decision = decide_infinite_run(
            seta, init_state, _parse_interval(interval), _parse_interval(energy),
            max_unfold=max_unfold,
        )
    except UnfoldCapExceeded as exc:
        _fail(str(exc), EXIT_RESOURCE)
    except (SynthesisError, ModelError) as exc:
        _fail(str(exc), EXIT_INPUT)
    if decision.satisfiable:
        w = decision.witness
        click.echo("tt")
        click.echo(f"witness: cycle at {w.entry_state}, entry {w.entry_interval}, stable {w.stable}")
        sys.exit(EXIT_OK)
    click.echo("ff")
    sys.exit(EXIT_NO)


@main.command()
@click.option("--model", required=True)
@click.option("--cycle", "cycle_state", required=True, help="a macro-state on the cycle")
@click.option("--energy", required=True, help="energy constraint LO,HI")
def fixpoint(model, cycle_state, energy):
    """Greatest stable interval of the cycle through a macro-state."""
    from .automata import cycle_through
    from .relations import build_binary, compose_chain, greatest_fixpoint

    seta = _load_seta(model)
    E = _parse_interval(energy)
    edges = cycle_through(seta, cycle_state)
    if edges is None:
        _fail(f"macro-state {cycle_state!r} lies on no cycle", EXIT_INPUT)
    try:
        rel = compose_chain([build_binary(seta.path_of[e], E) for e in edges])
        nu = greatest_fixpoint(rel, E)
    except (ModelError, LinarithError) as exc:
        _fail(str(exc), EXIT_INPUT)
    click.echo(f"nu = {nu}")
    sys.exit(EXIT_OK if not nu.is_empty() else EXIT_NO)


@main.command(name="synth-ub")
@click.option("--model", required=True)
@click.option("--lower", required=True, help="lower energy bound L")
@click.option("--w0", default=None, help="initial energy level (optional)")
def synth_ub(model, lower, w0):
    """Minimal safe upper bound for a depth-1 flat model."""
    seta = _load_seta(model)
    try:
        result = minimal_upper_bound(seta, rat(lower), None if w0 is None else rat(w0))
    except (SynthesisError, ModelError) as exc:
        _fail(str(exc), EXIT_INPUT)
    if not result.found():
        click.echo("no bound exists")
        sys.exit(EXIT_NO)
    click.echo(f"U = {fmt_rat(result.upper_bound)}")
    click.echo(f"stable = {result.stable}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--model", required=True, help="case-study preset model file")
@click.option("--w0", default=None, help="entry level: concrete schedule instead of the constraint")
@click.option("--seed", default=0, show_default=True)
def strategy(model, w0, seed):
    """Permissive strategy constraint (or schedule for --w0) of a preset model."""
    try:
        cfg = load_hydac_model(model)
    except FileNotFoundError:
        _fail(f"model file not found: {model}", EXIT_INPUT)
    except ModelError as exc:
        _fail(str(exc), EXIT_INPUT)
    bounds = synthesize_bounds(cfg)
    _, slots = build_hydac(cfg)
    ps = permissive_strategy(slots, bounds.energy, bounds.operating)
    if w0 is None:
        click.echo(ps.dump())
        sys.exit(EXIT_OK)
    try:
        s = optimal_strategy(ps, rat(w0), seed=seed)
    except StrategyError as exc:
        click.echo(f"no schedule: {exc}")
        sys.exit(EXIT_NO)
    click.echo(s.describe())
    sys.exit(EXIT_OK)


@main.command(name="simulate")
@click.option("--model", required=True, help="case-study preset model file")
@click.option("--w0", default="8.3", show_default=True)
@click.option("--duration", default="200", show_default=True)
@click.option("--mode", type=click.Choice(["nominal", "envelope", "adversarial"]), default="nominal",
              show_default=True)
@click.option("--out", default=None, help="trajectory CSV path")
@click.option("--plot", default=None, help="trajectory figure path")
@click.option("--seed", default=0, show_default=True)
def simulate_cmd(model, w0, duration, mode, out, plot, seed):
    """Simulate a preset model's controller; emit CSV (and a figure)."""
    try:
        cfg = load_hydac_model(model)
    except FileNotFoundError:
        _fail(f"model file not found: {model}", EXIT_INPUT)
    except ModelError as exc:
        _fail(str(exc), EXIT_INPUT)
    bounds = synthesize_bounds(cfg)
    _, slots = build_hydac(cfg)
    controller = make_controller(slots, bounds.energy, bounds.operating, cfg.safety, seed=seed)
    try:
        traj = simulate(cfg, controller, rat(w0), rat(duration), mode=mode, seed=seed)
    except (ModelError, StrategyError) as exc:
        _fail(str(exc), EXIT_INPUT)
    click.echo(traj_report(traj, "summary"))
    if out:
        emit_plot_data(traj, out)
    if plot:
        from .plots import plot_trajectory

        plot_trajectory(traj, plot, bounds=cfg.safety, band=bounds.operating, title=cfg.label())
    sys.exit(EXIT_OK if traj.violation is None else EXIT_NO)


def _hydac_config(variant: str, eps: str, lower: Optional[str], upper: Optional[str]) -> HydacConfig:
    kwargs = {"variant": variant, "epsilon": rat(eps)}
    if lower is not None:
        kwargs["v_min"] = rat(lower)
    if upper is not None:
        kwargs["v_max"] = rat(upper)
    try:
        return HydacConfig(**kwargs)
    except ModelError as exc:
        _fail(str(exc), EXIT_INPUT)


def load_hydac_model(path: str) -> HydacConfig:
    """HydacConfig from a model file with the ``preset: h1|h2`` shorthand."""
    fields = model_io.document_fields(path)
    if "preset" not in fields:
        raise ModelError(f"{path}: not a case-study preset file")
    get = lambda key: fields[key].value if key in fields else None
    return HydacConfig(
        variant=str(fields["preset"].value),
        epsilon=rat(get("eps") or 0),
        v_min=rat(get("v_min") or "4.9"),
        v_max=rat(get("v_max") or "25.1"),
    )


@main.group()
@click.option("--variant", type=click.Choice(["h1", "h2"]), default=None)
@click.option("--model", default=None, help="preset model file instead of --variant")
@click.option("--eps", default="0", show_default=True, help="rate noise half-width")
@click.option("--lower", default=None, help="lower safety bound (default 4.9)")
@click.option("--upper", default=None, help="upper safety bound (default 25.1)")
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def hydac(ctx, variant, model, eps, lower, upper, seed):
    """Oil pump case-study pipeline (presets h1 / h2)."""
    if model is not None:
        try:
            cfg = load_hydac_model(model)
        except FileNotFoundError:
            _fail(f"model file not found: {model}", EXIT_INPUT)
        except ModelError as exc:
            _fail(str(exc), EXIT_INPUT)
    elif variant is not None:
        cfg = _hydac_config(variant, eps, lower, upper)
    else:
        _fail("pass --variant h1|h2 or --model preset-file", EXIT_INPUT)
    ctx.obj = {"cfg": cfg, "seed": seed}


@hydac.command(name="synth-ub")
@click.pass_context
def hydac_synth_ub(ctx):
    """Minimal safe upper bound and stable operating range."""
    cfg = ctx.obj["cfg"]
    bounds = synthesize_bounds(cfg)
    click.echo(f"U = {fmt_rat(bounds.upper_bound)}")
    click.echo(f"stable = {bounds.stable}")
    click.echo(f"operating = {bounds.operating}")
    sys.exit(EXIT_OK)


@hydac.command(name="strategy")
@click.option("--w0", default=None, help="entry level: concrete schedule instead of the constraint")
@click.option("--out", default=None, help="write the strategy family CSV here")
@click.option("--plot", default=None, help="render the family to this image file")
@click.option("--grid", default="0.1", show_default=True, help="family grid step")
@click.pass_context
def hydac_strategy(ctx, w0, out, plot, grid):
    """Permissive strategy constraint, or the optimal schedule for --w0."""
    cfg = ctx.obj["cfg"]
    bounds = synthesize_bounds(cfg)
    _, slots = build_hydac(cfg)
    ps = permissive_strategy(slots, bounds.energy, bounds.operating)
    if w0 is not None:
        try:
            s = optimal_strategy(ps, rat(w0), seed=ctx.obj["seed"])
        except StrategyError as exc:
            click.echo(f"no schedule: {exc}")
            sys.exit(EXIT_NO)
        click.echo(s.describe())
        sys.exit(EXIT_OK)
    if out or plot:
        fam = strategy_family(ps, bounds.operating, grid_step=rat(grid), seed=ctx.obj["seed"])
        if out:
            emit_plot_data(fam, out)
            click.echo(f"strategy family written to {out}")
        if plot:
            from .plots import plot_strategy_family

            plot_strategy_family(fam.entries, plot, title=cfg.label())
            click.echo(f"figure written to {plot}")
        sys.exit(EXIT_OK)
    click.echo(ps.dump())
    sys.exit(EXIT_OK)


@hydac.command(name="simulate")
@click.option("--w0", default="8.3", show_default=True)
@click.option("--duration", default="200", show_default=True)
@click.option("--mode", type=click.Choice(["nominal", "envelope", "adversarial"]), default="nominal",
              show_default=True)
@click.option("--out", default=None, help="trajectory CSV path")
@click.option("--plot", default=None, help="trajectory figure path")
@click.pass_context
def hydac_simulate(ctx, w0, duration, mode, out, plot):
    """Simulate the synthesized controller and emit CSV (and a figure)."""
    cfg = ctx.obj["cfg"]
    seed = ctx.obj["seed"]
    bounds = synthesize_bounds(cfg)
    _, slots = build_hydac(cfg)
    controller = make_controller(slots, bounds.energy, bounds.operating, cfg.safety, seed=seed)
    try:
        traj = simulate(cfg, controller, rat(w0), rat(duration), mode=mode, seed=seed)
    except (ModelError, StrategyError) as exc:
        _fail(str(exc), EXIT_INPUT)
    click.echo(traj_report(traj, "summary"))
    if out:
        emit_plot_data(traj, out)
        click.echo(f"trajectory written to {out}")
    if plot:
        from .plots import plot_trajectory

        plot_trajectory(traj, plot, bounds=cfg.safety, band=bounds.operating, title=cfg.label())
        click.echo(f"figure written to {plot}")
    sys.exit(EXIT_OK if traj.violation is None else EXIT_NO)


@hydac.command(name="report")
@click.option("--outdir", required=True, type=click.Path())
@click.option("--grid", default="0.1", show_default=True, help="strategy family grid step")
@click.option("--w0", default="8.3", show_default=True)
@click.option("--duration", default="200", show_default=True)
@click.pass_context
def hydac_report(ctx, outdir, grid, w0, duration):
    """Bounds, worst-case mean and a simulation, with CSVs and figures."""
    from .plots import plot_strategy_family, plot_trajectory

    cfg = ctx.obj["cfg"]
    seed = ctx.obj["seed"]
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    bounds = synthesize_bounds(cfg)
    _, slots = build_hydac(cfg)
    ps = permissive_strategy(slots, bounds.energy, bounds.operating)
    fam = strategy_family(ps, bounds.operating, grid_step=rat(grid), seed=seed)
    worst = fam.worst_mean()
    controller = make_controller(slots, bounds.energy, bounds.operating, cfg.safety, fam=fam, seed=seed)
    traj = simulate(cfg, controller, rat(w0), rat(duration), mode="envelope", seed=seed)

    (out / "bounds.csv").write_text(
        "variant,lower,upper,stable_lo,stable_hi,operating_lo,operating_hi,worst_mean\n"
        + ",".join(
            [
                cfg.label(),
                fmt_rat(cfg.v_min),
                fmt_rat(bounds.upper_bound),
                fmt_rat(bounds.stable.lo),
                fmt_rat(bounds.stable.hi),
                fmt_rat(bounds.operating.lo),
                fmt_rat(bounds.operating.hi),
                fmt_rat(worst),
            ]
        )
        + "\n"
    )
    emit_plot_data(fam, str(out / "strategies.csv"))
    emit_plot_data(traj, str(out / "trajectory.csv"))
    plot_strategy_family(fam.entries, str(out / "strategies.png"), title=cfg.label())
    plot_trajectory(traj, str(out / "trajectory.png"), bounds=cfg.safety,
                    band=bounds.operating, title=cfg.label())
    click.echo(
        f"{cfg.label()}: [L;U] = [{fmt_rat(cfg.v_min)};{fmt_rat(bounds.upper_bound)}]"
        f"  operating = {bounds.operating}  worst mean = {fmt_rat(worst)}"
    )
    click.echo(
        f"simulation {fmt_rat(rat(duration))} s from {fmt_rat(rat(w0))} l: "
        f"accumulated = {fmt_rat(traj.accumulated_volume)} l, mean = {fmt_rat(traj.mean_level)} l"
    )
    click.echo(f"report files in {out}")
    sys.exit(EXIT_OK)


def emit_plot_data(result, path: str) -> None:
    """CSV suitable for external plotting: a trajectory or a strategy family."""
    target = Path(path)
    try:
        if hasattr(result, "breakpoints"):
            target.write_text(traj_report(result, "csv"))
            return
        entries = getattr(result, "entries", result)
        lines = []
        n_pairs = max((len(s.switch_times) for s in entries), default=0)
        header = ["w0"]
        for i in range(n_pairs):
            header.extend([f"on_{i + 1}", f"off_{i + 1}"])
        lines.append(",".join(header))
        for s in entries:
            row = [fmt_rat(s.w0)]
            for _, on, off in s.switch_times:
                row.extend([fmt_rat(on), fmt_rat(off)])
            row.extend([""] * (1 + 2 * n_pairs - len(row)))
            lines.append(",".join(row))
        target.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        _fail(f"cannot write {path}: {exc}", EXIT_INPUT)


if __name__ == "__main__":
    main()
