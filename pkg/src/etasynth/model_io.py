"""Model file loading and dumping.

Files are YAML documents, but scalars are taken verbatim from the node
tree so numeric literals parse exactly as rationals: plain integers,
decimal literals such as ``5.84`` and quotients such as ``5/3`` are all
allowed.  Errors are reported with the line of the offending node.

Top-level fields: ``clocks``, ``macro_states``, ``initial`` and
``transitions`` (each with ``from``, ``to``, ``path``); a path lists
``states`` ``{id, rate, eps?, invariant?}`` and ``edges``
``{guard?, update?, delta?, resets?}``.  ``default_invariant`` supplies
an invariant for every state that does not override it.  A file may
instead give ``preset: h1|h2`` plus options, which the case-study
loader expands into the corresponding pump model.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .automata import (
    ClockConstraint,
    EnergyTimedPath,
    EtpState,
    EtpTransition,
    ModelError,
    SETA,
)
from .intervals import fmt_rat


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


# -- YAML node helpers -------------------------------------------------------


def _line(node) -> int:
    return node.start_mark.line + 1


def _as_map(node, what: str) -> Dict[str, Any]:
    if not isinstance(node, yaml.MappingNode):
        raise ModelSyntaxError(f"{what} must be a mapping", _line(node))
    out = {}
    for k, v in node.value:
        if not isinstance(k, yaml.ScalarNode):
            raise ModelSyntaxError(f"{what}: keys must be scalars", _line(k))
        out[k.value] = v
    return out


def _as_list(node, what: str) -> List[Any]:
    if not isinstance(node, yaml.SequenceNode):
        raise ModelSyntaxError(f"{what} must be a list", _line(node))
    return list(node.value)


def _as_str(node, what: str) -> str:
    if not isinstance(node, yaml.ScalarNode):
        raise ModelSyntaxError(f"{what} must be a scalar", _line(node))
    return str(node.value)


def _as_rat(node, what: str) -> Fraction:
    text = _as_str(node, what).strip()
    try:
        if "/" in text:
            num, _, den = text.partition("/")
            return Fraction(num.strip()) / Fraction(den.strip())
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ModelSyntaxError(f"{what}: cannot parse {text!r} as an exact rational", _line(node)) from exc


def parse_document(text: str) -> Tuple[Dict[str, Any], Any]:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ModelSyntaxError(str(exc).splitlines()[0], mark.line + 1 if mark else None)
    if root is None:
        raise ModelSyntaxError("empty model file")
    return _as_map(root, "model"), root


def document_fields(path_or_text: str, is_text: bool = False) -> Dict[str, Any]:
    text = path_or_text if is_text else open(path_or_text, "r", encoding="utf-8").read()
    fields, _ = parse_document(text)
    return fields


# -- SETA loading ------------------------------------------------------------


def load_seta_text(text: str, name: str = "model") -> SETA:
    fields, _ = parse_document(text)
    if "preset" in fields:
        raise ModelSyntaxError(
            "this file uses a case-study preset; load it with the hydac loader",
            _line(fields["preset"]),
        )
    for required in ("clocks", "macro_states", "initial", "transitions"):
        if required not in fields:
            raise ModelSyntaxError(f"missing top-level field {required!r}")

    clocks = frozenset(_as_str(n, "clock name") for n in _as_list(fields["clocks"], "clocks"))
    macro_states = frozenset(
        _as_str(n, "macro-state name") for n in _as_list(fields["macro_states"], "macro_states")
    )
    initial = _as_str(fields["initial"], "initial")
    default_inv = None
    if "default_invariant" in fields:
        node = fields["default_invariant"]
        try:
            default_inv = ClockConstraint.parse(_as_str(node, "default_invariant"))
        except ModelError as exc:
            raise ModelSyntaxError(str(exc), _line(node))
    model_name = _as_str(fields["name"], "name") if "name" in fields else name

    path_of: Dict[Tuple[str, str], EnergyTimedPath] = {}
    for tnode in _as_list(fields["transitions"], "transitions"):
        tmap = _as_map(tnode, "transition")
        for required in ("from", "to", "path"):
            if required not in tmap:
                raise ModelSyntaxError(f"transition is missing {required!r}", _line(tnode))
        src = _as_str(tmap["from"], "from")
        dst = _as_str(tmap["to"], "to")
        if (src, dst) in path_of:
            raise ModelSyntaxError(f"duplicate macro-transition {src}->{dst}", _line(tnode))
        path_of[(src, dst)] = _load_path(tmap["path"], clocks, default_inv)

    return SETA(macro_states=macro_states, initial=initial, path_of=path_of, name=model_name)


def load_seta(path: str) -> SETA:
    with open(path, "r", encoding="utf-8") as fh:
        return load_seta_text(fh.read(), name=path)


def _load_path(node, clocks, default_inv) -> EnergyTimedPath:
    pmap = _as_map(node, "path")
    if "states" not in pmap or "edges" not in pmap:
        raise ModelSyntaxError("path needs 'states' and 'edges'", _line(node))
    states: List[EtpState] = []
    for snode in _as_list(pmap["states"], "states"):
        smap = _as_map(snode, "state")
        if "id" not in smap or "rate" not in smap:
            raise ModelSyntaxError("state needs 'id' and 'rate'", _line(snode))
        inv = default_inv if default_inv is not None else ClockConstraint.true()
        if "invariant" in smap:
            try:
                inv = ClockConstraint.parse(_as_str(smap["invariant"], "invariant"))
            except ModelError as exc:
                raise ModelSyntaxError(str(exc), _line(smap["invariant"]))
        eps = _as_rat(smap["eps"], "eps") if "eps" in smap else Fraction(0)
        try:
            states.append(
                EtpState(
                    id=_as_str(smap["id"], "state id"),
                    rate=_as_rat(smap["rate"], "rate"),
                    rate_imprecision=eps,
                    invariant=inv,
                )
            )
        except ModelError as exc:
            raise ModelSyntaxError(str(exc), _line(snode))
    edges: List[EtpTransition] = []
    for enode in _as_list(pmap["edges"], "edges"):
        emap = _as_map(enode, "edge")
        guard = ClockConstraint.true()
        if "guard" in emap:
            try:
                guard = ClockConstraint.parse(_as_str(emap["guard"], "guard"))
            except ModelError as exc:
                raise ModelSyntaxError(str(exc), _line(emap["guard"]))
        update = _as_rat(emap["update"], "update") if "update" in emap else Fraction(0)
        delta = _as_rat(emap["delta"], "delta") if "delta" in emap else Fraction(0)
        resets = frozenset(
            _as_str(r, "reset clock") for r in _as_list(emap["resets"], "resets")
        ) if "resets" in emap else frozenset()
        try:
            edges.append(EtpTransition(guard=guard, update=update, update_imprecision=delta, resets=resets))
        except ModelError as exc:
            raise ModelSyntaxError(str(exc), _line(enode))
    try:
        return EnergyTimedPath(states=tuple(states), transitions=tuple(edges), clocks=clocks)
    except ModelError as exc:
        raise ModelSyntaxError(str(exc), _line(node))


# -- dumping -----------------------------------------------------------------


def dump_seta(seta: SETA) -> str:
    """Serialise a SETA back to the model format (exact rationals)."""
    lines: List[str] = []
    lines.append(f"name: {seta.name}")
    all_clocks = sorted({c for p in seta.path_of.values() for c in p.clocks})
    lines.append(f"clocks: [{', '.join(all_clocks)}]")
    lines.append(f"macro_states: [{', '.join(sorted(seta.macro_states))}]")
    lines.append(f"initial: {seta.initial}")
    lines.append("transitions:")
    for (src, dst), path in sorted(seta.path_of.items()):
        lines.append(f"  - from: {src}")
        lines.append(f"    to: {dst}")
        lines.append("    path:")
        lines.append("      states:")
        for s in path.states:
            parts = [f"id: {s.id}", f"rate: {_num(s.rate)}"]
            if s.rate_imprecision:
                parts.append(f"eps: {_num(s.rate_imprecision)}")
            if s.invariant.conjuncts:
                parts.append(f'invariant: "{s.invariant}"')
            lines.append("        - {" + ", ".join(parts) + "}")
        lines.append("      edges:")
        for t in path.transitions:
            parts = []
            if t.guard.conjuncts:
                parts.append(f'guard: "{t.guard}"')
            if t.update:
                parts.append(f"update: {_num(t.update)}")
            if t.update_imprecision:
                parts.append(f"delta: {_num(t.update_imprecision)}")
            if t.resets:
                parts.append(f"resets: [{', '.join(sorted(t.resets))}]")
            lines.append("        - {" + ", ".join(parts) + "}" if parts else "        - {}")
    return "\n".join(lines) + "\n"


def _num(q: Fraction) -> str:
    s = fmt_rat(q)
    return s if "/" not in s else f'"{s}"'
