"""Turn document declarations into runnable systems, and compose wirings symbolically."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..algebra_general import OpenSystem, apply_operadic
from ..algebra_linear import LinearOpenSystem, apply_operadic_linear, to_general
from ..core_types import TypedFiniteSet, coproduct
from ..simulator import InputSignal, SimConfig, SimulationError
from ..wiring import XOUT, flatten_operadic, tensor_boxes, xin, yout
from .document import (
    DocumentError,
    Diagnostic,
    ExprSystemDecl,
    LinearSystemDecl,
    SimulateDecl,
    SystemDocument,
    WiringDecl,
    sim_config,
)
from .expr import Expr, Num, Var, compile_expr, evaluate, linear_combination, substitute


class NotLinearError(ValueError):
    pass


def _components(s: TypedFiniteSet):
    return [(n, i) for n in s for i in range(s.dim_of(n))]


def _var(name, index, dim) -> Var:
    return Var(name) if dim == 1 else Var(name, index)


def linear_system(decl: LinearSystemDecl, doc: SystemDocument) -> LinearOpenSystem:
    box = doc.boxes[decl.box]
    m = decl.states.total_dim
    return LinearOpenSystem(
        decl.states, box,
        np.array(decl.A, dtype=float).reshape(m, m),
        np.array(decl.B, dtype=float).reshape(m, box.inputs.total_dim),
        np.array(decl.C, dtype=float).reshape(box.outputs.total_dim, m),
    )


def expr_open_system(decl: ExprSystemDecl, doc: SystemDocument) -> OpenSystem:
    box = doc.boxes[decl.box]
    m = decl.states.total_dim
    positions = {k: i for i, k in enumerate(_components(decl.states))}
    positions.update({k: m + i for i, k in enumerate(_components(box.inputs))})
    ders = [compile_expr(e, positions) for _, e in decl.ders]
    outs = [compile_expr(e, positions) for _, e in decl.outs]

    def f_in(s, u):
        v = np.concatenate((s, u))
        return np.array([f(v) for f in ders], dtype=float)

    def f_out(s):
        return np.array([f(s) for f in outs], dtype=float)

    return OpenSystem(decl.states, box, f_in, f_out)


def open_system(name: str, doc: SystemDocument) -> OpenSystem:
    decl = doc.systems[name]
    if isinstance(decl, LinearSystemDecl):
        return to_general(linear_system(decl, doc))
    return expr_open_system(decl, doc)


def _bound(w: WiringDecl, doc: SystemDocument):
    binds = dict(w.binds)
    missing = [i for i, _ in w.instances if i not in binds]
    if missing:
        raise DocumentError([Diagnostic("error", "unresolved", f"wiring {w.name!r} has unbound inner boxes {missing}",
                                        line=w.line)])
    return [doc.systems[binds[i]] for i, _ in w.instances]


def is_linear_wiring(w: WiringDecl, doc: SystemDocument) -> bool:
    return all(isinstance(s, LinearSystemDecl) for s in _bound(w, doc))


def wired_linear(name: str, doc: SystemDocument) -> LinearOpenSystem:
    """Closed-form composite of a wiring whose inner systems are all linear."""
    w = doc.wirings[name]
    decls = _bound(w, doc)
    bad = [d.name for d in decls if not isinstance(d, LinearSystemDecl)]
    if bad:
        raise NotLinearError(f"wiring {name!r} binds non-linear systems {bad}; the matrix form needs linear systems")
    return apply_operadic_linear(doc.operadic(name), [linear_system(d, doc) for d in decls])


def target_system(name: str, doc: SystemDocument) -> OpenSystem:
    """Runnable system for a system or wiring name."""
    if name in doc.systems:
        return open_system(name, doc)
    if name not in doc.wirings:
        raise KeyError(f"{name!r} is not a system or wiring")
    w = doc.wirings[name]
    decls = _bound(w, doc)
    if all(isinstance(d, LinearSystemDecl) for d in decls):
        return to_general(wired_linear(name, doc))
    return apply_operadic(doc.operadic(name), [open_system(d.name, doc) for d in decls])


# -- symbolic composition ----------------------------------------------------

def as_expr_decl(decl, doc: SystemDocument) -> ExprSystemDecl:
    """Rewrite a linear system as an expression system with the same equations."""
    if isinstance(decl, ExprSystemDecl):
        return decl
    box = doc.boxes[decl.box]
    s_vars = [_var(n, i, decl.states.dim_of(n)) for n, i in _components(decl.states)]
    u_vars = [_var(n, i, box.inputs.dim_of(n)) for n, i in _components(box.inputs)]
    ders = []
    for row_a, row_b, key in zip(decl.A, decl.B, _components(decl.states)):
        ders.append((key, linear_combination(list(zip(row_a, s_vars)) + list(zip(row_b, u_vars)))))
    outs = [(key, linear_combination(list(zip(row, s_vars)))) for row, key in zip(decl.C, _components(box.outputs))]
    return ExprSystemDecl(decl.name, decl.box, decl.states, tuple(ders), tuple(outs), decl.line)


def compose_expr(name: str, doc: SystemDocument, system_name: str | None = None) -> ExprSystemDecl:
    """Substitute routed readouts into each inner system's equations.

    The result lives on the outer box; its states are the disjoint union of
    the inner states, qualified by instance name where names collide.
    """
    w = doc.wirings[name]
    decls = [as_expr_decl(d, doc) for d in _bound(w, doc)]
    insts = [i for i, _ in w.instances]
    outer = doc.boxes[w.outer]
    avoid = set(outer.inputs) | set(outer.outputs)
    states, s_maps = coproduct([d.states for d in decls], insts)
    if avoid & set(states):
        states, s_maps = _rename_away(states, s_maps, insts, avoid)
    flat = flatten_operadic(doc.operadic(name))
    _, p_maps = flat_dom_maps(w, doc)

    def state_sub(k, decl):
        def f(v: Var):
            if v.name in decl.states:
                new = s_maps[k][v.name]
                return _var(new, v.index or 0, states.dim_of(new))
            return v
        return f

    # readout of every component of the tensored inner outputs, in outer state vars
    out_exprs: dict[tuple[str, int], Expr] = {}
    for k, decl in enumerate(decls):
        for (port, i), e in decl.outs:
            out_exprs[(p_maps[k][("out", port)], i)] = substitute(e, state_sub(k, decl))

    def routed_input(tname, i):
        src = flat.wires[xin(tname)]
        if src.role == XOUT:
            return out_exprs[(src.name, i)]
        return _var(src.name, i, outer.inputs.dim_of(src.name))

    ders = []
    for k, decl in enumerate(decls):
        box = doc.boxes[decl.box]
        ssub = state_sub(k, decl)

        def f(v: Var, ssub=ssub, box=box, k=k):
            if v.name in box.inputs:
                return routed_input(p_maps[k][("in", v.name)], v.index or 0)
            return ssub(v)

        for (sname, i), e in decl.ders:
            ders.append(((s_maps[k][sname], i), substitute(e, f)))
    outs = []
    for z, i in _components(outer.outputs):
        src = flat.wires[yout(z)]
        outs.append(((z, i), out_exprs[(src.name, i)]))
    return ExprSystemDecl(system_name or f"{name}_composed", w.outer, states, tuple(ders), tuple(outs), w.line)


def _rename_away(states, maps, tags, avoid):
    """Qualify state names that would shadow an outer port name."""
    taken = set(states) | set(avoid)
    renamed = {}
    for m, tag in zip(maps, tags):
        for old, new in list(m.items()):
            if new in avoid:
                fresh = f"{tag}.{new}"
                while fresh in taken:
                    fresh = f"{tag}.{fresh}"
                taken.add(fresh)
                renamed[new] = fresh
                m[old] = fresh
    return TypedFiniteSet(tuple((renamed.get(n, n), t) for n, t in states.ports)), maps


def flat_dom_maps(w: WiringDecl, doc: SystemDocument):
    return tensor_boxes([doc.boxes[b] for _, b in w.instances], [i for i, _ in w.instances])


def composed_linear_decl(name: str, doc: SystemDocument, system_name: str) -> LinearSystemDecl:
    sys = wired_linear(name, doc)
    w = doc.wirings[name]

    def rows(m):
        return tuple(tuple(float(x) for x in r) for r in m)

    return LinearSystemDecl(system_name, w.outer, sys.states, rows(sys.A), rows(sys.B), rows(sys.C), w.line)


def compose_document(doc: SystemDocument, name: str) -> SystemDocument:
    """Self-contained document with the wiring ``name`` replaced by one system.

    The composite system is bound into an identity wiring that keeps the
    original wiring name, so ``simulate`` and ``flatten`` targets carry over.
    """
    w = doc.wirings[name]
    sys_name = f"{name}_composed"
    taken = set(doc.systems) | set(doc.wirings)
    while sys_name in taken:
        sys_name += "_"
    if is_linear_wiring(w, doc):
        decl = composed_linear_decl(name, doc, sys_name)
    else:
        decl = compose_expr(name, doc, sys_name)
    outer = doc.boxes[w.outer]
    inst = "composed" if w.outer != "composed" else "inner"
    wires = [(f"{w.outer}.{z}", f"{inst}.{z}") for z in outer.outputs]
    wires += [(f"{inst}.{a}", f"{w.outer}.{a}") for a in outer.inputs]
    ident = WiringDecl(name, ((inst, w.outer),), w.outer, ((inst, sys_name),), tuple(wires))
    out = SystemDocument(boxes={w.outer: outer}, systems={sys_name: decl}, wirings={name: ident})
    if doc.simulate is not None and doc.simulate.target in (name,):
        out.simulate = replace(doc.simulate)
    return out


# -- simulation setup ----------------------------------------------------------

def input_signal(s: SimulateDecl | None, ports: TypedFiniteSet, overrides: dict | None = None) -> InputSignal:
    exprs = dict(s.inputs) if s is not None else {}
    values = {}
    for port, es in exprs.items():
        if all(isinstance(e, Num) for e in es):
            values[port] = np.array([e.value for e in es])
        else:
            values[port] = (lambda es: lambda t: np.array([evaluate(e, {"t": t}) for e in es]))(es)
    for port, v in (overrides or {}).items():
        if port not in ports:
            raise SimulationError(f"{port!r} is not an input port")
        values[port] = v
    return InputSignal(ports, values)


def simulation_setup(doc: SystemDocument, target: str | None = None, x0=None, inputs=None, **cfg):
    """``(system, x0, input signal, config)`` from the simulate block plus overrides."""
    s = doc.simulate
    target = target or (s.target if s else None)
    if target is None:
        raise SimulationError("no simulate block and no target given")
    if target not in doc.systems and target not in doc.wirings:
        raise SimulationError(f"{target!r} is not a system or wiring")
    if s is None:
        s = SimulateDecl(target)
    elif s.target != target:
        # the directive's x0 and inputs belong to another system
        s = replace(s, target=target, x0=None, inputs=())
    sys = target_system(target, doc)
    if x0 is None:
        x0 = s.x0 if s.x0 is not None else np.zeros(sys.n_states)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n_states,):
        raise SimulationError(f"x0 has {x0.size} entries but the system has {sys.n_states} states")
    config: SimConfig = sim_config(s, **cfg)
    return sys, x0, input_signal(s, sys.box.inputs, inputs), config
