"""Open dynamical systems on boxes and the action of wiring diagrams on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core_types import TypedFiniteSet, coproduct
from .wiring import (
    XOUT,
    BoxInterface,
    OperadicWiring,
    WiringDiagram,
    WiringError,
    flatten_operadic,
    tensor_boxes,
    xin,
    yout,
)

DiffEq = Callable[[np.ndarray, np.ndarray], np.ndarray]
Readout = Callable[[np.ndarray], np.ndarray]


class NonFiniteError(ArithmeticError):
    """An evaluable map produced NaN or infinity."""

    def __init__(self, message, coordinate=None, time=None):
        super().__init__(message)
        self.coordinate = coordinate
        self.time = time


@dataclass(frozen=True, eq=False)
class OpenSystem:
    """``(S, f)`` on box ``X``: ``f_in(s, u) -> ds/dt`` and ``f_out(s) -> y``.

    The readout takes the state alone; it cannot observe the input.
    Both maps must be deterministic and accept/return 1-d float arrays in
    the canonical port layouts.
    """

    states: TypedFiniteSet
    box: BoxInterface
    f_in: DiffEq
    f_out: Readout

    @property
    def n_states(self) -> int:
        return self.states.total_dim

    @property
    def n_inputs(self) -> int:
        return self.box.inputs.total_dim

    @property
    def n_outputs(self) -> int:
        return self.box.outputs.total_dim


def _vec(x, n, what):
    x = np.asarray(x, dtype=float).reshape(-1) if np.ndim(x) else np.asarray([x], dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{what} must have length {n}, got {x.shape[0]}")
    return x


def _check_finite(v, labels, what):
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteError(f"non-finite {what} at coordinate {labels[i]!r}: {v[i]}", coordinate=labels[i])


def evaluate(sys: OpenSystem, state, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``(f_in(state, inputs), f_out(state))`` with length and finiteness checks."""
    s = _vec(state, sys.n_states, "state")
    u = _vec(inputs, sys.n_inputs, "input")
    deriv = _vec(sys.f_in(s, u), sys.n_states, "derivative")
    out = _vec(sys.f_out(s), sys.n_outputs, "output")
    _check_finite(deriv, sys.states.component_labels(), "derivative")
    _check_finite(out, sys.box.outputs.component_labels(), "output")
    return deriv, out


def routing_tables(phi: WiringDiagram) -> tuple[np.ndarray, np.ndarray]:
    """Gather indices for the inner inputs and the outer outputs.

    The inner input vector is ``concat(f_out(s), y)[in_idx]`` where ``y`` is the
    outer input; the outer output is ``f_out(s)[out_idx]``.
    """
    x, y = phi.dom, phi.cod
    n_own = x.outputs.total_dim
    in_idx = []
    for a in x.inputs:
        src = phi.wires[xin(a)]
        if src.role == XOUT:
            start = x.outputs.offset_of(src.name)
        else:
            start = n_own + y.inputs.offset_of(src.name)
        in_idx.extend(range(start, start + x.inputs.dim_of(a)))
    out_idx = []
    for z in y.outputs:
        start = x.outputs.offset_of(phi.wires[yout(z)].name)
        out_idx.extend(range(start, start + y.outputs.dim_of(z)))
    return np.asarray(in_idx, dtype=np.intp), np.asarray(out_idx, dtype=np.intp)


def apply_wiring(phi: WiringDiagram, sys: OpenSystem) -> OpenSystem:
    """The system on ``cod(phi)`` obtained by plugging ``sys`` into ``phi``.

    States are unchanged.  Inner inputs are read either from the system's
    own readout or from the outer inputs, as routed by ``phi``.
    """
    if sys.box != phi.dom:
        raise WiringError("system box does not match the wiring diagram's domain")
    phi.check()
    in_idx, out_idx = routing_tables(phi)
    f_in, f_out = sys.f_in, sys.f_out

    def g_in(s, y):
        return f_in(s, np.concatenate((np.asarray(f_out(s), dtype=float), np.asarray(y, dtype=float)))[in_idx])

    def g_out(s):
        return np.asarray(f_out(s), dtype=float)[out_idx]

    return OpenSystem(sys.states, phi.cod, g_in, g_out)


def product_many(systems: Sequence[OpenSystem], tags: Sequence[str]) -> OpenSystem:
    """Coherence map: one system on the stacked boxes with disjoint state."""
    states, _ = coproduct([s.states for s in systems], tags)
    box, _ = tensor_boxes([s.box for s in systems], tags)
    s_cuts = np.cumsum([0] + [s.n_states for s in systems])
    u_cuts = np.cumsum([0] + [s.n_inputs for s in systems])
    parts = list(zip(systems, s_cuts[:-1], s_cuts[1:], u_cuts[:-1], u_cuts[1:]))

    def f_in(s, u):
        if not parts:
            return np.zeros(0)
        return np.concatenate([
            np.asarray(p.f_in(s[a:b], u[c:d]), dtype=float) for p, a, b, c, d in parts
        ])

    def f_out(s):
        if not parts:
            return np.zeros(0)
        return np.concatenate([np.asarray(p.f_out(s[a:b]), dtype=float) for p, a, b, _, _ in parts])

    return OpenSystem(states, box, f_in, f_out)


def product(sys1: OpenSystem, sys2: OpenSystem, tags: tuple[str, str] = ("L", "R")) -> OpenSystem:
    return product_many([sys1, sys2], tags)


def apply_operadic(op: OperadicWiring, systems: Sequence[OpenSystem]) -> OpenSystem:
    """Plug one system into each inner box of ``op``; states are their disjoint union."""
    if len(systems) != len(op.doms):
        raise WiringError(f"wiring has {len(op.doms)} inner boxes but {len(systems)} systems were given")
    for (inst, box), sys in zip(op.doms, systems):
        if sys.box != box:
            raise WiringError(f"system for {inst!r} does not live on that box")
    return apply_wiring(flatten_operadic(op), product_many(systems, op.instance_names))


def vector_field(states: TypedFiniteSet, field: Callable[[np.ndarray], np.ndarray]) -> OpenSystem:
    """An autonomous system on the closed box."""
    return OpenSystem(states, BoxInterface(), lambda s, u: field(s), lambda s: np.zeros(0))
