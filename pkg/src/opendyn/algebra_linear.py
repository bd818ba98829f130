"""Linear open systems as matrix blocks, and the closed-form wiring action.

A linear open system on box ``X`` with state ``s`` is::

    [ds/dt]   [A  B] [s]
    [  y  ] = [C  0] [u]

There is never a direct input-to-output term.  Wiring acts by::

    A' = B XX C + A,   B' = B XY,   C' = YX C

where ``XX``, ``XY``, ``YX`` are blocks of :func:`opendyn.wiring.phi_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra_general import OpenSystem
from .core_types import TypedFiniteSet, coproduct
from .wiring import (
    BoxInterface,
    OperadicWiring,
    PhiBlocks,
    WiringDiagram,
    WiringError,
    flatten_operadic,
    phi_matrix,
    tensor_boxes,
)


def _matrix(m, shape, name):
    m = np.asarray(m, dtype=float)
    if m.size == 0 and 0 in shape:
        m = m.reshape(shape)
    if m.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class LinearOpenSystem:
    states: TypedFiniteSet
    box: BoxInterface
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        m = self.states.total_dim
        ni, no = self.box.inputs.total_dim, self.box.outputs.total_dim
        object.__setattr__(self, "A", _matrix(self.A, (m, m), "A"))
        object.__setattr__(self, "B", _matrix(self.B, (m, ni), "B"))
        object.__setattr__(self, "C", _matrix(self.C, (no, m), "C"))

    @property
    def n_states(self) -> int:
        return self.states.total_dim

    def full_matrix(self) -> np.ndarray:
        """``[[A, B], [C, 0]]`` acting on ``[s; u]``."""
        zero = np.zeros((self.C.shape[0], self.B.shape[1]))
        return np.block([[self.A, self.B], [self.C, zero]])

    def allclose(self, other: "LinearOpenSystem", atol: float = 0.0) -> bool:
        return (
            self.states == other.states
            and self.box == other.box
            and all(
                x.shape == y.shape and np.allclose(x, y, rtol=0, atol=atol)
                for x, y in ((self.A, other.A), (self.B, other.B), (self.C, other.C))
            )
        )


def apply_wiring_linear(phi: WiringDiagram, sys: LinearOpenSystem) -> LinearOpenSystem:
    if sys.box != phi.dom:
        raise WiringError("system box does not match the wiring diagram's domain")
    blocks = phi_matrix(phi)
    if blocks.XX.shape != (sys.B.shape[1], sys.C.shape[0]):
        raise ValueError("system matrices do not match the wiring's port layout")
    A = sys.B @ blocks.XX @ sys.C + sys.A
    B = sys.B @ blocks.XY
    C = blocks.YX @ sys.C
    return LinearOpenSystem(sys.states, phi.cod, A, B, C)


def _block_diag(mats):
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def product_linear_many(systems: Sequence[LinearOpenSystem], tags: Sequence[str]) -> LinearOpenSystem:
    states, _ = coproduct([s.states for s in systems], tags)
    box, _ = tensor_boxes([s.box for s in systems], tags)
    return LinearOpenSystem(
        states,
        box,
        _block_diag([s.A for s in systems]),
        _block_diag([s.B for s in systems]),
        _block_diag([s.C for s in systems]),
    )


def product_linear(s1: LinearOpenSystem, s2: LinearOpenSystem, tags: tuple[str, str] = ("L", "R")) -> LinearOpenSystem:
    return product_linear_many([s1, s2], tags)


def apply_operadic_linear(op: OperadicWiring, systems: Sequence[LinearOpenSystem]) -> LinearOpenSystem:
    if len(systems) != len(op.doms):
        raise WiringError(f"wiring has {len(op.doms)} inner boxes but {len(systems)} systems were given")
    for (inst, box), sys in zip(op.doms, systems):
        if sys.box != box:
            raise WiringError(f"system for {inst!r} does not live on that box")
    return apply_wiring_linear(flatten_operadic(op), product_linear_many(systems, op.instance_names))


def to_general(sys: LinearOpenSystem) -> OpenSystem:
    """View a linear system as a general open system."""
    A, B, C = sys.A, sys.B, sys.C

    def f_in(s, u):
        return A @ s + B @ u

    def f_out(s):
        return C @ s

    return OpenSystem(sys.states, sys.box, f_in, f_out)


def compose_phi_matrices(phi: PhiBlocks, psi: PhiBlocks) -> PhiBlocks:
    """Matrix of ``psi ∘ phi`` from the matrices of ``phi: X -> Y`` and ``psi: Y -> Z``.

    The outer-output-to-outer-input route of ``psi`` (its ``XX`` block) is the
    only place the two diagrams' wires chain through ``Y`` and back into ``X``.
    """
    if phi.XY.shape[1] != psi.XX.shape[0] or psi.XX.shape[1] != phi.YX.shape[0]:
        raise ValueError("phi and psi blocks are not composable")
    XX = phi.XY @ psi.XX @ phi.YX + phi.XX
    XY = phi.XY @ psi.XY
    YX = psi.YX @ phi.YX
    YY = np.zeros((YX.shape[0], XY.shape[1]))
    return PhiBlocks(XX=XX, XY=XY, YX=YX, YY=YY)
