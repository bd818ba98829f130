"""Boxes and wiring diagrams.

A wiring diagram ``X -> Y`` is stored as its forward map on ports::

    inp(X) + out(Y)  -->  out(X) + inp(Y)

Each port is addressed by a :class:`Port` carrying its role (``Xin``,
``Xout``, ``Yin`` or ``Yout``) and name, so inner and outer boxes may reuse
names freely.  Keys of the map are ``Xin``/``Yout`` ports, values are
``Xout``/``Yin`` ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .core_types import TypedBijection, TypedFiniteSet, coproduct, _union_with_collisions

XIN, XOUT, YIN, YOUT = "Xin", "Xout", "Yin", "Yout"
DOMAIN_ROLES = (XIN, YOUT)
CODOMAIN_ROLES = (XOUT, YIN)


class Port(NamedTuple):
    role: str
    name: str

    def __str__(self):
        return f"{self.role}:{self.name}"


def xin(name): return Port(XIN, name)
def xout(name): return Port(XOUT, name)
def yin(name): return Port(YIN, name)
def yout(name): return Port(YOUT, name)


class WiringError(ValueError):
    """An operation was given an invalid or mismatched wiring diagram."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class BoxInterface:
    inputs: TypedFiniteSet = TypedFiniteSet()
    outputs: TypedFiniteSet = TypedFiniteSet()

    def __post_init__(self):
        if not isinstance(self.inputs, TypedFiniteSet):
            object.__setattr__(self, "inputs", TypedFiniteSet(tuple(self.inputs)))
        if not isinstance(self.outputs, TypedFiniteSet):
            object.__setattr__(self, "outputs", TypedFiniteSet(tuple(self.outputs)))
        both = set(self.inputs) & set(self.outputs)
        if both:
            raise ValueError(f"box uses names as both input and output: {sorted(both)}")

    @classmethod
    def of(cls, inputs=(), outputs=()) -> "BoxInterface":
        """``BoxInterface.of({"a": 1}, [("c", 2)])`` style constructor."""
        def tfs(x):
            if isinstance(x, TypedFiniteSet):
                return x
            if isinstance(x, Mapping):
                return TypedFiniteSet(tuple(x.items()))
            return TypedFiniteSet(tuple((p, 1) if isinstance(p, str) else p for p in x))
        return cls(tfs(inputs), tfs(outputs))

    @property
    def is_closed(self) -> bool:
        return not len(self.inputs) and not len(self.outputs)


CLOSED_BOX = BoxInterface()


def tensor_boxes(boxes: Sequence[BoxInterface], tags: Sequence[str]):
    """Stack boxes; returns the tensored box plus per-box name maps.

    A port name is qualified with its box's tag when it occurs in more than
    one box (in either direction), which keeps input and output names of the
    result disjoint.  Each returned map sends ``(direction, name)`` with
    ``direction`` in ``{"in", "out"}`` to the new name.
    """
    if len(boxes) != len(tags):
        raise ValueError("need exactly one tag per box")
    if len(set(tags)) != len(tags):
        raise ValueError(f"tags must be distinct, got {list(tags)}")
    counts: dict[str, int] = {}
    for b in boxes:
        for n in set(b.inputs) | set(b.outputs):
            counts[n] = counts.get(n, 0) + 1
    colliding = {n for n, c in counts.items() if c > 1}
    ins, in_maps = _union_with_collisions([b.inputs for b in boxes], tags, colliding)
    outs, out_maps = _union_with_collisions([b.outputs for b in boxes], tags, colliding)
    maps = []
    for im, om in zip(in_maps, out_maps):
        m = {("in", k): v for k, v in im.items()}
        m.update({("out", k): v for k, v in om.items()})
        maps.append(m)
    return BoxInterface(ins, outs), maps


def _port_set(box_x: BoxInterface, box_y: BoxInterface, role: str) -> TypedFiniteSet:
    return {XIN: box_x.inputs, XOUT: box_x.outputs, YIN: box_y.inputs, YOUT: box_y.outputs}[role]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True, eq=False)
class WiringDiagram:
    dom: BoxInterface
    cod: BoxInterface
    wires: Mapping[Port, Port] = field(default_factory=dict)

    def __post_init__(self):
        wires = {Port(*k): Port(*v) for k, v in dict(self.wires).items()}
        object.__setattr__(self, "wires", wires)

    def __eq__(self, other):
        if not isinstance(other, WiringDiagram):
            return NotImplemented
        return self.dom == other.dom and self.cod == other.cod and self.wires == other.wires

    def __repr__(self):
        body = ", ".join(f"{a} -> {b}" for a, b in self.wire_list())
        return f"WiringDiagram({body})"

    def __call__(self, port: Port) -> Port:
        return self.wires[port]

    def domain_ports(self) -> list[Port]:
        return [xin(n) for n in self.dom.inputs] + [yout(n) for n in self.cod.outputs]

    def codomain_ports(self) -> list[Port]:
        return [xout(n) for n in self.dom.outputs] + [yin(n) for n in self.cod.inputs]

    def dim(self, port: Port) -> int:
        return _port_set(self.dom, self.cod, port.role).dim_of(port.name)

    def wire_list(self) -> list[tuple[Port, Port]]:
        """Wires in canonical order (domain layout)."""
        return [(p, self.wires[p]) for p in self.domain_ports() if p in self.wires]

    @property
    def phi_in(self) -> dict[str, Port]:
        return {n: self.wires[xin(n)] for n in self.dom.inputs}

    @property
    def phi_out(self) -> dict[str, str]:
        return {n: self.wires[yout(n)].name for n in self.cod.outputs}

    @property
    def phi(self) -> TypedBijection:
        """The wiring as a typed bijection between flat port sets.

        Domain is ``inp(X) + out(Y)`` and codomain ``out(X) + inp(Y)``, with
        outer names qualified ``Y.<name>`` and inner ``X.<name>`` on collision.
        """
        self.check()
        dom, (m_xin, m_yout) = coproduct([self.dom.inputs, self.cod.outputs], ("X", "Y"))
        cod, (m_xout, m_yin) = coproduct([self.dom.outputs, self.cod.inputs], ("X", "Y"))
        names = {XIN: m_xin, YOUT: m_yout, XOUT: m_xout, YIN: m_yin}
        mapping = {names[a.role][a.name]: names[b.role][b.name] for a, b in self.wires.items()}
        return TypedBijection(dom, cod, mapping)

    def check(self) -> "WiringDiagram":
        violations = validate(self)
        if violations:
            raise WiringError("invalid wiring diagram: " + "; ".join(map(str, violations)), violations)
        return self


def validate(wd: WiringDiagram) -> list[Violation]:
    """Every violation of the wiring-diagram conditions; empty when valid."""
    out: list[Violation] = []
    known = set(wd.domain_ports()) | set(wd.codomain_ports())
    hits: dict[Port, list[Port]] = {}
    for a, b in wd.wires.items():
        bad = False
        for p in (a, b):
            if p not in known:
                out.append(Violation("unknown_port", f"wire {a} -> {b} names unknown port {p}"))
                bad = True
        if bad:
            continue
        if a.role not in DOMAIN_ROLES or b.role not in CODOMAIN_ROLES:
            out.append(Violation(
                "bad_direction",
                f"wire {a} -> {b} must run from inp(X)+out(Y) to out(X)+inp(Y)",
            ))
            continue
        if wd.dim(a) != wd.dim(b):
            out.append(Violation(
                "type_mismatch",
                f"wire {a} -> {b} joins dim {wd.dim(a)} to dim {wd.dim(b)}",
            ))
        if a.role == YOUT and b.role == YIN:
            out.append(Violation("passing_wire", f"outer output {a.name} is wired straight to outer input {b.name}"))
        hits.setdefault(b, []).append(a)
    for p in wd.domain_ports():
        if p not in wd.wires:
            out.append(Violation("exposed_port", f"port {p} has no wire"))
    for p in wd.codomain_ports():
        srcs = hits.get(p, [])
        if not srcs:
            out.append(Violation("exposed_port", f"port {p} is not reached by any wire"))
        elif len(srcs) > 1:
            out.append(Violation("split_port", f"port {p} is reached by {', '.join(map(str, srcs))}"))
    return out


def identity(x: BoxInterface) -> WiringDiagram:
    wires = {xin(n): yin(n) for n in x.inputs}
    wires.update({yout(n): xout(n) for n in x.outputs})
    return WiringDiagram(x, x, wires)


def compose(phi: WiringDiagram, psi: WiringDiagram) -> WiringDiagram:
    """``psi ∘ phi`` for ``phi: X -> Y`` and ``psi: Y -> Z``, by chasing wires."""
    if phi.cod != psi.dom:
        raise WiringError("cannot compose: codomain of first diagram is not the domain of the second")
    phi.check()
    psi.check()
    wires = {}
    for a in phi.dom.inputs:
        b = phi.wires[xin(a)]
        if b.role == XOUT:
            wires[xin(a)] = b
            continue
        c = psi.wires[xin(b.name)]
        if c.role == YIN:
            wires[xin(a)] = yin(c.name)
        else:
            wires[xin(a)] = phi.wires[yout(c.name)]
    for z in psi.cod.outputs:
        y = psi.wires[yout(z)]
        wires[yout(z)] = phi.wires[yout(y.name)]
    return WiringDiagram(phi.dom, psi.cod, wires)


def tensor(phi1: WiringDiagram, phi2: WiringDiagram, tags: tuple[str, str] = ("L", "R")) -> WiringDiagram:
    """Block sum of two diagrams on the stacked boxes."""
    return tensor_many([phi1, phi2], tags)


def tensor_many(diagrams: Sequence[WiringDiagram], tags: Sequence[str]) -> WiringDiagram:
    dom, dmaps = tensor_boxes([d.dom for d in diagrams], tags)
    cod, cmaps = tensor_boxes([d.cod for d in diagrams], tags)
    wires = {}
    for d, dm, cm in zip(diagrams, dmaps, cmaps):
        def rename(p):
            if p.role in (XIN, XOUT):
                return Port(p.role, dm[("in" if p.role == XIN else "out", p.name)])
            return Port(p.role, cm[("in" if p.role == YIN else "out", p.name)])
        for a, b in d.wires.items():
            wires[rename(a)] = rename(b)
    return WiringDiagram(dom, cod, wires)


@dataclass(frozen=True, eq=False)
class OperadicWiring:
    """A wiring diagram with several named inner boxes ``X1, ..., Xn -> Y``.

    Inner ports are written ``Port(Xin, "<instance>.<port>")``.
    """

    doms: tuple[tuple[str, BoxInterface], ...]
    cod: BoxInterface
    wires: Mapping[Port, Port] = field(default_factory=dict)

    def __post_init__(self):
        doms = tuple((str(n), b) for n, b in self.doms)
        names = [n for n, _ in doms]
        if len(set(names)) != len(names):
            raise ValueError(f"inner box instance names must be distinct: {names}")
        for n in names:
            if "." in n:
                raise ValueError(f"instance name {n!r} may not contain '.'")
        object.__setattr__(self, "doms", doms)
        object.__setattr__(self, "wires", {Port(*k): Port(*v) for k, v in dict(self.wires).items()})

    def __eq__(self, other):
        if not isinstance(other, OperadicWiring):
            return NotImplemented
        return self.doms == other.doms and self.cod == other.cod and self.wires == other.wires

    @property
    def instance_names(self) -> list[str]:
        return [n for n, _ in self.doms]

    def tensored_domain(self):
        return tensor_boxes([b for _, b in self.doms], self.instance_names)


def split_inner(name: str) -> tuple[str, str]:
    inst, sep, port = name.partition(".")
    if not sep:
        raise ValueError(f"inner port {name!r} must be written '<instance>.<port>'")
    return inst, port


def _operadic_renamer(op: OperadicWiring):
    _, maps = op.tensored_domain()
    by_inst = dict(zip(op.instance_names, maps))
    boxes = dict(op.doms)

    def rename(p: Port) -> Port | None:
        if p.role not in (XIN, XOUT):
            return p
        inst, port = split_inner(p.name)
        if inst not in by_inst:
            return None
        direction = "in" if port in boxes[inst].inputs else "out" if port in boxes[inst].outputs else None
        if direction is None:
            return None
        if (direction == "in") != (p.role == XIN):
            return None
        return Port(p.role, by_inst[inst][(direction, port)])

    return rename


def validate_operadic(op: OperadicWiring) -> list[Violation]:
    rename = _operadic_renamer(op)
    dom, _ = op.tensored_domain()
    wires = {}
    out = []
    for a, b in op.wires.items():
        ra, rb = rename(a), rename(b)
        if ra is None or rb is None:
            bad = a if ra is None else b
            out.append(Violation("unknown_port", f"wire {a} -> {b} names unknown port {bad}"))
            continue
        wires[ra] = rb
    return out + validate(WiringDiagram(dom, op.cod, wires))


def flatten_operadic(op: OperadicWiring) -> WiringDiagram:
    """The ordinary wiring diagram ``X1 ⊕ ... ⊕ Xn -> Y`` equivalent to ``op``."""
    violations = validate_operadic(op)
    if violations:
        raise WiringError("invalid operadic wiring: " + "; ".join(map(str, violations)), violations)
    rename = _operadic_renamer(op)
    dom, _ = op.tensored_domain()
    return WiringDiagram(dom, op.cod, {rename(a): rename(b) for a, b in op.wires.items()})


def as_operadic(wd: WiringDiagram, instance: str = "X") -> OperadicWiring:
    """View a single-box diagram as a one-instance operadic diagram."""
    def q(p):
        return Port(p.role, f"{instance}.{p.name}") if p.role in (XIN, XOUT) else p
    return OperadicWiring(((instance, wd.dom),), wd.cod, {q(a): q(b) for a, b in wd.wires.items()})


# -- matrix view -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhiBlocks:
    """Blocks of the 0/1 matrix pulling ``[out(X); inp(Y)]`` back to ``[inp(X); out(Y)]``.

    Each block is named by its target then source: ``XX`` maps out(X) values
    to inp(X), ``XY`` inp(Y) to inp(X), ``YX`` out(X) to out(Y) and ``YY``
    inp(Y) to out(Y) (always zero).
    """

    XX: np.ndarray
    XY: np.ndarray
    YX: np.ndarray
    YY: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.XX, self.XY], [self.YX, self.YY]])

    def __eq__(self, other):
        if not isinstance(other, PhiBlocks):
            return NotImplemented
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip((self.XX, self.XY, self.YX, self.YY), (other.XX, other.XY, other.YX, other.YY))
        )


def phi_matrix(wd: WiringDiagram) -> PhiBlocks:
    wd.check()
    x, y = wd.dom, wd.cod
    rows = {XIN: x.inputs, YOUT: y.outputs}
    cols = {XOUT: x.outputs, YIN: y.inputs}
    blocks = {
        (r, c): np.zeros((rows[r].total_dim, cols[c].total_dim))
        for r in rows for c in cols
    }
    for a, b in wd.wires.items():
        ra = rows[a.role].slice_of(a.name)
        cb = cols[b.role].slice_of(b.name)
        blocks[a.role, b.role][ra, cb] = np.eye(wd.dim(a))
    return PhiBlocks(
        XX=blocks[XIN, XOUT], XY=blocks[XIN, YIN], YX=blocks[YOUT, XOUT], YY=blocks[YOUT, YIN]
    )


# -- DOT export ------------------------------------------------------------

def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(wd: WiringDiagram | OperadicWiring, name: str = "wiring") -> str:
    """Graphviz digraph: inner boxes as clusters, wires as edges along signal flow."""
    if isinstance(wd, OperadicWiring):
        violations = validate_operadic(wd)
        if violations:
            raise WiringError("invalid operadic wiring: " + "; ".join(map(str, violations)), violations)
        inner = [(n, b, f"{n}.") for n, b in wd.doms]
        cod = wd.cod
    else:
        wd.check()
        inner = [("X", wd.dom, "")]
        cod = wd.cod

    def node(p: Port) -> str:
        return _q(("inner:" if p.role in (XIN, XOUT) else "outer:") + p.name)

    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    if len(cod.inputs) or len(cod.outputs):
        lines.append("  node [shape=plaintext];")
        for n in cod.inputs:
            lines.append(f"  {node(yin(n))} [label={_q(n)}];")
        for n in cod.outputs:
            lines.append(f"  {node(yout(n))} [label={_q(n)}];")
    for i, (inst, box, prefix) in enumerate(inner):
        if box.is_closed:
            continue
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append(f"    label={_q(inst)};")
        lines.append("    node [shape=circle];")
        for n in box.inputs:
            lines.append(f"    {node(xin(prefix + n))} [label={_q(n)}];")
        for n in box.outputs:
            lines.append(f"    {node(xout(prefix + n))} [label={_q(n)}];")
        lines.append("  }")
    ordered = sorted(wd.wires.items(), key=lambda ab: (DOMAIN_ROLES.index(ab[0].role), ab[0].name))
    for a, b in ordered:
        # information flows from the codomain-side port into the domain-side one
        lines.append(f"  {node(b)} -> {node(a)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
