"""Random boxes, diagrams and systems shared by the property tests.

Every generator takes a ``random.Random`` so the same code serves hypothesis
(via ``st.randoms``) and the seeded loops of the acceptance suite.
"""

import random

import numpy as np

from opendyn.algebra_general import OpenSystem
from opendyn.algebra_linear import LinearOpenSystem
from opendyn.core_types import TypedFiniteSet
from opendyn.wiring import BoxInterface, WiringDiagram, xin, xout, yin, yout

NAMES = ["a", "b", "c", "d", "e", "p", "q", "r", "s", "t", "u", "v"]


def random_dim(rng: random.Random, allow_zero=True) -> int:
    # mostly scalars, some vectors, the odd trivial port
    return rng.choices([0, 1, 2, 3], weights=[1 if allow_zero else 0, 6, 2, 1])[0]


def random_box(rng: random.Random, max_ports=4) -> BoxInterface:
    names = rng.sample(NAMES, rng.randint(0, min(2 * max_ports, len(NAMES))))
    k = rng.randint(0, len(names))
    ins = TypedFiniteSet(tuple((n, random_dim(rng)) for n in names[:k][:max_ports]))
    outs = TypedFiniteSet(tuple((n, random_dim(rng)) for n in names[k:][:max_ports]))
    return BoxInterface(ins, outs)


def random_diagram_from(rng: random.Random, dom: BoxInterface) -> WiringDiagram:
    """A uniformly-shaped valid diagram out of ``dom`` with a fresh outer box.

    Each inner input either feeds back from an unused inner output of equal
    dimension or becomes a new outer input; inner outputs left over become
    outer outputs.  Every valid diagram out of ``dom`` arises this way.
    """
    free_outs = list(dom.outputs)
    rng.shuffle(free_outs)
    wires = {}
    new_ins, new_outs = [], []
    names = iter(rng.sample(NAMES, len(NAMES)))
    for a in dom.inputs:
        d = dom.inputs.dim_of(a)
        cands = [o for o in free_outs if dom.outputs.dim_of(o) == d]
        if cands and rng.random() < 0.5:
            o = rng.choice(cands)
            free_outs.remove(o)
            wires[xin(a)] = xout(o)
        else:
            n = next(names)
            new_ins.append((n, d))
            wires[xin(a)] = yin(n)
    for o in free_outs:
        n = next(names)
        new_outs.append((n, dom.outputs.dim_of(o)))
        wires[yout(n)] = xout(o)
    rng.shuffle(new_ins)
    rng.shuffle(new_outs)
    cod = BoxInterface(TypedFiniteSet(tuple(new_ins)), TypedFiniteSet(tuple(new_outs)))
    return WiringDiagram(dom, cod, wires)


def random_chain(rng: random.Random, length: int, dom: BoxInterface | None = None) -> list[WiringDiagram]:
    box = dom if dom is not None else random_box(rng)
    out = []
    for _ in range(length):
        d = random_diagram_from(rng, box)
        out.append(d)
        box = d.cod
    return out


def random_states(rng: random.Random, max_ports=3) -> TypedFiniteSet:
    names = rng.sample(["x", "y", "z", "w"], rng.randint(0, max_ports))
    return TypedFiniteSet(tuple((n, random_dim(rng, allow_zero=False)) for n in names))


def random_linear(rng: random.Random, box: BoxInterface, states: TypedFiniteSet | None = None) -> LinearOpenSystem:
    states = states if states is not None else random_states(rng)
    g = np.random.default_rng(rng.getrandbits(32))
    m, ni, no = states.total_dim, box.inputs.total_dim, box.outputs.total_dim
    return LinearOpenSystem(
        states, box, g.standard_normal((m, m)), g.standard_normal((m, ni)), g.standard_normal((no, m))
    )


def random_general(rng: random.Random, box: BoxInterface, states: TypedFiniteSet | None = None) -> OpenSystem:
    """A smooth nonlinear system with random weights."""
    states = states if states is not None else random_states(rng)
    g = np.random.default_rng(rng.getrandbits(32))
    m, ni, no = states.total_dim, box.inputs.total_dim, box.outputs.total_dim
    W, V, c = g.standard_normal((m, m)), g.standard_normal((m, ni)), g.standard_normal(m)
    C, D = g.standard_normal((no, m)), g.standard_normal((no, m))

    def f_in(s, u):
        return np.tanh(W @ s + c) + V @ np.sin(u) - 0.5 * s

    def f_out(s):
        return C @ s + np.cos(D @ s)

    return OpenSystem(states, box, f_in, f_out)


def random_point(rng: random.Random, n: int) -> np.ndarray:
    return np.array([rng.uniform(-2, 2) for _ in range(n)])
