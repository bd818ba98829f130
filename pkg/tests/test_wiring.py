import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opendyn.algebra_linear import compose_phi_matrices
from opendyn.wiring import (
    CLOSED_BOX,
    BoxInterface,
    OperadicWiring,
    WiringDiagram,
    WiringError,
    as_operadic,
    compose,
    flatten_operadic,
    identity,
    phi_matrix,
    tensor,
    to_dot,
    validate,
    validate_operadic,
    xin,
    xout,
    yin,
    yout,
)

from conftest import table1, table2, tank_boxes, tank_wiring
from gen import random_box, random_chain, random_diagram_from

# rows X1.in_a, X1.in_b, X2.in_a, X2.in_b, out_a; columns X1.out_a, X2.out_a, out_b, in_a, in_b
TANK_PHI = np.array([
    [0, 0, 0, 0, 1],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0],
    [0, 1, 0, 0, 0],
])


def codes(wd):
    return sorted(v.code for v in validate(wd))


def test_table1_is_valid():
    wd = table1()
    assert validate(wd) == []
    assert wd.phi_in == {"a": yin("m"), "b": xout("d")}
    assert wd.phi_out == {"n": "c"}


def test_exposed_port():
    wd = table1()
    wires = dict(wd.wires)
    del wires[xin("b")]
    assert codes(WiringDiagram(wd.dom, wd.cod, wires)) == ["exposed_port", "exposed_port"]


def test_split_port():
    wd = table1()
    wires = dict(wd.wires)
    wires[xin("b")] = xout("c")
    got = codes(WiringDiagram(wd.dom, wd.cod, wires))
    assert "split_port" in got and "exposed_port" in got


def test_passing_wire():
    x = BoxInterface.of(["a"], ["c"])
    y = BoxInterface.of(["m"], ["n"])
    wd = WiringDiagram(x, y, {xin("a"): xout("c"), yout("n"): yin("m")})
    assert codes(wd) == ["passing_wire"]


def test_type_mismatch_and_direction():
    x = BoxInterface.of([("a", 2)], ["c"])
    y = BoxInterface.of([], ["n"])
    assert "type_mismatch" in codes(WiringDiagram(x, y, {xin("a"): xout("c"), yout("n"): xout("c")}))
    x = BoxInterface.of(["a"], ["c"])
    y = BoxInterface.of(["m"], [])
    assert "bad_direction" in codes(WiringDiagram(x, y, {xout("c"): xin("a"), xin("a"): yin("m")}))


def test_unknown_port():
    wd = table1()
    wires = dict(wd.wires)
    wires[xin("zz")] = xout("c")
    assert "unknown_port" in codes(WiringDiagram(wd.dom, wd.cod, wires))


def test_check_raises_with_violations():
    wd = WiringDiagram(table1().dom, table1().cod, {})
    with pytest.raises(WiringError) as info:
        wd.check()
    assert len(info.value.violations) == 6


def test_box_names_disjoint():
    with pytest.raises(ValueError):
        BoxInterface.of(["a"], ["a"])


def test_identity_examples():
    assert identity(CLOSED_BOX).wires == {}
    x1, _, _ = tank_boxes()
    wd = identity(x1)
    assert validate(wd) == []
    assert len(wd.wires) == 3
    assert all(a.name == b.name for a, b in wd.wires.items())


def test_table2_composition():
    phi, psi, omega = table2()
    assert compose(phi, psi) == omega


def test_compose_rejects_mismatch():
    phi, psi, _ = table2()
    with pytest.raises(WiringError):
        compose(psi, phi)


def test_phi_matrix_tank():
    blocks = phi_matrix(flatten_operadic(tank_wiring()))
    assert np.array_equal(blocks.full(), TANK_PHI)
    assert not blocks.YY.any()


def test_phi_matrix_identity_and_vector_ports():
    x = BoxInterface.of([("a", 2), "b"], [("c", 3)])
    b = phi_matrix(identity(x))
    # columns are out(X) then inp(Y); listing inp(Y) first shows the identity
    assert np.array_equal(np.block([[b.XY, b.XX], [b.YY, b.YX]]), np.eye(6))
    assert np.array_equal(b.XY, np.eye(3)) and np.array_equal(b.YX, np.eye(3))


def test_phi_matrix_identity_blocks_follow_dims():
    x = BoxInterface.of([("a", 2)], [("c", 2)])
    y = BoxInterface.of([], [("n", 2)])
    wd = WiringDiagram(x, y, {xin("a"): xout("c"), yout("n"): xout("c")})
    with pytest.raises(WiringError):
        phi_matrix(wd)  # split port
    y = BoxInterface.of([("m", 2)], [("n", 2)])
    wd = WiringDiagram(x, y, {xin("a"): yin("m"), yout("n"): xout("c")})
    b = phi_matrix(wd)
    assert np.array_equal(b.XY, np.eye(2)) and np.array_equal(b.YX, np.eye(2))
    assert b.XX.shape == (2, 2) and not b.XX.any()


def test_table2_matrix_path():
    phi, psi, omega = table2()
    assert compose_phi_matrices(phi_matrix(phi), phi_matrix(psi)) == phi_matrix(omega)


def test_tensor_example_stacked_boxes():
    # a box with a feedback loop stacked on a pass-through box
    x1 = BoxInterface.of(["a1", "a2"], ["b1", "b2"])
    y1 = BoxInterface.of(["p"], ["q"])
    phi1 = WiringDiagram(x1, y1, {xin("a1"): yin("p"), xin("a2"): xout("b2"), yout("q"): xout("b1")})
    x2 = BoxInterface.of(["c"], ["d"])
    y2 = BoxInterface.of(["r"], ["s"])
    phi2 = WiringDiagram(x2, y2, {xin("c"): yin("r"), yout("s"): xout("d")})
    t = tensor(phi1, phi2)
    assert validate(t) == []
    assert t.dom.inputs.names == ("a1", "a2", "c")
    assert t.cod.outputs.names == ("q", "s")
    assert len(t.wires) == 5


def test_tensor_unit():
    phi = table1()
    assert tensor(phi, identity(CLOSED_BOX)) == phi


def test_flatten_tank_matches_single_box_view():
    flat = flatten_operadic(tank_wiring())
    assert flat.dom.inputs.names == ("X1.in_a", "X1.in_b", "X2.in_a", "X2.in_b")
    assert flat.dom.outputs.names == ("X1.out_a", "X2.out_a", "out_b")
    assert validate(flat) == []


def test_flatten_single_and_empty():
    wd = table1()
    assert flatten_operadic(as_operadic(wd)) == wd
    empty = OperadicWiring((), CLOSED_BOX, {})
    assert flatten_operadic(empty) == WiringDiagram(CLOSED_BOX, CLOSED_BOX, {})


def test_operadic_unknown_instance():
    op = tank_wiring()
    wires = dict(op.wires)
    wires[xin("X3.in_a")] = wires.pop(xin("X1.in_a"))
    bad = OperadicWiring(op.doms, op.cod, wires)
    assert any(v.code == "unknown_port" for v in validate_operadic(bad))
    with pytest.raises(WiringError):
        flatten_operadic(bad)


def test_dot_examples():
    empty = to_dot(identity(CLOSED_BOX))
    assert empty == 'digraph "wiring" {\n  rankdir=LR;\n}\n'
    dot = to_dot(tank_wiring(), name="pipes")
    assert dot.count("subgraph cluster_") == 2
    assert dot.count("->") == 5
    assert dot == to_dot(tank_wiring(), name="pipes")
    assert '"inner:X2.out_b" -> "inner:X1.in_b";' in dot


# -- properties ---------------------------------------------------------------

@settings(max_examples=500, deadline=None)
@given(st.randoms(use_true_random=False))
def test_generated_diagrams_are_valid(rng):
    for d in random_chain(rng, 3):
        assert validate(d) == []


@settings(max_examples=500, deadline=None)
@given(st.randoms(use_true_random=False))
def test_composition_laws(rng):
    theta, phi, psi = random_chain(rng, 3)
    left = compose(compose(theta, phi), psi)
    right = compose(theta, compose(phi, psi))
    assert left == right
    assert validate(left) == []
    assert validate(compose(theta, phi)) == []
    assert compose(identity(phi.dom), phi) == phi
    assert compose(phi, identity(phi.cod)) == phi


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_tensor_functorial(rng):
    phi1, psi1 = random_chain(rng, 2)
    phi2, psi2 = random_chain(rng, 2)
    lhs = tensor(compose(phi1, psi1), compose(phi2, psi2))
    rhs = compose(tensor(phi1, phi2), tensor(psi1, psi2))
    assert lhs == rhs
    assert validate(lhs) == []
    assert len(lhs.wires) == len(compose(phi1, psi1).wires) + len(compose(phi2, psi2).wires)


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_omega_matrix_equation(rng):
    phi, psi = random_chain(rng, 2)
    assert phi_matrix(compose(phi, psi)) == compose_phi_matrices(phi_matrix(phi), phi_matrix(psi))


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_phi_matrix_is_block_permutation(rng):
    d = random_diagram_from(rng, random_box(rng))
    full = phi_matrix(d).full()
    assert not phi_matrix(d).YY.any()
    n = full.shape[0]
    assert full.shape == (n, n)
    assert np.array_equal(full @ full.T, np.eye(n))
    # each wire is one identity block
    for a, b in d.wires.items():
        assert d.dim(a) == d.dim(b)


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_dot_deterministic(rng):
    d = random_diagram_from(rng, random_box(rng))
    assert to_dot(d) == to_dot(WiringDiagram(d.dom, d.cod, dict(reversed(list(d.wires.items())))))
