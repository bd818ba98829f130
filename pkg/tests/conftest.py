import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opendyn import fixture_path  # noqa: E402
from opendyn.algebra_linear import LinearOpenSystem  # noqa: E402
from opendyn.core_types import TypedFiniteSet  # noqa: E402
from opendyn.wiring import BoxInterface, OperadicWiring, WiringDiagram, xin, xout, yin, yout  # noqa: E402

TANKS = Path(str(fixture_path("tanks.wd")))

# composite tank system, hand-derived
A_TANK = np.array([[-0.1, 0.075], [0.1, -0.2]])
B_TANK = np.array([[0.0, 1.0], [1.0, 0.0]])
C_TANK = np.array([[0.0, 0.125]])


def tank_boxes():
    x1 = BoxInterface.of(["in_a", "in_b"], ["out_a"])
    x2 = BoxInterface.of(["in_a", "in_b"], ["out_a", "out_b"])
    y = BoxInterface.of(["in_a", "in_b"], ["out_a"])
    return x1, x2, y


def tank_systems():
    x1, x2, _ = tank_boxes()
    f1 = LinearOpenSystem(TypedFiniteSet.scalars(["Q1"]), x1, [[-0.1]], [[1, 1]], [[0.1]])
    f2 = LinearOpenSystem(TypedFiniteSet.scalars(["Q2"]), x2, [[-0.2]], [[1, 1]], [[0.125], [0.075]])
    return f1, f2


def tank_wiring() -> OperadicWiring:
    x1, x2, y = tank_boxes()
    return OperadicWiring(
        (("X1", x1), ("X2", x2)),
        y,
        {
            xin("X1.in_a"): yin("in_b"),
            xin("X1.in_b"): xout("X2.out_b"),
            xin("X2.in_a"): yin("in_a"),
            xin("X2.in_b"): xout("X1.out_a"),
            yout("out_a"): xout("X2.out_a"),
        },
    )


def table1():
    x = BoxInterface.of(["a", "b"], ["c", "d"])
    y = BoxInterface.of(["m"], ["n"])
    return WiringDiagram(x, y, {xin("a"): yin("m"), xin("b"): xout("d"), yout("n"): xout("c")})


def table2():
    """The pair composed in the worked composition example, plus the expected composite."""
    x = BoxInterface.of(["a", "b", "c"], ["d", "e", "f"])
    y = BoxInterface.of(["k", "l"], ["m", "n"])
    z = BoxInterface.of(["u"], ["v"])
    phi = WiringDiagram(x, y, {
        xin("a"): xout("d"), xin("b"): yin("k"), xin("c"): yin("l"),
        yout("m"): xout("e"), yout("n"): xout("f"),
    })
    psi = WiringDiagram(y, z, {xin("k"): yin("u"), xin("l"): xout("n"), yout("v"): xout("m")})
    omega = WiringDiagram(x, z, {xin("a"): xout("d"), xin("b"): yin("u"), xin("c"): xout("f"), yout("v"): xout("e")})
    return phi, psi, omega


@pytest.fixture
def tanks_path():
    return TANKS


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
