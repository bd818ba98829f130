"""Wiring diagrams acting on open dynamical systems.

Boxes carry typed ports; wiring diagrams connect boxes; open systems
(general or linear) live on boxes and are transported along diagrams.
"""

from importlib.resources import files

from .algebra_general import (
    NonFiniteError,
    OpenSystem,
    apply_operadic,
    apply_wiring,
    evaluate,
    product,
    product_many,
)
from .algebra_linear import (
    LinearOpenSystem,
    apply_operadic_linear,
    apply_wiring_linear,
    compose_phi_matrices,
    product_linear,
    to_general,
)
from .core_types import PortType, TypedBijection, TypedFiniteSet, TypedFunction, coproduct, pullback
from .simulator import InputSignal, Method, SimConfig, Trajectory, equilibrium, simulate
from .wiring import (
    BoxInterface,
    OperadicWiring,
    Port,
    WiringDiagram,
    WiringError,
    compose,
    flatten_operadic,
    identity,
    phi_matrix,
    tensor,
    to_dot,
    validate,
)

__version__ = "0.1.0"


def fixture_path(name: str = "tanks.wd"):
    """Path of a document shipped with the package."""
    return files(__name__) / "data" / name


__all__ = [
    "BoxInterface", "InputSignal", "LinearOpenSystem", "Method", "NonFiniteError", "OpenSystem",
    "OperadicWiring", "Port", "PortType", "SimConfig", "Trajectory", "TypedBijection", "TypedFiniteSet",
    "TypedFunction", "WiringDiagram", "WiringError", "apply_operadic", "apply_operadic_linear",
    "apply_wiring", "apply_wiring_linear", "compose", "compose_phi_matrices", "coproduct", "equilibrium",
    "evaluate", "fixture_path", "flatten_operadic", "identity", "phi_matrix", "product", "product_linear",
    "product_many", "pullback", "simulate", "tensor", "to_dot", "to_general", "validate",
]
