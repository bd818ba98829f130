"""Fixed-step integration of open systems and linear equilibria."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Union

import numpy as np

from .algebra_general import NonFiniteError, OpenSystem
from .algebra_linear import LinearOpenSystem
from .core_types import TypedFiniteSet


class Method(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class SimulationError(ValueError):
    pass


class SingularSystemError(ArithmeticError):
    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


Signal = Union[float, "np.ndarray", Callable[[float], "np.ndarray"]]


class InputSignal:
    """Per-port outer inputs, each a constant or a function of time."""

    def __init__(self, ports: TypedFiniteSet, values: Mapping[str, Signal] | None = None):
        values = dict(values or {})
        unknown = set(values) - set(ports)
        if unknown:
            raise SimulationError(f"inputs given for unknown ports: {sorted(unknown)}")
        missing = [p for p in ports if p not in values and ports.dim_of(p) > 0]
        if missing:
            raise SimulationError(f"no input given for ports: {missing}")
        self.ports = ports
        self._const = np.zeros(ports.total_dim)
        self._varying = []
        for name in ports:
            v = values.get(name, np.zeros(0))
            sl = ports.slice_of(name)
            if callable(v):
                self._varying.append((sl, v, ports.dim_of(name), name))
            else:
                v = np.atleast_1d(np.asarray(v, dtype=float))
                if v.shape != (ports.dim_of(name),):
                    raise SimulationError(f"input {name!r} needs {ports.dim_of(name)} components, got {v.size}")
                self._const[sl] = v
        self._const.setflags(write=False)

    @classmethod
    def constant(cls, ports: TypedFiniteSet, vector) -> "InputSignal":
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if vector.shape != (ports.total_dim,):
            raise SimulationError(f"input vector must have length {ports.total_dim}")
        return cls(ports, {p: vector[ports.slice_of(p)] for p in ports})

    @property
    def is_constant(self) -> bool:
        return not self._varying

    def __call__(self, t: float) -> np.ndarray:
        if not self._varying:
            return self._const
        u = self._const.copy()
        for sl, fn, dim, name in self._varying:
            v = np.atleast_1d(np.asarray(fn(t), dtype=float))
            if v.shape != (dim,):
                raise SimulationError(f"input {name!r} returned {v.size} components, expected {dim}")
            u[sl] = v
        return u


@dataclass(frozen=True)
class SimConfig:
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 0.01
    method: Method = Method.RK4

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("t0", "t1", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise SimulationError(f"{name} must be finite")
        if self.dt <= 0:
            raise SimulationError("dt must be positive")
        if self.t1 <= self.t0:
            raise SimulationError("t1 must be greater than t0")
        if self.dt > self.t1 - self.t0:
            raise SimulationError("dt must not exceed t1 - t0")

    def times(self) -> np.ndarray:
        span = self.t1 - self.t0
        n = math.floor(span / self.dt)
        # a remainder below 1e-9 steps is rounding noise, not a short final step
        if span - n * self.dt > 1e-9 * self.dt:
            return np.append(self.t0 + self.dt * np.arange(n + 1), self.t1)
        return np.append(self.t0 + self.dt * np.arange(n), self.t1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    state_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, digits: int = 12) -> str:
        buf = io.StringIO()
        buf.write(",".join(("t",) + self.state_labels + self.output_labels) + "\n")
        fmt = f"{{:.{digits}g}}"
        for t, s, y in zip(self.times, self.states, self.outputs):
            row = [t, *s, *y]
            buf.write(",".join(fmt.format(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path, digits: int = 12) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_csv(digits))


def _checked(v, n, t, labels, what):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise SimulationError(f"{what} has length {v.shape}, expected {n}")
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteError(
            f"non-finite {what} at t={t:g}, coordinate {labels[i]!r}: {v[i]}", coordinate=labels[i], time=t
        )
    return v


def simulate(sys: OpenSystem, x0, u, cfg: SimConfig) -> Trajectory:
    """Integrate ``sys`` from ``x0`` over ``[cfg.t0, cfg.t1]`` with a fixed step.

    ``u`` is an :class:`InputSignal`, a per-port mapping, or one flat
    constant vector over the input layout.

    RK4 samples the inputs at ``t``, ``t + h/2`` and ``t + h``.  The readout
    is recorded at every stored step.
    """
    m = sys.n_states
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (m,):
        raise SimulationError(f"initial state must have length {m}, got {x.size}")
    if u is None or isinstance(u, Mapping):
        u = InputSignal(sys.box.inputs, u)
    elif not isinstance(u, InputSignal):
        u = InputSignal.constant(sys.box.inputs, u)
    if u.ports != sys.box.inputs:
        raise SimulationError("input signal ports do not match the system's inputs")
    s_labels = sys.states.component_labels()
    y_labels = sys.box.outputs.component_labels()
    f_in, f_out = sys.f_in, sys.f_out
    n_out = sys.n_outputs

    def deriv(t, s):
        return _checked(f_in(s, u(t)), m, t, s_labels, "derivative")

    times = cfg.times()
    states = np.empty((len(times), m))
    outputs = np.empty((len(times), n_out))
    _checked(x, m, times[0], s_labels, "initial state")
    states[0] = x
    outputs[0] = _checked(f_out(x), n_out, times[0], y_labels, "output")
    rk4 = cfg.method is Method.RK4
    for k in range(1, len(times)):
        t = times[k - 1]
        h = times[k] - t
        if rk4:
            k1 = deriv(t, x)
            k2 = deriv(t + h / 2, x + h / 2 * k1)
            k3 = deriv(t + h / 2, x + h / 2 * k2)
            k4 = deriv(t + h, x + h * k3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            x = x + h * deriv(t, x)
        states[k] = x
        outputs[k] = _checked(f_out(x), n_out, times[k], y_labels, "output")
    return Trajectory(times, states, outputs, tuple(s_labels), tuple(y_labels))


def equilibrium(sys: LinearOpenSystem, u, max_condition: float = 1e12) -> np.ndarray:
    """Solve ``A s + B u = 0`` for the steady state under constant input ``u``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (sys.B.shape[1],):
        raise SimulationError(f"input must have length {sys.B.shape[1]}")
    if sys.n_states == 0:
        return np.zeros(0)
    cond = float(np.linalg.cond(sys.A))
    if not math.isfinite(cond) or cond > max_condition:
        raise SingularSystemError(f"state matrix is singular or ill-conditioned (condition number {cond:.3g})", cond)
    return np.linalg.solve(sys.A, -(sys.B @ u))
