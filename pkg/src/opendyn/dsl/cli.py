"""Command-line front end: ``opendyn {validate,compose,flatten,simulate,export-dot}``.

Exit codes: 0 success, 1 usage error, 2 document or validation error,
3 numeric failure during simulation or solving.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..algebra_general import NonFiniteError
from ..simulator import SimulationError, SingularSystemError, simulate
from ..wiring import WiringError, phi_matrix, to_dot
from .build import NotLinearError, compose_document, simulation_setup, wired_linear
from .document import Diagnostic, DocumentError, parse_document, serialize, to_json
from .expr import format_number

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class _Failure(Exception):
    def __init__(self, code, diagnostics):
        self.code = code
        self.diagnostics = diagnostics


def _fail(code, err_code, message, file="<cli>"):
    raise _Failure(code, [Diagnostic("error", err_code, message, file)])


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _fail(EXIT_INVALID, "io", f"cannot read {path}: {exc.strerror}", path)
    try:
        return parse_document(text, path)
    except DocumentError as exc:
        raise _Failure(EXIT_INVALID, exc.diagnostics)


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _wiring_name(doc, name, path):
    if name is None:
        if len(doc.wirings) != 1:
            _fail(EXIT_USAGE, "usage", f"{path} has {len(doc.wirings)} wirings; choose one with --wiring")
        return next(iter(doc.wirings))
    if name not in doc.wirings:
        _fail(EXIT_INVALID, "unresolved", f"no wiring named {name!r}", path)
    return name


def _matrix_lines(label, m):
    if m.size == 0:
        return [f"{label} = []" if m.shape[0] == 0 else f"{label} = [" + ", ".join("[]" for _ in range(m.shape[0])) + "]"]
    rows = ["[" + ", ".join(format_number(float(x)) + "" for x in r) + "]" for r in m]
    return [f"{label} = [" + ", ".join(rows) + "]"]


def cmd_validate(args):
    doc = _load(args.file)
    print(f"ok: {len(doc.boxes)} boxes, {len(doc.systems)} systems, {len(doc.wirings)} wirings")


def cmd_compose(args):
    doc = _load(args.file)
    name = _wiring_name(doc, args.wiring, args.file)
    out = compose_document(doc, name)
    if args.json:
        _write(json.dumps(to_json(out), indent=2, sort_keys=True) + "\n", args.out)
    else:
        _write(serialize(out), args.out)


def cmd_flatten(args):
    doc = _load(args.file)
    name = _wiring_name(doc, args.wiring, args.file)
    try:
        lin = wired_linear(name, doc)
    except NotLinearError as exc:
        _fail(EXIT_INVALID, "not_linear", str(exc), args.file)
    if args.format == "json":
        blocks = phi_matrix(_flat(doc, name))
        data = {
            "states": lin.states.component_labels(),
            "inputs": lin.box.inputs.component_labels(),
            "outputs": lin.box.outputs.component_labels(),
            "A": lin.A.tolist(), "B": lin.B.tolist(), "C": lin.C.tolist(),
            "phi": {k: getattr(blocks, k).tolist() for k in ("XX", "XY", "YX", "YY")},
        }
        _write(json.dumps(data, indent=2, sort_keys=True) + "\n", args.out)
        return
    lines = [
        f"# {name}",
        "# states:  " + ", ".join(lin.states.component_labels()),
        "# inputs:  " + ", ".join(lin.box.inputs.component_labels()),
        "# outputs: " + ", ".join(lin.box.outputs.component_labels()),
    ]
    lines += _matrix_lines("A", lin.A) + _matrix_lines("B", lin.B) + _matrix_lines("C", lin.C)
    _write("\n".join(lines) + "\n", args.out)


def _flat(doc, name):
    from ..wiring import flatten_operadic
    return flatten_operadic(doc.operadic(name))


def _floats(text, what):
    try:
        return [float(x) for x in text.replace("[", "").replace("]", "").split(",") if x.strip()]
    except ValueError:
        _fail(EXIT_USAGE, "usage", f"{what} must be a comma-separated list of numbers")


def cmd_simulate(args):
    doc = _load(args.file)
    overrides = {}
    for item in args.input or []:
        port, sep, value = item.partition("=")
        if not sep:
            _fail(EXIT_USAGE, "usage", f"--input expects PORT=VALUES, got {item!r}")
        overrides[port.strip()] = np.array(_floats(value, f"--input {port}"))
    x0 = None if args.x0 is None else _floats(args.x0, "--x0")
    try:
        sys_, x0v, u, cfg = simulation_setup(
            doc, args.target, x0=x0, inputs=overrides, t0=args.t0, t1=args.t1, dt=args.dt, method=args.method
        )
        traj = simulate(sys_, x0v, u, cfg)
    except (SimulationError, WiringError, NotLinearError) as exc:
        _fail(EXIT_INVALID, "invalid_simulation", str(exc), args.file)
    except NonFiniteError as exc:
        _fail(EXIT_NUMERIC, "non_finite", str(exc), args.file)
    _write(traj.to_csv(), args.csv)


def cmd_export_dot(args):
    doc = _load(args.file)
    name = _wiring_name(doc, args.wiring, args.file)
    _write(to_dot(doc.operadic(name), name=name), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="opendyn", description="Compose and simulate wired open dynamical systems.")
    p.add_argument("--json-errors", action="store_true", help="report diagnostics as JSON lines on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="parse and check a document")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compose", help="replace a wiring by the single system it produces")
    c.add_argument("file")
    c.add_argument("--wiring")
    c.add_argument("--out", "-o")
    c.add_argument("--json", action="store_true", help="write the JSON mirror instead of text")
    c.set_defaults(func=cmd_compose)

    f = sub.add_parser("flatten", help="print the composite A, B, C of a linear wiring")
    f.add_argument("file")
    f.add_argument("--wiring")
    f.add_argument("--format", choices=("matrix", "json"), default="matrix")
    f.add_argument("--out", "-o")
    f.set_defaults(func=cmd_flatten)

    s = sub.add_parser("simulate", help="integrate a system and write a CSV trajectory")
    s.add_argument("file")
    s.add_argument("--target", help="system or wiring to run (default: the simulate block's)")
    s.add_argument("--x0", help="initial state, comma separated")
    s.add_argument("--input", action="append", metavar="PORT=VALUES", help="constant input; repeatable")
    s.add_argument("--t0", type=float)
    s.add_argument("--t1", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--method", choices=("euler", "rk4"))
    s.add_argument("--csv", help="output path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("export-dot", help="write a wiring as Graphviz DOT")
    d.add_argument("file")
    d.add_argument("--wiring")
    d.add_argument("--out", "-o")
    d.set_defaults(func=cmd_export_dot)
    return p


def _report(diags, as_json):
    for d in diags:
        print(d.to_json() if as_json else str(d), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _Failure as exc:
        _report(exc.diagnostics, args.json_errors)
        return exc.code
    except SingularSystemError as exc:
        _report([Diagnostic("error", "singular", str(exc), "<cli>")], args.json_errors)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
