"""The line-oriented system-description format.

A document is a sequence of blocks, each closed by ``end``::

    box Tank
      in  in_a:1, in_b:1
      out out_a:1
    end

    system f1 on Tank linear
      states Q1:1
      A = [[-0.1]]
      B = [[1, 1]]
      C = [[0.1]]
    end

    system g on Tank expr
      states Q1:1
      der Q1 = -0.1*Q1 + in_a + in_b
      out out_a = 0.1*Q1
    end

    wiring pipes : X1:Tank, X2:Tank2 -> Y
      bind X1 = f1
      X1.in_a -> Y.in_b
      Y.out_a -> X2.out_a
    end

    simulate pipes
      x0 = 0, 0
      input in_a = 3
      t1 = 400
      dt = 0.01
      method = rk4
    end

Wires run ``a -> b`` with ``a`` an inner input or an outer output and ``b``
an inner output or an outer input.  ``#`` starts a comment.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass, field

from ..core_types import TypedFiniteSet
from ..simulator import Method, SimConfig, SimulationError
from ..wiring import BoxInterface, OperadicWiring, Port, XIN, XOUT, YIN, YOUT, validate_operadic
from .expr import Expr, ExprError, Num, format_number, is_constant, parse_expr, to_text, variables

NAME = r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*"
SIMPLE = r"[A-Za-z_][A-Za-z0-9_]*"
_NAME_RE = re.compile(NAME)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    file: str = "<string>"
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}: {self.severity}: {self.message} [{self.code}]"

    def to_json(self) -> str:
        return json.dumps(
            {"severity": self.severity, "code": self.code, "message": self.message,
             "file": self.file, "line": self.line, "col": self.col},
            sort_keys=True,
        )


class DocumentError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(map(str, self.diagnostics)))


@dataclass(frozen=True)
class LinearSystemDecl:
    name: str
    box: str
    states: TypedFiniteSet
    A: tuple
    B: tuple
    C: tuple
    line: int = field(default=0, compare=False)

    kind = "linear"


@dataclass(frozen=True)
class ExprSystemDecl:
    """Expression-defined system; ``ders`` and ``outs`` map ``(name, component)`` to an expression."""

    name: str
    box: str
    states: TypedFiniteSet
    ders: tuple[tuple[tuple[str, int], Expr], ...]
    outs: tuple[tuple[tuple[str, int], Expr], ...]
    line: int = field(default=0, compare=False)

    kind = "expr"


@dataclass(frozen=True)
class WiringDecl:
    name: str
    instances: tuple[tuple[str, str], ...]
    outer: str
    binds: tuple[tuple[str, str], ...]
    wires: tuple[tuple[str, str], ...]
    line: int = field(default=0, compare=False)
    wire_lines: tuple[int, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class SimulateDecl:
    target: str
    x0: tuple[float, ...] | None = None
    inputs: tuple[tuple[str, tuple[Expr, ...]], ...] = ()
    t0: float | None = None
    t1: float | None = None
    dt: float | None = None
    method: str | None = None
    line: int = field(default=0, compare=False)


@dataclass
class SystemDocument:
    boxes: dict[str, BoxInterface] = field(default_factory=dict)
    systems: dict[str, LinearSystemDecl | ExprSystemDecl] = field(default_factory=dict)
    wirings: dict[str, WiringDecl] = field(default_factory=dict)
    simulate: SimulateDecl | None = None
    box_lines: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def operadic(self, name: str) -> OperadicWiring:
        w = self.wirings[name]
        return operadic_from_decl(w, self.boxes)


def component_key(name: str, index: int | None) -> tuple[str, int]:
    return name, index or 0


def _label(key: tuple[str, int], dim: int) -> str:
    return key[0] if dim == 1 else f"{key[0]}[{key[1]}]"


# -- parsing ---------------------------------------------------------------

class _Reader:
    def __init__(self, text, filename):
        self.lines = text.splitlines()
        self.filename = filename
        self.diags: list[Diagnostic] = []

    def error(self, code, message, line, col=1):
        self.diags.append(Diagnostic("error", code, message, self.filename, line, col))


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def _parse_ports(text, r: _Reader, lineno, col0):
    ports = []
    text = text.strip()
    if not text:
        return ports
    for part in text.split(","):
        part_s = part.strip()
        col = col0 + text.find(part_s) + 1 if part_s else col0
        m = re.fullmatch(rf"({NAME})\s*(?::\s*(\d+))?", part_s)
        if not m:
            r.error("syntax", f"bad port declaration {part_s!r}; expected name:dim", lineno, col)
            continue
        ports.append((m.group(1), int(m.group(2)) if m.group(2) else 1))
    return ports


def _tfs(ports, r, lineno, what):
    try:
        return TypedFiniteSet(tuple(ports))
    except ValueError as exc:
        r.error("duplicate", f"{what}: {exc}", lineno)
        seen, uniq = set(), []
        for n, d in ports:
            if n not in seen:
                seen.add(n)
                uniq.append((n, d))
        return TypedFiniteSet(tuple(uniq))


def _literal_numbers(text, r, lineno, col, what):
    try:
        value = ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        r.error("syntax", f"{what} is not a numeric literal", lineno, col)
        return None

    def check(v):
        if isinstance(v, (list, tuple)):
            return [check(x) for x in v]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError
        return float(v)

    try:
        return check(value)
    except TypeError:
        r.error("syntax", f"{what} must contain numbers only", lineno, col)
        return None


def _blocks(r: _Reader):
    """Yield ``(header_tokens, header_line, body)`` per block; body holds ``(lineno, text)``."""
    i = 0
    n = len(r.lines)
    while i < n:
        raw = _strip_comment(r.lines[i])
        i += 1
        if not raw.strip():
            continue
        head_line = i
        body = []
        closed = False
        while i < n:
            txt = _strip_comment(r.lines[i])
            i += 1
            if txt.strip() == "end":
                closed = True
                break
            if txt.strip():
                body.append((i, txt))
        if not closed:
            r.error("syntax", "block is missing its closing 'end'", head_line, 1)
        yield raw, head_line, body


def parse_document(text: str, filename: str = "<string>") -> SystemDocument:
    """Parse and resolve a document; raises :class:`DocumentError` with every diagnostic found."""
    r = _Reader(text, filename)
    doc = SystemDocument()
    for head, lineno, body in _blocks(r):
        kw = head.split(None, 1)[0]
        col = len(head) - len(head.lstrip()) + 1
        if kw == "box":
            _parse_box(head, lineno, body, r, doc)
        elif kw == "system":
            _parse_system(head, lineno, body, r, doc)
        elif kw == "wiring":
            _parse_wiring(head, lineno, body, r, doc)
        elif kw == "simulate":
            _parse_simulate(head, lineno, body, r, doc)
        else:
            r.error("syntax", f"unknown block keyword {kw!r}", lineno, col)
    if not r.diags:
        resolve(doc, r)
    if r.diags:
        raise DocumentError(r.diags)
    return doc


def _parse_box(head, lineno, body, r, doc):
    m = re.fullmatch(rf"\s*box\s+({SIMPLE})\s*", head)
    if not m:
        r.error("syntax", "expected 'box NAME'", lineno)
        return
    name = m.group(1)
    ins, outs = [], []
    for ln, txt in body:
        bm = re.fullmatch(r"(\s*)(in|out)\b(.*)", txt)
        if not bm:
            r.error("syntax", "box body lines start with 'in' or 'out'", ln, len(txt) - len(txt.lstrip()) + 1)
            continue
        target = ins if bm.group(2) == "in" else outs
        target.extend(_parse_ports(bm.group(3), r, ln, len(bm.group(1)) + len(bm.group(2))))
    if name in doc.boxes:
        r.error("duplicate", f"box {name!r} is declared twice", lineno)
        return
    inputs = _tfs(ins, r, lineno, f"inputs of box {name!r}")
    outputs = _tfs(outs, r, lineno, f"outputs of box {name!r}")
    try:
        doc.boxes[name] = BoxInterface(inputs, outputs)
    except ValueError as exc:
        r.error("duplicate", f"box {name!r}: {exc}", lineno)
        return
    doc.box_lines[name] = lineno


def _parse_system(head, lineno, body, r, doc):
    m = re.fullmatch(rf"\s*system\s+({SIMPLE})\s+on\s+({SIMPLE})\s+(linear|expr)\s*", head)
    if not m:
        r.error("syntax", "expected 'system NAME on BOX linear|expr'", lineno)
        return
    name, box_name, kind = m.groups()
    if name in doc.systems or name in doc.wirings:
        r.error("duplicate", f"name {name!r} is already used by another system or wiring", lineno)
        return
    box = doc.boxes.get(box_name)
    if box is None:
        r.error("unresolved", f"system {name!r} refers to undeclared box {box_name!r}", lineno,
                head.find(box_name, head.find(" on ")) + 1)
        return
    states = TypedFiniteSet()
    got_states = False
    rest = []
    for ln, txt in body:
        sm = re.fullmatch(r"(\s*)states\b(.*)", txt)
        if sm:
            states = _tfs(_parse_ports(sm.group(2), r, ln, len(sm.group(1)) + 6), r, ln, f"states of {name!r}")
            got_states = True
        else:
            rest.append((ln, txt))
    if not got_states:
        r.error("syntax", f"system {name!r} needs a 'states' line (may be empty)", lineno)
    clash = set(states) & (set(box.inputs) | set(box.outputs))
    if clash:
        r.error("duplicate", f"system {name!r}: state names clash with port names {sorted(clash)}", lineno)
        return
    if kind == "linear":
        _parse_linear(name, box_name, box, states, lineno, rest, r, doc)
    else:
        _parse_expr_system(name, box_name, box, states, lineno, rest, r, doc)


def _parse_linear(name, box_name, box, states, lineno, body, r, doc):
    m = states.total_dim
    shapes = {"A": (m, m), "B": (m, box.inputs.total_dim), "C": (box.outputs.total_dim, m)}
    mats = {}
    for ln, txt in body:
        lm = re.fullmatch(r"(\s*)([ABC])\s*=(.*)", txt)
        if not lm:
            r.error("syntax", "linear system body lines are 'A = ...', 'B = ...' or 'C = ...'", ln,
                    len(txt) - len(txt.lstrip()) + 1)
            continue
        key = lm.group(2)
        if key in mats:
            r.error("duplicate", f"matrix {key} given twice", ln, len(lm.group(1)) + 1)
            continue
        col = len(lm.group(1)) + txt[len(lm.group(1)):].find("=") + 2
        value = _literal_numbers(lm.group(3), r, ln, col, f"matrix {key}")
        if value is None:
            mats[key] = None
            continue
        rows, cols = shapes[key]
        ok = isinstance(value, list) and all(isinstance(row, list) for row in value)
        if ok and rows * cols == 0 and all(len(row) == 0 for row in value) and len(value) in (0, rows):
            mats[key] = tuple(tuple() for _ in range(rows))
            continue
        if not ok or len(value) != rows or any(len(row) != cols for row in value) or any(
            isinstance(x, list) for row in value for x in row
        ):
            got = f"{len(value)}x{len(value[0]) if value and isinstance(value[0], list) else '?'}" if isinstance(value, list) else "scalar"
            r.error("dimension_mismatch", f"matrix {key} of {name!r} must be {rows}x{cols}, got {got}", ln, col)
            mats[key] = None
            continue
        mats[key] = tuple(tuple(row) for row in value)
    for key, (rows, cols) in shapes.items():
        if key not in mats:
            mats[key] = tuple(tuple(0.0 for _ in range(cols)) for _ in range(rows))
    if any(v is None for v in mats.values()):
        return
    doc.systems[name] = LinearSystemDecl(name, box_name, states, mats["A"], mats["B"], mats["C"], lineno)


def _components(s: TypedFiniteSet):
    return [(n, i) for n in s for i in range(s.dim_of(n))]


def _parse_expr_system(name, box_name, box, states, lineno, body, r, doc):
    scope_in = {n: states.dim_of(n) for n in states}
    scope_in.update({n: box.inputs.dim_of(n) for n in box.inputs})
    scope_out = {n: states.dim_of(n) for n in states}
    ders, outs = {}, {}
    for ln, txt in body:
        lm = re.fullmatch(rf"(\s*)(der|out)\s+({NAME})\s*(?:\[\s*(\d+)\s*\])?\s*=(.*)", txt)
        if not lm:
            r.error("syntax", "expression system lines are 'der STATE = EXPR' or 'out PORT = EXPR'", ln,
                    len(txt) - len(txt.lstrip()) + 1)
            continue
        indent, which, target, idx, rhs = lm.groups()
        index = int(idx) if idx is not None else None
        pool = states if which == "der" else box.outputs
        tcol = len(indent) + len(which) + 2
        if target not in pool:
            what = "state" if which == "der" else "output port"
            r.error("unresolved", f"{which} names unknown {what} {target!r}", ln, tcol)
            continue
        dim = pool.dim_of(target)
        if index is None and dim != 1:
            r.error("dimension_mismatch", f"{target!r} has {dim} components; write {target}[i]", ln, tcol)
            continue
        if index is not None and index >= dim:
            r.error("dimension_mismatch", f"component {index} out of range for {target!r} (dim {dim})", ln, tcol)
            continue
        key = component_key(target, index)
        table = ders if which == "der" else outs
        if key in table:
            r.error("duplicate", f"{which} for {_label(key, dim)} is given twice", ln, tcol)
            continue
        rhs_col = len(txt) - len(rhs) + 1
        try:
            expr = parse_expr(rhs, scope_in if which == "der" else scope_out)
        except ExprError as exc:
            code = "unresolved" if "unknown" in exc.bare else "syntax"
            if which == "out" and "unknown identifier" in exc.bare and any(
                f"'{n}'" in exc.bare for n in box.inputs
            ):
                exc_msg = exc.bare + " (a readout may depend on the state only)"
            else:
                exc_msg = exc.bare
            r.error(code, exc_msg, ln, rhs_col + (exc.col or 1) - 1)
            continue
        table[key] = expr
    for key in _components(states):
        if key not in ders:
            r.error("unresolved", f"system {name!r} has no 'der' for state {_label(key, states.dim_of(key[0]))}", lineno)
    for key in _components(box.outputs):
        if key not in outs:
            r.error("unresolved", f"system {name!r} has no 'out' for port {_label(key, box.outputs.dim_of(key[0]))}", lineno)
    order_s = _components(states)
    order_o = _components(box.outputs)
    doc.systems[name] = ExprSystemDecl(
        name, box_name, states,
        tuple((k, ders[k]) for k in order_s if k in ders),
        tuple((k, outs[k]) for k in order_o if k in outs),
        lineno,
    )


def _parse_wiring(head, lineno, body, r, doc):
    m = re.fullmatch(rf"\s*wiring\s+({SIMPLE})\s*:(.*)->\s*({SIMPLE})\s*", head)
    if not m:
        r.error("syntax", "expected 'wiring NAME : [INST[:BOX], ...] -> BOX'", lineno)
        return
    name, inner, outer = m.groups()
    if name in doc.systems or name in doc.wirings:
        r.error("duplicate", f"name {name!r} is already used by another system or wiring", lineno)
        return
    instances = []
    if inner.strip():
        for part in inner.split(","):
            pm = re.fullmatch(rf"\s*({SIMPLE})\s*(?::\s*({SIMPLE}))?\s*", part)
            if not pm:
                r.error("syntax", f"bad inner box {part.strip()!r}; expected INST or INST:BOX", lineno)
                return
            instances.append((pm.group(1), pm.group(2) or pm.group(1)))
    binds, wires, wire_lines = [], [], []
    for ln, txt in body:
        ind = len(txt) - len(txt.lstrip()) + 1
        bm = re.fullmatch(rf"\s*bind\s+({SIMPLE})\s*=\s*({SIMPLE})\s*", txt)
        if bm:
            binds.append((bm.group(1), bm.group(2)))
            continue
        wm = re.fullmatch(rf"\s*({NAME})\s*->\s*({NAME})\s*", txt)
        if wm:
            wires.append((wm.group(1), wm.group(2)))
            wire_lines.append(ln)
            continue
        r.error("syntax", "wiring body lines are 'bind INST = SYSTEM' or 'SRC -> DST'", ln, ind)
    doc.wirings[name] = WiringDecl(name, tuple(instances), outer, tuple(binds), tuple(wires), lineno, tuple(wire_lines))


def _parse_number(text, r, ln, col, what):
    try:
        v = float(text)
    except ValueError:
        r.error("syntax", f"{what} must be a number", ln, col)
        return None
    if not math.isfinite(v):
        r.error("syntax", f"{what} must be finite", ln, col)
        return None
    return v


def _parse_simulate(head, lineno, body, r, doc):
    m = re.fullmatch(rf"\s*simulate\s+({SIMPLE})\s*", head)
    if not m:
        r.error("syntax", "expected 'simulate TARGET'", lineno)
        return
    if doc.simulate is not None:
        r.error("duplicate", "only one simulate block is allowed", lineno)
        return
    vals: dict = {"inputs": []}
    for ln, txt in body:
        ind = len(txt) - len(txt.lstrip()) + 1
        im = re.fullmatch(rf"\s*input\s+({NAME})\s*=(.*)", txt)
        if im:
            exprs = []
            rhs = im.group(2)
            col0 = len(txt) - len(rhs) + 1
            for part in _split_top_commas(rhs):
                try:
                    exprs.append(parse_expr(part, {"t": 1}))
                except ExprError as exc:
                    code = "unresolved" if "unknown" in exc.bare else "syntax"
                    r.error(code, f"input {im.group(1)!r}: {exc.bare}", ln, col0)
                    exprs = None
                    break
            if exprs is not None:
                if any(n == im.group(1) for n, _ in vals["inputs"]):
                    r.error("duplicate", f"input {im.group(1)!r} given twice", ln, ind)
                else:
                    vals["inputs"].append((im.group(1), tuple(exprs)))
            continue
        km = re.fullmatch(r"\s*(x0|t0|t1|dt|method)\s*=(.*)", txt)
        if not km:
            r.error("syntax", "simulate lines are 'x0 = ...', 'input PORT = ...', 't0/t1/dt = NUMBER' or 'method = euler|rk4'", ln, ind)
            continue
        key, rhs = km.group(1), km.group(2).strip()
        col = len(txt) - len(km.group(2)) + 1
        if key in vals:
            r.error("duplicate", f"{key} given twice", ln, ind)
            continue
        if key == "x0":
            lit = rhs if rhs.startswith("[") else f"[{rhs}]"
            v = _literal_numbers(lit, r, ln, col, "x0")
            if v is not None and any(isinstance(x, list) for x in v):
                r.error("syntax", "x0 must be a flat list of numbers", ln, col)
                v = None
            if v is not None:
                vals["x0"] = tuple(v)
        elif key == "method":
            if rhs not in ("euler", "rk4"):
                r.error("syntax", f"unknown method {rhs!r}; use euler or rk4", ln, col)
            else:
                vals["method"] = rhs
        else:
            v = _parse_number(rhs, r, ln, col, key)
            if v is not None:
                vals[key] = v
    inputs = tuple(vals.pop("inputs"))
    doc.simulate = SimulateDecl(m.group(1), inputs=inputs, line=lineno, **vals)


def _split_top_commas(text):
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return parts


# -- resolution ------------------------------------------------------------

def _endpoint(text, w: WiringDecl, boxes, inst_boxes):
    """Resolve ``inst.port`` / ``OUTER.port`` to a :class:`Port` or explain why not."""
    head, sep, port = text.partition(".")
    if not sep:
        return None, f"endpoint {text!r} must be written INST.port or {w.outer}.port"
    if head == w.outer:
        box = boxes[w.outer]
        if port in box.inputs:
            return Port(YIN, port), None
        if port in box.outputs:
            return Port(YOUT, port), None
        return None, f"outer box {w.outer!r} has no port {port!r}"
    if head in inst_boxes:
        box = boxes[inst_boxes[head]]
        if port in box.inputs:
            return Port(XIN, text), None
        if port in box.outputs:
            return Port(XOUT, text), None
        return None, f"inner box {head!r} ({inst_boxes[head]}) has no port {port!r}"
    return None, f"{head!r} is neither an inner box of this wiring nor the outer box {w.outer!r}"


def _endpoint_dim(p: Port, w, boxes, inst_boxes):
    if p.role in (YIN, YOUT):
        box = boxes[w.outer]
        return (box.inputs if p.role == YIN else box.outputs).dim_of(p.name)
    inst, port = p.name.split(".", 1)
    box = boxes[inst_boxes[inst]]
    return (box.inputs if p.role == XIN else box.outputs).dim_of(port)


def operadic_from_decl(w: WiringDecl, boxes) -> OperadicWiring:
    inst_boxes = dict(w.instances)
    wires = {}
    for a, b in w.wires:
        pa, _ = _endpoint(a, w, boxes, inst_boxes)
        pb, _ = _endpoint(b, w, boxes, inst_boxes)
        wires[pa] = pb
    return OperadicWiring(tuple((i, boxes[b]) for i, b in w.instances), boxes[w.outer], wires)


def resolve(doc: SystemDocument, r: _Reader) -> None:
    for w in doc.wirings.values():
        _resolve_wiring(doc, w, r)
    if doc.simulate is not None:
        _resolve_simulate(doc, doc.simulate, r)


def _resolve_wiring(doc, w: WiringDecl, r):
    ln = w.line
    ok = True
    if w.outer not in doc.boxes:
        r.error("unresolved", f"wiring {w.name!r} refers to undeclared outer box {w.outer!r}", ln)
        ok = False
    seen = set()
    for inst, box in w.instances:
        if inst in seen:
            r.error("duplicate", f"inner box name {inst!r} is used twice in wiring {w.name!r}", ln)
            ok = False
        seen.add(inst)
        if inst == w.outer:
            r.error("duplicate", f"inner box name {inst!r} clashes with the outer box name", ln)
            ok = False
        if box not in doc.boxes:
            r.error("unresolved", f"wiring {w.name!r} refers to undeclared box {box!r}", ln)
            ok = False
    inst_boxes = dict(w.instances)
    bound = set()
    for inst, sysname in w.binds:
        if inst not in inst_boxes:
            r.error("unresolved", f"bind names unknown inner box {inst!r}", ln)
        elif sysname not in doc.systems:
            r.error("unresolved", f"bind refers to undeclared system {sysname!r}", ln)
        elif doc.systems[sysname].box != inst_boxes[inst]:
            r.error("dimension_mismatch",
                    f"system {sysname!r} lives on box {doc.systems[sysname].box!r}, not {inst_boxes[inst]!r}", ln)
        elif inst in bound:
            r.error("duplicate", f"inner box {inst!r} is bound twice", ln)
        bound.add(inst)
    if not ok:
        return
    wire_ok = True
    sources = set()
    lines = w.wire_lines or (ln,) * len(w.wires)
    for (a, b), wl in zip(w.wires, lines):
        pa, ea = _endpoint(a, w, doc.boxes, inst_boxes)
        pb, eb = _endpoint(b, w, doc.boxes, inst_boxes)
        if ea or eb:
            r.error("unresolved", ea or eb, wl)
            wire_ok = False
            continue
        if pa.role not in (XIN, YOUT):
            r.error("invalid_wiring", f"wire source {a!r} must be an inner input or an outer output", wl)
            wire_ok = False
            continue
        if pb.role not in (XOUT, YIN):
            r.error("invalid_wiring", f"wire target {b!r} must be an inner output or an outer input", wl)
            wire_ok = False
            continue
        da = _endpoint_dim(pa, w, doc.boxes, inst_boxes)
        db = _endpoint_dim(pb, w, doc.boxes, inst_boxes)
        if da != db:
            r.error("dimension_mismatch", f"wire {a} -> {b} joins ports of unequal dimension ({a}: {da}, {b}: {db})", wl)
            wire_ok = False
        if pa in sources:
            r.error("invalid_wiring", f"port {a!r} has more than one wire", wl)
            wire_ok = False
        sources.add(pa)
    if not wire_ok:
        return
    for v in validate_operadic(operadic_from_decl(w, doc.boxes)):
        if v.code == "type_mismatch":
            continue
        r.error("invalid_wiring", f"wiring {w.name!r}: {v.message}", ln)


def state_dim_of_target(doc: SystemDocument, target: str) -> int | None:
    if target in doc.systems:
        return doc.systems[target].states.total_dim
    w = doc.wirings.get(target)
    if w is None:
        return None
    binds = dict(w.binds)
    if any(i not in binds for i, _ in w.instances):
        return None
    return sum(doc.systems[binds[i]].states.total_dim for i, _ in w.instances)


def outer_box_of_target(doc: SystemDocument, target: str) -> BoxInterface | None:
    if target in doc.systems:
        return doc.boxes[doc.systems[target].box]
    if target in doc.wirings:
        return doc.boxes[doc.wirings[target].outer]
    return None


def _resolve_simulate(doc, s: SimulateDecl, r):
    ln = s.line
    if s.target not in doc.systems and s.target not in doc.wirings:
        r.error("unresolved", f"simulate target {s.target!r} is not a system or wiring", ln)
        return
    w = doc.wirings.get(s.target)
    if w is not None:
        binds = dict(w.binds)
        missing = [i for i, _ in w.instances if i not in binds]
        if missing:
            r.error("unresolved", f"wiring {w.name!r} has unbound inner boxes {missing}", ln)
            return
    m = state_dim_of_target(doc, s.target)
    if s.x0 is not None and len(s.x0) != m:
        r.error("dimension_mismatch", f"x0 has {len(s.x0)} entries but the system has {m} states", ln)
    box = outer_box_of_target(doc, s.target)
    for port, exprs in s.inputs:
        if port not in box.inputs:
            r.error("unresolved", f"input {port!r} is not an input port of the simulated system", ln)
        elif len(exprs) != box.inputs.dim_of(port):
            r.error("dimension_mismatch",
                    f"input {port!r} needs {box.inputs.dim_of(port)} components, got {len(exprs)}", ln)
    try:
        sim_config(s)
    except SimulationError as exc:
        r.error("invalid_simulation", str(exc), ln)


def sim_config(s: SimulateDecl, **overrides) -> SimConfig:
    vals = {"t0": s.t0, "t1": s.t1, "dt": s.dt, "method": s.method}
    vals.update({k: v for k, v in overrides.items() if v is not None})
    defaults = SimConfig()
    return SimConfig(
        t0=vals["t0"] if vals["t0"] is not None else defaults.t0,
        t1=vals["t1"] if vals["t1"] is not None else defaults.t1,
        dt=vals["dt"] if vals["dt"] is not None else defaults.dt,
        method=Method(vals["method"]) if vals["method"] is not None else defaults.method,
    )


# -- serialization ---------------------------------------------------------

def _ports_text(s: TypedFiniteSet) -> str:
    return ", ".join(f"{n}:{s.dim_of(n)}" for n in s)


def _matrix_text(rows) -> str:
    return "[" + ", ".join("[" + ", ".join(format_number(x) for x in row) + "]" for row in rows) + "]"


def serialize_system(s) -> list[str]:
    lines = [f"system {s.name} on {s.box} {s.kind}", f"  states {_ports_text(s.states)}".rstrip()]
    if isinstance(s, LinearSystemDecl):
        lines += [f"  A = {_matrix_text(s.A)}", f"  B = {_matrix_text(s.B)}", f"  C = {_matrix_text(s.C)}"]
    else:
        dims = {n: s.states.dim_of(n) for n in s.states}
        for key, e in s.ders:
            lines.append(f"  der {_label(key, dims[key[0]])} = {to_text(e)}")
        for key, e in s.outs:
            lines.append(f"  out {key[0] if key[1] == 0 and not _is_vector_out(s, key) else f'{key[0]}[{key[1]}]'} = {to_text(e)}")
    lines.append("end")
    return lines


def _is_vector_out(s: ExprSystemDecl, key) -> bool:
    return sum(1 for k, _ in s.outs if k[0] == key[0]) > 1


def serialize(doc: SystemDocument) -> str:
    out: list[str] = []
    for name, box in doc.boxes.items():
        out.append(f"box {name}")
        if len(box.inputs):
            out.append(f"  in {_ports_text(box.inputs)}")
        if len(box.outputs):
            out.append(f"  out {_ports_text(box.outputs)}")
        out.append("end")
        out.append("")
    for s in doc.systems.values():
        out += serialize_system(s)
        out.append("")
    for w in doc.wirings.values():
        inner = ", ".join(i if i == b else f"{i}:{b}" for i, b in w.instances)
        out.append(f"wiring {w.name} : {inner} -> {w.outer}".replace(":  ->", ": ->"))
        for i, sname in w.binds:
            out.append(f"  bind {i} = {sname}")
        for a, b in w.wires:
            out.append(f"  {a} -> {b}")
        out.append("end")
        out.append("")
    s = doc.simulate
    if s is not None:
        out.append(f"simulate {s.target}")
        if s.x0 is not None:
            out.append("  x0 = [" + ", ".join(format_number(x) for x in s.x0) + "]")
        for port, exprs in s.inputs:
            out.append(f"  input {port} = " + ", ".join(to_text(e) for e in exprs))
        for key in ("t0", "t1", "dt"):
            v = getattr(s, key)
            if v is not None:
                out.append(f"  {key} = {format_number(v)}")
        if s.method is not None:
            out.append(f"  method = {s.method}")
        out.append("end")
        out.append("")
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n" if out else ""


# -- JSON mirror -----------------------------------------------------------

def _ports_json(s: TypedFiniteSet):
    return [[n, s.dim_of(n)] for n in s]


def to_json(doc: SystemDocument) -> dict:
    """Plain-data mirror of a document; expressions are kept as text."""
    systems = []
    for s in doc.systems.values():
        d = {"name": s.name, "box": s.box, "kind": s.kind, "states": _ports_json(s.states)}
        if isinstance(s, LinearSystemDecl):
            d.update(A=[list(r) for r in s.A], B=[list(r) for r in s.B], C=[list(r) for r in s.C])
        else:
            d["der"] = [[k[0], k[1], to_text(e)] for k, e in s.ders]
            d["out"] = [[k[0], k[1], to_text(e)] for k, e in s.outs]
        systems.append(d)
    out = {
        "boxes": [
            {"name": n, "in": _ports_json(b.inputs), "out": _ports_json(b.outputs)} for n, b in doc.boxes.items()
        ],
        "systems": systems,
        "wirings": [
            {"name": w.name, "inner": [list(x) for x in w.instances], "outer": w.outer,
             "bind": [list(x) for x in w.binds], "wires": [list(x) for x in w.wires]}
            for w in doc.wirings.values()
        ],
    }
    s = doc.simulate
    if s is not None:
        out["simulate"] = {
            "target": s.target, "x0": list(s.x0) if s.x0 is not None else None,
            "inputs": [[p, [to_text(e) for e in es]] for p, es in s.inputs],
            "t0": s.t0, "t1": s.t1, "dt": s.dt, "method": s.method,
        }
    return out


def from_json(data: dict, filename: str = "<json>") -> SystemDocument:
    """Rebuild a document from :func:`to_json` output, with the same checks as parsing."""
    return parse_document(serialize(_doc_from_json_unchecked(data)), filename)


def _doc_from_json_unchecked(data) -> SystemDocument:
    doc = SystemDocument()
    for b in data.get("boxes", []):
        doc.boxes[b["name"]] = BoxInterface(
            TypedFiniteSet(tuple(map(tuple, b.get("in", [])))), TypedFiniteSet(tuple(map(tuple, b.get("out", []))))
        )
    for s in data.get("systems", []):
        states = TypedFiniteSet(tuple(map(tuple, s.get("states", []))))
        if s["kind"] == "linear":
            doc.systems[s["name"]] = LinearSystemDecl(
                s["name"], s["box"], states,
                *(tuple(tuple(float(x) for x in r) for r in s[k]) for k in "ABC"),
            )
        else:
            doc.systems[s["name"]] = ExprSystemDecl(
                s["name"], s["box"], states,
                tuple(((n, i), parse_expr(t)) for n, i, t in s.get("der", [])),
                tuple(((n, i), parse_expr(t)) for n, i, t in s.get("out", [])),
            )
    for w in data.get("wirings", []):
        doc.wirings[w["name"]] = WiringDecl(
            w["name"], tuple(map(tuple, w.get("inner", []))), w["outer"],
            tuple(map(tuple, w.get("bind", []))), tuple(map(tuple, w.get("wires", []))),
        )
    s = data.get("simulate")
    if s:
        doc.simulate = SimulateDecl(
            s["target"], tuple(s["x0"]) if s.get("x0") is not None else None,
            tuple((p, tuple(parse_expr(t) for t in es)) for p, es in s.get("inputs", [])),
            s.get("t0"), s.get("t1"), s.get("dt"), s.get("method"),
        )
    return doc


def constant_value(e: Expr) -> float | None:
    return e.value if isinstance(e, Num) else None


__all__ = [
    "Diagnostic", "DocumentError", "ExprSystemDecl", "LinearSystemDecl", "SimulateDecl", "SystemDocument",
    "WiringDecl", "component_key", "from_json", "operadic_from_decl", "parse_document", "serialize",
    "serialize_system", "sim_config", "to_json", "is_constant", "variables",
]
