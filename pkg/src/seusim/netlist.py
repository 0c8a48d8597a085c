"""Bench-format netlist parsing, validation, and structural transforms.

The accepted dialect is the classic ISCAS one:

    # comment
    INPUT(net)
    OUTPUT(net)
    net = KIND(net, net, ...)

with KIND one of AND, NAND, OR, NOR, NOT, BUF, XOR, XNOR plus DFF as a
pseudo-gate ``q = DFF(d)``.  Net names are case-sensitive; kinds are
normalized to upper case so files written with lower-case kinds still load.
Nets are declared by being an INPUT or the target of an assignment; every
other mention is a reference and must resolve.
"""

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from .errors import BenchParseError, InvariantError

GATE_KINDS = ("AND", "NAND", "OR", "NOR", "NOT", "BUF", "XOR", "XNOR")

# Controlling input value per kind, None where no value is controlling.
CONTROLLING = {
    "AND": 0,
    "NAND": 0,
    "OR": 1,
    "NOR": 1,
    "NOT": None,
    "BUF": None,
    "XOR": None,
    "XNOR": None,
}

_INVERTING = {"NAND", "NOR", "NOT", "XNOR"}


@dataclass(frozen=True)
class Gate:
    """One combinational gate; ``id`` equals the driven output net."""

    id: str
    kind: str
    inputs: tuple
    output: str


@dataclass(frozen=True)
class Flop:
    """A D flip-flop; ``id`` equals its output net."""

    id: str
    data: str
    output: str


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    location: str = ""

    def __str__(self):
        loc = f" ({self.location})" if self.location else ""
        return f"{self.code}: {self.message}{loc}"


@dataclass
class Diagnostics:
    """Validation outcome: empty ``errors`` means every invariant holds."""

    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors


@dataclass(frozen=True)
class Circuit:
    """Immutable gate-level circuit.

    ``nets`` is the set of declared nets; declaration order is preserved in
    ``primary_inputs`` / ``primary_outputs`` / ``gates`` / ``flops`` so that
    identical sources always produce identical iteration order downstream.
    """

    name: str
    primary_inputs: tuple
    primary_outputs: tuple
    gates: tuple
    flops: tuple
    nets: frozenset

    @cached_property
    def gate_by_id(self):
        return {g.id: g for g in self.gates}

    @cached_property
    def flop_by_id(self):
        return {f.id: f for f in self.flops}

    @cached_property
    def driver(self):
        """net -> ("pi", None) | ("gate", Gate) | ("flop", Flop); first wins."""
        out = {}
        for pi in self.primary_inputs:
            out.setdefault(pi, ("pi", None))
        for g in self.gates:
            out.setdefault(g.output, ("gate", g))
        for f in self.flops:
            out.setdefault(f.output, ("flop", f))
        return out

    @cached_property
    def gate_fanout(self):
        """net -> tuple of gates reading it, in declaration order."""
        out = {}
        for g in self.gates:
            for n in g.inputs:
                out.setdefault(n, []).append(g)
        return {n: tuple(gs) for n, gs in out.items()}

    @cached_property
    def flops_by_data(self):
        """data net -> tuple of flop ids latching it."""
        out = {}
        for f in self.flops:
            out.setdefault(f.data, []).append(f.id)
        return {n: tuple(ids) for n, ids in out.items()}

    def stats(self):
        return {
            "inputs": len(self.primary_inputs),
            "outputs": len(self.primary_outputs),
            "gates": len(self.gates),
            "flops": len(self.flops),
            "nets": len(self.nets),
        }


_DECL_RE = re.compile(r"(INPUT|OUTPUT)\s*\(\s*([^\s(),=#]+)\s*\)\s*$")
_ASSIGN_RE = re.compile(
    r"([^\s(),=#]+)\s*=\s*([A-Za-z]+)\s*\(\s*([^()#]*?)\s*\)\s*$"
)


def parse_bench(text, name="bench"):
    """Parse bench-format ``text`` into a Circuit.

    Raises BenchParseError on the first syntax error and, after a full scan,
    on duplicate drivers, unknown gate kinds, or references to undeclared
    nets.  Positions are 1-based (line, col).
    """
    pis, pos, gates, flops = [], [], [], []
    declared = {}          # net -> (line, col) of its driver declaration
    refs = []              # (net, line, col, what)
    dup_errors = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = line.index(stripped[0]) + 1

        m = _DECL_RE.match(stripped)
        if m:
            kw, net = m.group(1), m.group(2)
            if kw == "INPUT":
                if net in declared:
                    dup_errors.append(
                        ("duplicate-driver",
                         f"net '{net}' already driven", lineno, col0))
                else:
                    declared[net] = (lineno, col0)
                pis.append(net)
            else:
                pos.append(net)
                refs.append((net, lineno, col0, "output declaration"))
            continue

        m = _ASSIGN_RE.match(stripped)
        if m:
            target, kind_raw, argtext = m.group(1), m.group(2), m.group(3)
            kind = kind_raw.upper()
            kind_col = col0 + m.start(2)
            if kind != "DFF" and kind not in GATE_KINDS:
                raise BenchParseError(
                    f"unknown gate kind '{kind_raw}'", lineno, kind_col)
            args = [a.strip() for a in argtext.split(",")] if argtext.strip() else []
            if not args or any(not a for a in args):
                raise BenchParseError(
                    f"empty argument list for '{target}'", lineno,
                    col0 + m.start(3))
            for a in args:
                if re.search(r"[\s(),=#]", a):
                    raise BenchParseError(
                        f"malformed argument '{a}'", lineno, col0 + m.start(3))
                refs.append((a, lineno, col0, f"input of '{target}'"))
            if net_dup := declared.get(target):
                dup_errors.append(
                    ("duplicate-driver",
                     f"net '{target}' already driven (first at line {net_dup[0]})",
                     lineno, col0))
            else:
                declared[target] = (lineno, col0)
            if kind == "DFF":
                if len(args) != 1:
                    raise BenchParseError(
                        "DFF takes exactly one input", lineno, col0)
                flops.append(Flop(id=target, data=args[0], output=target))
            else:
                gates.append(Gate(id=target, kind=kind,
                                  inputs=tuple(args), output=target))
            continue

        raise BenchParseError(f"cannot parse line: '{stripped}'", lineno, col0)

    errors = list(dup_errors)
    for net, lineno, col, what in refs:
        if net not in declared:
            errors.append(
                ("undeclared-net",
                 f"reference to undeclared net '{net}' in {what}",
                 lineno, col))
    if errors:
        code, msg, line, col = errors[0]
        raise BenchParseError(msg, line, col, errors=errors)

    return Circuit(
        name=name,
        primary_inputs=tuple(pis),
        primary_outputs=tuple(pos),
        gates=tuple(gates),
        flops=tuple(flops),
        nets=frozenset(declared),
    )


def serialize_bench(circuit):
    """Render a Circuit back to bench text (parse -> serialize round-trips)."""
    lines = [f"# {circuit.name}"]
    lines += [f"INPUT({n})" for n in circuit.primary_inputs]
    lines += [f"OUTPUT({n})" for n in circuit.primary_outputs]
    if circuit.flops:
        lines.append("")
        lines += [f"{f.output} = DFF({f.data})" for f in circuit.flops]
    if circuit.gates:
        lines.append("")
        lines += [f"{g.output} = {g.kind}({', '.join(g.inputs)})"
                  for g in circuit.gates]
    return "\n".join(lines) + "\n"


def validate(circuit):
    """Check structural invariants; returns Diagnostics (never raises).

    Errors: duplicate net drivers, dangling references, undriven nets,
    fan-in violations (>=1 everywhere, exactly 1 for NOT/BUF/DFF), unknown
    gate kinds, and combinational cycles.
    """
    diags = Diagnostics()
    drivers = {}
    for pi in circuit.primary_inputs:
        drivers.setdefault(pi, []).append("primary input")
    for g in circuit.gates:
        drivers.setdefault(g.output, []).append(f"gate '{g.id}'")
    for f in circuit.flops:
        drivers.setdefault(f.output, []).append(f"flop '{f.id}'")

    for net, who in drivers.items():
        if len(who) > 1:
            diags.errors.append(Diagnostic(
                "duplicate-driver",
                f"net '{net}' driven by {len(who)} cells: {', '.join(who)}"))
    for net in circuit.nets:
        if net not in drivers:
            diags.errors.append(Diagnostic(
                "undriven-net", f"net '{net}' has no driver"))

    def check_ref(net, what):
        if net not in circuit.nets:
            diags.errors.append(Diagnostic(
                "dangling-ref", f"{what} references undeclared net '{net}'"))

    for g in circuit.gates:
        if g.kind not in GATE_KINDS:
            diags.errors.append(Diagnostic(
                "unknown-kind", f"gate '{g.id}' has unknown kind '{g.kind}'"))
        if len(g.inputs) < 1:
            diags.errors.append(Diagnostic(
                "bad-fanin", f"gate '{g.id}' has no inputs"))
        elif g.kind in ("NOT", "BUF") and len(g.inputs) != 1:
            diags.errors.append(Diagnostic(
                "bad-fanin",
                f"{g.kind} gate '{g.id}' must have exactly 1 input, "
                f"has {len(g.inputs)}"))
        for n in g.inputs:
            check_ref(n, f"gate '{g.id}'")
        check_ref(g.output, f"gate '{g.id}'")
    for f in circuit.flops:
        check_ref(f.data, f"flop '{f.id}'")
    for n in circuit.primary_outputs:
        check_ref(n, "output declaration")

    seen_po = set()
    for n in circuit.primary_outputs:
        if n in seen_po:
            diags.warnings.append(Diagnostic(
                "duplicate-output", f"net '{n}' declared OUTPUT more than once"))
        seen_po.add(n)

    try:
        levelize(circuit)
    except InvariantError as exc:
        diags.errors.append(Diagnostic("combinational-cycle", str(exc)))
    return diags


def levelize(circuit):
    """Topological order of gate ids (flop boundaries cut the graph).

    Ties are broken by declaration order, so the result is deterministic for
    a given circuit.  Raises InvariantError on a combinational cycle.
    """
    gate_of = circuit.gate_by_id
    indeg = {}
    succs = {g.id: [] for g in circuit.gates}
    for g in circuit.gates:
        count = 0
        for n in g.inputs:
            kind, drv = circuit.driver.get(n, (None, None))
            if kind == "gate":
                count += 1
                succs[drv.id].append(g.id)
        indeg[g.id] = count

    ready = deque(g.id for g in circuit.gates if indeg[g.id] == 0)
    order = []
    while ready:
        gid = ready.popleft()
        order.append(gid)
        for nxt in succs[gid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    if len(order) != len(circuit.gates):
        stuck = sorted(gid for gid, d in indeg.items() if d > 0)
        raise InvariantError(
            "combinational cycle through gates: " + ", ".join(stuck[:8]))
    return order


def _fresh_net(base, taken):
    name = base
    while name in taken:
        name += "_w"
    taken.add(name)
    return name


def wrap_combinational(circuit):
    """Register the boundary of a flop-free circuit.

    Every primary input gains an input flop whose output takes over the
    original net (the combinational core is untouched; the pad net feeding
    the flop gets a fresh name).  Every primary output is latched into an
    output flop whose output becomes the new primary output net.  Adds
    exactly |PI| + |PO| flops; input-to-output latency becomes two cycles.
    """
    if circuit.flops:
        raise InvariantError(
            f"circuit '{circuit.name}' already contains flip-flops")
    taken = set(circuit.nets)
    new_pis, flops = [], []
    for pi in circuit.primary_inputs:
        pad = _fresh_net(pi + "_pi", taken)
        new_pis.append(pad)
        flops.append(Flop(id=pi, data=pad, output=pi))
    new_pos = []
    for po in circuit.primary_outputs:
        q = _fresh_net(po + "_po", taken)
        new_pos.append(q)
        flops.append(Flop(id=q, data=po, output=q))
    return Circuit(
        name=circuit.name,
        primary_inputs=tuple(new_pis),
        primary_outputs=tuple(new_pos),
        gates=circuit.gates,
        flops=tuple(flops),
        nets=frozenset(taken),
    )
