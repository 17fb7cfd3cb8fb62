"""Wiring diagrams of abstract idioms.

A diagram is an acyclic graph of typed, labeled boxes plus an explicit
total order on the boxes that perform console IO.  Data wires and the
effect order together must stay acyclic; this module owns those
structural invariants.

Types are nominal: two port types are equal iff their names are equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache


class DiagramError(Exception):
    """Structural problem that prevents an operation from proceeding."""


class BoxKind(Enum):
    IDIOM = "idiom"
    APPLY = "apply"
    NONTERMINAL = "nonterminal"


@dataclass(frozen=True)
class Signature:
    """Typed interface of an abstract idiom: label, ports, effect flag."""

    label: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    effectful: bool = False
    kind: BoxKind = BoxKind.IDIOM

    def __post_init__(self) -> None:
        if not self.label:
            raise DiagramError("signature label must be non-empty")

    def ports_equal(self, other: "Signature") -> bool:
        return self.inputs == other.inputs and self.outputs == other.outputs


@dataclass(frozen=True)
class Box:
    id: str
    sig: Signature

    @property
    def effect_slot(self) -> bool:
        """True if the box occupies a slot in the effect order.

        Nonterminal boxes may have effects after refinement, so they
        always hold a slot.
        """
        return self.sig.effectful or self.sig.kind is BoxKind.NONTERMINAL


@dataclass(frozen=True)
class PortRef:
    """A port address: ``box`` is None for the diagram boundary."""

    box: str | None
    index: int


@dataclass(frozen=True)
class Wire:
    source: PortRef  # box output, or boundary input when box is None
    target: PortRef  # box input, or boundary output when box is None


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subjects: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class Diagram:
    boundary: Signature
    boxes: tuple[Box, ...]
    wires: tuple[Wire, ...]
    effect_order: tuple[str, ...]

    # -- basic accessors ------------------------------------------------

    @property
    def box_map(self) -> dict[str, Box]:
        return {b.id: b for b in self.boxes}

    def box(self, box_id: str) -> Box:
        for b in self.boxes:
            if b.id == box_id:
                return b
        raise DiagramError(f"unknown box id {box_id!r}")

    def source_of(self, target: PortRef) -> PortRef:
        """The unique source feeding an input port (or boundary output)."""
        hits = [w.source for w in self.wires if w.target == target]
        if len(hits) != 1:
            raise DiagramError(f"port {target} has {len(hits)} sources")
        return hits[0]

    def consumers_of(self, source: PortRef) -> list[PortRef]:
        return [w.target for w in self.wires if w.source == source]

    def port_type(self, ref: PortRef, as_source: bool) -> str:
        if ref.box is None:
            ports = self.boundary.inputs if as_source else self.boundary.outputs
        else:
            sig = self.box(ref.box).sig
            ports = sig.outputs if as_source else sig.inputs
        if not (0 <= ref.index < len(ports)):
            raise DiagramError(f"port index out of range: {ref}")
        return ports[ref.index]

    def data_edges(self) -> set[tuple[str, str]]:
        """Box-to-box edges induced by data wires."""
        return {
            (w.source.box, w.target.box)
            for w in self.wires
            if w.source.box is not None and w.target.box is not None
        }

    def union_edges(self) -> set[tuple[str, str]]:
        """Data edges plus consecutive effect-order edges."""
        edges = self.data_edges()
        for a, b in zip(self.effect_order, self.effect_order[1:]):
            edges.add((a, b))
        return edges

    def is_implementation(self) -> bool:
        """True if all boxes are plain idioms (no nonterminals)."""
        return all(b.sig.kind is not BoxKind.NONTERMINAL for b in self.boxes)

    def has_apply(self) -> bool:
        return any(b.sig.kind is BoxKind.APPLY for b in self.boxes)

    def nonterminals(self) -> list[Box]:
        return [b for b in self.boxes if b.sig.kind is BoxKind.NONTERMINAL]


# -- validation ----------------------------------------------------------


def _cyclic(nodes: list[str], edges: set[tuple[str, str]]) -> list[str] | None:
    """Return a list of nodes on some cycle, or None when acyclic."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        if a in succ and b in succ:
            succ[a].append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack: list[str] = []

    def visit(n: str) -> list[str] | None:
        color[n] = GREY
        stack.append(n)
        for m in succ[n]:
            if color[m] == GREY:
                return stack[stack.index(m):]
            if color[m] == WHITE:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        color[n] = BLACK
        return None

    for n in nodes:
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None


def validate(d: Diagram) -> list[Violation]:
    """Check every structural invariant; an empty list means the diagram is ok.

    Violations are data, not exceptions: all problems are reported with
    the offending box or wire identities.
    """
    out: list[Violation] = []
    ids = [b.id for b in d.boxes]
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            out.append(Violation("dup-box", f"duplicate box id {i!r}", (i,)))
        seen.add(i)
    if out:
        return out  # port checks below assume unique ids

    boxm = d.box_map

    def describe(ref: PortRef, as_source: bool) -> str:
        side = "out" if as_source else "in"
        if ref.box is None:
            side = "in" if as_source else "out"
            return f"@{side}{ref.index}"
        return f"{ref.box}.{side}{ref.index}"

    ok_wires: list[Wire] = []
    for w in d.wires:
        bad = False
        for ref, as_source in ((w.source, True), (w.target, False)):
            if ref.box is not None and ref.box not in boxm:
                out.append(Violation("unknown-box", f"wire references unknown box {ref.box!r}", (ref.box,)))
                bad = True
                continue
            try:
                d.port_type(ref, as_source)
            except DiagramError:
                out.append(Violation("port-range", f"port index out of range: {describe(ref, as_source)}",
                                     (ref.box or "@boundary",)))
                bad = True
        if bad:
            continue
        src_t = d.port_type(w.source, True)
        tgt_t = d.port_type(w.target, False)
        if src_t != tgt_t:
            out.append(Violation(
                "type-mismatch",
                f"wire {describe(w.source, True)} -> {describe(w.target, False)} connects {src_t} to {tgt_t}",
                (w.source.box or "@boundary", w.target.box or "@boundary")))
        ok_wires.append(w)

    # every input port of a box, and every boundary output, has exactly one source
    targets = [w.target for w in ok_wires]
    for b in d.boxes:
        for k in range(len(b.sig.inputs)):
            n = targets.count(PortRef(b.id, k))
            if n != 1:
                out.append(Violation("input-arity", f"input {b.id}.in{k} has {n} sources (expected 1)", (b.id,)))
    for j in range(len(d.boundary.outputs)):
        n = targets.count(PortRef(None, j))
        if n != 1:
            out.append(Violation("output-arity", f"boundary output @out{j} has {n} sources (expected 1)", ()))
    # boundary inputs must be consumed at least once: merging back a pattern
    # with an unused input could not reconstruct the frontier wire
    sources = [w.source for w in ok_wires]
    for j in range(len(d.boundary.inputs)):
        if PortRef(None, j) not in sources:
            out.append(Violation("unused-input", f"boundary input @in{j} is never used", ()))

    # effect order lists exactly the effect-slot boxes, once each
    slot_ids = [b.id for b in d.boxes if b.effect_slot]
    order = list(d.effect_order)
    for i in order:
        if order.count(i) > 1:
            out.append(Violation("effect-dup", f"box {i!r} appears twice in effect order", (i,)))
        elif i not in boxm:
            out.append(Violation("effect-unknown", f"effect order names unknown box {i!r}", (i,)))
        elif i not in slot_ids:
            out.append(Violation("effect-extra", f"box {i!r} in effect order is not effectful", (i,)))
    for i in slot_ids:
        if i not in order:
            out.append(Violation("effect-missing", f"effectful box {i!r} missing from effect order", (i,)))

    cyc = _cyclic(ids, d.data_edges())
    if cyc:
        out.append(Violation("cycle-data", "data wires form a cycle: " + ", ".join(cyc), tuple(cyc)))
    elif not out:
        cyc = _cyclic(ids, d.union_edges())
        if cyc:
            out.append(Violation("cycle-combined",
                                 "data flow and effect order together form a cycle: " + ", ".join(cyc),
                                 tuple(cyc)))
    return out


def check_valid(d: Diagram, context: str = "diagram") -> None:
    problems = validate(d)
    if problems:
        raise DiagramError(f"invalid {context}: " + "; ".join(str(v) for v in problems))


# -- reachability ----------------------------------------------------------


def data_reach(d: Diagram, x: str, y: str) -> bool:
    """Reflexive-transitive reachability over data wires."""
    d.box(x)
    d.box(y)
    if x == y:
        return True
    succ: dict[str, set[str]] = {}
    for a, b in d.data_edges():
        succ.setdefault(a, set()).add(b)
    seen = {x}
    frontier = [x]
    while frontier:
        n = frontier.pop()
        for m in succ.get(n, ()):
            if m == y:
                return True
            if m not in seen:
                seen.add(m)
                frontier.append(m)
    return False


def effect_reach(d: Diagram, x: str, y: str) -> bool:
    """True iff x precedes or equals y in the effect order."""
    for i in (x, y):
        d.box(i)
        if i not in d.effect_order:
            raise DiagramError(f"box {i!r} is not in the effect order")
    return d.effect_order.index(x) <= d.effect_order.index(y)


def precedes(d: Diagram, x: str, y: str) -> bool:
    """Strict combined order: x reaches y via data or via the effect order."""
    if x == y:
        return False
    if data_reach(d, x, y):
        return True
    if x in d.effect_order and y in d.effect_order:
        return d.effect_order.index(x) < d.effect_order.index(y)
    return False


# -- linearizations ---------------------------------------------------------


def canonical_linearization(d: Diagram) -> tuple[str, ...]:
    """The lexicographically smallest topological order by box id."""
    import heapq

    check_valid(d)
    ids = [b.id for b in d.boxes]
    succ: dict[str, set[str]] = {i: set() for i in ids}
    indeg = {i: 0 for i in ids}
    for a, b in d.union_edges():
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    ready = [i for i in ids if indeg[i] == 0]
    heapq.heapify(ready)
    out: list[str] = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for m in sorted(succ[n]):
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    if len(out) != len(ids):
        raise DiagramError("cannot linearize a cyclic diagram")
    return tuple(out)


def linearizations(d: Diagram, limit: int = 10000) -> list[tuple[str, ...]]:
    """All total orders compatible with data flow and the effect order.

    Exhaustive backtracking; intended for small diagrams.  Raises when
    more than ``limit`` orders exist.
    """
    check_valid(d)
    ids = sorted(b.id for b in d.boxes)
    succ: dict[str, set[str]] = {i: set() for i in ids}
    indeg = {i: 0 for i in ids}
    for a, b in d.union_edges():
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    out: list[tuple[str, ...]] = []
    acc: list[str] = []

    def step() -> None:
        if len(acc) == len(ids):
            out.append(tuple(acc))
            if len(out) > limit:
                raise DiagramError(f"more than {limit} linearizations")
            return
        for n in ids:
            if indeg[n] == 0 and n not in acc:
                acc.append(n)
                for m in succ[n]:
                    indeg[m] -= 1
                step()
                for m in succ[n]:
                    indeg[m] += 1
                acc.pop()

    step()
    return out
