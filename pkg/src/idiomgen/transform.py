"""The two diagram transformations: substitution and merging.

Substitution replaces one box by a whole diagram with the same outside
interface.  Merging finds an occurrence of a pattern diagram and
collapses it into a single box.  Both always return diagrams that pass
validation, or raise ``TransformError``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .diagram import (
    Box,
    BoxKind,
    Diagram,
    DiagramError,
    PortRef,
    Signature,
    Wire,
    check_valid,
    data_reach,
    validate,
)


class TransformError(DiagramError):
    pass


# -- substitution -----------------------------------------------------------


def _fresh_ids(host_ids: set[str], wanted: list[str]) -> dict[str, str]:
    """Rename inserted box ids to avoid collisions, deterministically."""
    if not (set(wanted) & host_ids):
        return {w: w for w in wanted}
    n = 1
    while True:
        ren = {w: f"{w}_{n}" for w in wanted}
        if not (set(ren.values()) & host_ids):
            return ren
        n += 1


def _splice_latest(host: Diagram, boxes: tuple[Box, ...], wires: tuple[Wire, ...],
                   base_order: list[str], block: list[str]) -> Diagram:
    """Insert an effect block at the latest position keeping the result valid."""
    for i in range(len(base_order), -1, -1):
        cand = Diagram(host.boundary, boxes, wires,
                       tuple(base_order[:i] + block + base_order[i:]))
        if not validate(cand):
            return cand
    raise TransformError("no effect-order position admits the substituted effects")


def substitute(host: Diagram, target: str, replacement: Diagram) -> Diagram:
    """Replace box ``target`` by ``replacement``, reconnecting wires positionally.

    The replacement boundary must carry the same port types as the target
    box.  The effect flag must also agree, except for nonterminal targets
    which may stand for effectful or effect-free behavior.
    """
    tbox = host.box(target)
    rep = replacement.boundary
    if rep.inputs != tbox.sig.inputs or rep.outputs != tbox.sig.outputs:
        raise TransformError(
            f"boundary mismatch substituting {target!r}: "
            f"{rep.inputs} -> {rep.outputs} vs {tbox.sig.inputs} -> {tbox.sig.outputs}")
    if tbox.sig.kind is not BoxKind.NONTERMINAL and rep.effectful != tbox.sig.effectful:
        raise TransformError(f"effect flag mismatch substituting {target!r}")

    host_ids = {b.id for b in host.boxes if b.id != target}
    ren = _fresh_ids(host_ids, [b.id for b in replacement.boxes])

    def rn(ref: PortRef) -> PortRef:
        return ref if ref.box is None else PortRef(ren[ref.box], ref.index)

    boxes = tuple(b for b in host.boxes if b.id != target) + tuple(
        Box(ren[b.id], b.sig) for b in replacement.boxes)

    # sources feeding the target's inputs, and consumers of its outputs
    in_src = {k: host.source_of(PortRef(target, k)) for k in range(len(tbox.sig.inputs))}
    out_tgts = {j: host.consumers_of(PortRef(target, j)) for j in range(len(tbox.sig.outputs))}
    # the unique inner source of each replacement boundary output
    rep_out_src = {j: replacement.source_of(PortRef(None, j))
                   for j in range(len(rep.outputs))}

    wires: list[Wire] = [w for w in host.wires
                         if w.source.box != target and w.target.box != target]
    for w in replacement.wires:
        if w.source.box is None and w.target.box is None:
            continue  # pass-through handled via rep_out_src below
        if w.source.box is None:
            wires.append(Wire(in_src[w.source.index], rn(w.target)))
        elif w.target.box is None:
            pass  # boundary outputs reconnected below
        else:
            wires.append(Wire(rn(w.source), rn(w.target)))
    for j, tgts in out_tgts.items():
        src = rep_out_src[j]
        new_src = in_src[src.index] if src.box is None else rn(src)
        for t in tgts:
            wires.append(Wire(new_src, t))

    block = [ren[i] for i in replacement.effect_order]
    if target in host.effect_order:
        pos = host.effect_order.index(target)
        base = [i for i in host.effect_order if i != target]
        order = tuple(base[:pos] + block + base[pos:])
        result = Diagram(host.boundary, boxes, tuple(wires), order)
    elif block:
        result = _splice_latest(host, boxes, tuple(wires),
                                list(host.effect_order), block)
    else:
        result = Diagram(host.boundary, boxes, tuple(wires), host.effect_order)

    problems = validate(result)
    if problems:
        raise TransformError("substitution produced an invalid diagram: "
                             + "; ".join(map(str, problems)))
    return result


# -- pattern matching -------------------------------------------------------


@dataclass(frozen=True)
class Match:
    """An occurrence of ``pattern`` inside ``host``.

    ``box_map`` sends pattern box ids to host box ids.  ``in_sources``
    gives, for each pattern boundary input, the host source feeding the
    matched frontier; ``out_sources`` gives the host port that realizes
    each pattern boundary output.
    """

    pattern: Diagram
    host: Diagram
    box_map: dict[str, str]
    in_sources: dict[int, PortRef]
    out_sources: dict[int, PortRef]

    @property
    def image(self) -> set[str]:
        return set(self.box_map.values())


def find_matches(pattern: Diagram, host: Diagram) -> list[Match]:
    """Every signature- and wiring-preserving occurrence of the pattern.

    Enumeration is deterministic: pattern boxes are assigned in id order,
    host candidates tried in ascending id order.
    """
    check_valid(pattern, "pattern")
    check_valid(host, "host")
    pboxes = sorted(pattern.boxes, key=lambda b: b.id)
    hboxes = sorted(host.boxes, key=lambda b: b.id)
    matches: list[Match] = []
    assign: dict[str, str] = {}
    used: set[str] = set()

    def compatible() -> Match | None:
        image = set(assign.values())
        inv = {v: k for k, v in assign.items()}
        # wires internal to the pattern <-> wires internal to the image
        pint = {(assign[w.source.box], w.source.index, assign[w.target.box], w.target.index)
                for w in pattern.wires
                if w.source.box is not None and w.target.box is not None}
        hint = {(w.source.box, w.source.index, w.target.box, w.target.index)
                for w in host.wires
                if w.source.box in image and w.target.box in image}
        if pint != hint:
            return None
        # frontier inputs: every pattern boundary input maps to one host source
        in_sources: dict[int, PortRef] = {}
        for w in pattern.wires:
            if w.source.box is None and w.target.box is not None:
                tgt = PortRef(assign[w.target.box], w.target.index)
                src = host.source_of(tgt)
                if src.box in image:
                    return None  # fed from inside: not a frontier
                prev = in_sources.get(w.source.index)
                if prev is not None and prev != src:
                    return None  # fanned-out pattern input fed from two places
                in_sources[w.source.index] = src
        # frontier outputs: outside-consumed image ports must be pattern outputs
        out_sources: dict[int, PortRef] = {}
        for w in pattern.wires:
            if w.target.box is None and w.source.box is not None:
                out_sources[w.target.index] = PortRef(assign[w.source.box], w.source.index)
        covered = set(out_sources.values())
        for w in host.wires:
            if w.source.box in image and (w.target.box is None or w.target.box not in image):
                if w.source not in covered:
                    return None
        # effect order restricted to the image must equal the pattern's
        restricted = tuple(inv[i] for i in host.effect_order if i in image)
        if restricted != pattern.effect_order:
            return None
        return Match(pattern, host, dict(assign), in_sources, out_sources)

    def step(i: int) -> None:
        if i == len(pboxes):
            m = compatible()
            if m is not None:
                matches.append(m)
            return
        pb = pboxes[i]
        for hb in hboxes:
            if hb.id in used or hb.sig != pb.sig:
                continue
            assign[pb.id] = hb.id
            used.add(hb.id)
            step(i + 1)
            used.discard(hb.id)
            del assign[pb.id]

    step(0)
    return matches


def mergeable(m: Match) -> bool:
    """True iff collapsing the matched boxes introduces no cycle.

    The condition: no box outside the image may lie strictly between two
    image boxes under any mix of the data-flow and effect orders.
    """
    host = m.host
    image = m.image

    def pre(a: str, b: str) -> bool:
        if data_reach(host, a, b) and a != b:
            return True
        if a in host.effect_order and b in host.effect_order:
            return host.effect_order.index(a) < host.effect_order.index(b)
        return False

    outside = [b.id for b in host.boxes if b.id not in image]
    for y in outside:
        if any(pre(x1, y) for x1 in image) and any(pre(y, x2) for x2 in image):
            return False
    return True


def collapse(m: Match, merged_sig: Signature) -> Diagram:
    """Replace the matched image by a single fresh box of ``merged_sig``."""
    host = m.host
    pattern = m.pattern
    if (pattern.boundary.inputs != merged_sig.inputs
            or pattern.boundary.outputs != merged_sig.outputs):
        raise TransformError(
            f"merged signature {merged_sig.label!r} does not fit the pattern boundary")
    image = m.image
    host_ids = {b.id for b in host.boxes}
    n = 1
    while f"m{n}" in host_ids:
        n += 1
    new_id = f"m{n}"

    boxes = tuple(b for b in host.boxes if b.id not in image) + (Box(new_id, merged_sig),)
    wires: list[Wire] = [
        w for w in host.wires
        if w.source.box not in image and w.target.box not in image
    ]
    for k in range(len(merged_sig.inputs)):
        if k not in m.in_sources:
            raise TransformError(f"pattern does not use boundary input @in{k}")
        wires.append(Wire(m.in_sources[k], PortRef(new_id, k)))
    for j in range(len(merged_sig.outputs)):
        src = m.out_sources.get(j)
        if src is None:
            continue  # output provided by the merged box but unconsumed
        for w in host.wires:
            if w.source == src and (w.target.box is None or w.target.box not in image):
                wires.append(Wire(PortRef(new_id, j), w.target))

    order = [i for i in host.effect_order if i not in image]
    new_box = Box(new_id, merged_sig)
    if new_box.effect_slot:
        first = next((i for i, b in enumerate(host.effect_order) if b in image), None)
        if first is None:
            order.append(new_id)
        else:
            pos = sum(1 for b in host.effect_order[:first] if b not in image)
            order.insert(pos, new_id)

    result = Diagram(host.boundary, boxes, tuple(wires), tuple(order))
    problems = validate(result)
    if problems:
        raise TransformError("merge produced an invalid diagram: "
                             + "; ".join(map(str, problems)))
    return result


def merge(pattern: Diagram, merged_sig: Signature, host: Diagram) -> list[Diagram]:
    """Collapse every mergeable occurrence of the pattern; may be empty."""
    if (pattern.boundary.inputs != merged_sig.inputs
            or pattern.boundary.outputs != merged_sig.outputs):
        raise TransformError(
            f"merged signature {merged_sig.label!r} does not fit the pattern boundary")
    out = []
    for m in find_matches(pattern, host):
        if mergeable(m):
            out.append(collapse(m, merged_sig))
    return out


# -- isomorphism ------------------------------------------------------------


def is_isomorphic(d1: Diagram, d2: Diagram) -> bool:
    """Equality up to renaming boxes.

    The bijection must preserve signatures, all wires including boundary
    connections, and the effect order position by position.
    """
    if d1.boundary.inputs != d2.boundary.inputs or d1.boundary.outputs != d2.boundary.outputs:
        return False
    if len(d1.boxes) != len(d2.boxes) or len(d1.wires) != len(d2.wires):
        return False
    if len(d1.effect_order) != len(d2.effect_order):
        return False
    sig_count1 = sorted((b.sig.label, b.sig.kind.value) for b in d1.boxes)
    sig_count2 = sorted((b.sig.label, b.sig.kind.value) for b in d2.boxes)
    if sig_count1 != sig_count2:
        return False

    m1, m2 = d1.box_map, d2.box_map
    # effect order forces the mapping of all effect-slot boxes
    forced: dict[str, str] = {}
    for a, b in zip(d1.effect_order, d2.effect_order):
        if m1[a].sig != m2[b].sig:
            return False
        forced[a] = b
    free1 = sorted(i for i in m1 if i not in forced)
    free2 = sorted(i for i in m2 if i not in set(forced.values()))

    wires2 = {(w.source.box, w.source.index, w.target.box, w.target.index)
              for w in d2.wires}

    def wires_ok(mapping: dict[str, str]) -> bool:
        for w in d1.wires:
            s = mapping[w.source.box] if w.source.box is not None else None
            t = mapping[w.target.box] if w.target.box is not None else None
            if (s, w.source.index, t, w.target.index) not in wires2:
                return False
        return True

    def assign(i: int, mapping: dict[str, str], used: set[str]) -> bool:
        if i == len(free1):
            return wires_ok(mapping)
        a = free1[i]
        for b in free2:
            if b in used or m1[a].sig != m2[b].sig:
                continue
            mapping[a] = b
            used.add(b)
            if assign(i + 1, mapping, used):
                return True
            used.discard(b)
            del mapping[a]
        return False

    return assign(0, dict(forced), set(forced.values()))


def dedupe_isomorphic(diagrams: list[Diagram]) -> list[Diagram]:
    """Keep the first representative of each isomorphism class."""
    kept: list[Diagram] = []
    for d in diagrams:
        if not any(is_isomorphic(d, k) for k in kept):
            kept.append(d)
    return kept
