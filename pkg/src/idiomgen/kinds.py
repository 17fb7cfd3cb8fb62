"""Registry of the shipped artifact kinds: program, specification, prose."""
from __future__ import annotations

from . import iospec, program, prose
from .instantiate import ArtifactKind
from .markers import HoleRef, split_markers


def _program_scan(fragment: tuple) -> list[str]:
    holes: list[str] = []
    for s in fragment:
        program.collect_holes(s, holes)
    return holes


def _spec_scan(fragment: object) -> list[str]:
    holes: list[str] = []

    def walk(node: object) -> None:
        if isinstance(node, HoleRef):
            if node.name not in holes:
                holes.append(node.name)
        elif isinstance(node, iospec.SSeq):
            for x in node.items:
                walk(x)
        elif isinstance(node, iospec.SLoop):
            walk(node.body)
        elif isinstance(node, iospec.SBranch):
            iospec._term_holes(node.cond, holes)
            walk(node.then)
            walk(node.other)
        elif isinstance(node, iospec.SWrite):
            iospec._term_holes(node.term, holes)

    walk(fragment)
    return holes


PROGRAM = ArtifactKind(
    name="program",
    file_ext=".hs",
    empty=(),
    combine=lambda a, b: a + b,
    parse_visible=lambda text: program.parse_stmts(text),
    parse_value=program.parse_expr_text,
    fill_visible=program.fill_stmts,
    fill_value=program.fill_value,
    render=lambda frag: program.render_program(program.MiniProgram(frag)),
    scan_holes=_program_scan,
)

SPEC = ArtifactKind(
    name="spec",
    file_ext=".spec",
    empty=iospec.SNop(),
    combine=lambda a, b: iospec.sseq([a, b]),
    parse_visible=iospec.parse_spec,
    parse_value=iospec.parse_term_text,
    fill_visible=iospec.fill_spec,
    fill_value=iospec.fill_term_value,
    render=lambda frag: iospec.render_spec(frag) + "\n",
    scan_holes=_spec_scan,
)

PROSE = ArtifactKind(
    name="prose",
    file_ext=".txt",
    empty="",
    combine=prose.combine,
    parse_visible=split_markers,
    parse_value=split_markers,
    fill_visible=prose.fill_fragment,
    fill_value=prose.fill_value,
    render=lambda frag: frag + "\n" if frag else "",
    scan_holes=lambda frag: [],
)

KINDS: dict[str, ArtifactKind] = {k.name: k for k in (PROGRAM, SPEC, PROSE)}
