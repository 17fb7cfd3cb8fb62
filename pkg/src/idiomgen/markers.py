"""Marker leaves shared by all artifact-kind template ASTs.

Templates authored in the workspace DSL contain brace markers which are
lexed into these nodes.  ``fill`` (per kind) replaces them with actual
values and fresh names during instantiation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class InRef:
    """``{in0}`` - splice the complete value arriving at input port k."""

    k: int


@dataclass(frozen=True)
class FreshRef:
    """``{fresh:x|y|z}`` - a fresh name, preferring the listed bases in order."""

    bases: tuple[str, ...]


@dataclass(frozen=True)
class HoleRef:
    """``{hole:v}`` - a named hole inside a partial silent output."""

    name: str


@dataclass(frozen=True)
class FillRef:
    """``{in2(fresh:v, fresh:s)}`` - apply/complete the value at port k.

    If the value is partial its holes are filled positionally with the
    arguments; if it is complete the arguments are applied to it (program
    kind only).  Arguments are fresh-name references, input references or
    literal tokens.
    """

    k: int
    args: tuple[object, ...]  # FreshRef | InRef | str (literal token)


@dataclass(frozen=True)
class Complete:
    """A fully determined value flowing along a wire."""

    payload: object


@dataclass(frozen=True)
class Partial:
    """A value with named holes, completed positionally at the consumer."""

    payload: object
    holes: tuple[str, ...]


Value = Complete | Partial


_MARKER_RE = re.compile(r"\{([^{}]*)\}")


class MarkerError(ValueError):
    """Raised for malformed brace markers in a template string."""


def parse_marker(body: str) -> InRef | FreshRef | HoleRef | FillRef:
    """Parse the text between braces into a marker node."""
    body = body.strip()
    if body.startswith("fresh:"):
        bases = tuple(b.strip() for b in body[len("fresh:"):].split("|"))
        if not all(bases):
            raise MarkerError(f"empty fresh base in {{{body}}}")
        return FreshRef(bases)
    if body.startswith("hole:"):
        name = body[len("hole:"):].strip()
        if not name:
            raise MarkerError(f"empty hole name in {{{body}}}")
        return HoleRef(name)
    m = re.fullmatch(r"in(\d+)\s*(\((.*)\))?", body)
    if not m:
        raise MarkerError(f"unknown marker {{{body}}}")
    k = int(m.group(1))
    if m.group(2) is None:
        return InRef(k)
    args: list[object] = []
    raw = m.group(3).strip()
    if raw:
        for part in raw.split(","):
            part = part.strip()
            if part.startswith("fresh:"):
                args.append(FreshRef(tuple(b.strip() for b in part[len("fresh:"):].split("|"))))
            elif re.fullmatch(r"in\d+", part):
                args.append(InRef(int(part[2:])))
            elif part:
                args.append(part)
            else:
                raise MarkerError(f"empty argument in {{{body}}}")
    return FillRef(k, tuple(args))


def split_markers(text: str) -> list[str | InRef | FreshRef | HoleRef | FillRef]:
    """Split template text into literal chunks and marker nodes."""
    out: list[str | InRef | FreshRef | HoleRef | FillRef] = []
    pos = 0
    for m in _MARKER_RE.finditer(text):
        if m.start() > pos:
            out.append(text[pos:m.start()])
        out.append(parse_marker(m.group(1)))
        pos = m.end()
    if pos < len(text):
        out.append(text[pos:])
    return out


def collect_fresh(obj: object, acc: list[tuple[str, ...]]) -> None:
    """Collect FreshRef keys from any nested structure, in first-seen order."""
    if isinstance(obj, FreshRef):
        if obj.bases not in acc:
            acc.append(obj.bases)
    elif isinstance(obj, FillRef):
        for a in obj.args:
            collect_fresh(a, acc)
    elif isinstance(obj, (list, tuple)):
        for x in obj:
            collect_fresh(x, acc)
    elif hasattr(obj, "__dataclass_fields__"):
        for f in obj.__dataclass_fields__:
            collect_fresh(getattr(obj, f), acc)
