"""The natural-language artifact kind: sentence fragments with referents.

Fragments are authored to compose grammatically; rendering sentence-cases
each fragment, makes sure it ends in a period, and joins with spaces.
"""
from __future__ import annotations

from .markers import Complete, FillRef, FreshRef, HoleRef, InRef, Partial, split_markers


class ProseError(Exception):
    pass


def sentence_case(text: str) -> str:
    text = text.strip()
    if not text:
        return ""
    for i, c in enumerate(text):
        if c.isalpha():
            text = text[:i] + c.upper() + text[i + 1:]
            break
    if not text.endswith((".", "!", "?")):
        text += "."
    return text


def combine(a: str, b: str) -> str:
    if not a:
        return b
    if not b:
        return a
    return f"{a} {b}"


def _fill_parts(parts: list, inputs: list, fresh: dict, allow_holes: bool) -> list:
    out: list = []
    for p in parts:
        if isinstance(p, str):
            out.append(p)
        elif isinstance(p, FreshRef):
            out.append(fresh[p.bases])
        elif isinstance(p, InRef):
            v = inputs[p.k]
            if isinstance(v, Partial):
                raise ProseError(f"partial value at in{p.k} used without completion")
            out.append(v.payload)
        elif isinstance(p, HoleRef):
            if not allow_holes:
                raise ProseError(f"hole marker {p.name!r} in a visible fragment")
            out.append(p)
        elif isinstance(p, FillRef):
            v = inputs[p.k]
            if not isinstance(v, Partial):
                raise ProseError(f"value at in{p.k} is not partial; cannot fill")
            args = []
            for a in p.args:
                if isinstance(a, FreshRef):
                    args.append(fresh[a.bases])
                elif isinstance(a, InRef):
                    w = inputs[a.k]
                    if isinstance(w, Partial):
                        raise ProseError("partial filler")
                    args.append(w.payload)
                else:
                    args.append(str(a))
            if len(args) != len(v.holes):
                raise ProseError(f"value at in{p.k} has {len(v.holes)} hole(s), "
                                 f"got {len(args)} filler(s)")
            table = dict(zip(v.holes, args))
            filled = []
            for q in v.payload:
                if isinstance(q, HoleRef):
                    filled.append(table[q.name])
                else:
                    filled.append(q)
            out.extend(filled)
        else:
            raise ProseError(f"bad template part {p!r}")
    return out


def fill_fragment(parts: list, inputs: list, fresh: dict) -> str:
    filled = _fill_parts(parts, inputs, fresh, False)
    return sentence_case("".join(filled)) if any(str(x).strip() for x in filled) else ""


def fill_value(parts: list, inputs: list, fresh: dict):
    filled = _fill_parts(parts, inputs, fresh, True)
    holes: list[str] = []
    for p in filled:
        if isinstance(p, HoleRef) and p.name not in holes:
            holes.append(p.name)
    if holes:
        return Partial(filled, tuple(holes))
    return Complete("".join(filled))
