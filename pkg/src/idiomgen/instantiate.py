"""Instantiating abstract implementations with concrete idioms.

A concrete idiom realizes one abstract idiom for one artifact kind: a
visible fragment template plus silent output templates.  Instantiation
walks the boxes in a linearization order, routes values along wires,
fills holes and fresh names, and folds the visible fragments with the
kind's monoid.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .diagram import BoxKind, Diagram, DiagramError, PortRef, Signature, check_valid
from .diagram import canonical_linearization
from .markers import Complete, Partial, collect_fresh
from .variants import RuleSet, explore_variants


class InstantiationError(Exception):
    pass


@dataclass(frozen=True)
class ArtifactKind:
    """One target class of artifacts, with its fragment monoid and hooks.

    ``parse_visible``/``parse_value`` turn DSL template text into
    kind-specific template objects; ``fill_visible``/``fill_value``
    instantiate them; ``combine`` must be associative with ``empty`` as
    the neutral element.
    """

    name: str
    file_ext: str
    empty: object
    combine: object  # (fragment, fragment) -> fragment
    parse_visible: object  # str -> template
    parse_value: object  # str -> template
    fill_visible: object  # (template, inputs, fresh) -> fragment
    fill_value: object  # (template, inputs, fresh) -> Value
    render: object  # fragment -> str
    scan_holes: object  # fragment -> list[str]


@dataclass(frozen=True)
class ConcreteIdiom:
    """A realization of abstract idiom ``for_label`` for one artifact kind."""

    for_label: str
    kind: str
    index: int
    visible_src: str
    silent_srcs: tuple[str, ...]
    visible: object
    silents: tuple
    fresh_keys: tuple  # alternate-name tuples in first-use order
    effectful: bool


@dataclass(frozen=True)
class IdiomLibrary:
    kind: ArtifactKind
    name: str = "default"
    entries: dict = field(default_factory=dict)  # label -> list[ConcreteIdiom]

    def lookup(self, label: str) -> list[ConcreteIdiom]:
        return self.entries.get(label, [])

    def covers(self, d: Diagram) -> list[str]:
        """Labels used in the diagram that have no idiom in this library."""
        missing = []
        for b in d.boxes:
            if not self.lookup(b.sig.label) and b.sig.label not in missing:
                missing.append(b.sig.label)
        return sorted(missing)


class NameSupply:
    """Issues pairwise-distinct names within one instantiation.

    A request carries alternate bases in preference order; once all
    alternates are taken, numeric suffixes on the first base follow
    (x, x1, x2, ...).
    """

    def __init__(self) -> None:
        self.used: set[str] = set()

    def issue(self, bases: tuple[str, ...]) -> str:
        for b in bases:
            if b not in self.used:
                self.used.add(b)
                return b
        n = 1
        while f"{bases[0]}{n}" in self.used:
            n += 1
        name = f"{bases[0]}{n}"
        self.used.add(name)
        return name


def make_idiom(kind: ArtifactKind, label: str, index: int, sig: Signature,
               visible_src: str, silent_srcs: list[str]) -> ConcreteIdiom:
    """Parse and check one concrete idiom against its abstract signature."""
    if len(silent_srcs) != len(sig.outputs):
        raise InstantiationError(
            f"concrete {kind.name} idiom for {label!r} declares {len(silent_srcs)} "
            f"silent output(s); the signature has {len(sig.outputs)}")
    visible = kind.parse_visible(visible_src)
    silents = tuple(kind.parse_value(s) for s in silent_srcs)
    keys: list = []
    collect_fresh(visible, keys)
    for s in silents:
        collect_fresh(s, keys)
    return ConcreteIdiom(label, kind.name, index, visible_src, tuple(silent_srcs),
                         visible, silents, tuple(keys), sig.effectful)


def instantiate(impl: Diagram, lib: IdiomLibrary, choice: dict[str, int],
                order: tuple[str, ...] | None = None,
                boundary_values: list | None = None):
    """Build one artifact; returns (fragment, boundary output values).

    Deterministic given the implementation, library, choice vector and
    order.  Raises on missing idioms, unfilled holes, or partial values
    escaping to visible positions or the boundary.
    """
    check_valid(impl)
    if not impl.is_implementation() or impl.has_apply():
        raise InstantiationError("only plain idiom diagrams can be instantiated")
    if order is None:
        order = canonical_linearization(impl)
    if sorted(order) != sorted(b.id for b in impl.boxes):
        raise InstantiationError("order does not cover the implementation's boxes")

    kind = lib.kind
    supply = NameSupply()
    values: dict[PortRef, object] = {}
    if boundary_values:
        for j, v in enumerate(boundary_values):
            values[PortRef(None, j)] = v

    fragment = kind.empty
    boxm = impl.box_map
    for box_id in order:
        box = boxm[box_id]
        options = lib.lookup(box.sig.label)
        if box_id not in choice:
            raise InstantiationError(f"no idiom chosen for box {box_id!r}")
        idx = choice[box_id]
        if not (0 <= idx < len(options)):
            raise InstantiationError(
                f"no concrete {kind.name} idiom #{idx} for {box.sig.label!r}")
        idiom = options[idx]
        inputs = []
        for k in range(len(box.sig.inputs)):
            src = impl.source_of(PortRef(box_id, k))
            if src not in values:
                raise InstantiationError(
                    f"value for {box_id!r}.in{k} not available; bad order?")
            inputs.append(values[src])
        fresh = {key: supply.issue(key) for key in idiom.fresh_keys}
        try:
            vis = kind.fill_visible(idiom.visible, inputs, fresh)
            for j, tmpl in enumerate(idiom.silents):
                values[PortRef(box_id, j)] = kind.fill_value(tmpl, inputs, fresh)
        except Exception as ex:  # kind-level fill errors carry context here
            raise InstantiationError(
                f"instantiating {box.sig.label!r} (box {box_id!r}): {ex}") from ex
        fragment = kind.combine(fragment, vis)

    left = kind.scan_holes(fragment)
    if left:
        raise InstantiationError(f"unfilled hole(s) in final artifact: {left}")
    boundary_out = []
    for j in range(len(impl.boundary.outputs)):
        src = impl.source_of(PortRef(None, j))
        v = values[src]
        if isinstance(v, Partial):
            raise InstantiationError(
                f"partial value reached boundary output @out{j} without completion")
        boundary_out.append(v)
    return fragment, boundary_out


@dataclass(frozen=True)
class Artifact:
    text: str
    fragment: object
    variant_index: int
    choice: tuple  # ((box id, idiom index), ...) in linearization order


def _normalize(text: str) -> str:
    lines = [ln.rstrip() for ln in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n"


def enumerate_artifacts(impl: Diagram, rules: RuleSet, lib: IdiomLibrary,
                        variant_mode: str = "exhaustive",
                        choice_mode: str = "exhaustive",
                        seed: int | None = None,
                        limit: int | None = None,
                        samples: int = 50):
    """All distinct artifacts of one kind for an intent.

    Explores data-flow variants, then all (or sampled) idiom choices per
    variant with the canonical linearization; deduplicates on rendered
    text after trailing-whitespace normalization.  Variants whose labels
    the library does not cover are skipped and reported.

    Returns (artifacts, skipped) where skipped lists
    (variant index, missing labels).
    """
    vseed = cseed = None
    if seed is not None:
        rng = random.Random(seed)  # one seed; stage streams split from it
        vseed = rng.randrange(2 ** 32)
        cseed = rng.randrange(2 ** 32)
    variants = explore_variants(impl, rules, mode=variant_mode, seed=vseed)

    artifacts: list[Artifact] = []
    seen: set[str] = set()
    skipped: list[tuple[int, list[str]]] = []
    for vi, variant in enumerate(variants):
        missing = lib.covers(variant)
        if missing:
            skipped.append((vi, missing))
            continue
        order = canonical_linearization(variant)
        boxm = variant.box_map
        option_counts = [len(lib.lookup(boxm[b].sig.label)) for b in order]
        if choice_mode == "exhaustive":
            combos = itertools.product(*(range(n) for n in option_counts))
        elif choice_mode == "random":
            if cseed is None:
                raise InstantiationError("random choice mode requires a seed")
            crng = random.Random((cseed, vi))
            combos = (tuple(crng.randrange(n) for n in option_counts)
                      for _ in range(samples))
        else:
            raise InstantiationError(f"unknown choice mode {choice_mode!r}")
        for combo in combos:
            choice = dict(zip(order, combo))
            fragment, _ = instantiate(variant, lib, choice, order)
            text = _normalize(lib.kind.render(fragment))
            if text in seen:
                continue
            seen.add(text)
            artifacts.append(Artifact(text, fragment, vi, tuple(zip(order, combo))))
            if limit is not None and len(artifacts) >= limit:
                return artifacts, skipped
    return artifacts, skipped
