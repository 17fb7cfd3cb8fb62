"""Exploring data-flow variants of an abstract implementation.

Stage one substitutes alternative implementations for chosen boxes,
possibly introducing apply connectors.  Stage two merges patterns until
no rule applies.  Only apply-free fixpoints are kept as variants.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .diagram import BoxKind, Diagram, DiagramError, Signature, check_valid
from .transform import (
    TransformError,
    collapse,
    dedupe_isomorphic,
    find_matches,
    is_isomorphic,
    merge,
    mergeable,
    substitute,
)


class VariantError(DiagramError):
    pass


@dataclass(frozen=True)
class Alternative:
    """A diagram that may replace an atomic idiom of label ``base_label``."""

    base_label: str
    body: Diagram


@dataclass(frozen=True)
class MergeRule:
    """A pattern plus the signature naming the operation after merging."""

    name: str
    pattern: Diagram
    result: Signature


@dataclass(frozen=True)
class RuleSet:
    alternatives: tuple[Alternative, ...] = ()
    merge_rules: tuple[MergeRule, ...] = ()


def validate_rules(rules: RuleSet, registry: dict[str, Signature]) -> None:
    """Check rule invariants against the signature registry."""
    for alt in rules.alternatives:
        base = registry.get(alt.base_label)
        if base is None:
            raise VariantError(f"alternative for unregistered idiom {alt.base_label!r}")
        b = alt.body.boundary
        if b.inputs != base.inputs or b.outputs != base.outputs or b.effectful != base.effectful:
            raise VariantError(f"alternative body boundary does not match {alt.base_label!r}")
        if any(x.sig.kind is BoxKind.NONTERMINAL for x in alt.body.boxes):
            raise VariantError(f"alternative for {alt.base_label!r} contains nonterminal boxes")
        check_valid(alt.body, f"alternative for {alt.base_label!r}")
    for mr in rules.merge_rules:
        check_valid(mr.pattern, f"merge rule {mr.name!r} pattern")
        pb = mr.pattern.boundary
        if pb.inputs != mr.result.inputs or pb.outputs != mr.result.outputs:
            raise VariantError(f"merge rule {mr.name!r}: result ports do not match the pattern")
        has_eff = any(x.sig.effectful for x in mr.pattern.boxes)
        if mr.result.effectful != has_eff:
            raise VariantError(f"merge rule {mr.name!r}: result effect flag must be {has_eff}")


def apply_merge_fixpoint(d: Diagram, rules: list[MergeRule],
                         strategy: str = "deterministic",
                         budget: int | None = None) -> list[Diagram]:
    """Apply merge rules until none applies.

    ``deterministic``: first rule in list order, first match, repeated;
    returns a single fixpoint.  ``all``: breadth-first closure over every
    rule/match choice; returns every fixpoint reached.  Each merge removes
    at least one box, but a step budget still guards the closure.
    """
    if budget is None:
        budget = 10 * max(1, len(d.boxes))

    def one_step(cur: Diagram) -> list[Diagram]:
        out = []
        for rule in rules:
            for m in find_matches(rule.pattern, cur):
                if mergeable(m):
                    nxt = collapse(m, rule.result)
                    if len(nxt.boxes) >= len(cur.boxes):
                        raise VariantError(f"merge rule {rule.name!r} did not reduce the diagram")
                    out.append(nxt)
        return out

    if strategy == "deterministic":
        cur = d
        steps = 0
        while True:
            nxt = one_step(cur)
            if not nxt:
                return [cur]
            cur = nxt[0]
            steps += 1
            if steps > budget:
                raise VariantError("merge step budget exceeded")
    if strategy != "all":
        raise VariantError(f"unknown merge strategy {strategy!r}")

    fixpoints: list[Diagram] = []
    frontier = [d]
    steps = 0
    while frontier:
        steps += 1
        if steps > budget:
            raise VariantError("merge step budget exceeded")
        nxt: list[Diagram] = []
        for cur in frontier:
            succ = one_step(cur)
            if not succ:
                if not any(is_isomorphic(cur, f) for f in fixpoints):
                    fixpoints.append(cur)
            else:
                nxt.extend(succ)
        frontier = dedupe_isomorphic(nxt)
    return fixpoints


def _assignments(impl: Diagram, rules: RuleSet) -> list[list[tuple[str, Alternative]]]:
    """All ways to give some boxes one compatible alternative each."""
    per_box: list[list[tuple[str, Alternative] | None]] = []
    for b in sorted(impl.boxes, key=lambda x: x.id):
        opts: list[tuple[str, Alternative] | None] = [None]
        for alt in rules.alternatives:
            if alt.base_label == b.sig.label:
                opts.append((b.id, alt))
        per_box.append(opts)
    out = []
    for combo in itertools.product(*per_box):
        out.append([c for c in combo if c is not None])
    return out


def explore_variants(impl: Diagram, rules: RuleSet, mode: str = "exhaustive",
                     seed: int | None = None, limit: int | None = None,
                     strategy: str = "all") -> list[Diagram]:
    """All intent-preserving data-flow variants of ``impl``.

    The input implementation is always the first element of the result.
    Remaining variants come from substituting alternatives and merging to
    a fixpoint; diagrams still containing apply boxes are discarded, and
    results are deduplicated up to isomorphism.
    """
    check_valid(impl)
    if impl.has_apply():
        raise VariantError("input implementation contains apply boxes")
    if not impl.is_implementation():
        raise VariantError("input implementation contains nonterminal boxes")

    if mode == "exhaustive":
        assignments = _assignments(impl, rules)
    elif mode == "random":
        if seed is None:
            raise VariantError("random mode requires a seed")
        rng = random.Random(seed)
        pool = _assignments(impl, rules)
        n = limit if limit is not None else len(pool)
        assignments = [pool[0]] + [rng.choice(pool) for _ in range(n)]
    else:
        raise VariantError(f"unknown mode {mode!r}")

    results: list[Diagram] = [impl]
    for assignment in assignments:
        cur = impl
        for box_id, alt in assignment:
            cur = substitute(cur, box_id, alt.body)
        for fix in apply_merge_fixpoint(cur, list(rules.merge_rules), strategy=strategy):
            if fix.has_apply():
                continue
            if not any(is_isomorphic(fix, r) for r in results):
                results.append(fix)
        if limit is not None and mode == "exhaustive" and len(results) >= limit:
            break
    if limit is not None:
        results = results[:limit]
    return results
