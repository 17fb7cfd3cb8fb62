"""Grammar-like refinement of abstract patterns into implementations.

Dashed nonterminal boxes stand for classes of behavior.  A pattern
grammar pairs a start diagram with refinement rules; deriving applies
substitutions until only plain idioms remain, like a context-free
grammar producing words.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .diagram import BoxKind, Diagram, DiagramError, check_valid
from .transform import dedupe_isomorphic, is_isomorphic, substitute


class GrammarError(DiagramError):
    pass


@dataclass(frozen=True)
class RefinementRule:
    """One alternative form for a nonterminal label."""

    nonterminal: str
    body: Diagram


@dataclass(frozen=True)
class PatternGrammar:
    start: Diagram
    rules: tuple[RefinementRule, ...]


@dataclass(frozen=True)
class DeriveResult:
    diagrams: tuple[Diagram, ...]
    exhausted_depth: bool  # some derivations were pruned at max_depth


def validate_grammar(g: PatternGrammar) -> None:
    check_valid(g.start, "grammar start")
    by_label: dict[str, list[RefinementRule]] = {}
    for r in g.rules:
        by_label.setdefault(r.nonterminal, []).append(r)
        check_valid(r.body, f"refinement of {r.nonterminal!r}")
        if r.body.has_apply():
            raise GrammarError(f"refinement of {r.nonterminal!r} contains apply boxes")
    mentioned = {b.sig.label for b in g.start.nonterminals()}
    for r in g.rules:
        mentioned |= {b.sig.label for b in r.body.nonterminals()}
    missing = sorted(mentioned - set(by_label))
    if missing:
        raise GrammarError("nonterminals without rules: " + ", ".join(missing))


def _leftmost_nonterminal(d: Diagram) -> str | None:
    nts = sorted(b.id for b in d.nonterminals())
    return nts[0] if nts else None


def _expand(d: Diagram, depths: dict[str, int], target: str,
            rule: RefinementRule) -> tuple[Diagram, dict[str, int]]:
    before = {b.id for b in d.boxes}
    nxt = substitute(d, target, rule.body)
    ndepths = {i: depths[i] for i in depths if i != target}
    for b in nxt.boxes:
        if b.id not in before:
            ndepths[b.id] = depths[target] + 1
    return nxt, ndepths


def derive(g: PatternGrammar, mode: str = "exhaustive", max_depth: int = 3,
            seed: int | None = None, samples: int = 1,
            retry_budget: int = 1000) -> DeriveResult:
    """Refine nonterminals until implementations remain.

    Depth counts substitution nesting: boxes introduced by refining a box
    at depth d sit at depth d+1.  Expansions that would exceed
    ``max_depth`` are pruned (exhaustive) or resampled (random).
    """
    validate_grammar(g)
    rules_by_label: dict[str, list[RefinementRule]] = {}
    for r in g.rules:
        rules_by_label.setdefault(r.nonterminal, []).append(r)

    if mode == "exhaustive":
        done: list[Diagram] = []
        pruned = False
        stack: list[tuple[Diagram, dict[str, int]]] = [
            (g.start, {b.id: 0 for b in g.start.boxes})]
        while stack:
            d, depths = stack.pop()
            nt = _leftmost_nonterminal(d)
            if nt is None:
                if not any(is_isomorphic(d, k) for k in done):
                    done.append(d)
                continue
            if depths[nt] >= max_depth:
                pruned = True
                continue
            label = d.box(nt).sig.label
            for rule in reversed(rules_by_label[label]):
                stack.append(_expand(d, depths, nt, rule))
        return DeriveResult(tuple(done), pruned)

    if mode != "random":
        raise GrammarError(f"unknown mode {mode!r}")
    if seed is None:
        raise GrammarError("random mode requires a seed")
    rng = random.Random(seed)
    done = []
    retries = 0
    while len(done) < samples:
        d, depths = g.start, {b.id: 0 for b in g.start.boxes}
        while True:
            nt = _leftmost_nonterminal(d)
            if nt is None:
                done.append(d)
                break
            if depths[nt] >= max_depth:
                retries += 1
                if retries > retry_budget:
                    raise GrammarError("derivation retry budget exhausted")
                break  # resample from the start
            label = d.box(nt).sig.label
            rule = rng.choice(rules_by_label[label])
            d, depths = _expand(d, depths, nt, rule)
    return DeriveResult(tuple(done), retries > 0)
