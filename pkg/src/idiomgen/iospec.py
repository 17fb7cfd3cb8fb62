"""The specification artifact kind: console IO-behavior expressions.

Specifications are regular-expression-like: reads bind chronological
value sequences to variables, writes emit term values, a loop iterates
until an exit marker fires inside it, and branches choose on a condition.
The deterministic interpreter lets generated programs be tested against
generated specifications.

ASCII notation (round-trips through the reader)::

    [?n:Nat]                        read into n from the naturals
    [!sum(x_A)]                     write a term over all values read into x
    ({len(x_A) == n_C} E /\\ () [?x:Int])^L    loop: exit once n values read
    E                               exit marker, ()  empty spec

Terms access the newest value ``n_C`` or the whole history ``x_A`` and
combine with ``len, sum, prod, filter_eq, ++`` and arithmetic.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .markers import Complete, FillRef, FreshRef, HoleRef, InRef, Partial
from .program import MiniProgram, Trace, run_program


class SpecError(Exception):
    pass


class SpecParseError(SpecError):
    pass


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class SRead:
    var: object  # str | FreshRef
    domain: str  # "Nat" | "Int"


@dataclass(frozen=True)
class SWrite:
    term: object


@dataclass(frozen=True)
class SBranch:
    cond: object
    then: object
    other: object


@dataclass(frozen=True)
class SLoop:
    body: object


@dataclass(frozen=True)
class SExit:
    pass


@dataclass(frozen=True)
class SNop:
    pass


@dataclass(frozen=True)
class SSeq:
    items: tuple


def sseq(items: list) -> object:
    """Sequence two or more specs, flattening and dropping units."""
    flat: list = []
    for it in items:
        if isinstance(it, SNop):
            continue
        if isinstance(it, SSeq):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return SNop()
    if len(flat) == 1:
        return flat[0]
    return SSeq(tuple(flat))


# terms


@dataclass(frozen=True)
class TLit:
    value: int


@dataclass(frozen=True)
class TCur:
    var: object


@dataclass(frozen=True)
class TAll:
    var: object


@dataclass(frozen=True)
class TLen:
    arg: object


@dataclass(frozen=True)
class TSum:
    arg: object


@dataclass(frozen=True)
class TProd:
    arg: object


@dataclass(frozen=True)
class TFilterEq:
    arg: object
    value: object


@dataclass(frozen=True)
class TBin:
    op: str
    left: object
    right: object


# -- parsing ----------------------------------------------------------------

_TOKENS = ["[?", "[!", "]", "(", ")", "{", "}", "^", "/\\", ":", ",",
           "++", "==", "/=", "<=", ">=", "<", ">", "+", "-", "*"]
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"\d+")
_MARK_RE = re.compile(r"\{[^{}]*\}")


def _lex(text: str) -> list[object]:
    from .markers import parse_marker

    toks: list[object] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "{":
            # a marker unless it lexes as a branch condition opener; markers
            # never contain further braces, conditions always close on the
            # same brace level with a term inside -- disambiguate by content
            m = _MARK_RE.match(text, i)
            if m:
                body = m.group(0)[1:-1].strip()
                if body.startswith(("fresh:", "hole:")) or re.fullmatch(r"in\d+(\(.*\))?", body):
                    toks.append(parse_marker(body))
                    i = m.end()
                    continue
        m = _INT_RE.match(text, i)
        if m:
            toks.append(int(m.group(0)))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            toks.append(m.group(0))
            i = m.end()
            continue
        for op in _TOKENS:
            if text.startswith(op, i):
                toks.append(("op", op))
                i += len(op)
                break
        else:
            raise SpecParseError(f"cannot tokenize specification at {text[i:i+10]!r}")
    return toks


class _TS:
    def __init__(self, toks: list[object]):
        self.toks = toks
        self.i = 0

    def peek(self) -> object | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> object:
        if self.i >= len(self.toks):
            raise SpecParseError("unexpected end of specification")
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, op: str) -> None:
        t = self.next()
        if t != ("op", op):
            raise SpecParseError(f"expected {op!r}, got {t!r}")

    def done(self) -> bool:
        return self.i >= len(self.toks)


_TPREC = {"==": 4, "/=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
          "++": 5, "+": 6, "-": 6, "*": 7}
_TFUNS = {"len": TLen, "sum": TSum, "prod": TProd}


def _parse_term(ts: _TS, min_prec: int = 0) -> object:
    left = _parse_term_atom(ts)
    while True:
        t = ts.peek()
        if not (isinstance(t, tuple) and t[0] == "op" and t[1] in _TPREC):
            return left
        prec = _TPREC[t[1]]
        if prec < min_prec:
            return left
        op = ts.next()[1]
        right = _parse_term(ts, prec + 1)
        left = TBin(op, left, right)


def _subscripted(ts: _TS, base: object) -> object:
    nxt = ts.peek()
    if nxt == "_A":
        ts.next()
        return TAll(base)
    if nxt == "_C":
        ts.next()
        return TCur(base)
    raise SpecParseError("expected _A or _C subscript after variable marker")


def _parse_term_atom(ts: _TS) -> object:
    t = ts.next()
    if isinstance(t, int):
        return TLit(t)
    if isinstance(t, (InRef, HoleRef, FillRef)):
        return t
    if isinstance(t, FreshRef):
        return _subscripted(ts, t)
    if t == ("op", "-"):
        v = ts.next()
        if isinstance(v, int):
            return TLit(-v)
        raise SpecParseError("unary minus only before integer literals")
    if t == ("op", "("):
        e = _parse_term(ts)
        ts.expect(")")
        return e
    if isinstance(t, str):
        if t in _TFUNS:
            ts.expect("(")
            arg = _parse_term(ts)
            ts.expect(")")
            return _TFUNS[t](arg)
        if t == "filter_eq":
            ts.expect("(")
            arg = _parse_term(ts)
            ts.expect(",")
            val = _parse_term(ts)
            ts.expect(")")
            return TFilterEq(arg, val)
        if t.endswith("_A"):
            return TAll(t[:-2])
        if t.endswith("_C"):
            return TCur(t[:-2])
        raise SpecParseError(f"bare variable {t!r}: use {t}_C or {t}_A")
    raise SpecParseError(f"unexpected token {t!r} in term")


def _parse_atom(ts: _TS) -> object:
    t = ts.next()
    if t == ("op", "[?"):
        var = ts.next()
        if not isinstance(var, (str, FreshRef)):
            raise SpecParseError(f"bad read variable {var!r}")
        ts.expect(":")
        dom = ts.next()
        if dom not in ("Nat", "Int"):
            raise SpecParseError(f"unknown value set {dom!r}")
        ts.expect("]")
        return SRead(var, dom)
    if t == ("op", "[!"):
        term = _parse_term(ts)
        ts.expect("]")
        return SWrite(term)
    if t == ("op", "("):
        if ts.peek() == ("op", ")"):
            ts.next()
            inner: object = SNop()
        else:
            inner = _parse_seq(ts)
            ts.expect(")")
        if ts.peek() == ("op", "^"):
            ts.next()
            if ts.next() != "L":
                raise SpecParseError("expected L after ^")
            return SLoop(inner)
        return inner
    if t == ("op", "{"):
        cond = _parse_term(ts)
        ts.expect("}")
        then = _parse_atom(ts)
        ts.expect("/\\")
        other = _parse_atom(ts)
        return SBranch(cond, then, other)
    if t == "E":
        return SExit()
    raise SpecParseError(f"unexpected token {t!r} in specification")


def _starts_atom(t: object) -> bool:
    return t in (("op", "[?"), ("op", "[!"), ("op", "("), ("op", "{")) or t == "E"


def _parse_seq(ts: _TS) -> object:
    items = [_parse_atom(ts)]
    while _starts_atom(ts.peek()):
        items.append(_parse_atom(ts))
    return sseq(items)


def parse_spec(text: str) -> object:
    if not text.strip():
        return SNop()
    ts = _TS(_lex(text))
    s = _parse_seq(ts)
    if not ts.done():
        raise SpecParseError(f"trailing tokens after specification: {ts.peek()!r}")
    return s


def parse_term_text(text: str) -> object:
    ts = _TS(_lex(text))
    t = _parse_term(ts)
    if not ts.done():
        raise SpecParseError(f"trailing tokens after term: {ts.peek()!r}")
    return t


# -- rendering ---------------------------------------------------------------


def _var_name(v: object) -> str:
    if isinstance(v, str):
        return v
    raise SpecError(f"unfilled variable {v!r}")


def render_term(t: object, prec: int = 0) -> str:
    def wrap(s: str, p: int) -> str:
        return f"({s})" if p < prec else s

    if isinstance(t, TLit):
        return wrap(str(t.value), 11 if t.value >= 0 else 0)
    if isinstance(t, TCur):
        return f"{_var_name(t.var)}_C"
    if isinstance(t, TAll):
        return f"{_var_name(t.var)}_A"
    if isinstance(t, TLen):
        return f"len({render_term(t.arg)})"
    if isinstance(t, TSum):
        return f"sum({render_term(t.arg)})"
    if isinstance(t, TProd):
        return f"prod({render_term(t.arg)})"
    if isinstance(t, TFilterEq):
        return f"filter_eq({render_term(t.arg)}, {render_term(t.value)})"
    if isinstance(t, TBin):
        p = _TPREC[t.op]
        s = f"{render_term(t.left, p)} {t.op} {render_term(t.right, p + 1)}"
        return wrap(s, p)
    raise SpecError(f"cannot render term {t!r}")


def _render_atom(s: object) -> str:
    if isinstance(s, SNop):
        return "()"
    if isinstance(s, SSeq):
        return f"({render_spec(s)})"
    return render_spec(s)


def render_spec(s: object) -> str:
    if isinstance(s, SNop):
        return ""
    if isinstance(s, SSeq):
        return " ".join(_render_atom(x) for x in s.items)
    if isinstance(s, SRead):
        return f"[?{_var_name(s.var)}:{s.domain}]"
    if isinstance(s, SWrite):
        return f"[!{render_term(s.term)}]"
    if isinstance(s, SLoop):
        body = render_spec(s.body) if not isinstance(s.body, SNop) else ""
        return f"({body})^L"
    if isinstance(s, SBranch):
        return f"{{{render_term(s.cond)}}} {_render_atom(s.then)} /\\ {_render_atom(s.other)}"
    if isinstance(s, SExit):
        return "E"
    raise SpecError(f"cannot render {s!r}")


# -- static checks ------------------------------------------------------------


def _walk(s: object):
    yield s
    if isinstance(s, SSeq):
        for x in s.items:
            yield from _walk(x)
    elif isinstance(s, SLoop):
        yield from _walk(s.body)
    elif isinstance(s, SBranch):
        yield from _walk(s.then)
        yield from _walk(s.other)


def _term_vars(t: object, acc: set[str]) -> None:
    if isinstance(t, (TCur, TAll)):
        if isinstance(t.var, str):
            acc.add(t.var)
    elif isinstance(t, (TLen, TSum, TProd)):
        _term_vars(t.arg, acc)
    elif isinstance(t, TFilterEq):
        _term_vars(t.arg, acc)
        _term_vars(t.value, acc)
    elif isinstance(t, TBin):
        _term_vars(t.left, acc)
        _term_vars(t.right, acc)


def static_check(s: object) -> list[str]:
    """Exit only inside loops; every referenced variable is read somewhere."""
    errors: list[str] = []

    def exits_ok(node: object, in_loop: bool) -> None:
        if isinstance(node, SExit):
            if not in_loop:
                errors.append("exit marker outside any loop")
        elif isinstance(node, SSeq):
            for x in node.items:
                exits_ok(x, in_loop)
        elif isinstance(node, SLoop):
            exits_ok(node.body, True)
        elif isinstance(node, SBranch):
            exits_ok(node.then, in_loop)
            exits_ok(node.other, in_loop)

    exits_ok(s, False)
    read_vars = {n.var for n in _walk(s) if isinstance(n, SRead) and isinstance(n.var, str)}
    used: set[str] = set()
    for n in _walk(s):
        if isinstance(n, SWrite):
            _term_vars(n.term, used)
        elif isinstance(n, SBranch):
            _term_vars(n.cond, used)
    for v in sorted(used - read_vars):
        errors.append(f"variable {v!r} is used but never read")
    return errors


# -- interpretation ------------------------------------------------------------


class Inadmissible(Exception):
    """An input value fell outside the read's value set."""


class _Exhausted(Exception):
    def __init__(self, index: int):
        self.index = index


class ListSource:
    """Feed a fixed stdin sequence to the spec interpreter."""

    def __init__(self, values):
        self.values = list(values)
        self.pos = 0

    def take(self, domain: str) -> int:
        if self.pos >= len(self.values):
            raise _Exhausted(self.pos)
        v = self.values[self.pos]
        self.pos += 1
        if domain == "Nat" and v < 0:
            raise Inadmissible(f"read expected a natural number, got {v}")
        return v


class AdaptiveSource:
    """Draw admissible inputs on demand; used to sample stdin shapes.

    Naturals are drawn from 0..5 (loop counts stay small), integers from
    -10..10.
    """

    def __init__(self, rng):
        self.rng = rng
        self.taken: list[int] = []

    def take(self, domain: str) -> int:
        v = self.rng.randint(0, 5) if domain == "Nat" else self.rng.randint(-10, 10)
        self.taken.append(v)
        return v

    @property
    def pos(self) -> int:
        return len(self.taken)


class _ExitSignal(Exception):
    pass


def _eval_term(t: object, env: dict) -> object:
    if isinstance(t, TLit):
        return t.value
    if isinstance(t, TCur):
        hist = env.get(_var_name(t.var))
        if not hist:
            raise SpecError(f"current value of {t.var!r} before any read")
        return hist[-1]
    if isinstance(t, TAll):
        return list(env.get(_var_name(t.var), []))
    if isinstance(t, TLen):
        v = _eval_term(t.arg, env)
        if not isinstance(v, list):
            raise SpecError("len of a non-sequence")
        return len(v)
    if isinstance(t, TSum):
        v = _eval_term(t.arg, env)
        if not isinstance(v, list):
            raise SpecError("sum of a non-sequence")
        return sum(v)  # empty history sums to 0
    if isinstance(t, TProd):
        v = _eval_term(t.arg, env)
        if not isinstance(v, list):
            raise SpecError("prod of a non-sequence")
        out = 1
        for x in v:
            out *= x
        return out
    if isinstance(t, TFilterEq):
        seq = _eval_term(t.arg, env)
        val = _eval_term(t.value, env)
        if not isinstance(seq, list):
            raise SpecError("filter_eq of a non-sequence")
        return [x for x in seq if x == val]
    if isinstance(t, TBin):
        l = _eval_term(t.left, env)
        r = _eval_term(t.right, env)
        if t.op == "++":
            if not (isinstance(l, list) and isinstance(r, list)):
                raise SpecError("++ of non-sequences")
            return l + r
        if t.op in ("==", "/="):
            res = l == r
            return res if t.op == "==" else not res
        if not (type(l) is int and type(r) is int):
            raise SpecError(f"arithmetic on non-integers: {l!r} {t.op} {r!r}")
        return {"+": l + r, "-": l - r, "*": l * r,
                "<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r}[t.op]
    raise SpecError(f"cannot evaluate term {t!r}")


def run_spec(s: object, stdin, budget: int = 10 ** 6) -> Trace:
    """Evaluate a specification against stdin (a sequence or an input source)."""
    problems = static_check(s)
    if problems:
        return Trace((), 0, "error", "; ".join(problems))
    source = stdin if hasattr(stdin, "take") else ListSource(stdin)
    env: dict[str, list[int]] = {}
    outputs: list[str] = []
    steps = 0

    def go(node: object) -> None:
        nonlocal steps
        steps += 1
        if steps > budget:
            raise SpecError("loop iteration budget exceeded")
        if isinstance(node, SNop):
            return
        if isinstance(node, SSeq):
            for x in node.items:
                go(x)
            return
        if isinstance(node, SRead):
            env.setdefault(_var_name(node.var), []).append(source.take(node.domain))
            return
        if isinstance(node, SWrite):
            v = _eval_term(node.term, env)
            if type(v) is not int:
                raise SpecError(f"write of a non-integer value {v!r}")
            outputs.append(str(v))
            return
        if isinstance(node, SBranch):
            c = _eval_term(node.cond, env)
            if type(c) is not bool:
                raise SpecError("branch condition is not a boolean")
            go(node.then if c else node.other)
            return
        if isinstance(node, SLoop):
            try:
                while True:
                    steps += 1
                    if steps > budget:
                        raise SpecError("loop iteration budget exceeded")
                    go(node.body)
            except _ExitSignal:
                return
        if isinstance(node, SExit):
            raise _ExitSignal()
        raise SpecError(f"cannot run {node!r}")

    try:
        go(s)
    except Inadmissible as ex:
        return Trace(tuple(outputs), source.pos, "inadmissible", str(ex))
    except _Exhausted as ex:
        return Trace(tuple(outputs), source.pos, "input_exhausted",
                     f"read #{ex.index} past end of input")
    except SpecError as ex:
        return Trace(tuple(outputs), source.pos, "error", str(ex))
    return Trace(tuple(outputs), source.pos, "ok")


# -- programs against specifications ------------------------------------------


@dataclass(frozen=True)
class SatisfiesResult:
    passed: bool
    checked: int
    skipped: int
    counterexample: tuple | None  # (stdin, program trace, spec trace)


def satisfies(p: MiniProgram, s: object, inputs) -> SatisfiesResult:
    """Compare program and spec traces on each stdin.

    Inputs the spec rejects as inadmissible are skipped: the spec
    language constrains admissible inputs, and programs only need to
    agree on those.
    """
    checked = 0
    skipped = 0
    for stdin in inputs:
        st = run_spec(s, stdin)
        if st.status == "inadmissible":
            skipped += 1
            continue
        pt = run_program(p, stdin)
        checked += 1
        if not pt.same_behavior(st):
            return SatisfiesResult(False, checked, skipped, (tuple(stdin), pt, st))
    return SatisfiesResult(True, checked, skipped, None)


def sample_stdins(s: object, rng, count: int) -> list[tuple[int, ...]]:
    """Sample admissible stdin sequences by driving the spec adaptively."""
    out: list[tuple[int, ...]] = []
    for _ in range(count):
        src = AdaptiveSource(rng)
        tr = run_spec(s, src)
        if tr.status not in ("ok",):
            raise SpecError(f"sampling failed: spec run ended with {tr.status}: {tr.detail}")
        out.append(tuple(src.taken))
    return out


# -- template filling ----------------------------------------------------------


class SpecFillError(SpecError):
    pass


def _fill_term(t: object, inputs: list, fresh: dict, allow_holes: bool) -> object:
    if isinstance(t, InRef):
        v = inputs[t.k]
        if isinstance(v, Partial):
            raise SpecFillError(f"partial value at in{t.k} used without completion")
        return v.payload
    if isinstance(t, HoleRef):
        if not allow_holes:
            raise SpecFillError(f"hole marker {t.name!r} in a visible fragment")
        return t
    if isinstance(t, FillRef):
        v = inputs[t.k]
        if not isinstance(v, Partial):
            raise SpecFillError(f"value at in{t.k} is not partial; cannot fill")
        args = []
        for a in t.args:
            if isinstance(a, FreshRef):
                args.append(TCur(fresh[a.bases]))
            elif isinstance(a, InRef):
                w = inputs[a.k]
                if isinstance(w, Partial):
                    raise SpecFillError("partial filler")
                args.append(w.payload)
            else:
                args.append(TLit(int(a)))
        if len(args) != len(v.holes):
            raise SpecFillError(f"value at in{t.k} has {len(v.holes)} hole(s), "
                                f"got {len(args)} filler(s)")
        table = dict(zip(v.holes, args))

        def subst(x: object) -> object:
            if isinstance(x, HoleRef):
                return table[x.name]
            return _tmap(x, subst)

        return subst(v.payload)
    if isinstance(t, (TCur, TAll)):
        var = t.var
        if isinstance(var, FreshRef):
            var = fresh[var.bases]
        return type(t)(var)
    return _tmap(t, lambda x: _fill_term(x, inputs, fresh, allow_holes))


def _tmap(t: object, f) -> object:
    if isinstance(t, (TLit, TCur, TAll, InRef, FreshRef, HoleRef)):
        return t
    if isinstance(t, (TLen, TSum, TProd)):
        return type(t)(f(t.arg))
    if isinstance(t, TFilterEq):
        return TFilterEq(f(t.arg), f(t.value))
    if isinstance(t, TBin):
        return TBin(t.op, f(t.left), f(t.right))
    raise SpecFillError(f"cannot map over term {t!r}")


def fill_spec(s: object, inputs: list, fresh: dict) -> object:
    if isinstance(s, (SNop, SExit)):
        return s
    if isinstance(s, SSeq):
        return sseq([fill_spec(x, inputs, fresh) for x in s.items])
    if isinstance(s, SRead):
        var = s.var
        if isinstance(var, FreshRef):
            var = fresh[var.bases]
        return SRead(var, s.domain)
    if isinstance(s, SWrite):
        return SWrite(_fill_term(s.term, inputs, fresh, False))
    if isinstance(s, SBranch):
        return SBranch(_fill_term(s.cond, inputs, fresh, False),
                       fill_spec(s.then, inputs, fresh),
                       fill_spec(s.other, inputs, fresh))
    if isinstance(s, SLoop):
        return SLoop(fill_spec(s.body, inputs, fresh))
    raise SpecFillError(f"cannot fill {s!r}")


def _term_holes(t: object, acc: list[str]) -> None:
    if isinstance(t, HoleRef):
        if t.name not in acc:
            acc.append(t.name)
    elif isinstance(t, (TLen, TSum, TProd)):
        _term_holes(t.arg, acc)
    elif isinstance(t, TFilterEq):
        _term_holes(t.arg, acc)
        _term_holes(t.value, acc)
    elif isinstance(t, TBin):
        _term_holes(t.left, acc)
        _term_holes(t.right, acc)


def fill_term_value(tmpl: object, inputs: list, fresh: dict):
    t = _fill_term(tmpl, inputs, fresh, True)
    holes: list[str] = []
    _term_holes(t, holes)
    if holes:
        return Partial(t, tuple(holes))
    return Complete(t)
