"""The program artifact kind: a mini imperative IO language.

Concrete program idioms emit statements of this language; the
Haskell-flavored text is derived by the renderer, never authored
directly.  The interpreter gives programs executable semantics so that
coherence can be checked without a Haskell toolchain.  Console values
are integers only; lists exist internally.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .markers import FillRef, FreshRef, HoleRef, InRef, split_markers


class ProgramError(Exception):
    pass


class ParseError(ProgramError):
    pass


# -- expression AST ----------------------------------------------------------

# Binder positions hold str in finished programs, FreshRef in templates.

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * ++ == /= < <= > >=
    left: object
    right: object


@dataclass(frozen=True)
class ListLit:
    items: tuple = ()


@dataclass(frozen=True)
class Length:
    arg: object


@dataclass(frozen=True)
class SumL:
    arg: object


@dataclass(frozen=True)
class ProductL:
    arg: object


@dataclass(frozen=True)
class FilterEq:
    value: object
    arg: object


@dataclass(frozen=True)
class ReplicateL:
    count: object
    item: object


@dataclass(frozen=True)
class Foldr:
    func: object
    init: object
    arg: object


@dataclass(frozen=True)
class Lambda:
    params: tuple
    body: object


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    other: object


@dataclass(frozen=True)
class Apply:
    func: object
    args: tuple


# -- statement AST -----------------------------------------------------------


@dataclass(frozen=True)
class BindRead:
    binder: object


@dataclass(frozen=True)
class BindReadList:
    binder: object
    count: object


@dataclass(frozen=True)
class LetBind:
    binder: object
    expr: object


@dataclass(frozen=True)
class LetFun:
    name: object
    params: tuple
    body: object


@dataclass(frozen=True)
class PrintStmt:
    expr: object


@dataclass(frozen=True)
class RecLoop:
    """A recursive reading loop: local definition plus its invocation.

    ``guard`` style stops when ``stop`` holds; ``countdown`` style
    pattern-matches the first parameter against 0.  ``final`` either
    wraps the result (``pure``) or performs an action such as applying a
    printing continuation.
    """

    fn: object
    params: tuple
    style: str  # "guard" | "countdown"
    stop: object | None
    final_kind: str  # "pure" | "action"
    final: object
    read_binder: object
    step_args: tuple
    init_args: tuple
    result: object | None


@dataclass(frozen=True)
class MiniProgram:
    stmts: tuple


# -- tokenizer ---------------------------------------------------------------

_OPS = ["++", "<-", "->", "==", "/=", "<=", ">=",
        "(", ")", "[", "]", ",", "=", "|", "\\", "$", "+", "-", "*", "<", ">"]
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"\d+")
_MARK_RE = re.compile(r"\{[^{}]*\}")


def _tokenize(line: str) -> list[object]:
    toks: list[object] = []
    i = 0
    n = len(line)
    while i < n:
        c = line[i]
        if c.isspace():
            i += 1
            continue
        if c == "{":
            m = _MARK_RE.match(line, i)
            if not m:
                raise ParseError(f"unterminated marker in {line!r}")
            from .markers import parse_marker
            toks.append(parse_marker(m.group(0)[1:-1]))
            i = m.end()
            continue
        m = _INT_RE.match(line, i)
        if m:
            toks.append(int(m.group(0)))
            i = m.end()
            continue
        m = _IDENT_RE.match(line, i)
        if m:
            toks.append(m.group(0))
            i = m.end()
            continue
        for op in _OPS:
            if line.startswith(op, i):
                toks.append(("op", op))
                i += len(op)
                break
        else:
            raise ParseError(f"cannot tokenize {line[i:]!r}")
    return toks


def _is_op(t: object, op: str) -> bool:
    return isinstance(t, tuple) and t == ("op", op)


class _Section:
    """Operator section ``(== e)``, only meaningful as a filter argument."""

    def __init__(self, value: object):
        self.value = value


class _TokStream:
    def __init__(self, toks: list[object], ctx: str):
        self.toks = toks
        self.i = 0
        self.ctx = ctx

    def peek(self) -> object | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> object:
        if self.i >= len(self.toks):
            raise ParseError(f"unexpected end of line in {self.ctx!r}")
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str) -> None:
        t = self.next()
        if not _is_op(t, op):
            raise ParseError(f"expected {op!r} in {self.ctx!r}, got {t!r}")

    def done(self) -> bool:
        return self.i >= len(self.toks)


_KEYWORDS = {"if", "then", "else", "otherwise", "do", "let", "readLn", "replicateM", "pure"}
_BUILTIN_FOLD = {"length": 1, "sum": 1, "product": 1, "replicate": 2, "foldr": 3}

_PREC = {"==": 4, "/=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "++": 5, "+": 6, "-": 6, "*": 7}


def _parse_expr(ts: _TokStream, min_prec: int = 0) -> object:
    left = _parse_app(ts)
    while True:
        t = ts.peek()
        if not (isinstance(t, tuple) and t[0] == "op" and t[1] in _PREC):
            return left
        op = t[1]
        prec = _PREC[op]
        if prec < min_prec:
            return left
        ts.next()
        if op == "++":  # right associative
            right = _parse_expr(ts, prec)
        elif _PREC.get(op) == 4:  # comparisons: non-associative
            right = _parse_expr(ts, prec + 1)
        else:
            right = _parse_expr(ts, prec + 1)
        left = BinOp(op, left, right)


def _starts_atom(t: object) -> bool:
    if t is None:
        return False
    if isinstance(t, (int, InRef, FreshRef, HoleRef, FillRef)):
        return True
    if isinstance(t, str):
        return t not in {"then", "else", "do", "otherwise"}
    return _is_op(t, "(") or _is_op(t, "[") or _is_op(t, "\\")


def _parse_app(ts: _TokStream) -> object:
    head = _parse_atom(ts)
    args: list[object] = []
    while _starts_atom(ts.peek()):
        args.append(_parse_atom(ts))
    if not args:
        return head
    if isinstance(head, Var):
        name = head.name
        if name == "filter":
            if len(args) != 2 or not isinstance(args[0], _Section):
                raise ParseError("filter expects a (== e) section and a list")
            return FilterEq(args[0].value, args[1])
        if name in _BUILTIN_FOLD:
            if len(args) != _BUILTIN_FOLD[name]:
                raise ParseError(f"{name} expects {_BUILTIN_FOLD[name]} argument(s)")
            return {"length": Length, "sum": SumL, "product": ProductL}[name](*args) \
                if name in ("length", "sum", "product") else (
                    ReplicateL(*args) if name == "replicate" else Foldr(*args))
    if any(isinstance(a, _Section) for a in args) or isinstance(head, _Section):
        raise ParseError("operator section outside filter")
    return Apply(head, tuple(args))


def _parse_atom(ts: _TokStream) -> object:
    t = ts.next()
    if isinstance(t, int):
        return Lit(t)
    if isinstance(t, (InRef, FreshRef, HoleRef, FillRef)):
        return t
    if _is_op(t, "-"):
        v = ts.next()
        if isinstance(v, int):
            return Lit(-v)
        raise ParseError("unary minus only before integer literals")
    if isinstance(t, str):
        if t == "if":
            cond = _parse_expr(ts)
            nt = ts.next()
            if nt != "then":
                raise ParseError("expected 'then'")
            then = _parse_expr(ts)
            nt = ts.next()
            if nt != "else":
                raise ParseError("expected 'else'")
            other = _parse_expr(ts)
            return If(cond, then, other)
        if t in {"then", "else", "do"}:
            raise ParseError(f"unexpected keyword {t!r}")
        return Var(t)
    if _is_op(t, "("):
        if isinstance(ts.peek(), tuple) and ts.peek()[0] == "op" and ts.peek()[1] in _PREC \
                and ts.peek()[1] == "==":
            ts.next()
            val = _parse_expr(ts)
            ts.expect_op(")")
            return _Section(val)
        e = _parse_expr(ts)
        ts.expect_op(")")
        return e
    if _is_op(t, "["):
        items: list[object] = []
        if _is_op(ts.peek(), "]"):
            ts.next()
            return ListLit()
        while True:
            items.append(_parse_expr(ts))
            nt = ts.next()
            if _is_op(nt, "]"):
                return ListLit(tuple(items))
            if not _is_op(nt, ","):
                raise ParseError("expected ',' or ']' in list literal")
    if _is_op(t, "\\"):
        params: list[object] = []
        while True:
            nt = ts.peek()
            if isinstance(nt, str) and nt not in _KEYWORDS:
                params.append(ts.next())
            elif isinstance(nt, FreshRef):
                params.append(ts.next())
            else:
                break
        ts.expect_op("->")
        body = _parse_expr(ts)
        return Lambda(tuple(params), body)
    raise ParseError(f"unexpected token {t!r}")


def parse_expr_text(text: str) -> object:
    ts = _TokStream(_tokenize(text), text)
    e = _parse_expr(ts)
    if not ts.done():
        raise ParseError(f"trailing tokens in expression {text!r}")
    return e


# -- statement parsing -------------------------------------------------------


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" "))


def _binder(t: object) -> object:
    if isinstance(t, str) and t not in _KEYWORDS:
        return t
    if isinstance(t, FreshRef):
        return t
    raise ParseError(f"expected a binder, got {t!r}")


def _parse_final(ts: _TokStream) -> tuple[str, object]:
    if ts.peek() == "pure":
        ts.next()
        return "pure", _parse_expr(ts)
    return "action", _parse_expr(ts)


def _parse_loop(lines: list[str], start: int, base: int, ctx: str
                ) -> tuple[RecLoop, int]:
    """Parse a multi-line ``let`` loop block plus its invocation line."""
    i = start + 1
    block: list[str] = []
    while i < len(lines) and _indent(lines[i]) > base:
        block.append(lines[i])
        i += 1
    if i >= len(lines) or _indent(lines[i]) != base:
        raise ParseError(f"loop definition in {ctx!r} lacks an invocation line")
    inv_line = lines[i]
    i += 1
    if len(block) < 4:
        raise ParseError(f"loop block in {ctx!r} too short")

    toks0 = _tokenize(block[0])
    guard_style = not any(_is_op(t, "=") for t in toks0)
    if guard_style:
        # fn p1 .. pk / | stop = final / | otherwise = do / read / call
        if len(block) != 5:
            raise ParseError(f"guard loop in {ctx!r} must have 5 lines, got {len(block)}")
        ts = _TokStream(toks0, ctx)
        fn = _binder(ts.next())
        params = []
        while not ts.done():
            params.append(_binder(ts.next()))
        ts = _TokStream(_tokenize(block[1]), ctx)
        ts.expect_op("|")
        stop = _parse_expr(ts)
        ts.expect_op("=")
        final_kind, final = _parse_final(ts)
        if not ts.done():
            raise ParseError(f"trailing tokens in stop clause of {ctx!r}")
        ts = _TokStream(_tokenize(block[2]), ctx)
        ts.expect_op("|")
        if ts.next() != "otherwise":
            raise ParseError("expected 'otherwise' guard")
        ts.expect_op("=")
        if ts.next() != "do":
            raise ParseError("expected 'do' in otherwise guard")
        read_binder, step_fn, step_args = _parse_loop_body(block[3], block[4], ctx)
        style = "guard"
    else:
        # fn 0 p2.. = final / fn p1 p2.. = do / read / call
        if len(block) != 4:
            raise ParseError(f"countdown loop in {ctx!r} must have 4 lines, got {len(block)}")
        ts = _TokStream(toks0, ctx)
        fn = _binder(ts.next())
        z = ts.next()
        if z != 0:
            raise ParseError("countdown loop first clause must match 0")
        rest_params = []
        while not _is_op(ts.peek(), "="):
            rest_params.append(_binder(ts.next()))
        ts.expect_op("=")
        final_kind, final = _parse_final(ts)
        ts2 = _TokStream(_tokenize(block[1]), ctx)
        fn2 = _binder(ts2.next())
        params = []
        while not _is_op(ts2.peek(), "="):
            params.append(_binder(ts2.next()))
        ts2.expect_op("=")
        if ts2.next() != "do":
            raise ParseError("expected 'do' in countdown loop")
        if fn2 != fn or len(params) != len(rest_params) + 1 or tuple(params[1:]) != tuple(rest_params):
            raise ParseError(f"countdown loop clauses disagree in {ctx!r}")
        read_binder, step_fn, step_args = _parse_loop_body(block[2], block[3], ctx)
        stop = None
        style = "countdown"

    if step_fn != fn:
        raise ParseError(f"loop {ctx!r} recursive call does not call its own function")

    ts = _TokStream(_tokenize(inv_line), ctx)
    first = ts.next()
    result = None
    if _is_op(ts.peek(), "<-"):
        result = _binder(first)
        ts.next()
        first = ts.next()
    inv_fn = _binder(first)
    if inv_fn != fn:
        raise ParseError(f"invocation in {ctx!r} calls {inv_fn!r}, not {fn!r}")
    init_args = []
    while not ts.done():
        init_args.append(_parse_atom(ts))
    if len(init_args) != len(params):
        raise ParseError(f"loop {ctx!r}: {len(init_args)} init args for {len(params)} params")
    return RecLoop(fn, tuple(params), style, stop, final_kind, final,
                   read_binder, tuple(step_args), tuple(init_args), result), i


def _parse_loop_body(read_line: str, call_line: str, ctx: str
                     ) -> tuple[object, object, list[object]]:
    ts = _TokStream(_tokenize(read_line), ctx)
    rb = _binder(ts.next())
    ts.expect_op("<-")
    if ts.next() != "readLn" or not ts.done():
        raise ParseError(f"loop body in {ctx!r} must read with readLn")
    ts = _TokStream(_tokenize(call_line), ctx)
    fn = _binder(ts.next())
    args = []
    while not ts.done():
        args.append(_parse_atom(ts))
    return rb, fn, args


def parse_stmts(text: str, ctx: str = "template") -> tuple:
    """Parse a block of statements (a template body or a program body)."""
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        return ()
    base = min(_indent(ln) for ln in lines)
    stmts: list[object] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if _indent(line) != base:
            raise ParseError(f"unexpected indentation at {line.strip()!r} in {ctx!r}")
        toks = _tokenize(line)
        if toks == ["let"]:
            loop, i = _parse_loop(lines, i, base, ctx)
            stmts.append(loop)
            continue
        if toks and toks[0] == "let":
            ts = _TokStream(toks[1:], ctx)
            binders = [_binder(ts.next())]
            while not _is_op(ts.peek(), "="):
                binders.append(_binder(ts.next()))
            ts.expect_op("=")
            body = _parse_expr(ts)
            if not ts.done():
                raise ParseError(f"trailing tokens after let in {ctx!r}")
            if len(binders) == 1:
                stmts.append(LetBind(binders[0], body))
            else:
                stmts.append(LetFun(binders[0], tuple(binders[1:]), body))
            i += 1
            continue
        if toks and toks[0] == "print":
            ts = _TokStream(toks[1:], ctx)
            if _is_op(ts.peek(), "$"):
                ts.next()
            e = _parse_expr(ts)
            if not ts.done():
                raise ParseError(f"trailing tokens after print in {ctx!r}")
            stmts.append(PrintStmt(e))
            i += 1
            continue
        if any(_is_op(t, "<-") for t in toks):
            ts = _TokStream(toks, ctx)
            binder = _binder(ts.next())
            ts.expect_op("<-")
            head = ts.next()
            if head == "readLn" and ts.done():
                stmts.append(BindRead(binder))
            elif head == "replicateM":
                count = _parse_atom(ts)
                if ts.next() != "readLn" or not ts.done():
                    raise ParseError(f"malformed replicateM bind in {ctx!r}")
                stmts.append(BindReadList(binder, count))
            else:
                raise ParseError(f"unsupported bind action in {ctx!r}: {line.strip()!r}")
            i += 1
            continue
        raise ParseError(f"unrecognized statement in {ctx!r}: {line.strip()!r}")
    return tuple(stmts)


def parse_program(text: str) -> MiniProgram:
    """Parse a complete rendered program back into the AST."""
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines or lines[0].strip() != "main = do":
        raise ParseError("program must start with 'main = do'")
    body = "\n".join(lines[1:])
    if body.strip() == "pure ()":  # rendering of the empty program
        return MiniProgram(())
    return MiniProgram(parse_stmts(body, "program"))


# -- rendering ---------------------------------------------------------------

_ATOM_PREC = 11
_APP_PREC = 10
_TIGHT = {"+", "-", "*"}


def is_atom(e: object) -> bool:
    return isinstance(e, (Var, ListLit)) or (isinstance(e, Lit) and e.value >= 0)


def render_expr(e: object, prec: int = 0) -> str:
    def wrap(s: str, my_prec: int) -> str:
        return f"({s})" if my_prec < prec else s

    if isinstance(e, Lit):
        return wrap(str(e.value), _ATOM_PREC if e.value >= 0 else 0)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ListLit):
        return "[" + ", ".join(render_expr(x) for x in e.items) + "]"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if e.op == "++":
            l, r = render_expr(e.left, p + 1), render_expr(e.right, p)
        else:
            l, r = render_expr(e.left, p), render_expr(e.right, p + 1)
        s = f"{l}{e.op}{r}" if e.op in _TIGHT else f"{l} {e.op} {r}"
        return wrap(s, p)
    if isinstance(e, Length):
        return wrap(f"length {render_expr(e.arg, _ATOM_PREC)}", _APP_PREC)
    if isinstance(e, SumL):
        return wrap(f"sum {render_expr(e.arg, _ATOM_PREC)}", _APP_PREC)
    if isinstance(e, ProductL):
        return wrap(f"product {render_expr(e.arg, _ATOM_PREC)}", _APP_PREC)
    if isinstance(e, FilterEq):
        return wrap(f"filter (== {render_expr(e.value)}) {render_expr(e.arg, _ATOM_PREC)}",
                    _APP_PREC)
    if isinstance(e, ReplicateL):
        return wrap(f"replicate {render_expr(e.count, _ATOM_PREC)} "
                    f"{render_expr(e.item, _ATOM_PREC)}", _APP_PREC)
    if isinstance(e, Foldr):
        return wrap(f"foldr {render_expr(e.func, _ATOM_PREC)} "
                    f"{render_expr(e.init, _ATOM_PREC)} "
                    f"{render_expr(e.arg, _ATOM_PREC)}", _APP_PREC)
    if isinstance(e, Lambda):
        ps = " ".join(_binder_name(p) for p in e.params)
        return wrap(f"\\{ps} -> {render_expr(e.body)}", 0)
    if isinstance(e, If):
        return wrap(f"if {render_expr(e.cond)} then {render_expr(e.then)} "
                    f"else {render_expr(e.other)}", 0)
    if isinstance(e, Apply):
        parts = [render_expr(e.func, _APP_PREC)] + \
            [render_expr(a, _ATOM_PREC) for a in e.args]
        return wrap(" ".join(parts), _APP_PREC)
    raise ProgramError(f"cannot render {e!r}")


def _binder_name(b: object) -> str:
    if isinstance(b, str):
        return b
    raise ProgramError(f"unfilled binder {b!r}")


def _render_final(kind: str, e: object) -> str:
    if kind == "pure":
        return f"pure {render_expr(e, _ATOM_PREC)}"
    return render_expr(e)


def render_stmt(s: object) -> list[str]:
    if isinstance(s, BindRead):
        return [f"{_binder_name(s.binder)} <- readLn"]
    if isinstance(s, BindReadList):
        return [f"{_binder_name(s.binder)} <- replicateM "
                f"{render_expr(s.count, _ATOM_PREC)} readLn"]
    if isinstance(s, LetBind):
        return [f"let {_binder_name(s.binder)} = {render_expr(s.expr)}"]
    if isinstance(s, LetFun):
        ps = " ".join(_binder_name(p) for p in s.params)
        return [f"let {_binder_name(s.name)} {ps} = {render_expr(s.body)}"]
    if isinstance(s, PrintStmt):
        if is_atom(s.expr):
            return [f"print {render_expr(s.expr, _ATOM_PREC)}"]
        return [f"print $ {render_expr(s.expr)}"]
    if isinstance(s, RecLoop):
        fn = _binder_name(s.fn)
        params = [_binder_name(p) for p in s.params]
        call = " ".join([fn] + [render_expr(a, _ATOM_PREC) for a in s.step_args])
        inv = " ".join([fn] + [render_expr(a, _ATOM_PREC) for a in s.init_args])
        if s.result is not None:
            inv = f"{_binder_name(s.result)} <- {inv}"
        if s.style == "guard":
            return [
                "let",
                f"  {fn} {' '.join(params)}",
                f"    | {render_expr(s.stop)} = {_render_final(s.final_kind, s.final)}",
                "    | otherwise = do",
                f"      {_binder_name(s.read_binder)} <- readLn",
                f"      {call}",
                inv,
            ]
        return [
            "let",
            f"  {fn} 0 {' '.join(params[1:])} = {_render_final(s.final_kind, s.final)}",
            f"  {fn} {' '.join(params)} = do",
            f"    {_binder_name(s.read_binder)} <- readLn",
            f"    {call}",
            inv,
        ]
    raise ProgramError(f"cannot render statement {s!r}")


def render_program(p: MiniProgram) -> str:
    lines = ["main = do"]
    if not p.stmts:
        lines.append("  pure ()")
    for s in p.stmts:
        lines.extend("  " + ln for ln in render_stmt(s))
    return "\n".join(lines) + "\n"


# -- interpretation ----------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """Observable console behavior: outputs produced and inputs consumed."""

    outputs: tuple[str, ...]
    consumed: int
    status: str = "ok"  # ok | input_exhausted | inadmissible | error
    detail: str = ""

    def same_behavior(self, other: "Trace") -> bool:
        return (self.outputs, self.consumed, self.status) == \
            (other.outputs, other.consumed, other.status)


class _Exhausted(Exception):
    def __init__(self, index: int):
        self.index = index


@dataclass
class Builtin:
    name: str


@dataclass
class Closure:
    params: tuple
    body: object
    env: dict


def _need_int(v: object, what: str) -> int:
    if type(v) is int:
        return v
    raise ProgramError(f"{what} is not an integer: {v!r}")


def _need_list(v: object, what: str) -> list:
    if isinstance(v, list):
        return v
    raise ProgramError(f"{what} is not a list: {v!r}")


def _apply_fn(f: object, args: list[object]) -> object:
    if isinstance(f, Closure):
        if len(f.params) != len(args):
            raise ProgramError("function arity mismatch")
        env = dict(f.env)
        for p, a in zip(f.params, args):
            env[_binder_name(p)] = a
        return _eval(f.body, env)
    raise ProgramError(f"cannot apply non-function {f!r}")


def _eval(e: object, env: dict) -> object:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        if e.name == "print":
            return Builtin("print")
        raise ProgramError(f"unbound variable {e.name!r}")
    if isinstance(e, BinOp):
        l = _eval(e.left, env)
        r = _eval(e.right, env)
        if e.op == "++":
            return _need_list(l, "++ operand") + _need_list(r, "++ operand")
        if e.op in ("==", "/="):
            res = l == r
            return res if e.op == "==" else not res
        li, ri = _need_int(l, "operand"), _need_int(r, "operand")
        if e.op == "+":
            return li + ri
        if e.op == "-":
            return li - ri
        if e.op == "*":
            return li * ri
        return {"<": li < ri, "<=": li <= ri, ">": li > ri, ">=": li >= ri}[e.op]
    if isinstance(e, ListLit):
        return [_eval(x, env) for x in e.items]
    if isinstance(e, Length):
        return len(_need_list(_eval(e.arg, env), "length argument"))
    if isinstance(e, SumL):
        return sum(_need_int(x, "sum element")
                   for x in _need_list(_eval(e.arg, env), "sum argument"))
    if isinstance(e, ProductL):
        out = 1
        for x in _need_list(_eval(e.arg, env), "product argument"):
            out *= _need_int(x, "product element")
        return out
    if isinstance(e, FilterEq):
        v = _eval(e.value, env)
        return [x for x in _need_list(_eval(e.arg, env), "filter argument") if x == v]
    if isinstance(e, ReplicateL):
        n = _need_int(_eval(e.count, env), "replicate count")
        item = _eval(e.item, env)
        return [item for _ in range(max(0, n))]
    if isinstance(e, Foldr):
        f = _eval(e.func, env)
        acc = _eval(e.init, env)
        xs = _need_list(_eval(e.arg, env), "foldr argument")
        for x in reversed(xs):
            acc = _apply_fn(f, [x, acc])
        return acc
    if isinstance(e, Lambda):
        return Closure(e.params, e.body, dict(env))
    if isinstance(e, If):
        c = _eval(e.cond, env)
        if type(c) is not bool:
            raise ProgramError("condition is not a boolean")
        return _eval(e.then if c else e.other, env)
    if isinstance(e, Apply):
        f = _eval(e.func, env)
        if isinstance(f, Builtin):
            raise ProgramError(f"{f.name} used as a pure function")
        return _apply_fn(f, [_eval(a, env) for a in e.args])
    raise ProgramError(f"cannot evaluate {e!r}")


def run_program(p: MiniProgram, stdin: list[int] | tuple[int, ...],
                budget: int = 10 ** 6) -> Trace:
    """Deterministic big-step evaluation against a finite input sequence."""
    inputs = list(stdin)
    pos = 0
    outputs: list[str] = []

    def take() -> int:
        nonlocal pos
        if pos >= len(inputs):
            raise _Exhausted(pos)
        v = inputs[pos]
        pos += 1
        return v

    def emit(v: object) -> None:
        outputs.append(str(_need_int(v, "printed value")))

    def run_action(e: object, env: dict) -> None:
        if isinstance(e, Apply):
            f = _eval(e.func, env)
            if isinstance(f, Builtin) and f.name == "print":
                if len(e.args) != 1:
                    raise ProgramError("print expects one argument")
                emit(_eval(e.args[0], env))
                return
        raise ProgramError(f"unsupported action {e!r}")

    env: dict = {}
    try:
        for s in p.stmts:
            if isinstance(s, BindRead):
                env[_binder_name(s.binder)] = take()
            elif isinstance(s, BindReadList):
                n = _need_int(_eval(s.count, env), "read-list count")
                env[_binder_name(s.binder)] = [take() for _ in range(max(0, n))]
            elif isinstance(s, LetBind):
                env[_binder_name(s.binder)] = _eval(s.expr, env)
            elif isinstance(s, LetFun):
                env[_binder_name(s.name)] = Closure(s.params, s.body, dict(env))
            elif isinstance(s, PrintStmt):
                emit(_eval(s.expr, env))
            elif isinstance(s, RecLoop):
                vals = [_eval(a, env) for a in s.init_args]
                steps = 0
                while True:
                    steps += 1
                    if steps > budget:
                        raise ProgramError("loop iteration budget exceeded")
                    local = dict(env)
                    for prm, v in zip(s.params, vals):
                        local[_binder_name(prm)] = v
                    if s.style == "guard":
                        stop = _eval(s.stop, local)
                        if type(stop) is not bool:
                            raise ProgramError("loop guard is not a boolean")
                    else:
                        stop = _need_int(vals[0], "countdown counter") == 0
                    if stop:
                        if s.final_kind == "pure":
                            result = _eval(s.final, local)
                            if s.result is not None:
                                env[_binder_name(s.result)] = result
                        else:
                            run_action(s.final, local)
                        break
                    local[_binder_name(s.read_binder)] = take()
                    vals = [_eval(a, local) for a in s.step_args]
            else:
                raise ProgramError(f"cannot execute {s!r}")
    except _Exhausted as ex:
        return Trace(tuple(outputs), pos, "input_exhausted", f"read #{ex.index} past end of input")
    except ProgramError as ex:
        return Trace(tuple(outputs), pos, "error", str(ex))
    return Trace(tuple(outputs), pos, "ok")


# -- scope analysis ----------------------------------------------------------


def _scope_expr(e: object, env: set[str], errors: list[str]) -> None:
    if isinstance(e, Var):
        if e.name not in env and e.name != "print":
            errors.append(f"unbound variable {e.name!r}")
    elif isinstance(e, (InRef, FreshRef, HoleRef, FillRef)):
        errors.append(f"unfilled marker {e!r}")
    elif isinstance(e, Lambda):
        inner = env | {_binder_name(p) for p in e.params}
        _scope_expr(e.body, inner, errors)
    elif hasattr(e, "__dataclass_fields__"):
        for f in e.__dataclass_fields__:
            v = getattr(e, f)
            if isinstance(v, tuple):
                for x in v:
                    if hasattr(x, "__dataclass_fields__"):
                        _scope_expr(x, env, errors)
            elif hasattr(v, "__dataclass_fields__"):
                _scope_expr(v, env, errors)


def check_scope(p: MiniProgram) -> list[str]:
    """Every variable reference must be bound by an earlier binder in scope."""
    errors: list[str] = []
    env: set[str] = set()
    for s in p.stmts:
        if isinstance(s, BindRead):
            env.add(_binder_name(s.binder))
        elif isinstance(s, BindReadList):
            _scope_expr(s.count, env, errors)
            env.add(_binder_name(s.binder))
        elif isinstance(s, LetBind):
            _scope_expr(s.expr, env, errors)
            env.add(_binder_name(s.binder))
        elif isinstance(s, LetFun):
            inner = env | {_binder_name(s.name)} | {_binder_name(x) for x in s.params}
            _scope_expr(s.body, inner, errors)
            env.add(_binder_name(s.name))
        elif isinstance(s, PrintStmt):
            _scope_expr(s.expr, env, errors)
        elif isinstance(s, RecLoop):
            for a in s.init_args:
                _scope_expr(a, env, errors)
            loop_env = env | {_binder_name(s.fn)} | {_binder_name(x) for x in s.params}
            if s.stop is not None:
                _scope_expr(s.stop, loop_env, errors)
            _scope_expr(s.final, loop_env, errors)
            body_env = loop_env | {_binder_name(s.read_binder)}
            for a in s.step_args:
                _scope_expr(a, body_env, errors)
            if s.result is not None:
                env.add(_binder_name(s.result))
        else:
            errors.append(f"unknown statement {s!r}")
    return errors


def binder_collisions(p: MiniProgram) -> list[str]:
    """Binder names introduced twice in overlapping scope (hygiene check)."""
    errors: list[str] = []
    top: set[str] = set()

    def enter(name: str, scope: set[str]) -> None:
        if name in scope:
            errors.append(f"binder {name!r} shadows a name already in scope")
        scope.add(name)

    for s in p.stmts:
        if isinstance(s, (BindRead,)):
            enter(_binder_name(s.binder), top)
        elif isinstance(s, BindReadList):
            enter(_binder_name(s.binder), top)
        elif isinstance(s, LetBind):
            enter(_binder_name(s.binder), top)
        elif isinstance(s, LetFun):
            local = set(top)
            enter(_binder_name(s.name), top)
            for x in s.params:
                enter(_binder_name(x), local)
        elif isinstance(s, RecLoop):
            local = set(top)
            enter(_binder_name(s.fn), local)
            for x in s.params:
                enter(_binder_name(x), local)
            enter(_binder_name(s.read_binder), local)
            if s.result is not None:
                enter(_binder_name(s.result), top)
    return errors


# -- template filling --------------------------------------------------------

from .markers import Complete, Partial  # noqa: E402


class FillError(ProgramError):
    pass


def _fill_arg(a: object, inputs: list, fresh: dict) -> object:
    if isinstance(a, FreshRef):
        return Var(fresh[a.bases])
    if isinstance(a, InRef):
        v = inputs[a.k]
        if isinstance(v, Partial):
            raise FillError(f"partial value used as an application argument (in{a.k})")
        return v.payload
    if isinstance(a, str):
        return Lit(int(a)) if a.lstrip("-").isdigit() else Var(a)
    raise FillError(f"bad application argument {a!r}")


def _subst_holes(e: object, table: dict[str, object]) -> object:
    if isinstance(e, HoleRef):
        if e.name not in table:
            raise FillError(f"no filler for hole {e.name!r}")
        return table[e.name]
    return _map_expr(e, lambda x: _subst_holes(x, table))


def _map_expr(e: object, f) -> object:
    """Rebuild an expression, applying f to child expressions."""
    if isinstance(e, (Lit, Var, InRef, FreshRef, HoleRef)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, f(e.left), f(e.right))
    if isinstance(e, ListLit):
        return ListLit(tuple(f(x) for x in e.items))
    if isinstance(e, Length):
        return Length(f(e.arg))
    if isinstance(e, SumL):
        return SumL(f(e.arg))
    if isinstance(e, ProductL):
        return ProductL(f(e.arg))
    if isinstance(e, FilterEq):
        return FilterEq(f(e.value), f(e.arg))
    if isinstance(e, ReplicateL):
        return ReplicateL(f(e.count), f(e.item))
    if isinstance(e, Foldr):
        return Foldr(f(e.func), f(e.init), f(e.arg))
    if isinstance(e, Lambda):
        return Lambda(e.params, f(e.body))
    if isinstance(e, If):
        return If(f(e.cond), f(e.then), f(e.other))
    if isinstance(e, Apply):
        return Apply(f(e.func), tuple(f(a) for a in e.args))
    if isinstance(e, FillRef):
        return e
    raise FillError(f"cannot map over {e!r}")


def _fill_expr(e: object, inputs: list, fresh: dict, allow_holes: bool) -> object:
    if isinstance(e, FreshRef):
        return Var(fresh[e.bases])
    if isinstance(e, InRef):
        v = inputs[e.k]
        if isinstance(v, Partial):
            raise FillError(f"partial value at in{e.k} used without completion")
        return v.payload
    if isinstance(e, HoleRef):
        if not allow_holes:
            raise FillError(f"hole marker {e.name!r} in a visible fragment")
        return e
    if isinstance(e, FillRef):
        v = inputs[e.k]
        args = [_fill_arg(a, inputs, fresh) for a in e.args]
        if isinstance(v, Partial):
            if len(args) != len(v.holes):
                raise FillError(
                    f"value at in{e.k} has {len(v.holes)} hole(s), got {len(args)} filler(s)")
            return _subst_holes(v.payload, dict(zip(v.holes, args)))
        if isinstance(v.payload, Lambda):
            # applying a literal lambda would leave a reducible expression
            raise FillError(f"complete lambda applied at in{e.k}; pass a partial instead")
        return Apply(v.payload, tuple(args))
    if isinstance(e, Lambda):
        params = tuple(fresh[p.bases] if isinstance(p, FreshRef) else p for p in e.params)
        return Lambda(params, _fill_expr(e.body, inputs, fresh, allow_holes))
    return _map_expr(e, lambda x: _fill_expr(x, inputs, fresh, allow_holes))


def _fill_binder(b: object, fresh: dict) -> str:
    if isinstance(b, FreshRef):
        return fresh[b.bases]
    if isinstance(b, str):
        return b
    raise FillError(f"bad binder {b!r}")


def fill_stmts(stmts: tuple, inputs: list, fresh: dict) -> tuple:
    """Instantiate statement templates with wire values and fresh names."""
    out = []
    for s in stmts:
        if isinstance(s, BindRead):
            out.append(BindRead(_fill_binder(s.binder, fresh)))
        elif isinstance(s, BindReadList):
            out.append(BindReadList(_fill_binder(s.binder, fresh),
                                    _fill_expr(s.count, inputs, fresh, False)))
        elif isinstance(s, LetBind):
            out.append(LetBind(_fill_binder(s.binder, fresh),
                               _fill_expr(s.expr, inputs, fresh, False)))
        elif isinstance(s, LetFun):
            out.append(LetFun(_fill_binder(s.name, fresh),
                              tuple(_fill_binder(p, fresh) for p in s.params),
                              _fill_expr(s.body, inputs, fresh, False)))
        elif isinstance(s, PrintStmt):
            out.append(PrintStmt(_fill_expr(s.expr, inputs, fresh, False)))
        elif isinstance(s, RecLoop):
            out.append(RecLoop(
                _fill_binder(s.fn, fresh),
                tuple(_fill_binder(p, fresh) for p in s.params),
                s.style,
                None if s.stop is None else _fill_expr(s.stop, inputs, fresh, False),
                s.final_kind,
                _fill_expr(s.final, inputs, fresh, False),
                _fill_binder(s.read_binder, fresh),
                tuple(_fill_expr(a, inputs, fresh, False) for a in s.step_args),
                tuple(_fill_expr(a, inputs, fresh, False) for a in s.init_args),
                None if s.result is None else _fill_binder(s.result, fresh),
            ))
        else:
            raise FillError(f"cannot fill statement {s!r}")
    return tuple(out)


def collect_holes(e: object, acc: list[str]) -> None:
    """Hole names in first-occurrence order."""
    if isinstance(e, HoleRef):
        if e.name not in acc:
            acc.append(e.name)
    elif isinstance(e, (Lit, Var, InRef, FreshRef)):
        return
    elif hasattr(e, "__dataclass_fields__"):
        for f in e.__dataclass_fields__:
            v = getattr(e, f)
            if isinstance(v, tuple):
                for x in v:
                    if hasattr(x, "__dataclass_fields__"):
                        collect_holes(x, acc)
            elif hasattr(v, "__dataclass_fields__"):
                collect_holes(v, acc)


def fill_value(tmpl: object, inputs: list, fresh: dict):
    """Instantiate a silent-output expression template into a Value."""
    e = _fill_expr(tmpl, inputs, fresh, True)
    holes: list[str] = []
    collect_holes(e, holes)
    if holes:
        return Partial(e, tuple(holes))
    return Complete(e)
