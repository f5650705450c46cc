"""ASCII concrete syntax for dGL: recursive-descent parser, printer, diagnostics.

Grammar (lowest to highest precedence)::

    formula  := imply ('<->' imply)*
    imply    := or ('->' imply)?                 right associative
    or       := and ('|' and)*
    and      := unary ('&' unary)*
    unary    := '!' unary | '\\forall' x unary | '\\exists' x unary
              | '<' game '>' unary | '[' game ']' unary | atom
    atom     := 'true' | 'false' | '(' formula ')' | term rel term

    game     := seq ('++' game)?
    seq      := item (';' seq?)?                 trailing ';' tolerated
    item     := x ':=' term | x ':=' '*' | '?' formula
              | '{' x'=term, ... ('&' formula)? '}'
              | '{' game '}' ('*' | '^@')*

    term     := mul (('+' | '-') mul)*
    mul      := neg (('*' | '/') neg)*
    neg      := '-' neg | pow
    pow      := prim ('^' INT)?
    prim     := NUMBER | x | '(' term ')'

``#`` starts a comment that runs to the end of the line.

Parse failures are never raised as bare exceptions: :func:`parse_formula`
raises :class:`DglSyntaxError` carrying a list of :class:`Diagnostic`, each
with a short templated message meant to be fed back to a language model.
"""

from __future__ import annotations

import enum
import re
from dataclasses import asdict, dataclass
from fractions import Fraction

from . import ir
from .ir import (
    ODE,
    Add,
    And,
    Assign,
    AssignAny,
    Box,
    Choice,
    Cmp,
    Diamond,
    Div,
    Dual,
    Equiv,
    Exists,
    FalseF,
    Forall,
    Imply,
    Loop,
    Mul,
    Neg,
    Not,
    Num,
    Or,
    Pow,
    Seq,
    Sub,
    Test,
    TrueF,
    Var,
)


class Code(str, enum.Enum):
    UNICODE_CHAR = "UnicodeChar"
    UNBALANCED_DELIMITER = "UnbalancedDelimiter"
    UNKNOWN_TOKEN = "UnknownToken"
    MISSING_SEMICOLON = "MissingSemicolon"
    BAD_MODALITY = "BadModality"
    BAD_ODE = "BadODE"
    TRAILING_INPUT = "TrailingInput"
    OTHER = "Other"


# Message templates.  Every rendered message is one sentence of at most 200
# characters; parameters are clipped before substitution.
TEMPLATES = {
    Code.UNICODE_CHAR: (
        "The input formula contains an unsupported Unicode character "
        "(possibly {bad_char}). Use only ASCII characters."
    ),
    Code.UNBALANCED_DELIMITER: (
        "The delimiter '{delim}' at line {line}, column {col} {problem}; "
        "check that every ( [ {{ < has a matching ) ] }} >."
    ),
    Code.UNKNOWN_TOKEN: (
        "Unexpected '{token}' at line {line}, column {col}; expected {expected}."
    ),
    Code.MISSING_SEMICOLON: (
        "Missing ';' before '{token}' at line {line}, column {col}; "
        "terminate every statement of a game with ';'."
    ),
    Code.BAD_MODALITY: (
        "Malformed modality at line {line}, column {col}: {detail}; "
        "write <game> formula or [game] formula."
    ),
    Code.BAD_ODE: (
        "Malformed differential equation at line {line}, column {col}: {detail}; "
        "write {{x'=e, y'=f & Q}} with a nonempty constraint Q after '&'."
    ),
    Code.TRAILING_INPUT: (
        "Unexpected input '{token}' at line {line}, column {col} after a complete "
        "formula; provide exactly one formula."
    ),
    Code.OTHER: "Syntax error at line {line}, column {col}: {detail}.",
}

MAX_MESSAGE = 200


@dataclass(frozen=True)
class Diagnostic:
    code: Code
    message: str
    offset: int  # byte offset into the UTF-8 input
    line: int
    column: int
    excerpt: str
    params: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["code"] = self.code.value
        d["params"] = dict(self.params)
        return d

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


class DglSyntaxError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


def render(code: Code, **params) -> str:
    clipped = {
        k: _clip(str(v), 24 if k in ("bad_char", "token", "delim") else 90)
        for k, v in params.items()
    }
    msg = TEMPLATES[code].format(**clipped)
    if len(msg) > MAX_MESSAGE:
        msg = msg[: MAX_MESSAGE - 3] + "..."
    return msg


def _clip(s: str, n: int) -> str:
    s = s.replace("\n", " ")
    return s if len(s) <= n else s[: n - 3] + "..."


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d*)?|\.\d+)
  | (?P<quant>\\(?:forall|exists)(?![A-Za-z0-9_]))
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op><->|:=|<=|>=|!=|->|\+\+|\^@|[<>\[\](){};,'?=!&|+\-*/^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'ident', 'kw', 'quant', 'op', 'eof'
    text: str
    start: int  # character index
    end: int


class _Fail(Exception):
    def __init__(self, code: Code, index: int, **params):
        self.code = code
        self.index = index  # token index
        self.params = params


class _LexError(Exception):
    def __init__(self, start: int, text: str):
        self.start = start
        self.text = text


def tokenize(src: str) -> list:
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise _LexError(pos, src[pos])
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "ident" and text in ("true", "false"):
                kind = "kw"
            toks.append(Token(kind, text, pos, m.end()))
        pos = m.end()
    toks.append(Token("eof", "", n, n))
    return toks


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

_RELS = frozenset(ir.RELATIONS)
_SPECIFIC = frozenset(
    {Code.MISSING_SEMICOLON, Code.BAD_MODALITY, Code.BAD_ODE, Code.UNBALANCED_DELIMITER}
)


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0
        self.furthest = None

    # -- helpers ----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("op", "kw", "quant") and t.text in texts

    def fail(self, code=Code.UNKNOWN_TOKEN, index=None, **params):
        f = _Fail(code, self.i if index is None else index, **params)
        best = self.furthest
        if (
            best is None
            or f.index > best.index
            or (f.index == best.index and f.code in _SPECIFIC and best.code not in _SPECIFIC)
        ):
            self.furthest = f
        raise f

    def expect(self, text, expected=None):
        if not self.at(text):
            self.fail(expected=expected or f"'{text}'")
        self.i += 1

    def starts_statement(self) -> bool:
        t = self.tok
        if t.kind == "ident" and self.peek().text == ":=":
            return True
        return t.kind == "op" and t.text in ("?", "{")

    # -- formulas ---------------------------------------------------------

    def formula(self):
        left = self.imply()
        while self.at("<->"):
            self.i += 1
            left = Equiv(left, self.imply())
        return left

    def imply(self):
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return Imply(left, self.imply())
        return left

    def disj(self):
        left = self.conj()
        while self.at("|"):
            self.i += 1
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.at("&"):
            self.i += 1
            left = And(left, self.unary())
        return left

    def unary(self):
        t = self.tok
        if self.at("!"):
            self.i += 1
            return Not(self.unary())
        if t.kind == "quant":
            self.i += 1
            if self.tok.kind != "ident":
                self.fail(expected="a variable name after the quantifier")
            var = self.tok.text
            self.i += 1
            body = self.unary()
            return Forall(var, body) if t.text == "\\forall" else Exists(var, body)
        if self.at("<"):
            return self.modality("<", ">", Diamond)
        if self.at("["):
            return self.modality("[", "]", Box)
        return self.atom()

    def modality(self, open_, close, ctor):
        start = self.i
        self.i += 1
        if self.at(close):
            self.fail(Code.BAD_MODALITY, detail="the game is empty")
        game = self.game()
        if not self.at(close):
            later = any(
                t.kind == "op" and t.text == close for t in self.toks[self.i :]
            )
            if not later:
                self.fail(
                    Code.UNBALANCED_DELIMITER,
                    index=start,
                    delim=open_,
                    problem=f"is never closed by '{close}'",
                )
            self.fail(expected=f"'{close}' to close the modality or ';' between statements")
        self.i += 1
        return ctor(game, self.unary())

    def atom(self):
        t = self.tok
        if t.kind == "kw":
            self.i += 1
            return TrueF() if t.text == "true" else FalseF()
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except _Fail:
                self.i = save
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        return self.comparison()

    def comparison(self):
        left = self.term()
        t = self.tok
        if not (t.kind == "op" and t.text in _RELS):
            self.fail(expected="a comparison operator (= != < <= > >=)")
        self.i += 1
        return Cmp(left, t.text, self.term())

    # -- terms ------------------------------------------------------------

    def term(self):
        left = self.mul()
        while self.at("+", "-"):
            op = self.tok.text
            self.i += 1
            right = self.mul()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def mul(self):
        left = self.neg()
        while self.at("*", "/"):
            op = self.tok.text
            self.i += 1
            right = self.neg()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def neg(self):
        if self.at("-"):
            self.i += 1
            return Neg(self.neg())
        return self.power()

    def power(self):
        base = self.prim()
        if self.at("^"):
            self.i += 1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.fail(Code.OTHER, detail="exponents must be nonnegative integer literals")
            self.i += 1
            if self.at("^"):
                self.fail(Code.OTHER, detail="parenthesize chained exponents")
            return Pow(base, int(t.text))
        return base

    def prim(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num.parse(t.text)
        if t.kind == "ident":
            self.i += 1
            if self.at("'"):
                self.fail(
                    Code.BAD_ODE,
                    detail="primed variables may only appear inside braces",
                )
            return Var(t.text)
        if self.at("("):
            self.i += 1
            inner = self.term()
            self.expect(")")
            return inner
        self.fail(expected="a number, variable or '('")

    # -- games ------------------------------------------------------------

    def game(self):
        left = self.seq()
        if self.at("++"):
            self.i += 1
            return Choice(left, self.game())
        return left

    def seq(self):
        left, braced = self.item()
        if self.at(";"):
            self.i += 1
            if self.at(">", "]", "}", "++") or self.tok.kind == "eof":
                return left
            return Seq(left, self.seq())
        if self.starts_statement():
            if braced:
                return Seq(left, self.seq())
            self.fail(Code.MISSING_SEMICOLON, token=self.tok.text)
        return left

    def item(self):
        t = self.tok
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.text == ":=":
                self.i += 2
                if self.at("*"):
                    self.i += 1
                    return AssignAny(t.text), False
                return Assign(t.text, self.term()), False
            if nxt.text == "'":
                self.fail(Code.BAD_ODE, detail="differential equations must be enclosed in braces")
            self.fail(index=self.i + 1, expected="':=' in an assignment")
        if self.at("?"):
            self.i += 1
            return Test(self.formula()), False
        if self.at("{"):
            if self.peek().kind == "ident" and self.peek(2).text == "'":
                return self.ode(), True
            self.i += 1
            if self.at("}"):
                self.fail(expected="a game inside braces")
            body = self.game()
            self.expect("}", expected="'}' or ';' between statements")
            while self.at("*", "^@"):
                body = Loop(body) if self.tok.text == "*" else Dual(body)
                self.i += 1
            return body, True
        self.fail(expected="a game statement (x := e, x := *, ?cond, {x'=e})")

    def ode(self):
        self.i += 1  # '{'
        eqs = []
        seen = set()
        while True:
            t = self.tok
            if t.kind != "ident" or self.peek().text != "'":
                self.fail(Code.BAD_ODE, detail="expected x'=e")
            if t.text in seen:
                self.fail(Code.BAD_ODE, detail=f"variable {t.text} is evolved twice")
            seen.add(t.text)
            self.i += 2
            if not self.at("="):
                self.fail(Code.BAD_ODE, detail="expected '=' after the primed variable")
            self.i += 1
            if self.at(",", "}", "&"):
                self.fail(Code.BAD_ODE, detail="missing right-hand side")
            eqs.append((t.text, self.term()))
            if self.at(","):
                self.i += 1
                continue
            break
        domain = TrueF()
        if self.at("&"):
            self.i += 1
            if self.at("}") or self.tok.kind == "eof":
                self.fail(Code.BAD_ODE, detail="the domain constraint after '&' is empty")
            domain = self.formula()
        if not self.at("}"):
            self.fail(Code.BAD_ODE, detail="expected ',' or '&' or '}'")
        self.i += 1
        return ODE(tuple(eqs), domain)


# --------------------------------------------------------------------------
# Public entry points
# --------------------------------------------------------------------------


def _decode(src) -> str:
    if isinstance(src, (bytes, bytearray)):
        return bytes(src).decode("utf-8", errors="replace")
    return src


def _locate(src: str, index: int):
    line = src.count("\n", 0, index) + 1
    col = index - (src.rfind("\n", 0, index) + 1) + 1
    return len(src[:index].encode("utf-8")), line, col


def _diag(src, code, start, end, **params) -> Diagnostic:
    offset, line, col = _locate(src, start)
    params.setdefault("line", line)
    params.setdefault("col", col)
    msg = render(code, **params)
    extra = tuple(sorted((k, str(v)) for k, v in params.items() if k not in ("line", "col")))
    return Diagnostic(code, msg, offset, line, col, src[start:end], extra)


def unicode_diagnostics(src: str) -> list:
    out = []
    seen = set()
    for i, ch in enumerate(src):
        if ord(ch) > 127 and ch not in seen:
            seen.add(ch)
            out.append(_diag(src, Code.UNICODE_CHAR, i, i + 1, bad_char=ch))
    return out


def _delimiter_diagnostic(src, toks):
    pairs = {"(": ")", "[": "]", "{": "}"}
    closers = {v: k for k, v in pairs.items()}
    stack = []
    for t in toks:
        if t.kind != "op":
            continue
        if t.text in pairs:
            stack.append(t)
        elif t.text in closers:
            if not stack or stack[-1].text != closers[t.text]:
                return _diag(
                    src, Code.UNBALANCED_DELIMITER, t.start, t.end,
                    delim=t.text, problem="has no matching opener",
                )
            stack.pop()
    if stack:
        t = stack[-1]
        return _diag(
            src, Code.UNBALANCED_DELIMITER, t.start, t.end,
            delim=t.text, problem=f"is never closed by '{pairs[t.text]}'",
        )
    return None


def diagnose(src, failure) -> list:
    """Map an internal parse failure to the most specific diagnostics.

    Unicode problems dominate, then delimiter imbalance, then the parser's
    furthest failure.  Never returns an empty list.
    """
    src = _decode(src)
    uni = unicode_diagnostics(src)
    if uni:
        return uni
    if isinstance(failure, _LexError):
        return [
            _diag(src, Code.UNKNOWN_TOKEN, failure.start, failure.start + 1,
                  token=failure.text, expected="an ASCII dGL token")
        ]
    try:
        toks = tokenize(src)
    except _LexError as e:
        return diagnose(src, e)
    if isinstance(failure, _Fail):
        delim = _delimiter_diagnostic(src, toks)
        if delim is not None:
            return [delim]
        idx = min(failure.index, len(toks) - 1)
        t = toks[idx]
        params = dict(failure.params)
        code = failure.code
        text = t.text if t.kind != "eof" else "end of input"
        if code is Code.UNKNOWN_TOKEN:
            params.setdefault("expected", "a formula")
            params["token"] = text
        elif code is Code.MISSING_SEMICOLON or code is Code.TRAILING_INPUT:
            params["token"] = text
        elif code is Code.BAD_ODE or code is Code.BAD_MODALITY or code is Code.OTHER:
            params.setdefault("detail", "unexpected " + text)
        elif code is Code.UNBALANCED_DELIMITER:
            params.setdefault("delim", t.text)
            params.setdefault("problem", "is unbalanced")
        return [_diag(src, code, t.start, max(t.end, t.start + 1), **params)]
    detail = str(failure) if failure else "the input could not be parsed"
    return [_diag(src, Code.OTHER, 0, 0, detail=detail)]


def _run(src, entry: str):
    src = _decode(src)
    if unicode_diagnostics(src):
        raise DglSyntaxError(unicode_diagnostics(src))
    try:
        toks = tokenize(src)
    except _LexError as e:
        raise DglSyntaxError(diagnose(src, e)) from None
    if toks[0].kind == "eof":
        raise DglSyntaxError([_diag(src, Code.OTHER, 0, 0, detail="the input is empty")])
    p = _Parser(toks)
    try:
        try:
            result = getattr(p, entry)()
            if p.tok.kind != "eof":
                p.fail(Code.TRAILING_INPUT)
            return result
        except _Fail:
            failure = p.furthest
        if entry == "formula":
            failure = _fallback_game(toks, failure)
    except RecursionError:
        raise DglSyntaxError(
            [_diag(src, Code.OTHER, 0, 0, detail="the input is nested too deeply")]
        ) from None
    raise DglSyntaxError(diagnose(src, failure))


def _fallback_game(toks, failure):
    """Parse a failed formula as a bare game to find a better error.

    A bare game that parses completely is reported as a missing modality.
    """
    g = _Parser(toks)
    try:
        g.game()
        if g.tok.kind == "eof":
            return _Fail(Code.BAD_MODALITY, 0, detail="a game must be wrapped in a modality")
        g.fail(Code.TRAILING_INPUT)
    except _Fail:
        pass
    alt = g.furthest
    if alt is not None and alt.index > failure.index:
        return alt
    return failure


def parse_formula(src) -> ir.Formula:
    """Parse one formula; raises DglSyntaxError with diagnostics on failure."""
    return _run(src, "formula")


def parse_term(src) -> ir.Term:
    return _run(src, "term")


def parse_game(src) -> ir.Game:
    return _run(src, "game")


def check_syntax(src) -> list:
    """Diagnostics for ``src``; empty when it parses."""
    try:
        parse_formula(src)
    except DglSyntaxError as e:
        return e.diagnostics
    return []


# --------------------------------------------------------------------------
# Printer
# --------------------------------------------------------------------------

_TERM_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _tprec(t) -> int:
    return _TERM_PREC.get(type(t), 5)


def print_term(t: ir.Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        text = t.text
        if text is None:
            v = t.value
            return f"({v.numerator}/{v.denominator})"
        return text
    if isinstance(t, Neg):
        inner = print_term(t.arg)
        if _tprec(t.arg) < 4 or inner.startswith("-"):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(t, Pow):
        base = print_term(t.base)
        if _tprec(t.base) < 5:
            base = f"({base})"
        return f"{base}^{t.exp}"
    p = _tprec(t)
    left = print_term(t.left)
    if _tprec(t.left) < p:
        left = f"({left})"
    right = print_term(t.right)
    if _tprec(t.right) <= p:
        right = f"({right})"
    if isinstance(t, (Add, Sub)):
        op = " + " if isinstance(t, Add) else " - "
    else:
        op = "*" if isinstance(t, Mul) else "/"
    return f"{left}{op}{right}"


_FORM_PREC = {Equiv: 1, Imply: 2, Or: 3, And: 4, Not: 5, Forall: 5, Exists: 5, Diamond: 5, Box: 5}


def _fprec(f) -> int:
    return _FORM_PREC.get(type(f), 6)


def _wrap(f, need: int) -> str:
    s = print_formula(f)
    return f"({s})" if _fprec(f) < need else s


def print_formula(f: ir.Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Cmp):
        return f"{print_term(f.left)} {f.rel} {print_term(f.right)}"
    if isinstance(f, Not):
        return "!" + _wrap(f.arg, 5)
    if isinstance(f, (Forall, Exists)):
        q = "\\forall" if isinstance(f, Forall) else "\\exists"
        body = print_formula(f.body)
        if _fprec(f.body) != 5:
            body = f"({body})"
        return f"{q} {f.var} {body}"
    if isinstance(f, Diamond):
        return f"<{print_game(f.game)}> {_wrap(f.post, 5)}"
    if isinstance(f, Box):
        return f"[{print_game(f.game)}] {_wrap(f.post, 5)}"
    if isinstance(f, Equiv):
        return f"{_wrap(f.left, 1)} <-> {_wrap(f.right, 2)}"
    if isinstance(f, Imply):
        return f"{_wrap(f.left, 3)} -> {_wrap(f.right, 2)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left, 3)} | {_wrap(f.right, 4)}"
    if isinstance(f, And):
        return f"{_wrap(f.left, 4)} & {_wrap(f.right, 5)}"
    raise TypeError(f"not a formula: {f!r}")


def print_game(g: ir.Game) -> str:
    if isinstance(g, Assign):
        return f"{g.var} := {print_term(g.term)};"
    if isinstance(g, AssignAny):
        return f"{g.var} := *;"
    if isinstance(g, Test):
        return f"?{print_formula(g.cond)};"
    if isinstance(g, ODE):
        eqs = ", ".join(f"{v}' = {print_term(rhs)}" for v, rhs in g.equations)
        if isinstance(g.domain, TrueF):
            return "{" + eqs + "}"
        return "{" + eqs + " & " + print_formula(g.domain) + "}"
    if isinstance(g, Loop):
        return "{" + print_game(g.body) + "}*"
    if isinstance(g, Dual):
        return "{" + print_game(g.body) + "}^@"
    if isinstance(g, Seq):
        first = print_game(g.first)
        if isinstance(g.first, (Seq, Choice)):
            first = "{" + first + "}"
        elif not first.endswith(";"):
            first += ";"
        second = print_game(g.second)
        if isinstance(g.second, Choice):
            second = "{" + second + "}"
        return f"{first} {second}"
    if isinstance(g, Choice):
        left = print_game(g.left)
        if isinstance(g.left, Choice):
            left = "{" + left + "}"
        return f"{left} ++ {print_game(g.right)}"
    raise TypeError(f"not a game: {g!r}")


def strip_comments(src: str) -> str:
    return "\n".join(line.split("#", 1)[0] for line in src.splitlines())


def parse_value(text: str) -> Fraction:
    """Exact value of a ground term such as ``3``, ``-1/2`` or ``0.25``."""
    t = parse_term(text)
    return _ground(t)


def _ground(t) -> Fraction:
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Neg):
        return -_ground(t.arg)
    if isinstance(t, Add):
        return _ground(t.left) + _ground(t.right)
    if isinstance(t, Sub):
        return _ground(t.left) - _ground(t.right)
    if isinstance(t, Mul):
        return _ground(t.left) * _ground(t.right)
    if isinstance(t, Div):
        return _ground(t.left) / _ground(t.right)
    if isinstance(t, Pow):
        return _ground(t.base) ** t.exp
    raise ValueError("not a ground term")
