"""Abstract syntax, concrete grammar and printer for IST formulas.

Surface syntax is ASCII::

    forall st fin A . exists x . forall a in A . a in x

Precedence, tightest first: ``~``, ``&``, ``|``, ``->`` (right associative),
``<->``.  A quantifier body extends as far to the right as possible.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

KEYWORDS = frozenset({"forall", "exists", "st", "fin", "in"})
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class App:
    """Macro application used as a term, e.g. ``app(F,n)``."""
    head: str
    args: tuple

    def __str__(self):
        return f"{self.head}({','.join(str(a) for a in self.args)})"


Term = Union[Var, App]


# ------------------------------------------------------------- formulas

@dataclass(frozen=True)
class In:
    left: Term
    right: Term


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class St:
    term: Term


@dataclass(frozen=True)
class Pred:
    """Macro predicate atom such as ``Nat(n)`` or ``isfunc(F)``."""
    head: str
    args: tuple


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Quant:
    kind: str                      # "exists" | "forall"
    external: bool
    finite: bool
    var: str
    bound: Optional[Term]
    body: "Formula"

    def __post_init__(self):
        if self.kind not in ("exists", "forall"):
            raise ValueError(f"bad quantifier kind {self.kind!r}")
        if self.bound is not None and self.var in term_vars(self.bound):
            raise ValueError(f"bound of {self.var} mentions {self.var}")

    def with_body(self, body):
        return Quant(self.kind, self.external, self.finite, self.var, self.bound, body)


Formula = Union[In, Eq, St, Pred, Not, And, Or, Implies, Iff, Quant]
ATOMS = (In, Eq, St, Pred)
BINARY = (And, Or, Implies, Iff)


def exists(var, body, *, st=False, fin=False, bound=None):
    return Quant("exists", st, fin, var, _term(bound), body)


def forall(var, body, *, st=False, fin=False, bound=None):
    return Quant("forall", st, fin, var, _term(bound), body)


def _term(t):
    if t is None or isinstance(t, (Var, App)):
        return t
    return Var(t)


def conj(*fs):
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


# ------------------------------------------------------------ traversal

def term_vars(t: Term) -> set:
    if isinstance(t, Var):
        return {t.name}
    out = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def children(f) -> tuple:
    if isinstance(f, Not):
        return (f.body,)
    if isinstance(f, BINARY):
        return (f.left, f.right)
    if isinstance(f, Quant):
        return (f.body,)
    return ()


def rebuild(f, kids):
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, BINARY):
        return type(f)(kids[0], kids[1])
    if isinstance(f, Quant):
        return f.with_body(kids[0])
    return f


def subformula(f, path):
    for k in path:
        f = children(f)[k]
    return f


def replace_at(f, path, new):
    if not path:
        return new
    kids = list(children(f))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return rebuild(f, kids)


def walk(f, path=()) -> Iterator[tuple]:
    """Pre-order (outermost-leftmost) traversal yielding ``(path, node)``."""
    yield path, f
    for k, c in enumerate(children(f)):
        yield from walk(c, path + (k,))


def atom_terms(f) -> tuple:
    if isinstance(f, (In, Eq)):
        return (f.left, f.right)
    if isinstance(f, St):
        return (f.term,)
    if isinstance(f, Pred):
        return f.args
    return ()


def free_vars(f) -> set:
    """Free variables; variables of a quantifier bound count as free."""
    if isinstance(f, ATOMS):
        out = set()
        for t in atom_terms(f):
            out |= term_vars(t)
        return out
    if isinstance(f, Quant):
        out = free_vars(f.body) - {f.var}
        if f.bound is not None:
            out |= term_vars(f.bound)
        return out
    out = set()
    for c in children(f):
        out |= free_vars(c)
    return out


def all_vars(f) -> set:
    out = set()
    for _, g in walk(f):
        if isinstance(g, Quant):
            out.add(g.var)
        for t in atom_terms(g) + ((g.bound,) if isinstance(g, Quant) and g.bound else ()):
            out |= term_vars(t)
    return out


def has_macros(f) -> bool:
    for _, g in walk(f):
        if isinstance(g, Pred):
            return True
        ts = atom_terms(g) + ((g.bound,) if isinstance(g, Quant) and g.bound else ())
        if any(isinstance(t, App) for t in ts):
            return True
    return False


def size(f) -> int:
    return 1 + sum(size(c) for c in children(f))


# ------------------------------------------------- fresh names, renaming

def fresh_name(base: str, avoid) -> str:
    """``base`` followed by the fewest primes not in ``avoid``."""
    root = base.rstrip("'")
    name = root
    while name in avoid:
        name += "'"
    return name


def subst_term(t: Term, v: str, s: Term) -> Term:
    if isinstance(t, Var):
        return s if t.name == v else t
    return App(t.head, tuple(subst_term(a, v, s) for a in t.args))


def substitute(f, v: str, t: Term):
    """Capture-avoiding substitution of term ``t`` for free variable ``v``."""
    if isinstance(t, str):
        t = Var(t)
    tv = term_vars(t)
    return _subst(f, v, t, tv)


def _subst(f, v, t, tv):
    if isinstance(f, In):
        return In(subst_term(f.left, v, t), subst_term(f.right, v, t))
    if isinstance(f, Eq):
        return Eq(subst_term(f.left, v, t), subst_term(f.right, v, t))
    if isinstance(f, St):
        return St(subst_term(f.term, v, t))
    if isinstance(f, Pred):
        return Pred(f.head, tuple(subst_term(a, v, t) for a in f.args))
    if isinstance(f, Quant):
        if v not in free_vars(f):
            return f
        bound = subst_term(f.bound, v, t) if f.bound is not None else None
        var, body = f.var, f.body
        if var in tv:
            var = fresh_name(var, tv | free_vars(body) | {v})
            body = _subst(body, f.var, Var(var), {var})
        if f.var != v:
            body = _subst(body, v, t, tv)
        return Quant(f.kind, f.external, f.finite, var, bound, body)
    return rebuild(f, [_subst(c, v, t, tv) for c in children(f)])


def rename_bound(q: Quant, new: str) -> Quant:
    """Alpha-rename the variable bound by ``q``."""
    if new == q.var:
        return q
    return Quant(q.kind, q.external, q.finite, new, q.bound,
                 substitute(q.body, q.var, Var(new)))


# ------------------------------------------------------ alpha-equivalence

def canonical(f, env=None, depth=0):
    """De Bruijn style renaming: bound variables become ``#0``, ``#1``, ..."""
    env = env or {}

    def ct(t):
        if isinstance(t, Var):
            return Var(env.get(t.name, t.name))
        return App(t.head, tuple(ct(a) for a in t.args))

    if isinstance(f, In):
        return In(ct(f.left), ct(f.right))
    if isinstance(f, Eq):
        return Eq(ct(f.left), ct(f.right))
    if isinstance(f, St):
        return St(ct(f.term))
    if isinstance(f, Pred):
        return Pred(f.head, tuple(ct(a) for a in f.args))
    if isinstance(f, Quant):
        bound = ct(f.bound) if f.bound is not None else None
        name = f"#{depth}"
        body = canonical(f.body, {**env, f.var: name}, depth + 1)
        return Quant(f.kind, f.external, f.finite, name, bound, body)
    return rebuild(f, [canonical(c, env, depth) for c in children(f)])


def alpha_equiv(f, g) -> bool:
    return canonical(f) == canonical(g)


# ---------------------------------------------------------------- lexer

class ParseError(SyntaxError):
    """Syntax error carrying a 1-based line/column and the expected tokens."""

    def __init__(self, message, line, column, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(expected))
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"line {line}, column {column}: {message}{exp}")


@dataclass
class Token:
    kind: str          # ident, keyword, sym, eof
    text: str
    line: int
    column: int


_SYMBOLS = ("<->", "->", "~", "&", "|", "(", ")", ".", ",", "=")


def tokenize(text: str) -> list:
    toks = []
    line, col, i = 1, 1, 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch.isspace():
            col, i = col + 1, i + 1
            continue
        m = IDENT_RE.match(text, i)
        if m:
            word = m.group()
            toks.append(Token("keyword" if word in KEYWORDS else "ident", word, line, col))
            col += len(word)
            i = m.end()
            continue
        for s in _SYMBOLS:
            if text.startswith(s, i):
                toks.append(Token("sym", s, line, col))
                col += len(s)
                i += len(s)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# --------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.pos = 0

    @property
    def tok(self):
        return self.toks[self.pos]

    def at(self, text):
        return self.tok.kind in ("sym", "keyword") and self.tok.text == text

    def fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.line, t.column, expected)

    def expect(self, text):
        if not self.at(text):
            self.fail({text})
        self.pos += 1

    def ident(self):
        if self.tok.kind != "ident":
            self.fail({"identifier"})
        name = self.tok.text
        self.pos += 1
        return name

    def formula(self):
        f = self.imp()
        while self.at("<->"):
            self.pos += 1
            f = Iff(f, self.imp())
        return f

    def imp(self):
        f = self.or_()
        if self.at("->"):
            self.pos += 1
            return Implies(f, self.imp())
        return f

    def or_(self):
        f = self.and_()
        while self.at("|"):
            self.pos += 1
            f = Or(f, self.and_())
        return f

    def and_(self):
        f = self.neg()
        while self.at("&"):
            self.pos += 1
            f = And(f, self.neg())
        return f

    def neg(self):
        if self.at("~"):
            self.pos += 1
            return Not(self.neg())
        if self.at("forall") or self.at("exists"):
            return self.quant()
        if self.at("("):
            self.pos += 1
            f = self.formula()
            self.expect(")")
            return f
        if self.at("st"):
            self.pos += 1
            return St(self.term())
        if self.tok.kind == "ident":
            return self.atom()
        self.fail({"~", "(", "forall", "exists", "st", "identifier"})

    def quant(self):
        kind = self.tok.text
        self.pos += 1
        ext = fin = False
        if self.at("st"):
            ext = True
            self.pos += 1
        if self.at("fin"):
            fin = True
            self.pos += 1
        var = self.ident()
        bound = None
        if self.at("in"):
            self.pos += 1
            bound = self.term()
        self.expect(".")
        body = self.formula()
        if bound is not None and var in term_vars(bound):
            t = self.tok
            raise ParseError(f"bound of {var} mentions {var}", t.line, t.column)
        return Quant(kind, ext, fin, var, bound, body)

    def atom(self):
        left = self.term()
        if self.at("in"):
            self.pos += 1
            return In(left, self.term())
        if self.at("="):
            self.pos += 1
            return Eq(left, self.term())
        if isinstance(left, App):
            return Pred(left.head, left.args)
        self.fail({"in", "="})

    def term(self):
        name = self.ident()
        if self.at("("):
            self.pos += 1
            args = [self.term()]
            while self.at(","):
                self.pos += 1
                args.append(self.term())
            self.expect(")")
            return App(name, tuple(args))
        return Var(name)


def parse(text: str):
    """Parse one formula; raises :class:`ParseError` on bad input."""
    p = _Parser(text)
    f = p.formula()
    if p.tok.kind != "eof":
        p.fail({"end of input", "&", "|", "->", "<->"})
    return f


def parse_lines(text: str) -> list:
    """Parse a formula file: one formula per line, ``#`` starts a comment."""
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse(line))
        except ParseError as e:
            raise ParseError(str(e).split(": ", 1)[-1], n, e.column, e.expected) from None
    return out


# -------------------------------------------------------------- printer

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}
_OPS = {Iff: "<->", Implies: "->", Or: "|", And: "&"}


def _prec(f):
    if isinstance(f, BINARY):
        return _PREC[type(f)]
    return 10


def show(f) -> str:
    """Render a formula; quantifiers nested under connectives get parentheses."""
    if isinstance(f, In):
        return f"{f.left} in {f.right}"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, St):
        return f"st {f.term}"
    if isinstance(f, Pred):
        return f"{f.head}({','.join(str(a) for a in f.args)})"
    if isinstance(f, Quant):
        head = f.kind + (" st" if f.external else "") + (" fin" if f.finite else "")
        bound = f" in {f.bound}" if f.bound is not None else ""
        return f"{head} {f.var}{bound} . {show(f.body)}"
    if isinstance(f, Not):
        return "~ " + _operand(f.body, lambda g: isinstance(g, BINARY))
    p = _PREC[type(f)]
    if isinstance(f, Implies):
        lpar = lambda g: _prec(g) <= p
        rpar = lambda g: _prec(g) < p
    else:
        lpar = lambda g: _prec(g) < p
        rpar = lambda g: _prec(g) <= p
    return f"{_operand(f.left, lpar)} {_OPS[type(f)]} {_operand(f.right, rpar)}"


def _operand(g, needs_parens):
    s = show(g)
    if isinstance(g, Quant) or needs_parens(g):
        return f"({s})"
    return s


# `print` is the natural name for the operation but shadows the builtin
pretty = show
