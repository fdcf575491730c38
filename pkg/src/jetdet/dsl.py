"""Text format for problem descriptions.

A problem file is a sequence of statements terminated by ``;``.  Comments
run from ``#`` to the end of the line.  Declarations come first:

    vars t x;            # independent variables, in declaration order
    dep u v;             # dependent variables
    param a b c1;        # scalar parameters
    func V(1), g(5);     # opaque function symbols with arities

Equations, constraints and the other blocks follow:

    evolve u_t = (u^k * u_x)_x + f(u);
    hyper u_tt = u_xx + (a/t)*u_t;
    eq z_xx + z_y*z_xy - z_x*z_yy + 1 = 0;
    constraint x*u_t + t*u_x;
    field X1: x = 1, u = -u;
    ansatz u = V(x^2 - t^2);
    solution u = 1 / (exp(x + y) + x - t);
    box t = 0.1 .. 0.4, x = 2 .. 3;
    template twoaxis unknowns b1..b2;

Derivatives are written with an underscore suffix (``u_t``, ``u_xx``,
``z_xy``); the shorthand ``(E)_x`` takes a total x-derivative of any
expression.  ``^`` is right-associative and binds tighter than unary
minus.  Check directives drive the runner:

    check solve expect b1 = 1, b2 = -1;
    check verify with b1 = 2, b2 = -2;
    check holds (h)_t - cos(u)*h;
    check invariance;
    check involutive;   check commute;   check cross;
    check manifold u_x = -u*s, u_y = -u;
    check residual tol 1e-8 samples 100;
    check reduce case "gt-painleve2";
    check table "rd-t01";
    check qde;
    check flag "x/t system recorded, not verified";

``parse`` produces an AST with source positions, ``print_problem`` turns
it back into text, and ``build_problem`` resolves it against the symbolic
kernel.  parse(print_problem(parse(text))) equals parse(text).
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .symcore import (
    Expr,
    StructureError,
    apply_fn,
    expr_pow,
    opaque,
    param,
    var,
)
from .jetcalc import JetSpace, total_derivative

ELEM_FNS = ("sin", "cos", "tan", "exp", "ln", "sqrt")


class DslError(ValueError):
    """Parse or resolution failure, carrying a source position."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


# --------------------------------------------------------------------------
# Tokens.
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+|\d+\.\d+|\d+)
  | (?P<name>[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z]+)?)
  | (?P<dsuffix>_[A-Za-z]+)
  | (?P<string>"[^"\n]*")
  | (?P<dots>\.\.)
  | (?P<op>[-+*/^(),=:;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind, tok, line, pos - start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# --------------------------------------------------------------------------
# AST.  Source positions do not take part in equality so that the
# parse/print round trip compares structurally.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Pos:
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Num(Pos):
    text: str = ""

    @property
    def value(self) -> Fraction:
        return Fraction(self.text)


@dataclass(frozen=True)
class Name(Pos):
    name: str = ""


@dataclass(frozen=True)
class Call(Pos):
    fn: str = ""
    args: tuple = ()


@dataclass(frozen=True)
class Unary(Pos):
    a: object = None


@dataclass(frozen=True)
class Bin(Pos):
    op: str = ""
    a: object = None
    b: object = None


@dataclass(frozen=True)
class TotalD(Pos):
    a: object = None
    axes: str = ""


@dataclass(frozen=True)
class VarsDecl(Pos):
    names: tuple = ()


@dataclass(frozen=True)
class DepDecl(Pos):
    names: tuple = ()


@dataclass(frozen=True)
class ParamDecl(Pos):
    names: tuple = ()


@dataclass(frozen=True)
class FuncDecl(Pos):
    items: tuple = ()  # (name, arity)


@dataclass(frozen=True)
class Evolve(Pos):
    lhs: str = ""
    rhs: object = None


@dataclass(frozen=True)
class Hyper(Pos):
    lhs: str = ""
    rhs: object = None


@dataclass(frozen=True)
class Equation(Pos):
    lhs: object = None
    rhs: object = None


@dataclass(frozen=True)
class Constraint(Pos):
    expr: object = None


@dataclass(frozen=True)
class FieldDecl(Pos):
    name: str = ""
    comps: tuple = ()  # (coordinate name, expr)


@dataclass(frozen=True)
class AnsatzDecl(Pos):
    dep: str = ""
    expr: object = None


@dataclass(frozen=True)
class SolutionDecl(Pos):
    dep: str = ""
    expr: object = None


@dataclass(frozen=True)
class BoxDecl(Pos):
    ranges: tuple = ()  # (var, lo Num, hi Num)


@dataclass(frozen=True)
class Template(Pos):
    name: str = ""
    args: tuple = ()      # (key, int)
    unknowns: tuple = ()  # specs as written: "b1" or "b00..b22"


@dataclass(frozen=True)
class CheckSolve(Pos):
    expect: tuple = ()  # (name, expr); empty means just report


@dataclass(frozen=True)
class CheckVerify(Pos):
    withs: tuple = ()


@dataclass(frozen=True)
class CheckHolds(Pos):
    expr: object = None
    joint: bool = False


@dataclass(frozen=True)
class CheckInvariance(Pos):
    pass


@dataclass(frozen=True)
class CheckInvolutive(Pos):
    pass


@dataclass(frozen=True)
class CheckCommute(Pos):
    pass


@dataclass(frozen=True)
class CheckCross(Pos):
    pass


@dataclass(frozen=True)
class CheckManifold(Pos):
    items: tuple = ()  # (jet name, expr)


@dataclass(frozen=True)
class CheckResidual(Pos):
    tol: str = ""      # literal text, empty means default
    samples: str = ""


@dataclass(frozen=True)
class CheckReduce(Pos):
    case: str = ""


@dataclass(frozen=True)
class CheckTable(Pos):
    name: str = ""


@dataclass(frozen=True)
class CheckQde(Pos):
    pass


@dataclass(frozen=True)
class CheckFlag(Pos):
    note: str = ""


@dataclass(frozen=True)
class ProblemFile:
    statements: tuple = ()


# --------------------------------------------------------------------------
# Parser.
# --------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, msg: str, tok: Token | None = None):
        t = tok or self.peek()
        raise DslError(msg, t.line, t.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            got = repr(t.text) if t.text else "end of input"
            self.fail(f"expected {text!r}, got {got}")
        return self.next()

    def expect_name(self) -> Token:
        t = self.peek()
        if t.kind != "name":
            self.fail(f"expected a name, got {t.text!r}")
        return self.next()

    def expect_number(self) -> Token:
        t = self.peek()
        if t.kind != "number":
            self.fail(f"expected a number, got {t.text!r}")
        return self.next()

    def expect_string(self) -> str:
        t = self.peek()
        if t.kind != "string":
            self.fail(f"expected a quoted string, got {t.text!r}")
        return self.next().text[1:-1]

    # -- expressions --------------------------------------------------------

    def expr(self):
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next()
            e = Bin(op.line, op.col, op.text, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next()
            e = Bin(op.line, op.col, op.text, e, self.unary())
        return e

    def unary(self):
        t = self.peek()
        if t.text == "-":
            self.next()
            return Unary(t.line, t.col, self.unary())
        return self.power()

    def power(self):
        e = self.primary()
        if self.peek().text == "^":
            op = self.next()
            return Bin(op.line, op.col, "^", e, self.unary())
        return e

    def primary(self):
        t = self.peek()
        if t.kind == "number":
            self.next()
            return Num(t.line, t.col, t.text)
        if t.kind == "name":
            self.next()
            if self.peek().text == "(":
                self.next()
                args = [self.expr()]
                while self.peek().text == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                return Call(t.line, t.col, t.text, tuple(args))
            return Name(t.line, t.col, t.text)
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            nxt = self.peek()
            if nxt.kind == "dsuffix":
                self.next()
                return TotalD(t.line, t.col, e, nxt.text[1:])
            return e
        self.fail(f"expected an expression, got {t.text!r}" if t.text
                  else "expected an expression, got end of input")

    # -- statements ---------------------------------------------------------

    def names_until_semi(self) -> tuple:
        names = [self.expect_name().text]
        while self.peek().kind == "name":
            names.append(self.next().text)
        return tuple(names)

    def statement(self):
        t = self.peek()
        if t.kind != "name":
            self.fail(f"expected a statement, got {t.text!r}")
        kw = t.text
        handler = getattr(self, f"stmt_{kw}", None)
        if handler is None:
            self.fail(f"unknown statement {kw!r}")
        self.next()
        node = handler(t)
        self.expect(";")
        return node

    def stmt_vars(self, t):
        return VarsDecl(t.line, t.col, self.names_until_semi())

    def stmt_dep(self, t):
        return DepDecl(t.line, t.col, self.names_until_semi())

    def stmt_param(self, t):
        return ParamDecl(t.line, t.col, self.names_until_semi())

    def stmt_func(self, t):
        items = []
        while True:
            name = self.expect_name().text
            self.expect("(")
            arity = int(self.expect_number().text)
            self.expect(")")
            items.append((name, arity))
            if self.peek().text != ",":
                break
            self.next()
        return FuncDecl(t.line, t.col, tuple(items))

    def stmt_evolve(self, t):
        lhs = self.expect_name().text
        self.expect("=")
        return Evolve(t.line, t.col, lhs, self.expr())

    def stmt_hyper(self, t):
        lhs = self.expect_name().text
        self.expect("=")
        return Hyper(t.line, t.col, lhs, self.expr())

    def stmt_eq(self, t):
        lhs = self.expr()
        self.expect("=")
        return Equation(t.line, t.col, lhs, self.expr())

    def stmt_constraint(self, t):
        return Constraint(t.line, t.col, self.expr())

    def stmt_field(self, t):
        name = self.expect_name().text
        self.expect(":")
        comps = []
        while True:
            c = self.expect_name().text
            self.expect("=")
            comps.append((c, self.expr()))
            if self.peek().text != ",":
                break
            self.next()
        return FieldDecl(t.line, t.col, name, tuple(comps))

    def stmt_ansatz(self, t):
        dep = self.expect_name().text
        self.expect("=")
        return AnsatzDecl(t.line, t.col, dep, self.expr())

    def stmt_solution(self, t):
        dep = self.expect_name().text
        self.expect("=")
        return SolutionDecl(t.line, t.col, dep, self.expr())

    def stmt_box(self, t):
        ranges = []
        while True:
            v = self.expect_name().text
            self.expect("=")
            lo = self.signed_number()
            self.expect("..")
            hi = self.signed_number()
            ranges.append((v, lo, hi))
            if self.peek().text != ",":
                break
            self.next()
        return BoxDecl(t.line, t.col, tuple(ranges))

    def signed_number(self) -> Num:
        t = self.peek()
        if t.text == "-":
            self.next()
            n = self.expect_number()
            return Num(t.line, t.col, "-" + n.text)
        n = self.expect_number()
        return Num(n.line, n.col, n.text)

    def stmt_template(self, t):
        name = self.expect_name().text
        args = []
        if self.peek().text == "(":
            self.next()
            while True:
                k = self.expect_name().text
                self.expect("=")
                args.append((k, int(self.expect_number().text)))
                if self.peek().text != ",":
                    break
                self.next()
            self.expect(")")
        self.expect("unknowns")
        specs = []
        while True:
            n = self.expect_name().text
            if self.peek().kind == "dots":
                self.next()
                n = n + ".." + self.expect_name().text
            specs.append(n)
            if self.peek().kind == "name":
                continue
            break
        return Template(t.line, t.col, name, tuple(args), tuple(specs))

    def stmt_check(self, t):
        kind = self.expect_name().text
        if kind == "solve":
            expect = []
            if self.peek().text == "expect":
                self.next()
                while True:
                    n = self.expect_name().text
                    self.expect("=")
                    expect.append((n, self.expr()))
                    if self.peek().text != ",":
                        break
                    self.next()
            return CheckSolve(t.line, t.col, tuple(expect))
        if kind == "verify":
            withs = []
            if self.peek().text == "with":
                self.next()
                while True:
                    n = self.expect_name().text
                    self.expect("=")
                    withs.append((n, self.expr()))
                    if self.peek().text != ",":
                        break
                    self.next()
            return CheckVerify(t.line, t.col, tuple(withs))
        if kind == "holds":
            joint = False
            if self.peek().text == "joint":
                self.next()
                joint = True
            return CheckHolds(t.line, t.col, self.expr(), joint)
        if kind == "invariance":
            return CheckInvariance(t.line, t.col)
        if kind == "involutive":
            return CheckInvolutive(t.line, t.col)
        if kind == "commute":
            return CheckCommute(t.line, t.col)
        if kind == "cross":
            return CheckCross(t.line, t.col)
        if kind == "manifold":
            items = []
            while True:
                n = self.expect_name().text
                self.expect("=")
                items.append((n, self.expr()))
                if self.peek().text != ",":
                    break
                self.next()
            return CheckManifold(t.line, t.col, tuple(items))
        if kind == "residual":
            tol = samples = ""
            while self.peek().text in ("tol", "samples"):
                w = self.next().text
                n = self.expect_number().text
                if w == "tol":
                    tol = n
                else:
                    samples = n
            return CheckResidual(t.line, t.col, tol, samples)
        if kind == "reduce":
            self.expect("case")
            return CheckReduce(t.line, t.col, self.expect_string())
        if kind == "table":
            return CheckTable(t.line, t.col, self.expect_string())
        if kind == "qde":
            return CheckQde(t.line, t.col)
        if kind == "flag":
            return CheckFlag(t.line, t.col, self.expect_string())
        self.fail(f"unknown check directive {kind!r}", t)


def parse(text: str) -> ProblemFile:
    p = _Parser(tokenize(text))
    stmts = []
    while p.peek().kind != "eof":
        stmts.append(p.statement())
    return ProblemFile(tuple(stmts))


# --------------------------------------------------------------------------
# Printer.
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def print_expr(e, min_prec: int = 0) -> str:
    """Render an expression node, adding parentheses exactly where the
    grammar requires them for the same tree to come back from parse."""
    if isinstance(e, Num):
        return e.text
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Call):
        return e.fn + "(" + ", ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Unary):
        s = "-" + print_expr(e.a, 3)
        return f"({s})" if min_prec > 3 else s
    if isinstance(e, TotalD):
        return f"({print_expr(e.a)})_{e.axes}"
    if isinstance(e, Bin):
        p = _PREC[e.op]
        if e.op == "^":
            # the base of ^ is a primary, the exponent a unary
            s = print_expr(e.a, 5) + "^" + print_expr(e.b, 3)
        else:
            s = f"{print_expr(e.a, p)} {e.op} {print_expr(e.b, p + 1)}"
        return f"({s})" if min_prec > p else s
    raise TypeError(f"not an expression node: {e!r}")


def _kv(items, sep=" = "):
    return ", ".join(f"{k}{sep}{print_expr(v)}" for k, v in items)


def print_statement(s) -> str:
    if isinstance(s, VarsDecl):
        return "vars " + " ".join(s.names) + ";"
    if isinstance(s, DepDecl):
        return "dep " + " ".join(s.names) + ";"
    if isinstance(s, ParamDecl):
        return "param " + " ".join(s.names) + ";"
    if isinstance(s, FuncDecl):
        return "func " + ", ".join(f"{n}({a})" for n, a in s.items) + ";"
    if isinstance(s, Evolve):
        return f"evolve {s.lhs} = {print_expr(s.rhs)};"
    if isinstance(s, Hyper):
        return f"hyper {s.lhs} = {print_expr(s.rhs)};"
    if isinstance(s, Equation):
        return f"eq {print_expr(s.lhs)} = {print_expr(s.rhs)};"
    if isinstance(s, Constraint):
        return f"constraint {print_expr(s.expr)};"
    if isinstance(s, FieldDecl):
        return f"field {s.name}: {_kv(s.comps)};"
    if isinstance(s, AnsatzDecl):
        return f"ansatz {s.dep} = {print_expr(s.expr)};"
    if isinstance(s, SolutionDecl):
        return f"solution {s.dep} = {print_expr(s.expr)};"
    if isinstance(s, BoxDecl):
        parts = ", ".join(f"{v} = {lo.text} .. {hi.text}" for v, lo, hi in s.ranges)
        return f"box {parts};"
    if isinstance(s, Template):
        args = "(" + ", ".join(f"{k}={v}" for k, v in s.args) + ")" if s.args else ""
        return f"template {s.name}{args} unknowns " + " ".join(s.unknowns) + ";"
    if isinstance(s, CheckSolve):
        tail = " expect " + _kv(s.expect) if s.expect else ""
        return f"check solve{tail};"
    if isinstance(s, CheckVerify):
        tail = " with " + _kv(s.withs) if s.withs else ""
        return f"check verify{tail};"
    if isinstance(s, CheckHolds):
        kw = "holds joint" if s.joint else "holds"
        return f"check {kw} {print_expr(s.expr)};"
    if isinstance(s, CheckInvariance):
        return "check invariance;"
    if isinstance(s, CheckInvolutive):
        return "check involutive;"
    if isinstance(s, CheckCommute):
        return "check commute;"
    if isinstance(s, CheckCross):
        return "check cross;"
    if isinstance(s, CheckManifold):
        return f"check manifold {_kv(s.items)};"
    if isinstance(s, CheckResidual):
        parts = "check residual"
        if s.tol:
            parts += f" tol {s.tol}"
        if s.samples:
            parts += f" samples {s.samples}"
        return parts + ";"
    if isinstance(s, CheckReduce):
        return f'check reduce case "{s.case}";'
    if isinstance(s, CheckTable):
        return f'check table "{s.name}";'
    if isinstance(s, CheckQde):
        return "check qde;"
    if isinstance(s, CheckFlag):
        return f'check flag "{s.note}";'
    raise TypeError(f"not a statement node: {s!r}")


def print_problem(pf: ProblemFile) -> str:
    return "\n".join(print_statement(s) for s in pf.statements) + "\n"


# --------------------------------------------------------------------------
# Resolution against the kernel.
# --------------------------------------------------------------------------

def expand_unknowns(specs: tuple) -> list[str]:
    """Expand range specs: ``b1..b16`` counts through the integers, while
    equal-width multi-digit endpoints like ``b00..b22`` run every digit
    through its own range (the matrix naming of the evolution template)."""
    out = []
    for spec in specs:
        if ".." not in spec:
            out.append(spec)
            continue
        a, b = spec.split("..")
        ma = re.fullmatch(r"([A-Za-z]+)(\d+)", a)
        mb = re.fullmatch(r"([A-Za-z]+)(\d+)", b)
        if not ma or not mb or ma.group(1) != mb.group(1):
            raise StructureError(f"bad unknown range {spec!r}")
        prefix, lo, hi = ma.group(1), ma.group(2), mb.group(2)
        if len(lo) == len(hi) and len(lo) > 1:
            digits = [range(int(x), int(y) + 1) for x, y in zip(lo, hi)]
            idx = [[]]
            for rng in digits:
                idx = [v + [d] for v in idx for d in rng]
            out.extend(prefix + "".join(str(d) for d in v) for v in idx)
        else:
            out.extend(f"{prefix}{i}" for i in range(int(lo), int(hi) + 1))
    return out


@dataclass
class Problem:
    """A resolved problem file: kernel objects plus the check directives."""

    space: JetSpace
    params: dict
    funcs: dict
    equations: list        # (leader jet name, Expr rhs) resolved statements
    eq_kind: str           # "evolve" | "hyper" | "eq" | ""
    raw_equations: list    # Expr values equal to zero (for eq statements)
    constraints: list
    fields: dict
    ansatz: dict
    solution: dict
    box: dict
    template: Template | None
    unknowns: list
    checks: list
    source: ProblemFile


class _Resolver:
    def __init__(self, pf: ProblemFile):
        self.pf = pf
        self.vars: list[str] = []
        self.deps: list[str] = []
        self.params: dict[str, Expr] = {}
        self.funcs: dict[str, int] = {}
        self.time: str | None = None
        self.space: JetSpace | None = None

    def fail(self, msg: str, node):
        raise DslError(msg, node.line, node.col)

    def suggest(self, name: str) -> str:
        pool = self.vars + self.deps + list(self.params) + list(self.funcs) \
            + list(ELEM_FNS)
        close = difflib.get_close_matches(name, pool, n=1)
        return f"; did you mean {close[0]!r}?" if close else ""

    def jet_of(self, text: str, node) -> Expr:
        head, _, suffix = text.partition("_")
        if head not in self.deps:
            self.fail(f"undeclared dependent variable {head!r}"
                      + self.suggest(head), node)
        torder = 0
        mi = [0] * len(self.space.axes)
        for ch in suffix:
            if ch == self.time:
                torder += 1
            elif ch in self.space.axes:
                mi[self.space.axes.index(ch)] += 1
            else:
                self.fail(f"{ch!r} in {text!r} is not an independent variable",
                          node)
        return self.space.jet(head, torder, tuple(mi))

    def name_expr(self, node: Name) -> Expr:
        n = node.name
        if "_" in n:
            return self.jet_of(n, node)
        if n in self.deps:
            return self.space.jet(n)
        if n in self.vars:
            return var(n)
        if n in self.params:
            return self.params[n]
        self.fail(f"undeclared symbol {n!r}" + self.suggest(n), node)

    def expr(self, e) -> Expr:
        if isinstance(e, Num):
            return Expr.const(e.value)
        if isinstance(e, Name):
            return self.name_expr(e)
        if isinstance(e, Unary):
            return -self.expr(e.a)
        if isinstance(e, TotalD):
            out = self.expr(e.a)
            for ch in e.axes:
                if ch != self.time and ch not in self.space.axes:
                    self.fail(f"{ch!r} is not an independent variable", e)
                out = total_derivative(out, self.space, ch)
            return out
        if isinstance(e, Call):
            args = tuple(self.expr(a) for a in e.args)
            if e.fn in ELEM_FNS:
                if len(args) != 1:
                    self.fail(f"{e.fn} takes one argument", e)
                return apply_fn(e.fn, args[0])
            if e.fn in self.funcs:
                if len(args) != self.funcs[e.fn]:
                    self.fail(f"{e.fn} takes {self.funcs[e.fn]} argument(s),"
                              f" got {len(args)}", e)
                return opaque(e.fn, args)
            self.fail(f"undeclared function {e.fn!r}" + self.suggest(e.fn), e)
        if isinstance(e, Bin):
            a, b = self.expr(e.a), self.expr(e.b)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                if b.is_zero():
                    self.fail("division by zero", e)
                return a / b
            if e.op == "^":
                k = b.as_fraction()
                if k is None:
                    self.fail("exponent must be a rational constant", e)
                return expr_pow(a, k)
        raise TypeError(f"not an expression node: {e!r}")

    def run(self) -> Problem:
        pf = self.pf
        for s in pf.statements:
            if isinstance(s, VarsDecl):
                self.vars.extend(s.names)
            elif isinstance(s, DepDecl):
                self.deps.extend(s.names)
            elif isinstance(s, ParamDecl):
                for n in s.names:
                    self.params[n] = param(n)
            elif isinstance(s, FuncDecl):
                for n, a in s.items:
                    self.funcs[n] = a
        seen = self.vars + self.deps + list(self.params) + list(self.funcs)
        if len(set(seen)) != len(seen):
            dup = next(n for n in seen if seen.count(n) > 1)
            raise DslError(f"{dup!r} declared more than once", 1, 1)

        # the variable appearing as a pure time suffix of an evolve/hyper
        # left-hand side is the time coordinate; everything else is an axis
        for s in pf.statements:
            if isinstance(s, (Evolve, Hyper)):
                _, _, suffix = s.lhs.partition("_")
                if suffix and len(set(suffix)) == 1 and suffix[0] in self.vars:
                    self.time = suffix[0]
                break
        axes = tuple(v for v in self.vars if v != self.time)
        self.space = JetSpace(axes, tuple(self.deps), time=self.time)

        prob = Problem(
            space=self.space, params=self.params, funcs=self.funcs,
            equations=[], eq_kind="", raw_equations=[], constraints=[],
            fields={}, ansatz={}, solution={}, box={}, template=None,
            unknowns=[], checks=[], source=pf,
        )
        for s in pf.statements:
            if isinstance(s, Evolve):
                dep = s.lhs.partition("_")[0]
                prob.equations.append((dep, self.expr(s.rhs)))
                prob.eq_kind = prob.eq_kind or "evolve"
            elif isinstance(s, Hyper):
                dep = s.lhs.partition("_")[0]
                prob.equations.append((dep, self.expr(s.rhs)))
                prob.eq_kind = "hyper"
            elif isinstance(s, Equation):
                prob.raw_equations.append(self.expr(s.lhs) - self.expr(s.rhs))
                prob.eq_kind = prob.eq_kind or "eq"
            elif isinstance(s, Constraint):
                prob.constraints.append(self.expr(s.expr))
            elif isinstance(s, FieldDecl):
                comps = {}
                for cname, ce in s.comps:
                    if cname not in self.vars and cname not in self.deps:
                        self.fail(f"unknown field coordinate {cname!r}", s)
                    comps[cname] = self.expr(ce)
                prob.fields[s.name] = comps
            elif isinstance(s, AnsatzDecl):
                if s.dep not in self.deps:
                    self.fail(f"ansatz for undeclared variable {s.dep!r}", s)
                prob.ansatz[s.dep] = self.expr(s.expr)
            elif isinstance(s, SolutionDecl):
                if s.dep not in self.deps:
                    self.fail(f"solution for undeclared variable {s.dep!r}", s)
                prob.solution[s.dep] = self.expr(s.expr)
            elif isinstance(s, BoxDecl):
                for v, lo, hi in s.ranges:
                    prob.box[v] = (float(lo.value), float(hi.value))
            elif isinstance(s, Template):
                prob.template = s
                prob.unknowns = expand_unknowns(s.unknowns)
                for n in prob.unknowns:
                    if n not in self.params:
                        self.params[n] = param(n)
            elif isinstance(s, (VarsDecl, DepDecl, ParamDecl, FuncDecl)):
                pass
            else:
                prob.checks.append(self.resolve_check(s))
        return prob

    def resolve_check(self, s):
        """Rebuild a check directive with its expressions resolved to
        kernel objects; directives without expressions pass through."""
        if isinstance(s, CheckSolve):
            return CheckSolve(s.line, s.col,
                              tuple((n, self.expr(e)) for n, e in s.expect))
        if isinstance(s, CheckVerify):
            for n, _ in s.withs:
                if n not in self.params:
                    self.fail(f"undeclared constant {n!r}", s)
            return CheckVerify(s.line, s.col,
                               tuple((n, self.expr(e)) for n, e in s.withs))
        if isinstance(s, CheckHolds):
            return CheckHolds(s.line, s.col, self.expr(s.expr), s.joint)
        if isinstance(s, CheckManifold):
            items = tuple((self.jet_of(n, s), self.expr(e)) for n, e in s.items)
            return CheckManifold(s.line, s.col, items)
        return s


def build_problem(pf: ProblemFile) -> Problem:
    return _Resolver(pf).run()


def load_problem(text: str) -> Problem:
    return build_problem(parse(text))
