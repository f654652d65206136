"""A small language for parametrized hypersurfaces.

A program declares the chart dimension, optional metadata, optional
one-variable helper functions, and the ``n+1`` component expressions::

    n = 3;                                  # chart dimension
    name = "W1";                            # optional label
    domain u1 = [0.5, 2], u2 = [-0.5, 0.5]; # optional sampling box
    let g(s) = (cos(s) + sin(s))^(1/4);     # closed-form helper
    let G(s) = integral(g(s)^(-3), 0.5);    # G(t) = int_{0.5}^t g(s)^(-3) ds
    let k(s) = linode(4/s, -2/s^2, 1, 1, 0);# k'' = p k' + q k, k(1)=1, k'(1)=0
    F = (G(u1), g(u1)*u2, g(u1)*u3, g(u1));

Expressions use numbers, ``pi``, the chart variables ``u1..un``, ``+ - * /``,
``^`` with a constant exponent, and ``exp log sin cos sqrt``.  ``^`` binds
tighter than unary minus and is right-associative.  Integer exponents are
plain powers; any other exponent requires a positive base.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import EvaluationError, ParseError, SemanticError
from .jets import Jet, compose, jet_apply, jet_space, variables

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
PROFILE_KINDS = ("integral", "linode")


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class ProfileDef:
    """A named function of one variable usable inside component expressions.

    ``kind`` is ``"expr"`` (``body`` holds the expression), ``"integral"``
    (``body`` is the integrand, ``params = (base,)``) or ``"linode"``
    (``body``/``extra`` are p and q, ``params = (s0, k0, dk0)``).
    """

    name: str
    param: str
    kind: str
    body: Node
    extra: Node | None = None
    params: tuple[float, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)


@dataclass(frozen=True)
class ImmersionSpec:
    chart_dim: int
    components: tuple[Node, ...]
    domain: tuple[tuple[float, float], ...] | None = None
    name: str = "spec"
    profiles: tuple[ProfileDef, ...] = ()

    @property
    def ambient_dim(self) -> int:
        return self.chart_dim + 1

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(f"u{i + 1}" for i in range(self.chart_dim))

    @property
    def profile_table(self) -> dict[str, ProfileDef]:
        return {p.name: p for p in self.profiles}

    def box(self) -> np.ndarray:
        """Sampling box as an (n, 2) array; defaults to [-1/2, 1/2] per variable."""
        if self.domain is None:
            return np.tile([-0.5, 0.5], (self.chart_dim, 1)).astype(float)
        return np.array(self.domain, dtype=float)


# --------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"""(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>\#[^\n]*)
    |(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    |(?P<name>[A-Za-z_][A-Za-z_0-9]*)
    |(?P<str>"[^"\n]*")
    |(?P<op>[-+*/^(),;=\[\]])""",
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.n: int | None = None
        self.profiles: dict[str, ProfileDef] = {}
        self.scope: set[str] = set()

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None, semantic: bool = False):
        tok = tok or self.tok
        cls = SemanticError if semantic else ParseError
        return cls(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        tok = self.tok
        self.i += 1
        return tok

    # program ------------------------------------------------------------
    def program(self) -> ImmersionSpec:
        self.expect("n")
        self.expect("=")
        tok = self.tok
        if tok.kind != "num" or not re.fullmatch(r"\d+", tok.text):
            raise self.error("chart dimension must be a positive integer")
        self.n = int(tok.text)
        if self.n < 1:
            raise self.error("chart dimension must be a positive integer", tok, semantic=True)
        self.i += 1
        self.expect(";")
        name, domain = "spec", None
        while True:
            if self.accept("name"):
                self.expect("=")
                if self.tok.kind != "str":
                    raise self.error("name must be a quoted string")
                name = self.tok.text[1:-1]
                self.i += 1
                self.expect(";")
            elif self.tok.text == "domain":
                domain = self.domain()
            elif self.tok.text == "let":
                self.let()
            else:
                break
        start = self.tok
        self.expect("F")
        self.expect("=")
        self.expect("(")
        self.scope = set(f"u{i + 1}" for i in range(self.n))
        comps = [self.expr()]
        while self.accept(","):
            comps.append(self.expr())
        self.expect(")")
        self.accept(";")
        if self.tok.kind != "eof":
            raise self.error(f"unexpected '{self.tok.text}' after component list")
        if len(comps) != self.n + 1:
            raise self.error(
                f"ambient dimension must be n+1 = {self.n + 1}, got {len(comps)} components",
                start, semantic=True)
        return ImmersionSpec(self.n, tuple(comps), domain, name, tuple(self.profiles.values()))

    def constant(self) -> float:
        tok = self.tok
        saved, self.scope = self.scope, set()
        node = self.expr()
        self.scope = saved
        try:
            return evaluate_float(node, {}, {})
        except (EvaluationError, ZeroDivisionError, ValueError) as exc:
            raise self.error(f"cannot evaluate constant: {exc}", tok, semantic=True)

    def domain(self) -> tuple[tuple[float, float], ...]:
        self.expect("domain")
        box = [(-0.5, 0.5)] * self.n
        while True:
            tok = self.tok
            m = re.fullmatch(r"u(\d+)", tok.text)
            if not m or not 1 <= int(m.group(1)) <= self.n:
                raise self.error(f"unknown chart variable '{tok.text}'", semantic=bool(m))
            self.i += 1
            self.expect("=")
            self.expect("[")
            lo = self.constant()
            self.expect(",")
            hi = self.constant()
            self.expect("]")
            if not lo < hi:
                raise self.error("empty domain interval", tok, semantic=True)
            box[int(m.group(1)) - 1] = (lo, hi)
            if not self.accept(","):
                break
        self.expect(";")
        return tuple(box)

    def let(self):
        self.expect("let")
        tok = self.tok
        if tok.kind != "name" or tok.text in FUNCTIONS + PROFILE_KINDS or re.fullmatch(r"u\d+", tok.text):
            raise self.error(f"invalid helper name '{tok.text}'")
        if tok.text in self.profiles:
            raise self.error(f"helper '{tok.text}' defined twice", semantic=True)
        name = tok.text
        self.i += 1
        self.expect("(")
        ptok = self.tok
        if ptok.kind != "name" or ptok.text in FUNCTIONS or ptok.text in self.profiles:
            raise self.error("helper parameter must be a fresh name")
        param = ptok.text
        self.i += 1
        self.expect(")")
        self.expect("=")
        self.scope = {param}
        if self.tok.text in PROFILE_KINDS and self.toks[self.i + 1].text == "(":
            kind = self.tok.text
            self.i += 2
            body = self.expr()
            extra, params = None, []
            if kind == "integral":
                self.expect(",")
                params.append(self.constant())
            else:
                self.expect(",")
                extra = self.expr()
                for _ in range(3):
                    self.expect(",")
                    params.append(self.constant())
            self.expect(")")
            pdef = ProfileDef(name, param, kind, body, extra, tuple(params))
        else:
            pdef = ProfileDef(name, param, "expr", self.expr())
        self.expect(";")
        self.profiles[name] = pdef

    # expressions --------------------------------------------------------
    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.text == "^":
            tok = self.tok
            self.i += 1
            saved, self.scope = self.scope, set()
            try:
                exponent = self.unary()
            except SemanticError as exc:
                raise self.error(f"exponent must be constant ({exc})", tok, semantic=True)
            finally:
                self.scope = saved
            return Pow(base, exponent)
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if self.tok.text == "(":
                if tok.text not in FUNCTIONS and tok.text not in self.profiles:
                    raise self.error(f"unknown function '{tok.text}'", tok, semantic=True)
                self.i += 1
                arg = self.expr()
                if self.tok.text == ",":
                    raise self.error(f"'{tok.text}' takes exactly one argument", semantic=True)
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text == "pi":
                return Num(math.pi)
            if tok.text in FUNCTIONS or tok.text in self.profiles:
                raise self.error(f"function '{tok.text}' used without argument", tok, semantic=True)
            if tok.text not in self.scope:
                raise self.error(f"unbound variable '{tok.text}'", tok, semantic=True)
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.error(f"unexpected '{found}'")


def parse_immersion(text: str) -> ImmersionSpec:
    """Parse DSL text into a validated :class:`ImmersionSpec`."""
    return _Parser(text).program()


def parse_expression(text: str, variables: Sequence[str] = ()) -> Node:
    p = _Parser(text)
    p.scope = set(variables)
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected '{p.tok.text}'")
    return node


# --------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def format_number(x: float) -> str:
    if x == math.pi:
        return "pi"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def to_text(node: Node) -> str:
    """Render an expression with the minimal parentheses that preserve its tree."""
    if isinstance(node, Num):
        s = format_number(abs(node.value))
        return f"(-{s})" if node.value < 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if _prec(node.base) < 5 or (isinstance(node.base, Num) and node.base.value < 0):
            base = f"({base})"
        exp = to_text(node.exponent)
        if _prec(node.exponent) < 3:
            exp = f"({exp})"
        return f"{base}^{exp}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def spec_to_text(spec: ImmersionSpec) -> str:
    lines = [f"n = {spec.chart_dim};", f'name = "{spec.name}";']
    if spec.domain is not None:
        parts = [f"u{i + 1} = [{format_number(lo)}, {format_number(hi)}]"
                 for i, (lo, hi) in enumerate(spec.domain)]
        lines.append("domain " + ", ".join(parts) + ";")
    for p in spec.profiles:
        head = f"let {p.name}({p.param}) = "
        if p.kind == "expr":
            lines.append(head + to_text(p.body) + ";")
        elif p.kind == "integral":
            lines.append(head + f"integral({to_text(p.body)}, {format_number(p.params[0])});")
        else:
            nums = ", ".join(format_number(v) for v in p.params)
            lines.append(head + f"linode({to_text(p.body)}, {to_text(p.extra)}, {nums});")
    comps = ",\n     ".join(to_text(c) for c in spec.components)
    lines.append(f"F = ({comps});")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# evaluation

def _float_pow(base: float, exponent: float) -> float:
    if float(exponent).is_integer():
        if base == 0 and exponent < 0:
            raise EvaluationError("negative power of zero")
        return base ** int(exponent)
    if base <= 0:
        raise EvaluationError(f"non-integer power {exponent} of non-positive base")
    return math.exp(exponent * math.log(base))


_FLOAT_FUNCS = {"exp": math.exp, "sin": math.sin, "cos": math.cos}


def evaluate_float(node: Node, env: Mapping[str, float], profiles: Mapping[str, ProfileDef]) -> float:
    """Plain floating-point evaluation."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate_float(node.arg, env, profiles)
    if isinstance(node, BinOp):
        a = evaluate_float(node.left, env, profiles)
        b = evaluate_float(node.right, env, profiles)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise EvaluationError("division by zero", to_text(node))
        return a / b
    if isinstance(node, Pow):
        exp = evaluate_float(node.exponent, {}, profiles)
        try:
            return _float_pow(evaluate_float(node.base, env, profiles), exp)
        except EvaluationError as exc:
            raise EvaluationError(str(exc), to_text(node)) from None
    x = evaluate_float(node.arg, env, profiles)
    if node.func in _FLOAT_FUNCS:
        return _FLOAT_FUNCS[node.func](x)
    if node.func == "log":
        if x <= 0:
            raise EvaluationError("log of a non-positive value", to_text(node))
        return math.log(x)
    if node.func == "sqrt":
        if x <= 0:
            raise EvaluationError("sqrt of a non-positive value", to_text(node))
        return math.sqrt(x)
    return float(profile_taylor(profiles[node.func], x, 0, profiles)[0])


def evaluate_jet(node: Node, env: Mapping[str, Jet], profiles: Mapping[str, ProfileDef]) -> Jet:
    """Evaluate ``node`` over jets; ``env`` maps variable names to jets."""
    if isinstance(node, Num):
        space = next(iter(env.values())).space
        return Jet.constant(space, node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate_jet(node.arg, env, profiles)
    if isinstance(node, BinOp):
        a = evaluate_jet(node.left, env, profiles)
        b = evaluate_jet(node.right, env, profiles)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        try:
            return a / b
        except EvaluationError:
            raise EvaluationError("division by zero", to_text(node)) from None
    try:
        if isinstance(node, Pow):
            exp = evaluate_float(node.exponent, {}, profiles)
            base = evaluate_jet(node.base, env, profiles)
            if float(exp).is_integer():
                return base ** int(exp)
            return jet_apply("exp", exp * jet_apply("log", base))
        arg = evaluate_jet(node.arg, env, profiles)
        if node.func in FUNCTIONS:
            return jet_apply(node.func, arg)
        pdef = profiles[node.func]
        return compose(arg, profile_taylor(pdef, arg.value, arg.order, profiles))
    except EvaluationError as exc:
        if exc.subexpression:
            raise
        raise EvaluationError(str(exc), to_text(node)) from None


def eval_jet(spec: ImmersionSpec, point: Sequence[float], order: int) -> Jet:
    """Taylor expansions of all components about ``point``, shape ``(n+1,)``."""
    point = np.asarray(point, dtype=float)
    if point.shape != (spec.chart_dim,):
        raise SemanticError(f"chart point must have {spec.chart_dim} coordinates, got {point.shape}")
    space = jet_space(spec.chart_dim, order)
    env = dict(zip(spec.variables, variables(space, point)))
    table = spec.profile_table
    return Jet.stack([evaluate_jet(c, env, table) for c in spec.components])


def eval_point(spec: ImmersionSpec, point: Sequence[float]) -> np.ndarray:
    env = dict(zip(spec.variables, map(float, point)))
    table = spec.profile_table
    return np.array([evaluate_float(c, env, table) for c in spec.components])


# --------------------------------------------------------------------------
# helper functions of one variable

def _univariate(pdef: ProfileDef, node: Node, t0: float, order: int,
                profiles: Mapping[str, ProfileDef]) -> np.ndarray:
    space = jet_space(1, order)
    return evaluate_jet(node, {pdef.param: Jet.variable(space, 0, t0)}, profiles).coeffs


def profile_taylor(pdef: ProfileDef, t0: float, order: int,
                   profiles: Mapping[str, ProfileDef]) -> np.ndarray:
    """Taylor coefficients of a helper function about ``t0`` up to ``order``."""
    key = (float(t0), order)
    if key in pdef._cache:
        return pdef._cache[key]
    if pdef.kind == "expr":
        out = _univariate(pdef, pdef.body, t0, order, profiles)
    elif pdef.kind == "integral":
        out = _integral_taylor(pdef, t0, order, profiles)
    else:
        out = _linode_taylor(pdef, t0, order, profiles)
    if len(pdef._cache) > 4096:
        pdef._cache.clear()
    pdef._cache[key] = out
    return out


def _integral_taylor(pdef, t0, order, profiles):
    from scipy.integrate import quad

    base = pdef.params[0]
    f = lambda s: evaluate_float(pdef.body, {pdef.param: s}, profiles)
    value, _ = quad(f, base, t0, epsabs=1e-13, epsrel=1e-13, limit=200)
    out = np.zeros(order + 1)
    out[0] = value
    if order:
        g = _univariate(pdef, pdef.body, t0, order - 1, profiles)
        out[1:] = g / np.arange(1, order + 1)
    return out


def _linode_taylor(pdef, t0, order, profiles):
    from scipy.integrate import solve_ivp

    s0, k0, dk0 = pdef.params
    p = lambda s: evaluate_float(pdef.body, {pdef.param: s}, profiles)
    q = lambda s: evaluate_float(pdef.extra, {pdef.param: s}, profiles)
    if t0 == s0:
        y = np.array([k0, dk0])
    else:
        sol = solve_ivp(lambda s, y: [y[1], p(s) * y[1] + q(s) * y[0]], (s0, t0), [k0, dk0],
                        method="DOP853", rtol=1e-13, atol=1e-15)
        if not sol.success:
            raise EvaluationError(f"ODE integration failed: {sol.message}", pdef.name)
        y = sol.y[:, -1]
    out = np.zeros(order + 1)
    out[0] = y[0]
    if order >= 1:
        out[1] = y[1]
    if order >= 2:
        pc = _univariate(pdef, pdef.body, t0, order - 2, profiles)
        qc = _univariate(pdef, pdef.extra, t0, order - 2, profiles)
        for j in range(order - 1):
            acc = sum(pc[i] * (j - i + 1) * out[j - i + 1] + qc[i] * out[j - i] for i in range(j + 1))
            out[j + 2] = acc / ((j + 2) * (j + 1))
    return out


# --------------------------------------------------------------------------
# transformations

def _substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(_substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, mapping), _substitute(node.right, mapping))
    if isinstance(node, Pow):
        return Pow(_substitute(node.base, mapping), node.exponent)
    return Call(node.func, _substitute(node.arg, mapping))


def _num(x: float) -> Node:
    return Neg(Num(-x)) if x < 0 else Num(x)


def linear_form(coeffs: Sequence[float], terms: Sequence[Node], offset: float = 0.0) -> Node:
    node: Node | None = None
    for c, t in zip(coeffs, terms):
        if c == 0:
            continue
        piece = BinOp("*", Num(abs(c)), t)
        if node is None:
            node = Neg(piece) if c < 0 else piece
        else:
            node = BinOp("-" if c < 0 else "+", node, piece)
    if node is None:
        return _num(offset)
    if offset:
        node = BinOp("-" if offset < 0 else "+", node, Num(abs(offset)))
    return node


def reparametrize(spec: ImmersionSpec, A, b) -> ImmersionSpec:
    """Precompose with the affine chart change ``u = A v + b``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    names = spec.variables
    vars_ = [Var(v) for v in names]
    mapping = {names[i]: linear_form(A[i], vars_, b[i]) for i in range(spec.chart_dim)}
    comps = tuple(_substitute(c, mapping) for c in spec.components)
    return ImmersionSpec(spec.chart_dim, comps, None, spec.name + "+chart", spec.profiles)


def ambient_map(spec: ImmersionSpec, B, d) -> ImmersionSpec:
    """Postcompose with the affine map ``x -> B x + d`` of the ambient space."""
    B = np.asarray(B, dtype=float)
    d = np.asarray(d, dtype=float)
    comps = tuple(linear_form(B[a], spec.components, d[a]) for a in range(spec.ambient_dim))
    return ImmersionSpec(spec.chart_dim, comps, spec.domain, spec.name + "+ambient", spec.profiles)


def walk(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, (Neg, Call)):
        yield from walk(node.arg)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Pow):
        yield from walk(node.base)
        yield from walk(node.exponent)
