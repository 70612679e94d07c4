"""Warp-profile expressions with exact symbolic derivatives.

Grammar (whitespace ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom (("^" | "**") ["-"] INTEGER)?
    atom    := NUMBER | "x" | "s" | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "exp" | "cosh" | "sinh"

``x`` is the base coordinate; ``s`` is an optional family parameter that is
bound to a number with :meth:`ProfileExpr.bind`.  Derivatives are always
taken with respect to ``x``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

FUNCTIONS = ("exp", "cosh", "sinh")
VARIABLES = ("x", "s")

# grid used for the nonzero certificate of division nodes
CERT_GRID = 1001


class ProfileError(ValueError):
    """Base class for profile construction problems."""


class ProfileSyntaxError(ProfileError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ProfileError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DivisionCertificateError(ProfileError):
    """A denominator could not be shown nonzero on the window."""


class ProfileDomainError(ArithmeticError):
    """Evaluation hit a zero denominator or produced a non-finite value."""


# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True)
class Node:
    precedence = 100

    def children(self) -> Tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def __str__(self):
        v = float(self.value)
        if v.is_integer() and abs(v) < 1e15:
            text = str(int(v))
        else:
            text = repr(v)
        return f"({text})" if v < 0 or text.startswith("-") else text


@dataclass(frozen=True)
class Var(Node):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    precedence = 3

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"-{_wrap(self.arg, self.precedence + 1)}"


@dataclass(frozen=True)
class BinOp(Node):
    left: Node
    right: Node
    symbol = "?"

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        # left-associative: the right operand needs parentheses on ties
        return (f"{_wrap(self.left, self.precedence)}{self.symbol}"
                f"{_wrap(self.right, self.precedence + 1)}")


class Add(BinOp):
    symbol = "+"
    precedence = 1


class Sub(BinOp):
    symbol = "-"
    precedence = 1


class Mul(BinOp):
    symbol = "*"
    precedence = 2


class Div(BinOp):
    symbol = "/"
    precedence = 2


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    precedence = 4

    def children(self):
        return (self.base,)

    def __str__(self):
        exp = str(self.exponent) if self.exponent >= 0 else f"-{-self.exponent}"
        return f"{_wrap(self.base, self.precedence + 1)}^{exp}"


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.name}({self.arg})"


def _wrap(node: Node, min_precedence: int) -> str:
    text = str(node)
    return f"({text})" if node.precedence < min_precedence else text


# ---------------------------------------------------------------------------
# simplifying constructors used by differentiation

ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(node: Node, value: Optional[float] = None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return Sub(a, b)


def neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def power(a: Node, n: int) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a) and n > 0:
        return Const(a.value ** n)
    return Pow(a, n)


def differentiate(node: Node) -> Node:
    """Exact derivative of ``node`` with respect to ``x``."""
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == "x" else ZERO
    if isinstance(node, Neg):
        return neg(differentiate(node.arg))
    if isinstance(node, Add):
        return add(differentiate(node.left), differentiate(node.right))
    if isinstance(node, Sub):
        return sub(differentiate(node.left), differentiate(node.right))
    if isinstance(node, Mul):
        a, b = node.left, node.right
        return add(mul(differentiate(a), b), mul(a, differentiate(b)))
    if isinstance(node, Div):
        a, b = node.left, node.right
        da, db = differentiate(a), differentiate(b)
        if _is_const(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        inner = differentiate(node.base)
        return mul(mul(Const(float(node.exponent)),
                       power(node.base, node.exponent - 1)), inner)
    if isinstance(node, Func):
        inner = differentiate(node.arg)
        outer = {"exp": node, "cosh": Func("sinh", node.arg),
                 "sinh": Func("cosh", node.arg)}[node.name]
        return mul(outer, inner)
    raise TypeError(f"unsupported node {node!r}")


def substitute(node: Node, name: str, value: float) -> Node:
    """Replace variable ``name`` by a constant, folding where possible."""
    if isinstance(node, Var):
        return Const(float(value)) if node.name == name else node
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return neg(substitute(node.arg, name, value))
    if isinstance(node, BinOp):
        ctor = {Add: add, Sub: sub, Mul: mul, Div: div}[type(node)]
        return ctor(substitute(node.left, name, value),
                    substitute(node.right, name, value))
    if isinstance(node, Pow):
        return power(substitute(node.base, name, value), node.exponent)
    if isinstance(node, Func):
        return Func(node.name, substitute(node.arg, name, value))
    raise TypeError(f"unsupported node {node!r}")


def variables(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    out = frozenset()
    for child in node.children():
        out |= variables(child)
    return out


# ---------------------------------------------------------------------------
# evaluation

_FUNC_IMPL = {"exp": np.exp, "cosh": np.cosh, "sinh": np.sinh}


def evaluate(node: Node, x: ArrayLike, s: Optional[ArrayLike] = None) -> ArrayLike:
    """Evaluate in a fixed post-order; raises ProfileDomainError on 0 divisors."""
    if isinstance(node, Const):
        return node.value + 0.0 * np.asarray(x, dtype=float)
    if isinstance(node, Var):
        if node.name == "x":
            return np.asarray(x, dtype=float)
        if s is None:
            raise ProfileDomainError("parameter s is unbound")
        return np.asarray(s, dtype=float) + 0.0 * np.asarray(x, dtype=float)
    if isinstance(node, Neg):
        return -evaluate(node.arg, x, s)
    if isinstance(node, BinOp):
        a = evaluate(node.left, x, s)
        b = evaluate(node.right, x, s)
        if isinstance(node, Add):
            return a + b
        if isinstance(node, Sub):
            return a - b
        if isinstance(node, Mul):
            return a * b
        if np.any(b == 0.0):
            raise ProfileDomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        base = evaluate(node.base, x, s)
        if node.exponent < 0:
            if np.any(base == 0.0):
                raise ProfileDomainError("zero raised to a negative power")
            return 1.0 / base ** (-node.exponent)
        return base ** node.exponent
    if isinstance(node, Func):
        with np.errstate(over="ignore"):
            return _FUNC_IMPL[node.name](evaluate(node.arg, x, s))
    raise TypeError(f"unsupported node {node!r}")


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ProfileSyntaxError(f"unexpected character {text[pos]!r}",
                                     len(text[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), len(text[:pos].encode())))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, offset = self.take()
        if text != value:
            what = "end of input" if kind == "end" else repr(text)
            raise ProfileSyntaxError(f"expected {value!r}, found {what}", offset)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ProfileSyntaxError(f"unexpected {text!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, offset = self.take()
            if kind != "num" or not text.isdigit():
                raise ProfileSyntaxError("exponent must be an integer literal", offset)
            return Pow(base, sign * int(text))
        return base

    def atom(self) -> Node:
        kind, text, offset = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text in VARIABLES:
                return Var(text)
            raise UnknownIdentifierError(text, offset)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ProfileSyntaxError(f"unexpected {what}", offset)


def _denominators(node: Node):
    if isinstance(node, Div):
        yield node.right
    if isinstance(node, Pow) and node.exponent < 0:
        yield node.base
    for child in node.children():
        yield from _denominators(child)


def _certify(node: Node, window: Tuple[float, float]) -> None:
    """Grid-sample every denominator; require nonzero values of one sign."""
    xs = np.linspace(window[0], window[1], CERT_GRID)
    ss = np.linspace(0.0, 1.0, 101)
    for den in _denominators(node):
        if "s" in variables(den):
            X, S = np.meshgrid(xs, ss)
            vals = evaluate(den, X, S)
        else:
            vals = evaluate(den, xs)
        vals = np.asarray(vals)
        if not np.all(np.isfinite(vals)) or np.any(vals == 0.0) \
                or not (np.all(vals > 0) or np.all(vals < 0)):
            raise DivisionCertificateError(
                f"denominator {den} is not certified nonzero on {window}")


# ---------------------------------------------------------------------------


class ProfileExpr:
    """Immutable warp profile f(x) (optionally f(x; s)) with cached derivatives."""

    __slots__ = ("root", "window", "_derivs")

    def __init__(self, root: Node, window: Tuple[float, float] = (-10.0, 10.0),
                 _certified: bool = False):
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "window", (float(window[0]), float(window[1])))
        object.__setattr__(self, "_derivs", {})
        if not _certified:
            _certify(root, self.window)

    def __setattr__(self, name, value):
        raise AttributeError("ProfileExpr is immutable")

    def __str__(self):
        return str(self.root)

    def __repr__(self):
        return f"ProfileExpr({str(self)!r})"

    @property
    def has_parameter(self) -> bool:
        return "s" in variables(self.root)

    def __call__(self, x: ArrayLike, s: Optional[ArrayLike] = None) -> ArrayLike:
        return self.eval(x, s)

    def eval(self, x: ArrayLike, s: Optional[ArrayLike] = None) -> ArrayLike:
        out = evaluate(self.root, x, s)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def derivative(self, order: int = 1) -> "ProfileExpr":
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if order not in self._derivs:
            if order == 1:
                tree = differentiate(self.root)
            else:
                tree = differentiate(self.derivative(1).root)
            self._derivs[order] = ProfileExpr(tree, self.window, _certified=True)
        return self._derivs[order]

    def bind(self, s: float) -> "ProfileExpr":
        """Slice of a family at parameter value ``s``."""
        return ProfileExpr(substitute(self.root, "s", s), self.window)


def parse(text: str, window: Tuple[float, float] = (-10.0, 10.0)) -> ProfileExpr:
    if not isinstance(text, str) or not text.strip():
        raise ProfileSyntaxError("empty expression", 0)
    root = _Parser(text).parse()
    return ProfileExpr(root, window)


derivative = ProfileExpr.derivative


def eval_profile(e: ProfileExpr, x: ArrayLike, s: Optional[float] = None) -> ArrayLike:
    return e.eval(x, s)


def central_difference(e: ProfileExpr, x: ArrayLike, h: float = 1e-5,
                       order: int = 1) -> ArrayLike:
    """Finite-difference reference for the symbolic derivatives."""
    x = np.asarray(x, dtype=float)
    if order == 1:
        return (e(x + h) - e(x - h)) / (2 * h)
    return (e(x + h) - 2 * e(x) + e(x - h)) / (h * h)


__all__ = [
    "ProfileExpr", "parse", "derivative", "eval_profile", "central_difference",
    "ProfileError", "ProfileSyntaxError", "UnknownIdentifierError",
    "DivisionCertificateError", "ProfileDomainError",
]
