"""Scalar math expressions over state variables x1..xn.

Expressions define dynamics components and dictionary functions. They are
parsed once into an immutable AST and evaluated pointwise with IEEE double
semantics: non-finite intermediate results (division by zero, log of a
negative number, overflow) propagate to the caller instead of raising.

Grammar (also documented in the README):

    expr    = term { ("+" | "-") term }
    term    = unary { ("*" | "/") unary }
    unary   = "-" unary | power
    power   = primary [ "^" unary ]      right-associative
    primary = NUMBER | VARIABLE | FUNCTION "(" expr ")" | "(" expr ")"

Variables are fixed names ``x1 ... xn`` where ``n`` is the declared state
dimension. The exponent of ``^`` must be a constant subexpression with an
integer value, which keeps every expression real-valued on domains that
contain negative coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "ParseError",
    "UnknownIdentifier",
    "ArityError",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "DynamicsMap",
    "Composition",
    "parse",
    "compose_with_map",
    "BUILTINS",
]


class ParseError(ValueError):
    """Malformed expression source. Carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class UnknownIdentifier(ParseError):
    """Identifier is neither x1..xn nor a builtin function."""


class ArityError(ParseError):
    """Builtin function called with the wrong number of arguments."""


BUILTINS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_VAR_RE = re.compile(r"^x([1-9][0-9]*)$")


# --- AST nodes (immutable) ---------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Call]

# Precedence levels used by both the parser and the printer.
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _node_prec(node):
    if isinstance(node, (Const, Var, Call)):
        return _PREC["atom"]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC[node.op]


def _to_source(node):
    if isinstance(node, Const):
        return repr(node.value) if isinstance(node.value, float) else str(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({_to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = _to_source(node.operand)
        if _node_prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    # binary operator: parenthesize children whose precedence would rebind
    lp, rp = _node_prec(node.left), _node_prec(node.right)
    p = _PREC[node.op]
    left = _to_source(node.left)
    right = _to_source(node.right)
    if node.op == "^":
        # right-associative: left child needs parens at equal precedence
        if lp <= p:
            left = f"({left})"
        if rp < p:
            right = f"({right})"
    else:
        if lp < p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


def _const_value(node):
    """Value of a variable-free subtree, or None if it references a variable."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return None
    if isinstance(node, Neg):
        v = _const_value(node.operand)
        return None if v is None else -v
    if isinstance(node, Call):
        v = _const_value(node.arg)
        if v is None:
            return None
        with np.errstate(all="ignore"):
            return float(BUILTINS[node.name](v))
    a = _const_value(node.left)
    b = _const_value(node.right)
    if a is None or b is None:
        return None
    with np.errstate(all="ignore"):
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return float(np.divide(a, b))
        return float(np.power(a, b))


def _eval_node(node, columns, n_points):
    """Vectorized evaluation; `columns[k]` holds variable x(k+1) at all points."""
    if isinstance(node, Const):
        return np.full(n_points, float(node.value))
    if isinstance(node, Var):
        return columns[node.index - 1]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, columns, n_points)
    if isinstance(node, Call):
        return BUILTINS[node.name](_eval_node(node.arg, columns, n_points))
    left = _eval_node(node.left, columns, n_points)
    if node.op == "^":
        # exponent is constant by parse-time validation; fold it once
        return np.power(left, _const_value(node.right))
    right = _eval_node(node.right, columns, n_points)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return np.divide(left, right)


# --- Public expression objects -----------------------------------------------

@dataclass(frozen=True)
class Expr:
    """A parsed expression over ``state_dim`` variables.

    Immutable after construction; safe to evaluate concurrently. Calling the
    object with an ``(m, n)`` array of points returns the ``m`` values; a
    single point of shape ``(n,)`` returns a scalar.
    """

    root: Node
    state_dim: int

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] != self.state_dim:
            raise ValueError(
                f"expected points of dimension {self.state_dim}, got shape {pts.shape}"
            )
        columns = [pts[:, k] for k in range(self.state_dim)]
        with np.errstate(all="ignore"):
            values = _eval_node(self.root, columns, pts.shape[0])
        return float(values[0]) if single else values

    def eval(self, point):
        """Evaluate at one point (length-n sequence); returns a float."""
        return self(np.asarray(point, dtype=float))

    def __str__(self):
        return _to_source(self.root)


@dataclass(frozen=True)
class DynamicsMap:
    """A map T from the state space to itself, one expression per component."""

    state_dim: int
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.state_dim:
            raise ValueError(
                f"dynamics needs {self.state_dim} components, got {len(self.components)}"
            )
        for c in self.components:
            if c.state_dim != self.state_dim:
                raise ValueError("component state dimension mismatch")

    @classmethod
    def from_strings(cls, sources, state_dim):
        return cls(state_dim, tuple(parse(s, state_dim) for s in sources))

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts.reshape(1, -1)
        out = np.column_stack([c(pts) for c in self.components])
        return out[0] if single else out

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"


@dataclass(frozen=True)
class Composition:
    """The composition f ∘ T: evaluates ``outer`` at mapped points."""

    outer: object  # any evaluable: (m, n) points -> (m,) values
    inner: DynamicsMap

    def __call__(self, points):
        return self.outer(self.inner(np.atleast_2d(np.asarray(points, dtype=float))))

    def eval(self, point):
        return float(self(np.asarray(point, dtype=float).reshape(1, -1))[0])

    def __str__(self):
        return f"({self.outer}) o T"


def compose_with_map(e, dynamics):
    """Return an evaluable g with g(x) = e(T(x)).

    This realizes the action of the composition operator on a single
    observable. The result is a closure over (e, T); no symbolic composition
    is performed.
    """
    sd = getattr(e, "state_dim", None)
    if sd is not None and sd != dynamics.state_dim:
        raise ValueError(
            f"expression has state_dim {sd}, dynamics has {dynamics.state_dim}"
        )
    return Composition(e, dynamics)


# --- Tokenizer and recursive-descent parser ----------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, tokens, state_dim):
        self.tokens = tokens
        self.i = 0
        self.state_dim = state_dim

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def at_op(self, *ops):
        kind, text, _ = self.peek()
        return kind == "op" and text in ops

    def parse_expr(self):
        node = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance()[1]
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.at_op("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.at_op("-"):
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_primary()
        if self.at_op("^"):
            _, _, pos = self.advance()
            exponent = self.parse_unary()
            value = _const_value(exponent)
            if value is None:
                raise ParseError("exponent must be a constant expression", pos)
            if not (np.isfinite(value) and float(value).is_integer()):
                raise ParseError(
                    f"exponent must have an integer value, got {value!r}", pos
                )
            return BinOp("^", base, exponent)
        return base

    def parse_primary(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            return self.parse_ident(text, pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)

    def parse_ident(self, name, pos):
        if name in BUILTINS:
            self.expect_op("(")
            args = [self.parse_expr()]
            while self.at_op(","):
                self.advance()
                args.append(self.parse_expr())
            self.expect_op(")")
            if len(args) != 1:
                raise ArityError(f"{name} takes 1 argument, got {len(args)}", pos)
            return Call(name, args[0])
        m = _VAR_RE.match(name)
        if m:
            index = int(m.group(1))
            if index > self.state_dim:
                raise UnknownIdentifier(
                    f"variable {name} exceeds state dimension {self.state_dim}", pos
                )
            return Var(index)
        raise UnknownIdentifier(f"unknown identifier {name!r}", pos)


def parse(source, state_dim):
    """Parse ``source`` into an :class:`Expr` over ``state_dim`` variables.

    Raises :class:`ParseError` (or the :class:`UnknownIdentifier` /
    :class:`ArityError` subclasses) with the offending source position.
    """
    if state_dim < 1:
        raise ValueError("state_dim must be positive")
    parser = _Parser(_tokenize(source), state_dim)
    root = parser.parse_expr()
    kind, text, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {text!r}", pos)
    return Expr(root, state_dim)
