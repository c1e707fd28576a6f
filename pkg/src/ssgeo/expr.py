"""Polynomial expression trees over manifold coordinates.

The cometric entries of a field are scalar polynomial expressions in the
coordinates ``x1 .. xn``.  This module supplies the tiny symbolic layer the
rest of the package is built on: parsing, exact symbolic differentiation,
pointwise evaluation, printing, and conversion to a flat monomial form that
the numeric backends consume.

Grammar (whitespace-insensitive, left-associative)::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := NUMBER | IDENT | '-' factor | '(' expr ')'
    IDENT  := 'x' [1-9][0-9]*

Unary minus binds tighter than ``*``, which binds tighter than binary
``+``/``-``.  There is no division and there are no transcendental
functions; every expression is a polynomial, so symbolic derivatives are
exact and evaluation is total on finite points.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Iterator, Sequence

__all__ = [
    "Expression",
    "Const",
    "Coord",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "ParseError",
    "parse",
    "differentiate",
    "evaluate",
    "to_source",
    "to_monomials",
    "from_monomials",
]


class Expression:
    """Base class for all expression nodes.  Nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Coord(Expression):
    """Reference to coordinate ``x<index>``; ``index`` is 1-based."""

    index: int


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class Add(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Sub(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Mul(Expression):
    left: Expression
    right: Expression


class ParseError(ValueError):
    """Syntax or range error while parsing; ``offset`` is the byte offset."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>x[1-9][0-9]*)
  | (?P<op>[+\-*()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if match.lastgroup != "ws":
            yield match.lastgroup, match.group(), pos
        pos = match.end()
    yield "end", "", len(source)


class _Parser:
    def __init__(self, source: str, dim: int) -> None:
        self.tokens = list(_tokenize(source))
        self.dim = dim
        self.cursor = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.cursor]

    def advance(self) -> tuple[str, str, int]:
        token = self.tokens[self.cursor]
        self.cursor += 1
        return token

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            _, op, _ = self.advance()
            right = self.term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek()[:2] == ("op", "*"):
            self.advance()
            node = Mul(node, self.factor())
        return node

    def factor(self) -> Expression:
        kind, text, offset = self.advance()
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            index = int(text[1:])
            if index > self.dim:
                raise ParseError(
                    f"coordinate {text} exceeds manifold dimension {self.dim}", offset
                )
            return Coord(index)
        if kind == "op" and text == "-":
            return Neg(self.factor())
        if kind == "op" and text == "(":
            node = self.expr()
            kind, text, offset = self.advance()
            if (kind, text) != ("op", ")"):
                raise ParseError("expected ')'", offset)
            return node
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", offset)


def parse(source: str, dim: int) -> Expression:
    """Parse ``source`` into an expression over coordinates ``x1 .. x<dim>``.

    Raises :class:`ParseError` with the byte offset of the first offending
    token on malformed input or an out-of-range coordinate index.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    parser = _Parser(source, dim)
    node = parser.expr()
    kind, text, offset = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input {text!r}", offset)
    return node


def _is_zero(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _add(a: Expression, b: Expression) -> Expression:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _mul(a: Expression, b: Expression) -> Expression:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if isinstance(a, Const) and a.value == 1.0:
        return b
    if isinstance(b, Const) and b.value == 1.0:
        return a
    return Mul(a, b)


@singledispatch
def differentiate(expr: Expression, index: int) -> Expression:
    """Exact symbolic partial derivative with respect to ``x<index>``."""
    raise TypeError(f"cannot differentiate {type(expr).__name__}")


@differentiate.register
def _(expr: Const, index: int) -> Expression:
    return Const(0.0)


@differentiate.register
def _(expr: Coord, index: int) -> Expression:
    return Const(1.0) if expr.index == index else Const(0.0)


@differentiate.register
def _(expr: Neg, index: int) -> Expression:
    inner = differentiate(expr.arg, index)
    return Const(0.0) if _is_zero(inner) else Neg(inner)


@differentiate.register
def _(expr: Add, index: int) -> Expression:
    return _add(differentiate(expr.left, index), differentiate(expr.right, index))


@differentiate.register
def _(expr: Sub, index: int) -> Expression:
    left = differentiate(expr.left, index)
    right = differentiate(expr.right, index)
    if _is_zero(right):
        return left
    if _is_zero(left):
        return Neg(right)
    return Sub(left, right)


@differentiate.register
def _(expr: Mul, index: int) -> Expression:
    return _add(
        _mul(differentiate(expr.left, index), expr.right),
        _mul(expr.left, differentiate(expr.right, index)),
    )


@singledispatch
def evaluate(expr: Expression, point: Sequence[float]) -> float:
    """Evaluate ``expr`` at ``point`` (a length-``dim`` coordinate sequence)."""
    raise TypeError(f"cannot evaluate {type(expr).__name__}")


@evaluate.register
def _(expr: Const, point: Sequence[float]) -> float:
    return expr.value


@evaluate.register
def _(expr: Coord, point: Sequence[float]) -> float:
    return float(point[expr.index - 1])


@evaluate.register
def _(expr: Neg, point: Sequence[float]) -> float:
    return -evaluate(expr.arg, point)


@evaluate.register
def _(expr: Add, point: Sequence[float]) -> float:
    return evaluate(expr.left, point) + evaluate(expr.right, point)


@evaluate.register
def _(expr: Sub, point: Sequence[float]) -> float:
    return evaluate(expr.left, point) - evaluate(expr.right, point)


@evaluate.register
def _(expr: Mul, point: Sequence[float]) -> float:
    return evaluate(expr.left, point) * evaluate(expr.right, point)


# Precedence levels for printing: sums < products < unary minus / atoms.
_LEVEL_SUM, _LEVEL_PRODUCT, _LEVEL_UNARY = 1, 2, 3


def _render(expr: Expression, parent_level: int) -> str:
    if isinstance(expr, Const):
        text = repr(expr.value)
        # A negative literal behaves like a unary-minus factor.
        if expr.value < 0 and parent_level > _LEVEL_SUM:
            return f"({text})"
        return text
    if isinstance(expr, Coord):
        return f"x{expr.index}"
    if isinstance(expr, Neg):
        inner = _render(expr.arg, _LEVEL_UNARY)
        text = f"-{inner}"
        return f"({text})" if parent_level > _LEVEL_UNARY else text
    if isinstance(expr, (Add, Sub)):
        op = " + " if isinstance(expr, Add) else " - "
        # The right operand of '-' must re-parenthesize same-level nodes.
        left = _render(expr.left, _LEVEL_SUM)
        right = _render(expr.right, _LEVEL_SUM + (1 if isinstance(expr, Sub) else 0))
        text = f"{left}{op}{right}"
        return f"({text})" if parent_level > _LEVEL_SUM else text
    if isinstance(expr, Mul):
        left = _render(expr.left, _LEVEL_PRODUCT)
        right = _render(expr.right, _LEVEL_PRODUCT)
        text = f"{left}*{right}"
        return f"({text})" if parent_level > _LEVEL_PRODUCT else text
    raise TypeError(f"cannot print {type(expr).__name__}")


def to_source(expr: Expression) -> str:
    """Print ``expr`` in the grammar; ``parse(to_source(e), dim)`` evaluates
    identically to ``e``."""
    return _render(expr, _LEVEL_SUM)


# ---------------------------------------------------------------------------
# Monomial form.  A polynomial is a dict mapping an exponent tuple (one
# entry per coordinate) to a float coefficient; the numeric backends and the
# exponential-map recursion work on this representation.
# ---------------------------------------------------------------------------

Monomials = dict[tuple[int, ...], float]


def to_monomials(expr: Expression, dim: int) -> Monomials:
    """Expand ``expr`` into ``{exponent_tuple: coefficient}`` form.

    Exactly-cancelling coefficients are dropped, so the zero polynomial is
    the empty dict.
    """
    zero = (0,) * dim

    def walk(e: Expression) -> Monomials:
        if isinstance(e, Const):
            return {zero: e.value} if e.value != 0.0 else {}
        if isinstance(e, Coord):
            key = tuple(1 if i == e.index - 1 else 0 for i in range(dim))
            return {key: 1.0}
        if isinstance(e, Neg):
            return {k: -v for k, v in walk(e.arg).items()}
        if isinstance(e, (Add, Sub)):
            sign = 1.0 if isinstance(e, Add) else -1.0
            out = dict(walk(e.left))
            for k, v in walk(e.right).items():
                out[k] = out.get(k, 0.0) + sign * v
                if out[k] == 0.0:
                    del out[k]
            return out
        if isinstance(e, Mul):
            left, right = walk(e.left), walk(e.right)
            out: Monomials = {}
            for ka, va in left.items():
                for kb, vb in right.items():
                    key = tuple(a + b for a, b in zip(ka, kb))
                    out[key] = out.get(key, 0.0) + va * vb
                    if out[key] == 0.0:
                        del out[key]
            return out
        raise TypeError(f"cannot expand {type(e).__name__}")

    return walk(expr)


def from_monomials(mono: Monomials, dim: int) -> Expression:
    """Rebuild an expression tree (sum of coefficient-times-power products)."""
    terms: list[Expression] = []
    for key, coeff in sorted(mono.items()):
        factors: list[Expression] = []
        if coeff != 1.0 or not any(key):
            factors.append(Const(coeff))
        for i, power in enumerate(key):
            factors.extend(Coord(i + 1) for _ in range(power))
        node = factors[0]
        for factor in factors[1:]:
            node = Mul(node, factor)
        terms.append(node)
    if not terms:
        return Const(0.0)
    node = terms[0]
    for term in terms[1:]:
        node = Add(node, term)
    return node


def poly_add(a: Monomials, b: Monomials, scale: float = 1.0) -> Monomials:
    """``a + scale*b`` in monomial form."""
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + scale * v
        if out[k] == 0.0:
            del out[k]
    return out


def poly_mul(a: Monomials, b: Monomials) -> Monomials:
    out: Monomials = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0.0) + va * vb
            if out[key] == 0.0:
                del out[key]
    return out


def poly_diff(a: Monomials, index: int) -> Monomials:
    """Partial derivative with respect to ``x<index>`` (1-based)."""
    i = index - 1
    out: Monomials = {}
    for key, coeff in a.items():
        if key[i] == 0:
            continue
        new = list(key)
        new[i] -= 1
        out[tuple(new)] = out.get(tuple(new), 0.0) + coeff * key[i]
    return out


def poly_eval(a: Monomials, point: Sequence[float]) -> float:
    total = 0.0
    for key, coeff in a.items():
        term = coeff
        for x, power in zip(point, key):
            for _ in range(power):
                term *= x
        total += term
    return total


def poly_affine_substitute(
    a: Monomials, matrix: Sequence[Sequence[float]], shift: Sequence[float]
) -> Monomials:
    """Substitute ``x_i = sum_j matrix[i][j]*y_j + shift[i]`` into ``a``.

    Returns the expanded polynomial in the ``y`` coordinates (same dimension).
    """
    dim = len(shift)
    zero = (0,) * dim
    # Linear forms for each coordinate, as polynomials in y.
    forms: list[Monomials] = []
    for i in range(dim):
        form: Monomials = {}
        if shift[i] != 0.0:
            form[zero] = float(shift[i])
        for j in range(dim):
            if matrix[i][j] != 0.0:
                key = tuple(1 if c == j else 0 for c in range(dim))
                form[key] = form.get(key, 0.0) + float(matrix[i][j])
        forms.append(form)

    out: Monomials = {}
    for key, coeff in a.items():
        term: Monomials = {zero: coeff}
        for i, power in enumerate(key):
            for _ in range(power):
                term = poly_mul(term, forms[i])
        out = poly_add(out, term)
    return out
