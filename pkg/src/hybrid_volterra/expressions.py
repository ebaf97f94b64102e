"""Kernel expression language: parsing, evaluation, printing, slope estimation.

Kernels are given as infix expression strings over a declared tuple of
variable names (the arity), e.g. ``"0.3 * x + sin(t - s)"`` with arity
``("t", "s", "x")``.  Supported syntax:

* numbers (integer, decimal, scientific notation)
* the declared variables
* binary ``+  -  *  /  ^`` (``**`` is accepted as a synonym for ``^``)
* unary minus
* functions ``exp, log, sin, cos, abs`` (one argument) and ``min, max``
  (two or more arguments)
* parentheses; whitespace is insignificant

Precedence, tightest first: power, unary minus, ``* /``, ``+ -``.  Power is
right-associative and its exponent may carry a unary minus (``x^-2``).

Evaluation is numpy-vectorised: bindings may mix scalars and broadcastable
arrays.  Division by zero and ``log`` of a non-positive value raise
:class:`EvaluationError`, as does a power whose result is non-finite for
finite operands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _cartesian
from typing import Mapping, Sequence, Union

import numpy as np

Number = Union[float, np.ndarray]

_FUNCTIONS = {"exp": 1, "log": 1, "sin": 1, "cos": 1, "abs": 1, "min": -2, "max": -2}
# -2 means "two or more arguments"


class ExpressionError(ValueError):
    """Syntax or validation error in a kernel expression.

    ``position`` is the 0-based offset into the source string where the
    problem was detected.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


class EvaluationError(ValueError):
    """Domain error while evaluating a kernel expression."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class _Num:
    value: float


@dataclass(frozen=True)
class _Var:
    name: str


@dataclass(frozen=True)
class _Neg:
    child: object


@dataclass(frozen=True)
class _BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class _Call:
    func: str
    args: tuple


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op", "lparen", "rparen", "comma", "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            tokens.append(_Token("num", source[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], i))
            i = j
            continue
        if c == "*" and i + 1 < n and source[i + 1] == "*":
            tokens.append(_Token("op", "^", i))
            i += 2
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, i))
            i += 1
            continue
        if c == ",":
            tokens.append(_Token("comma", c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)


class _Parser:
    def __init__(self, source: str, arity: Sequence[str]):
        self.source = source
        self.arity = tuple(arity)
        self.tokens = _tokenize(source)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExpressionError(f"expected {what}, found {tok.text or 'end of input'!r}", tok.pos)
        return self.advance()

    def parse(self):
        node = self.additive()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected {tok.text!r}", tok.pos)
        return node

    def additive(self):
        node = self.multiplicative()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = _BinOp(op, node, self.multiplicative())
        return node

    def multiplicative(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = _BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return _Neg(self.unary())
        if tok.kind == "op" and tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        node = self.primary()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # exponent at unary level: x^-2 parses, power right-associates
            node = _BinOp("^", node, self.unary())
        return node

    def primary(self):
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return _Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.peek().kind == "lparen":
                if tok.text not in _FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}", tok.pos)
                self.advance()
                args = [self.additive()]
                while self.peek().kind == "comma":
                    self.advance()
                    args.append(self.additive())
                self.expect("rparen", "')'")
                want = _FUNCTIONS[tok.text]
                if want >= 0 and len(args) != want:
                    raise ExpressionError(
                        f"{tok.text} takes {want} argument(s), got {len(args)}", tok.pos
                    )
                if want == -2 and len(args) < 2:
                    raise ExpressionError(f"{tok.text} takes at least 2 arguments", tok.pos)
                return _Call(tok.text, tuple(args))
            if tok.text in _FUNCTIONS:
                raise ExpressionError(f"function {tok.text!r} requires arguments", tok.pos)
            if tok.text not in self.arity:
                raise ExpressionError(f"unknown variable {tok.text!r}", tok.pos)
            return _Var(tok.text)
        if tok.kind == "lparen":
            self.advance()
            node = self.additive()
            self.expect("rparen", "')'")
            return node
        raise ExpressionError(f"expected a value, found {tok.text or 'end of input'!r}", tok.pos)


# ---------------------------------------------------------------------------
# Evaluation and printing


def _eval_node(node, bindings: Mapping[str, Number]):
    if isinstance(node, _Num):
        return node.value
    if isinstance(node, _Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise EvaluationError(f"no binding for variable {node.name!r}") from None
    if isinstance(node, _Neg):
        return -_eval_node(node.child, bindings)
    if isinstance(node, _BinOp):
        a = _eval_node(node.left, bindings)
        b = _eval_node(node.right, bindings)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise EvaluationError("division by zero")
            return a / b
        # power: guard results that leave the reals
        with np.errstate(all="ignore"):
            out = np.power(a, b)
        bad = ~np.isfinite(out) & np.isfinite(a) & np.isfinite(b)
        if np.any(bad):
            raise EvaluationError("power produced a non-finite value")
        return out
    if isinstance(node, _Call):
        args = [_eval_node(a, bindings) for a in node.args]
        f = node.func
        if f == "exp":
            with np.errstate(over="ignore"):
                return np.exp(args[0])
        if f == "log":
            if np.any(np.asarray(args[0]) <= 0):
                raise EvaluationError("log of a non-positive value")
            return np.log(args[0])
        if f == "sin":
            return np.sin(args[0])
        if f == "cos":
            return np.cos(args[0])
        if f == "abs":
            return np.abs(args[0])
        if f == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        if f == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
    raise TypeError(f"unknown node {node!r}")


_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node) -> int:
    if isinstance(node, (_Num, _Var, _Call)):
        return _PREC_ATOM
    if isinstance(node, _Neg):
        return _PREC_UNARY
    if node.op in "+-":
        return _PREC_ADD
    if node.op in "*/":
        return _PREC_MUL
    return _PREC_POW


def _wrap(node, minimum: int) -> str:
    s = _print_node(node)
    return f"({s})" if _prec(node) < minimum else s


def _print_node(node) -> str:
    if isinstance(node, _Num):
        v = node.value
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    if isinstance(node, _Var):
        return node.name
    if isinstance(node, _Neg):
        return "-" + _wrap(node.child, _PREC_UNARY)
    if isinstance(node, _Call):
        return f"{node.func}({', '.join(_print_node(a) for a in node.args)})"
    op = node.op
    # Right operands always require strictly tighter precedence, even for
    # + and *: floating-point addition is not associative, so dropping the
    # parentheses in ``a + (b + c)`` would change evaluation in the last bit.
    if op in "+-":
        left = _wrap(node.left, _PREC_ADD)
        right = _wrap(node.right, _PREC_ADD + 1)
        return f"{left} {op} {right}"
    if op in "*/":
        left = _wrap(node.left, _PREC_MUL)
        right = _wrap(node.right, _PREC_MUL + 1)
        return f"{left} {op} {right}"
    # power: right-associative, left operand must bind tighter than power
    left = _wrap(node.left, _PREC_ATOM)
    right = _wrap(node.right, _PREC_UNARY)
    return f"{left}^{right}"


def _free_vars(node) -> frozenset:
    if isinstance(node, _Num):
        return frozenset()
    if isinstance(node, _Var):
        return frozenset((node.name,))
    if isinstance(node, _Neg):
        return _free_vars(node.child)
    if isinstance(node, _BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    return frozenset().union(*(_free_vars(a) for a in node.args)) if node.args else frozenset()


def _rename(node, mapping: Mapping[str, str]):
    if isinstance(node, _Num):
        return node
    if isinstance(node, _Var):
        return _Var(mapping.get(node.name, node.name))
    if isinstance(node, _Neg):
        return _Neg(_rename(node.child, mapping))
    if isinstance(node, _BinOp):
        return _BinOp(node.op, _rename(node.left, mapping), _rename(node.right, mapping))
    return _Call(node.func, tuple(_rename(a, mapping) for a in node.args))


# ---------------------------------------------------------------------------
# Public surface


@dataclass(frozen=True)
class KernelExpr:
    """A parsed kernel: canonical source, declared arity, and its AST."""

    source: str
    arity: tuple[str, ...]
    root: object

    def evaluate(self, bindings: Mapping[str, Number]) -> Number:
        """Evaluate with scalar or broadcastable array bindings."""
        return _eval_node(self.root, bindings)

    def __call__(self, **bindings: Number) -> Number:
        return _eval_node(self.root, bindings)

    def free_variables(self) -> frozenset:
        return _free_vars(self.root)

    def references(self, name: str) -> bool:
        return name in _free_vars(self.root)

    def to_source(self) -> str:
        return _print_node(self.root)

    @property
    def is_zero(self) -> bool:
        return isinstance(self.root, _Num) and self.root.value == 0.0


def parse_kernel(source: str, arity: Sequence[str]) -> KernelExpr:
    """Parse ``source`` over the variables in ``arity``.

    Raises :class:`ExpressionError` (with a position) on syntax errors and
    on names outside the declared arity.
    """
    names = tuple(arity)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variable names in arity {names}")
    root = _Parser(source, names).parse()
    return KernelExpr(_print_node(root), names, root)


def zero_kernel(arity: Sequence[str]) -> KernelExpr:
    return parse_kernel("0", arity)


def eval_kernel(expr: KernelExpr, bindings: Mapping[str, Number]) -> Number:
    return expr.evaluate(bindings)


def symmetrize_second_order(expr: KernelExpr) -> KernelExpr:
    """Average a second-order kernel with its argument-swapped mirror.

    Expects a five-variable arity ``(t, s1, s2, x1, x2)``; returns
    ``(f(t,s1,s2,x1,x2) + f(t,s2,s1,x2,x1)) / 2`` as a new kernel with the
    same arity.  Applying it twice is pointwise idempotent.
    """
    if len(expr.arity) != 5:
        raise ValueError(
            f"second-order kernel must have 5 variables (t, s1, s2, x1, x2), got {expr.arity}"
        )
    t, s1, s2, x1, x2 = expr.arity
    swapped = _rename(expr.root, {s1: s2, s2: s1, x1: x2, x2: x1})
    root = _BinOp("*", _Num(0.5), _BinOp("+", expr.root, swapped))
    return KernelExpr(_print_node(root), expr.arity, root)


def estimate_lipschitz(
    expr: KernelExpr,
    wrt: str,
    box: Mapping[str, tuple[float, float]],
    samples: int = 256,
    seed: int = 0,
    safety: float = 1.0,
) -> float:
    """Sampled bound on ``sup |d expr / d wrt|`` over a box.

    Central differences are taken at stratified random points plus every
    corner of the box.  The returned value is the sample maximum (an
    under-estimate by construction) times ``safety``.
    """
    if wrt not in expr.arity:
        raise ValueError(f"{wrt!r} is not a variable of this kernel {expr.arity}")
    missing = [v for v in expr.arity if v not in box]
    if missing:
        raise ValueError(f"box does not cover variables {missing}")
    if samples < 2:
        raise ValueError("samples must be at least 2")
    lo, hi = box[wrt]
    width = hi - lo
    if not (width > 0):
        raise ValueError(f"degenerate box for {wrt!r}: [{lo}, {hi}]")
    for v in expr.arity:
        a, b = box[v]
        if b < a:
            raise ValueError(f"empty box for {v!r}: [{a}, {b}]")

    rng = np.random.default_rng(seed)
    others = [v for v in expr.arity if v != wrt]

    # stratified interior points in the wrt direction
    strata = (np.arange(samples) + rng.uniform(size=samples)) / samples
    pts = {wrt: lo + strata * width}
    for v in others:
        a, b = box[v]
        pts[v] = rng.uniform(a, b, size=samples) if b > a else np.full(samples, a)

    # all box corners
    corner_axes = [(box[v][0], box[v][1]) if box[v][1] > box[v][0] else (box[v][0],)
                   for v in expr.arity]
    corners = list(_cartesian(*corner_axes))
    if corners:
        corner_arr = np.array(corners, dtype=float)
        for k, v in enumerate(expr.arity):
            pts[v] = np.concatenate([pts[v], corner_arr[:, k]])

    delta = max(1e-9, 1e-6 * width)
    x = pts[wrt]
    xm = np.clip(x - delta, lo, hi)
    xp = np.clip(x + delta, lo, hi)
    gap = xp - xm
    keep = gap > 0
    lo_b = dict(pts)
    hi_b = dict(pts)
    lo_b[wrt] = xm
    hi_b[wrt] = xp
    fm = np.asarray(expr.evaluate(lo_b), dtype=float)
    fp = np.asarray(expr.evaluate(hi_b), dtype=float)
    slopes = np.abs(fp[keep] - fm[keep]) / gap[keep]
    if slopes.size == 0:
        raise ValueError("no usable sample pairs inside the box")
    best = float(np.max(slopes))
    if not math.isfinite(best):
        raise EvaluationError("non-finite difference quotient encountered")
    return best * safety
