"""A small arithmetic grammar for functionals given as text.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

Names: coordinates ``v1..vk`` and ``w1..wm``, ``x`` and ``s`` (for Dirichlet
nonlinearities), constants ``pi`` and ``e``. Functions: abs, min, max, sin, cos,
tan, exp, log, sqrt, tanh. Gradients use forward-mode dual numbers and are
``None`` at kinks of abs/min/max.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .clarke import LipschitzFunctional
from .errors import ExpressionError

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")
_FUNCS = {"abs": 1, "min": 2, "max": 2, "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1, "tanh": 1}
_NONSMOOTH = {"abs", "min", "max"}
_CONSTS = {"pi": np.pi, "e": np.e}
_VAR = re.compile(r"^(v|w)([1-9]\d*)$")


def _tokenize(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        num, name, op = m.groups()
        start = m.start(m.lastindex) + 1
        if num is not None:
            toks.append(("num", float(num), start))
        elif name is not None:
            toks.append(("name", name, start))
        elif op is not None:
            if op not in "+-*/^(),":
                raise ExpressionError(f"unexpected character {op!r}", start)
            toks.append(("op", op, start))
        pos = m.end()
    toks.append(("end", None, len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, extra_names: frozenset):
        self.toks = _tokenize(text)
        self.i = 0
        self.extra = extra_names
        self.names: set = set()
        self.funcs: set = set()

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return ("neg", inner) if val == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("const", val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if val in _FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != _FUNCS[val]:
                    raise ExpressionError(f"{val} takes {_FUNCS[val]} argument(s), got {len(args)}", pos)
                self.funcs.add(val)
                return ("call", val, *args)
            if val in _CONSTS:
                return ("const", _CONSTS[val])
            if _VAR.match(val) or val in self.extra:
                self.names.add(val)
                return ("var", val)
            raise ExpressionError(f"unknown identifier {val!r}", pos)
        if kind == "end":
            raise ExpressionError("unexpected end of input", pos)
        raise ExpressionError(f"unexpected token {val!r}", pos)


class _Kink(Exception):
    pass


class Dual:
    """Value plus gradient, for forward-mode differentiation."""

    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad


_REAL_FUNCS: dict[str, Callable] = {
    "abs": np.abs, "min": np.minimum, "max": np.maximum, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "tanh": np.tanh,
}

_DERIV: dict[str, Callable] = {
    "sin": np.cos, "cos": lambda a: -np.sin(a), "tan": lambda a: 1.0 / np.cos(a) ** 2, "exp": np.exp,
    "log": lambda a: 1.0 / a, "sqrt": lambda a: 0.5 / np.sqrt(a), "tanh": lambda a: 1.0 - np.tanh(a) ** 2,
}


def _eval_real(node, env):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_eval_real(node[1], env)
    if tag == "call":
        return _REAL_FUNCS[node[1]](*(_eval_real(a, env) for a in node[2:]))
    a, b = _eval_real(node[1], env), _eval_real(node[2], env)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return np.divide(a, b)
    return np.power(a, b)


def _eval_dual(node, env, n):
    tag = node[0]
    if tag == "const":
        return Dual(node[1], np.zeros(n))
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        a = _eval_dual(node[1], env, n)
        return Dual(-a.val, -a.grad)
    if tag == "call":
        name = node[1]
        args = [_eval_dual(a, env, n) for a in node[2:]]
        if name == "abs":
            (a,) = args
            if a.val == 0 and np.any(a.grad != 0):
                raise _Kink
            return Dual(abs(a.val), np.sign(a.val) * a.grad)
        if name in ("min", "max"):
            a, b = args
            if a.val == b.val and np.any(a.grad != b.grad):
                raise _Kink
            pick_a = (a.val <= b.val) if name == "min" else (a.val >= b.val)
            return a if pick_a else b
        (a,) = args
        if name == "sqrt" and a.val == 0:
            raise _Kink
        return Dual(_REAL_FUNCS[name](a.val), _DERIV[name](a.val) * a.grad)
    a, b = _eval_dual(node[1], env, n), _eval_dual(node[2], env, n)
    if tag == "+":
        return Dual(a.val + b.val, a.grad + b.grad)
    if tag == "-":
        return Dual(a.val - b.val, a.grad - b.grad)
    if tag == "*":
        return Dual(a.val * b.val, a.grad * b.val + b.grad * a.val)
    if tag == "/":
        q = np.divide(a.val, b.val)
        return Dual(q, (a.grad - q * b.grad) / b.val)
    val = np.power(a.val, b.val)
    grad = np.zeros(n)
    if np.any(a.grad != 0):
        if a.val == 0 and b.val < 1:
            raise _Kink
        grad = grad + b.val * np.power(a.val, b.val - 1) * a.grad
    if np.any(b.grad != 0):
        if a.val <= 0:
            raise _Kink
        grad = grad + val * np.log(a.val) * b.grad
    return Dual(val, grad)


@dataclass(frozen=True)
class ParsedExpression:
    text: str
    tree: tuple
    names: frozenset
    smooth: bool

    def evaluate(self, **env):
        with np.errstate(all="ignore"):
            return _eval_real(self.tree, env)


def parse(text: str, extra_names=()) -> ParsedExpression:
    """Parse ``text``; raise ExpressionError (with a 1-based position) on bad input."""
    if not isinstance(text, str):
        raise ExpressionError("expression must be a string", 1)
    p = _Parser(text, frozenset(extra_names))
    tree = p.parse()
    return ParsedExpression(text, tree, frozenset(p.names), not (p.funcs & _NONSMOOTH))


def _dims(names, k, m):
    idx = {"v": [0], "w": [0]}
    for name in names:
        mt = _VAR.match(name)
        if mt:
            idx[mt.group(1)].append(int(mt.group(2)))
    k = max(idx["v"]) if k is None else k
    m = max(idx["w"]) if m is None else m
    for kind, dim in (("v", k), ("w", m)):
        if max(idx[kind]) > dim:
            raise ExpressionError(f"coordinate {kind}{max(idx[kind])} exceeds declared dimension {dim}", 1)
    return k, m


def expression_dims(text: str, k: Optional[int] = None, m: Optional[int] = None) -> tuple[int, int]:
    """(k, m) for an expression in v1..vk, w1..wm; defaults are the largest indices used."""
    return _dims(parse(text).names, k, m)


def parse_expression(text: str, k: Optional[int] = None, m: Optional[int] = None) -> LipschitzFunctional:
    """Functional Phi on R^(k+m) with coordinates u = (v1..vk, w1..wm).

    The dimensions default to the largest index used; ``x`` is not allowed here.
    """
    pe = parse(text)
    k, m = _dims(pe.names, k, m)
    if k < 1 or m < 1:
        raise ExpressionError("a functional needs at least one v and one w coordinate", 1)
    names = [f"v{i}" for i in range(1, k + 1)] + [f"w{i}" for i in range(1, m + 1)]
    n = k + m

    def value(u):
        env = dict(zip(names, (float(c) for c in u)))
        with np.errstate(all="ignore"):
            return float(_eval_real(pe.tree, env))

    def grad(u):
        env = {nm: Dual(float(c), np.eye(n)[i]) for i, (nm, c) in enumerate(zip(names, u))}
        try:
            with np.errstate(all="ignore"):
                return np.asarray(_eval_dual(pe.tree, env, n).grad, dtype=float)
        except _Kink:
            return None

    return LipschitzFunctional(eval=value, dim=n, grad_opt=grad, smooth=pe.smooth, name=text)


def parse_nonlinearity(text: str) -> tuple[Callable, bool]:
    """Dirichlet nonlinearity f(x, s), vectorized over numpy arrays; returns (f, smooth)."""
    pe = parse(text, extra_names=("x", "s"))
    bad = sorted(nm for nm in pe.names if nm not in ("x", "s"))
    if bad:
        raise ExpressionError(f"a nonlinearity may only use x and s, found {bad[0]!r}", 1)

    def f(x, s):
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        with np.errstate(all="ignore"):
            out = _eval_real(pe.tree, {"x": x, "s": s})
        return np.broadcast_to(out, x.shape).astype(float) if np.ndim(x) else float(out)

    return f, pe.smooth
