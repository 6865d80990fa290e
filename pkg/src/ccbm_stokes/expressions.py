"""A small arithmetic expression language over ``x`` and ``y``.

Expressions may use numbers, ``x``, ``y``, ``+ - * / ^`` (``**`` is also
accepted), parentheses and the functions ``sin``, ``cos`` and ``exp``.
Parsing goes through Python's :mod:`ast` with a whitelist and produces a
SymPy expression, which gives exact derivatives for free.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np
import sympy

from .errors import ParseError, ValidationError

X, Y = sympy.symbols("x y", real=True)

_FUNCS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def _convert(node, text):
    if isinstance(node, ast.Expression):
        return _convert(node.body, text)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return sympy.nsimplify(node.value) if isinstance(node.value, int) else sympy.Float(node.value)
    if isinstance(node, ast.Name):
        if node.id == "x":
            return X
        if node.id == "y":
            return Y
        raise ParseError(f"unknown symbol {node.id!r} in {text!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_convert(node.left, text), _convert(node.right, text))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _convert(node.operand, text)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        return _FUNCS[node.func.id](_convert(node.args[0], text))
    raise ParseError(f"unsupported construct {type(node).__name__} in {text!r}")


def parse_expression(text) -> sympy.Expr:
    """Parse one scalar expression; numbers are accepted as constants."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return sympy.Float(text) if isinstance(text, float) else sympy.Integer(text)
    if not isinstance(text, str):
        raise ParseError(f"expression must be a string or number, got {type(text).__name__}")
    try:
        tree = ast.parse(text.replace("^", "**").strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _convert(tree, text)


@dataclass(frozen=True, eq=False)
class VectorField:
    """A 2D vector field given by two SymPy expressions in ``x`` and ``y``.

    Calling the field returns an array of shape ``(2, ...)`` matching the
    broadcast shape of the inputs; :meth:`gradient` returns ``(2, 2, ...)``
    with ``[i, j] = d f_i / d x_j``.
    """

    components: tuple
    _f: object = field(init=False, repr=False)
    _g: object = field(init=False, repr=False)

    def __post_init__(self):
        comps = tuple(sympy.sympify(c) for c in self.components)
        if len(comps) != 2:
            raise ParseError("a vector field needs exactly two components")
        for c in comps:
            if c.has(sympy.zoo, sympy.oo, -sympy.oo, sympy.nan):
                raise ValidationError(f"expression {c} is not finite")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_f", [sympy.lambdify((X, Y), c, "numpy") for c in comps])
        grads = [[sympy.lambdify((X, Y), sympy.diff(c, v), "numpy") for v in (X, Y)] for c in comps]
        object.__setattr__(self, "_g", grads)

    @classmethod
    def parse(cls, texts) -> "VectorField":
        if not isinstance(texts, (list, tuple)) or len(texts) != 2:
            raise ParseError("a vector field needs a list of two component expressions")
        return cls(tuple(parse_expression(t) for t in texts))

    @classmethod
    def zero(cls) -> "VectorField":
        return cls((sympy.Integer(0), sympy.Integer(0)))

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.components)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.stack([np.broadcast_to(np.asarray(f(x, y)), x.shape) for f in self._f])

    def gradient(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.stack([np.stack([np.broadcast_to(np.asarray(g(x, y)), x.shape) for g in row])
                         for row in self._g])

    def rotated(self, angle) -> "VectorField":
        """Field ``Q f(Q^T x)`` for the rotation ``Q`` by ``angle``."""
        c, s = sympy.cos(angle), sympy.sin(angle)
        xr, yr = c * X + s * Y, -s * X + c * Y
        fx, fy = (e.subs({X: xr, Y: yr}, simultaneous=True) for e in self.components)
        return VectorField((c * fx - s * fy, s * fx + c * fy))

    def __str__(self):
        return f"({self.components[0]}, {self.components[1]})"
