"""A small, safe arithmetic language for load and obstacle fields.

Grammar: numbers, ``x``, ``y``, ``pi``, ``+ - * / ^`` (``^`` is a power),
parentheses, and the functions ``abs``, ``sqrt``, ``exp``, ``sin``, ``cos``,
``min``, ``max`` and ``rect(x0, x1, y0, y1, inside, outside)``, which is
``inside`` on the closed rectangle ``[x0, x1] x [y0, y1]`` and ``outside``
elsewhere.  Expressions compile to vectorised numpy callables.

>>> g = Expression("rect(0.3, 0.7, 0.3, 0.7, 0, -1)")
>>> float(g(0.5, 0.5)), float(g(0.1, 0.5))
(0.0, -1.0)
"""
from __future__ import annotations

import ast

import numpy as np

__all__ = ["Expression", "ExpressionError"]


class ExpressionError(ValueError):
    pass


def _rect(x, y, x0, x1, y0, y1, inside, outside):
    mask = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    return np.where(mask, inside, outside)


_FUNCTIONS = {
    "abs": (np.abs, 1),
    "sqrt": (np.sqrt, 1),
    "exp": (np.exp, 1),
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "min": (np.minimum, 2),
    "max": (np.maximum, 2),
}
_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _compile(node):
    """Turn an AST node into ``fn(x, y)``."""
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda x, y: v
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x, y: x
        if node.id == "y":
            return lambda x, y: y
        if node.id == "pi":
            return lambda x, y: np.pi
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda x, y: -inner(x, y)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        op = _BINARY[type(node.op)]
        left, right = _compile(node.left), _compile(node.right)
        return lambda x, y: op(left(x, y), right(x, y))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        args = [_compile(a) for a in node.args]
        if name == "rect":
            if len(args) != 6:
                raise ExpressionError("rect takes 6 arguments: x0, x1, y0, y1, inside, outside")
            return lambda x, y: _rect(x, y, *(a(x, y) for a in args))
        if name in _FUNCTIONS:
            fn, arity = _FUNCTIONS[name]
            if len(args) != arity:
                raise ExpressionError(f"{name} takes {arity} argument(s)")
            return lambda x, y: fn(*(a(x, y) for a in args))
        raise ExpressionError(f"unknown function {name!r}")
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


class Expression:
    """Compiled field expression; ``source`` keeps the text for serialisation."""

    def __init__(self, source: str):
        self.source = str(source).strip()
        if not self.source:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(self.source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        self._fn = _compile(tree)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._fn(x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self) -> int:
        return hash(self.source)
