"""Closed-form expressions used in scenario configs.

The grammar is deliberately tiny: numbers, variables, ``+ - * / ^`` (``**``
is accepted too), unary minus, and the functions ``exp ln log sqrt abs min
max ceil floor``.  Expressions are parsed with :mod:`ast` against a node
whitelist and evaluate elementwise on numpy arrays.

>>> Expression("1/j^2")(j=np.array([1.0, 2.0]))
array([1.  , 0.25])
"""
import ast
import math

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {
    "exp": np.exp,
    "ln": np.log,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "ceil": np.ceil,
    "floor": np.floor,
    "min": np.minimum,
    "max": np.maximum,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.true_divide,
    ast.Pow: np.power,
}

DEFAULT_VARIABLES = ("j", "t", "x", "s")


def _compile(node, source, variables):
    if isinstance(node, ast.Expression):
        return _compile(node.body, source, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in _CONSTANTS:
            value = _CONSTANTS[name]
            return lambda env: value
        if name not in variables:
            raise ConfigError(f"unknown name {name!r} in expression {source!r}",
                              context=f"col {node.col_offset + 1}")
        return lambda env: env[name]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile(node.left, source, variables)
        right = _compile(node.right, source, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = _compile(node.operand, source, variables)
        if isinstance(node.op, ast.USub):
            return lambda env: np.negative(operand(env))
        return operand
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCTIONS and not node.keywords:
        fn = _FUNCTIONS[node.func.id]
        arity = 2 if node.func.id in ("min", "max") else 1
        if len(node.args) != arity:
            raise ConfigError(f"{node.func.id} takes {arity} argument(s) in {source!r}",
                              context=f"col {node.col_offset + 1}")
        args = [_compile(a, source, variables) for a in node.args]
        if arity == 1:
            (a0,) = args
            return lambda env: fn(a0(env))
        a0, a1 = args
        return lambda env: fn(a0(env), a1(env))
    col = getattr(node, "col_offset", 0) + 1
    raise ConfigError(f"unsupported syntax {type(node).__name__} in expression {source!r}",
                      context=f"col {col}")


class Expression:
    """A parsed closed form, callable with keyword variables.

    Unbound variables default to the first bound one, so ``"x^2+2"`` can be
    evaluated as ``expr(j=...)`` on atoms and ``expr(t=...)`` on an interval.
    """

    def __init__(self, source, variables=DEFAULT_VARIABLES):
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str) or not source.strip():
            raise ConfigError(f"expression must be a non-empty string, got {source!r}")
        self.source = source.strip()
        self.variables = tuple(variables)
        text = self.source.replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}",
                              context=f"col {exc.offset or 0}") from None
        self._fn = _compile(tree, self.source, self.variables)

    def __call__(self, **values):
        if not values:
            raise TypeError("bind at least one variable")
        arrays = {k: np.asarray(v, dtype=float) for k, v in values.items()}
        default = next(iter(arrays.values()))
        env = {name: arrays.get(name, default) for name in self.variables}
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._fn(env)
        return np.broadcast_to(np.asarray(out, dtype=float), default.shape).copy()

    def __mul__(self, other):
        if isinstance(other, Expression):
            return Expression(f"({self.source})*({other.source})", self.variables)
        return NotImplemented

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self):
        return hash(self.source)


def as_expression(value, variables=DEFAULT_VARIABLES):
    """Coerce a number, string or :class:`Expression` to an :class:`Expression`."""
    if isinstance(value, Expression):
        return value
    return Expression(value, variables)
