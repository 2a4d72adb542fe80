"""
Whitelisted arithmetic expressions for data fields and custom material laws.

Data fields are written over (x1, x2, x3, t); custom thermal-stress and yield
laws over theta. Accepted syntax: numbers, + - * / ^ **, parentheses and the
names sin, cos, exp, pi. Expressions are parsed with sympy and lambdified to
numpy, so the same text also yields exact time derivatives.
"""
import re
from functools import lru_cache

import numpy as np
import sympy

from .exceptions import ExpressionError

SPACE_TIME_NAMES = ("x1", "x2", "x3", "t")
X1, X2, X3, TIME = sympy.symbols(SPACE_TIME_NAMES)
THETA = sympy.Symbol("theta")

ALLOWED_FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
ALLOWED_CONSTANTS = {"pi": sympy.pi}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<operator>\*\*|[-+*/^()])"
    r")"
)


def _check_tokens(text, variables):
    position = 0
    depth = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            raise ExpressionError(f"unexpected character {text[position:].lstrip()[:1]!r} in {text!r}")
        name = match.group("name")
        if name is not None and name not in variables and name not in ALLOWED_FUNCTIONS \
                and name not in ALLOWED_CONSTANTS:
            raise ExpressionError(f"name {name!r} is not allowed in {text!r}")
        operator = match.group("operator")
        depth += {"(": 1, ")": -1}.get(operator, 0)
        if depth < 0:
            raise ExpressionError(f"unbalanced parentheses in {text!r}")
        position = match.end()
    if depth != 0:
        raise ExpressionError(f"unbalanced parentheses in {text!r}")


def parse_expression(text, variables=SPACE_TIME_NAMES):
    """
    Parse a whitelisted expression into a sympy expression.

    Args:
        text: expression string, or a plain number
        variables: names of the free symbols the expression may use

    Returns:
        sympy.Expr
    """
    if isinstance(text, sympy.Expr):
        expression = text
    else:
        if isinstance(text, bool) or not isinstance(text, (str, int, float)):
            raise ExpressionError(f"expected an expression string or number, got {text!r}")
        text = str(text).strip()
        if not text:
            raise ExpressionError("empty expression")
        _check_tokens(text, variables)
        namespace = {name: sympy.Symbol(name) for name in variables}
        namespace.update(ALLOWED_FUNCTIONS)
        namespace.update(ALLOWED_CONSTANTS)
        try:
            expression = sympy.sympify(text.replace("^", "**"), locals=namespace)
        except (sympy.SympifyError, SyntaxError, TypeError, ValueError) as e:
            raise ExpressionError(f"cannot parse {text!r}: {e}") from e
    if not isinstance(expression, sympy.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    unknown = {str(symbol) for symbol in expression.free_symbols} - set(variables)
    if unknown:
        raise ExpressionError(f"unknown symbols {sorted(unknown)} in {text!r}")
    return expression


def expression_source(expression):
    """Text form that parse_expression reads back to the same expression."""
    return str(expression)


class ExpressionField:
    """
    Scalar, vector or tensor field given componentwise by expressions in
    (x1, x2, x3, t). Calling the field with points of shape (..., 3) returns
    (...) for scalar fields and (..., n) otherwise.
    """

    def __init__(self, components, name="field"):
        self.name = name
        self.scalar = not isinstance(components, (list, tuple))
        if self.scalar:
            components = [components]
        self.expressions = tuple(parse_expression(component) for component in components)
        self.sources = tuple(
            component if isinstance(component, str) else expression_source(expression)
            for component, expression in zip(components, self.expressions)
        )
        self._functions = tuple(
            sympy.lambdify((X1, X2, X3, TIME), expression, modules="numpy")
            for expression in self.expressions
        )

    @classmethod
    def zeros(cls, n_components=None, name="zero"):
        if n_components is None:
            return cls("0", name=name)
        return cls(["0"] * n_components, name=name)

    @property
    def n_components(self):
        return len(self.expressions)

    def is_zero(self):
        return all(expression == 0 for expression in self.expressions)

    def depends_on_time(self):
        return any(TIME in expression.free_symbols for expression in self.expressions)

    def __call__(self, points, t=0.0):
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        x1, x2, x3 = points[..., 0], points[..., 1], points[..., 2]
        values = np.stack(
            [
                np.broadcast_to(np.asarray(function(x1, x2, x3, float(t)), dtype=float), shape)
                for function in self._functions
            ],
            axis=-1,
        )
        return values[..., 0] if self.scalar else values

    def time_derivative(self):
        derivatives = [sympy.diff(expression, TIME) for expression in self.expressions]
        if self.scalar:
            return ExpressionField(derivatives[0], name=f"{self.name}_t")
        return ExpressionField(derivatives, name=f"{self.name}_t")

    def __repr__(self):
        return f"ExpressionField({self.name}: {', '.join(self.sources)})"


@lru_cache(maxsize=64)
def compile_theta_function(text):
    """
    Compile a custom material law in theta.

    Returns:
        (value, derivative) pair of numpy callables
    """
    expression = parse_expression(text, variables=("theta",))
    value = sympy.lambdify(THETA, expression, modules="numpy")
    derivative = sympy.lambdify(THETA, sympy.diff(expression, THETA), modules="numpy")
    return value, derivative


def evaluate_theta_function(function, theta):
    theta = np.asarray(theta, dtype=float)
    return np.broadcast_to(np.asarray(function(theta), dtype=float), theta.shape).copy()
