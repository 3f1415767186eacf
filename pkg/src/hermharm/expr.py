"""A tiny arithmetic-expression evaluator for metric entries in scenario files.

Supports numbers, the variables ``x1 .. x6`` (real grid coordinates), ``pi``,
unary minus, ``+ - * / **`` and the functions ``sin``, ``cos``, ``exp``.
"""

import ast

import numpy as np

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def compile_expression(text):
    """Parse ``text`` once; returns a callable of the coordinate list."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check(tree.body, text)

    def evaluate(coords):
        return _eval(tree.body, coords)

    return evaluate


def _check(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return
    if isinstance(node, ast.Name):
        if node.id == "pi" or (node.id[0] == "x" and node.id[1:].isdigit()):
            return
        raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _check(node.operand, text)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, text)
        return _check(node.right, text)
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCS
        and len(node.args) == 1
        and not node.keywords
    ):
        return _check(node.args[0], text)
    raise ExpressionError(f"unsupported construct {ast.dump(node)[:40]}... in {text!r}")


def _eval(node, coords):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return np.pi
        idx = int(node.id[1:]) - 1
        if not 0 <= idx < len(coords):
            raise ExpressionError(f"coordinate {node.id} out of range for {len(coords)} real axes")
        return coords[idx]
    if isinstance(node, ast.UnaryOp):
        value = _eval(node.operand, coords)
        return -value if isinstance(node.op, ast.USub) else value
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, coords), _eval(node.right, coords))
    return _FUNCS[node.func.id](_eval(node.args[0], coords))
