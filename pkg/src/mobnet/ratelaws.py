"""Expression language for density-dependent reaction rates.

Rates are written in density form over the variables a1..aL (per-region
densities) and b1..bP (parameter-field values), with the operators
+ - * / min max and numeric literals. Expressions parse to a small AST
that supports scalar evaluation, vectorized evaluation over whole grids,
and compilation to a flat postfix program for the jitted simulator core.
All three evaluation routes apply the same operations in the same order,
so their results agree bitwise.
"""

from __future__ import annotations

import re

import numpy as np

__all__ = [
    "ExprError",
    "parse_expr",
    "eval_scalar",
    "eval_grid",
    "compile_program",
    "check_bounds",
    "check_division_guard",
    "vanishes_when_zero",
    "format_expr",
]


class ExprError(ValueError):
    """Raised for syntax or validation problems in a rate expression."""


# AST nodes are tuples:
#   ("num", value) | ("a", index) | ("b", index) | (op, left, right)
# with op one of "+", "-", "*", "/", "min", "max". Indices are 0-based.

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append((m.group("op"), None))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


_VAR = re.compile(r"^([ab])([1-9]\d*)$")


class _Parser:
    def __init__(self, tokens, constants, param_names):
        self.tokens = tokens
        self.i = 0
        self.constants = constants
        self.param_names = param_names

    def peek(self):
        return self.tokens[self.i][0]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise ExprError(f"expected {kind!r}, found {tok[0]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek() != "end":
            raise ExprError(f"trailing input at token {self.tokens[self.i][0]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()[0]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()[0]
            node = (op, node, self.factor())
        return node

    def factor(self):
        kind = self.peek()
        if kind == "-":
            self.take()
            return ("-", ("num", 0.0), self.factor())
        if kind == "num":
            return ("num", self.take()[1])
        if kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind == "name":
            name = self.take()[1]
            if name in ("min", "max"):
                self.take("(")
                left = self.expr()
                self.take(",")
                right = self.expr()
                self.take(")")
                return (name, left, right)
            return self.resolve(name)
        raise ExprError(f"unexpected token {kind!r}")

    def resolve(self, name):
        m = _VAR.match(name)
        if m:
            return (m.group(1), int(m.group(2)) - 1)
        if name in self.constants:
            return ("num", float(self.constants[name]))
        if name in self.param_names:
            return ("b", self.param_names.index(name))
        raise ExprError(f"unknown name {name!r}")


def parse_expr(text, constants=None, param_names=()):
    """Parse an infix rate expression into an AST.

    Names resolve, in order, to the variables a<i>/b<p>, entries of the
    ``constants`` mapping (folded to literals), or ``param_names`` (mapped
    to the corresponding b-variable).
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprError("rate expression must be a non-empty string")
    return _Parser(_tokenize(text), dict(constants or {}), list(param_names)).parse()


def eval_scalar(node, densities, params=()):
    """Evaluate an expression at one point. Returns a float."""
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "a":
        return float(densities[node[1]])
    if kind == "b":
        return float(params[node[1]])
    left = eval_scalar(node[1], densities, params)
    right = eval_scalar(node[2], densities, params)
    if kind == "+":
        return left + right
    if kind == "-":
        return left - right
    if kind == "*":
        return left * right
    if kind == "/":
        return left / right
    if kind == "min":
        return min(left, right)
    return max(left, right)


def eval_grid(node, densities, params):
    """Evaluate over arrays: densities[l] and params[p] are broadcastable grids."""
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "a":
        return densities[node[1]]
    if kind == "b":
        return params[node[1]]
    left = eval_grid(node[1], densities, params)
    right = eval_grid(node[2], densities, params)
    if kind == "+":
        return left + right
    if kind == "-":
        return left - right
    if kind == "*":
        return left * right
    if kind == "/":
        return left / right
    if kind == "min":
        return np.minimum(left, right)
    return np.maximum(left, right)


# Opcodes for the postfix program interpreter.
OP_NUM, OP_A, OP_B, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_MIN, OP_MAX = range(9)

_BINOP = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV,
          "min": OP_MIN, "max": OP_MAX}


def compile_program(node):
    """Flatten an AST to postfix (ops, args, consts, stack_depth) arrays.

    Post-order emission preserves the tree walk's operand order, keeping
    the interpreted result bitwise equal to eval_scalar.
    """
    ops, args, consts = [], [], []

    def emit(n):
        kind = n[0]
        if kind == "num":
            ops.append(OP_NUM)
            args.append(len(consts))
            consts.append(n[1])
            return 1
        if kind == "a":
            ops.append(OP_A)
            args.append(n[1])
            return 1
        if kind == "b":
            ops.append(OP_B)
            args.append(n[1])
            return 1
        dl = emit(n[1])
        dr = emit(n[2])
        ops.append(_BINOP[kind])
        args.append(0)
        return max(dl, dr + 1)

    depth = emit(node)
    return (np.asarray(ops, dtype=np.int8),
            np.asarray(args, dtype=np.int32),
            np.asarray(consts, dtype=np.float64),
            depth)


def check_bounds(node, n_states, n_params):
    """Verify every variable index is within range. Returns error strings."""
    errors = []

    def walk(n):
        kind = n[0]
        if kind == "a" and not (0 <= n[1] < n_states):
            errors.append(f"a{n[1] + 1} references a state beyond the {n_states} declared")
        elif kind == "b" and not (0 <= n[1] < n_params):
            errors.append(f"b{n[1] + 1} references a parameter beyond the {n_params} declared")
        elif kind in _BINOP:
            walk(n[1])
            walk(n[2])

    walk(node)
    return errors


def check_division_guard(node):
    """Require every divisor to be max(positive literal, ...). Returns error strings.

    The guard keeps evaluation finite on nonnegative inputs.
    """
    errors = []

    def guarded(n):
        if n[0] != "max":
            return False
        left, right = n[1], n[2]
        return (left[0] == "num" and left[1] > 0) or (right[0] == "num" and right[1] > 0)

    def walk(n):
        kind = n[0]
        if kind in _BINOP:
            if kind == "/" and not guarded(n[2]):
                errors.append(
                    "division requires a divisor of the form max(<positive literal>, ...)")
            walk(n[1])
            walk(n[2])

    walk(node)
    return errors


_PROBE_MAGNITUDES = (0.25, 1.0, 3.7, 50.0)


def vanishes_when_zero(node, state_index, n_states, param_values):
    """Check numerically that the rate is 0 whenever density state_index is 0.

    Probes the expression over a grid of magnitudes for the remaining
    densities. A structural factor like a_l or min(a_l, c) passes; a rate
    that stays positive at a_l = 0 fails.
    """
    other = [l for l in range(n_states) if l != state_index]
    for combo in range(len(_PROBE_MAGNITUDES) ** min(len(other), 2)):
        densities = [0.0] * n_states
        c = combo
        for l in other[:2]:
            densities[l] = _PROBE_MAGNITUDES[c % len(_PROBE_MAGNITUDES)]
            c //= len(_PROBE_MAGNITUDES)
        for l in other[2:]:
            densities[l] = 1.0
        if eval_scalar(node, densities, param_values) != 0.0:
            return False
    return True


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(node):
    """Render an AST back to parseable infix text."""
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "a":
        return f"a{node[1] + 1}"
    if kind == "b":
        return f"b{node[1] + 1}"
    if kind in ("min", "max"):
        return f"{kind}({format_expr(node[1])}, {format_expr(node[2])})"
    left, right = node[1], node[2]

    def wrap(child, parent_prec, tighten):
        text = format_expr(child)
        prec = _PREC.get(child[0], 3)
        if prec < parent_prec or (tighten and prec == parent_prec):
            return f"({text})"
        return text

    prec = _PREC[kind]
    # reparsing is left-associative, so a bare same-precedence right child
    # would change the float evaluation order
    return f"{wrap(left, prec, False)} {kind} {wrap(right, prec, True)}"
