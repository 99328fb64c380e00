"""Tiny expression language for target observables and data functions.

Deliberately limited to named builtins instead of a general parser:
sums of terms, where a term is a number, a scaled monomial in x1/x2 (or in
the manifold parameter s), a gaussian bump, or sin/cos of the parameter.

Examples accepted for targets:     "gaussian(3, 10)", "x1^2*x2", "2*x2 + 1"
Examples accepted for data h(s):   "1", "s", "s^2", "0.5*s + 2", "sin(s)"
"""

from __future__ import annotations

import math
import re
from typing import Callable

import numpy as np

from .errors import ConfigError

__all__ = ["parse_target", "parse_data_fn"]

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_GAUSSIAN = re.compile(r"^gaussian\(\s*([^,]+)\s*,\s*([^)]+)\s*\)$")
_POWER = re.compile(r"^(?P<var>[a-zA-Z]\w*)(\^(?P<pow>[+-]?\d+\.?\d*))?$")
_TRIG = re.compile(r"^(?P<fn>sin|cos)\(\s*(?P<var>[a-zA-Z]\w*)\s*\)$")


def _number(token: str, where: str) -> float:
    if not _NUMBER.match(token):
        raise ConfigError(f"expected a number, got {token!r}", field=where)
    return float(token)


def _parse_factor(token: str, variables: dict[str, int], where: str):
    """Return (kind, payload): ('const', c) | ('pow', (index, p)) | ('trig', (fn, index))."""
    token = token.strip()
    if _NUMBER.match(token):
        return ("const", float(token))
    m = _TRIG.match(token)
    if m:
        var = m.group("var")
        if var not in variables:
            raise ConfigError(f"unknown variable {var!r}", field=where)
        return ("trig", (m.group("fn"), variables[var]))
    m = _POWER.match(token)
    if m:
        var = m.group("var")
        if var not in variables:
            raise ConfigError(f"unknown variable {var!r}", field=where)
        p = float(m.group("pow")) if m.group("pow") else 1.0
        return ("pow", (variables[var], p))
    raise ConfigError(f"cannot parse factor {token!r}", field=where)


def _parse_term(term: str, variables: dict[str, int], where: str) -> Callable[[np.ndarray], complex]:
    term = term.strip()
    if not term:
        raise ConfigError("empty term", field=where)
    m = _GAUSSIAN.match(term)
    if m:
        amp = _number(m.group(1).strip(), where)
        width = _number(m.group(2).strip(), where)
        if width <= 0:
            raise ConfigError("gaussian width must be positive", field=where)

        def gauss(x):
            return amp * math.exp(-float(np.sum(np.square(x))) / width)

        return gauss

    factors = [_parse_factor(f, variables, where) for f in term.split("*")]

    def evaluate(x):
        out = 1.0 + 0.0j
        for kind, payload in factors:
            if kind == "const":
                out *= payload
            elif kind == "pow":
                idx, p = payload
                base = complex(x[idx])
                out *= base**p
            else:
                fn, idx = payload
                out *= math.sin(float(x[idx])) if fn == "sin" else math.cos(float(x[idx]))
        return out

    return evaluate


def _parse_sum(expr: str, variables: dict[str, int], where: str) -> Callable[[np.ndarray], complex]:
    if not isinstance(expr, str) or not expr.strip():
        raise ConfigError("expression must be a non-empty string", field=where)
    terms = [_parse_term(t, variables, where) for t in expr.split("+")]

    def evaluate(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return complex(sum(t(x) for t in terms))

    return evaluate


def parse_target(expr: str, dim: int = 2, where: str = "target") -> Callable[[np.ndarray], complex]:
    """Observable q(x) over the state space."""
    variables = {f"x{i + 1}": i for i in range(dim)}
    return _parse_sum(expr, variables, where)


def parse_data_fn(expr: str, where: str = "h") -> Callable[[float], complex]:
    """Data function h(s) over the manifold parameter."""
    inner = _parse_sum(expr, {"s": 0}, where)

    def evaluate(s: float) -> complex:
        return inner(np.array([float(s)]))

    return evaluate
