"""Sparse multivariate polynomials: parsing, arithmetic, evaluation, derivatives.

A polynomial over ``nvars`` real variables is stored as a map from exponent
tuples to nonzero double coefficients (canonical form: no duplicate exponent
tuples, no zero terms).  Everything downstream of this module consumes these
objects, so operations here are exact at the level of coefficient arithmetic
and evaluation uses compensated summation across terms.

Expression grammar accepted by :func:`parse_polynomial` (whitespace ignored):

    expr   := ("+"|"-")? term (("+"|"-") term)*
    term   := factor ("*" factor)*
    factor := number | var ("^" uint)? | "(" expr ")"
    var    := "x" uint | "x" | "y" | "z"

Variables are named ``x1 .. x<nvars>``; the aliases ``x, y, z`` are accepted
when nvars <= 3.  Numbers are decimal literals with optional exponent part.
Division and non-integer exponents are rejected as non-polynomial.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Polynomial",
    "ParseError",
    "parse_polynomial",
]

_ALIASES = {"x": 0, "y": 1, "z": 2}

_TOKEN_RE = re.compile(
    r"""
      (?P<num>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
    | (?P<var>x\d+|[xyz])
    | (?P<op>[-+*^()/])
    | (?P<bad>\S)
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    """Syntax or semantic error in a polynomial expression; carries the offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, float] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be a positive integer")
        canonical: dict[tuple[int, ...], float] = {}
        if terms:
            for exps, coeff in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != nvars or any(e < 0 for e in exps):
                    raise ValueError(f"bad exponent tuple {exps} for nvars={nvars}")
                c = canonical.get(exps, 0.0) + float(coeff)
                if c == 0.0:
                    canonical.pop(exps, None)
                else:
                    canonical[exps] = c
        object.__setattr__(self, "nvars", int(nvars))
        object.__setattr__(self, "_terms", canonical)

    def __setattr__(self, *args):  # pragma: no cover - immutability guard
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: float(value)})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for nvars={nvars}")
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1.0})

    @classmethod
    def monomial(cls, nvars: int, exps: Iterable[int], coeff: float = 1.0) -> "Polynomial":
        return cls(nvars, {tuple(exps): float(coeff)})

    # -- structure ----------------------------------------------------------

    @property
    def terms(self) -> list[tuple[float, tuple[int, ...]]]:
        """Terms as (coefficient, exponents), graded-lexicographic descending."""
        order = sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)
        return [(c, e) for e, c in order]

    @property
    def degree(self) -> float:
        """Total degree; -inf for the zero polynomial."""
        if not self._terms:
            return float("-inf")
        return float(max(sum(e) for e in self._terms))

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    # -- ring operations -----------------------------------------------------

    def _check_compatible(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"mixed variable counts: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compatible(other)
        out = dict(self._terms)
        for exps, c in other._terms.items():
            out[exps] = out.get(exps, 0.0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                return Polynomial.zero(self.nvars)
            return Polynomial(self.nvars, {e: c * other for e, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compatible(other)
        out: dict[tuple[int, ...], float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                exps = tuple(a + b for a, b in zip(e1, e2))
                out[exps] = out.get(exps, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial power requires a non-negative integer exponent")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- calculus ------------------------------------------------------------

    def partial(self, index: int) -> "Polynomial":
        """Exact partial derivative with respect to variable ``index``."""
        out: dict[tuple[int, ...], float] = {}
        for exps, c in self._terms.items():
            e = exps[index]
            if e:
                reduced = list(exps)
                reduced[index] = e - 1
                key = tuple(reduced)
                out[key] = out.get(key, 0.0) + c * e
        return Polynomial(self.nvars, out)

    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.partial(i) for i in range(self.nvars))

    # -- evaluation ----------------------------------------------------------

    def eval(self, point) -> float:
        """Value at a point, summed term by term with Neumaier compensation."""
        x = np.asarray(point, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.nvars},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("point coordinates must be finite")
        total = 0.0
        comp = 0.0
        for exps, c in self._terms.items():
            v = c
            for xi, e in zip(x, exps):
                if e:
                    v *= xi**e
            t = total + v
            if abs(total) >= abs(v):
                comp += (total - t) + v
            else:
                comp += (v - t) + total
            total = t
        return total + comp

    def eval_many(self, points) -> np.ndarray:
        """Vectorized evaluation over an (m, nvars) array of points."""
        xs = np.asarray(points, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.nvars:
            raise ValueError(f"points have shape {xs.shape}, expected (m, {self.nvars})")
        m = xs.shape[0]
        total = np.zeros(m)
        comp = np.zeros(m)
        for exps, c in self._terms.items():
            v = np.full(m, c)
            for i, e in enumerate(exps):
                if e:
                    v = v * xs[:, i] ** e
            t = total + v
            big = np.abs(total) >= np.abs(v)
            comp += np.where(big, (total - t) + v, (v - t) + total)
            total = t
        return total + comp

    def __call__(self, point) -> float:
        return self.eval(point)

    # -- printing ------------------------------------------------------------

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts: list[str] = []
        for coeff, exps in self.terms:
            factors = []
            for i, e in enumerate(exps):
                if e == 1:
                    factors.append(f"x{i + 1}")
                elif e > 1:
                    factors.append(f"x{i + 1}^{e}")
            mono = "*".join(factors)
            mag = abs(coeff)
            if mono and mag == 1.0:
                body = mono
            elif mono:
                body = f"{mag!r}*{mono}"
            else:
                body = repr(mag)
            if not parts:
                parts.append(body if coeff > 0 else f"-{body}")
            else:
                parts.append(f"{'+' if coeff > 0 else '-'} {body}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r}, nvars={self.nvars})"


# -- parser -------------------------------------------------------------------


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    for m in _TOKEN_RE.finditer(src):
        gap = src[pos : m.start()]
        if gap.strip():
            raise ParseError(f"unexpected character {gap.strip()[0]!r}", pos)
        kind = m.lastgroup
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}", m.start())
        tokens.append((kind, m.group(), m.start()))
        pos = m.end()
    if src[pos:].strip():
        raise ParseError(f"unexpected character {src[pos:].strip()[0]!r}", pos)
    tokens.append(("end", "", len(src)))
    return tokens


def _variable_index(name: str, nvars: int, pos: int) -> int:
    if len(name) > 1 and name[0] == "x" and name[1:].isdigit():
        k = int(name[1:])
        if not 1 <= k <= nvars:
            raise ParseError(f"unknown variable {name!r} (valid: x1..x{nvars})", pos)
        return k - 1
    if nvars <= 3 and name in _ALIASES and _ALIASES[name] < nvars:
        return _ALIASES[name]
    raise ParseError(f"unknown variable {name!r} (valid: x1..x{nvars})", pos)


class _Parser:
    def __init__(self, src: str, nvars: int):
        self.tokens = _tokenize(src)
        self.nvars = nvars
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        poly = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if text == "/":
                raise ParseError("non-polynomial construct: division", pos)
            raise ParseError(f"unexpected token {text!r}", pos)
        return poly

    def expr(self) -> Polynomial:
        kind, text, _ = self.peek()
        negate = False
        if kind == "op" and text in "+-":
            self.advance()
            negate = text == "-"
        poly = self.term()
        if negate:
            poly = -poly
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.term()
                poly = poly - rhs if text == "-" else poly + rhs
            elif kind == "op" and text == "/":
                raise ParseError("non-polynomial construct: division", pos)
            else:
                return poly

    def term(self) -> Polynomial:
        poly = self.factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text == "*":
                self.advance()
                poly = poly * self.factor()
            elif kind == "op" and text == "/":
                raise ParseError("non-polynomial construct: division", pos)
            else:
                return poly

    def factor(self) -> Polynomial:
        kind, text, pos = self.advance()
        if kind == "num":
            return Polynomial.constant(self.nvars, float(text))
        if kind == "var":
            index = _variable_index(text, self.nvars, pos)
            exponent = 1
            k2, t2, p2 = self.peek()
            if k2 == "op" and t2 == "^":
                self.advance()
                k3, t3, p3 = self.advance()
                if k3 == "op" and t3 in "+-":
                    raise ParseError("non-integer exponent: sign not allowed after '^'", p3)
                if k3 != "num" or not t3.isdigit():
                    raise ParseError(f"non-integer exponent {t3!r}", p3)
                exponent = int(t3)
            exps = [0] * self.nvars
            exps[index] = exponent
            return Polynomial.monomial(self.nvars, exps)
        if kind == "op" and text == "(":
            poly = self.expr()
            k2, t2, p2 = self.advance()
            if not (k2 == "op" and t2 == ")"):
                raise ParseError("expected ')'", p2)
            return poly
        if kind == "op" and text == "/":
            raise ParseError("non-polynomial construct: division", pos)
        raise ParseError(f"expected a number, variable or '(', got {text!r}", pos)


def parse_polynomial(src: str, nvars: int) -> Polynomial:
    """Parse an expression into canonical form.

    Raises :class:`ParseError` with the offending position for syntax errors,
    non-polynomial constructs (division, fractional or negative exponents)
    and unknown variables.
    """
    if not isinstance(nvars, int) or nvars < 1:
        raise ValueError("nvars must be a positive integer")
    return _Parser(src, nvars).parse()
