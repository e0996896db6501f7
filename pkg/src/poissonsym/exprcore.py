"""Symbolic expression kernel.

Thin, contract-enforcing layer over sympy: a fixed input grammar, exact
rational constants, a normal form for rational expressions with opaque
transcendental kernels, numeric evaluation that refuses to return NaN/Inf,
and a sampling+canonicalization zero test.  Everything upstream (tensor
calculus, determining equations, Noether machinery) speaks this dialect.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import sympy as sp

Expr = sp.Expr

#: function identifiers accepted by the grammar
FUNCTIONS = {
    "exp": sp.exp,
    "ln": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "sqrt": sp.sqrt,
}


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error with the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownSymbolError(ExprError):
    pass


class EvaluationError(ExprError):
    pass


class SymbolTable:
    """Coordinates, the dependent variable u, jet symbols and free parameters.

    Jet symbols follow the manifest convention: u, u_x, u_xx, u_xy, ...
    built from the coordinate names; u_xy and u_yx are the same symbol.
    """

    def __init__(self, coords: Sequence[str], dependent: str = "u",
                 params: Sequence[str] = ()):
        names = list(coords) + [dependent] + list(params)
        if len(set(names)) != len(names):
            raise ExprError(f"duplicate symbol names in {names}")
        self.coord_names = list(coords)
        self.coords = [sp.Symbol(c, real=True) for c in coords]
        self.u = sp.Symbol(dependent, real=True)
        self.params = [sp.Symbol(p, real=True) for p in params]

        n = len(coords)
        self.first_jets = [sp.Symbol(f"{dependent}_{c}", real=True)
                           for c in coords]
        self.second_jets: dict[tuple[int, int], sp.Symbol] = {}
        for i in range(n):
            for j in range(i, n):
                self.second_jets[(i, j)] = sp.Symbol(
                    f"{dependent}_{coords[i]}{coords[j]}", real=True)

        self._by_name: dict[str, sp.Symbol] = {}
        for name, sym in zip(coords, self.coords):
            self._by_name[name] = sym
        self._by_name[dependent] = self.u
        for name, sym in zip(params, self.params):
            self._by_name[name] = sym
        for i, sym in enumerate(self.first_jets):
            self._by_name[f"{dependent}_{coords[i]}"] = sym
        for (i, j), sym in self.second_jets.items():
            self._by_name[f"{dependent}_{coords[i]}{coords[j]}"] = sym
            self._by_name[f"{dependent}_{coords[j]}{coords[i]}"] = sym

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def lookup(self, name: str) -> sp.Symbol:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownSymbolError(f"unknown symbol '{name}'") from None

    def jet1(self, i: int) -> sp.Symbol:
        return self.first_jets[i]

    def jet2(self, i: int, j: int) -> sp.Symbol:
        return self.second_jets[(min(i, j), max(i, j))]

    def all_jets(self) -> list[sp.Symbol]:
        return [self.u] + list(self.first_jets) + list(self.second_jets.values())


# ---------------------------------------------------------------------------
# parsing

_OPERATORS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPERATORS:
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                if j >= n or not text[j].isdigit():
                    raise ParseError("malformed number", i)
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(("NUMBER", text[i:j], i))
            i = j
            continue
        if c.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("IDENT", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character '{c}'", i)
    tokens.append(("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, table: SymbolTable):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.table = table

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(f"expected '{kind}'", tok[2])
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "EOF":
            raise ParseError("unexpected trailing input", tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            rhs = self.factor()
            e = e * rhs if op == "*" else e / rhs
        return e

    def factor(self) -> Expr:
        if self.peek()[0] == "-":
            self.advance()
            return -self.factor()
        b = self.base()
        if self.peek()[0] == "^":
            self.advance()
            return b ** self.factor()
        return b

    def base(self) -> Expr:
        tok = self.advance()
        kind, text, offset = tok
        if kind == "NUMBER":
            if "." in text:
                whole, frac = text.split(".")
                return sp.Rational(int(whole + frac), 10 ** len(frac))
            return sp.Integer(int(text))
        if kind == "IDENT":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function '{text}'", offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[text](arg)
            return self.table.lookup(text)
        if kind == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token '{text or kind}'", offset)


def parse(text: str, table: SymbolTable) -> Expr:
    """Parse text under the fixed grammar; unknown identifiers are an error."""
    return _Parser(text, table).parse()


def to_grammar(e: Expr) -> str:
    """Print an expression in the same grammar `parse` accepts."""
    return sp.sstr(e).replace("**", "^").replace("log(", "ln(")


# ---------------------------------------------------------------------------
# normalization / differentiation / evaluation

def _normalize_function_args(e: Expr) -> Expr:
    if isinstance(e, sp.Function):
        return e.func(*[normalize(a) for a in e.args])
    if e.args:
        return e.func(*[_normalize_function_args(a) for a in e.args])
    return e


def normalize(e: Expr) -> Expr:
    """Idempotent, semantics-preserving normal form.

    Rational subexpressions go to a common-denominator canonical form
    (sympy `cancel`); exponentials are merged (exp(a)*exp(b) -> exp(a+b));
    other transcendental kernels are opaque generators with normalized
    arguments.
    """
    e = sp.sympify(e)
    e = _normalize_function_args(e)
    e = sp.powsimp(e, deep=True, combine="exp")
    return sp.cancel(e)


def diff(e: Expr, s: sp.Symbol) -> Expr:
    """Exact partial derivative; jet symbols are independent variables."""
    return normalize(sp.diff(sp.sympify(e), s))


def eval_num(e: Expr, bindings: Mapping[sp.Symbol, float]) -> float:
    """IEEE double evaluation; NaN/Inf/complex results raise, never leak."""
    e = sp.sympify(e)
    free = e.free_symbols
    missing = free - set(bindings)
    if missing:
        raise EvaluationError(f"unbound symbols: {sorted(map(str, missing))}")
    try:
        val = e.evalf(subs={s: sp.Float(v) for s, v in bindings.items()
                            if s in free})
        cval = complex(val)
    except (TypeError, ValueError, ZeroDivisionError, OverflowError):
        raise EvaluationError(f"evaluation failed for {e}") from None
    if not (math.isfinite(cval.real) and math.isfinite(cval.imag)):
        raise EvaluationError(f"non-finite result {cval}")
    if abs(cval.imag) > 1e-12 * (1.0 + abs(cval.real)):
        raise EvaluationError(f"complex result {cval}")
    return cval.real


# ---------------------------------------------------------------------------
# zero testing

class Verdict(Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ZeroTestPolicy:
    """Sampling policy for the numeric half of the zero test.

    `box` gives per-symbol safe ranges (e.g. z in [0.5, 2] on upper-half-space
    charts); symbols not listed use `default_range`.  A Zero verdict needs the
    canonical form to vanish *and* every sample to stay below the scaled
    tolerance; a single sample above the margin certifies NonZero.
    """

    samples: int = 16
    abs_tol: float = 1e-9
    nonzero_margin: float = 1e-3
    box: Mapping[sp.Symbol, tuple[float, float]] = field(default_factory=dict)
    default_range: tuple[float, float] = (-2.0, 2.0)
    seed: int = 1234

    def draw(self, rng: random.Random, sym: sp.Symbol) -> float:
        lo, hi = self.box.get(sym, self.default_range)
        return rng.uniform(lo, hi)


def _sample(e: Expr, policy: ZeroTestPolicy):
    """Evaluate e (and a magnitude scale) at the policy's sample points."""
    free = sorted(e.free_symbols, key=str)
    terms = list(e.args) if e.is_Add else [e]
    fn = sp.lambdify(free, [e] + terms, "math")
    rng = random.Random(policy.seed)
    values, scales = [], []
    attempts = 0
    while len(values) < policy.samples and attempts < policy.samples * 10:
        attempts += 1
        point = [policy.draw(rng, s) for s in free]
        try:
            vals = fn(*point)
        except (ValueError, ZeroDivisionError, OverflowError):
            continue
        if any(isinstance(v, complex) or not math.isfinite(v) for v in vals):
            continue
        values.append(abs(vals[0]))
        scales.append(max(abs(v) for v in vals[1:]) if len(vals) > 1 else 0.0)
    return values, scales


def is_zero(e: Expr, policy: ZeroTestPolicy | None = None) -> Verdict:
    """Three-valued zero test: canonicalization plus safe-box sampling.

    Inconclusive is reported, never silently treated as zero.
    """
    policy = policy or ZeroTestPolicy()
    e = sp.sympify(e)
    if e.args:
        # cheap pre-screen: a sample clearly above the margin certifies
        # NonZero without paying for canonicalization of large expressions
        values, scales = _sample(e, policy)
        if values and max(values) > policy.nonzero_margin * (1.0 + max(scales)):
            return Verdict.NONZERO
        if values and max(values) <= policy.abs_tol * (1.0 + max(scales)):
            # numerics say zero; try the cheap exact certificate (expanded
            # numerator over a common denominator) before the expensive one
            num, _ = sp.fraction(sp.together(e))
            if sp.expand(num) == 0:
                return Verdict.ZERO
    n = normalize(e)
    if n == 0:
        return Verdict.ZERO
    if n.is_Number:
        return Verdict.NONZERO
    values, scales = _sample(n, policy)
    if not values:
        return Verdict.INCONCLUSIVE
    scale = 1.0 + max(scales)
    if max(values) > policy.nonzero_margin * scale:
        return Verdict.NONZERO
    if max(values) <= policy.abs_tol * scale:
        # numerics say zero; demand a symbolic certificate before agreeing
        if sp.simplify(n) == 0:
            return Verdict.ZERO
    return Verdict.INCONCLUSIVE
