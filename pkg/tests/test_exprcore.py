"""Expression kernel: grammar, differentiation, normalization, numeric
evaluation, and the three-valued zero test."""

import math
import random

import pytest
import sympy as sp

from poissonsym.exprcore import (EvaluationError, ParseError, SymbolTable,
                                 UnknownSymbolError, Verdict, ZeroTestPolicy,
                                 diff, eval_num, is_zero, normalize, parse,
                                 to_grammar)

from conftest import PROPERTY_SEED


@pytest.fixture(scope="module")
def table():
    return SymbolTable(["x", "y", "z"])


# ---------------------------------------------------------------------------
# parsing

class TestParse:
    def test_exp_product(self, table):
        x = table.lookup("x")
        assert parse("exp(2*x)", table) == sp.exp(2 * x)

    def test_rational_power_of_sum(self, table):
        x, y, z = (table.lookup(n) for n in "xyz")
        expected = 1 / (1 + x**2 + y**2 + z**2) ** 2
        assert normalize(parse("1/(1+x^2+y^2+z^2)^2", table) - expected) == 0

    def test_double_caret_is_error_at_offset_2(self, table):
        with pytest.raises(ParseError) as err:
            parse("x^^2", table)
        assert err.value.offset == 2

    def test_unknown_identifier(self, table):
        with pytest.raises(UnknownSymbolError):
            parse("x + w", table)

    def test_malformed_number(self, table):
        with pytest.raises(ParseError):
            parse("1.", table)

    def test_power_right_associative(self, table):
        assert parse("2^3^2", table) == 512

    def test_unary_minus_binds_below_power(self, table):
        x = table.lookup("x")
        assert normalize(parse("-x^2", table) + x**2) == 0

    def test_precedence(self, table):
        x, y = table.lookup("x"), table.lookup("y")
        assert normalize(parse("2*x+3*y/2", table)
                         - (2 * x + sp.Rational(3, 2) * y)) == 0

    def test_jet_symbols(self, table):
        assert parse("u_xy", table) is parse("u_yx", table)
        assert parse("u_x * u", table) == table.jet1(0) * table.u

    def test_functions(self, table):
        z = table.lookup("z")
        assert parse("ln(z)", table) == sp.log(z)
        assert parse("sqrt(z)", table) == sp.sqrt(z)


# ---------------------------------------------------------------------------
# differentiation

class TestDiff:
    def test_chain_rule_exp(self, table):
        x = table.lookup("x")
        assert normalize(diff(sp.exp(2 * x), x) - 2 * sp.exp(2 * x)) == 0

    def test_jets_independent(self, table):
        u1, u2 = table.jet1(0), table.jet1(1)
        assert diff(u1 * u2, u1) == u2

    def test_power_rule(self, table):
        z = table.lookup("z")
        assert normalize(diff(1 / z**2, z) + 2 / z**3) == 0

    def test_linearity(self, table):
        x, y = table.lookup("x"), table.lookup("y")
        e1, e2 = x**3 * y, sp.exp(x) / (1 + y**2)
        lhs = diff(2 * e1 + 3 * e2, x)
        rhs = 2 * diff(e1, x) + 3 * diff(e2, x)
        assert normalize(lhs - rhs) == 0


# ---------------------------------------------------------------------------
# normalization

class TestNormalize:
    def test_collects_like_terms(self, table):
        x = table.lookup("x")
        assert normalize(x + x) == 2 * x

    def test_cancels_rational(self, table):
        z = table.lookup("z")
        assert normalize(z**2 * (1 / z**2)) == 1

    def test_merges_exponentials(self, table):
        x = table.lookup("x")
        assert normalize(sp.exp(2 * x) * sp.exp(-2 * x)) == 1

    def test_idempotent_on_generated_expressions(self, property_expressions):
        _, exprs = property_expressions
        for e in exprs:
            n = normalize(e)
            assert normalize(n) == n


# ---------------------------------------------------------------------------
# numeric evaluation

class TestEvalNum:
    def test_rational(self, table):
        z = table.lookup("z")
        assert eval_num(1 / z**2, {z: 2.0}) == pytest.approx(0.25)

    def test_exp_at_zero(self, table):
        x = table.lookup("x")
        assert eval_num(sp.exp(2 * x), {x: 0.0}) == pytest.approx(1.0)

    def test_log_negative_is_error(self, table):
        z = table.lookup("z")
        with pytest.raises(EvaluationError):
            eval_num(sp.log(z), {z: -1.0})

    def test_unbound_symbol_is_error(self, table):
        with pytest.raises(EvaluationError):
            eval_num(table.lookup("x") + table.lookup("y"),
                     {table.lookup("x"): 1.0})

    def test_division_by_zero_is_error(self, table):
        z = table.lookup("z")
        with pytest.raises(EvaluationError):
            eval_num(1 / z, {z: 0.0})


# ---------------------------------------------------------------------------
# zero test

class TestIsZero:
    def test_binomial_identity(self, table):
        x, y = table.lookup("x"), table.lookup("y")
        e = (x + y) ** 2 - x**2 - 2 * x * y - y**2
        assert is_zero(e) is Verdict.ZERO

    def test_jet_commutativity(self, table):
        u1, u2 = table.jet1(0), table.jet1(1)
        assert is_zero(u1 * u2 - u2 * u1) is Verdict.ZERO

    def test_x_minus_y_nonzero(self, table):
        assert is_zero(table.lookup("x") - table.lookup("y")) is Verdict.NONZERO

    def test_transcendental_identity(self, table):
        x = table.lookup("x")
        e = sp.sinh(x) ** 2 - sp.cosh(x) ** 2 + 1
        assert is_zero(e) is not Verdict.NONZERO

    def test_small_but_nonzero_constant_factor(self, table):
        x = table.lookup("x")
        assert is_zero(sp.Rational(1, 100) * x) is Verdict.NONZERO

    def test_box_respected(self, table):
        z = table.lookup("z")
        pol = ZeroTestPolicy(box={z: (0.5, 2.0)})
        assert is_zero(sp.log(z) - sp.log(z), pol) is Verdict.ZERO


# ---------------------------------------------------------------------------
# printing round-trip

class TestToGrammar:
    def test_round_trip_examples(self, table):
        for text in ("exp(2*x)", "1/(1+x^2+y^2+z^2)^2", "u_x*u_y - ln(z)",
                     "-x^2 + 3/4*y"):
            e = parse(text, table)
            assert normalize(parse(to_grammar(e), table) - e) == 0

    def test_round_trip_generated(self, property_expressions):
        table, exprs = property_expressions
        for e in exprs[:200]:
            n = normalize(e)
            assert normalize(parse(to_grammar(n), table) - n) == 0


# ---------------------------------------------------------------------------
# derivative / finite-difference agreement

def _try_eval(e, bindings):
    try:
        return eval_num(e, bindings)
    except EvaluationError:
        return None


def finite_difference_agrees(e, s, bindings, exact):
    """Central difference at shrinking steps; matches within 1e-6 relative."""
    base = bindings[s]
    for h in (1e-4, 1e-5, 1e-6):
        step = h * (1.0 + abs(base))
        up = _try_eval(e, {**bindings, s: base + step})
        dn = _try_eval(e, {**bindings, s: base - step})
        if up is None or dn is None:
            continue
        fd = (up - dn) / (2 * step)
        if abs(fd - exact) <= 1e-6 * (1.0 + abs(exact) + abs(fd)):
            return True
    return False


def test_diff_matches_finite_difference(property_expressions):
    table, exprs = property_expressions
    rng = random.Random(PROPERTY_SEED + 1)
    checked = 0
    for e in exprs:
        free = sorted(e.free_symbols, key=str)
        s = rng.choice(free)
        d = diff(e, s)
        agreed = False
        for _ in range(8):
            bindings = {sym: rng.uniform(0.3, 1.7) for sym in free}
            val = _try_eval(e, bindings)
            exact = _try_eval(d, bindings)
            if val is None or exact is None or abs(exact) > 1e6:
                continue
            assert finite_difference_agrees(e, s, bindings, exact), \
                f"finite difference mismatch for {e} d/d{s} at {bindings}"
            agreed = True
            break
        if agreed:
            checked += 1
    # nearly every generated expression must admit at least one good point
    assert checked >= int(0.95 * len(exprs))
