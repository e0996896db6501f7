"""Determining equations: the equation builder, symmetry verification,
nonlinearity-case routing, and the linear-ansatz solver."""

import pytest
import sympy as sp

from poissonsym import catalog
from poissonsym.detsys import (AnsatzBasis, DetSysError, NonlinearityClass,
                               NonlinearityTag, SolverOptions,
                               SymmetryGenerator, classify,
                               determining_residuals, poisson_equation,
                               scaling_gradient_residuals)
from poissonsym.exprcore import Verdict, is_zero, normalize
from poissonsym.geom import VectorField


@pytest.fixture(scope="module")
def flat():
    return catalog.load("euclidean")


@pytest.fixture(scope="module")
def zero_xi(flat):
    return VectorField(flat.space, [0, 0, 0])


def dilation(fix):
    M = fix.space
    return VectorField(M, list(M.coords))


# ---------------------------------------------------------------------------
# equation builder

def test_poisson_equation_flat(flat):
    M = flat.space
    T = M.table
    cls = NonlinearityClass.linear(T.u)
    H = poisson_equation(M, cls)
    expected = T.jet2(0, 0) + T.jet2(1, 1) + T.jet2(2, 2) + T.u
    assert normalize(H - expected) == 0


def test_poisson_equation_hyperbolic():
    M = catalog.load("hyperbolic3").space
    T = M.table
    z = M.coords[2]
    cls = NonlinearityClass.exponential(T.u)
    H = poisson_equation(M, cls)
    expected = (z**2 * (T.jet2(0, 0) + T.jet2(1, 1) + T.jet2(2, 2))
                - z * T.jet1(2) + sp.exp(T.u))
    assert is_zero(H - expected, M.policy()) is Verdict.ZERO


def test_poisson_equation_sol():
    M = catalog.load("sol").space
    T = M.table
    x = M.coords[0]
    cls = NonlinearityClass.zero(T.u)
    H = poisson_equation(M, cls)
    expected = (T.jet2(0, 0) + sp.exp(-2 * x) * T.jet2(1, 1)
                + sp.exp(2 * x) * T.jet2(2, 2))
    assert is_zero(H - expected, M.policy()) is Verdict.ZERO


# ---------------------------------------------------------------------------
# nonlinearity-case routing

def test_power_routes_to_critical():
    u = sp.Symbol("u", real=True)
    assert NonlinearityClass.power(u, 5, 3).tag is NonlinearityTag.CRITICAL
    assert NonlinearityClass.power(u, 3, 3).tag is NonlinearityTag.POWER
    assert NonlinearityClass.power(u, 2, 6).tag is NonlinearityTag.P2N6
    assert NonlinearityClass.power(u, 2, 4).tag is NonlinearityTag.POWER


def test_power_rejects_degenerate_exponents():
    u = sp.Symbol("u", real=True)
    for p in (0, 1):
        with pytest.raises(DetSysError):
            NonlinearityClass.power(u, p, 3)


def test_constant_rejects_zero():
    u = sp.Symbol("u", real=True)
    with pytest.raises(DetSysError):
        NonlinearityClass.constant(u, 0)


def test_generator_rejects_jet_dependent_coefficients(flat):
    M = flat.space
    with pytest.raises(DetSysError):
        SymmetryGenerator(VectorField(M, [1, 0, 0]), M.table.u, sp.Integer(0))


def test_generator_eta(flat):
    M = flat.space
    gen = SymmetryGenerator(VectorField(M, [0, 0, 0]),
                            sp.Integer(2), M.coords[0])
    assert normalize(gen.eta() - (2 * M.table.u + M.coords[0])) == 0


# ---------------------------------------------------------------------------
# symmetry verification

def test_killing_field_solves_arbitrary_case(flat):
    M = flat.space
    cls = NonlinearityClass.arbitrary(M.table.u)
    gen = SymmetryGenerator(VectorField(M, [1, 0, 0]),
                            sp.Integer(0), sp.Integer(0))
    rep = determining_residuals(M, gen, cls)
    assert rep.verdict
    assert rep.mu == 0


def test_critical_dilation_is_symmetry(flat):
    M = flat.space
    cls = NonlinearityClass.power(M.table.u, 5, 3)
    gen = SymmetryGenerator(dilation(flat), sp.Rational(-1, 2), sp.Integer(0))
    rep = determining_residuals(M, gen, cls)
    assert rep.verdict
    assert normalize(rep.mu - 2) == 0


def test_exponential_dilation_is_symmetry(flat):
    M = flat.space
    cls = NonlinearityClass.exponential(M.table.u)
    gen = SymmetryGenerator(dilation(flat), sp.Integer(0), sp.Integer(-2))
    assert determining_residuals(M, gen, cls).verdict


def test_wrong_multiplier_is_not_symmetry(flat):
    M = flat.space
    cls = NonlinearityClass.power(M.table.u, 5, 3)
    gen = SymmetryGenerator(dilation(flat), sp.Integer(0), sp.Integer(0))
    rep = determining_residuals(M, gen, cls)
    assert not rep.verdict
    assert is_zero(rep.nonlinearity_residual, M.policy()) is not Verdict.ZERO


def test_constant_case_balance_requirement(flat):
    """f = k needs (mu - a) k + Delta b = 0; a pure dilation violates it."""
    M = flat.space
    cls = NonlinearityClass.constant(M.table.u)  # symbolic k != 0
    trans = SymmetryGenerator(VectorField(M, [0, 1, 0]),
                              sp.Integer(0), sp.Integer(0))
    assert determining_residuals(M, trans, cls).verdict
    dil = SymmetryGenerator(dilation(flat), sp.Integer(0), sp.Integer(0))
    assert not determining_residuals(M, dil, cls).verdict


def test_linear_case_vertical_scaling(flat, zero_xi):
    M = flat.space
    cls = NonlinearityClass.linear(M.table.u)
    gen = SymmetryGenerator(zero_xi, sp.Integer(1), sp.Integer(0))
    assert determining_residuals(M, gen, cls).verdict


def test_scaling_gradient_chain_on_special_conformal(flat):
    """For a verified critical-case symmetry, grad(a - mu) must equal
    ((n+2)/(n-2)) grad a componentwise."""
    gen = flat.generator("R8")
    M = flat.space
    cls = NonlinearityClass.power(M.table.u, 5, 3)
    assert determining_residuals(M, gen, cls).verdict
    for res in scaling_gradient_residuals(M, gen):
        assert is_zero(res, M.policy()) is Verdict.ZERO


# ---------------------------------------------------------------------------
# linear-ansatz solver

def test_flat_arbitrary_case_recovers_isometries(flat):
    M = flat.space
    cls = NonlinearityClass.arbitrary(M.table.u)
    table = classify(M, cls, AnsatzBasis.polynomial(M, 2))
    assert table.dimension == 6
    assert not table.inconclusive
    for entry in table.entries:
        assert entry.label == "Isometry"
        assert not entry.violations


def test_sol_arbitrary_case_dimension():
    fix = catalog.load("sol")
    M = fix.space
    cls = NonlinearityClass.arbitrary(M.table.u)
    table = classify(M, cls, fix.basis)
    assert table.dimension == 3
    assert all(e.label == "Isometry" for e in table.entries)


def test_flat_power_and_exponential_dimensions_match(flat):
    """Both cases extend the 6 isometries by exactly the dilation."""
    M = flat.space
    basis = AnsatzBasis.polynomial(M, 2)
    dims = {}
    for name, cls in (("power3", NonlinearityClass.power(M.table.u, 3, 3)),
                      ("exp", NonlinearityClass.exponential(M.table.u))):
        table = classify(M, cls, basis)
        dims[name] = table.dimension
        labels = sorted(e.label for e in table.entries)
        assert labels.count("Homothety") == 1
        for entry in table.entries:
            assert not entry.violations
    assert dims["power3"] == dims["exp"] == 7


def test_solver_deterministic(flat):
    M = flat.space
    cls = NonlinearityClass.arbitrary(M.table.u)
    basis = AnsatzBasis.from_strings(M, ["1", "x", "y", "z"])
    t1 = classify(M, cls, basis, SolverOptions(seed=7))
    t2 = classify(M, cls, basis, SolverOptions(seed=7))
    xi1 = [[normalize(c) for c in e.generator.xi.components] for e in t1.entries]
    xi2 = [[normalize(c) for c in e.generator.xi.components] for e in t2.entries]
    assert xi1 == xi2


def test_empty_basis_rejected():
    with pytest.raises(DetSysError):
        AnsatzBasis([])
