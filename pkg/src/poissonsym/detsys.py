"""Symmetry determining equations for Delta_g u + f(u) = 0.

A point symmetry candidate is X = xi^i(x) d/dx^i + (a(x) u + b(x)) d/du.
It is an actual symmetry iff

    (S1)  L_xi g_ij = mu g_ij                     (xi conformal Killing)
    (S2)  a_i = ((2-n)/4) mu_i
    (S3)  a u f' + b f' + (mu - a) f
          + ((n-2)/(4(n-1))) (xi^i R_,i + mu R) u + Delta_g b = 0

with an equivalent form of (S3) that carries ((2-n)/4)(Delta_g mu) u in
place of the curvature term; the two agree for conformal xi because
Delta_g mu = -(1/(n-1))(xi^i R_,i + mu R).

`solve_linear_ansatz` reduces the system to exact linear algebra over a
finite function basis: residuals are linear in the ansatz coefficients,
so sampling them at enough points gives a matrix whose nullspace spans
the candidate generators; candidates are then re-verified symbolically.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import sympy as sp

from .exprcore import Expr, Verdict, is_zero, normalize, parse
from .geom import (
    GeometryError,
    MetricSpace,
    VectorField,
    conformal_factor,
    laplace_beltrami,
    lie_derivative_metric,
)


class DetSysError(Exception):
    pass


class NonlinearityTag(Enum):
    ARBITRARY = "arbitrary"
    ZERO = "zero"
    CONSTANT = "constant"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    POWER = "power"
    CRITICAL = "critical"
    P2N6 = "p2n6"


@dataclass(frozen=True)
class NonlinearityClass:
    """A nonlinearity case tag together with f and its antiderivative F.

    F is normalized by F(0) = 0.  For the arbitrary case f is kept as an
    opaque kernel F'(u) of an undefined antiderivative F(u), so total
    derivatives apply the chain rule; `opaque_substitutions` maps those
    kernels to plain symbols for numeric sampling.
    """

    tag: NonlinearityTag
    u: sp.Symbol
    f: Expr
    F: Expr
    p: sp.Rational | None = None
    k: Expr | None = None

    @staticmethod
    def arbitrary(u: sp.Symbol) -> "NonlinearityClass":
        F = sp.Function("F")(u)
        return NonlinearityClass(NonlinearityTag.ARBITRARY, u, F.diff(u), F)

    @staticmethod
    def zero(u: sp.Symbol) -> "NonlinearityClass":
        return NonlinearityClass(NonlinearityTag.ZERO, u,
                                 sp.Integer(0), sp.Integer(0))

    @staticmethod
    def constant(u: sp.Symbol, k: Expr | None = None) -> "NonlinearityClass":
        k = sp.Symbol("k", real=True, nonzero=True) if k is None else sp.sympify(k)
        if k.is_zero:
            raise DetSysError("constant nonlinearity requires k != 0")
        return NonlinearityClass(NonlinearityTag.CONSTANT, u, k, k * u, k=k)

    @staticmethod
    def linear(u: sp.Symbol) -> "NonlinearityClass":
        return NonlinearityClass(NonlinearityTag.LINEAR, u, u, u**2 / 2)

    @staticmethod
    def exponential(u: sp.Symbol) -> "NonlinearityClass":
        # F = e^u (not e^u - 1): keeps the scaling residual a clean multiple
        # of L; the constant is immaterial for currents since only isometries
        # are Noether here and Killing divergences annihilate constants
        return NonlinearityClass(NonlinearityTag.EXPONENTIAL, u,
                                 sp.exp(u), sp.exp(u))

    @staticmethod
    def power(u: sp.Symbol, p, n: int) -> "NonlinearityClass":
        p = sp.Rational(p)
        if p in (0, 1):
            raise DetSysError("power nonlinearity requires p not in {0, 1}")
        F = u**(p + 1) / (p + 1) if p != -1 else sp.log(u)
        if p == sp.Rational(n + 2, n - 2) and n != 6:
            tag = NonlinearityTag.CRITICAL
        elif p == 2 and n == 6:
            tag = NonlinearityTag.P2N6
        else:
            tag = NonlinearityTag.POWER
        return NonlinearityClass(tag, u, u**p, F, p=p)

    def fprime(self) -> Expr:
        return sp.diff(self.f, self.u)

    def opaque_substitutions(self) -> list:
        """Replace undefined-function kernels by plain symbols (high
        derivative order first) so expressions can be sampled numerically."""
        if self.tag is not NonlinearityTag.ARBITRARY:
            return []
        F, u = self.F, self.u
        return [(F.diff(u, 2), sp.Symbol("fprime_val", real=True)),
                (F.diff(u), sp.Symbol("f_val", real=True)),
                (F, sp.Symbol("F_val", real=True))]


def sampling_ready(e: Expr, cls: NonlinearityClass) -> Expr:
    for old, new in cls.opaque_substitutions():
        e = e.subs(old, new)
    return e


@dataclass
class SymmetryGenerator:
    """X = xi^i d/dx^i + (a u + b) d/du with a, b coordinate-only."""

    xi: VectorField
    a: Expr
    b: Expr
    c: sp.Rational | None = None

    def __post_init__(self):
        M = self.xi.space
        jets = set(M.table.all_jets())
        fixed = []
        for e in (self.a, self.b):
            if isinstance(e, str):
                e = parse(e, M.table)
            e = normalize(sp.sympify(e))
            if e.free_symbols & jets:
                raise DetSysError("a(x), b(x) must not depend on u or jets")
            fixed.append(e)
        self.a, self.b = fixed

    @property
    def space(self) -> MetricSpace:
        return self.xi.space

    def eta(self) -> Expr:
        return self.a * self.space.table.u + self.b


@dataclass
class DeterminingReport:
    conformal_residual: sp.Matrix          # (S1), n x n
    gradient_residual: list                # (S2), length n
    nonlinearity_residual: Expr            # (S3)
    mu: Expr
    verdict: bool
    max_samples: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


@dataclass
class AnsatzBasis:
    functions: list

    @staticmethod
    def from_strings(M: MetricSpace, texts) -> "AnsatzBasis":
        return AnsatzBasis([parse(t, M.table) for t in texts])

    @staticmethod
    def polynomial(M: MetricSpace, degree: int) -> "AnsatzBasis":
        monos = []
        for total in range(degree + 1):
            for powers in itertools.combinations_with_replacement(
                    range(M.n), total):
                m = sp.Integer(1)
                for i in powers:
                    m *= M.coords[i]
                monos.append(m)
        return AnsatzBasis(monos)

    def __post_init__(self):
        funcs = [normalize(sp.sympify(f)) for f in self.functions]
        if not funcs:
            raise DetSysError("empty ansatz basis")
        if len({sp.srepr(f) for f in funcs}) != len(funcs):
            raise DetSysError("ansatz basis functions not pairwise distinct")
        self.functions = funcs

    def __len__(self):
        return len(self.functions)


def poisson_equation(M: MetricSpace, cls: NonlinearityClass) -> Expr:
    """H = g^{ij} u_ij - Gamma^i u_i + f(u), cross-checked against the
    divergence-form expansion (1/sqrt g) D_i(sqrt g g^{ij} u_j) + f."""
    cache = M.__dict__.setdefault("_poisson_cache", {})
    key = sp.srepr(cls.f)
    if key in cache:
        return cache[key]
    n, T = M.n, M.table
    H = normalize(
        sum(M.g_inv[i, j] * T.jet2(i, j) for i in range(n) for j in range(n))
        - sum(M.gamma_contracted[i] * T.jet1(i) for i in range(n))
        + cls.f)
    sg = M.sqrt_det
    div_form = sum(
        sp.diff(sg * M.g_inv[i, j], M.coords[i]) * T.jet1(j)
        + sg * M.g_inv[i, j] * T.jet2(i, j)
        for i in range(n) for j in range(n)) / sg + cls.f
    if is_zero(sampling_ready(H - div_form, cls), M.policy()) is not Verdict.ZERO:
        raise DetSysError("Poisson equation forms disagree")
    cache[key] = H
    return H


def determining_residuals(M: MetricSpace, X: SymmetryGenerator,
                          cls: NonlinearityClass) -> DeterminingReport:
    if M.n < 3:
        raise GeometryError("symmetry classification needs dimension n >= 3")
    n, c, u = M.n, M.coords, cls.u
    pol = M.policy()
    warnings = []

    lg = lie_derivative_metric(M, X.xi)
    mu = normalize(sum(M.g_inv[i, j] * lg[j, i]
                       for i in range(n) for j in range(n)) / n)
    res1 = (lg - mu * M.g).applyfunc(normalize)
    res2 = [normalize(sp.diff(X.a, c[i]) - sp.Rational(2 - n, 4) * sp.diff(mu, c[i]))
            for i in range(n)]

    f, fp = cls.f, cls.fprime()
    R = M.scalar_curvature
    curv = sp.Rational(n - 2, 4 * (n - 1)) * (
        sum(X.xi[i] * sp.diff(R, c[i]) for i in range(n)) + mu * R)
    res3 = normalize(X.a * u * fp + X.b * fp + (mu - X.a) * f
                     + curv * u + laplace_beltrami(M, X.b))
    # equivalent form carrying ((2-n)/4)(Delta_g mu) u instead of the
    # curvature term; must agree whenever xi is conformal
    alt3 = normalize(X.a * u * fp + X.b * fp + (mu - X.a) * f
                     + sp.Rational(2 - n, 4) * laplace_beltrami(M, mu) * u
                     + laplace_beltrami(M, X.b))

    verdicts, max_samples = {}, {}
    v1 = [is_zero(res1[i, j], pol) for i in range(n) for j in range(i, n)]
    verdicts["conformal"] = v1
    v2 = [is_zero(r, pol) for r in res2]
    verdicts["gradient"] = v2
    v3 = is_zero(sampling_ready(res3, cls), pol)
    conformal_ok = all(v is Verdict.ZERO for v in v1)
    if conformal_ok:
        agree = is_zero(sampling_ready(res3 - alt3, cls), pol)
        if agree is not Verdict.ZERO:
            raise DetSysError("the two nonlinearity-residual forms disagree "
                              "for a conformal generator")
    for name, vs in (("conformal", v1), ("gradient", v2), ("nonlinearity", [v3])):
        if any(v is Verdict.INCONCLUSIVE for v in vs):
            warnings.append(f"inconclusive zero test in {name} residual")

    from .geom import _max_abs_sample
    max_samples["conformal"] = max(
        (_max_abs_sample(res1[i, j], pol) for i in range(n) for j in range(i, n)),
        default=0.0)
    max_samples["gradient"] = max((_max_abs_sample(r, pol) for r in res2),
                                  default=0.0)
    max_samples["nonlinearity"] = _max_abs_sample(sampling_ready(res3, cls), pol)

    verdict = (conformal_ok and all(v is Verdict.ZERO for v in v2)
               and v3 is Verdict.ZERO)
    return DeterminingReport(res1, res2, res3, mu, verdict, max_samples, warnings)


def scaling_gradient_residuals(M: MetricSpace, X: SymmetryGenerator) -> list:
    """lambda_i - ((n+2)/(n-2)) a_i with lambda = a - mu; vanishes whenever
    the conformal and gradient determining equations hold."""
    n, c = M.n, M.coords
    mu = conformal_factor(M, X.xi)
    lam = X.a - mu
    return [normalize(sp.diff(lam, x) - sp.Rational(n + 2, n - 2) * sp.diff(X.a, x))
            for x in c]


# ---------------------------------------------------------------------------
# linear-ansatz solver

@dataclass(frozen=True)
class SolverOptions:
    seed: int = 7
    oversample: int = 3           # sample rows >= oversample * unknowns
    rank_tol: float = 1e-8
    max_denominator: int = 10000


@dataclass
class SolveResult:
    generators: list               # symbolically verified
    inconclusive: list             # nullspace directions that failed re-check
    basis: AnsatzBasis
    nullspace_dim: int


def _includes_b(tag: NonlinearityTag) -> bool:
    # b is forced to zero only for pure power nonlinearities (including the
    # critical exponent); the exponential case needs b = -mu.
    return tag not in (NonlinearityTag.POWER, NonlinearityTag.CRITICAL)


def _unit_generators(M: MetricSpace, basis: AnsatzBasis, with_b: bool):
    """One SymmetryGenerator per ansatz coefficient (coefficient set to 1)."""
    zero = [sp.Integer(0)] * M.n
    units = []
    for i in range(M.n):
        for phi in basis.functions:
            comps = list(zero)
            comps[i] = phi
            units.append(SymmetryGenerator(VectorField(M, comps),
                                           sp.Integer(0), sp.Integer(0)))
    for phi in basis.functions:
        units.append(SymmetryGenerator(VectorField(M, list(zero)),
                                       phi, sp.Integer(0)))
    if with_b:
        for phi in basis.functions:
            units.append(SymmetryGenerator(VectorField(M, list(zero)),
                                           sp.Integer(0), phi))
    return units


def _residual_functions(M: MetricSpace, unit: SymmetryGenerator,
                        cls: NonlinearityClass):
    """Lambdified (S1)/(S2)/(S3) contributions of one unit coefficient."""
    n, c, u = M.n, M.coords, cls.u
    lg = lie_derivative_metric(M, unit.xi)
    mu = normalize(sum(M.g_inv[i, j] * lg[j, i]
                       for i in range(n) for j in range(n)) / n)
    r1 = [lg[i, j] - mu * M.g[i, j] for i in range(n) for j in range(i, n)]
    r2 = [sp.diff(unit.a, c[i]) - sp.Rational(2 - n, 4) * sp.diff(mu, c[i])
          for i in range(n)]
    f, fp = cls.f, cls.fprime()
    R = M.scalar_curvature
    r3 = (unit.a * u * fp + unit.b * fp + (mu - unit.a) * f
          + sp.Rational(n - 2, 4 * (n - 1)) * (
              sum(unit.xi[i] * sp.diff(R, c[i]) for i in range(n)) + mu * R) * u
          + laplace_beltrami(M, unit.b))
    r3 = sampling_ready(r3, cls)
    extra = sorted(
        (r3.free_symbols | {u}) - set(c), key=str)
    args = list(c) + extra
    fns1 = [sp.lambdify(c, e, "math") for e in r1 + r2]
    fn3 = sp.lambdify(args, r3, "math")
    return fns1, fn3, [str(s) for s in extra]


def solve_linear_ansatz(M: MetricSpace, cls: NonlinearityClass,
                        basis: AnsatzBasis,
                        options: SolverOptions = SolverOptions()) -> SolveResult:
    if M.n < 3:
        raise GeometryError("symmetry classification needs dimension n >= 3")
    with_b = _includes_b(cls.tag)
    units = _unit_generators(M, basis, with_b)
    U = len(units)
    compiled = [_residual_functions(M, un, cls) for un in units]
    extra_names = sorted({nm for _, _, names in compiled for nm in names})

    rng = random.Random(options.seed)
    pol = M.policy()
    rows_per_point = M.n * (M.n + 1) // 2 + M.n + 1
    n_points = max(2, (options.oversample * U) // rows_per_point + 2)
    rows = []
    made = 0
    while made < n_points:
        pt = [rng.uniform(*pol.box.get(s, pol.default_range)) for s in M.coords]
        extras = {nm: rng.uniform(-2.0, 2.0) for nm in extra_names}
        extras.setdefault(str(cls.u), rng.uniform(-2.0, 2.0))
        block = []
        try:
            for fns1, fn3, names in compiled:
                col = [f(*pt) for f in fns1]
                col.append(fn3(*pt, *[extras[nm] for nm in names]))
                block.append(col)
        except (ValueError, ZeroDivisionError, OverflowError, KeyError):
            continue
        if any(isinstance(v, complex) or not np.isfinite(v)
               for col in block for v in col):
            continue
        rows.extend(np.array(block).T)   # rows: residuals, cols: unknowns
        made += 1

    A = np.array(rows, dtype=float)
    _, sv, vt = np.linalg.svd(A)
    tol = options.rank_tol * (sv[0] if len(sv) and sv[0] > 0 else 1.0)
    null = vt[[i for i in range(len(vt)) if i >= len(sv) or sv[i] <= tol]]
    nullspace_dim = null.shape[0]

    generators, inconclusive = [], []
    for vec in _canonical_rows(null, options.max_denominator):
        gen = _vector_to_generator(M, basis, with_b, vec)
        rep = determining_residuals(M, gen, cls)
        (generators if rep.verdict else inconclusive).append(gen)
    return SolveResult(generators, inconclusive, basis, nullspace_dim)


def _canonical_rows(null: np.ndarray, max_den: int):
    """Float RREF of the nullspace followed by rationalization; the true
    solution spaces here have rational canonical bases, so the reduced rows
    land on exact rationals (and are re-verified symbolically afterwards)."""
    A = null.astype(float).copy()
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        piv = max(range(r, rows), key=lambda i: abs(A[i, c]))
        if abs(A[piv, c]) < 1e-10:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] /= A[r, c]
        for i in range(rows):
            if i != r:
                A[i] -= A[i, c] * A[r]
        r += 1
    out = []
    for i in range(r):
        frs = [Fraction(v).limit_denominator(max_den) for v in A[i]]
        out.append([sp.Rational(f.numerator, f.denominator) for f in frs])
    return out


def _vector_to_generator(M: MetricSpace, basis: AnsatzBasis, with_b: bool,
                         vec) -> SymmetryGenerator:
    B = len(basis)
    comps = [normalize(sum(vec[i * B + m] * basis.functions[m]
                           for m in range(B))) for i in range(M.n)]
    a = normalize(sum(vec[M.n * B + m] * basis.functions[m] for m in range(B)))
    b = sp.Integer(0)
    if with_b:
        b = normalize(sum(vec[(M.n + 1) * B + m] * basis.functions[m]
                          for m in range(B)))
    return SymmetryGenerator(VectorField(M, comps), a, b)


# ---------------------------------------------------------------------------
# classification against the case table

@dataclass
class ClassifiedGenerator:
    generator: SymmetryGenerator
    mu: Expr
    label: str                       # Isometry / Homothety / ConformalKilling
    case: str                        # nonlinearity case tag
    side_checks: dict
    violations: list


@dataclass
class ClassificationTable:
    nonlinearity: NonlinearityClass
    entries: list
    inconclusive: list
    basis: AnsatzBasis

    @property
    def dimension(self) -> int:
        return len(self.entries)


def _is_constant(M: MetricSpace, e: Expr, pol) -> bool:
    return all(is_zero(sp.diff(e, x), pol) is Verdict.ZERO for x in M.coords)


def _case_checks(M: MetricSpace, cls: NonlinearityClass,
                 gen: SymmetryGenerator, mu: Expr) -> dict:
    n = M.n
    pol = M.policy()
    a, b = gen.a, gen.b
    lap = lambda e: laplace_beltrami(M, e)
    Z = lambda e: is_zero(e, pol) is Verdict.ZERO
    tag = cls.tag
    checks = {}
    if tag is NonlinearityTag.ARBITRARY:
        checks["isometry"] = Z(mu)
        checks["a_zero"] = Z(a)
        checks["b_zero"] = Z(b)
    elif tag is NonlinearityTag.ZERO:
        checks["b_harmonic"] = Z(lap(b))
        checks["mu_harmonic"] = Z(lap(mu))
        checks["a_shift_constant"] = _is_constant(
            M, a - sp.Rational(2 - n, 4) * mu, pol)
    elif tag is NonlinearityTag.CONSTANT:
        # for f = k != 0 the binding side conditions are Delta mu = 0 and
        # (mu - a) k + Delta b = 0 (identically in k when k is symbolic)
        checks["b_biharmonic"] = Z(lap(lap(b)))
        checks["mu_harmonic"] = Z(lap(mu))
        checks["balance"] = Z((mu - a) * cls.k + lap(b))
    elif tag is NonlinearityTag.LINEAR:
        checks["b_eigen"] = Z(lap(b) + b)
        checks["mu_eigen"] = Z(sp.Rational(2 - n, 4) * lap(mu) + mu)
        checks["a_shift_constant"] = _is_constant(
            M, a - sp.Rational(2 - n, 4) * mu, pol)
    elif tag is NonlinearityTag.EXPONENTIAL:
        checks["mu_constant"] = _is_constant(M, mu, pol)
        checks["a_zero"] = Z(a)
        checks["b_is_minus_mu"] = Z(b + mu)
    elif tag is NonlinearityTag.POWER:
        checks["mu_constant"] = _is_constant(M, mu, pol)
        checks["a_relation"] = Z(a - mu / (1 - cls.p))
        checks["b_zero"] = Z(b)
    elif tag is NonlinearityTag.CRITICAL:
        checks["mu_harmonic"] = Z(lap(mu))
        checks["a_relation"] = Z(a - sp.Rational(2 - n, 4) * mu)
        checks["b_zero"] = Z(b)
    elif tag is NonlinearityTag.P2N6:
        checks["mu_biharmonic"] = Z(lap(lap(mu)))
        checks["a_relation"] = Z(a + mu)
        checks["b_relation"] = Z(b - lap(mu) / 2)
    return checks


def classify(M: MetricSpace, cls: NonlinearityClass, basis: AnsatzBasis,
             options: SolverOptions = SolverOptions()) -> ClassificationTable:
    result = solve_linear_ansatz(M, cls, basis, options)
    pol = M.policy()
    entries = []
    for gen in result.generators:
        mu = conformal_factor(M, gen.xi)
        if is_zero(mu, pol) is Verdict.ZERO:
            label = "Isometry"
        elif _is_constant(M, mu, pol):
            label = "Homothety"
        else:
            label = "ConformalKilling"
        checks = _case_checks(M, cls, gen, mu)
        violations = [name for name, ok in checks.items() if not ok]
        entries.append(ClassifiedGenerator(gen, mu, label, cls.tag.value,
                                           checks, violations))
    return ClassificationTable(cls, entries, result.inconclusive, basis)
