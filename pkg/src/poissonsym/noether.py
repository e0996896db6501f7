"""Variational machinery for Delta_g u + f(u) = 0.

The equation is Euler-Lagrange for L = (sqrt g / 2) g^{ij} u_i u_j
- F(u) sqrt g with F' = f.  A point symmetry X is classified by the
residual X^(1)L + L D_i xi^i:

    zero                      -> variational symmetry
    D_i phi^i                 -> divergence symmetry
    2c L + D_i phi^i (c != 0) -> not Noether; the scaled form is reported
                                 for the zero/constant/linear cases where
                                 it is the structural obstruction
    anything else             -> not Noether

Every variational/divergence symmetry yields a conserved current

    A^k = xi^k L + Q sqrt(g) g^{kj} u_j - phi^k,    Q = eta - xi^i u_i,

whose total divergence equals sigma * sqrt(g) * Q * H with one global
sign sigma, pinned once by the flat translation symmetry and then
enforced everywhere.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import sympy as sp

from .exprcore import Expr, Verdict, is_zero, normalize
from .detsys import (
    NonlinearityClass,
    NonlinearityTag,
    SymmetryGenerator,
    poisson_equation,
    sampling_ready,
)
from .geom import (
    InternalConsistencyError,
    MetricSpace,
    VectorField,
    conformal_factor,
    covariant_divergence,
    laplace_beltrami,
)


class NoetherError(Exception):
    pass


@dataclass
class Lagrangian:
    space: MetricSpace
    nonlinearity: NonlinearityClass
    L: Expr = None

    def __post_init__(self):
        M, T = self.space, self.space.table
        kinetic = sum(M.g_inv[i, j] * T.jet1(i) * T.jet1(j)
                      for i in range(M.n) for j in range(M.n))
        self.L = normalize(M.sqrt_det * kinetic / 2
                           - self.nonlinearity.F * M.sqrt_det)


def total_derivative(M: MetricSpace, e: Expr, k: int) -> Expr:
    """D_k on a jet expression in (x, u, u_i): D_k = d/dx^k + u_k d/du
    + u_{ks} d/du_s."""
    T = M.table
    out = sp.diff(e, M.coords[k]) + T.jet1(k) * sp.diff(e, T.u)
    for s in range(M.n):
        out += T.jet2(k, s) * sp.diff(e, T.jet1(s))
    return out


def total_divergence(M: MetricSpace, comps) -> Expr:
    # left unnormalized: every consumer either samples the result or feeds
    # it to is_zero, which canonicalizes once
    return sum(total_derivative(M, comps[k], k) for k in range(M.n))


def euler_lagrange(lag: Lagrangian) -> Expr:
    """E(L) = dL/du - D_k dL/du_k; satisfies E(L) + sqrt(g) H = 0."""
    M, T = lag.space, lag.space.table
    e = sp.diff(lag.L, T.u)
    for k in range(M.n):
        e -= total_derivative(M, sp.diff(lag.L, T.jet1(k)), k)
    e = normalize(e)
    H = poisson_equation(M, lag.nonlinearity)
    check = sampling_ready(e + M.sqrt_det * H, lag.nonlinearity)
    if is_zero(check, M.policy()) is not Verdict.ZERO:
        raise InternalConsistencyError("E(L) + sqrt(g) H does not vanish")
    return e


def prolong_apply(lag: Lagrangian, X: SymmetryGenerator) -> Expr:
    """X^(1)L + L D_i xi^i, computed from the explicit first-prolongation
    coefficients and cross-checked against the covariant closed form."""
    M, T, cls = lag.space, lag.space.table, lag.nonlinearity
    n, c, u = M.n, M.coords, T.u
    a, b, xi = X.a, X.b, X.xi
    eta = a * u + b

    # route 1: prolongation coefficients eta_i = a_i u + b_i
    #          + (a delta^j_i - xi^j_,i) u_j
    res = sum(xi[i] * sp.diff(lag.L, c[i]) for i in range(n))
    res += eta * sp.diff(lag.L, u)
    for i in range(n):
        eta_i = sp.diff(a, c[i]) * u + sp.diff(b, c[i]) + a * T.jet1(i) \
            - sum(sp.diff(xi[j], c[i]) * T.jet1(j) for j in range(n))
        res += eta_i * sp.diff(lag.L, T.jet1(i))
    res += lag.L * sum(sp.diff(xi[i], c[i]) for i in range(n))

    # route 2: covariant closed form
    div = covariant_divergence(M, xi)
    grad_xi = [[sum(M.g_inv[k, i] * (sp.diff(xi[s], c[i])
                                     + sum(M.christoffel[s][i][l] * xi[l]
                                           for l in range(n)))
                    for i in range(n))
                for s in range(n)] for k in range(n)]   # nabla^k xi^s
    alt = 0
    for k in range(n):
        for s in range(n):
            alt += sp.Rational(1, 2) * (M.g_inv[k, s] * div
                                        + 2 * a * M.g_inv[k, s]
                                        - grad_xi[k][s] - grad_xi[s][k]) \
                * M.sqrt_det * T.jet1(k) * T.jet1(s)
    alt += (-M.sqrt_det * div * cls.F - M.sqrt_det * a * u * cls.f
            - M.sqrt_det * b * cls.f)
    for i in range(n):
        for s in range(n):
            alt += (sp.diff(a, c[i]) * u + sp.diff(b, c[i])) \
                * M.sqrt_det * M.g_inv[i, s] * T.jet1(s)
    diff = sampling_ready(res - alt, cls)
    pol = M.policy()
    from .exprcore import _sample
    values, scales = _sample(sp.sympify(diff), pol)
    agree = bool(values) and max(values) <= pol.abs_tol * (1.0 + max(scales))
    if not agree and is_zero(diff, pol) is not Verdict.ZERO:
        raise InternalConsistencyError(
            "prolongation routes disagree for X^(1)L + L D_i xi^i")
    return res


class NoetherKind(Enum):
    VARIATIONAL = "Variational"
    DIVERGENCE = "Divergence"
    SCALED_NON_NOETHER = "ScaledNonNoether"
    NOT_NOETHER = "NotNoether"


@dataclass
class NoetherVerdict:
    kind: NoetherKind
    residual: Expr
    potential: list | None = None      # phi^i(x, u)
    c: Expr | None = None
    warnings: list = field(default_factory=list)


def divergence_potential(lag: Lagrangian, X: SymmetryGenerator,
                         mu: Expr | None = None) -> list:
    """Closed-form potential phi^i for the class of lag's nonlinearity."""
    M, cls = lag.space, lag.nonlinearity
    n, c, u = M.n, M.coords, M.table.u
    if mu is None:
        mu = conformal_factor(M, X.xi)
    sg = M.sqrt_det
    tag = cls.tag

    def grad_up(e):
        return [sum(M.g_inv[i, j] * sp.diff(e, c[j]) for j in range(n))
                for i in range(n)]

    gmu = grad_up(mu)
    if tag in (NonlinearityTag.CRITICAL, NonlinearityTag.POWER):
        return [normalize(sp.Rational(2 - n, 8) * sg * gmu[i] * u**2)
                for i in range(n)]
    if tag is NonlinearityTag.P2N6:
        glap = grad_up(laplace_beltrami(M, mu))
        return [normalize(-sg * gmu[i] * u**2 / 2 + sg * glap[i] * u)
                for i in range(n)]
    if tag in (NonlinearityTag.ZERO, NonlinearityTag.LINEAR,
               NonlinearityTag.CONSTANT):
        gb = grad_up(X.b)
        return [normalize(sp.Rational(2 - n, 8) * sg * gmu[i] * u**2
                          + sg * gb[i] * u) for i in range(n)]
    return [sp.Integer(0)] * n


def noether_classify(lag: Lagrangian, X: SymmetryGenerator) -> NoetherVerdict:
    M, cls = lag.space, lag.nonlinearity
    n = M.n
    pol = M.policy()
    warnings = []
    residual = prolong_apply(lag, X)

    v = is_zero(sampling_ready(residual, cls), pol)
    if v is Verdict.ZERO:
        return NoetherVerdict(NoetherKind.VARIATIONAL, sp.Integer(0))
    if v is Verdict.INCONCLUSIVE:
        warnings.append("inconclusive zero test on the raw residual")

    mu = conformal_factor(M, X.xi)
    phi = divergence_potential(lag, X, mu)
    rem = residual - total_divergence(M, phi)
    if is_zero(sampling_ready(rem, cls), pol) is Verdict.ZERO:
        return NoetherVerdict(NoetherKind.DIVERGENCE, residual, phi,
                              warnings=warnings)

    if cls.tag in (NonlinearityTag.ZERO, NonlinearityTag.LINEAR,
                   NonlinearityTag.CONSTANT):
        cexp = normalize(X.a - sp.Rational(2 - n, 4) * mu)
        grad_ok = all(is_zero(sp.diff(cexp, x), pol) is Verdict.ZERO
                      for x in M.coords)
        scaled = rem - 2 * cexp * lag.L
        if cls.tag is NonlinearityTag.CONSTANT:
            # a residual -sqrt(g) b k survives; only b = 0 can be scaled
            scaled = scaled + M.sqrt_det * X.b * cls.k
        if grad_ok and is_zero(sampling_ready(scaled, cls), pol) is Verdict.ZERO:
            b_zero = is_zero(X.b, pol) is Verdict.ZERO
            if cls.tag is not NonlinearityTag.CONSTANT or b_zero:
                return NoetherVerdict(NoetherKind.SCALED_NON_NOETHER,
                                      residual, phi, c=cexp, warnings=warnings)
    return NoetherVerdict(NoetherKind.NOT_NOETHER, residual,
                          warnings=warnings)


# ---------------------------------------------------------------------------
# conserved currents

@dataclass
class ConservedCurrent:
    components: list
    generator: SymmetryGenerator
    nonlinearity: NonlinearityClass
    potential: list
    symbolic_verified: bool | None = None
    max_divergence: float | None = None

    @property
    def space(self) -> MetricSpace:
        return self.generator.space


def build_current(lag: Lagrangian, X: SymmetryGenerator,
                  verdict: NoetherVerdict | None = None) -> ConservedCurrent:
    """A^k = xi^k L + Q sqrt(g) g^{kj} u_j - phi^k.

    For each nonlinearity case this reproduces the class-specific closed
    forms (Killing currents, the zero/linear currents with the b-terms, the
    critical-power current) term by term.
    """
    if verdict is None:
        verdict = noether_classify(lag, X)
    if verdict.kind not in (NoetherKind.VARIATIONAL, NoetherKind.DIVERGENCE):
        raise NoetherError(f"no conserved current: symmetry is {verdict.kind.value}")
    M, T = lag.space, lag.space.table
    n = M.n
    Q = X.eta() - sum(X.xi[i] * T.jet1(i) for i in range(n))
    phi = verdict.potential or [sp.Integer(0)] * n
    comps = []
    for k in range(n):
        A = X.xi[k] * lag.L + Q * M.sqrt_det * sum(
            M.g_inv[k, j] * T.jet1(j) for j in range(n)) - phi[k]
        # kept in factored form: canonicalizing here balloons the rational
        # jet expressions, and every consumer samples or normalizes anyway
        comps.append(A)
    return ConservedCurrent(comps, X, lag.nonlinearity, phi)


_SIGMA: int | None = None


def characteristic_sign() -> int:
    """Global sign in D_k A^k = sigma sqrt(g) Q H, pinned once by the flat
    translation symmetry and frozen thereafter."""
    global _SIGMA
    if _SIGMA is not None:
        return _SIGMA
    M = MetricSpace(["x", "y", "z"],
                    [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    cls = NonlinearityClass.arbitrary(M.table.u)
    lag = Lagrangian(M, cls)
    X = SymmetryGenerator(VectorField(M, [1, 0, 0]),
                          sp.Integer(0), sp.Integer(0))
    cur = build_current(lag, X)
    div = total_divergence(M, cur.components)
    T = M.table
    Q = X.eta() - sum(X.xi[i] * T.jet1(i) for i in range(M.n))
    H = poisson_equation(M, cls)
    pol = M.policy()
    for sigma in (1, -1):
        res = sampling_ready(div - sigma * M.sqrt_det * Q * H, cls)
        if is_zero(res, pol) is Verdict.ZERO:
            _SIGMA = sigma
            return sigma
    raise InternalConsistencyError("no sign closes the characteristic identity")


def verify_current_symbolic(cur: ConservedCurrent) -> bool:
    """Check D_k A^k = sigma sqrt(g) (eta - xi^k u_k) H identically in the
    jet variables, with the frozen global sigma."""
    M, X, cls = cur.space, cur.generator, cur.nonlinearity
    T = M.table
    sigma = characteristic_sign()
    div = total_divergence(M, cur.components)
    Q = X.eta() - sum(X.xi[i] * T.jet1(i) for i in range(M.n))
    H = poisson_equation(M, cls)
    res = sampling_ready(div - sigma * M.sqrt_det * Q * H, cls)
    ok = is_zero(res, M.policy()) is Verdict.ZERO
    cur.symbolic_verified = ok
    return ok


@dataclass
class JetPoint:
    values: dict                 # symbol -> float for x, u, u_i, u_{ij}
    on_shell: bool


@dataclass
class NumericVerification:
    max_divergence: float
    scale: float
    passed: bool
    samples: int
    points: list = field(default_factory=list)


def _jet_lambdas(cur: ConservedCurrent):
    M, cls = cur.space, cur.nonlinearity
    T = M.table
    div = sampling_ready(total_divergence(M, cur.components), cls)
    H = sampling_ready(poisson_equation(M, cls), cls)
    comps = [sampling_ready(c, cls) for c in cur.components]
    syms = (list(M.coords) + [T.u] + list(T.first_jets)
            + list(T.second_jets.values()))
    extra = sorted((div.free_symbols | H.free_symbols
                    | set().union(*[c.free_symbols for c in comps]))
                   - set(syms), key=str)
    syms = syms + extra
    u11 = T.jet2(0, 0)
    fdiv = sp.lambdify(syms, div, "math")
    fH0 = sp.lambdify(syms, H.subs(u11, 0), "math")
    fcoef = sp.lambdify(M.coords, M.g_inv[0, 0], "math")
    fA = [sp.lambdify(syms, c, "math") for c in comps]
    return syms, u11, fdiv, fH0, fcoef, fA


def verify_current_numeric(cur: ConservedCurrent, samples: int = 100,
                           seed: int = 2024,
                           on_shell: bool = True) -> NumericVerification:
    """Sample jet points (u_11 solved from H = 0 when on_shell) and bound
    |D_k A^k|; PASS iff below 1e-7 * (1 + current magnitude scale)."""
    M = cur.space
    pol = M.policy()
    syms, u11, fdiv, fH0, fcoef, fA = _jet_lambdas(cur)
    rng = random.Random(seed)
    max_div, scale = 0.0, 0.0
    divs = []
    made, attempts = 0, 0
    while made < samples and attempts < samples * 20:
        attempts += 1
        vals = {}
        for s in syms:
            if s in M.coords:
                vals[s] = rng.uniform(*pol.box.get(s, pol.default_range))
            else:
                vals[s] = rng.uniform(-2.0, 2.0)
        try:
            coef = fcoef(*[vals[s] for s in M.coords])
            if on_shell:
                if abs(coef) < 1e-9:
                    continue
                vals[u11] = 0.0
                rest = fH0(*[vals[s] for s in syms])
                vals[u11] = -rest / coef
            args = [vals[s] for s in syms]
            d = fdiv(*args)
            a_mag = max(abs(f(*args)) for f in fA)
        except (ValueError, ZeroDivisionError, OverflowError):
            continue
        if not all(np.isfinite(v) and not isinstance(v, complex)
                   for v in (d, a_mag)):
            continue
        divs.append(abs(d))
        max_div = max(max_div, abs(d))
        scale = max(scale, a_mag)
        made += 1
    if made < samples:
        raise NoetherError("could not draw enough finite jet samples")
    passed = max_div < 1e-7 * (1.0 + scale)
    res = NumericVerification(max_div, scale, passed, made, divs)
    if on_shell:
        cur.max_divergence = max_div
    return res
