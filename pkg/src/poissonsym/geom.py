"""Tensor calculus on a coordinate chart.

MetricSpace owns the metric and lazily derives inverse, volume factor,
Christoffel symbols and curvature.  Sign conventions:

    R^i_jks = Gamma^i_jk,s - Gamma^i_js,k + Gamma^i_ls Gamma^l_jk
              - Gamma^i_lk Gamma^l_js
    R^i_s   = g^jk R^i_jks,   R = R^i_i

so that hyperbolic 3-space has R = -6.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import sympy as sp

from .exprcore import (
    Expr,
    SymbolTable,
    Verdict,
    ZeroTestPolicy,
    eval_num,
    is_zero,
    normalize,
    parse,
)


class GeometryError(Exception):
    pass


class InternalConsistencyError(GeometryError):
    """Two computation routes for the same quantity disagreed."""


class MetricSpace:
    def __init__(self, coord_names: Sequence[str], g, signature: str = "riemannian",
                 box: dict[str, tuple[float, float]] | None = None,
                 params: Sequence[str] = ()):
        if signature not in ("riemannian", "lorentzian"):
            raise GeometryError(f"unknown signature '{signature}'")
        if len(coord_names) < 2:
            raise GeometryError("need dimension n >= 2")
        self.table = SymbolTable(coord_names, params=params)
        self.coords = self.table.coords
        self.n = len(self.coords)
        self.signature = signature
        self.box = dict(box or {})

        rows = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                entry = g[i][j] if not isinstance(g, sp.Matrix) else g[i, j]
                if isinstance(entry, str):
                    entry = parse(entry, self.table)
                row.append(normalize(entry))
            rows.append(row)
        self.g = sp.Matrix(rows)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if normalize(self.g[i, j] - self.g[j, i]) != 0:
                    raise GeometryError(f"metric not symmetric at ({i},{j})")
        self._check_nondegenerate()

    # -- policy / sampling ---------------------------------------------------

    def policy(self, seed: int = 1234, samples: int = 16) -> ZeroTestPolicy:
        box = {}
        for name, rng in self.box.items():
            box[self.table.lookup(name)] = tuple(rng)
        return ZeroTestPolicy(samples=samples, box=box, seed=seed)

    def sample_point(self, rng) -> dict[sp.Symbol, float]:
        pol = self.policy()
        return {s: rng.uniform(*pol.box.get(s, pol.default_range))
                for s in self.coords}

    def _check_nondegenerate(self):
        import random
        rng = random.Random(99)
        det = self.g.det()
        for _ in range(8):
            pt = self.sample_point(rng)
            val = eval_num(det, pt)
            if abs(val) < 1e-12:
                raise GeometryError("metric singular inside the safe box")

    # -- derived tensors (cached, read-only after construction) --------------

    @cached_property
    def g_inv(self) -> sp.Matrix:
        return self.g.inv().applyfunc(normalize)

    @cached_property
    def det_g(self) -> Expr:
        return normalize(self.g.det())

    @cached_property
    def _positivity(self):
        """Coordinates whose safe box is strictly positive, as positive symbols.

        Lets sqrt(z**-6) reduce to z**-3 on upper-half-space charts where the
        box guarantees z > 0.
        """
        fwd, back = {}, {}
        for name, (lo, _hi) in self.box.items():
            if lo > 0:
                s = self.table.lookup(name)
                p = sp.Symbol(s.name, positive=True)
                fwd[s], back[p] = p, s
        return fwd, back

    @cached_property
    def sqrt_det(self) -> Expr:
        # |det g| so lorentzian metrics evaluate; signs recorded separately
        d = self.det_g
        if d.is_number and d.is_negative:
            d = -d
        elif self.signature == "lorentzian":
            d = sp.Abs(d)
        fwd, back = self._positivity
        r = sp.sqrt(sp.factor(d.subs(fwd)))
        return normalize(sp.powsimp(r).subs(back))

    @cached_property
    def christoffel(self):
        n, g, gi, c = self.n, self.g, self.g_inv, self.coords
        dg = [[[sp.diff(g[a, b], c[k]) for k in range(n)] for b in range(n)]
              for a in range(n)]
        gam = [[[None] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    val = sp.Rational(1, 2) * sum(
                        gi[i, l] * (dg[l][j][k] + dg[l][k][j] - dg[j][k][l])
                        for l in range(n))
                    val = normalize(val)
                    gam[i][j][k] = val
                    gam[i][k][j] = val
        return gam

    @cached_property
    def gamma_contracted(self):
        """Gamma^i = g^{pq} Gamma^i_pq."""
        n, gi, gam = self.n, self.g_inv, self.christoffel
        return [normalize(sum(gi[p, q] * gam[i][p][q]
                              for p in range(n) for q in range(n)))
                for i in range(n)]

    @cached_property
    def riemann(self):
        n, c, gam = self.n, self.coords, self.christoffel
        R = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for s in range(n):
                        val = (sp.diff(gam[i][j][k], c[s])
                               - sp.diff(gam[i][j][s], c[k])
                               + sum(gam[i][l][s] * gam[l][j][k]
                                     - gam[i][l][k] * gam[l][j][s]
                                     for l in range(n)))
                        R[i][j][k][s] = normalize(val)
        return R

    @cached_property
    def ricci(self):
        """Mixed Ricci tensor R^i_s = g^{jk} R^i_jks."""
        n, gi, Rm = self.n, self.g_inv, self.riemann
        return [[normalize(sum(gi[j, k] * Rm[i][j][k][s]
                               for j in range(n) for k in range(n)))
                 for s in range(n)] for i in range(n)]

    @cached_property
    def scalar_curvature(self) -> Expr:
        return normalize(sum(self.ricci[i][i] for i in range(self.n)))


@dataclass
class VectorField:
    """Vector field with coordinate-only components (no u / jet dependence)."""

    space: MetricSpace
    components: list

    def __post_init__(self):
        M = self.space
        if len(self.components) != M.n:
            raise GeometryError("component count != chart dimension")
        comps = []
        jets = set(M.table.all_jets())
        for c in self.components:
            if isinstance(c, str):
                c = parse(c, M.table)
            c = normalize(sp.sympify(c))
            if c.free_symbols & jets:
                raise GeometryError("vector field depends on u or jet symbols")
            comps.append(c)
        self.components = comps

    def __getitem__(self, i: int) -> Expr:
        return self.components[i]


class ConformalVerdict(Enum):
    KILLING = "Killing"
    HOMOTHETY = "Homothety"
    CONFORMAL_KILLING = "ConformalKilling"
    NOT_CONFORMAL = "NotConformal"


@dataclass
class ConformalReport:
    verdict: ConformalVerdict
    mu: Expr
    max_residual: float
    warnings: list = field(default_factory=list)


def lie_derivative_metric(M: MetricSpace, xi: VectorField) -> sp.Matrix:
    """(L_xi g)_ij = xi^k g_ij,k + g_kj xi^k_,i + g_ik xi^k_,j."""
    n, g, c = M.n, M.g, M.coords
    out = sp.zeros(n, n)
    for i in range(n):
        for j in range(i, n):
            val = sum(xi[k] * sp.diff(g[i, j], c[k])
                      + g[k, j] * sp.diff(xi[k], c[i])
                      + g[i, k] * sp.diff(xi[k], c[j])
                      for k in range(n))
            val = normalize(val)
            out[i, j] = val
            out[j, i] = val
    return out


def conformal_factor(M: MetricSpace, xi: VectorField) -> Expr:
    """mu = trace(g^{-1} L_xi g) / n."""
    lg = lie_derivative_metric(M, xi)
    return normalize(sum(M.g_inv[i, j] * lg[j, i]
                         for i in range(M.n) for j in range(M.n)) / M.n)


def covariant_divergence(M: MetricSpace, xi: VectorField) -> Expr:
    """div(xi) = xi^j_,j + Gamma^l_jl xi^j; cross-checked against the
    (1/sqrt g)(sqrt g xi^j)_,j form."""
    n, c = M.n, M.coords
    direct = sum(sp.diff(xi[j], c[j]) for j in range(n)) + sum(
        M.christoffel[l][j][l] * xi[j] for j in range(n) for l in range(n))
    direct = normalize(direct)
    sg = M.sqrt_det
    alt = normalize(sum(sp.diff(sg * xi[j], c[j]) for j in range(n)) / sg)
    if normalize(direct - alt) != 0 and is_zero(direct - alt, M.policy()) is Verdict.NONZERO:
        raise InternalConsistencyError("divergence forms disagree")
    return direct


def conformal_check(M: MetricSpace, xi: VectorField,
                    seed: int = 1234) -> ConformalReport:
    """Classify xi as Killing / homothety / conformal Killing / none."""
    pol = M.policy(seed=seed)
    lg = lie_derivative_metric(M, xi)
    mu = normalize(sum(M.g_inv[i, j] * lg[j, i]
                       for i in range(M.n) for j in range(M.n)) / M.n)
    warnings = []
    max_res = 0.0
    conformal = True
    for i in range(M.n):
        for j in range(i, M.n):
            res = lg[i, j] - mu * M.g[i, j]
            v = is_zero(res, pol)
            if v is Verdict.NONZERO:
                conformal = False
            elif v is Verdict.INCONCLUSIVE:
                conformal = False
                warnings.append(f"inconclusive zero test for residual ({i},{j})")
            max_res = max(max_res, _max_abs_sample(res, pol))
    if not conformal:
        return ConformalReport(ConformalVerdict.NOT_CONFORMAL, mu, max_res, warnings)
    # Lemma-1 cross-check: div(xi) = (n/2) mu
    div = covariant_divergence(M, xi)
    if is_zero(div - sp.Rational(M.n, 2) * mu, pol) is not Verdict.ZERO:
        raise InternalConsistencyError("div(xi) != (n/2) mu for conformal field")
    if is_zero(mu, pol) is Verdict.ZERO:
        return ConformalReport(ConformalVerdict.KILLING, sp.Integer(0), max_res, warnings)
    if all(is_zero(sp.diff(mu, x), pol) is Verdict.ZERO for x in M.coords):
        return ConformalReport(ConformalVerdict.HOMOTHETY, mu, max_res, warnings)
    return ConformalReport(ConformalVerdict.CONFORMAL_KILLING, mu, max_res, warnings)


def _max_abs_sample(e: Expr, policy: ZeroTestPolicy) -> float:
    from .exprcore import _sample
    values, _ = _sample(normalize(e), policy)
    return max(values) if values else 0.0


def laplace_beltrami(M: MetricSpace, phi: Expr) -> Expr:
    """Delta_g phi, divergence form, cross-checked against
    g^{ij} phi_ij - Gamma^i phi_i."""
    phi = sp.sympify(phi)
    n, c, gi, sg = M.n, M.coords, M.g_inv, M.sqrt_det
    div_form = normalize(sum(
        sp.diff(sg * sum(gi[i, j] * sp.diff(phi, c[j]) for j in range(n)), c[i])
        for i in range(n)) / sg)
    alt = normalize(
        sum(gi[i, j] * sp.diff(phi, c[i], c[j]) for i in range(n) for j in range(n))
        - sum(M.gamma_contracted[i] * sp.diff(phi, c[i]) for i in range(n)))
    if normalize(div_form - alt) != 0:
        if is_zero(div_form - alt, M.policy()) is not Verdict.ZERO:
            raise InternalConsistencyError("Laplace-Beltrami forms disagree")
    return div_form


def lie_bracket(xi: VectorField, eta: VectorField) -> VectorField:
    """[xi, eta]^i = xi^j eta^i_,j - eta^j xi^i_,j."""
    if xi.space is not eta.space:
        raise GeometryError("vector fields live on different charts")
    M, c = xi.space, xi.space.coords
    comps = [normalize(sum(xi[j] * sp.diff(eta[i], c[j])
                           - eta[j] * sp.diff(xi[i], c[j])
                           for j in range(M.n)))
             for i in range(M.n)]
    return VectorField(M, comps)


def vector_laplacian(M: MetricSpace, xi: VectorField) -> list:
    """Delta_g xi^i = g^{jk} nabla_j nabla_k xi^i."""
    n, c, gam = M.n, M.coords, M.christoffel
    # T^i_k = nabla_k xi^i
    T = [[normalize(sp.diff(xi[i], c[k]) + sum(gam[i][k][l] * xi[l] for l in range(n)))
          for k in range(n)] for i in range(n)]
    out = []
    for i in range(n):
        total = 0
        for j in range(n):
            for k in range(n):
                S = (sp.diff(T[i][k], c[j])
                     + sum(gam[i][j][l] * T[l][k] for l in range(n))
                     - sum(gam[l][j][k] * T[i][l] for l in range(n)))
                total += M.g_inv[j, k] * S
        out.append(normalize(total))
    return out


@dataclass
class ConformalIdentityReport:
    vector_identity_ok: bool      # Delta xi^i + R^i_j xi^j = ((2-n)/2) g^{ij} mu_j
    factor_identity_ok: bool      # Delta mu = -(1/(n-1)) (xi^i R_,i + mu R)
    failures: list = field(default_factory=list)


def conformal_identity_checks(M: MetricSpace, xi: VectorField,
                              mu: Expr) -> ConformalIdentityReport:
    """Consistency identities satisfied by every conformal Killing field."""
    pol = M.policy()
    n, c = M.n, M.coords
    failures = []
    lap_xi = vector_laplacian(M, xi)
    vec_ok = True
    for i in range(n):
        res = (lap_xi[i]
               + sum(M.ricci[i][j] * xi[j] for j in range(n))
               - sp.Rational(2 - n, 2) * sum(M.g_inv[i, j] * sp.diff(mu, c[j])
                                             for j in range(n)))
        if is_zero(res, pol) is not Verdict.ZERO:
            vec_ok = False
            failures.append(f"vector identity fails in component {i}")
    R = M.scalar_curvature
    res = laplace_beltrami(M, mu) + sp.Rational(1, n - 1) * (
        sum(xi[i] * sp.diff(R, c[i]) for i in range(n)) + mu * R)
    fac_ok = is_zero(res, pol) is Verdict.ZERO
    if not fac_ok:
        failures.append("conformal factor Laplacian identity fails")
    return ConformalIdentityReport(vec_ok, fac_ok, failures)


def divergence_formula_residuals(M: MetricSpace) -> list:
    """(sqrt g g^{ik})_,k + g^{pq} Gamma^i_pq sqrt g, per i (all should vanish)."""
    n, c, sg = M.n, M.coords, M.sqrt_det
    return [normalize(sum(sp.diff(sg * M.g_inv[i, k], c[k]) for k in range(n))
                      + M.gamma_contracted[i] * sg)
            for i in range(n)]
