"""Command-line frontend: metric manifests in and out, plus reports for
curvature, symmetry classification, Noether tests, conservation-law
verification, and the built-in geometry suite.

Manifests are JSON documents; every expression value is a string in the
package's expression grammar, and reports print expressions back in the
same grammar so output is round-trippable.

Exit codes: 0 success, 2 input error, 3 geometry error,
4 symmetry/Noether failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import sympy as sp

from .exprcore import ExprError, Verdict, is_zero, parse, to_grammar
from .geom import (GeometryError, MetricSpace, VectorField, conformal_check,
                   conformal_factor)
from .detsys import (AnsatzBasis, DetSysError, NonlinearityClass,
                     NonlinearityTag, SolverOptions, SymmetryGenerator,
                     classify, determining_residuals, sampling_ready)
from .noether import (Lagrangian, NoetherError, NoetherKind, build_current,
                      noether_classify, verify_current_numeric,
                      verify_current_symbolic)
from . import catalog

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GEOMETRY = 3
EXIT_SYMMETRY = 4


class InputError(Exception):
    """Bad manifest, flags, or expression input (exit code 2)."""


class SymmetryError(Exception):
    """Determining-equation or Noether failure (exit code 4)."""


# ---------------------------------------------------------------------------
# manifest I/O

def load_manifest(doc: dict) -> dict:
    """Validate a manifest document and build its MetricSpace.

    Returns {"space", "vectorfields", "nonlinearity", "ansatz"} where
    vectorfields maps names to VectorField, nonlinearity is the raw block
    (or None) and ansatz is an AnsatzBasis (or None).
    """
    if not isinstance(doc, dict):
        raise InputError("manifest must be a JSON object")
    try:
        man = doc["manifold"]
        coords = man["coords"]
        g_rows = doc["metric"]["g"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"manifest missing required key: {exc}") from None
    signature = man.get("signature", "riemannian")
    box = man.get("box", {})
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise InputError("manifold.coords must be a list of strings")
    n = len(coords)
    if (not isinstance(g_rows, list) or len(g_rows) != n
            or any(not isinstance(r, list) or len(r) != n for r in g_rows)):
        raise InputError(f"metric.g must be a {n}x{n} matrix of strings")
    box_t = {}
    for name, rng in (box or {}).items():
        if name not in coords or len(rng) != 2:
            raise InputError(f"bad box entry for '{name}'")
        box_t[name] = (float(rng[0]), float(rng[1]))
    try:
        space = MetricSpace(coords, g_rows, signature=signature, box=box_t,
                            params=("F_val",))
    except ExprError as exc:
        raise InputError(f"metric expression: {exc}") from exc

    fields = {}
    for name, comps in (doc.get("vectorfields") or {}).items():
        if not isinstance(comps, list) or len(comps) != n:
            raise InputError(f"vectorfield '{name}' needs {n} components")
        try:
            fields[name] = VectorField(
                space, [parse(c, space.table) for c in comps])
        except (ExprError, GeometryError) as exc:
            raise InputError(f"vectorfield '{name}': {exc}") from exc

    ansatz = None
    basis_texts = (doc.get("ansatz") or {}).get("basis")
    if basis_texts:
        try:
            ansatz = AnsatzBasis.from_strings(space, basis_texts)
        except (ExprError, DetSysError) as exc:
            raise InputError(f"ansatz: {exc}") from exc

    return {"space": space, "vectorfields": fields,
            "nonlinearity": doc.get("nonlinearity"), "ansatz": ansatz}


def read_manifest(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest is not valid JSON: {exc}") from exc
    return load_manifest(doc)


def export_fixture(fix: catalog.GeometryFixture) -> dict:
    """Export a built-in fixture as a manifest document."""
    M = fix.space
    doc = {
        "manifold": {
            "coords": [str(c) for c in M.coords],
            "signature": M.signature,
            "box": {name: [lo, hi] for name, (lo, hi) in M.box.items()},
        },
        "metric": {"g": [[to_grammar(M.g[i, j]) for j in range(M.n)]
                         for i in range(M.n)]},
        "vectorfields": {
            **{name: [to_grammar(c) for c in vf.components]
               for name, vf in {**fix.killing,
                                **fix.auxiliary_fields}.items()},
            **{kg.name: list(kg.xi) for kg in fix.extra_generators},
        },
        "ansatz": {"basis": [to_grammar(f) for f in fix.basis.functions]},
    }
    return doc


def _resolve_input(args) -> dict:
    """Manifest path or --geometry fixture name -> loaded manifest dict."""
    if getattr(args, "geometry", None):
        # with --geometry there is no manifest path; a lone positional is
        # the field spec
        if getattr(args, "manifest", None) and hasattr(args, "field") \
                and not args.field:
            args.field = args.manifest
            args.manifest = None
        try:
            fix = catalog.load(args.geometry)
        except catalog.CatalogError as exc:
            raise InputError(str(exc)) from exc
        loaded = load_manifest(export_fixture(fix))
        loaded["fixture"] = fix
        return loaded
    if not getattr(args, "manifest", None):
        raise InputError("a manifest path or --geometry is required")
    return read_manifest(args.manifest)


# ---------------------------------------------------------------------------
# nonlinearity / basis / generator resolution

def _nonlinearity_from(args, loaded) -> NonlinearityClass:
    block = loaded.get("nonlinearity") or {}
    name = getattr(args, "cls", None) or block.get("class")
    if not name:
        raise InputError("no nonlinearity class given (--class or manifest)")
    p = args.p if getattr(args, "p", None) is not None else block.get("p")
    k = getattr(args, "k", None) or block.get("k")
    M = loaded["space"]
    u = M.table.u
    try:
        if name == "arbitrary":
            return NonlinearityClass.arbitrary(u)
        if name == "zero":
            return NonlinearityClass.zero(u)
        if name == "linear":
            return NonlinearityClass.linear(u)
        if name == "exponential":
            return NonlinearityClass.exponential(u)
        if name == "constant":
            kval = parse(str(k), M.table) if k is not None else None
            return NonlinearityClass.constant(u, kval)
        if name == "power":
            if p is None:
                raise InputError("class 'power' requires --p")
            return NonlinearityClass.power(u, sp.nsimplify(p), M.n)
        if name == "critical":
            return NonlinearityClass.power(
                u, sp.Rational(M.n + 2, M.n - 2), M.n)
        if name == "p2n6":
            if M.n != 6:
                raise InputError("class 'p2n6' requires dimension n = 6")
            return NonlinearityClass.power(u, 2, 6)
    except (DetSysError, ExprError) as exc:
        raise InputError(str(exc)) from exc
    raise InputError(f"unknown nonlinearity class '{name}'")


def _basis_from(args, loaded) -> AnsatzBasis:
    M = loaded["space"]
    spec = getattr(args, "basis", None)
    if spec:
        try:
            with open(spec) as fh:
                texts = [ln.strip() for ln in fh if ln.strip()]
        except OSError:
            texts = [t.strip() for t in spec.split(",") if t.strip()]
        try:
            return AnsatzBasis.from_strings(M, texts)
        except (ExprError, DetSysError) as exc:
            raise InputError(f"basis: {exc}") from exc
    if loaded.get("ansatz") is not None:
        return loaded["ansatz"]
    return AnsatzBasis.polynomial(M, 2)


def _canonical_generator(M: MetricSpace, cls: NonlinearityClass,
                         xi: VectorField) -> SymmetryGenerator:
    """Lift a conformal field to the canonical symmetry generator of the
    class: a = ((2-n)/4) mu, b = 0 except a = 0, b = -mu (exponential) and
    a = mu/(1-p), b = 0 (non-critical power)."""
    from .exprcore import normalize
    n = M.n
    mu = conformal_factor(M, xi)
    tag = cls.tag
    if tag is NonlinearityTag.EXPONENTIAL:
        a, b = sp.Integer(0), normalize(-mu)
    elif tag in (NonlinearityTag.POWER, NonlinearityTag.P2N6):
        a, b = normalize(mu / (1 - cls.p)), sp.Integer(0)
    else:
        a, b = normalize(sp.Rational(2 - n, 4) * mu), sp.Integer(0)
    return SymmetryGenerator(xi, a, b)


def _generator_from(args, loaded, cls) -> SymmetryGenerator:
    """Field spec: a named manifest vectorfield, or inline comma-separated
    components; lifted canonically to (xi, a, b) for the class."""
    M = loaded["space"]
    spec = args.field
    if not spec:
        raise InputError("a field spec (name or components) is required")
    if spec in loaded["vectorfields"]:
        xi = loaded["vectorfields"][spec]
    elif "," in spec:
        comps = [t.strip() for t in spec.split(",")]
        if len(comps) != M.n:
            raise InputError(f"inline field needs {M.n} components")
        try:
            xi = VectorField(M, [parse(c, M.table) for c in comps])
        except (ExprError, GeometryError) as exc:
            raise InputError(f"field: {exc}") from exc
    else:
        known = ", ".join(sorted(loaded["vectorfields"])) or "(none)"
        raise InputError(f"unknown vectorfield '{spec}'; manifest has: {known}")
    gen = _canonical_generator(M, cls, xi)
    _require_symmetry(M, gen, cls)
    return gen


def _require_symmetry(M, gen, cls):
    """Exit 4 with a residual report when the determining equations fail."""
    rep = determining_residuals(M, gen, cls)
    if rep.verdict:
        return
    pol = M.policy()
    bad = []
    for i in range(M.n):
        for j in range(i, M.n):
            r = rep.conformal_residual[i, j]
            if is_zero(sampling_ready(r, cls), pol) is not Verdict.ZERO:
                bad.append(f"conformal residual [{i}{j}] = {to_grammar(r)}")
    for i, r in enumerate(rep.gradient_residual):
        if is_zero(sampling_ready(r, cls), pol) is not Verdict.ZERO:
            bad.append(f"gradient residual [{i}] = {to_grammar(r)}")
    r = rep.nonlinearity_residual
    if is_zero(sampling_ready(r, cls), pol) is not Verdict.ZERO:
        bad.append(f"nonlinearity residual = {to_grammar(r)}")
    raise SymmetryError(
        "not a symmetry: determining equations fail\n  "
        + "\n  ".join(bad or rep.warnings or ["(inconclusive residuals)"]))


# ---------------------------------------------------------------------------
# subcommands

def cmd_curvature(args) -> int:
    loaded = _resolve_input(args)
    M = loaded["space"]
    gamma = M.christoffel
    nonzero = {}
    for k in range(M.n):
        for i in range(M.n):
            for j in range(i, M.n):
                if gamma[k][i][j] != 0:
                    key = f"Gamma^{M.coords[k]}_{M.coords[i]}{M.coords[j]}"
                    nonzero[key] = to_grammar(gamma[k][i][j])
    ricci = [[to_grammar(M.ricci[i][j]) for j in range(M.n)]
             for i in range(M.n)]
    R = to_grammar(M.scalar_curvature)
    if args.json:
        print(json.dumps({"christoffel": nonzero, "ricci": ricci,
                          "scalar_curvature": R}, indent=2))
    else:
        print("Nonzero Christoffel symbols:")
        if nonzero:
            for key, val in sorted(nonzero.items()):
                print(f"  {key} = {val}")
        else:
            print("  (none)")
        print("Ricci tensor:")
        for row in ricci:
            print("  [" + ", ".join(row) + "]")
        print(f"R = {R}")
    return EXIT_OK


def cmd_killing(args) -> int:
    loaded = _resolve_input(args)
    M = loaded["space"]
    if args.solve:
        basis = _basis_from(args, loaded)
        cls = NonlinearityClass.zero(M.table.u)
        table = classify(M, cls, basis,
                         SolverOptions(seed=args.seed))
        # the solve runs in the widest case (it admits every conformal
        # field); entries with xi = 0 are pure u-shifts, not vector fields
        entries = [e for e in table.entries
                   if any(c != 0 for c in e.generator.xi.components)]
        rows = []
        counts = {}
        for i, e in enumerate(entries):
            counts[e.label] = counts.get(e.label, 0) + 1
            rows.append({
                "generator": f"G{i + 1}",
                "xi": [to_grammar(c) for c in e.generator.xi.components],
                "mu": to_grammar(e.mu),
                "label": e.label,
            })
        if args.json:
            print(json.dumps({"fields": rows, "counts": counts,
                              "dimension": len(rows)}, indent=2))
        else:
            for r in rows:
                print(f"{r['generator']}: ({', '.join(r['xi'])})"
                      f"  {r['label']} (mu={r['mu']})")
            summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
            print(f"conformal dimension {len(rows)} total: {summary}")
        return EXIT_OK
    if not args.field:
        raise InputError("give a vectorfield name or --solve")
    if args.field not in loaded["vectorfields"]:
        known = ", ".join(sorted(loaded["vectorfields"])) or "(none)"
        raise InputError(f"unknown vectorfield '{args.field}'; "
                         f"manifest has: {known}")
    rep = conformal_check(M, loaded["vectorfields"][args.field],
                          seed=args.seed)
    if args.json:
        print(json.dumps({"field": args.field, "verdict": rep.verdict.value,
                          "mu": to_grammar(rep.mu),
                          "max_residual": rep.max_residual}, indent=2))
    else:
        print(f"{args.field}: {rep.verdict.value} (mu={to_grammar(rep.mu)})")
    return EXIT_OK


def _classify_rows(M, table):
    rows = []
    for i, e in enumerate(table.entries):
        rows.append({
            "generator": f"G{i + 1}",
            "xi": [to_grammar(c) for c in e.generator.xi.components],
            "a": to_grammar(e.generator.a),
            "b": to_grammar(e.generator.b),
            "mu": to_grammar(e.mu),
            "case": e.case,
            "checks": [{"name": name, "passed": ok}
                       for name, ok in e.side_checks.items()],
        })
    return rows


def cmd_classify(args) -> int:
    loaded = _resolve_input(args)
    M = loaded["space"]
    cls = _nonlinearity_from(args, loaded)
    basis = _basis_from(args, loaded)
    table = classify(M, cls, basis, SolverOptions(seed=args.seed))
    rows = _classify_rows(M, table)
    if args.json:
        print(json.dumps({"class": cls.tag.value, "dimension": len(rows),
                          "generators": rows}, indent=2))
    else:
        print(f"Classification, class '{cls.tag.value}': "
              f"{len(rows)} generator(s)")
        for r in rows:
            checks = ", ".join(
                f"{c['name']}={'ok' if c['passed'] else 'VIOLATED'}"
                for c in r["checks"]) or "(none)"
            print(f"{r['generator']}: xi=({', '.join(r['xi'])})  "
                  f"a={r['a']}  b={r['b']}  mu={r['mu']}")
            print(f"    case={r['case']}  checks: {checks}")
        if table.inconclusive:
            print(f"inconclusive directions: {len(table.inconclusive)}")
    return EXIT_OK


def cmd_noether(args) -> int:
    loaded = _resolve_input(args)
    M = loaded["space"]
    cls = _nonlinearity_from(args, loaded)
    gen = _generator_from(args, loaded, cls)
    lag = Lagrangian(M, cls)
    verdict = noether_classify(lag, gen)
    out = {"field": args.field, "class": cls.tag.value,
           "verdict": verdict.kind.value,
           "residual": to_grammar(sampling_ready(verdict.residual, cls))}
    if verdict.potential is not None:
        out["potential"] = [to_grammar(p) for p in verdict.potential]
    if verdict.c is not None:
        out["c"] = to_grammar(verdict.c)
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        line = f"{args.field} ({cls.tag.value}): {verdict.kind.value}"
        if verdict.kind is NoetherKind.DIVERGENCE:
            line += "  phi = (" + ", ".join(out["potential"]) + ")"
        elif verdict.kind is NoetherKind.SCALED_NON_NOETHER:
            line += f"  c = {out['c']}"
        elif verdict.kind is NoetherKind.NOT_NOETHER:
            line += f"  residual = {out['residual']}"
        print(line)
    return EXIT_OK


def cmd_current(args) -> int:
    loaded = _resolve_input(args)
    M = loaded["space"]
    cls = _nonlinearity_from(args, loaded)
    gen = _generator_from(args, loaded, cls)
    lag = Lagrangian(M, cls)
    verdict = noether_classify(lag, gen)
    if verdict.kind not in (NoetherKind.VARIATIONAL, NoetherKind.DIVERGENCE):
        raise SymmetryError(
            f"no conserved current: symmetry is {verdict.kind.value}")
    cur = build_current(lag, gen, verdict)
    out = {"component": [to_grammar(c) for c in cur.components],
           "max_divergence": None, "verdict": verdict.kind.value}
    lines = [f"A^{M.coords[k]} = {out['component'][k]}" for k in range(M.n)]
    if args.verify:
        sym_ok = verify_current_symbolic(cur)
        num = verify_current_numeric(cur, samples=args.verify, seed=args.seed)
        out["max_divergence"] = num.max_divergence
        out["symbolic_verified"] = sym_ok
        out["numeric_passed"] = num.passed
        tol = 1e-7 * (1 + num.scale)
        lines.append(f"symbolic divergence identity: "
                     f"{'PASS' if sym_ok else 'FAIL'}")
        lines.append(
            f"max |div| = {num.max_divergence:.3e} over {num.samples} "
            f"on-shell samples ({'<' if num.passed else '>='} {tol:.3e}): "
            f"{'PASS' if num.passed else 'FAIL'}")
        if not (sym_ok and num.passed):
            if args.json:
                print(json.dumps(out, indent=2))
            else:
                print("\n".join(lines))
            return EXIT_SYMMETRY
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        print("\n".join(lines))
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.all:
        names = catalog.GEOMETRY_NAMES
    elif args.geometry:
        if args.geometry not in catalog.GEOMETRY_NAMES:
            raise InputError(
                f"unknown geometry '{args.geometry}'; "
                f"choose from {catalog.GEOMETRY_NAMES}")
        names = (args.geometry,)
    else:
        raise InputError("give --geometry <name> or --all")
    reports = []
    for name in names:
        fix = catalog.load(name)
        rep = catalog.run_fixture_suite(fix)
        reports.append(rep)
        if not args.json:
            for line in rep.lines():
                print(line)
    all_ok = all(r.passed for r in reports)
    if args.json:
        print(json.dumps({
            "suites": [{
                "geometry": r.geometry,
                "passed": r.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "severity": c.severity, "detail": c.detail}
                           for c in r.checks],
                "class_dimensions": r.class_dimensions,
                "flagged_tables": r.flagged_tables,
            } for r in reports],
            "passed": all_ok,
        }, indent=2))
    else:
        print("-" * 40)
        for r in reports:
            flags = sum(1 for c in r.checks
                        if c.severity == "warning" and not c.passed)
            print(f"{r.geometry:12s} {'PASS' if r.passed else 'FAIL'}"
                  f"  ({len(r.checks)} checks, {flags} documented "
                  f"discrepancies flagged)")
    return EXIT_OK if all_ok else EXIT_SYMMETRY


def cmd_export(args) -> int:
    try:
        fix = catalog.load(args.geometry)
    except catalog.CatalogError as exc:
        raise InputError(str(exc)) from exc
    print(json.dumps(export_fixture(fix), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p, manifest=True):
    if manifest:
        p.add_argument("manifest", nargs="?", help="manifest JSON path")
        p.add_argument("--geometry", help="use a built-in geometry fixture")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--seed", type=int, default=7,
                   help="RNG seed for sampling reproducibility")


def _add_class_flags(p):
    p.add_argument("--class", dest="cls",
                   choices=("arbitrary", "zero", "constant", "linear",
                            "exponential", "power", "critical", "p2n6"),
                   help="nonlinearity class (overrides manifest)")
    p.add_argument("--p", type=str, default=None, help="power exponent")
    p.add_argument("--k", type=str, default=None,
                   help="constant value for the constant class")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poissonsym",
        description="Symmetry and conservation-law workbench for "
                    "Delta_g u + f(u) = 0 on Riemannian charts.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", help="Christoffels, Ricci, scalar curvature")
    _add_common(p)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("killing", help="verify or solve for conformal fields")
    _add_common(p)
    p.add_argument("field", nargs="?", help="vectorfield name to verify")
    p.add_argument("--solve", action="store_true",
                   help="solve the conformal equations over an ansatz")
    p.add_argument("--basis", help="ansatz basis: file or comma-separated")
    p.set_defaults(func=cmd_killing)

    p = sub.add_parser("classify", help="group classification table")
    _add_common(p)
    _add_class_flags(p)
    p.add_argument("--basis", help="ansatz basis: file or comma-separated")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("noether", help="Noether test for one symmetry")
    _add_common(p)
    _add_class_flags(p)
    p.add_argument("field", nargs="?", help="vectorfield name or inline components")
    p.set_defaults(func=cmd_noether)

    p = sub.add_parser("current", help="build and verify a conserved current")
    _add_common(p)
    _add_class_flags(p)
    p.add_argument("field", nargs="?", help="vectorfield name or inline components")
    p.add_argument("--verify", type=int, metavar="N", default=0,
                   help="verify symbolically and on N numeric samples")
    p.set_defaults(func=cmd_current)

    p = sub.add_parser("suite", help="run built-in fixture suites")
    _add_common(p, manifest=False)
    p.add_argument("--geometry", help="one geometry fixture")
    p.add_argument("--all", action="store_true", help="all eight geometries")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("export", help="print a fixture as a manifest")
    _add_common(p, manifest=False)
    p.add_argument("geometry", help="geometry fixture name")
    p.set_defaults(func=cmd_export)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ExprError, catalog.CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SymmetryError as exc:
        print(f"symmetry error: {exc}", file=sys.stderr)
        return EXIT_SYMMETRY
    except (NoetherError, DetSysError) as exc:
        print(f"symmetry error: {exc}", file=sys.stderr)
        return EXIT_SYMMETRY


if __name__ == "__main__":
    sys.exit(main())
