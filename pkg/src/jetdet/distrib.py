"""Vector fields, involutive distributions, and first-order invariant
manifolds.

A field acts on functions of the base coordinates (time, axes, and the
dependent variables taken at order zero); commutators and the
involutivity test are exact.  For a square collection with invertible
coefficient matrix, ``manifold_from_fields`` produces both the
characteristic constraints and the normalized form u_x = g obtained by
inverting the matrix with the adjugate, and
``check_cross_compatibility`` verifies the Frobenius closure of the
normalized system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .symcore import (
    Expr,
    Jet,
    StructureError,
    Var,
    leaf_jets,
    partial,
    substitute,
)
from .jetcalc import JetSpace, RewriteSystem, Rule, rule_from_equation


def _check_base_coefficient(e: Expr, what: str) -> None:
    for j in leaf_jets(e):
        if j.torder or any(j.mi):
            raise StructureError(f"{what} depends on the derivative coordinate {j!r}")


@dataclass(frozen=True)
class VectorField:
    """First-order operator  sum xi^i d/dx_i + sum eta^j d/du^j  with
    coefficients depending on time, the axes, and the u's themselves."""

    space: JetSpace
    xi: tuple[Expr, ...]
    eta: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.xi) != len(self.space.axes) or len(self.eta) != len(self.space.deps):
            raise StructureError("field has the wrong number of components")
        for e in (*self.xi, *self.eta):
            _check_base_coefficient(e, "field coefficient")

    def apply(self, e: Expr) -> Expr:
        out = Expr.const(0)
        for ax, c in zip(self.space.axes, self.xi):
            out = out + c * partial(e, Var(ax))
        for dep, c in zip(self.space.deps, self.eta):
            out = out + c * partial(e, self.space.jet_atom(dep))
        return out

    def __add__(self, other: VectorField) -> VectorField:
        return VectorField(
            self.space,
            tuple(a + b for a, b in zip(self.xi, other.xi)),
            tuple(a + b for a, b in zip(self.eta, other.eta)),
        )

    def __rmul__(self, c) -> VectorField:
        return VectorField(
            self.space,
            tuple(c * a for a in self.xi),
            tuple(c * a for a in self.eta),
        )

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in (*self.xi, *self.eta))


def vector_field(space: JetSpace, xi: dict[str, Expr] | None = None,
                 eta: dict[str, Expr] | None = None) -> VectorField:
    """Build a field from sparse component maps keyed by axis / dep name."""
    xi = xi or {}
    eta = eta or {}
    zero = Expr.const(0)
    return VectorField(
        space,
        tuple(xi.get(ax, zero) for ax in space.axes),
        tuple(eta.get(dep, zero) for dep in space.deps),
    )


def commutator(X: VectorField, Y: VectorField) -> VectorField:
    """Lie bracket [X, Y]; components X(Y_c) - Y(X_c)."""
    if X.space is not Y.space and X.space != Y.space:
        raise StructureError("fields live on different spaces")
    return VectorField(
        X.space,
        tuple(X.apply(c) - Y.apply(d) for c, d in zip(Y.xi, X.xi)),
        tuple(X.apply(c) - Y.apply(d) for c, d in zip(Y.eta, X.eta)),
    )


@dataclass(frozen=True)
class Distribution:
    """A basis of vector fields spanning a distribution."""

    basis: tuple[VectorField, ...]

    def __post_init__(self):
        if not self.basis:
            raise StructureError("empty basis")
        sp = self.basis[0].space
        if any(f.space != sp for f in self.basis):
            raise StructureError("basis fields live on different spaces")

    @property
    def space(self) -> JetSpace:
        return self.basis[0].space


def _basis_of(D) -> list[VectorField]:
    if isinstance(D, Distribution):
        return list(D.basis)
    return list(D)


def _symbolic_rank(rows: list[list[Expr]]) -> int:
    """Rank over the expression field, by elimination with is_zero pivoting."""
    M = [row[:] for row in rows]
    rank = 0
    cols = len(M[0]) if M else 0
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, len(M)) if not M[i][c].is_zero()), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        for i in range(r + 1, len(M)):
            if not M[i][c].is_zero():
                f = M[i][c] / M[r][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        r += 1
        rank += 1
        if r == len(M):
            break
    return rank


@dataclass
class InvolutivityReport:
    ok: bool
    structure: dict[tuple[int, int], list[Expr]] = field(default_factory=dict)
    witness: str | None = None


def check_involutive(D) -> InvolutivityReport:
    """Try to express every commutator in the given basis by an exact
    linear solve over the expression field; structure functions are
    returned per pair on success.  Accepts a Distribution or a plain
    list of fields; a rank-deficient coefficient matrix is an error."""
    from .symcore import param, single_atom
    from .detsolve import solve_linear_expr

    fields = _basis_of(D)
    if not fields:
        return InvolutivityReport(True)
    xi = [list(f.xi) for f in fields]
    if _symbolic_rank(xi) < len(fields):
        raise StructureError("degenerate basis: xi matrix has deficient rank")
    report = InvolutivityReport(True)
    names = [f"_c{k}" for k in range(len(fields))]
    unknowns = [param(nm) for nm in names]
    uatoms = [single_atom(u) for u in unknowns]
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            br = commutator(fields[i], fields[j])
            if br.is_zero():
                report.structure[i, j] = [Expr.const(0)] * len(fields)
                continue
            comps = list(br.xi) + list(br.eta)
            basis = [list(f.xi) + list(f.eta) for f in fields]
            eqs = []
            for c in range(len(comps)):
                acc = -comps[c]
                for k, u in enumerate(unknowns):
                    acc = acc + u * basis[k][c]
                eqs.append(acc)
            try:
                sol = solve_linear_expr(eqs, uatoms)
            except StructureError as err:
                report.ok = False
                report.witness = f"[X{i + 1}, X{j + 1}]: {err}"
                continue
            report.structure[i, j] = sol
    return report


# --------------------------------------------------------------------------
# Exact matrix inversion via the adjugate.
# --------------------------------------------------------------------------

def det(mat: list[list[Expr]]) -> Expr:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    out = Expr.const(0)
    sign = 1
    for c in range(n):
        minor = [row[:c] + row[c + 1:] for row in mat[1:]]
        out = out + sign * mat[0][c] * det(minor)
        sign = -sign
    return out


def adjugate(mat: list[list[Expr]]) -> list[list[Expr]]:
    n = len(mat)
    if n == 1:
        return [[Expr.const(1)]]
    out = [[Expr.const(0)] * n for _ in range(n)]
    for r in range(n):
        for c in range(n):
            minor = [
                [mat[i][j] for j in range(n) if j != c]
                for i in range(n) if i != r
            ]
            out[c][r] = (-1) ** (r + c) * det(minor)
    return out


@dataclass
class FirstOrderManifold:
    """Constraints  sum_i xi_k^i u^j_{x_i} - eta_k^j = 0  together with the
    solved form  u^j_{x_k} = g_k^j  used for Frobenius checks."""

    space: JetSpace
    equations: list[Expr]
    normalized: dict[tuple[str, str], Expr]  # (dep, axis) -> right side

    def constraint_exprs(self) -> list[Expr]:
        out = []
        for (dep, ax), g in sorted(self.normalized.items()):
            mi = tuple(1 if a == ax else 0 for a in self.space.axes)
            out.append(self.space.jet(dep, 0, mi) - g)
        return out

    def rules(self) -> list[Rule]:
        return [rule_from_equation(h) for h in self.constraint_exprs()]

    def rewrite_system(self) -> RewriteSystem:
        return RewriteSystem(self.space, self.rules())


def manifold_from_fields(D) -> FirstOrderManifold:
    """Characteristic constraints of a square field collection, plus the
    normalized right sides obtained from the adjugate inverse."""
    fields = _basis_of(D)
    if not fields:
        raise StructureError("no fields given")
    space = fields[0].space
    n = len(space.axes)
    if len(fields) != n:
        raise StructureError("need as many fields as axes for the normalized form")
    xi = [list(f.xi) for f in fields]
    d = det(xi)
    if d.is_zero():
        raise StructureError("field coefficient matrix is singular")
    adj = adjugate(xi)
    equations = []
    for k, f in enumerate(fields):
        for jdep, dep in enumerate(space.deps):
            h = -f.eta[jdep]
            for i, ax in enumerate(space.axes):
                mi = tuple(1 if a == ax else 0 for a in space.axes)
                h = h + f.xi[i] * space.jet(dep, 0, mi)
            equations.append(h)
    normalized: dict[tuple[str, str], Expr] = {}
    for r, ax in enumerate(space.axes):
        for jdep, dep in enumerate(space.deps):
            g = Expr.const(0)
            for k in range(n):
                g = g + adj[r][k] * fields[k].eta[jdep]
            normalized[dep, ax] = g / d
    return FirstOrderManifold(space, equations, normalized)


@dataclass
class CrossCompatibilityReport:
    residuals: dict[tuple[str, str, str], Expr] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.is_zero() for r in self.residuals.values())


def check_cross_compatibility(M: FirstOrderManifold) -> CrossCompatibilityReport:
    """Frobenius closure of the normalized system: the solved x_i and x_k
    derivatives of every dependent variable must commute along the
    manifold (Z_i g_k = Z_k g_i with Z the solved directions)."""
    space = M.space

    def Z(ax: str, e: Expr) -> Expr:
        out = partial(e, Var(ax))
        for dep in space.deps:
            out = out + M.normalized[dep, ax] * partial(e, space.jet_atom(dep))
        return out

    report = CrossCompatibilityReport()
    axes = space.axes
    for a in range(len(axes)):
        for b in range(a + 1, len(axes)):
            for dep in space.deps:
                lhs = Z(axes[a], M.normalized[dep, axes[b]])
                rhs = Z(axes[b], M.normalized[dep, axes[a]])
                report.residuals[dep, axes[a], axes[b]] = lhs - rhs
    return report


def tangency_residuals(D, solution: dict[str, Expr]) -> list[Expr]:
    """Graph tangency of an explicit solution u^j = phi^j(t, x): for each
    field, eta^j - sum_i xi^i d(phi^j)/dx_i with u's replaced by the phi's."""
    fields = _basis_of(D)
    out = []
    if not fields:
        return out
    space = fields[0].space
    graph = {space.jet_atom(dep): phi for dep, phi in solution.items()}
    for f in fields:
        for jdep, dep in enumerate(space.deps):
            phi = solution[dep]
            r = f.eta[jdep]
            for i, ax in enumerate(space.axes):
                r = r - f.xi[i] * partial(phi, Var(ax))
            out.append(substitute(r, graph))
    return out


# --------------------------------------------------------------------------
# Quasilinear determining equations for the long-wave equation.
# --------------------------------------------------------------------------

@dataclass
class QdeReport:
    ok: bool
    residuals: tuple[Expr, Expr]


def verify_qde(system, h1: Expr, h2: Expr,
               constants: dict[str, Expr],
               coeff_fns: dict[str, Expr],
               ode_map: dict | None = None) -> QdeReport:
    """Check the pair of quasilinear determining equations for first-order
    constraints of u_tt - Laplace(u_tt) - u Laplace(u) - |grad u|^2 = 0.

    ``system`` is the equation's rewrite chart (or the equation itself,
    oriented at its highest coordinate); ``constants`` holds a1..a7 and
    b1..b7, ``coeff_fns`` holds r1, r2, q1, q2.  ``ode_map`` optionally
    substitutes second derivatives of the s coefficients by the right
    sides of their ODE system before the zero test; without it the
    residuals come back unevaluated for collection.
    """
    from .detsolve import qde_defects

    if isinstance(system, Expr):
        space = _space_of_equation(system)
        system = RewriteSystem(space, [rule_from_equation(system)])
    space = system.space

    def grab(prefix):
        return {k: _coerce_expr(constants[f"{prefix}{k}"]) for k in range(1, 8)}

    d1, d2 = qde_defects(
        space, system, h1, h2, grab("a"), grab("b"),
        _coerce_expr(coeff_fns["r1"]), _coerce_expr(coeff_fns["r2"]),
        _coerce_expr(coeff_fns["q1"]), _coerce_expr(coeff_fns["q2"]),
    )
    if ode_map:
        d1 = substitute(d1, ode_map)
        d2 = substitute(d2, ode_map)
    return QdeReport(d1.is_zero() and d2.is_zero(), (d1, d2))


def _coerce_expr(v) -> Expr:
    return v if isinstance(v, Expr) else Expr.const(v)


def _space_of_equation(e: Expr) -> JetSpace:
    jets = leaf_jets(e)
    if not jets:
        raise StructureError("equation has no jet coordinates")
    j = next(iter(jets))
    time = "t" if any(k.torder for k in jets) else None
    deps = tuple(sorted({k.dep for k in jets}))
    return JetSpace(j.axes, deps, time)
