"""Determining-equation templates and exact solving for their constants.

A template builds the *defect* of a candidate linear determining
equation: left side minus right side, reduced on shell.  The defect is
linear in the undetermined constants, so collecting its numerator by
monomials in the jet coordinates gives an exact linear system over Q;
``solve_constants`` solves it with Gaussian elimination over Fractions
and reports a unique solution, a parametric family, or inconsistency
with a witness row.

``derive_coefficient_system`` runs the two-stage scheme used for
determining equations with an undetermined function in the constraint:
first the constants are fixed from the rows that involve jets above the
function's arguments, then the leftover defect is collected into the
system of equations the function itself must satisfy.

``solve_linear_expr`` is Gaussian elimination over the expression field
(exact division of expressions); the mixed-jet eliminator uses it to
solve the prolongation systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .symcore import (
    Atom,
    DomainError,
    Elem,
    Expr,
    Jet,
    MONO_ONE,
    Monomial,
    Opaque,
    Param,
    Rad,
    StructureError,
    Var,
    coefficient_of,
    collect,
    exponent_params,
    iter_atoms,
    leaf_jets,
    mono_key,
    partial,
    substitute,
    to_text,
)
from .jetcalc import JetSpace, RewriteSystem, total_derivative, total_derivatives


# --------------------------------------------------------------------------
# Linear algebra over the expression field.
# --------------------------------------------------------------------------

def _clear_denominator(e: Expr) -> Expr:
    return Expr(dict(e.num), {MONO_ONE: Fraction(1)})


def _exact_poly_quot(a: Expr, b: Expr) -> Expr:
    """a/b when b divides a exactly (both denominator-free); falls back to
    the reduced quotient when the division is not exact."""
    from .symcore import _poly_div_exact, reduce_quotient

    one = {MONO_ONE: Fraction(1)}
    if a.den == one and b.den == one:
        q = _poly_div_exact(a.num, b.num)
        if q is not None:
            return Expr(q, dict(one))
    return reduce_quotient(a / b)


def solve_linear_expr(eqs: list[Expr], unknowns: list[Atom]) -> list[Expr]:
    """Solve a square-or-overdetermined linear system for atom unknowns.

    Each equation is cleared of its denominator (nonzero wherever the
    system makes sense), then eliminated fraction-free in the Bareiss
    style so intermediate entries stay polynomial; the one-step divisions
    are exact by the Sylvester identity.  Raises if the system is not
    linear, is singular, or is inconsistent."""
    n = len(unknowns)
    uset = set(unknowns)
    zero = {a: Expr.const(0) for a in unknowns}
    M: list[list[Expr]] = []  # rows [a_1 .. a_n | -c0]
    for eq in eqs:
        eq = _clear_denominator(eq)
        row = [coefficient_of(eq, a) for a in unknowns]
        c0 = substitute(eq, zero)
        recon = c0
        for cf, a in zip(row, unknowns):
            recon = recon + cf * Expr.atom(a)
        if not (recon - eq).is_zero():
            raise StructureError(f"equation is not linear in {unknowns}: {to_text(eq)}")
        for cf in row:
            if uset & set(iter_atoms(cf)):
                raise StructureError("unknowns appear in their own coefficients")
        M.append(row + [-c0])
    m = len(M)
    prev = Expr.const(1)
    piv_of_col: list[int | None] = [None] * n
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if not M[i][c].is_zero()), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        piv = M[r][c]
        for i in range(r + 1, m):
            fi = M[i][c]
            M[i] = [
                _exact_poly_quot(piv * M[i][j] - fi * M[r][j], prev)
                for j in range(n + 1)
            ]
        prev = piv
        piv_of_col[c] = r
        r += 1
    for i in range(r, m):
        if not M[i][n].is_zero():
            raise StructureError(f"linear system is inconsistent: 0 = {to_text(M[i][n])}")
    if any(p is None for p in piv_of_col):
        raise StructureError("linear system is singular")
    sol: list[Expr | None] = [None] * n
    for c in reversed(range(n)):
        i = piv_of_col[c]
        acc = M[i][n]
        for j in range(c + 1, n):
            if not M[i][j].is_zero():
                acc = acc - M[i][j] * sol[j]
        sol[c] = _exact_poly_quot(acc, M[i][c])
    return sol


# --------------------------------------------------------------------------
# Exact solving for undetermined rational constants.
# --------------------------------------------------------------------------

@dataclass
class ConstantSolution:
    status: str  # "unique" | "family" | "inconsistent"
    assignments: dict[str, Expr]
    free: list[str]
    witness: Expr | None
    witness_part: Monomial | None
    rows: int

    @property
    def ok(self) -> bool:
        return self.status != "inconsistent"

    def rational(self) -> dict[str, Fraction]:
        out = {}
        for k, v in self.assignments.items():
            f = v.as_fraction()
            if f is None:
                raise StructureError(f"{k} is not fixed to a rational value")
            out[k] = f
        return out


def _check_unknowns_shallow(e: Expr, uset: set[str]) -> None:
    bad = exponent_params(e) & uset
    if bad:
        raise StructureError(f"unknown constants in exponents: {sorted(bad)}")
    for a in iter_atoms(e):
        if isinstance(a, Elem):
            inner = {p.name for p in iter_atoms(a.arg) if isinstance(p, Param)}
        elif isinstance(a, Opaque):
            inner = {
                p.name for g in a.args for p in iter_atoms(g) if isinstance(p, Param)
            }
        else:
            continue
        bad = inner & uset
        if bad:
            raise StructureError(
                f"unknown constants occur inside {to_text(Expr.atom(a))}: {sorted(bad)}"
            )


def solve_constants(defect: Expr | list[Expr], unknowns: list[str],
                    collect_over: set[Atom] | None = None, *,
                    param_field: bool = False) -> ConstantSolution:
    """Choose values of the named constants making the defect (or each
    defect of a list, with their coefficient rows kept separate) vanish
    identically (or identically on the rows that involve ``collect_over``
    atoms, when given).  The defects must be linear in the constants and
    they must not occur in a denominator.

    With ``param_field`` the remaining parameters are treated as part of
    the coefficient field rather than as collection atoms, so the solved
    constants may come out as rational functions of those parameters."""
    defects = [defect] if isinstance(defect, Expr) else list(defect)
    uset = set(unknowns)
    if param_field:
        return _solve_constants_field(defects, unknowns, uset, collect_over)
    rows: dict[tuple[int, Monomial], dict[str | None, Fraction]] = {}
    for idx, dft in enumerate(defects):
        _check_unknowns_shallow(dft, uset)
        den_atoms = {
            a.name
            for a in iter_atoms(Expr(dict(dft.den), {MONO_ONE: Fraction(1)}))
            if isinstance(a, Param)
        }
        if den_atoms & uset:
            raise StructureError(
                f"unknown constants in the denominator: {sorted(den_atoms & uset)}"
            )
        for m, c in dft.num.items():
            found: str | None = None
            rest = []
            for a, e in m:
                if isinstance(a, Param) and a.name in uset:
                    if found is not None or e != 1:
                        raise StructureError("defect is not linear in the unknown constants")
                    found = a.name
                else:
                    rest.append((a, e))
            row = rows.setdefault((idx, tuple(rest)), {})
            row[found] = row.get(found, Fraction(0)) + c
    if collect_over is not None:
        rows = {
            key: r for key, r in rows.items()
            if any(a in collect_over for a, _ in key[1])
        }
    order = list(unknowns)
    keys = sorted(rows, key=lambda key: (key[0], mono_key(key[1])))
    mat = [[rows[k].get(u, Fraction(0)) for u in order] + [rows[k].get(None, Fraction(0))]
           for k in keys]
    n = len(order)
    piv_of_col: dict[int, int] = {}
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        keys[r], keys[p] = keys[p], keys[r]
        inv = Fraction(1) / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        piv_of_col[c] = r
        r += 1
    for i in range(r, len(mat)):
        if mat[i][n]:
            witness = Expr.const(mat[i][n])
            for c in range(n):
                if mat[i][c]:
                    witness = witness + Expr.const(mat[i][c]) * Expr.atom(Param(order[c]))
            return ConstantSolution("inconsistent", {}, [], witness, keys[i][1], len(rows))
    free = [order[c] for c in range(n) if c not in piv_of_col]
    assignments: dict[str, Expr] = {}
    for c, i in piv_of_col.items():
        val = Expr.const(-mat[i][n])
        for c2 in range(n):
            if c2 != c and mat[i][c2]:
                val = val - Expr.const(mat[i][c2]) * Expr.atom(Param(order[c2]))
        assignments[order[c]] = val
    status = "unique" if not free else "family"
    return ConstantSolution(status, assignments, free, None, None, len(rows))


def _solve_constants_field(defects: list[Expr], unknowns: list[str],
                           uset: set[str],
                           collect_over: set[Atom] | None) -> ConstantSolution:
    zero = Expr.const(0)
    rows: dict[tuple[int, Monomial], dict[str | None, Expr]] = {}
    for idx, dft in enumerate(defects):
        _check_unknowns_shallow(dft, uset)
        den_atoms = {
            a.name
            for a in iter_atoms(Expr(dict(dft.den), {MONO_ONE: Fraction(1)}))
            if isinstance(a, Param)
        }
        if den_atoms & uset:
            raise StructureError(
                f"unknown constants in the denominator: {sorted(den_atoms & uset)}"
            )
        for m, c in dft.num.items():
            found: str | None = None
            state = []
            carried = []
            for a, e in m:
                if isinstance(a, Param) and a.name in uset:
                    if found is not None or e != 1:
                        raise StructureError("defect is not linear in the unknown constants")
                    found = a.name
                elif isinstance(a, Param):
                    carried.append((a, e))
                else:
                    state.append((a, e))
            entry = Expr({tuple(carried): c}, {MONO_ONE: Fraction(1)})
            row = rows.setdefault((idx, tuple(state)), {})
            row[found] = row.get(found, zero) + entry
    if collect_over is not None:
        rows = {
            key: r for key, r in rows.items()
            if any(a in collect_over for a, _ in key[1])
        }
    order = list(unknowns)
    keys = sorted(rows, key=lambda key: (key[0], mono_key(key[1])))
    mat = [[rows[k].get(u, zero) for u in order] + [rows[k].get(None, zero)]
           for k in keys]
    n = len(order)
    piv_of_col: dict[int, int] = {}
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(mat)) if not mat[i][c].is_zero()), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        keys[r], keys[p] = keys[p], keys[r]
        piv = mat[r][c]
        mat[r] = [x / piv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and not mat[i][c].is_zero():
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        piv_of_col[c] = r
        r += 1
    for i in range(r, len(mat)):
        if not mat[i][n].is_zero():
            witness = mat[i][n]
            for c in range(n):
                if not mat[i][c].is_zero():
                    witness = witness + mat[i][c] * Expr.atom(Param(order[c]))
            return ConstantSolution("inconsistent", {}, [], witness, keys[i][1], len(rows))
    free = [order[c] for c in range(n) if c not in piv_of_col]
    assignments: dict[str, Expr] = {}
    for c, i in piv_of_col.items():
        val = -mat[i][n]
        for c2 in range(n):
            if c2 != c and not mat[i][c2].is_zero():
                val = val - mat[i][c2] * Expr.atom(Param(order[c2]))
        assignments[order[c]] = val
    status = "unique" if not free else "family"
    return ConstantSolution(status, assignments, free, None, None, len(rows))


def apply_solution(e: Expr, sol: ConstantSolution) -> Expr:
    return substitute(e, {Param(k): v for k, v in sol.assignments.items()})


# --------------------------------------------------------------------------
# Equation normalization for presenting derived systems.
# --------------------------------------------------------------------------

def normalize_equation(e: Expr) -> Expr:
    """Numerator of e with numeric content, sign, and the polynomial gcd of
    its cofactors over variables, parameters, and jets stripped.  Elementary
    and opaque factors are kept since they can vanish where the generic
    polynomial content cannot."""
    from .symcore import _must_div, _normalize_pairs, _poly_list_gcd

    p = dict(e.num)
    if not p:
        return Expr.const(0)
    # clear negative exponents so gcd machinery applies
    mins: dict[Atom, Fraction] = {}
    for m in p:
        for a, x in m:
            if isinstance(x, Fraction) and x < 0:
                mins[a] = min(mins.get(a, Fraction(0)), x)
    if mins:
        shift = [(a, -x) for a, x in mins.items()]
        out = {}
        for m, c in p.items():
            k, mm = _normalize_pairs(list(m) + list(shift))
            out[mm] = c * k
        p = out
    # split off elementary/opaque parts; strip the gcd of the cofactors
    groups: dict[Monomial, dict] = {}
    for m, c in p.items():
        protected = tuple((a, x) for a, x in m if isinstance(a, (Elem, Opaque)))
        cofactor = tuple((a, x) for a, x in m if not isinstance(a, (Elem, Opaque)))
        groups.setdefault(protected, {})[cofactor] = c
    g = _poly_list_gcd(list(groups.values()))
    if not (len(g) == 1 and MONO_ONE in g):
        p = {}
        for protected, cof in groups.items():
            q = _must_div(cof, g)
            for m, c in q.items():
                k, mm = _normalize_pairs(list(m) + list(protected))
                p[mm] = p.get(mm, Fraction(0)) + c * k
        p = {m: c for m, c in p.items() if c}
    from math import gcd
    num_g = 0
    den_l = 1
    for c in p.values():
        num_g = gcd(num_g, abs(c.numerator))
        den_l = den_l * c.denominator // gcd(den_l, c.denominator)
    content = Fraction(num_g, den_l)
    lead = max(p, key=mono_key)
    if p[lead] < 0:
        content = -content
    return Expr({m: c / content for m, c in p.items()}, {MONO_ONE: Fraction(1)})


def equations_equal(a: Expr, b: Expr) -> bool:
    """Same equation up to a nonzero rational multiple."""
    return normalize_equation(a) == normalize_equation(b)


# --------------------------------------------------------------------------
# Two-stage solving with an undetermined function in the constraint.
# --------------------------------------------------------------------------

@dataclass
class CoefficientSystem:
    constants: ConstantSolution
    equations: list[Expr]
    raw: dict[Monomial, Expr] = field(default_factory=dict)


def jet_atoms_above(e: Expr, order: int) -> set[Atom]:
    return {a for a in leaf_jets(e) if a.order > order}


def derive_coefficient_system(defect: Expr, constants: list[str], *,
                              solve_above: int, collect_above: int) -> CoefficientSystem:
    """Fix the constants from the defect rows that involve jets of order
    greater than ``solve_above``, substitute them, then collect the rest
    by monomials in the jets above ``collect_above``.  Every collected
    coefficient must vanish; the deduplicated, normalized list is the
    system for the undetermined function."""
    high = jet_atoms_above(defect, solve_above)
    sol = solve_constants(defect, constants, collect_over=high)
    if not sol.ok:
        return CoefficientSystem(sol, [])
    reduced = apply_solution(defect, sol)
    parts = collect(reduced, sorted(jet_atoms_above(reduced, collect_above), key=lambda a: a.key()))
    equations: list[Expr] = []
    for part, coeff in parts.items():
        if coeff.is_zero():
            continue
        eq = normalize_equation(coeff)
        if not any(eq == other for other in equations):
            equations.append(eq)
    equations.sort(key=lambda e: e.key())
    return CoefficientSystem(sol, equations, parts)


# --------------------------------------------------------------------------
# Template builders.  Each returns the defect of the determining equation
# (left side minus right side, on shell), still containing the named
# constants as parameters.
# --------------------------------------------------------------------------

def evolution_lde_defect(space: JetSpace, system: RewriteSystem, F: Expr, n: int,
                         h: Expr, b: dict[tuple[int, int], Expr]) -> Expr:
    """Defect of D_t h = sum b_ik D_x^(i-k)(dF/du_(n-k)) D_x^(n-i) h for a
    single evolution equation u_t = F of order n in one spatial axis."""
    (ax,) = space.axes
    dep = space.deps[0]
    lhs = system.reduce(total_derivative(h, space, space.time))
    rhs = Expr.const(0)
    dh = {0: h}
    for j in range(1, n + 1):
        dh[j] = total_derivative(dh[j - 1], space, ax)
    for i in range(n + 1):
        for k in range(i + 1):
            Fu = partial(F, space.jet_atom(dep, 0, (n - k,)))
            term = total_derivatives(Fu, space, mi=(i - k,)) * dh[n - i]
            rhs = rhs + b[i, k] * term
    return system.reduce(lhs - rhs)


def second_order_lde_defect(space: JetSpace, system: RewriteSystem, F: Expr,
                            h: Expr, c: dict[int, Expr]) -> Expr:
    """Defect of the five-constant form for u_t = F(t, x, u, u_x, u_xx):
    D_t h = F_u2 Dx^2 h + (c1 F_u1 + c2 Dx F_u2) Dx h
            + (c3 F_u + c4 Dx F_u1 + c5 Dx^2 F_u2) h."""
    (ax,) = space.axes
    dep = space.deps[0]
    u0 = space.jet_atom(dep, 0, (0,))
    u1 = space.jet_atom(dep, 0, (1,))
    u2 = space.jet_atom(dep, 0, (2,))
    Dx = lambda e: total_derivative(e, space, ax)
    Fu, Fu1, Fu2 = partial(F, u0), partial(F, u1), partial(F, u2)
    lhs = system.reduce(total_derivative(h, space, space.time))
    h1 = Dx(h)
    rhs = (
        Fu2 * Dx(h1)
        + (c[1] * Fu1 + c[2] * Dx(Fu2)) * h1
        + (c[3] * Fu + c[4] * Dx(Fu1) + c[5] * Dx(Dx(Fu2))) * h
    )
    return system.reduce(lhs - rhs)


def hyperbolic_lde_defect(space: JetSpace, system: RewriteSystem, F: Expr, n: int,
                          h: Expr, b: dict[tuple[int, int], Expr]) -> Expr:
    """Defect of D_tt h = sum b_ik D_x^(i-k)(dF/du_(n-k)) D_x^(n-i) h for
    u_tt = F of order n in one spatial axis."""
    (ax,) = space.axes
    dep = space.deps[0]
    lhs = system.reduce(total_derivatives(h, space, t=2))
    rhs = Expr.const(0)
    dh = {0: h}
    for j in range(1, n + 1):
        dh[j] = total_derivative(dh[j - 1], space, ax)
    for i in range(n + 1):
        for k in range(i + 1):
            Fu = partial(F, space.jet_atom(dep, 0, (n - k,)))
            term = total_derivatives(Fu, space, mi=(i - k,)) * dh[n - i]
            rhs = rhs + b[i, k] * term
    return system.reduce(lhs - rhs)


def two_axis_lde_defect(eliminator, h: Expr, b1: Expr, b2: Expr) -> Expr:
    """Defect of  Dx^2 h + z_y DxDy h - z_x Dy^2 h + b1 z_yy Dx h
    + b2 z_xy Dy h = 0  reduced modulo the second-order equation held by
    the eliminator (mixed jets rewritten through pure ones)."""
    space = eliminator.space
    x, y = space.axes
    dep = eliminator.dep
    p = space.jet(dep, 0, (1, 0))
    q = space.jet(dep, 0, (0, 1))
    zyy = space.jet(dep, 0, (0, 2))
    zxy = space.jet(dep, 0, (1, 1))
    Dx = lambda e: total_derivative(e, space, x)
    Dy = lambda e: total_derivative(e, space, y)
    hx, hy = Dx(h), Dy(h)
    e = Dx(hx) + q * Dy(hx) - p * Dy(hy) + b1 * zyy * hx + b2 * zxy * hy
    return eliminator.reduce(e)


def rd_lde_defects(space: JetSpace, system: RewriteSystem, *,
                   k: int, l: int, m: int, n: int, d1,
                   f1: Expr, f2: Expr, h: Expr, beta: Expr,
                   b: dict[int, Expr]) -> tuple[Expr, Expr]:
    """Defects of the coupled pair of determining equations for the
    reaction-diffusion system u_t = (u^k v^l u_x)_x + f1(u, v),
    v_t = d1 (u^m v^n v_x)_x + f2(u, v), with constants b[1]..b[16]."""
    (ax,) = space.axes
    u = space.jet("u")
    v = space.jet("v")
    ua = space.jet_atom("u")
    va = space.jet_atom("v")
    ux, vx = space.jet("u", 0, (1,)), space.jet("v", 0, (1,))
    uxx, vxx = space.jet("u", 0, (2,)), space.jet("v", 0, (2,))
    d1 = d1 if isinstance(d1, Expr) else Expr.const(d1)
    Dx = lambda e: total_derivative(e, space, ax)
    Dt = lambda e: system.reduce(total_derivative(e, space, space.time))
    f1u, f1v = partial(f1, ua), partial(f1, va)
    f2u, f2v = partial(f2, ua), partial(f2, va)
    hx, bx = Dx(h), Dx(beta)
    rhs1 = (
        u ** k * v ** l * Dx(hx)
        + (b[1] * k * u ** (k - 1) * v ** l * ux + b[2] * l * u ** k * v ** (l - 1) * vx) * hx
        + b[3] * l * u ** k * v ** (l - 1) * ux * bx
        + (
            b[4] * f1u
            + (b[4] + 2 * b[5] + b[6]) * k * (u ** (k - 1) * v ** l * uxx
                                              + (k - 1) * u ** (k - 2) * v ** l * ux ** 2)
            + (b[4] + 3 * b[5] + b[6]) * k * l * u ** (k - 1) * v ** (l - 1) * ux * vx
            + (b[5] + b[6]) * l * (u ** k * v ** (l - 1) * vxx
                                   + (l - 1) * u ** k * v ** (l - 2) * vx ** 2)
        ) * h
        + (
            b[7] * f1v
            + b[8] * l * (u ** k * v ** (l - 1) * uxx + k * u ** (k - 1) * v ** (l - 1) * ux ** 2
                          + (l - 1) * u ** k * v ** (l - 2) * ux * vx)
        ) * beta
    )
    rhs2 = (
        d1 * u ** m * v ** n * Dx(bx)
        + d1 * (b[9] * m * u ** (m - 1) * v ** n * ux + b[10] * n * u ** m * v ** (n - 1) * vx) * bx
        + b[11] * d1 * m * u ** (m - 1) * v ** n * vx * hx
        + (
            b[12] * f2u
            + b[13] * d1 * m * (u ** (m - 1) * v ** n * vxx
                                + n * u ** (m - 1) * v ** (n - 1) * vx ** 2
                                + (m - 1) * u ** (m - 2) * v ** n * ux * vx)
        ) * h
        + (
            b[14] * f2v
            + d1 * n * (b[14] + 2 * b[15] + b[16]) * (u ** m * v ** (n - 1) * vxx
                                                      + (n - 1) * u ** m * v ** (n - 2) * vx ** 2)
            + d1 * (b[14] + 3 * b[15] + b[16]) * m * n * u ** (m - 1) * v ** (n - 1) * ux * vx
            + d1 * m * (b[15] + b[16]) * (u ** (m - 1) * v ** n * uxx
                                          + (m - 1) * u ** (m - 2) * v ** n * ux ** 2)
        ) * beta
    )
    return Dt(h) - system.reduce(rhs1), Dt(beta) - system.reduce(rhs2)


def three_var_lde_defects(space: JetSpace, system: RewriteSystem, G: Expr,
                          h1: Expr, h2: Expr,
                          a: dict[int, Expr], b: dict[int, Expr]) -> tuple[Expr, Expr]:
    """Defects of the pair of determining equations for u_t = G with two
    spatial axes; the second operator mirrors the first under swapping the
    axes, the constraints, and the constant families."""
    x, y = space.axes
    dep = space.deps[0]
    u0 = space.jet_atom(dep)
    Dx = lambda e: total_derivative(e, space, x)
    Dy = lambda e: total_derivative(e, space, y)
    Gu = partial(G, u0)
    Gux = partial(G, space.jet_atom(dep, 0, (1, 0)))
    Guy = partial(G, space.jet_atom(dep, 0, (0, 1)))
    Guxx = partial(G, space.jet_atom(dep, 0, (2, 0)))
    Guyy = partial(G, space.jet_atom(dep, 0, (0, 2)))

    def L(c, hA, hB, Dm, Dm2, Do, GuM, GuO, GuMx, GuMy):
        # main axis M, other axis O; for L11: M=x, O=y
        return (
            c[1] * GuM * Dm2(hA)
            + c[2] * GuO * Do(Do(hA))
            + (c[3] * GuMx + c[4] * Dm(GuM)) * Dm(hA)
            + c[5] * GuMy * Do(hA)
            + c[6] * Dm(GuO) * Do(hB)
            + (c[7] * Gu + c[8] * Dm2(GuM) + c[9] * Do(Do(GuO))) * hA
        )

    L11 = L(a, h1, h2, Dx, lambda e: Dx(Dx(e)), Dy, Guxx, Guyy, Gux, Guy)
    L12 = L(b, h2, h1, Dy, lambda e: Dy(Dy(e)), Dx, Guyy, Guxx, Guy, Gux)
    d1 = system.reduce(total_derivative(h1, space, space.time)) - system.reduce(L11)
    d2 = system.reduce(total_derivative(h2, space, space.time)) - system.reduce(L12)
    return d1, d2


def qde_defects(space: JetSpace, system: RewriteSystem,
                h1: Expr, h2: Expr,
                a: dict[int, Expr], b: dict[int, Expr],
                r1: Expr, r2: Expr, q1: Expr, q2: Expr) -> tuple[Expr, Expr]:
    """Defects of the quasilinear determining equations for the long-wave
    equation u_tt - Laplace(u_tt) - u Laplace(u) - |grad u|^2 = 0."""
    x, y = space.axes
    dep = space.deps[0]
    u = space.jet(dep)
    ux, uy = space.jet(dep, 0, (1, 0)), space.jet(dep, 0, (0, 1))
    uxx, uyy = space.jet(dep, 0, (2, 0)), space.jet(dep, 0, (0, 2))
    Dx = lambda e: total_derivative(e, space, x)
    Dy = lambda e: total_derivative(e, space, y)
    Dt = lambda e: total_derivative(e, space, space.time)

    def qde(hA, hB, c, rA, qA, main_first):
        lap = Dx(Dx(hA)) + Dy(Dy(hA))
        e = Dt(Dt(hA)) - Dt(Dt(Dx(Dx(hA)))) - Dt(Dt(Dy(Dy(hA))))
        e = e + c[1] * u * lap
        if main_first:
            e = e + c[2] * ux * Dx(hA) + c[3] * uy * Dy(hA) + c[4] * ux * Dy(hB)
        else:
            e = e + c[2] * uy * Dy(hA) + c[3] * ux * Dx(hA) + c[4] * uy * Dx(hB)
        e = e + (c[5] * (uxx + uyy) + c[6] * uxx + c[7] * uyy + rA) * hA + qA * hB
        return system.reduce(e)

    return (
        qde(h1, h2, a, r1, q1, True),
        qde(h2, h1, b, r2, q2, False),
    )
