"""Jet-space calculus: total derivatives, prolongation, on-shell reduction.

A ``JetSpace`` fixes the independent variables (an optional time plus
spatial axes) and the dependent variable names.  Jet coordinates are the
``Jet`` atoms of the kernel.

On-shell reduction is rewriting: a ``Rule`` orients an equation as
``leader -> rhs`` where the leader is a jet coordinate and the rhs only
involves jets below it.  A ``RewriteSystem`` reduces expressions modulo
the prolongations of its rules (derivative cone of each leader).
Evolution systems (u_t = F), hyperbolic equations (u_tt = F) and
differential constraints (h = 0 solved for the highest jet) are all
instances.

Equations that cannot be oriented with a derivative-chain rewrite need
joint elimination order by order; ``MixedJetEliminator`` does this for a
second-order equation in two spatial axes, solving the linear systems
that the prolongations impose on the mixed derivatives so that every
mixed jet z_{x^a y^b} (a, b >= 1) is expressed through the pure jets
z_{x^a}, z_{y^b}.

``check_invariance`` tests compatibility of an equation (or system) with
a set of differential constraints by reducing all critical pairs of the
joint rewrite system to normal form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .symcore import (
    DomainError,
    Expr,
    Jet,
    Monomial,
    MONO_ONE,
    Param,
    StructureError,
    Var,
    coefficient_of,
    collect,
    leaf_jets,
    partial,
    reduce_quotient,
    substitute,
    to_text,
)


class ReductionError(RuntimeError):
    """Rewriting failed to reach a normal form within the step budget."""


_PASS_LIMIT = 60


@dataclass(frozen=True)
class JetSpace:
    """Names of the independent and dependent variables of a problem."""

    axes: tuple[str, ...]
    deps: tuple[str, ...]
    time: str | None = None

    def __post_init__(self):
        names = list(self.axes) + list(self.deps) + ([self.time] if self.time else [])
        if len(set(names)) != len(names):
            raise StructureError(f"variable names collide: {names}")

    def jet(self, dep: str, torder: int = 0, mi: tuple[int, ...] | None = None) -> Expr:
        if dep not in self.deps:
            raise StructureError(f"unknown dependent variable {dep!r}")
        if torder and self.time is None:
            raise StructureError("space has no time variable")
        if mi is None:
            mi = (0,) * len(self.axes)
        return Expr.atom(Jet(dep, torder, tuple(mi), self.axes))

    def jet_atom(self, dep: str, torder: int = 0, mi: tuple[int, ...] | None = None) -> Jet:
        if mi is None:
            mi = (0,) * len(self.axes)
        return Jet(dep, torder, tuple(mi), self.axes)

    def var(self, name: str) -> Expr:
        return Expr.atom(Var(name))

    def directions(self) -> tuple[str, ...]:
        return ((self.time,) if self.time else ()) + self.axes


def bump(j: Jet, space: JetSpace, wrt: str) -> Jet:
    if wrt == space.time:
        return Jet(j.dep, j.torder + 1, j.mi, j.axes)
    i = space.axes.index(wrt)
    mi = tuple(k + (1 if n == i else 0) for n, k in enumerate(j.mi))
    return Jet(j.dep, j.torder, mi, j.axes)


def total_derivative(e: Expr, space: JetSpace, wrt: str) -> Expr:
    """Total derivative D_wrt on the jet space: the explicit partial plus
    the chain over all jet coordinates present in e."""
    if wrt != space.time and wrt not in space.axes:
        raise StructureError(f"{wrt!r} is not a direction of {space}")
    out = partial(e, Var(wrt))
    for j in leaf_jets(e):
        d = partial(e, j)
        if not d.is_zero():
            out = out + d * Expr.atom(bump(j, space, wrt))
    return out


def total_derivatives(e: Expr, space: JetSpace, *, t: int = 0, mi: tuple[int, ...] | None = None) -> Expr:
    """Apply D_t^t and D_axis^mi (all total derivatives commute)."""
    for _ in range(t):
        e = total_derivative(e, space, space.time)
    if mi:
        for ax, k in zip(space.axes, mi):
            for _ in range(k):
                e = total_derivative(e, space, ax)
    return e


# --------------------------------------------------------------------------
# Oriented rewrite rules and their prolongation cones.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """leader -> rhs, with rhs strictly below the leader (all jets of the
    leader's dependent variable in rhs must have smaller (torder, order))."""

    leader: Jet
    rhs: Expr

    def matches(self, j: Jet) -> bool:
        L = self.leader
        return (
            j.dep == L.dep
            and j.torder >= L.torder
            and all(a >= b for a, b in zip(j.mi, L.mi))
        )

    def delta(self, j: Jet) -> tuple[int, tuple[int, ...]]:
        L = self.leader
        return j.torder - L.torder, tuple(a - b for a, b in zip(j.mi, L.mi))


def rule_from_equation(h: Expr, leader: Jet | None = None) -> Rule:
    """Orient h = 0 as leader -> rest.  The leader defaults to the highest
    jet coordinate of h and must occur linearly with a jet-free coefficient
    that is nonzero."""
    jets = leaf_jets(h)
    if not jets:
        raise StructureError("equation has no jet coordinates")
    if leader is None:
        leader = max(jets, key=lambda j: (j.order, j.key()))
    c = coefficient_of(h, leader)
    if c.is_zero():
        raise StructureError(f"{to_text(h)} is not solvable for {leader!r}")
    rest = h - c * Expr.atom(leader)
    if leader in leaf_jets(rest) or leader in leaf_jets(c):
        raise StructureError(f"{to_text(h)} is not linear in {leader!r}")
    return Rule(leader, -rest / c)


class RewriteSystem:
    """Reduce expressions modulo the derivative cones of a list of rules.

    Replacements for prolonged leaders are built by formal total
    differentiation of the rule's rhs, memoized per coordinate.
    """

    def __init__(self, space: JetSpace, rules: list[Rule]):
        self.space = space
        self.rules = list(rules)
        self._repl: dict[tuple[int, Jet], Expr] = {}

    def match(self, j: Jet) -> int | None:
        for i, r in enumerate(self.rules):
            if r.matches(j):
                return i
        return None

    def replacement(self, i: int, j: Jet) -> Expr:
        key = (i, j)
        if key in self._repl:
            return self._repl[key]
        rule = self.rules[i]
        dt, dmi = rule.delta(j)
        if dt == 0 and not any(dmi):
            out = rule.rhs
        elif dt > 0:
            prev = self.replacement(i, Jet(j.dep, j.torder - 1, j.mi, j.axes))
            out = total_derivative(prev, self.space, self.space.time)
        else:
            d = next(n for n, k in enumerate(dmi) if k > 0)
            mi = tuple(k - (1 if n == d else 0) for n, k in enumerate(j.mi))
            prev = self.replacement(i, Jet(j.dep, j.torder, mi, j.axes))
            out = total_derivative(prev, self.space, self.space.axes[d])
        # Chains of rational right-hand sides pick up common factors fast
        # (the denominator squares at every derivative); keep the memoized
        # values in lowest terms or downstream substitutions blow up.
        out = reduce_quotient(out)
        self._repl[key] = out
        return out

    def reduce(self, e: Expr) -> Expr:
        for _ in range(_PASS_LIMIT):
            subs = {}
            for j in leaf_jets(e):
                i = self.match(j)
                if i is not None:
                    subs[j] = self.replacement(i, j)
            if not subs:
                return e
            e = reduce_quotient(substitute(e, subs))
        raise ReductionError(f"no normal form after {_PASS_LIMIT} passes")


def evolution_system(space: JetSpace, rhs: dict[str, Expr]) -> RewriteSystem:
    """u^j_t = F^j with F^j free of time derivatives."""
    if space.time is None:
        raise StructureError("evolution system needs a time variable")
    rules = []
    for dep, F in rhs.items():
        for j in leaf_jets(F):
            if j.torder:
                raise StructureError(f"rhs for {dep} contains a time derivative {j!r}")
        rules.append(Rule(space.jet_atom(dep, 1), F))
    return RewriteSystem(space, rules)


def hyperbolic_equation(space: JetSpace, dep: str, rhs: Expr) -> RewriteSystem:
    """u_tt = F with F of time order at most one."""
    for j in leaf_jets(rhs):
        if j.torder > 1:
            raise StructureError(f"rhs contains {j!r} of time order > 1")
    return RewriteSystem(space, [Rule(space.jet_atom(dep, 2), rhs)])


def constraint_system(space: JetSpace, constraints: list[Expr],
                      leaders: list[Jet | None] | None = None) -> RewriteSystem:
    if leaders is None:
        leaders = [None] * len(constraints)
    return RewriteSystem(space, [rule_from_equation(h, L) for h, L in zip(constraints, leaders)])


# --------------------------------------------------------------------------
# Joint elimination of mixed derivatives for a second-order equation in two
# spatial axes (no time).  The equation must be linear in the top jets of
# every prolongation, which holds for quasilinear second-order equations.
# --------------------------------------------------------------------------

class MixedJetEliminator:
    def __init__(self, space: JetSpace, equation: Expr, dep: str | None = None):
        if len(space.axes) != 2:
            raise StructureError("mixed-jet elimination needs exactly two axes")
        self.space = space
        self.dep = dep or space.deps[0]
        self.equation = equation
        self._table: dict[tuple[int, int], Expr] = {}
        self._max_order = 1

    def _mixed_in(self, e: Expr, below: int) -> list[Jet]:
        return [
            j for j in leaf_jets(e)
            if j.dep == self.dep and j.torder == 0
            and j.mi[0] >= 1 and j.mi[1] >= 1 and sum(j.mi) < below
        ]

    def _subst_known(self, e: Expr, below: int) -> Expr:
        while True:
            subs = {j: self._table[j.mi] for j in self._mixed_in(e, below)}
            if not subs:
                return e
            e = substitute(e, subs)

    def ensure_order(self, order: int) -> None:
        from .detsolve import solve_linear_expr  # local import; no cycle at module load
        from .symcore import reduce_quotient

        space = self.space
        while self._max_order < order:
            o = self._max_order + 1
            if o == 2:
                rule = rule_from_equation(self.equation, Jet(self.dep, 0, (1, 1), space.axes))
                self._table[1, 1] = rule.rhs
                self._max_order = 2
                continue
            unknowns = [Jet(self.dep, 0, (a, o - a), space.axes) for a in range(1, o)]
            eqs = []
            for i in range(o - 1):
                p = total_derivatives(self.equation, space, mi=(i, o - 2 - i))
                eqs.append(self._subst_known(p, o))
            sol = solve_linear_expr(eqs, unknowns)
            for u, v in zip(unknowns, sol):
                self._table[u.mi] = reduce_quotient(v)
            self._max_order = o

    def table(self, mi: tuple[int, int]) -> Expr:
        self.ensure_order(sum(mi))
        return self._table[mi]

    def rules(self) -> list[Rule]:
        self.ensure_order(2)
        return [Rule(Jet(self.dep, 0, (1, 1), self.space.axes), self._table[1, 1])]

    def reduce(self, e: Expr) -> Expr:
        for _ in range(_PASS_LIMIT):
            top = max((sum(j.mi) for j in self._mixed_in(e, 10 ** 9)), default=0)
            if top == 0:
                return e
            self.ensure_order(top)
            e = self._subst_known(e, top + 1)
        raise ReductionError(f"no normal form after {_PASS_LIMIT} passes")

    def match(self, j: Jet) -> int | None:
        if j.dep == self.dep and j.torder == 0 and j.mi[0] >= 1 and j.mi[1] >= 1:
            return 0
        return None

    def replacement(self, i: int, j: Jet) -> Expr:
        return self.table(j.mi)


# --------------------------------------------------------------------------
# Joint normal forms and the critical-pair compatibility check.
# --------------------------------------------------------------------------

def joint_reduce(e: Expr, reducers: list) -> Expr:
    for _ in range(_PASS_LIMIT):
        before = e
        for r in reducers:
            e = r.reduce(e)
        if e == before:
            return e
    raise ReductionError(f"joint reduction did not stabilize in {_PASS_LIMIT} rounds")


def _rule_list(r) -> list:
    rules = getattr(r, "rules")
    return rules() if callable(rules) else rules


def _leader_pairs(a, b) -> list[tuple[tuple, tuple]]:
    """Pairs of (reducer, rule index, leader) with overlapping cones."""
    pairs = []
    for ia, ra in enumerate(_rule_list(a)):
        la = ra.leader if isinstance(ra, Rule) else ra
        for ib, rb in enumerate(_rule_list(b)):
            lb = rb.leader if isinstance(rb, Rule) else rb
            if la.dep == lb.dep:
                pairs.append(((a, ia, la), (b, ib, lb)))
    return pairs


def _join(la: Jet, lb: Jet) -> Jet:
    return Jet(
        la.dep,
        max(la.torder, lb.torder),
        tuple(max(x, y) for x, y in zip(la.mi, lb.mi)),
        la.axes,
    )


@dataclass
class CriticalPair:
    coordinate: Jet
    residual: Expr

    @property
    def ok(self) -> bool:
        return self.residual.is_zero()


@dataclass
class InvarianceReport:
    pairs: list[CriticalPair] = field(default_factory=list)
    completions: list[Expr] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.pairs)


def _critical_pairs(system, constraints) -> list[CriticalPair]:
    reducers = [system, constraints]
    crules = _rule_list(constraints)
    pairs = _leader_pairs(system, constraints)
    for i in range(len(crules)):
        for j in range(i + 1, len(crules)):
            if crules[i].leader.dep == crules[j].leader.dep:
                pairs.append(
                    ((constraints, i, crules[i].leader), (constraints, j, crules[j].leader))
                )
    out = []
    for (ra, ia, la), (rb, ib, lb) in pairs:
        c = _join(la, lb)
        via_a = joint_reduce(ra.replacement(ia, c), reducers)
        via_b = joint_reduce(rb.replacement(ib, c), reducers)
        out.append(CriticalPair(c, via_a - via_b))
    return out


def check_invariance(system, constraints, space: JetSpace | None = None, *,
                     rounds: int = 3) -> InvarianceReport:
    """Compatibility of an equation/system with differential constraints.

    Both arguments are reducers exposing rules() or .rules.  For every pair
    of rules on the same dependent variable (system vs constraint and
    constraint vs constraint), the joint normal forms of the two one-step
    reducts of the minimal common derivative coordinate are compared; the
    constraints are invariant when every residual vanishes.

    A nonzero residual in joint normal form is a consequence of the joint
    system, not yet a contradiction.  Up to ``rounds`` times, the nonzero
    residuals are resolved into additional constraint rules and the pairs
    are recomputed; the check passes if some round closes with all
    residuals zero and fails otherwise.  Residuals with no derivative
    coordinate left to resolve fail immediately.
    """
    space = space if space is not None else getattr(constraints, "space", None)
    report = InvarianceReport()
    for _ in range(rounds):
        report.pairs = _critical_pairs(system, constraints)
        if report.ok:
            return report
        new_rules = list(_rule_list(constraints))
        for p in report.pairs:
            if p.ok:
                continue
            if not leaf_jets(p.residual):
                return report
            new_rules.append(rule_from_equation(p.residual))
            report.completions.append(p.residual)
        constraints = RewriteSystem(space, new_rules)
    report.pairs = _critical_pairs(system, constraints)
    return report
