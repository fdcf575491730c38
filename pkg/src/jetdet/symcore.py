"""Exact symbolic expression kernel.

Expressions are quotients of sparse Laurent polynomials over an ordered
atom alphabet.  An atom is one of

  * ``Var``    -- an independent variable (t, x, y, ...),
  * ``Param``  -- a named constant (b1, c4, k, ...),
  * ``Rad``    -- a positive rational base carrying a fractional power,
  * ``Jet``    -- a derivative coordinate of a dependent variable,
  * ``Elem``   -- sin/cos/tan/exp/ln/sqrt applied to an expression,
  * ``Opaque`` -- an undetermined function symbol with a derivative
                  multi-index, e.g. g(x, y, z), V''(w).

A monomial is a sorted tuple of (atom, exponent) pairs; exponents are
Fractions or linear forms in parameters (so u^(k-1) and a^(1/2) are
first-class).  A polynomial maps monomials to nonzero Fractions.  All
arithmetic normalizes eagerly, so two expressions that are equal as
rational expressions in the atoms have equal internal form whenever the
denominators stay monomial; in general `is_zero` on the difference is
the decision procedure and it is complete for the rational operations
because a/b - c/d is computed as (ad - cb)/(bd).

No trigonometric or logarithmic identities are applied.  sin(u)^2 +
cos(u)^2 - 1 is *not* zero here.  The only atom-level rewrites are safe
ones: literal folds (sin(0)=0, exp(0)=1, ...), and exponential product
folding exp(a)^r * exp(b)^s -> exp(r*a + s*b), which keeps exponentials
in a canonical single-atom form per monomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union
import heapq
import math


class DomainError(ValueError):
    """Raised for ln/sqrt of nonpositive literals, division by zero, and
    powers the representation cannot express exactly."""


class StructureError(ValueError):
    """Raised when an operation is asked of an expression whose shape does
    not support it (wrong atom kind, non-monomial base for a fractional
    power, and so on)."""


Q = Fraction
_ZERO = Fraction(0)
_ONE = Fraction(1)


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise StructureError(f"exact coefficient expected, got {type(c).__name__}")


# --------------------------------------------------------------------------
# Exponents: Fraction, or a linear form  const + sum(coeff * parameter).
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinExp:
    """Linear exponent  const + sum of coeff*param, params by name."""

    const: Fraction
    terms: tuple[tuple[str, Fraction], ...]  # sorted by name, coeffs nonzero

    def key(self):
        return (self.const, self.terms)

    def __str__(self) -> str:
        parts = []
        if self.const:
            parts.append(str(self.const))
        for name, c in self.terms:
            if c == 1:
                parts.append(name)
            else:
                parts.append(f"{c}*{name}")
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"


Exponent = Union[Fraction, LinExp]


def _lin(const, terms: Mapping[str, Fraction]) -> Exponent:
    cleaned = {n: c for n, c in terms.items() if c}
    if not cleaned:
        return _as_fraction(const)
    return LinExp(_as_fraction(const), tuple(sorted(cleaned.items())))


def exp_terms(e: Exponent) -> tuple[Fraction, dict[str, Fraction]]:
    if isinstance(e, LinExp):
        return e.const, dict(e.terms)
    return e, {}


def exp_add(a: Exponent, b: Exponent) -> Exponent:
    ca, ta = exp_terms(a)
    cb, tb = exp_terms(b)
    for n, c in tb.items():
        ta[n] = ta.get(n, _ZERO) + c
    return _lin(ca + cb, ta)


def exp_scale(a: Exponent, s: Fraction) -> Exponent:
    ca, ta = exp_terms(a)
    return _lin(ca * s, {n: c * s for n, c in ta.items()})


def exp_mul(a: Exponent, b: Exponent) -> Exponent:
    """Product of exponents; at most one side may carry parameters."""
    if isinstance(a, LinExp) and isinstance(b, LinExp):
        raise DomainError("cannot multiply two parameter-carrying exponents")
    if isinstance(a, LinExp):
        return exp_scale(a, _as_fraction(b))
    return exp_scale(b, _as_fraction(a))


def exp_key(e: Exponent):
    if isinstance(e, LinExp):
        return e.key()
    return (e, ())


def exp_is_integer(e: Exponent) -> bool:
    return isinstance(e, Fraction) and e.denominator == 1


# --------------------------------------------------------------------------
# Atoms.  Each kind gets a rank so that keys are totally ordered:
#   Var < Param < Rad < Jet < Elem < Opaque,
# ties broken structurally (names, derivative orders, argument keys).
# --------------------------------------------------------------------------

class Atom:
    __slots__ = ("_k", "_h")

    def key(self):
        return self._k

    def __hash__(self) -> int:
        return self._h

    def __eq__(self, other) -> bool:
        return self is other or (isinstance(other, Atom) and self._k == other._k)

    def __lt__(self, other: "Atom") -> bool:
        return self._k < other._k

    def __repr__(self) -> str:
        return atom_text(self)


class Var(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._k = (0, name)
        self._h = hash(self._k)


class Param(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._k = (1, name)
        self._h = hash(self._k)


class Rad(Atom):
    """A positive rational base destined for a fractional power, kept as an
    atom so that e.g. 2^(1/2) stays exact."""

    __slots__ = ("base",)

    def __init__(self, base: Fraction):
        if base <= 0:
            raise DomainError(f"radical base must be positive, got {base}")
        self.base = base
        self._k = (2, base)
        self._h = hash(self._k)


class Jet(Atom):
    """Coordinate u^(dep) differentiated torder times in time and mi[i]
    times along the i-th spatial axis.  Axes are carried for printing and
    for total-derivative bumping."""

    __slots__ = ("dep", "torder", "mi", "axes")

    def __init__(self, dep: str, torder: int, mi: tuple[int, ...], axes: tuple[str, ...]):
        if len(mi) != len(axes):
            raise StructureError(f"multi-index {mi} does not match axes {axes}")
        if torder < 0 or any(k < 0 for k in mi):
            raise StructureError("negative derivative order")
        self.dep = dep
        self.torder = torder
        self.mi = mi
        self.axes = axes
        self._k = (3, dep, torder, sum(mi), mi, axes)
        self._h = hash(self._k)

    @property
    def order(self) -> int:
        return self.torder + sum(self.mi)


_ELEM_FNS = ("sin", "cos", "tan", "exp", "ln", "sqrt")


class Elem(Atom):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: "Expr"):
        if fn not in _ELEM_FNS:
            raise StructureError(f"unknown elementary function {fn!r}")
        self.fn = fn
        self.arg = arg
        self._k = (4, fn, arg.key())
        self._h = hash(self._k)


class Opaque(Atom):
    """Undetermined function symbol applied to expression arguments, with a
    derivative multi-index over the argument slots."""

    __slots__ = ("name", "args", "dmi")

    def __init__(self, name: str, args: tuple["Expr", ...], dmi: tuple[int, ...]):
        if len(dmi) != len(args):
            raise StructureError(f"derivative index {dmi} does not match arity {len(args)}")
        if any(k < 0 for k in dmi):
            raise StructureError("negative derivative order")
        self.name = name
        self.args = args
        self.dmi = dmi
        self._k = (5, name, tuple(a.key() for a in args), dmi)
        self._h = hash(self._k)


# --------------------------------------------------------------------------
# Monomials and polynomials.
# --------------------------------------------------------------------------

Monomial = tuple  # tuple[tuple[Atom, Exponent], ...], sorted by atom key
Poly = dict      # dict[Monomial, Fraction], values nonzero

MONO_ONE: Monomial = ()


def mono_key(m: Monomial):
    return tuple((a._k, exp_key(e)) for a, e in m)


def _fold_exps(pairs: list[tuple[Atom, Exponent]]) -> tuple[Fraction, list[tuple[Atom, Exponent]]]:
    """Collapse all exp-atoms of a monomial into a single exp with exponent 1.
    Returns (numeric factor, remaining pairs)."""
    exps = [(a, e) for a, e in pairs if isinstance(a, Elem) and a.fn == "exp"]
    if not exps:
        return _ONE, pairs
    if len(exps) == 1 and exps[0][1] == 1:
        return _ONE, pairs
    rest = [(a, e) for a, e in pairs if not (isinstance(a, Elem) and a.fn == "exp")]
    total = _EXPR_ZERO
    for a, e in exps:
        if isinstance(e, LinExp):
            scale = _expr_of_linexp(e)
        else:
            scale = Expr.const(e)
        total = total + scale * a.arg
    if not total.is_zero():
        rest.append((Elem("exp", total), _ONE))
    return _ONE, rest


def _normalize_pairs(pairs: Iterable[tuple[Atom, Exponent]]) -> tuple[Fraction, Monomial]:
    """Merge duplicate atoms, drop zero exponents, fold exponentials and
    perfect rational powers of Rad atoms.  Returns (coefficient, monomial)."""
    merged: dict[Atom, Exponent] = {}
    for a, e in pairs:
        if a in merged:
            merged[a] = exp_add(merged[a], e)
        else:
            merged[a] = e if isinstance(e, LinExp) else _as_fraction(e)
    out = []
    coeff = _ONE
    for a, e in merged.items():
        if isinstance(e, Fraction) and e == 0:
            continue
        if isinstance(a, Rad) and isinstance(e, Fraction):
            if e.denominator == 1:
                coeff *= a.base ** e
                continue
            whole, frac = divmod(e.numerator, e.denominator)
            if whole:
                coeff *= a.base ** whole
            e = Fraction(frac, e.denominator)
            if e == 0:
                continue
        out.append((a, e))
    extra, out = _fold_exps(out)
    coeff *= extra
    out.sort(key=lambda p: (p[0]._k, exp_key(p[1])))
    return coeff, tuple(out)


def mono_mul(a: Monomial, b: Monomial) -> tuple[Fraction, Monomial]:
    if not a:
        return _ONE, b
    if not b:
        return _ONE, a
    return _normalize_pairs(list(a) + list(b))


def mono_pow(m: Monomial, e: Exponent) -> tuple[Fraction, Monomial]:
    return _normalize_pairs([(a, exp_mul(x, e)) for a, x in m])


def _padd_into(acc: Poly, other: Poly, scale: Fraction = _ONE) -> None:
    for m, c in other.items():
        v = acc.get(m, _ZERO) + c * scale
        if v:
            acc[m] = v
        else:
            acc.pop(m, None)


def pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    if len(a) > len(b):
        a, b = b, a
    for ma, ca in a.items():
        for mb, cb in b.items():
            k, m = mono_mul(ma, mb)
            v = out.get(m, _ZERO) + ca * cb * k
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def _poly_key(p: Poly):
    return tuple(sorted((mono_key(m), c) for m, c in p.items()))


# --------------------------------------------------------------------------
# Exact division helpers (used to cancel polynomial denominators when the
# cancellation is exact; purely an optimization plus normal-form niceness).
# --------------------------------------------------------------------------

def _integral_exponents(p: Poly) -> bool:
    for m in p:
        for _, e in m:
            if not exp_is_integer(e):
                return False
    return True


def _grlex_key(index: dict[Atom, int]):
    """Graded-lex key over a fixed atom universe: total degree first, then
    the dense exponent vector.  The universe must cover every monomial the
    key will see; comparing sparse pair lists instead is not multiplicative
    once monomials mention different atoms, and exact division depends on a
    multiplicative order."""
    n = len(index)

    def key(m: Monomial):
        v = [0] * n
        total = 0
        for a, e in m:
            ie = int(e)
            total += ie
            v[index[a]] = ie
        return (total, v)

    return key


class _RevKey:
    """Inverts comparison so heapq's min-heap acts as a max-heap."""
    __slots__ = ("k",)

    def __init__(self, k):
        self.k = k

    def __lt__(self, other):
        return self.k > other.k


def _poly_div_exact(a: Poly, b: Poly) -> Poly | None:
    """Return a/b if b divides a exactly (integer exponents only), else None."""
    if not a:
        return {}
    if not (_integral_exponents(a) and _integral_exponents(b)):
        return None
    # Shift both by the per-atom minimum exponent so ordinary term division
    # (which requires nonnegative exponents) applies.
    def shifted(p: Poly) -> tuple[Poly, dict[Atom, Fraction]]:
        mins: dict[Atom, Fraction] = {}
        for m in p:
            seen = set()
            for at, e in m:
                seen.add(at)
                mins[at] = min(mins.get(at, _ZERO), e) if at in mins else e
            for at in list(mins):
                if at not in seen:
                    mins[at] = min(mins[at], _ZERO)
        mins = {at: e for at, e in mins.items() if e < 0}
        if not mins:
            return p, {}
        out: Poly = {}
        for m, c in p.items():
            k, mm = _normalize_pairs(list(m) + [(at, -e) for at, e in mins.items()])
            out[mm] = c * k
        return out, mins

    a2, sa = shifted(a)
    b2, sb = shifted(b)
    atoms: set[Atom] = set()
    for m in a2:
        atoms.update(at for at, _ in m)
    for m in b2:
        atoms.update(at for at, _ in m)
    gk = _grlex_key({at: i for i, at in enumerate(sorted(atoms, key=lambda z: z._k))})
    lead = max(b2, key=gk)
    lead_c = b2[lead]
    lead_map = dict(lead)

    def quot_term(rm: Monomial):
        t: dict[Atom, Exponent] = dict(rm)
        for at, e in lead_map.items():
            ne = t.get(at, _ZERO) - e
            if ne < 0:
                return None
            if ne:
                t[at] = ne
            else:
                t.pop(at, None)
        return _normalize_pairs(list(t.items()))

    # Cheap reject before building the work heap: in an admissible order the
    # leading term of an exact quotient times lead(b) is lead(a), so lead(b)
    # must divide lead(a).
    if quot_term(max(a2, key=gk)) is None:
        return None

    rem = dict(a2)
    quo: Poly = {}
    # Max-heap of candidate leading monomials with lazy deletion.  Products
    # created by a cancellation step are strictly smaller than the monomial
    # being cancelled, so a monomial never re-enters rem after processing and
    # the `pm in rem` guard below is enough to skip stale entries.
    heap = [(_RevKey(gk(m)), m) for m in rem]
    heapq.heapify(heap)
    while rem:
        rm = heapq.heappop(heap)[1]
        if rm not in rem:
            continue
        qt = quot_term(rm)
        if qt is None:
            return None
        k, tm = qt
        tc = rem[rm] / lead_c / k
        quo[tm] = quo.get(tm, _ZERO) + tc
        for bm, bc in b2.items():
            kk, pm = mono_mul(tm, bm)
            old = rem.get(pm)
            v = (old if old is not None else _ZERO) - tc * bc * kk
            if v:
                rem[pm] = v
                if old is None:
                    heapq.heappush(heap, (_RevKey(gk(pm)), pm))
            else:
                rem.pop(pm, None)
    # undo the shifts: quo * x^sa / x^sb  => multiply by x^(sb - sa)
    shift: dict[Atom, Fraction] = {}
    for at, e in sa.items():
        shift[at] = shift.get(at, _ZERO) + e
    for at, e in sb.items():
        shift[at] = shift.get(at, _ZERO) - e
    shift = {at: e for at, e in shift.items() if e}
    if shift:
        out: Poly = {}
        for m, c in quo.items():
            k, mm = _normalize_pairs(list(m) + list(shift.items()))
            out[mm] = c * k
        quo = out
    return {m: c for m, c in quo.items() if c}


# --------------------------------------------------------------------------
# Polynomial gcd (primitive PRS, recursive in the atom list).  Only used at
# presentation points (reducing elimination-table entries and derived
# equations); ordinary quotient arithmetic stays gcd-free for speed.
# Requires nonnegative integer exponents.
# --------------------------------------------------------------------------

def _poly_atoms(p: Poly) -> list[Atom]:
    seen = set()
    for m in p:
        for a, _ in m:
            seen.add(a)
    return sorted(seen, key=lambda a: a._k)


def _gcd_ready(p: Poly) -> bool:
    for m in p:
        for _, e in m:
            if not (isinstance(e, Fraction) and e.denominator == 1 and e >= 0):
                return False
    return True


def _to_uni(p: Poly, v: Atom) -> dict[int, Poly]:
    out: dict[int, Poly] = {}
    for m, c in p.items():
        d = 0
        rest = []
        for a, e in m:
            if a == v:
                d = int(e)
            else:
                rest.append((a, e))
        out.setdefault(d, {})[tuple(rest)] = c
    return out


def _from_uni(u: dict[int, Poly], v: Atom) -> Poly:
    out: Poly = {}
    for d, cp in u.items():
        for m, c in cp.items():
            k, mm = _normalize_pairs(list(m) + ([(v, Fraction(d))] if d else []))
            out[mm] = out.get(mm, _ZERO) + c * k
    return {m: c for m, c in out.items() if c}


def _rat_content(p: Poly) -> Fraction:
    num_g = 0
    den_l = 1
    for c in p.values():
        num_g = math.gcd(num_g, abs(c.numerator))
        den_l = den_l * c.denominator // math.gcd(den_l, c.denominator)
    content = Fraction(num_g, den_l)
    if p and p[max(p, key=mono_key)] < 0:
        content = -content
    return content


def _prim(p: Poly) -> Poly:
    if not p:
        return p
    c = _rat_content(p)
    return {m: x / c for m, x in p.items()}


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Gcd of two polynomials with nonnegative integer exponents, primitive
    and sign-normalized; rational content is discarded (returns a primitive
    polynomial, or {1} for coprime inputs)."""
    if not a:
        return _prim(b) if b else {MONO_ONE: _ONE}
    if not b:
        return _prim(a)
    if not (_gcd_ready(a) and _gcd_ready(b)):
        return {MONO_ONE: _ONE}
    a, b = _prim(a), _prim(b)
    if a == b:
        return a
    atoms_a = _poly_atoms(a)
    atoms_b = _poly_atoms(b)
    set_a, set_b = set(atoms_a), set(atoms_b)
    common = [v for v in atoms_a if v in set_b]
    only_a = [v for v in atoms_a if v not in set_b]
    only_b = [v for v in atoms_b if v not in set_a]
    if only_a or only_b:
        # Variables on one side only cannot occur in the gcd: replace that
        # side by the gcd of its coefficients with respect to all of them at
        # once, so the coefficient gcds live in the common subring instead of
        # recursing through every remaining atom.
        if only_a:
            a = _poly_list_gcd(_split_coeffs(a, set(only_a)))
        if only_b:
            b = _poly_list_gcd(_split_coeffs(b, set(only_b)))
        return poly_gcd(a, b)
    if not common:
        return {MONO_ONE: _ONE}
    v = common[0]
    ua, ub = _to_uni(a, v), _to_uni(b, v)
    ca = _poly_list_gcd(list(ua.values()))
    cb = _poly_list_gcd(list(ub.values()))
    gc = poly_gcd(ca, cb)
    pa = {d: _must_div(cp, ca) for d, cp in ua.items()}
    pb = {d: _must_div(cp, cb) for d, cp in ub.items()}
    if max(pa) < max(pb):
        pa, pb = pb, pa
    # primitive PRS in v
    while True:
        if not pb:
            g = pa
            break
        if max(pb) == 0:
            g = {0: {MONO_ONE: _ONE}}
            break
        r = _pseudo_rem(pa, pb, v)
        pa, pb = pb, _uni_prim(r, v)
    gv = _from_uni(g, v)
    return _prim(pmul(gc, gv))


def _split_coeffs(p: Poly, vs: set[Atom]) -> list[Poly]:
    """Coefficient polynomials of p viewed as a polynomial in the atoms vs."""
    groups: dict[Monomial, Poly] = {}
    for m, c in p.items():
        inside = tuple((a, e) for a, e in m if a in vs)
        outside = tuple((a, e) for a, e in m if a not in vs)
        groups.setdefault(inside, {})[outside] = c
    return list(groups.values())


def _poly_list_gcd(ps: list[Poly]) -> Poly:
    out: Poly = {}
    for p in ps:
        out = poly_gcd(out, p) if out else dict(p)
        if out == {MONO_ONE: _ONE}:
            return out
    return _prim(out)


def _must_div(a: Poly, b: Poly) -> Poly:
    q = _poly_div_exact(a, b)
    if q is None:
        raise StructureError("internal: content division was not exact")
    return q


def _uni_prim(u: dict[int, Poly], v: Atom) -> dict[int, Poly]:
    u = {d: cp for d, cp in u.items() if cp}
    if not u:
        return u
    c = _poly_list_gcd(list(u.values()))
    if c == {MONO_ONE: _ONE}:
        return u
    return {d: _must_div(cp, c) for d, cp in u.items()}


def _pseudo_rem(pa: dict[int, Poly], pb: dict[int, Poly], v: Atom) -> dict[int, Poly]:
    """Remainder of pa by pb in v up to factors of lc(pb); sufficient for a
    primitive PRS since content is stripped each step."""
    db = max(pb)
    lb = pb[db]
    r = {d: dict(cp) for d, cp in pa.items()}
    guard = 0
    while r and max(r) >= db:
        guard += 1
        if guard > 1000:
            raise StructureError("internal: pseudo-division did not terminate")
        dr = max(r)
        lr = r[dr]
        nr: dict[int, Poly] = {}
        for d, cp in r.items():
            nr[d] = pmul(cp, lb)
        for d, cp in pb.items():
            tgt = nr.setdefault(d + dr - db, {})
            prod = pmul(cp, lr)
            for m, c in prod.items():
                x = tgt.get(m, _ZERO) - c
                if x:
                    tgt[m] = x
                else:
                    tgt.pop(m, None)
        r = {d: cp for d, cp in nr.items() if cp}
    return r


def reduce_fraction_polys(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Cancel the polynomial gcd of num and den (best effort; exact)."""
    if not num or len(den) == 1:
        return num, den
    if not (_gcd_ready(num) and _gcd_ready(den)):
        return num, den
    g = poly_gcd(num, den)
    if len(g) == 1 and MONO_ONE in g:
        return num, den
    qn = _poly_div_exact(num, g)
    qd = _poly_div_exact(den, g)
    if qn is None or qd is None:
        return num, den
    return qn, qd


def reduce_quotient(e: "Expr") -> "Expr":
    """Put a quotient in lower terms by cancelling the polynomial gcd of
    numerator and denominator.  Construction does not do this (gcds are
    costly); call it on values that will be reused many times."""
    num, den = reduce_fraction_polys(e.num, e.den)
    if num is e.num:
        return e
    return Expr(num, den)


# --------------------------------------------------------------------------
# Expr: the public quotient type.
# --------------------------------------------------------------------------

class Expr:
    """Immutable quotient num/den of Laurent polynomials, normalized."""

    __slots__ = ("num", "den", "_key", "_hash")

    def __init__(self, num: Poly, den: Poly, _normalized: bool = False):
        if not _normalized:
            num, den = _normal_quotient(num, den)
        self.num = num
        self.den = den
        self._key = None
        self._hash = None

    # -- construction ------------------------------------------------------

    @staticmethod
    def const(c) -> "Expr":
        c = _as_fraction(c)
        return Expr({MONO_ONE: c} if c else {}, {MONO_ONE: _ONE}, _normalized=True)

    @staticmethod
    def atom(a: Atom) -> "Expr":
        return Expr({((a, _ONE),): _ONE}, {MONO_ONE: _ONE}, _normalized=True)

    # -- identity ----------------------------------------------------------

    def key(self):
        if self._key is None:
            self._key = (_poly_key(self.num), _poly_key(self.den))
        return self._key

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                return self.key() == Expr.const(other).key()
            return NotImplemented
        return self is other or self.key() == other.key()

    def is_zero(self) -> bool:
        return not self.num

    def is_one(self) -> bool:
        return self.num == {MONO_ONE: _ONE} and self.den == {MONO_ONE: _ONE}

    def as_fraction(self) -> Fraction | None:
        """The exact rational value if the expression is constant, else None."""
        if not self.num:
            return _ZERO
        if self.den == {MONO_ONE: _ONE} and set(self.num) == {MONO_ONE}:
            return self.num[MONO_ONE]
        return None

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == other.den:
            num = dict(self.num)
            _padd_into(num, other.num)
            return Expr(num, dict(self.den))
        num = pmul(self.num, other.den)
        _padd_into(num, pmul(other.num, self.den))
        return Expr(num, pmul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr({m: -c for m, c in self.num.items()}, dict(self.den), _normalized=True)

    def __sub__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Expr":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Expr(pmul(self.num, other.num), pmul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Expr":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero():
            raise DomainError("division by zero")
        return Expr(pmul(self.num, other.den), pmul(self.den, other.num))

    def __rtruediv__(self, other) -> "Expr":
        return _coerce(other) / self

    def __pow__(self, e) -> "Expr":
        return expr_pow(self, e)

    def __repr__(self) -> str:
        return f"Expr({to_text(self)})"


def _coerce(x) -> "Expr":
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    if isinstance(x, Atom):
        return Expr.atom(x)
    return NotImplemented


_EXPR_ZERO = Expr.const(0)
_EXPR_ONE = Expr.const(1)


def _expr_of_linexp(e: LinExp) -> Expr:
    out = Expr.const(e.const)
    for name, c in e.terms:
        out = out + Expr.const(c) * Expr.atom(Param(name))
    return out


def _mono_invert(m: Monomial) -> tuple[Fraction, Monomial]:
    return _normalize_pairs([(a, exp_scale(e, Fraction(-1))) for a, e in m])


def _normal_quotient(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    if not den:
        raise DomainError("division by zero")
    if not num:
        return {}, {MONO_ONE: _ONE}
    if len(den) == 1:
        (dm, dc), = den.items()
        if dm == MONO_ONE:
            if dc == 1:
                return num, den
            return {m: c / dc for m, c in num.items()}, {MONO_ONE: _ONE}
        k, inv = _mono_invert(dm)
        out: Poly = {}
        for m, c in num.items():
            kk, mm = mono_mul(m, inv)
            v = out.get(mm, _ZERO) + c * k * kk / dc
            if v:
                out[mm] = v
            else:
                out.pop(mm, None)
        return out, {MONO_ONE: _ONE}
    q = _poly_div_exact(num, den)
    if q is not None:
        return q, {MONO_ONE: _ONE}
    # strip a common monomial factor (atoms whose exponents are plain
    # fractions everywhere); this clears negative exponents from the
    # denominator and cancels shared content
    mins: dict[Atom, Fraction] = {}
    first = True
    for p in (num, den):
        for m in p:
            cur = {a: e for a, e in m if isinstance(e, Fraction)}
            bad = {a for a, e in m if isinstance(e, LinExp)}
            if first:
                mins = dict(cur)
                first = False
            else:
                for a in list(mins):
                    mins[a] = min(mins[a], cur.get(a, _ZERO))
            for a in bad:
                mins.pop(a, None)
            for a in list(mins):
                if a not in cur and a not in bad:
                    mins[a] = min(mins[a], _ZERO)
    mins = {a: e for a, e in mins.items() if e}
    if mins:
        shift = [(a, -e) for a, e in mins.items()]

        def apply(p: Poly) -> Poly:
            out: Poly = {}
            for m, c in p.items():
                k, mm = _normalize_pairs(list(m) + shift)
                out[mm] = c * k
            return out

        num, den = apply(num), apply(den)
        if len(den) == 1:
            return _normal_quotient(num, den)
    lead = max(den, key=mono_key)
    dc = den[lead]
    if dc != 1:
        num = {m: c / dc for m, c in num.items()}
        den = {m: c / dc for m, c in den.items()}
    return num, den


def _perfect_root(c: Fraction, e: Fraction) -> Expr:
    """c ** e for positive rational c, extracting the perfect-power part and
    leaving the rest as a Rad atom."""
    if c <= 0:
        raise DomainError(f"fractional power of nonpositive literal {c}")
    q = e.denominator

    def root_part(n: int) -> tuple[int, int]:
        # n = r**q * s  with s q-th-power-free
        r, s = 1, 1
        d = 2
        m = n
        while d * d <= m:
            if m % d == 0:
                k = 0
                while m % d == 0:
                    m //= d
                    k += 1
                r *= d ** (k // q)
                s *= d ** (k % q)
            d += 1
        if m > 1:
            s *= m
        return r, s

    rn, sn = root_part(c.numerator)
    rd, sd = root_part(c.denominator)
    out = Expr.const(Fraction(rn, rd) ** e.numerator)
    rest = Fraction(sn, sd)
    if rest != 1:
        out = out * Expr(
            {((Rad(rest), Fraction(e.numerator % e.denominator, e.denominator)),): _ONE},
            {MONO_ONE: _ONE},
        )
        whole = e.numerator // e.denominator
        if whole:
            out = out * Expr.const(rest ** whole)
    return out


def expr_pow(e: Expr, p) -> Expr:
    if isinstance(p, Expr):
        f = p.as_fraction()
        if f is None:
            le = as_linear_exponent(p)
            if le is None:
                raise DomainError("exponent must be rational or linear in parameters")
            p = le
        else:
            p = f
    if isinstance(p, int):
        p = Fraction(p)
    if isinstance(p, Fraction) and p.denominator == 1:
        n = p.numerator
        if n == 0:
            if e.is_zero():
                raise DomainError("0^0")
            return _EXPR_ONE
        if n < 0:
            if e.is_zero():
                raise DomainError("division by zero")
            e = Expr(dict(e.den), dict(e.num))
            n = -n
        out = _EXPR_ONE
        base = e
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out
    # fractional or parameter exponent: base must be a single monomial
    if len(e.num) != 1 or e.den != {MONO_ONE: _ONE}:
        raise DomainError("fractional or parameter power of a non-monomial expression")
    (m, c), = e.num.items()
    if isinstance(p, LinExp):
        if c != 1:
            raise DomainError(f"parameter power of literal {c}")
        k, mm = mono_pow(m, p)
        return Expr({mm: k}, {MONO_ONE: _ONE})
    out = _perfect_root(c, p) if c != 1 else _EXPR_ONE
    k, mm = mono_pow(m, p)
    return out * Expr({mm: k}, {MONO_ONE: _ONE})


def as_linear_exponent(e: Expr) -> LinExp | None:
    """View e as const + sum(coeff*param) if it has that shape."""
    if e.den != {MONO_ONE: _ONE}:
        return None
    const = _ZERO
    terms: dict[str, Fraction] = {}
    for m, c in e.num.items():
        if m == MONO_ONE:
            const = c
        elif len(m) == 1 and isinstance(m[0][0], Param) and m[0][1] == 1:
            terms[m[0][0].name] = c
        else:
            return None
    le = _lin(const, terms)
    if isinstance(le, Fraction):
        return LinExp(le, ())
    return le


# --------------------------------------------------------------------------
# Elementary functions with literal folds.
# --------------------------------------------------------------------------

_LITERAL_FOLDS: dict[tuple[str, Fraction], Fraction] = {
    ("sin", _ZERO): _ZERO,
    ("cos", _ZERO): _ONE,
    ("tan", _ZERO): _ZERO,
    ("exp", _ZERO): _ONE,
    ("ln", _ONE): _ZERO,
    ("sqrt", _ZERO): _ZERO,
    ("sqrt", _ONE): _ONE,
}


def apply_fn(fn: str, arg: Expr) -> Expr:
    c = arg.as_fraction()
    if c is not None:
        if (fn, c) in _LITERAL_FOLDS:
            return Expr.const(_LITERAL_FOLDS[fn, c])
        if fn == "ln" and c <= 0:
            raise DomainError(f"ln of nonpositive literal {c}")
        if fn == "sqrt":
            if c < 0:
                raise DomainError(f"sqrt of negative literal {c}")
            return _perfect_root(c, Fraction(1, 2))
    if fn == "sqrt":
        if len(arg.num) == 1 and arg.den == {MONO_ONE: _ONE}:
            return expr_pow(arg, Fraction(1, 2))
        return Expr.atom(Elem("sqrt", arg))
    return Expr.atom(Elem(fn, arg))


def sin(a: Expr) -> Expr:
    return apply_fn("sin", _coerce(a))


def cos(a: Expr) -> Expr:
    return apply_fn("cos", _coerce(a))


def tan(a: Expr) -> Expr:
    return apply_fn("tan", _coerce(a))


def exp(a: Expr) -> Expr:
    return apply_fn("exp", _coerce(a))


def ln(a: Expr) -> Expr:
    return apply_fn("ln", _coerce(a))


def sqrt(a: Expr) -> Expr:
    return apply_fn("sqrt", _coerce(a))


def var(name: str) -> Expr:
    return Expr.atom(Var(name))


def param(name: str) -> Expr:
    return Expr.atom(Param(name))


def jet(dep: str, torder: int, mi: Sequence[int], axes: Sequence[str]) -> Expr:
    return Expr.atom(Jet(dep, torder, tuple(mi), tuple(axes)))


def opaque(name: str, args: Sequence, dmi: Sequence[int] | None = None) -> Expr:
    eargs = tuple(_coerce(a) for a in args)
    if dmi is None:
        dmi = (0,) * len(eargs)
    return Expr.atom(Opaque(name, eargs, tuple(dmi)))


# --------------------------------------------------------------------------
# Atom traversal.
# --------------------------------------------------------------------------

def _mono_atoms(m: Monomial) -> Iterator[Atom]:
    for a, _ in m:
        yield a


def iter_atoms(e: Expr) -> Iterator[Atom]:
    """All atoms appearing in e, including inside Elem/Opaque arguments
    (each container atom is yielded as well)."""
    seen: set[Atom] = set()
    stack: list[Expr] = [e]
    while stack:
        cur = stack.pop()
        for p in (cur.num, cur.den):
            for m in p:
                for a in _mono_atoms(m):
                    if a in seen:
                        continue
                    seen.add(a)
                    yield a
                    if isinstance(a, Elem):
                        stack.append(a.arg)
                    elif isinstance(a, Opaque):
                        stack.extend(a.args)


def leaf_jets(e: Expr) -> set[Jet]:
    return {a for a in iter_atoms(e) if isinstance(a, Jet)}


def exponent_params(e: Expr) -> set[str]:
    names: set[str] = set()
    for p in (e.num, e.den):
        for m in p:
            for _, ex in m:
                if isinstance(ex, LinExp):
                    names.update(n for n, _ in ex.terms)
    for a in iter_atoms(e):
        if isinstance(a, Elem):
            names.update(exponent_params(a.arg))
        elif isinstance(a, Opaque):
            for g in a.args:
                names.update(exponent_params(g))
    return names


# --------------------------------------------------------------------------
# Differentiation with respect to an atom.
# --------------------------------------------------------------------------

_CHAIN: dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda g: cos(g),
    "cos": lambda g: -sin(g),
    "tan": lambda g: _EXPR_ONE + tan(g) * tan(g),
    "exp": lambda g: exp(g),
    "ln": lambda g: _EXPR_ONE / g,
    "sqrt": lambda g: Expr.const(Fraction(1, 2)) / sqrt(g),
}


def _atom_diff(a: Atom, wrt: Atom) -> Expr:
    if a == wrt:
        return _EXPR_ONE
    if isinstance(a, Elem):
        d = partial(a.arg, wrt)
        if d.is_zero():
            return _EXPR_ZERO
        return _CHAIN[a.fn](a.arg) * d
    if isinstance(a, Opaque):
        out = _EXPR_ZERO
        for i, g in enumerate(a.args):
            d = partial(g, wrt)
            if d.is_zero():
                continue
            bumped = tuple(k + (1 if j == i else 0) for j, k in enumerate(a.dmi))
            out = out + d * Expr.atom(Opaque(a.name, a.args, bumped))
        return out
    return _EXPR_ZERO


def _poly_partial(p: Poly, wrt: Atom) -> Expr:
    out = _EXPR_ZERO
    wrt_name = wrt.name if isinstance(wrt, Param) else None
    for m, c in p.items():
        for i, (a, e) in enumerate(m):
            da = _atom_diff(a, wrt)
            if not da.is_zero():
                rest = list(m[:i]) + list(m[i + 1:])
                k, mm = _normalize_pairs(rest + [(a, exp_add(e, Fraction(-1)))])
                factor = Expr({mm: c * k}, {MONO_ONE: _ONE})
                if isinstance(e, LinExp):
                    factor = factor * _expr_of_linexp(e)
                else:
                    factor = factor * Expr.const(e)
                out = out + factor * da
            if wrt_name is not None and isinstance(e, LinExp):
                coeff = dict(e.terms).get(wrt_name)
                if coeff:
                    # d/dk (a^(f(k))) = f'(k) * ln(a) * a^f(k)
                    term = Expr({m: c * coeff}, {MONO_ONE: _ONE})
                    out = out + term * ln(Expr.atom(a))
    return out


def partial(e: Expr, wrt) -> Expr:
    """Partial derivative of e with respect to an atom (Var, Param, Jet, or
    Opaque instance), applying chain rules through Elem/Opaque arguments."""
    if isinstance(wrt, Expr):
        wrt = single_atom(wrt)
    if not isinstance(wrt, Atom):
        raise StructureError(f"cannot differentiate with respect to {wrt!r}")
    dn = _poly_partial(e.num, wrt)
    if e.den == {MONO_ONE: _ONE}:
        return dn
    dd = _poly_partial(e.den, wrt)
    den = Expr(dict(e.den), {MONO_ONE: _ONE}, _normalized=True)
    num = Expr(dict(e.num), {MONO_ONE: _ONE}, _normalized=True)
    return (dn * den - num * dd) / (den * den)


def single_atom(e: Expr) -> Atom:
    """The atom of a bare single-atom expression like var('x') or jet(...)."""
    if len(e.num) == 1 and e.den == {MONO_ONE: _ONE}:
        (m, c), = e.num.items()
        if c == 1 and len(m) == 1 and m[0][1] == 1:
            return m[0][0]
    raise StructureError(f"expected a bare atom, got {to_text(e)}")


# --------------------------------------------------------------------------
# Substitution.
# --------------------------------------------------------------------------

def _sub_atom(a: Atom, rules: Mapping[Atom, Expr]) -> Expr:
    if a in rules:
        return _coerce(rules[a])
    if isinstance(a, Elem):
        na = substitute(a.arg, rules)
        if na is a.arg:
            return Expr.atom(a)
        return apply_fn(a.fn, na)
    if isinstance(a, Opaque):
        nargs = tuple(substitute(g, rules) for g in a.args)
        if all(n is o for n, o in zip(nargs, a.args)):
            return Expr.atom(a)
        return Expr.atom(Opaque(a.name, nargs, a.dmi))
    return Expr.atom(a)


def _sub_poly(p: Poly, rules: Mapping[Atom, Expr]) -> Expr:
    # Sum the substituted monomials grouped by denominator.  Folding them
    # into one running quotient instead multiplies the denominators of every
    # pair of terms and blows up on rational replacements.
    groups: dict[frozenset, Expr] = {}
    for m, c in p.items():
        term = Expr.const(c)
        for a, e in m:
            base = _sub_atom(a, rules)
            term = term * expr_pow(base, e)
        key = frozenset(term.den.items())
        cur = groups.get(key)
        groups[key] = term if cur is None else cur + term
    out = _EXPR_ZERO
    for g in groups.values():
        out = out + g
        if len(out.den) > 1:
            out = reduce_quotient(out)
    return out


def substitute(e: Expr, rules: Mapping[Atom, Expr]) -> Expr:
    """Simultaneous substitution of atoms by expressions.  Keys are atoms
    (Var/Param/Jet/Opaque/Elem); replacements are not rescanned."""
    if not rules:
        return e
    hit = False
    for a in iter_atoms(e):
        if a in rules:
            hit = True
            break
    if not hit:
        return e
    num = _sub_poly(e.num, rules)
    if e.den == {MONO_ONE: _ONE}:
        return num
    den = _sub_poly(e.den, rules)
    if den.is_zero():
        raise DomainError("substitution produced a zero denominator")
    return num / den


# --------------------------------------------------------------------------
# Collect.
# --------------------------------------------------------------------------

def collect(e: Expr, vars_: Sequence[Atom]) -> dict[Monomial, Expr]:
    """Split the numerator by its monomial part in vars_; coefficients keep
    the denominator.  Summing part * coeff over the result recovers e."""
    vset = set(vars_)
    groups: dict[Monomial, Poly] = {}
    for m, c in e.num.items():
        inside = tuple((a, x) for a, x in m if a in vset)
        outside = tuple((a, x) for a, x in m if a not in vset)
        groups.setdefault(inside, {})[outside] = c
    den = dict(e.den)
    return {
        part: Expr(num, dict(den))
        for part, num in sorted(groups.items(), key=lambda kv: mono_key(kv[0]))
    }


def coefficient_of(e: Expr, a: Atom, power: int = 1) -> Expr:
    """Coefficient of a**power in e (collect over the single atom)."""
    want: Monomial = ((a, Fraction(power)),) if power else MONO_ONE
    return collect(e, [a]).get(want, _EXPR_ZERO)


def canonicalize(e: Expr) -> Expr:
    """Re-normalize an expression.  Construction already canonicalizes, so
    this is the identity on well-formed Expr values; it exists as an explicit
    entry point and as a cheap self-check."""
    return Expr(dict(e.num), dict(e.den))


# --------------------------------------------------------------------------
# Numeric evaluation.
# --------------------------------------------------------------------------

_ELEM_NUMERIC = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}


def _eval_exponent(e: Exponent, names: Mapping[str, float]) -> float:
    if isinstance(e, LinExp):
        v = float(e.const)
        for n, c in e.terms:
            if n not in names:
                raise StructureError(f"no value for parameter {n} in exponent")
            v += float(c) * names[n]
        return v
    return float(e)


def evaluate(e: Expr, env: Mapping[Atom, float]) -> float:
    """Evaluate at a point.  env maps Var/Param/Jet/Opaque atoms to floats;
    Elem atoms are computed, Opaque atoms are looked up as opaque values."""
    names = {a.name: v for a, v in env.items() if isinstance(a, Param)}

    def atom_val(a: Atom) -> float:
        if a in env:
            return env[a]
        if isinstance(a, Elem):
            return _ELEM_NUMERIC[a.fn](evaluate(a.arg, env))
        if isinstance(a, Rad):
            return float(a.base)
        raise StructureError(f"no value for atom {atom_text(a)}")

    def poly_val(p: Poly) -> float:
        tot = 0.0
        for m, c in p.items():
            v = float(c)
            for a, ex in m:
                v *= atom_val(a) ** _eval_exponent(ex, names)
            tot += v
        return tot

    nv = poly_val(e.num)
    dv = poly_val(e.den) if e.den != {MONO_ONE: _ONE} else 1.0
    return nv / dv


# --------------------------------------------------------------------------
# Printing.  The textual form is parseable by the expression grammar in
# jetdet.dsl, and printing is deterministic.
# --------------------------------------------------------------------------

def _exp_text(e: Exponent) -> str:
    if isinstance(e, LinExp):
        return f"({e})"
    if e.denominator == 1 and e >= 0:
        return str(e)
    return f"({e})"


def atom_text(a: Atom) -> str:
    if isinstance(a, (Var, Param)):
        return a.name
    if isinstance(a, Rad):
        return f"({a.base})"
    if isinstance(a, Jet):
        if a.torder == 0 and not any(a.mi):
            return a.dep
        suffix = "t" * a.torder + "".join(ax * k for ax, k in zip(a.axes, a.mi))
        return f"{a.dep}_{suffix}"
    if isinstance(a, Elem):
        return f"{a.fn}({to_text(a.arg)})"
    if isinstance(a, Opaque):
        args = ", ".join(to_text(g) for g in a.args)
        if len(a.dmi) == 1 and 0 < a.dmi[0] <= 3:
            return f"{a.name}{chr(39) * a.dmi[0]}({args})"
        if any(a.dmi):
            idx = ",".join(str(k) for k in a.dmi)
            return f"{a.name}[{idx}]({args})"
        return f"{a.name}({args})"
    raise StructureError(f"unprintable atom {a!r}")


def _mono_text(m: Monomial, c: Fraction) -> str:
    parts = []
    if m == MONO_ONE:
        return _coeff_text(c)
    if c == -1:
        parts.append("-")
    elif c != 1:
        parts.append(_coeff_text(c) + "*")
    body = []
    for a, e in m:
        at = atom_text(a)
        if isinstance(e, Fraction) and e == 1:
            body.append(at)
        else:
            body.append(f"{at}^{_exp_text(e)}")
    return "".join(parts) + "*".join(body)


def _coeff_text(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c)
    if c < 0:
        return f"-({-c.numerator}/{c.denominator})"
    return f"({c})"


def _poly_text(p: Poly) -> str:
    if not p:
        return "0"
    items = sorted(p.items(), key=lambda kv: mono_key(kv[0]))
    out = _mono_text(items[0][0], items[0][1])
    for m, c in items[1:]:
        t = _mono_text(m, c)
        if t.startswith("-"):
            out += " - " + t[1:]
        else:
            out += " + " + t
    return out


def to_text(e: Expr) -> str:
    nt = _poly_text(e.num)
    if e.den == {MONO_ONE: _ONE}:
        return nt
    dt = _poly_text(e.den)
    if len(e.num) > 1:
        nt = f"({nt})"
    return f"{nt}/({dt})"
