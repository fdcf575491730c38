"""Symbolic jet-space calculus for differential constraints of PDEs.

Subpackages:

* symcore  -- exact expression kernel (Laurent quotients over ordered atoms)
* jetcalc  -- total derivatives, prolongation, on-shell reduction
* detsolve -- determining-equation templates and exact constant solving
* distrib  -- vector fields, involutivity, first-order invariant manifolds
* reduce   -- ansatz substitution, ODE extraction, numeric residual checks
* dsl      -- the text format for problems and the expression grammar
* cli      -- command-line entry points
"""

from .symcore import (
    DomainError,
    Expr,
    StructureError,
    cos,
    evaluate,
    exp,
    jet,
    ln,
    opaque,
    param,
    partial,
    sin,
    sqrt,
    substitute,
    tan,
    to_text,
    var,
)

__all__ = [
    "DomainError",
    "Expr",
    "StructureError",
    "cos",
    "evaluate",
    "exp",
    "jet",
    "ln",
    "opaque",
    "param",
    "partial",
    "sin",
    "sqrt",
    "substitute",
    "tan",
    "to_text",
    "var",
]

__version__ = "0.1.0"
