"""Formulas of the enriched ground language.

Atoms state that a term denotes a ground for a type (`Gr`) or that two
same-typed terms denote the same ground (`Equiv`); compounds use the
dedicated connectives times/plus/sup and quantifiers Pi/Eps, which may
bind individual, typed and functional variables alike.

Atom constructors enforce well-formedness: a denotation atom whose term
does not have the stated type, or an equivalence between terms of
different types, cannot be represented at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .lang import LFormula, LTerm, Var, bound_vars_l, formula_to_sexp, free_vars_l, l_subst, print_l, term_vars
from .sexpr import write
from . import terms as tm
from .terms import (
    EMPTY,
    FVar,
    GTerm,
    HVar,
    VarSets,
    XiVar,
    bound_vars,
    free_vars,
    is_gen,
    metavars,
    type_of,
)


class IllFormedFormula(Exception):
    pass


AnyVar = Var | XiVar | HVar | FVar


@dataclass(frozen=True)
class Gr:
    term: GTerm
    type: LFormula

    def __post_init__(self):
        if metavars(self.term):
            raise IllFormedFormula("metavariables cannot occur in formulas")
        got = type_of(self.term)
        if got != self.type:
            raise IllFormedFormula(f"term has type {print_l(got)}, not {print_l(self.type)}")


def gr(term: GTerm) -> Gr:
    return Gr(term, type_of(term))


@dataclass(frozen=True)
class Equiv:
    left: GTerm
    right: GTerm

    def __post_init__(self):
        if metavars(self.left) | metavars(self.right):
            raise IllFormedFormula("metavariables cannot occur in formulas")
        lt, rt = type_of(self.left), type_of(self.right)
        if lt != rt:
            raise IllFormedFormula(f"equivalence between types {print_l(lt)} and {print_l(rt)}")


@dataclass(frozen=True)
class BotG:
    pass


@dataclass(frozen=True)
class Times:
    left: "GFormula"
    right: "GFormula"


@dataclass(frozen=True)
class Plus:
    left: "GFormula"
    right: "GFormula"


@dataclass(frozen=True)
class Sup:
    left: "GFormula"
    right: "GFormula"


@dataclass(frozen=True)
class Pi:
    var: AnyVar
    body: "GFormula"


@dataclass(frozen=True)
class Eps:
    var: AnyVar
    body: "GFormula"


GFormula = Gr | Equiv | BotG | Times | Plus | Sup | Pi | Eps

BOTG = BotG()


def neg(a: GFormula) -> Sup:
    return Sup(a, BOTG)


def is_atomic(a: GFormula) -> bool:
    return isinstance(a, (Gr, Equiv, BotG))


def _binder_sets(v: AnyVar) -> tuple[VarSets, VarSets]:
    """Free/bound individual-variable contribution of a quantified binder."""
    match v:
        case Var():
            return EMPTY, VarSets(ind=frozenset((v,)))
        case XiVar(ty, _) | FVar(ty, _):
            return VarSets(ind=free_vars_l(ty)), VarSets(ind=bound_vars_l(ty))
        case HVar(ty, param, _):
            return (
                VarSets(ind=free_vars_l(ty) - {param}),
                VarSets(ind=bound_vars_l(ty) | {param}),
            )
    raise TypeError(v)


@lru_cache(maxsize=None)
def free_vars_g(a: GFormula) -> VarSets:
    match a:
        case Gr(t, _):
            return free_vars(t)
        case Equiv(l, r):
            return free_vars(l) | free_vars(r)
        case BotG():
            return EMPTY
        case Times(l, r) | Plus(l, r) | Sup(l, r):
            return free_vars_g(l) | free_vars_g(r)
        case Pi(v, b) | Eps(v, b):
            fv, _ = _binder_sets(v)
            return free_vars_g(b).minus(v) | fv
    raise TypeError(a)


@lru_cache(maxsize=None)
def bound_vars_g(a: GFormula) -> VarSets:
    match a:
        case Gr(t, _):
            return bound_vars(t)
        case Equiv(l, r):
            return bound_vars(l) | bound_vars(r)
        case BotG():
            return EMPTY
        case Times(l, r) | Plus(l, r) | Sup(l, r):
            return bound_vars_g(l) | bound_vars_g(r)
        case Pi(v, b) | Eps(v, b):
            _, bv = _binder_sets(v)
            return bound_vars_g(b).plus(v) | bv
    raise TypeError(a)


def closed(x) -> bool:
    vs = free_vars_g(x) if isinstance(x, GFormula) else free_vars(x)
    return not (vs.ind or vs.xi or vs.fn)


# ---------------------------------------------------------------------------
# Substitution in formulas
#
# Quantified cases follow the shadowing discipline of the term calculus for
# the bound variable itself but perform no renaming: instantiating a typed
# or functional variable may capture inner-bound variables on purpose (the
# well-definedness theorems are used exactly this way).


def _subst_binder_ind(v: AnyVar, x: Var, t: LTerm) -> AnyVar:
    match v:
        case Var():
            return v
        case XiVar(ty, i):
            return XiVar(l_subst(ty, x, t), i)
        case FVar(ty, i):
            return FVar(l_subst(ty, x, t), i)
        case HVar(ty, param, i):
            return v if param == x else HVar(l_subst(ty, x, t), param, i)
    raise TypeError(v)


def subst_formula(a: GFormula, v: AnyVar, payload) -> GFormula:
    """Substitute an individual, typed or functional variable in a formula."""
    match v:
        case Var():
            term_sub = lambda s: tm.subst_ind(s, v, payload)
        case XiVar():
            term_sub = lambda s: tm.subst_typed(s, v, payload)
        case HVar():
            term_sub = lambda s: tm.subst_h(s, v, payload, allow_enriched=True)
        case FVar():
            term_sub = lambda s: tm.subst_f(s, v, payload, allow_enriched=True)
        case _:
            raise TypeError(v)

    def go(f: GFormula) -> GFormula:
        match f:
            case Gr(t, ty):
                nty = l_subst(ty, v, payload) if isinstance(v, Var) else ty
                return Gr(term_sub(t), nty)
            case Equiv(l, r):
                return Equiv(term_sub(l), term_sub(r))
            case BotG():
                return f
            case Times(l, r):
                return Times(go(l), go(r))
            case Plus(l, r):
                return Plus(go(l), go(r))
            case Sup(l, r):
                return Sup(go(l), go(r))
            case Pi(b, body) | Eps(b, body):
                cls = type(f)
                if isinstance(v, Var):
                    if isinstance(b, Var):
                        return f if b == v else cls(b, go(body))
                    return cls(_subst_binder_ind(b, v, payload), go(body))
                return f if b == v else cls(b, go(body))
        raise TypeError(f)

    return go(a)


def _payload_vars(payload) -> VarSets:
    if isinstance(payload, GTerm):
        return free_vars(payload)
    return VarSets(ind=term_vars(payload))


def free_for_formula(payload, v: AnyVar, a: GFormula) -> bool:
    """True iff no free occurrence of v in a sits under a binder capturing a
    free variable of the payload."""
    pv = _payload_vars(payload)

    def occurs(f: GFormula) -> bool:
        fv = free_vars_g(f)
        return v in fv.ind or v in fv.xi or v in fv.fn

    def go(f: GFormula) -> bool:
        match f:
            case Gr() | Equiv() | BotG():
                return True
            case Times(l, r) | Plus(l, r) | Sup(l, r):
                return go(l) and go(r)
            case Pi(b, body) | Eps(b, body):
                if b == v or not occurs(f):
                    return True
                captured = b in pv.ind or b in pv.xi or b in pv.fn
                return not captured and go(body)
        raise TypeError(f)

    return go(a)


# ---------------------------------------------------------------------------
# Printing


def anyvar_to_sexp(v: AnyVar):
    match v:
        case Var():
            return str(v)
        case XiVar(ty, i):
            return ["xi", formula_to_sexp(ty), i]
        case HVar(ty, param, i):
            return ["h", formula_to_sexp(ty), str(param), i]
        case FVar(ty, i):
            return ["f", formula_to_sexp(ty), i]
    raise TypeError(v)


def gterm_to_sexp(t: GTerm):
    from .lang import term_to_sexp

    match t:
        case tm.Delta(name, _):
            return ["delta", name]
        case XiVar(ty, i):
            return ["xi", formula_to_sexp(ty), i]
        case tm.HApp(h, arg):
            return ["h", formula_to_sexp(h.type), str(h.param), h.index, term_to_sexp(arg)]
        case tm.FApp(f, arg):
            return ["f", formula_to_sexp(f.type), f.index, gterm_to_sexp(arg)]
        case tm.AndIntro(l, r):
            return ["andI", gterm_to_sexp(l), gterm_to_sexp(r)]
        case tm.OrIntro(_, _, a):
            cod = type_of(t)
            return ["orI", ["rhd", formula_to_sexp(type_of(a)), formula_to_sexp(cod), t.side], gterm_to_sexp(a)]
        case tm.ImpIntro(b, body):
            return ["impI", ["xi", formula_to_sexp(b.type), b.index], gterm_to_sexp(body)]
        case tm.ForallIntro(x, y, body):
            if x == y:
                return ["forallI", str(x), gterm_to_sexp(body)]
            return ["forallI", str(x), str(y), gterm_to_sexp(body)]
        case tm.ExistsIntro(out, wit, a):
            dom = formula_to_sexp(type_of(a))
            return ["existsI", ["rhd", dom, formula_to_sexp(out), term_to_sexp(wit)], gterm_to_sexp(a)]
        case tm.AndElim(side, a):
            return ["andE", side, gterm_to_sexp(a)]
        case tm.OrElim(b1, b2, s, l, r):
            return [
                "orE",
                ["xi", formula_to_sexp(b1.type), b1.index],
                ["xi", formula_to_sexp(b2.type), b2.index],
                gterm_to_sexp(s),
                gterm_to_sexp(l),
                gterm_to_sexp(r),
            ]
        case tm.ImpElim(fn, a):
            return ["impE", gterm_to_sexp(fn), gterm_to_sexp(a)]
        case tm.ForallElim(inst, a):
            dom = formula_to_sexp(type_of(a))
            return ["forallE", ["rhd", dom, formula_to_sexp(type_of(t)), term_to_sexp(inst)], gterm_to_sexp(a)]
        case tm.ExistsElim(y, b, s, body):
            return [
                "existsE",
                str(y),
                ["xi", formula_to_sexp(b.type), b.index],
                gterm_to_sexp(s),
                gterm_to_sexp(body),
            ]
        case tm.BotElim(out, a):
            return ["botE", formula_to_sexp(out), gterm_to_sexp(a)]
        case tm.ExtApp(sym, args):
            return [sym.name, *(gterm_to_sexp(a) for a in args)]
        case tm.MetaVar(name, ty):
            return ["meta", name, formula_to_sexp(ty)]
    raise TypeError(t)


def gformula_to_sexp(a: GFormula):
    match a:
        case Gr(t, ty):
            return ["gr", gterm_to_sexp(t), formula_to_sexp(ty)]
        case Equiv(l, r):
            return ["equiv", gterm_to_sexp(l), gterm_to_sexp(r)]
        case BotG():
            return "botG"
        case Times(l, r):
            return ["times", gformula_to_sexp(l), gformula_to_sexp(r)]
        case Plus(l, r):
            return ["plus", gformula_to_sexp(l), gformula_to_sexp(r)]
        case Sup(l, r):
            return ["sup", gformula_to_sexp(l), gformula_to_sexp(r)]
        case Pi(v, b):
            return ["Pi", anyvar_to_sexp(v), gformula_to_sexp(b)]
        case Eps(v, b):
            return ["Eps", anyvar_to_sexp(v), gformula_to_sexp(b)]
    raise TypeError(a)


def print_g(x) -> str:
    if isinstance(x, GFormula):
        return write(gformula_to_sexp(x))
    return write(gterm_to_sexp(x))
