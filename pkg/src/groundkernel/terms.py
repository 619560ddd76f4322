"""Typed terms of the ground language and their substitution calculus.

Terms denote grounds (evidence objects) for background formulas.  The
plain fragment contains delta constants, typed variables and the built-in
operation symbols; the enriched fragment adds applications of functional
variables.  Every term carries a unique type, recomputed by `type_of`.

Four substitution families live here: individual variables by background
terms, typed variables by terms, and the two functional-variable kinds.
Bound variables are never replaced, individual variables are replaced
inside the types of typed variables, and binders are renamed (lowest
unused index) whenever a clash would capture a variable of the payload.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .lang import (
    And,
    Bot,
    Exists,
    Forall,
    Imp,
    LFormula,
    LTerm,
    Or,
    Var,
    bound_vars_l,
    free_for,
    free_vars_l,
    l_subst,
    print_l,
    subst_term,
    term_vars,
)


class TermError(Exception):
    pass


class IllTyped(TermError):
    pass


class SideConditionViolated(TermError):
    pass


class TypeMismatch(TermError):
    pass


class GuardViolated(TermError):
    pass


class NotGenTerm(TermError):
    pass


# ---------------------------------------------------------------------------
# Variables


@dataclass(frozen=True)
class XiVar:
    type: LFormula
    index: int = 0


@dataclass(frozen=True)
class HVar:
    """Functional variable ranging over x-parametric operations: applied to a
    background term t it stands for a ground for type[t/param]."""

    type: LFormula
    param: Var
    index: int = 0


@dataclass(frozen=True)
class FVar:
    """Functional variable ranging over operations given by plain terms."""

    type: LFormula
    index: int = 0


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Delta:
    name: str
    type: LFormula


@dataclass(frozen=True)
class HApp:
    var: HVar
    arg: LTerm


@dataclass(frozen=True)
class FApp:
    var: FVar
    arg: "GTerm"


@dataclass(frozen=True)
class AndIntro:
    left: "GTerm"
    right: "GTerm"


@dataclass(frozen=True)
class OrIntro:
    side: int  # 1 or 2: which disjunct the argument inhabits
    other: LFormula
    arg: "GTerm"


@dataclass(frozen=True)
class ImpIntro:
    binder: XiVar
    body: "GTerm"


@dataclass(frozen=True)
class ForallIntro:
    var: Var
    out_var: Var
    body: "GTerm"


@dataclass(frozen=True)
class ExistsIntro:
    out: LFormula  # the existential type produced
    witness: LTerm
    arg: "GTerm"


@dataclass(frozen=True)
class AndElim:
    side: int
    arg: "GTerm"


@dataclass(frozen=True)
class OrElim:
    bind1: XiVar
    bind2: XiVar
    scrutinee: "GTerm"
    left: "GTerm"
    right: "GTerm"


@dataclass(frozen=True)
class ImpElim:
    fn: "GTerm"
    arg: "GTerm"


@dataclass(frozen=True)
class ForallElim:
    instance: LTerm
    arg: "GTerm"


@dataclass(frozen=True)
class ExistsElim:
    var: Var
    binder: XiVar
    scrutinee: "GTerm"
    body: "GTerm"


@dataclass(frozen=True)
class BotElim:
    out: LFormula
    arg: "GTerm"


@dataclass(frozen=True)
class OpSymbol:
    """A declared non-primitive operation symbol (extension)."""

    name: str
    domain: tuple
    codomain: LFormula
    binders: tuple = ()  # XiVar | Var, scoping over every argument


@dataclass(frozen=True)
class ExtApp:
    sym: OpSymbol
    args: tuple


@dataclass(frozen=True)
class MetaVar:
    """Pattern-only placeholder used in rewrite-rule schemas."""

    name: str
    type: LFormula


GTerm = (
    Delta
    | XiVar
    | HApp
    | FApp
    | AndIntro
    | OrIntro
    | ImpIntro
    | ForallIntro
    | ExistsIntro
    | AndElim
    | OrElim
    | ImpElim
    | ForallElim
    | ExistsElim
    | BotElim
    | ExtApp
    | MetaVar
)

INTRO_NODES = (AndIntro, OrIntro, ImpIntro, ForallIntro, ExistsIntro)


def canonical(t: GTerm) -> bool:
    """Canonical terms directly exhibit a ground: constants, variables, and
    terms headed by a primitive (introduction) symbol."""
    return isinstance(t, (Delta, XiVar)) or isinstance(t, INTRO_NODES)


@lru_cache(maxsize=None)
def is_gen(t: GTerm) -> bool:
    """True iff t belongs to the plain fragment (no functional variables,
    no metavariables)."""
    match t:
        case HApp() | FApp() | MetaVar():
            return False
        case Delta() | XiVar():
            return True
        case AndIntro(l, r) | ImpElim(l, r):
            return is_gen(l) and is_gen(r)
        case OrIntro(_, _, a) | ImpIntro(_, a) | ForallIntro(_, _, a) | ExistsIntro(_, _, a):
            return is_gen(a)
        case AndElim(_, a) | ForallElim(_, a) | BotElim(_, a):
            return is_gen(a)
        case OrElim(_, _, s, l, r):
            return is_gen(s) and is_gen(l) and is_gen(r)
        case ExistsElim(_, _, s, b):
            return is_gen(s) and is_gen(b)
        case ExtApp(_, args):
            return all(is_gen(a) for a in args)
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Typing


@lru_cache(maxsize=None)
def type_of(t: GTerm) -> LFormula:
    match t:
        case Delta(_, ty) | MetaVar(_, ty):
            return ty
        case XiVar(ty, _):
            return ty
        case HApp(h, arg):
            return l_subst(h.type, h.param, arg)
        case FApp(f, arg):
            if not is_gen(arg):
                raise NotGenTerm(f"argument of {f} must be a plain-fragment term")
            type_of(arg)
            return f.type
        case AndIntro(l, r):
            return And(type_of(l), type_of(r))
        case OrIntro(side, other, a):
            ty = type_of(a)
            return Or(ty, other) if side == 1 else Or(other, ty)
        case ImpIntro(b, body):
            return Imp(b.type, type_of(body))
        case ForallIntro(x, y, body):
            ty = type_of(body)
            for xi in free_vars(body).xi:
                if x in free_vars_l(xi.type):
                    raise SideConditionViolated(
                        f"universal introduction: bound {x} occurs free in the type of {xi}"
                    )
            if y != x:
                if not free_for(y, x, ty) or y in free_vars_l(ty):
                    raise SideConditionViolated(f"universal introduction: output variable {y} clashes in {print_l(ty)}")
            return Forall(y, l_subst(ty, x, y))
        case ExistsIntro(out, wit, a):
            if not isinstance(out, Exists):
                raise IllTyped(f"existential introduction must produce an existential type, got {print_l(out)}")
            if not free_for(wit, out.var, out.body):
                raise SideConditionViolated(f"witness {print_l(wit)} not free for {out.var} in {print_l(out.body)}")
            want = l_subst(out.body, out.var, wit)
            got = type_of(a)
            if got != want:
                raise IllTyped(f"existential introduction: argument has type {print_l(got)}, expected {print_l(want)}")
            return out
        case AndElim(side, a):
            ty = type_of(a)
            if not isinstance(ty, And):
                raise IllTyped(f"conjunction elimination on non-conjunctive type {print_l(ty)}")
            return ty.left if side == 1 else ty.right
        case OrElim(b1, b2, s, l, r):
            ty = type_of(s)
            if ty != Or(b1.type, b2.type):
                raise IllTyped(f"disjunction elimination: scrutinee has type {print_l(ty)}")
            lt, rt = type_of(l), type_of(r)
            if lt != rt:
                raise IllTyped(f"disjunction elimination: branch types differ: {print_l(lt)} vs {print_l(rt)}")
            return lt
        case ImpElim(fn, a):
            fty = type_of(fn)
            if not isinstance(fty, Imp):
                raise IllTyped(f"application of non-implicational type {print_l(fty)}")
            aty = type_of(a)
            if aty != fty.left:
                raise IllTyped(f"argument type {print_l(aty)} does not match domain {print_l(fty.left)}")
            return fty.right
        case ForallElim(inst, a):
            ty = type_of(a)
            if not isinstance(ty, Forall):
                raise IllTyped(f"instantiation of non-universal type {print_l(ty)}")
            if not free_for(inst, ty.var, ty.body):
                raise SideConditionViolated(f"instance {print_l(inst)} not free for {ty.var} in {print_l(ty.body)}")
            return l_subst(ty.body, ty.var, inst)
        case ExistsElim(y, b, s, body):
            sty = type_of(s)
            if not isinstance(sty, Exists):
                raise IllTyped(f"existential elimination on non-existential type {print_l(sty)}")
            if b.type != l_subst(sty.body, sty.var, y):
                raise IllTyped(
                    f"existential elimination: binder type {print_l(b.type)} does not match "
                    f"{print_l(l_subst(sty.body, sty.var, y))}"
                )
            for xi in free_vars(body).xi:
                if xi != b and y in free_vars_l(xi.type):
                    raise SideConditionViolated(
                        f"existential elimination: bound {y} occurs free in the type of {xi}"
                    )
            return type_of(body)
        case BotElim(out, a):
            if type_of(a) != Bot():
                raise IllTyped("absurdity operator applied to a non-absurd term")
            return out
        case ExtApp(sym, args):
            if len(args) != len(sym.domain):
                raise IllTyped(f"{sym.name} expects {len(sym.domain)} arguments, got {len(args)}")
            for i, (a, want) in enumerate(zip(args, sym.domain)):
                got = type_of(a)
                if got != want:
                    raise IllTyped(f"{sym.name} argument {i + 1} has type {print_l(got)}, expected {print_l(want)}")
            return sym.codomain
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Variable sets


@dataclass(frozen=True)
class VarSets:
    ind: frozenset = frozenset()
    xi: frozenset = frozenset()
    fn: frozenset = frozenset()

    def __or__(self, other: "VarSets") -> "VarSets":
        return VarSets(self.ind | other.ind, self.xi | other.xi, self.fn | other.fn)

    def minus(self, *vs) -> "VarSets":
        ind = self.ind - {v for v in vs if isinstance(v, Var)}
        xi = self.xi - {v for v in vs if isinstance(v, XiVar)}
        fn = self.fn - {v for v in vs if isinstance(v, (HVar, FVar))}
        return VarSets(ind, xi, fn)

    def plus(self, *vs) -> "VarSets":
        ind = self.ind | {v for v in vs if isinstance(v, Var)}
        xi = self.xi | {v for v in vs if isinstance(v, XiVar)}
        fn = self.fn | {v for v in vs if isinstance(v, (HVar, FVar))}
        return VarSets(ind, xi, fn)


EMPTY = VarSets()


def _l(vs: frozenset) -> VarSets:
    return VarSets(ind=frozenset(vs))


@lru_cache(maxsize=None)
def free_vars(t: GTerm) -> VarSets:
    match t:
        case Delta(_, ty):
            return _l(free_vars_l(ty))
        case XiVar(ty, _):
            return VarSets(ind=free_vars_l(ty), xi=frozenset((t,)))
        case MetaVar():
            return EMPTY
        case HApp(h, arg):
            inst = l_subst(h.type, h.param, arg)
            return VarSets(ind=term_vars(arg) | free_vars_l(inst), fn=frozenset((h,)))
        case FApp(f, arg):
            inner = free_vars(arg)
            return VarSets(ind=inner.ind | free_vars_l(f.type), xi=inner.xi, fn=inner.fn | {f})
        case AndIntro(l, r) | ImpElim(l, r):
            return free_vars(l) | free_vars(r)
        case OrIntro(_, other, a):
            return free_vars(a) | _l(free_vars_l(other))
        case ImpIntro(b, body):
            return free_vars(body).minus(b) | _l(free_vars_l(b.type))
        case ForallIntro(x, _, body):
            inner = free_vars(body)
            return VarSets(ind=inner.ind - {x}, xi=inner.xi, fn=inner.fn)
        case ExistsIntro(out, wit, a):
            return free_vars(a) | _l(term_vars(wit) | free_vars_l(out))
        case AndElim(_, a):
            return free_vars(a)
        case OrElim(b1, b2, s, l, r):
            return (
                free_vars(s)
                | free_vars(l).minus(b1)
                | free_vars(r).minus(b2)
                | _l(free_vars_l(b1.type) | free_vars_l(b2.type))
            )
        case ForallElim(inst, a):
            return free_vars(a) | _l(term_vars(inst))
        case ExistsElim(y, b, s, body):
            body_side = free_vars(body).minus(b) | _l(free_vars_l(b.type))
            return free_vars(s) | VarSets(ind=body_side.ind - {y}, xi=body_side.xi, fn=body_side.fn)
        case BotElim(out, a):
            return free_vars(a) | _l(free_vars_l(out))
        case ExtApp(sym, args):
            out = EMPTY
            for a in args:
                out = out | free_vars(a)
            out = out.minus(*sym.binders)
            for b in sym.binders:
                if isinstance(b, XiVar):
                    out = out | _l(free_vars_l(b.type))
            return out
    raise TypeError(t)


@lru_cache(maxsize=None)
def bound_vars(t: GTerm) -> VarSets:
    match t:
        case Delta(_, ty):
            return _l(bound_vars_l(ty))
        case XiVar(ty, _):
            return _l(bound_vars_l(ty))
        case MetaVar():
            return EMPTY
        case HApp(h, arg):
            return _l(bound_vars_l(l_subst(h.type, h.param, arg)))
        case FApp(f, arg):
            return bound_vars(arg) | _l(bound_vars_l(f.type))
        case AndIntro(l, r) | ImpElim(l, r):
            return bound_vars(l) | bound_vars(r)
        case OrIntro(_, other, a):
            return bound_vars(a) | _l(bound_vars_l(other))
        case ImpIntro(b, body):
            return bound_vars(body).plus(b) | _l(bound_vars_l(b.type))
        case ForallIntro(x, y, body):
            return bound_vars(body).plus(x, y)
        case ExistsIntro(out, _, a):
            return bound_vars(a) | _l(bound_vars_l(out))
        case AndElim(_, a):
            return bound_vars(a)
        case OrElim(b1, b2, s, l, r):
            return (
                bound_vars(s)
                | bound_vars(l)
                | bound_vars(r).plus(b1, b2)
                | _l(bound_vars_l(b1.type) | bound_vars_l(b2.type))
            )
        case ForallElim(_, a):
            return bound_vars(a)
        case ExistsElim(y, b, s, body):
            return bound_vars(s) | bound_vars(body).plus(y, b)
        case BotElim(out, a):
            return bound_vars(a) | _l(bound_vars_l(out))
        case ExtApp(sym, args):
            out = EMPTY
            for a in args:
                out = out | bound_vars(a)
            return out.plus(*sym.binders)
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Fresh supplies (lowest unused index)


def fresh_xi(ty: LFormula, *avoid) -> XiVar:
    taken = {v.index for vs in avoid for v in vs if isinstance(v, XiVar) and v.type == ty}
    i = 0
    while i in taken:
        i += 1
    return XiVar(ty, i)


def fresh_ind(name: str, *avoid) -> Var:
    taken = {v.index for vs in avoid for v in vs if isinstance(v, Var) and v.name == name}
    i = 0
    while i in taken:
        i += 1
    return Var(name, i)


def fresh_fvar(ty: LFormula, *avoid) -> FVar:
    taken = {v.index for vs in avoid for v in vs if isinstance(v, FVar) and v.type == ty}
    i = 0
    while i in taken:
        i += 1
    return FVar(ty, i)


def fresh_hvar(ty: LFormula, param: Var, *avoid) -> HVar:
    taken = {v.index for vs in avoid for v in vs if isinstance(v, HVar)}
    i = 0
    while i in taken:
        i += 1
    return HVar(ty, param, i)


# ---------------------------------------------------------------------------
# Substitution of individual variables


def subst_ind(t: GTerm, x: Var, u: LTerm) -> GTerm:
    match t:
        case Delta() | MetaVar():
            return t
        case XiVar(ty, i):
            return XiVar(l_subst(ty, x, u), i)
        case HApp(h, arg):
            if h.param == x:
                return HApp(h, subst_term(arg, x, u))
            return HApp(HVar(l_subst(h.type, x, u), h.param, h.index), subst_term(arg, x, u))
        case FApp(f, arg):
            return FApp(FVar(l_subst(f.type, x, u), f.index), subst_ind(arg, x, u))
        case AndIntro(l, r):
            return AndIntro(subst_ind(l, x, u), subst_ind(r, x, u))
        case OrIntro(side, other, a):
            return OrIntro(side, l_subst(other, x, u), subst_ind(a, x, u))
        case ImpIntro(b, body):
            return ImpIntro(XiVar(l_subst(b.type, x, u), b.index), subst_ind(body, x, u))
        case ForallIntro(y, w, body):
            if x == y:
                return t
            if y in term_vars(u):
                z = fresh_ind(y.name, term_vars(u), free_vars(body).ind, bound_vars(body).ind)
                body = subst_ind(body, y, z)
                y = z
            if w != y and w in term_vars(u):
                w = fresh_ind(w.name, term_vars(u), free_vars(body).ind, bound_vars(body).ind, {y})
            return ForallIntro(y, w, subst_ind(body, x, u))
        case ExistsIntro(out, wit, a):
            assert isinstance(out, Exists)
            if x in term_vars(wit) and not free_for(u, out.var, out.body):
                return t
            return ExistsIntro(l_subst(out, x, u), subst_term(wit, x, u), subst_ind(a, x, u))
        case AndElim(side, a):
            return AndElim(side, subst_ind(a, x, u))
        case OrElim(b1, b2, s, l, r):
            nb1 = XiVar(l_subst(b1.type, x, u), b1.index)
            nb2 = XiVar(l_subst(b2.type, x, u), b2.index)
            return OrElim(nb1, nb2, subst_ind(s, x, u), subst_ind(l, x, u), subst_ind(r, x, u))
        case ImpElim(fn, a):
            return ImpElim(subst_ind(fn, x, u), subst_ind(a, x, u))
        case ForallElim(inst, a):
            return ForallElim(subst_term(inst, x, u), subst_ind(a, x, u))
        case ExistsElim(y, b, s, body):
            s = subst_ind(s, x, u)
            if x == y:
                return ExistsElim(y, b, s, body)
            if y in term_vars(u):
                z = fresh_ind(y.name, term_vars(u), free_vars(body).ind, bound_vars(body).ind)
                body = subst_ind(body, y, z)
                b = XiVar(l_subst(b.type, y, z), b.index)
                y = z
            return ExistsElim(y, XiVar(l_subst(b.type, x, u), b.index), s, subst_ind(body, x, u))
        case BotElim(out, a):
            return BotElim(l_subst(out, x, u), subst_ind(a, x, u))
        case ExtApp(sym, args):
            if any(isinstance(b, Var) and b == x for b in sym.binders):
                return t
            return ExtApp(sym, tuple(subst_ind(a, x, u) for a in args))
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Substitution of typed variables


def _check_payload(w: GTerm, ty: LFormula):
    got = type_of(w)
    if got != ty:
        raise TypeMismatch(f"payload has type {print_l(got)}, expected {print_l(ty)}")


def _rename_ind_binder(y: Var, body, deps: VarSets):
    """Fresh replacement for an individual binder clashing with payload vars."""
    return fresh_ind(y.name, deps.ind, free_vars(body).ind, bound_vars(body).ind)


def subst_typed(t: GTerm, xi: XiVar, w: GTerm, _checked: bool = False) -> GTerm:
    if not _checked:
        _check_payload(w, xi.type)
    go = lambda s: subst_typed(s, xi, w, _checked=True)
    wf = free_vars(w)
    match t:
        case Delta() | HApp() | MetaVar():
            return t
        case XiVar():
            return w if t == xi else t
        case FApp(f, arg):
            if xi in free_vars(arg).xi and not is_gen(w):
                raise NotGenTerm("substitution would place an enriched term inside a functional-variable argument")
            return FApp(f, go(arg))
        case AndIntro(l, r):
            return AndIntro(go(l), go(r))
        case OrIntro(side, other, a):
            return OrIntro(side, other, go(a))
        case ImpIntro(b, body):
            if b == xi:
                return t
            if b in wf.xi and xi in free_vars(body).xi:
                nb = fresh_xi(b.type, free_vars(body).xi, wf.xi, bound_vars(body).xi)
                body = subst_typed(body, b, nb, _checked=True)
                b = nb
            return ImpIntro(b, go(body))
        case ForallIntro(y, v, body):
            if y in wf.ind and xi in free_vars(body).xi:
                z = _rename_ind_binder(y, body, wf)
                body = subst_ind(body, y, z)
                y = z
            return ForallIntro(y, v, go(body))
        case ExistsIntro(out, wit, a):
            return ExistsIntro(out, wit, go(a))
        case AndElim(side, a):
            return AndElim(side, go(a))
        case OrElim(b1, b2, s, l, r):
            s = go(s)
            if b1 == xi:
                pass
            elif b1 in wf.xi and xi in free_vars(l).xi:
                nb1 = fresh_xi(b1.type, free_vars(l).xi, wf.xi, bound_vars(l).xi)
                l = go(subst_typed(l, b1, nb1, _checked=True))
                b1 = nb1
            else:
                l = go(l)
            if b2 == xi:
                pass
            elif b2 in wf.xi and xi in free_vars(r).xi:
                nb2 = fresh_xi(b2.type, free_vars(r).xi, wf.xi, bound_vars(r).xi)
                r = go(subst_typed(r, b2, nb2, _checked=True))
                b2 = nb2
            else:
                r = go(r)
            return OrElim(b1, b2, s, l, r)
        case ImpElim(fn, a):
            return ImpElim(go(fn), go(a))
        case ForallElim(inst, a):
            return ForallElim(inst, go(a))
        case ExistsElim(y, b, s, body):
            s = go(s)
            if b == xi:
                return ExistsElim(y, b, s, body)
            if y in wf.ind and xi in free_vars(body).xi:
                z = _rename_ind_binder(y, body, wf)
                body = subst_ind(body, y, z)
                b = XiVar(l_subst(b.type, y, z), b.index)
                y = z
            if b in wf.xi and xi in free_vars(body).xi:
                nb = fresh_xi(b.type, free_vars(body).xi, wf.xi, bound_vars(body).xi)
                body = subst_typed(body, b, nb, _checked=True)
                b = nb
            return ExistsElim(y, b, s, go(body))
        case BotElim(out, a):
            return BotElim(out, go(a))
        case ExtApp(sym, args):
            if any(b == xi for b in sym.binders):
                return t
            if any(b in wf.xi or (isinstance(b, Var) and b in wf.ind) for b in sym.binders):
                raise TermError(f"cannot rename fixed binders of extension symbol {sym.name}")
            return ExtApp(sym, tuple(go(a) for a in args))
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Substitution of functional variables


def _subst_fn(t: GTerm, hit):
    """Shared traversal for the two functional-variable substitutions: `hit`
    handles the application nodes.  Deliberately capture-permitting: the
    payload's free variables may be bound at the application site (the
    well-definedness theorems are instantiated exactly this way)."""
    go = lambda s: _subst_fn(s, hit)
    match t:
        case Delta() | XiVar() | MetaVar():
            return t
        case HApp() | FApp():
            return hit(t)
        case AndIntro(l, r):
            return AndIntro(go(l), go(r))
        case OrIntro(side, other, a):
            return OrIntro(side, other, go(a))
        case ImpIntro(b, body):
            return ImpIntro(b, go(body))
        case ForallIntro(y, v, body):
            return ForallIntro(y, v, go(body))
        case ExistsIntro(out, wit, a):
            return ExistsIntro(out, wit, go(a))
        case AndElim(side, a):
            return AndElim(side, go(a))
        case OrElim(b1, b2, s, l, r):
            return OrElim(b1, b2, go(s), go(l), go(r))
        case ImpElim(fn, a):
            return ImpElim(go(fn), go(a))
        case ForallElim(inst, a):
            return ForallElim(inst, go(a))
        case ExistsElim(y, b, s, body):
            return ExistsElim(y, b, go(s), go(body))
        case BotElim(out, a):
            return BotElim(out, go(a))
        case ExtApp(sym, args):
            return ExtApp(sym, tuple(go(a) for a in args))
    raise TypeError(t)


def _h_guard(h: HVar, u: GTerm):
    for xi in free_vars(u).xi:
        if h.param in free_vars_l(xi.type):
            raise GuardViolated(f"{h.param} occurs free in the type of {xi}, free in the payload")


def subst_h(t: GTerm, h: HVar, u: GTerm, allow_enriched: bool = False) -> GTerm:
    """Replace applications h(s) by u[s/param]."""
    _check_payload(u, h.type)
    if not allow_enriched and not is_gen(u):
        raise NotGenTerm("payload of a functional-variable substitution must be a plain-fragment term")
    _h_guard(h, u)

    def hit(app):
        match app:
            case HApp(hv, s):
                return subst_ind(u, h.param, s) if hv == h else app
            case FApp():
                return app

    return _subst_fn(t, hit)


def subst_f(t: GTerm, f: FVar, u: GTerm, allow_enriched: bool = False) -> GTerm:
    """Replace every application f(Z) by u itself (the argument is dropped)."""
    _check_payload(u, f.type)
    if not allow_enriched and not is_gen(u):
        raise NotGenTerm("payload of a functional-variable substitution must be a plain-fragment term")

    def hit(app):
        match app:
            case FApp(fv, _):
                return u if fv == f else app
            case HApp():
                return app

    return _subst_fn(t, hit)


def subst_f_apply(t: GTerm, f: FVar, param: XiVar, body: GTerm) -> GTerm:
    """Replace every application f(Z) by body[Z/param].

    This is the function-like replacement used when a derivation trades a
    functional variable for the body of an implication introduction; plain
    `subst_f` discards arguments instead.
    """
    _check_payload(body, f.type)

    def hit(app):
        match app:
            case FApp(fv, z):
                return subst_typed(body, param, z) if fv == f else app
            case HApp():
                return app

    return _subst_fn(t, hit)


# ---------------------------------------------------------------------------
# Metavariable matching and instantiation (rewrite-rule support)


def match_pattern(pat: GTerm, t: GTerm, env: dict | None = None) -> dict | None:
    """First-order match of t against pat; metavariables bind same-typed terms."""
    env = {} if env is None else env
    if isinstance(pat, MetaVar):
        if type_of(t) != pat.type:
            return None
        if pat.name in env:
            return env if env[pat.name] == t else None
        env[pat.name] = t
        return env
    if type(pat) is not type(t):
        return None
    match pat:
        case Delta() | XiVar():
            return env if pat == t else None
        case HApp(h, a):
            return env if (h, a) == (t.var, t.arg) else None
        case FApp(f, a):
            return None if f != t.var else match_pattern(a, t.arg, env)
        case AndIntro(l, r):
            env = match_pattern(l, t.left, env)
            return env and match_pattern(r, t.right, env)
        case OrIntro(side, other, a):
            if side != t.side or other != t.other:
                return None
            return match_pattern(a, t.arg, env)
        case ImpIntro(b, body):
            return None if b != t.binder else match_pattern(body, t.body, env)
        case ForallIntro(x, y, body):
            if (x, y) != (t.var, t.out_var):
                return None
            return match_pattern(body, t.body, env)
        case ExistsIntro(out, wit, a):
            if out != t.out or wit != t.witness:
                return None
            return match_pattern(a, t.arg, env)
        case AndElim(side, a):
            return None if side != t.side else match_pattern(a, t.arg, env)
        case OrElim(b1, b2, s, l, r):
            if (b1, b2) != (t.bind1, t.bind2):
                return None
            env = match_pattern(s, t.scrutinee, env)
            env = env and match_pattern(l, t.left, env)
            return env and match_pattern(r, t.right, env)
        case ImpElim(fn, a):
            env = match_pattern(fn, t.fn, env)
            return env and match_pattern(a, t.arg, env)
        case ForallElim(inst, a):
            return None if inst != t.instance else match_pattern(a, t.arg, env)
        case ExistsElim(y, b, s, body):
            if (y, b) != (t.var, t.binder):
                return None
            env = match_pattern(s, t.scrutinee, env)
            return env and match_pattern(body, t.body, env)
        case BotElim(out, a):
            return None if out != t.out else match_pattern(a, t.arg, env)
        case ExtApp(sym, args):
            if sym != t.sym:
                return None
            for p, a in zip(args, t.args):
                env = match_pattern(p, a, env)
                if env is None:
                    return None
            return env
    raise TypeError(pat)


def instantiate(pat: GTerm, env: dict) -> GTerm:
    """Replace metavariables by their bindings (plain structural rewrite)."""
    match pat:
        case MetaVar(name, ty):
            try:
                out = env[name]
            except KeyError:
                raise TermError(f"unbound metavariable {name}") from None
            if type_of(out) != ty:
                raise TypeMismatch(f"metavariable {name} bound to a term of the wrong type")
            return out
        case Delta() | XiVar() | HApp():
            return pat
        case FApp(f, a):
            return FApp(f, instantiate(a, env))
        case AndIntro(l, r):
            return AndIntro(instantiate(l, env), instantiate(r, env))
        case OrIntro(side, other, a):
            return OrIntro(side, other, instantiate(a, env))
        case ImpIntro(b, body):
            return ImpIntro(b, instantiate(body, env))
        case ForallIntro(x, y, body):
            return ForallIntro(x, y, instantiate(body, env))
        case ExistsIntro(out, wit, a):
            return ExistsIntro(out, wit, instantiate(a, env))
        case AndElim(side, a):
            return AndElim(side, instantiate(a, env))
        case OrElim(b1, b2, s, l, r):
            return OrElim(b1, b2, instantiate(s, env), instantiate(l, env), instantiate(r, env))
        case ImpElim(fn, a):
            return ImpElim(instantiate(fn, env), instantiate(a, env))
        case ForallElim(inst, a):
            return ForallElim(inst, instantiate(a, env))
        case ExistsElim(y, b, s, body):
            return ExistsElim(y, b, instantiate(s, env), instantiate(body, env))
        case BotElim(out, a):
            return BotElim(out, instantiate(a, env))
        case ExtApp(sym, args):
            return ExtApp(sym, tuple(instantiate(a, env) for a in args))
    raise TypeError(pat)


def metavars(t: GTerm) -> frozenset:
    match t:
        case MetaVar():
            return frozenset((t,))
        case Delta() | XiVar() | HApp():
            return frozenset()
        case FApp(_, a) | OrIntro(_, _, a) | ImpIntro(_, a) | ForallIntro(_, _, a) | ExistsIntro(_, _, a):
            return metavars(a)
        case AndElim(_, a) | ForallElim(_, a) | BotElim(_, a):
            return metavars(a)
        case AndIntro(l, r) | ImpElim(l, r):
            return metavars(l) | metavars(r)
        case OrElim(_, _, s, l, r):
            return metavars(s) | metavars(l) | metavars(r)
        case ExistsElim(_, _, s, b):
            return metavars(s) | metavars(b)
        case ExtApp(_, args):
            return frozenset().union(*(metavars(a) for a in args)) if args else frozenset()
    raise TypeError(t)
