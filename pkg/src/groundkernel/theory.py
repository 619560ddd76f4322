"""Machine-built, kernel-checked derivations and the extension registry.

Three families of closed theorems are constructed here as concrete
derivations: the ground-clause characterizations of each connective, the
well-definedness of each elimination operation, and the rewritability of
the worked two-argument extension symbol.  `synthesize_typing` produces,
for any plain-fragment term, a derivation of its typing statement from
the typing assumptions of its free typed variables.

User-declared operation symbols are registered together with their
computation equations; registration validates the equation shape, the
free-variable condition and left-linearity, and generates the congruence
rule the kernel consults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import Bot, Exists, Forall, Imp, LFormula, LTerm, Or, Var, l_subst, print_l
from .terms import (
    AndElim,
    AndIntro,
    BotElim,
    Delta,
    ExistsElim,
    ExistsIntro,
    ExtApp,
    FApp,
    ForallElim,
    ForallIntro,
    FVar,
    GTerm,
    HApp,
    HVar,
    ImpElim,
    ImpIntro,
    MetaVar,
    OpSymbol,
    OrElim,
    OrIntro,
    XiVar,
    free_vars,
    is_gen,
    metavars,
    type_of,
)
from . import terms as tm
from .formulas import BOTG, Eps, Equiv, GFormula, Gr, Pi, Plus, Sup, Times, gr, subst_formula
from .kernel import Derivation, assume, relabel_fresh, rename_formula

BUILTIN_RULE_NAMES = frozenset(
    ("andI", "orI", "impI", "forallI", "existsI", "andE", "orE", "impE", "forallE", "existsE", "botE")
)


class TheoryError(Exception):
    pass


class NotGenTerm(TheoryError):
    pass


class Condition1Violation(TheoryError):
    pass


class Condition2Violation(TheoryError):
    pass


class Condition3Violation(TheoryError):
    pass


class WrongExtension(TheoryError):
    pass


# ---------------------------------------------------------------------------
# Extension registry


@dataclass(frozen=True)
class RewriteRule:
    sym: OpSymbol
    lhs: GTerm
    rhs: GTerm


@dataclass(frozen=True)
class ExtensionRegistry:
    symbols: dict = field(default_factory=dict)
    equations: dict = field(default_factory=dict)

    def with_extension(self, sym: OpSymbol, eqs) -> "ExtensionRegistry":
        symbols = dict(self.symbols)
        equations = dict(self.equations)
        symbols[sym.name] = sym
        equations[sym.name] = tuple(eqs)
        return ExtensionRegistry(symbols, equations)


EMPTY_REGISTRY = ExtensionRegistry()


def _meta_occurrences(t: GTerm) -> list:
    match t:
        case MetaVar():
            return [t]
        case Delta() | XiVar() | HApp():
            return []
        case FApp(_, a) | OrIntro(_, _, a) | ImpIntro(_, a) | ForallIntro(_, _, a) | ExistsIntro(_, _, a):
            return _meta_occurrences(a)
        case AndElim(_, a) | ForallElim(_, a) | BotElim(_, a):
            return _meta_occurrences(a)
        case AndIntro(l, r) | ImpElim(l, r):
            return _meta_occurrences(l) + _meta_occurrences(r)
        case OrElim(_, _, s, l, r):
            return _meta_occurrences(s) + _meta_occurrences(l) + _meta_occurrences(r)
        case ExistsElim(_, _, s, b):
            return _meta_occurrences(s) + _meta_occurrences(b)
        case ExtApp(_, args):
            return [m for a in args for m in _meta_occurrences(a)]
    raise TypeError(t)


def register_extension(sym: OpSymbol, eqs, registry: ExtensionRegistry = EMPTY_REGISTRY) -> ExtensionRegistry:
    """Validate and register a non-primitive operation symbol with its
    computation equations."""
    if sym.name in BUILTIN_RULE_NAMES or sym.name in registry.symbols:
        raise TheoryError(f"symbol name {sym.name!r} is taken")
    for eq in eqs:
        if eq.sym != sym:
            raise Condition1Violation(f"equation declared for {eq.sym.name}, not {sym.name}")
        if not (isinstance(eq.lhs, ExtApp) and eq.lhs.sym == sym):
            raise Condition1Violation(f"left side must be an application of {sym.name}")
        lt = type_of(eq.lhs)
        rt = type_of(eq.rhs)
        if lt != sym.codomain or rt != sym.codomain:
            raise Condition1Violation(
                f"equation sides must have the codomain type {print_l(sym.codomain)}, got {print_l(lt)} and {print_l(rt)}"
            )
        lv, rv = free_vars(eq.lhs), free_vars(eq.rhs)
        for kind in ("ind", "xi", "fn"):
            missing = getattr(lv, kind) - getattr(rv, kind)
            if missing:
                raise Condition2Violation(
                    f"free variables of the left side missing on the right: {sorted(map(str, missing))}"
                )
        occs = _meta_occurrences(eq.lhs)
        if len(occs) != len(set(occs)):
            raise Condition3Violation("left-side metavariables must be pairwise distinct")
        extra = metavars(eq.rhs) - metavars(eq.lhs)
        if extra:
            raise Condition3Violation(f"right side uses metavariables not bound on the left: {sorted(m.name for m in extra)}")
    return registry.with_extension(sym, eqs)


# ---------------------------------------------------------------------------
# Label supply


class Labels:
    def __init__(self, start: int = 0):
        self.n = start

    def __call__(self) -> int:
        self.n += 1
        return self.n


def _d(rule: str, concl: GFormula, *premises: Derivation, discharge=(), eigen=(), inst=None) -> Derivation:
    return Derivation(rule, concl, tuple(premises), tuple(discharge), tuple(eigen), inst)


def _sup_i(body: Derivation, antecedent: GFormula, labels) -> Derivation:
    return _d("supI", Sup(antecedent, body.concl), body, discharge=tuple(labels))


def _times_e(x: Derivation, side: int) -> Derivation:
    f = x.concl
    return _d(f"timesE-{side}", (f.left, f.right)[side - 1], x)


def _pi_e(x: Derivation, inst) -> Derivation:
    body, var = x.concl.body, x.concl.var
    if isinstance(inst, (HVar, FVar)):
        concl = body if inst == var else rename_formula(body, var, inst)
    else:
        concl = subst_formula(body, var, inst)
    return _d("PiE", concl, x, inst=inst)


def _eps_i(x: Derivation, var, inst) -> Derivation:
    return _d("EpsI", Eps(var, x.concl), x, inst=inst)


def _refl(t: GTerm) -> Derivation:
    return _d("eq-refl", Equiv(t, t))


def _trans(a: Derivation, b: Derivation) -> Derivation:
    return _d("eq-trans", Equiv(a.concl.left, b.concl.right), a, b)


def _pres(eq: Derivation, ty: Derivation) -> Derivation:
    return _d("eq-pres", Gr(eq.concl.left, ty.concl.type), eq, ty)


# ---------------------------------------------------------------------------
# Ground-clause theorems (one per connective)


def build_ground_clause(conn: str, a: LFormula, b: LFormula | None = None) -> Derivation:
    """Closed derivation characterizing grounds for the given connective."""
    match conn:
        case "and":
            return _gc_and(a, b)
        case "or":
            return _gc_or(a, b)
        case "imp":
            return _gc_imp(a, b)
        case "forall":
            assert isinstance(a, Forall) and b is None
            return _gc_forall(a)
        case "exists":
            assert isinstance(a, Exists) and b is None
            return _gc_exists(a)
    raise ValueError(f"unknown connective {conn!r}")


def _gc_and(al: LFormula, be: LFormula):
    from .lang import And

    phi = And(al, be)
    xc = XiVar(phi, 0)
    xa = XiVar(al, 0)
    xb = XiVar(be, 1 if be == al else 0)
    lab = Labels()
    eq_f = Equiv(xc, AndIntro(xa, xb))
    body = Times(eq_f, Times(Gr(xa, al), Gr(xb, be)))
    big = Eps(xa, Eps(xb, body))

    l1, l2, l3, l4 = lab(), lab(), lab(), lab()
    pair = _d("timesI", body, assume(eq_f, l2), _d("timesI", body.right, assume(Gr(xa, al), l3), assume(Gr(xb, be), l4)))
    packed = _eps_i(_eps_i(pair, xb, xb), xa, xa)
    ltr_core = _d("case-and", big, assume(Gr(xc, phi), l1), packed, discharge=(l2, l3, l4), eigen=(xa, xb))
    ltr = _sup_i(ltr_core, Gr(xc, phi), (l1,))

    l5, l6, l7 = lab(), lab(), lab()
    x = lambda: assume(body, l5)
    ab = _d("andI", gr(AndIntro(xa, xb)), _times_e(_times_e(x(), 2), 1), _times_e(_times_e(x(), 2), 2))
    core = _pres(_times_e(x(), 1), ab)
    inner = _d("EpsE", core.concl, assume(Eps(xb, body), l6), core, discharge=(l5,), eigen=(xb,))
    outer = _d("EpsE", core.concl, assume(big, l7), inner, discharge=(l6,), eigen=(xa,))
    rtl = _sup_i(outer, big, (l7,))

    both = _d("timesI", Times(ltr.concl, rtl.concl), ltr, rtl)
    return _d("PiI", Pi(xc, both.concl), both, eigen=(xc,))


def _gc_or(al: LFormula, be: LFormula):
    phi = Or(al, be)
    xd = XiVar(phi, 0)
    xa = XiVar(al, 0)
    xb = XiVar(be, 1 if be == al else 0)
    lab = Labels()
    eq1 = Equiv(xd, OrIntro(1, be, xa))
    eq2 = Equiv(xd, OrIntro(2, al, xb))
    body = Plus(Times(eq1, Gr(xa, al)), Times(eq2, Gr(xb, be)))
    big = Eps(xa, Eps(xb, body))

    l1, l2, l3, l4, l5 = lab(), lab(), lab(), lab(), lab()
    br1 = _eps_i(
        _eps_i(_d("plusI-1", body, _d("timesI", body.left, assume(eq1, l2), assume(Gr(xa, al), l3))), xb, xb), xa, xa
    )
    br2 = _eps_i(
        _eps_i(_d("plusI-2", body, _d("timesI", body.right, assume(eq2, l4), assume(Gr(xb, be), l5))), xb, xb), xa, xa
    )
    ltr_core = _d("case-or", big, assume(Gr(xd, phi), l1), br1, br2, discharge=(l2, l3, l4, l5), eigen=(xa, xb))
    ltr = _sup_i(ltr_core, Gr(xd, phi), (l1,))

    l6, l7, l8, l9, l10 = lab(), lab(), lab(), lab(), lab()
    p1 = _pres(_times_e(assume(body.left, l9), 1), _d("orI", gr(OrIntro(1, be, xa)), _times_e(assume(body.left, l9), 2)))
    p2 = _pres(_times_e(assume(body.right, l10), 1), _d("orI", gr(OrIntro(2, al, xb)), _times_e(assume(body.right, l10), 2)))
    core = _d("plusE", p1.concl, assume(body, l8), p1, p2, discharge=(l9, l10))
    inner = _d("EpsE", core.concl, assume(Eps(xb, body), l7), core, discharge=(l8,), eigen=(xb,))
    outer = _d("EpsE", core.concl, assume(big, l6), inner, discharge=(l7,), eigen=(xa,))
    rtl = _sup_i(outer, big, (l6,))

    both = _d("timesI", Times(ltr.concl, rtl.concl), ltr, rtl)
    return _d("PiI", Pi(xd, both.concl), both, eigen=(xd,))


def _gc_imp(al: LFormula, be: LFormula):
    phi = Imp(al, be)
    xi = XiVar(phi, 0)
    xa = XiVar(al, 0)
    f = FVar(be, 0)
    lab = Labels()
    eq_f = Equiv(xi, ImpIntro(xa, FApp(f, xa)))
    pi_f = Pi(xa, Sup(Gr(xa, al), Gr(FApp(f, xa), be)))
    body = Times(eq_f, pi_f)
    big = Eps(f, body)

    l1, l2, l3 = lab(), lab(), lab()
    pair = _d("timesI", body, assume(eq_f, l2), assume(pi_f, l3))
    ltr_core = _d("case-imp", big, assume(Gr(xi, phi), l1), _eps_i(pair, f, f), discharge=(l2, l3), eigen=(f,))
    ltr = _sup_i(ltr_core, Gr(xi, phi), (l1,))

    l4, l5, l6 = lab(), lab(), lab()
    app = _d("supE", Gr(FApp(f, xa), be), _pi_e(_times_e(assume(body, l5), 2), xa), assume(Gr(xa, al), l6))
    lam = _d("impI", gr(ImpIntro(xa, FApp(f, xa))), app, discharge=(l6,))
    core = _pres(_times_e(assume(body, l5), 1), lam)
    outer = _d("EpsE", core.concl, assume(big, l4), core, discharge=(l5,), eigen=(f,))
    rtl = _sup_i(outer, big, (l4,))

    both = _d("timesI", Times(ltr.concl, rtl.concl), ltr, rtl)
    return _d("PiI", Pi(xi, both.concl), both, eigen=(xi,))


def _gc_forall(phi: Forall):
    x = phi.var
    alpha = phi.body
    xu = XiVar(phi, 0)
    h = HVar(alpha, x, 0)
    lab = Labels()
    eq_f = Equiv(xu, ForallIntro(x, x, HApp(h, x)))
    pi_f = Pi(x, Gr(HApp(h, x), alpha))
    body = Times(eq_f, pi_f)
    big = Eps(h, body)

    l1, l2, l3 = lab(), lab(), lab()
    pair = _d("timesI", body, assume(eq_f, l2), assume(pi_f, l3))
    ltr_core = _d("case-forall", big, assume(Gr(xu, phi), l1), _eps_i(pair, h, h), discharge=(l2, l3), eigen=(h,))
    ltr = _sup_i(ltr_core, Gr(xu, phi), (l1,))

    l4, l5 = lab(), lab()
    gen = _d("forallI", gr(ForallIntro(x, x, HApp(h, x))), _pi_e(_times_e(assume(body, l5), 2), x), eigen=(x,))
    core = _pres(_times_e(assume(body, l5), 1), gen)
    outer = _d("EpsE", core.concl, assume(big, l4), core, discharge=(l5,), eigen=(h,))
    rtl = _sup_i(outer, big, (l4,))

    both = _d("timesI", Times(ltr.concl, rtl.concl), ltr, rtl)
    return _d("PiI", Pi(xu, both.concl), both, eigen=(xu,))


def _gc_exists(phi: Exists):
    x = phi.var
    alpha = phi.body
    xe = XiVar(phi, 0)
    xa = XiVar(alpha, 0)
    lab = Labels()
    eq_f = Equiv(xe, ExistsIntro(phi, x, xa))
    body = Times(eq_f, Gr(xa, alpha))
    big = Eps(x, Eps(xa, body))

    l1, l2, l3 = lab(), lab(), lab()
    pair = _d("timesI", body, assume(eq_f, l2), assume(Gr(xa, alpha), l3))
    packed = _eps_i(_eps_i(pair, xa, xa), x, x)
    ltr_core = _d("case-exists", big, assume(Gr(xe, phi), l1), packed, discharge=(l2, l3), eigen=(x, xa))
    ltr = _sup_i(ltr_core, Gr(xe, phi), (l1,))

    l4, l5, l6 = lab(), lab(), lab()
    exi = _d("existsI", gr(ExistsIntro(phi, x, xa)), _times_e(assume(body, l4), 2))
    core = _pres(_times_e(assume(body, l4), 1), exi)
    inner = _d("EpsE", core.concl, assume(Eps(xa, body), l5), core, discharge=(l4,), eigen=(xa,))
    outer = _d("EpsE", core.concl, assume(big, l6), inner, discharge=(l5,), eigen=(x,))
    rtl = _sup_i(outer, big, (l6,))

    both = _d("timesI", Times(ltr.concl, rtl.concl), ltr, rtl)
    return _d("PiI", Pi(xe, both.concl), both, eigen=(xe,))


# ---------------------------------------------------------------------------
# Well-definedness theorems (one per elimination operation)


def build_well_definedness(conn: str, *args, **kw) -> Derivation:
    match conn:
        case "and":
            return _wd_and(*args, **kw)
        case "or":
            return _wd_or(*args, **kw)
        case "imp":
            return _wd_imp(*args, **kw)
        case "forall":
            return _wd_forall(*args, **kw)
        case "exists":
            return _wd_exists(*args, **kw)
        case "bot":
            return _wd_bot(*args, **kw)
    raise ValueError(f"unknown connective {conn!r}")


def _wd_and(al: LFormula, be: LFormula, side: int, binder: int = 0) -> Derivation:
    from .lang import And

    phi = And(al, be)
    xc = XiVar(phi, binder)
    lab = Labels()
    l1, l2, l3, l4 = lab(), lab(), lab(), lab()
    xa = XiVar(al, 0)
    xb = XiVar(be, 1 if be == al else 0)
    eq_f = Equiv(xc, AndIntro(xa, xb))

    cong = _d(f"cong-and-3-{side}", Equiv(AndElim(side, xc), AndElim(side, AndIntro(xa, xb))), assume(eq_f, l2))
    rw = _d(f"rw-and-{side}", Equiv(AndElim(side, AndIntro(xa, xb)), (xa, xb)[side - 1]))
    chain = _trans(cong, rw)
    ty = assume(Gr((xa, xb)[side - 1], (al, be)[side - 1]), (l3, l4)[side - 1])
    core = _pres(chain, ty)
    case = _d("case-and", core.concl, assume(Gr(xc, phi), l1), core, discharge=(l2, l3, l4), eigen=(xa, xb))
    imp = _sup_i(case, Gr(xc, phi), (l1,))
    return _d("PiI", Pi(xc, imp.concl), imp, eigen=(xc,))


def _wd_or(
    al: LFormula,
    be: LFormula,
    ga: LFormula,
    b1: XiVar | None = None,
    b2: XiVar | None = None,
    binder: int = 0,
    props: tuple | None = None,
) -> Derivation:
    phi = Or(al, be)
    xd = XiVar(phi, binder)
    b1 = b1 if b1 is not None else XiVar(al, 0)
    b2 = b2 if b2 is not None else XiVar(be, 1 if be == al else 0)
    if props is None:
        p1, p2 = b1, b2
    else:
        p1, p2 = props
    f1 = FVar(ga, 0)
    f2 = FVar(ga, 1)
    lab = Labels()
    l1 = lab()
    res_term = OrElim(b1, b2, xd, FApp(f1, b1), FApp(f2, b2))
    pi1 = Pi(b1, Sup(Gr(b1, al), Gr(FApp(f1, b1), ga)))
    pi2 = Pi(b2, Sup(Gr(b2, be), Gr(FApp(f2, b2), ga)))
    ante = Times(Times(Gr(xd, phi), pi1), pi2)
    x = lambda: assume(ante, l1)

    def branch(side, pv, fv):
        leq, lty = lab(), lab()
        other = be if side == 1 else al
        eq_f = Equiv(xd, OrIntro(side, other, pv))
        cong = _d(
            "cong-or-3",
            Equiv(res_term, OrElim(b1, b2, OrIntro(side, other, pv), FApp(f1, b1), FApp(f2, b2))),
            assume(eq_f, leq),
            _refl(FApp(f1, b1)),
            _refl(FApp(f2, b2)),
        )
        rw = _d(
            f"rw-or-{side}",
            Equiv(OrElim(b1, b2, OrIntro(side, other, pv), FApp(f1, b1), FApp(f2, b2)), FApp(fv, pv)),
        )
        chain = _trans(cong, rw)
        proj = _times_e(_times_e(x(), 1), 2) if side == 1 else _times_e(x(), 2)
        app = _d("supE", Gr(FApp(fv, pv), ga), _pi_e(proj, pv), assume(Gr(pv, (al, be)[side - 1]), lty))
        return _pres(chain, app), (leq, lty)

    br1, d1 = branch(1, p1, f1)
    br2, d2 = branch(2, p2, f2)
    major = _times_e(_times_e(x(), 1), 1)
    case = _d("case-or", br1.concl, major, br1, br2, discharge=d1 + d2, eigen=(p1, p2))
    imp = _sup_i(case, ante, (l1,))
    out = _d("PiI", Pi(f2, imp.concl), imp, eigen=(f2,))
    out = _d("PiI", Pi(f1, out.concl), out, eigen=(f1,))
    return _d("PiI", Pi(xd, out.concl), out, eigen=(xd,))


def _wd_imp(al: LFormula, be: LFormula, binder1: int = 0, binder2: int = 0) -> Derivation:
    phi = Imp(al, be)
    xi = XiVar(phi, binder1)
    xa = XiVar(al, binder2)
    bnd = XiVar(al, max(binder2 + 1, _max_xi_index(al, (xa,)) + 1))
    f = FVar(be, 0)
    lab = Labels()
    l1, l2, l3 = lab(), lab(), lab()
    ante = Times(Gr(xi, phi), Gr(xa, al))
    x = lambda: assume(ante, l1)
    eq_f = Equiv(xi, ImpIntro(bnd, FApp(f, bnd)))
    pi_f = Pi(bnd, Sup(Gr(bnd, al), Gr(FApp(f, bnd), be)))

    cong = _d(
        "cong-imp-3",
        Equiv(ImpElim(xi, xa), ImpElim(ImpIntro(bnd, FApp(f, bnd)), xa)),
        assume(eq_f, l2),
        _refl(xa),
    )
    rw = _d("rw-imp", Equiv(ImpElim(ImpIntro(bnd, FApp(f, bnd)), xa), FApp(f, xa)))
    chain = _trans(cong, rw)
    app = _d("supE", Gr(FApp(f, xa), be), _pi_e(assume(pi_f, l3), xa), _times_e(x(), 2))
    core = _pres(chain, app)
    case = _d("case-imp", core.concl, _times_e(x(), 1), core, discharge=(l2, l3), eigen=(f,))
    imp = _sup_i(case, ante, (l1,))
    out = _d("PiI", Pi(xa, imp.concl), imp, eigen=(xa,))
    return _d("PiI", Pi(xi, out.concl), out, eigen=(xi,))


def _max_xi_index(ty: LFormula, vs) -> int:
    return max((v.index for v in vs if isinstance(v, XiVar) and v.type == ty), default=-1)


def _wd_forall(phi: Forall, t: LTerm, binder: int = 0) -> Derivation:
    x, alpha = phi.var, phi.body
    xu = XiVar(phi, binder)
    h = HVar(alpha, x, 0)
    lab = Labels()
    l1, l2, l3 = lab(), lab(), lab()
    eq_f = Equiv(xu, ForallIntro(x, x, HApp(h, x)))
    pi_f = Pi(x, Gr(HApp(h, x), alpha))

    cong = _d(
        "cong-forall-3",
        Equiv(ForallElim(t, xu), ForallElim(t, ForallIntro(x, x, HApp(h, x)))),
        assume(eq_f, l2),
    )
    rw = _d("rw-forall", Equiv(ForallElim(t, ForallIntro(x, x, HApp(h, x))), HApp(h, t)))
    chain = _trans(cong, rw)
    core = _pres(chain, _pi_e(assume(pi_f, l3), t))
    case = _d("case-forall", core.concl, assume(Gr(xu, phi), l1), core, discharge=(l2, l3), eigen=(h,))
    imp = _sup_i(case, Gr(xu, phi), (l1,))
    return _d("PiI", Pi(xu, imp.concl), imp, eigen=(xu,))


def _wd_exists(
    phi: Exists,
    ga: LFormula,
    y: Var | None = None,
    bx: XiVar | None = None,
    binder: int = 0,
    props: tuple | None = None,
) -> Derivation:
    x0, alpha0 = phi.var, phi.body
    y = y if y is not None else x0
    alpha = l_subst(alpha0, x0, y)
    bx = bx if bx is not None else XiVar(alpha, 0)
    if props is None:
        py, px = y, bx
    else:
        py, px = props
    alpha_p = l_subst(alpha0, x0, py)
    xe = XiVar(phi, binder)
    f = FVar(ga, 0)
    lab = Labels()
    l1, l2, l3 = lab(), lab(), lab()
    res_term = ExistsElim(y, bx, xe, FApp(f, bx))
    pi_f = Pi(y, Pi(bx, Sup(Gr(bx, alpha), Gr(FApp(f, bx), ga))))
    ante = Times(Gr(xe, phi), pi_f)
    x = lambda: assume(ante, l1)
    eq_f = Equiv(xe, ExistsIntro(phi, py, px))

    cong = _d(
        "cong-exists-3",
        Equiv(res_term, ExistsElim(y, bx, ExistsIntro(phi, py, px), FApp(f, bx))),
        assume(eq_f, l2),
        _refl(FApp(f, bx)),
    )
    rw = _d("rw-exists", Equiv(ExistsElim(y, bx, ExistsIntro(phi, py, px), FApp(f, bx)), FApp(f, px)))
    chain = _trans(cong, rw)
    app = _d(
        "supE",
        Gr(FApp(f, px), ga),
        _pi_e(_pi_e(_times_e(x(), 2), py), px),
        assume(Gr(px, alpha_p), l3),
    )
    core = _pres(chain, app)
    case = _d("case-exists", core.concl, _times_e(x(), 1), core, discharge=(l2, l3), eigen=(py, px))
    imp = _sup_i(case, ante, (l1,))
    out = _d("PiI", Pi(f, imp.concl), imp, eigen=(f,))
    return _d("PiI", Pi(xe, out.concl), out, eigen=(xe,))


def _wd_bot(alpha: LFormula, binder: int = 0) -> Derivation:
    xb = XiVar(Bot(), binder)
    lab = Labels()
    l1 = lab()
    boom = _d("bot-type", BOTG, assume(Gr(xb, Bot()), l1))
    out = _d("botG", gr(BotElim(alpha, xb)), boom)
    imp = _sup_i(out, Gr(xb, Bot()), (l1,))
    return _d("PiI", Pi(xb, imp.concl), imp, eigen=(xb,))


# ---------------------------------------------------------------------------
# Typing synthesis for plain-fragment terms


def synthesize_typing(u: GTerm, base=None) -> Derivation:
    """Derivation of the typing statement of u from the typing assumptions of
    its free typed variables, built by recursion on u."""
    if not is_gen(u):
        raise NotGenTerm("typing synthesis is defined on the plain fragment only")
    box = [0]

    def labels() -> int:
        box[0] += 1
        return box[0]

    def lemma(th: Derivation) -> Derivation:
        return relabel_fresh(th, box)

    env: dict = {}

    def go(t: GTerm) -> Derivation:
        match t:
            case XiVar():
                if t not in env:
                    env[t] = labels()
                return assume(Gr(t, t.type), env[t])
            case Delta():
                return _d("C", gr(t))
            case AndIntro(l, r):
                return _d("andI", gr(t), go(l), go(r))
            case OrIntro(_, _, a):
                return _d("orI", gr(t), go(a))
            case ImpIntro(b, body):
                saved = env.pop(b, None)
                env[b] = labels()
                sub = go(body)
                lbl = env.pop(b)
                if saved is not None:
                    env[b] = saved
                return _d("impI", gr(t), sub, discharge=(lbl,))
            case ForallIntro(x, _, body):
                return _d("forallI", gr(t), go(body), eigen=(x,))
            case ExistsIntro(_, _, a):
                return _d("existsI", gr(t), go(a))
            case AndElim(side, a):
                ty = type_of(a)
                th = lemma(_wd_and(ty.left, ty.right, side, binder=_fresh_xi_index(ty, (a,))))
                return _d("supE", gr(t), _pi_e(th, a), go(a))
            case ImpElim(fn, a):
                fty = type_of(fn)
                th = lemma(_wd_imp(fty.left, fty.right, binder1=_fresh_xi_index(fty, (fn, a)), binder2=_fresh_xi_index(fty.left, (fn, a))))
                inst = _pi_e(_pi_e(th, fn), a)
                pair = _d("timesI", Times(Gr(fn, fty), Gr(a, fty.left)), go(fn), go(a))
                return _d("supE", gr(t), inst, pair)
            case OrElim(b1, b2, s, l, r):
                sty = type_of(s)
                ga = type_of(l)
                th = lemma(_wd_or(sty.left, sty.right, ga, b1=b1, b2=b2, binder=_fresh_xi_index(sty, (s, l, r))))
                inst = _pi_e(_pi_e(_pi_e(th, s), l), r)
                lb1 = _scoped(env, b1, labels, lambda: go(l))
                lb2 = _scoped(env, b2, labels, lambda: go(r))
                sub1, lbl1 = lb1
                sub2, lbl2 = lb2
                pi1 = _d("PiI", Pi(b1, Sup(Gr(b1, sty.left), sub1.concl)), _sup_i(sub1, Gr(b1, sty.left), (lbl1,)), eigen=(b1,))
                pi2 = _d("PiI", Pi(b2, Sup(Gr(b2, sty.right), sub2.concl)), _sup_i(sub2, Gr(b2, sty.right), (lbl2,)), eigen=(b2,))
                pair = _d("timesI", Times(Times(Gr(s, sty), pi1.concl), pi2.concl), _d("timesI", Times(Gr(s, sty), pi1.concl), go(s), pi1), pi2)
                return _d("supE", gr(t), inst, pair)
            case ExistsElim(y, b, s, body):
                sty = type_of(s)
                ga = type_of(body)
                th = lemma(_wd_exists(sty, ga, y=y, bx=b, binder=_fresh_xi_index(sty, (s, body))))
                inst = _pi_e(_pi_e(th, s), body)
                sub, lbl = _scoped(env, b, labels, lambda: go(body))
                inner = _d("PiI", Pi(b, Sup(Gr(b, b.type), sub.concl)), _sup_i(sub, Gr(b, b.type), (lbl,)), eigen=(b,))
                outer = _d("PiI", Pi(y, inner.concl), inner, eigen=(y,))
                pair = _d("timesI", Times(Gr(s, sty), outer.concl), go(s), outer)
                return _d("supE", gr(t), inst, pair)
            case ForallElim(inst_t, a):
                aty = type_of(a)
                th = lemma(_wd_forall(aty, inst_t, binder=_fresh_xi_index(aty, (a,))))
                return _d("supE", gr(t), _pi_e(th, a), go(a))
            case BotElim(out, a):
                th = lemma(_wd_bot(out, binder=_fresh_xi_index(Bot(), (a,))))
                return _d("supE", gr(t), _pi_e(th, a), go(a))
            case ExtApp():
                raise NotGenTerm("typing synthesis does not cover extension symbols")
        raise TypeError(t)

    return go(u)


def _fresh_xi_index(ty: LFormula, ts) -> int:
    avoid = [free_vars(t).xi | tm.bound_vars(t).xi for t in ts]
    return tm.fresh_xi(ty, *avoid).index


def _scoped(env: dict, b: XiVar, labels, thunk):
    saved = env.pop(b, None)
    env[b] = labels()
    sub = thunk()
    lbl = env.pop(b)
    if saved is not None:
        env[b] = saved
    return sub, lbl


# ---------------------------------------------------------------------------
# Rewritability of the worked extension


def worked_extension(al: LFormula, be: LFormula) -> tuple[OpSymbol, RewriteRule]:
    """The two-argument case-analysis symbol eliminating a refuted left
    disjunct, with its single computation equation."""
    neg_a = Imp(al, Bot())
    sym = OpSymbol("F", (Or(al, be), neg_a), be)
    t = MetaVar("T", be)
    u = MetaVar("U", neg_a)
    rule = RewriteRule(sym, ExtApp(sym, (OrIntro(2, al, t), u)), t)
    return sym, rule


def build_rewritability(ext: ExtensionRegistry, name: str = "F") -> Derivation:
    """Closed derivation rewriting the worked extension symbol as a plain
    case analysis, provable from its computation equation."""
    sym = ext.symbols.get(name)
    if sym is None or len(sym.domain) != 2 or sym.binders:
        raise WrongExtension(f"no suitable symbol {name!r} registered")
    dom0, dom1 = sym.domain
    be = sym.codomain
    if not (isinstance(dom0, Or) and dom1 == Imp(dom0.left, Bot()) and be == dom0.right):
        raise WrongExtension("symbol type does not match the worked extension")
    al = dom0.left
    want_sym, want_rule = worked_extension(al, be)
    eqs = ext.equations.get(name, ())
    if not any(_same_rule(r, want_rule, sym) for r in eqs):
        raise WrongExtension("registered equations do not include the worked computation rule")

    neg_a = dom1
    phi = dom0
    xor = XiVar(phi, 0)
    xneg = XiVar(neg_a, 0)
    xa = XiVar(al, 0)
    xb = XiVar(be, 1 if be == al else 0)
    lab = Labels()
    l1, l2, l3, l4, l5 = lab(), lab(), lab(), lab(), lab()
    ante = Times(Gr(xor, phi), Gr(xneg, neg_a))
    bot_term = BotElim(be, ImpElim(xneg, xa))
    res_term = OrElim(xa, xb, xor, bot_term, xb)
    th_f = Equiv(ExtApp(sym, (xor, xneg)), res_term)

    # refuted-left branch: explode
    d01 = _d("timesI", Times(Gr(xneg, neg_a), Gr(xa, al)), _times_e(assume(ante, l2), 2), assume(Gr(xa, al), l3))
    imp_w = relabel_fresh(_wd_imp(al, Bot(), binder1=1, binder2=1), [l5])
    boom = _d("supE", Gr(ImpElim(xneg, xa), Bot()), _pi_e(_pi_e(imp_w, xneg), xa), d01)
    delta1 = _d("botG", th_f, _d("bot-type", BOTG, boom))

    # right-disjunct branch: compute both sides down to the injected term
    eq5 = Equiv(xor, OrIntro(2, al, xb))
    d02 = _trans(
        _d(
            f"cong-{name}",
            Equiv(ExtApp(sym, (xor, xneg)), ExtApp(sym, (OrIntro(2, al, xb), xneg))),
            assume(eq5, l4),
            _refl(xneg),
        ),
        _d(f"rw-{name}", Equiv(ExtApp(sym, (OrIntro(2, al, xb), xneg)), xb)),
    )
    d112 = _d(
        "cong-or-3",
        Equiv(res_term, OrElim(xa, xb, OrIntro(2, al, xb), bot_term, xb)),
        assume(eq5, l5),
        _refl(bot_term),
        _refl(xb),
    )
    d12 = _d(
        "eq-sym",
        Equiv(xb, res_term),
        _trans(d112, _d("rw-or-2", Equiv(OrElim(xa, xb, OrIntro(2, al, xb), bot_term, xb), xb))),
    )
    delta2 = _trans(d02, d12)

    case = _d("case-or", th_f, _times_e(assume(ante, l1), 1), delta1, delta2, discharge=(l3, l4, l5), eigen=(xa, xb))
    imp = _d("supI", Sup(ante, th_f), case, discharge=(l1, l2))
    out = _d("PiI", Pi(xneg, imp.concl), imp, eigen=(xneg,))
    return _d("PiI", Pi(xor, out.concl), out, eigen=(xor,))


def _same_rule(r: RewriteRule, want: RewriteRule, sym: OpSymbol) -> bool:
    # compare shapes up to metavariable names
    ren: dict = {}

    def same(p, q) -> bool:
        if isinstance(p, MetaVar) or isinstance(q, MetaVar):
            if not (isinstance(p, MetaVar) and isinstance(q, MetaVar) and p.type == q.type):
                return False
            if p.name in ren:
                return ren[p.name] == q.name
            ren[p.name] = q.name
            return True
        if type(p) is not type(q):
            return False
        match p:
            case ExtApp(s, args):
                return s == q.sym and all(same(x, y) for x, y in zip(args, q.args))
            case OrIntro(side, other, x):
                return side == q.side and other == q.other and same(x, q.arg)
        return p == q

    return same(r.lhs, want.lhs) and same(r.rhs, want.rhs)
