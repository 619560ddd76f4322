"""Derivation trees and the checking kernel.

A derivation node stores its rule, premises, claimed conclusion, the labels
it discharges, its proper variables (`eigen`) and, for the instantiation
rules, the instantiating term.  The checker recomputes everything and never
trusts a stored conclusion.

Generalized type eliminations draw consequences from dischargeable
assumptions about the canonical form of the major premise's term; their
proper variables obey the usual freshness restrictions (not free in the
conclusion nor in any remaining open assumption of the minor premise).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

from .lang import (
    And,
    App,
    Atom,
    AtomicBase,
    Bot,
    Const,
    Exists,
    Forall,
    Imp,
    LFormula,
    LTerm,
    Or,
    Var,
    free_vars_l,
    l_subst,
    print_l,
    subst_term,
    term_vars,
)
from . import terms as tm
from .terms import (
    AndElim,
    AndIntro,
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
    OrElim,
    OrIntro,
    XiVar,
    instantiate,
    is_gen,
    match_pattern,
    type_of,
)
from .formulas import (
    AnyVar,
    BotG,
    BOTG,
    Eps,
    Equiv,
    GFormula,
    Gr,
    IllFormedFormula,
    Pi,
    Plus,
    Sup,
    Times,
    bound_vars_g,
    free_for_formula,
    free_vars_g,
    gr,
    is_atomic,
    print_g,
    subst_formula,
)

# ---------------------------------------------------------------------------
# Errors (collected per node, never raised during a check)


@dataclass(frozen=True)
class CheckError:
    message: str

    @property
    def kind(self) -> str:
        return type(self).__name__

    def __str__(self):
        return f"{self.kind}: {self.message}"


class SchemaMismatch(CheckError):
    pass


class UnknownRuleId(CheckError):
    pass


class UnknownDelta(CheckError):
    pass


class BadInstantiation(CheckError):
    pass


class DischargeError(CheckError):
    pass


class IllFormed(CheckError):
    pass


@dataclass(frozen=True)
class RestrictionViolated(CheckError):
    rule: str = ""
    variable: str = ""


# ---------------------------------------------------------------------------
# Derivations

TYPE_INTROS = ("C", "andI", "orI", "impI", "forallI", "existsI")
TYPE_ELIMS = ("case-and", "case-or", "case-imp", "case-forall", "case-exists")
LOGIC_INTROS = ("timesI", "plusI-1", "plusI-2", "supI", "PiI", "EpsI")
LOGIC_ELIMS = ("timesE-1", "timesE-2", "plusE", "supE", "PiE", "EpsE")


@dataclass(frozen=True)
class Derivation:
    rule: str
    concl: GFormula
    premises: tuple = ()
    discharge: tuple = ()  # labels closed at this node
    eigen: tuple = ()  # proper variables of the inference
    inst: object = None  # instantiating term for PiE / EpsI
    label: int | None = None  # for assume nodes

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


def assume(f: GFormula, label: int) -> Derivation:
    return Derivation("assume", f, label=label)


@dataclass
class CheckReport:
    ok: bool
    conclusion: GFormula | None
    open_assumptions: Counter
    errors: list = field(default_factory=list)

    def pretty(self) -> str:
        lines = []
        if self.ok:
            lines.append(f"ok {print_g(self.conclusion)}")
            for f, n in sorted(self.open_assumptions.items(), key=lambda kv: print_g(kv[0])):
                lines.append(f"open {n} {print_g(f)}")
        else:
            lines.append("failed")
            for path, err in self.errors:
                loc = ".".join(map(str, path)) or "root"
                lines.append(f"error at {loc}: {err}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Variable occurrence helpers


def var_free_in(v: AnyVar, f: GFormula) -> bool:
    fv = free_vars_g(f)
    return v in fv.ind or v in fv.xi or v in fv.fn


def _all_vars_formula(f: GFormula):
    for vs in (free_vars_g(f), bound_vars_g(f)):
        yield from vs.ind
        yield from vs.xi
        yield from vs.fn


def iter_vars(d: Derivation):
    yield from _all_vars_formula(d.concl)
    yield from d.eigen
    if isinstance(d.inst, (HVar, FVar)):
        yield d.inst
    elif isinstance(d.inst, GTerm):
        for vs in (tm.free_vars(d.inst), tm.bound_vars(d.inst)):
            yield from vs.ind
            yield from vs.xi
            yield from vs.fn
    elif d.inst is not None:
        yield from term_vars(d.inst)
    for p in d.premises:
        yield from iter_vars(p)


def max_index(d: Derivation) -> int:
    return max((v.index for v in iter_vars(d)), default=-1)


def max_label(d: Derivation) -> int:
    top = d.label if isinstance(d.label, int) else 0
    for lbl in d.discharge:
        top = max(top, lbl)
    for p in d.premises:
        top = max(top, max_label(p))
    return top


# ---------------------------------------------------------------------------
# Renaming and mapping over derivations


def rename_anyvar(v: AnyVar, old: AnyVar, new: AnyVar) -> AnyVar:
    if v == old:
        return new
    if isinstance(old, Var):
        match v:
            case XiVar(ty, i):
                return XiVar(l_subst(ty, old, new), i)
            case HVar(ty, param, i):
                return v if param == old else HVar(l_subst(ty, old, new), param, i)
            case FVar(ty, i):
                return FVar(l_subst(ty, old, new), i)
    return v


def rename_term(t: GTerm, old: AnyVar, new: AnyVar) -> GTerm:
    """Rename free occurrences of a variable; `new` must be fresh for t."""
    match old:
        case Var():
            return tm.subst_ind(t, old, new)
        case XiVar():
            return tm.subst_typed(t, old, new, _checked=True)
        case HVar() | FVar():
            return _rename_fn_term(t, old, new)
    raise TypeError(old)


def _rename_fn_term(t: GTerm, old, new) -> GTerm:
    def go(s):
        return _rename_fn_term(s, old, new)

    match t:
        case Delta() | XiVar() | tm.MetaVar():
            return t
        case HApp(h, a):
            return HApp(new, a) if (h == old and isinstance(new, HVar)) else t
        case FApp(f, a):
            return FApp(new if f == old else f, a)
        case AndIntro(l, r):
            return AndIntro(go(l), go(r))
        case OrIntro(side, other, a):
            return OrIntro(side, other, go(a))
        case ImpIntro(b, body):
            return ImpIntro(b, go(body))
        case ForallIntro(x, y, body):
            return ForallIntro(x, y, go(body))
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
        case tm.BotElim(out, a):
            return tm.BotElim(out, go(a))
        case ExtApp(sym, args):
            return ExtApp(sym, tuple(go(a) for a in args))
    raise TypeError(t)


def rename_formula(f: GFormula, old: AnyVar, new: AnyVar) -> GFormula:
    match f:
        case Gr(t, ty):
            nty = l_subst(ty, old, new) if isinstance(old, Var) else ty
            return Gr(rename_term(t, old, new), nty)
        case Equiv(l, r):
            return Equiv(rename_term(l, old, new), rename_term(r, old, new))
        case BotG():
            return f
        case Times(l, r):
            return Times(rename_formula(l, old, new), rename_formula(r, old, new))
        case Plus(l, r):
            return Plus(rename_formula(l, old, new), rename_formula(r, old, new))
        case Sup(l, r):
            return Sup(rename_formula(l, old, new), rename_formula(r, old, new))
        case Pi(v, b) | Eps(v, b):
            cls = type(f)
            if v == old:
                return f
            return cls(rename_anyvar(v, old, new), rename_formula(b, old, new))
    raise TypeError(f)


def _rename_inst(inst, old, new):
    if inst is None:
        return None
    if isinstance(inst, (HVar, FVar)):
        return rename_anyvar(inst, old, new)
    if isinstance(inst, GTerm):
        return rename_term(inst, old, new)
    if isinstance(old, Var):
        return subst_term(inst, old, new)
    return inst


def rename_derivation(d: Derivation, old: AnyVar, new: AnyVar) -> Derivation:
    return Derivation(
        rule=d.rule,
        concl=rename_formula(d.concl, old, new),
        premises=tuple(rename_derivation(p, old, new) for p in d.premises),
        discharge=d.discharge,
        eigen=tuple(rename_anyvar(v, old, new) for v in d.eigen),
        inst=_rename_inst(d.inst, old, new),
        label=d.label,
    )


def _subst_fn_var_type(inst, v: Var, payload):
    match inst:
        case HVar(ty, param, i):
            return inst if param == v else HVar(l_subst(ty, v, payload), param, i)
        case FVar(ty, i):
            return FVar(l_subst(ty, v, payload), i)
    return inst


def _subst_eigen(e: AnyVar, v: AnyVar, payload) -> AnyVar:
    if not isinstance(v, Var):
        return e
    match e:
        case XiVar(ty, i):
            return XiVar(l_subst(ty, v, payload), i)
        case Var():
            return e
    return _subst_fn_var_type(e, v, payload)


def subst_derivation(d: Derivation, v: AnyVar, payload) -> Derivation:
    """Substitute throughout every formula and annotation of a derivation."""
    new_inst = d.inst
    if isinstance(new_inst, (HVar, FVar)):
        if isinstance(v, Var):
            new_inst = _subst_fn_var_type(new_inst, v, payload)
    elif isinstance(new_inst, GTerm):
        match v:
            case Var():
                new_inst = tm.subst_ind(new_inst, v, payload)
            case XiVar():
                new_inst = tm.subst_typed(new_inst, v, payload)
            case HVar():
                new_inst = tm.subst_h(new_inst, v, payload, allow_enriched=True)
            case FVar():
                new_inst = tm.subst_f(new_inst, v, payload, allow_enriched=True)
    elif new_inst is not None and isinstance(v, Var):
        new_inst = subst_term(new_inst, v, payload)
    return Derivation(
        rule=d.rule,
        concl=subst_formula(d.concl, v, payload),
        premises=tuple(subst_derivation(p, v, payload) for p in d.premises),
        discharge=d.discharge,
        eigen=tuple(_subst_eigen(e, v, payload) for e in d.eigen),
        inst=new_inst,
        label=d.label,
    )


def relabel(d: Derivation, mapping: dict) -> Derivation:
    return Derivation(
        rule=d.rule,
        concl=d.concl,
        premises=tuple(relabel(p, mapping) for p in d.premises),
        discharge=tuple(mapping.get(l, l) for l in d.discharge),
        eigen=d.eigen,
        inst=d.inst,
        label=mapping.get(d.label, d.label) if d.label is not None else None,
    )


def _labels(d: Derivation) -> set:
    out = set(d.discharge)
    if d.label is not None:
        out.add(d.label)
    for p in d.premises:
        out |= _labels(p)
    return out


def relabel_fresh(d: Derivation, counter: list) -> Derivation:
    """Give every label in d a fresh value drawn from counter (a 1-cell box)."""
    mapping = {}
    for lbl in sorted(_labels(d)):
        counter[0] += 1
        mapping[lbl] = counter[0]
    return relabel(d, mapping)


def replace_assumptions(d: Derivation, repl: dict) -> Derivation:
    """Swap assume leaves with given labels for whole subderivations.

    repl maps label -> callable returning a fresh Derivation copy per
    occurrence (so duplicated insertions can be relabeled independently).
    """
    if d.rule == "assume" and d.label in repl:
        return repl[d.label]()
    return replace(d, premises=tuple(replace_assumptions(p, repl) for p in d.premises))


# ---------------------------------------------------------------------------
# Rename-apart pass: proper variables become globally distinct

_SCOPES = {
    "case-and": ((0, (1,)), (1, (1,))),
    "case-or": ((0, (1,)), (1, (2,))),
    "case-imp": ((0, (1,)),),
    "case-forall": ((0, (1,)),),
    "case-exists": ((0, (1,)), (1, (1,))),
    "PiI": ((0, (0,)),),
    "EpsE": ((0, (1,)),),
}


def _fresh_like(v: AnyVar, counter: list) -> AnyVar:
    counter[0] += 1
    match v:
        case Var(name, _):
            return Var(name, counter[0])
        case XiVar(ty, _):
            return XiVar(ty, counter[0])
        case HVar(ty, param, _):
            return HVar(ty, param, counter[0])
        case FVar(ty, _):
            return FVar(ty, counter[0])
    raise TypeError(v)


def rename_apart(d: Derivation, counter: list | None = None) -> Derivation:
    """Rename proper variables of the tree to globally fresh indices.

    Check-equivalent on checked input: same conclusion, same open
    assumptions.  A proper variable of a generalized elimination that also
    occurs (bound) in that node's conclusion is left alone: the congruence
    rules for binding symbols tie its free premise occurrences to the bound
    conclusion occurrences, and a reduction never substitutes it anyway
    because it is not free anywhere outside the discharged assumptions.
    """
    if counter is None:
        counter = [max_index(d)]
    premises = [rename_apart(p, counter) for p in d.premises]
    eigen = list(d.eigen)
    spec = _SCOPES.get(d.rule)
    if spec is not None:
        blocked = set(_all_vars_formula(d.concl)) if d.rule.startswith("case-") else set()
        for slot, scope in spec:
            for i in scope:
                if i < len(premises):
                    blocked |= _bound_in_derivation(premises[i])
        for slot, scope in spec:
            if slot >= len(eigen) or eigen[slot] in blocked:
                continue
            old = eigen[slot]
            new = _fresh_like(old, counter)
            for i in scope:
                if i < len(premises):
                    premises[i] = rename_derivation(premises[i], old, new)
            eigen = [rename_anyvar(v, old, new) if j >= slot else v for j, v in enumerate(eigen)]
            eigen[slot] = new
    return replace(d, premises=tuple(premises), eigen=tuple(eigen))


def _bound_in_derivation(d: Derivation) -> set:
    out = set()
    bv = bound_vars_g(d.concl)
    out |= bv.ind | bv.xi | bv.fn
    for p in d.premises:
        out |= _bound_in_derivation(p)
    return out


# ---------------------------------------------------------------------------
# Convention pass: absurdity eliminations conclude atoms only


def atomize_botG(d: Derivation, counter: list | None = None, lcounter: list | None = None) -> Derivation:
    if counter is None:
        counter = [max_index(d)]
    if lcounter is None:
        lcounter = [max_label(d)]
    premises = tuple(atomize_botG(p, counter, lcounter) for p in d.premises)
    d = replace(d, premises=premises)
    if d.rule != "botG" or is_atomic(d.concl):
        return d
    return _expand_botg(d.premises[0], d.concl, counter, lcounter, first=True)


def _expand_botg(pd: Derivation, a: GFormula, counter: list, lcounter: list, first: bool = False) -> Derivation:
    def source() -> Derivation:
        nonlocal first
        if first:
            first = False
            return pd
        return relabel_fresh(pd, lcounter)

    match a:
        case Gr() | Equiv() | BotG():
            return Derivation("botG", a, (source(),))
        case Times(l, r):
            return Derivation(
                "timesI", a, (_expand_botg(source(), l, counter, lcounter), _expand_botg(source(), r, counter, lcounter))
            )
        case Plus(l, _):
            return Derivation("plusI-1", a, (_expand_botg(source(), l, counter, lcounter),))
        case Sup(_, r):
            return Derivation("supI", a, (_expand_botg(source(), r, counter, lcounter),), discharge=())
        case Pi(v, b):
            w = _fresh_like(v, counter)
            body = rename_formula(b, v, w)
            return Derivation("PiI", a, (_expand_botg(source(), body, counter, lcounter),), eigen=(w,))
        case Eps(v, b):
            tau = _witness_for(v, counter)
            body = subst_formula(b, v, tau)
            return Derivation("EpsI", a, (_expand_botg(source(), body, counter, lcounter),), inst=tau)
    raise TypeError(a)


def _witness_for(v: AnyVar, counter: list):
    """A term instantiating a quantifier over v, used when expanding an
    absurdity elimination through an existential."""
    match v:
        case Var() | XiVar():
            return v
        case FVar(ty, _):
            counter[0] += 1
            return XiVar(ty, counter[0])
        case HVar(ty, param, _):
            counter[0] += 1
            return ForallElim(param, XiVar(Forall(param, ty), counter[0]))
    raise TypeError(v)


# ---------------------------------------------------------------------------
# Checking


class _Fail(Exception):
    def __init__(self, err: CheckError):
        self.err = err


def _want(cond: bool, err: CheckError):
    if not cond:
        raise _Fail(err)


def _as_gr(f: GFormula, what: str) -> Gr:
    _want(isinstance(f, Gr), SchemaMismatch(f"{what} must be a denotation atom, got {print_g(f)}"))
    return f


def _as_equiv(f: GFormula, what: str) -> Equiv:
    _want(isinstance(f, Equiv), SchemaMismatch(f"{what} must be an equivalence, got {print_g(f)}"))
    return f


def infer_instance(pattern: LFormula, x: Var, instance: LFormula) -> LTerm | None:
    """Find t with pattern[t/x] == instance, if one is syntactically forced."""
    found: list = []

    def go_t(p: LTerm, q: LTerm) -> bool:
        if p == x:
            found.append(q)
            return True
        if type(p) is not type(q):
            return False
        match p:
            case Var() | Const():
                return p == q
            case App(fn, args):
                return fn == q.fn and len(args) == len(q.args) and all(go_t(a, b) for a, b in zip(args, q.args))
        raise TypeError(p)

    def go_f(p: LFormula, q: LFormula) -> bool:
        if type(p) is not type(q):
            return False
        match p:
            case Bot():
                return True
            case Atom(pred, args):
                return pred == q.pred and len(args) == len(q.args) and all(go_t(a, b) for a, b in zip(args, q.args))
            case And(l, r) | Or(l, r) | Imp(l, r):
                return go_f(l, q.left) and go_f(r, q.right)
            case Forall(v, b) | Exists(v, b):
                if v == x:
                    return p == q
                return v == q.var and go_f(b, q.body)
        raise TypeError(p)

    if not go_f(pattern, instance):
        return None
    if not found:
        return None
    t0 = found[0]
    return t0 if all(t == t0 for t in found) else None


class Checker:
    def __init__(self, base: AtomicBase, ext=None):
        self.base = base
        self.ext = ext
        self.errors: list = []

    # opens are multisets over (label, formula) pairs

    def run(self, d: Derivation) -> CheckReport:
        self._check_labels(d)
        opens = self._node(d, ())
        flat = Counter()
        for (lbl, f), n in opens.items():
            flat[f] += n
        ok = not self.errors
        return CheckReport(ok=ok, conclusion=d.concl if ok else d.concl, open_assumptions=flat, errors=self.errors)

    def _check_labels(self, d: Derivation):
        formulas: dict = {}
        dischargers: Counter = Counter()

        def walk(n: Derivation):
            if n.rule == "assume" and n.label is not None:
                if n.label in formulas and formulas[n.label] != n.concl:
                    self.errors.append(((), DischargeError(f"label {n.label} marks two different formulas")))
                formulas[n.label] = n.concl
            for lbl in n.discharge:
                dischargers[lbl] += 1
            for p in n.premises:
                walk(p)

        walk(d)
        for lbl, cnt in dischargers.items():
            if cnt > 1:
                self.errors.append(((), DischargeError(f"label {lbl} discharged at {cnt} distinct nodes")))

    def _node(self, d: Derivation, path: tuple) -> Counter:
        prem_opens = [self._node(p, path + (i,)) for i, p in enumerate(d.premises)]
        try:
            opens = self._apply(d, prem_opens)
        except _Fail as f:
            self.errors.append((path, f.err))
            opens = Counter()
            for po in prem_opens:
                opens += po
            opens = self._drop_labels(opens, d.discharge)
        except IllFormedFormula as e:
            self.errors.append((path, IllFormed(str(e))))
            opens = Counter()
            for po in prem_opens:
                opens += po
        except tm.TermError as e:
            self.errors.append((path, IllFormed(str(e))))
            opens = Counter()
            for po in prem_opens:
                opens += po
        return opens

    @staticmethod
    def _drop_labels(opens: Counter, labels) -> Counter:
        out = Counter()
        for (lbl, f), n in opens.items():
            if lbl not in labels:
                out[(lbl, f)] = n
        return out

    def _discharge(self, d: Derivation, prem_opens, allowed: dict) -> Counter:
        """Remove discharged labels, verifying shape and scope; merge the rest.

        allowed maps premise index -> tuple of admissible assumption formulas.
        """
        labels = set(d.discharge)
        merged = Counter()
        for i, po in enumerate(prem_opens):
            shapes = allowed.get(i, ())
            for (lbl, f), n in po.items():
                if lbl in labels:
                    if f not in shapes:
                        raise _Fail(
                            DischargeError(
                                f"label {lbl}: {print_g(f)} is not dischargeable at this {d.rule} node (premise {i})"
                            )
                        )
                else:
                    merged[(lbl, f)] += n
        return merged

    def _restrict(self, rule: str, v: AnyVar, opens: Counter, concl: GFormula | None, exempt=()):
        for (lbl, f) in opens:
            if f in exempt:
                continue
            if var_free_in(v, f):
                raise _Fail(RestrictionViolated(f"proper variable {print_g_var(v)} free in open assumption {print_g(f)}", rule, print_g_var(v)))
        if concl is not None and var_free_in(v, concl):
            raise _Fail(RestrictionViolated(f"proper variable {print_g_var(v)} free in conclusion {print_g(concl)}", rule, print_g_var(v)))

    # -- rule table ---------------------------------------------------------

    def _apply(self, d: Derivation, prem_opens) -> Counter:
        handler = getattr(self, "_rule_" + d.rule.replace("-", "_"), None)
        if handler is None:
            if self.ext is not None and d.rule.startswith("cong-") and d.rule[5:] in self.ext.symbols:
                return self._rule_cong_ext(d, prem_opens)
            if self.ext is not None and d.rule.startswith("rw-") and d.rule[3:] in self.ext.symbols:
                return self._rule_rw_ext(d, prem_opens)
            raise _Fail(UnknownRuleId(f"unknown rule {d.rule!r}"))
        return handler(d, prem_opens)

    @staticmethod
    def _arity(d: Derivation, n: int):
        _want(len(d.premises) == n, SchemaMismatch(f"{d.rule} takes {n} premises, got {len(d.premises)}"))

    def _merge(self, d, prem_opens, allowed=None):
        return self._discharge(d, prem_opens, allowed or {})

    # assumptions and axioms

    def _rule_assume(self, d, prem_opens):
        self._arity(d, 0)
        return Counter({(d.label, d.concl): 1})

    def _rule_C(self, d, prem_opens):
        self._arity(d, 0)
        c = _as_gr(d.concl, "conclusion")
        _want(isinstance(c.term, Delta), SchemaMismatch("constant axiom must conclude about a delta constant"))
        name = c.term.name
        if name not in self.base.named_derivations:
            raise _Fail(UnknownDelta(f"no derivation named {name!r} in the base"))
        _want(
            self.base.named_derivations[name].conclusion == c.type,
            SchemaMismatch(f"delta {name} proves {print_l(self.base.named_derivations[name].conclusion)}, not {print_l(c.type)}"),
        )
        return Counter()

    def _rule_eq_refl(self, d, prem_opens):
        self._arity(d, 0)
        c = _as_equiv(d.concl, "conclusion")
        _want(c.left == c.right, SchemaMismatch("reflexivity requires identical sides"))
        return Counter()

    # typing introductions

    def _rule_andI(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_gr(d.premises[0].concl, "first premise")
        p2 = _as_gr(d.premises[1].concl, "second premise")
        _want(d.concl == gr(AndIntro(p1.term, p2.term)), SchemaMismatch("conclusion does not pair the premise terms"))
        return self._merge(d, prem_opens)

    def _rule_orI(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_gr(d.premises[0].concl, "premise")
        c = _as_gr(d.concl, "conclusion")
        _want(
            isinstance(c.term, OrIntro) and c.term.arg == p.term,
            SchemaMismatch("conclusion must inject the premise term into a disjunction"),
        )
        return self._merge(d, prem_opens)

    def _rule_impI(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_gr(d.premises[0].concl, "premise")
        c = _as_gr(d.concl, "conclusion")
        _want(
            isinstance(c.term, ImpIntro) and c.term.body == p.term,
            SchemaMismatch("conclusion must abstract the premise term"),
        )
        b = c.term.binder
        hypo = Gr(b, b.type)
        opens = self._merge(d, prem_opens, {0: (hypo,)})
        for (lbl, f) in opens:
            if f != hypo and b in free_vars_g(f).xi:
                raise _Fail(
                    RestrictionViolated(
                        f"{print_g_var(b)} occurs free in open assumption {print_g(f)}", "impI", print_g_var(b)
                    )
                )
        return opens

    def _rule_forallI(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_gr(d.premises[0].concl, "premise")
        c = _as_gr(d.concl, "conclusion")
        _want(
            isinstance(c.term, ForallIntro) and c.term.body == p.term,
            SchemaMismatch("conclusion must generalize the premise term"),
        )
        x = c.term.var
        opens = self._merge(d, prem_opens)
        for (lbl, f) in opens:
            if x in free_vars_g(f).ind:
                raise _Fail(
                    RestrictionViolated(f"{x} occurs free in open assumption {print_g(f)}", "forallI", str(x))
                )
        return opens

    def _rule_existsI(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_gr(d.premises[0].concl, "premise")
        c = _as_gr(d.concl, "conclusion")
        _want(
            isinstance(c.term, ExistsIntro) and c.term.arg == p.term,
            SchemaMismatch("conclusion must package the premise term as a witness"),
        )
        return self._merge(d, prem_opens)

    # generalized type eliminations

    def _discharged_formulas(self, d, prem_opens, idx) -> list:
        labels = set(d.discharge)
        return [f for (lbl, f) in prem_opens[idx] if lbl in labels]

    def _case_common(self, d, prem_opens, n_minor: int):
        self._arity(d, 1 + n_minor)
        major = _as_gr(d.premises[0].concl, "major premise")
        for i in range(1, 1 + n_minor):
            _want(
                d.premises[i].concl == d.concl,
                SchemaMismatch(f"minor premise {i} concludes {print_g(d.premises[i].concl)}, not the rule conclusion"),
            )
        return major

    def _rule_case_and(self, d, prem_opens):
        major = self._case_common(d, prem_opens, 1)
        _want(isinstance(major.type, And), SchemaMismatch("major premise must have a conjunctive type"))
        al, be = major.type.left, major.type.right
        T = major.term
        discharged = self._discharged_formulas(d, prem_opens, 1)

        def shapes(xa, xb):
            return (Equiv(T, AndIntro(xa, xb)), Gr(xa, al), Gr(xb, be))

        cand_a, cand_b = [], []
        for f in discharged:
            match f:
                case Equiv(l, AndIntro(XiVar() as va, XiVar() as vb)) if l == T and va.type == al and vb.type == be:
                    cand_a.append(va)
                    cand_b.append(vb)
                case Gr(XiVar() as v, ty):
                    if ty == al:
                        cand_a.append(v)
                    if ty == be:
                        cand_b.append(v)
        xa, xb = self._solve_two(d, discharged, shapes, cand_a, cand_b, al, be)
        opens = self._merge(d, prem_opens, {1: shapes(xa, xb)})
        self._restrict(d.rule, xa, opens, d.concl)
        self._restrict(d.rule, xb, opens, d.concl)
        return opens

    def _solve_two(self, d, discharged, shapes, cand_a, cand_b, ta, tb):
        if len(d.eigen) == 2:
            xa, xb = d.eigen
            _want(isinstance(xa, XiVar) and xa.type == ta, SchemaMismatch("first proper variable has the wrong type"))
            _want(isinstance(xb, XiVar) and xb.type == tb, SchemaMismatch("second proper variable has the wrong type"))
            self._shapes_cover(discharged, shapes(xa, xb), d.rule)
            return xa, xb
        fr_a = tm.fresh_xi(ta, [f2 for f in discharged for f2 in free_vars_g(f).xi])
        fr_b = tm.fresh_xi(tb, [f2 for f in discharged for f2 in free_vars_g(f).xi] + [fr_a])
        for xa in sorted(set(cand_a), key=lambda v: v.index) + [fr_a]:
            for xb in sorted(set(cand_b), key=lambda v: v.index) + [fr_b]:
                if xa == xb:
                    continue
                if all(f in shapes(xa, xb) for f in discharged):
                    return xa, xb
        raise _Fail(DischargeError(f"discharged assumptions do not fit the {d.rule} schema"))

    def _shapes_cover(self, discharged, shapes, rule):
        for f in discharged:
            _want(f in shapes, DischargeError(f"{print_g(f)} is not dischargeable by {rule}"))

    def _rule_case_or(self, d, prem_opens):
        major = self._case_common(d, prem_opens, 2)
        _want(isinstance(major.type, Or), SchemaMismatch("major premise must have a disjunctive type"))
        al, be = major.type.left, major.type.right
        T = major.term

        def branch(idx, side, this_ty, other_ty):
            def shapes(v):
                return (Equiv(T, OrIntro(side, other_ty, v)), Gr(v, this_ty))

            discharged = self._discharged_formulas(d, prem_opens, idx)
            cands = []
            for f in discharged:
                match f:
                    case Equiv(l, OrIntro(s, o, XiVar() as v)) if l == T and s == side and o == other_ty:
                        cands.append(v)
                    case Gr(XiVar() as v, ty) if ty == this_ty:
                        cands.append(v)
            if len(d.eigen) == 2:
                v = d.eigen[idx - 1]
                _want(isinstance(v, XiVar) and v.type == this_ty, SchemaMismatch("proper variable has the wrong type"))
                self._shapes_cover(discharged, shapes(v), d.rule)
                return v, shapes(v)
            fr = tm.fresh_xi(this_ty, [f2 for f in discharged for f2 in free_vars_g(f).xi])
            for v in sorted(set(cands), key=lambda v: v.index) + [fr]:
                if all(f in shapes(v) for f in discharged):
                    return v, shapes(v)
            raise _Fail(DischargeError(f"discharged assumptions do not fit the {d.rule} schema"))

        va, sh1 = branch(1, 1, al, be)
        vb, sh2 = branch(2, 2, be, al)
        opens = self._merge(d, prem_opens, {1: sh1, 2: sh2})
        left_opens = self._drop_labels(prem_opens[1], d.discharge)
        right_opens = self._drop_labels(prem_opens[2], d.discharge)
        self._restrict(d.rule, va, left_opens, d.concl)
        self._restrict(d.rule, vb, right_opens, d.concl)
        return opens

    def _rule_case_imp(self, d, prem_opens):
        major = self._case_common(d, prem_opens, 1)
        _want(isinstance(major.type, Imp), SchemaMismatch("major premise must have an implicational type"))
        al, be = major.type.left, major.type.right
        T = major.term
        discharged = self._discharged_formulas(d, prem_opens, 1)

        def shape_eq(fv, f):
            match f:
                case Equiv(l, ImpIntro(b, FApp(fv2, XiVar() as b2))) if l == T and b == b2 and fv2 == fv and b.type == al:
                    return True
            return False

        def shape_pi(fv, f):
            match f:
                case Pi(XiVar() as b, Sup(Gr(XiVar() as b1, ty1), Gr(FApp(fv2, XiVar() as b2), ty2))):
                    return b == b1 == b2 and fv2 == fv and ty1 == al and ty2 == be and b.type == al
            return False

        cands = []
        for f in discharged:
            match f:
                case Equiv(l, ImpIntro(_, FApp(fv, _))) if l == T and fv.type == be:
                    cands.append(fv)
                case Pi(XiVar(), Sup(Gr(XiVar(), _), Gr(FApp(fv, _), _))) if fv.type == be:
                    cands.append(fv)
        if len(d.eigen) == 1:
            cands = [d.eigen[0]]
            _want(isinstance(cands[0], FVar) and cands[0].type == be, SchemaMismatch("proper variable has the wrong type"))
        else:
            cands = sorted(set(cands), key=lambda v: v.index) or [tm.fresh_fvar(be, [v for f in discharged for v in free_vars_g(f).fn])]
        for fv in cands:
            if all(shape_eq(fv, f) or shape_pi(fv, f) for f in discharged):
                opens = self._merge(d, prem_opens, {1: tuple(f for f in discharged)})
                self._restrict(d.rule, fv, opens, d.concl)
                return opens
        raise _Fail(DischargeError(f"discharged assumptions do not fit the {d.rule} schema"))

    def _rule_case_forall(self, d, prem_opens):
        major = self._case_common(d, prem_opens, 1)
        _want(isinstance(major.type, Forall), SchemaMismatch("major premise must have a universal type"))
        T = major.term
        discharged = self._discharged_formulas(d, prem_opens, 1)

        def shape_eq(hv, f):
            match f:
                case Equiv(l, ForallIntro() as fi) if l == T:
                    match fi.body:
                        case HApp(hv2, Var() as y) if hv2 == hv and y == fi.var and hv.param == y:
                            return type_of(fi) == major.type
            return False

        def shape_pi(hv, f):
            match f:
                case Pi(Var() as y, Gr(HApp(hv2, Var() as y2), ty)):
                    return hv2 == hv and y == y2 and ty == l_subst(hv.type, hv.param, y)
            return False

        cands = []
        for f in discharged:
            match f:
                case Equiv(l, ForallIntro() as fi) if l == T:
                    match fi.body:
                        case HApp(hv, _):
                            cands.append(hv)
                case Pi(Var(), Gr(HApp(hv, _), _)):
                    cands.append(hv)
        if len(d.eigen) == 1:
            cands = [d.eigen[0]]
            _want(isinstance(cands[0], HVar), SchemaMismatch("proper variable must be a parametric functional variable"))
        else:
            cands = sorted(set(cands), key=lambda v: v.index) or [
                HVar(l_subst(major.type.body, major.type.var, major.type.var), major.type.var, max_index(d) + 1)
            ]
        for hv in cands:
            if all(shape_eq(hv, f) or shape_pi(hv, f) for f in discharged):
                opens = self._merge(d, prem_opens, {1: tuple(discharged)})
                self._restrict(d.rule, hv, opens, d.concl)
                return opens
        raise _Fail(DischargeError(f"discharged assumptions do not fit the {d.rule} schema"))

    def _rule_case_exists(self, d, prem_opens):
        major = self._case_common(d, prem_opens, 1)
        _want(isinstance(major.type, Exists), SchemaMismatch("major premise must have an existential type"))
        T = major.term
        x0, a0 = major.type.var, major.type.body
        discharged = self._discharged_formulas(d, prem_opens, 1)

        def shapes(y, xv):
            return (Equiv(T, ExistsIntro(major.type, y, xv)), Gr(xv, xv.type))

        cand: list = []
        for f in discharged:
            match f:
                case Equiv(l, ExistsIntro(out, Var() as y, XiVar() as xv)) if l == T and out == major.type:
                    cand.append((y, xv))
                case Gr(XiVar() as xv, ty):
                    y = None
                    for (yy, _) in list(cand):
                        if ty == l_subst(a0, x0, yy):
                            y = yy
                    if y is None:
                        t = infer_instance(a0, x0, ty)
                        if isinstance(t, Var):
                            y = t
                    if y is not None:
                        cand.append((y, xv))
        if len(d.eigen) == 2:
            y, xv = d.eigen
            _want(isinstance(y, Var) and isinstance(xv, XiVar), SchemaMismatch("proper variables must be (individual, typed)"))
            _want(xv.type == l_subst(a0, x0, y), SchemaMismatch("typed proper variable has the wrong type"))
            self._shapes_cover(discharged, shapes(y, xv), d.rule)
        else:
            picked = None
            for (y, xv) in cand:
                if xv.type == l_subst(a0, x0, y) and all(f in shapes(y, xv) for f in discharged):
                    picked = (y, xv)
                    break
            if picked is None:
                if discharged:
                    raise _Fail(DischargeError(f"discharged assumptions do not fit the {d.rule} schema"))
                y = tm.fresh_ind(x0.name, free_vars_g(d.concl).ind)
                xv = tm.fresh_xi(l_subst(a0, x0, y), free_vars_g(d.concl).xi)
                picked = (y, xv)
            y, xv = picked
        opens = self._merge(d, prem_opens, {1: shapes(y, xv)})
        minor_opens = self._drop_labels(prem_opens[1], d.discharge)
        self._restrict(d.rule, y, minor_opens, d.concl)
        self._restrict(d.rule, xv, minor_opens, d.concl)
        return opens

    def _rule_bot_type(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_gr(d.premises[0].concl, "premise")
        _want(p.type == Bot(), SchemaMismatch("premise must type a term by the absurdity"))
        _want(d.concl == BOTG, SchemaMismatch("conclusion must be the absurdity of the enriched language"))
        return self._merge(d, prem_opens)

    # equivalence rules

    def _rule_eq_sym(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        _want(d.concl == Equiv(p.right, p.left), SchemaMismatch("conclusion must flip the premise"))
        return self._merge(d, prem_opens)

    def _rule_eq_trans(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_equiv(d.premises[0].concl, "first premise")
        p2 = _as_equiv(d.premises[1].concl, "second premise")
        _want(p1.right == p2.left, SchemaMismatch("middle terms differ"))
        _want(d.concl == Equiv(p1.left, p2.right), SchemaMismatch("conclusion must chain the premises"))
        return self._merge(d, prem_opens)

    def _rule_eq_pres(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_equiv(d.premises[0].concl, "first premise")
        p2 = _as_gr(d.premises[1].concl, "second premise")
        _want(p1.right == p2.term, SchemaMismatch("typed premise must concern the right side of the equivalence"))
        _want(d.concl == Gr(p1.left, p2.type), SchemaMismatch("conclusion must transfer the type to the left side"))
        return self._merge(d, prem_opens)

    def _rule_cong_and_1(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_equiv(d.premises[0].concl, "first premise")
        p2 = _as_equiv(d.premises[1].concl, "second premise")
        want = Equiv(AndIntro(p1.left, p2.left), AndIntro(p1.right, p2.right))
        _want(d.concl == want, SchemaMismatch("conclusion does not pair the premises"))
        return self._merge(d, prem_opens)

    def _cong_and_2(self, d, prem_opens, i):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match (p.left, p.right):
            case (AndIntro() as l, AndIntro() as r):
                want = Equiv((l.left, l.right)[i - 1], (r.left, r.right)[i - 1])
                _want(d.concl == want, SchemaMismatch("conclusion must project the paired sides"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("premise must equate two pairings"))

    def _rule_cong_and_2_1(self, d, prem_opens):
        return self._cong_and_2(d, prem_opens, 1)

    def _rule_cong_and_2_2(self, d, prem_opens):
        return self._cong_and_2(d, prem_opens, 2)

    def _cong_and_3(self, d, prem_opens, i):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        want = Equiv(AndElim(i, p.left), AndElim(i, p.right))
        _want(d.concl == want, SchemaMismatch("conclusion must apply the projection to both sides"))
        return self._merge(d, prem_opens)

    def _rule_cong_and_3_1(self, d, prem_opens):
        return self._cong_and_3(d, prem_opens, 1)

    def _rule_cong_and_3_2(self, d, prem_opens):
        return self._cong_and_3(d, prem_opens, 2)

    def _rule_cong_or_1(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match d.concl:
            case Equiv(OrIntro(s1, o1, l), OrIntro(s2, o2, r)) if s1 == s2 and o1 == o2 and l == p.left and r == p.right:
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must inject both sides identically"))

    def _rule_cong_or_2(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match (p.left, p.right):
            case (OrIntro(s1, o1, l), OrIntro(s2, o2, r)) if s1 == s2 and o1 == o2:
                _want(d.concl == Equiv(l, r), SchemaMismatch("conclusion must strip the injections"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("premise must equate two identical injections"))

    def _rule_cong_or_3(self, d, prem_opens):
        self._arity(d, 3)
        ps = [_as_equiv(p.concl, "premise") for p in d.premises]
        match d.concl:
            case Equiv(OrElim(b1, b2, s1, l1, r1), OrElim(c1, c2, s2, l2, r2)) if b1 == c1 and b2 == c2:
                want = (s1, l1, r1, s2, l2, r2) == (ps[0].left, ps[1].left, ps[2].left, ps[0].right, ps[1].right, ps[2].right)
                _want(want, SchemaMismatch("conclusion does not follow the premises"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must equate two case analyses with shared binders"))

    def _rule_cong_imp_1(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match d.concl:
            case Equiv(ImpIntro(b1, l), ImpIntro(b2, r)) if b1 == b2 and l == p.left and r == p.right:
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must abstract both sides with one binder"))

    def _rule_cong_imp_2(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match (p.left, p.right):
            case (ImpIntro(b1, l), ImpIntro(b2, r)) if b1 == b2:
                _want(d.concl == Equiv(l, r), SchemaMismatch("conclusion must strip the abstractions"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("premise must equate two abstractions with one binder"))

    def _rule_cong_imp_3(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_equiv(d.premises[0].concl, "first premise")
        p2 = _as_equiv(d.premises[1].concl, "second premise")
        want = Equiv(ImpElim(p1.left, p2.left), ImpElim(p1.right, p2.right))
        _want(d.concl == want, SchemaMismatch("conclusion must apply both pairs"))
        return self._merge(d, prem_opens)

    def _rule_cong_forall_1(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match d.concl:
            case Equiv(ForallIntro(x1, y1, l), ForallIntro(x2, y2, r)) if (x1, y1) == (x2, y2) and l == p.left and r == p.right:
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must generalize both sides with one binder"))

    def _rule_cong_forall_2(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match (p.left, p.right):
            case (ForallIntro(x1, y1, l), ForallIntro(x2, y2, r)) if (x1, y1) == (x2, y2):
                _want(d.concl == Equiv(l, r), SchemaMismatch("conclusion must strip the generalizations"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("premise must equate two generalizations with one binder"))

    def _rule_cong_forall_3(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match d.concl:
            case Equiv(ForallElim(t1, l), ForallElim(t2, r)) if t1 == t2 and l == p.left and r == p.right:
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must instantiate both sides identically"))

    def _rule_cong_exists_1(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match d.concl:
            case Equiv(ExistsIntro(o1, w1, l), ExistsIntro(o2, w2, r)) if (o1, w1) == (o2, w2) and l == p.left and r == p.right:
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must package both sides identically"))

    def _rule_cong_exists_2(self, d, prem_opens):
        self._arity(d, 1)
        p = _as_equiv(d.premises[0].concl, "premise")
        match (p.left, p.right):
            case (ExistsIntro(o1, w1, l), ExistsIntro(o2, w2, r)) if (o1, w1) == (o2, w2):
                _want(d.concl == Equiv(l, r), SchemaMismatch("conclusion must strip the packagings"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("premise must equate two identical packagings"))

    def _rule_cong_exists_3(self, d, prem_opens):
        self._arity(d, 2)
        p1 = _as_equiv(d.premises[0].concl, "first premise")
        p2 = _as_equiv(d.premises[1].concl, "second premise")
        match d.concl:
            case Equiv(ExistsElim(x1, b1, s1, m1), ExistsElim(x2, b2, s2, m2)) if (x1, b1) == (x2, b2):
                want = (s1, m1, s2, m2) == (p1.left, p2.left, p1.right, p2.right)
                _want(want, SchemaMismatch("conclusion does not follow the premises"))
                return self._merge(d, prem_opens)
        raise _Fail(SchemaMismatch("conclusion must equate two eliminations with shared binders"))

    def _rule_cong_ext(self, d, prem_opens):
        name = d.rule[5:]
        sym = self.ext.symbols[name]
        self._arity(d, len(sym.domain))
        ps = [_as_equiv(p.concl, "premise") for p in d.premises]
        want = Equiv(ExtApp(sym, tuple(p.left for p in ps)), ExtApp(sym, tuple(p.right for p in ps)))
        _want(d.concl == want, SchemaMismatch("conclusion does not follow the congruence schema"))
        return self._merge(d, prem_opens)

    # computation equations

    def _rw(self, d, ok: bool):
        self._arity(d, 0)
        _want(ok, SchemaMismatch(f"conclusion is not an instance of {d.rule}"))
        return Counter()

    def _rule_rw_and_1(self, d, prem_opens):
        return self._rw_and(d, 1)

    def _rule_rw_and_2(self, d, prem_opens):
        return self._rw_and(d, 2)

    def _rw_and(self, d, i):
        c = _as_equiv(d.concl, "conclusion")
        match c.left:
            case AndElim(j, AndIntro(l, r)) if j == i:
                return self._rw(d, c.right == (l, r)[i - 1])
        return self._rw(d, False)

    def _rule_rw_or_1(self, d, prem_opens):
        return self._rw_or(d, 1)

    def _rule_rw_or_2(self, d, prem_opens):
        return self._rw_or(d, 2)

    def _rw_or(self, d, i):
        c = _as_equiv(d.concl, "conclusion")
        match c.left:
            case OrElim(b1, b2, OrIntro(side, _, t), u1, u2) if side == i:
                want = tm.subst_typed(u1 if i == 1 else u2, b1 if i == 1 else b2, t)
                return self._rw(d, c.right == want)
        return self._rw(d, False)

    def _rule_rw_imp(self, d, prem_opens):
        c = _as_equiv(d.concl, "conclusion")
        match c.left:
            case ImpElim(ImpIntro(b, body), u):
                return self._rw(d, c.right == tm.subst_typed(body, b, u))
        return self._rw(d, False)

    def _rule_rw_forall(self, d, prem_opens):
        c = _as_equiv(d.concl, "conclusion")
        match c.left:
            case ForallElim(t, ForallIntro(x, _, body)):
                return self._rw(d, c.right == tm.subst_ind(body, x, t))
        return self._rw(d, False)

    def _rule_rw_exists(self, d, prem_opens):
        c = _as_equiv(d.concl, "conclusion")
        match c.left:
            case ExistsElim(y, b, ExistsIntro(_, wit, t), body):
                step = tm.subst_ind(body, y, wit)
                nb = XiVar(l_subst(b.type, y, wit), b.index)
                return self._rw(d, c.right == tm.subst_typed(step, nb, t))
        return self._rw(d, False)

    def _rule_rw_ext(self, d, prem_opens):
        name = d.rule[3:]
        c = _as_equiv(d.concl, "conclusion")
        for rule in self.ext.equations.get(name, ()):
            env = match_pattern(rule.lhs, c.left)
            if env is not None and instantiate(rule.rhs, env) == c.right:
                return Counter()
        raise _Fail(SchemaMismatch(f"conclusion is not an instance of any registered equation for {name}"))

    # logical rules

    def _rule_botG(self, d, prem_opens):
        self._arity(d, 1)
        _want(d.premises[0].concl == BOTG, SchemaMismatch("premise must be the absurdity"))
        return self._merge(d, prem_opens)

    def _rule_timesI(self, d, prem_opens):
        self._arity(d, 2)
        want = Times(d.premises[0].concl, d.premises[1].concl)
        _want(d.concl == want, SchemaMismatch("conclusion must conjoin the premises"))
        return self._merge(d, prem_opens)

    def _rule_timesE_1(self, d, prem_opens):
        return self._timesE(d, prem_opens, 1)

    def _rule_timesE_2(self, d, prem_opens):
        return self._timesE(d, prem_opens, 2)

    def _timesE(self, d, prem_opens, i):
        self._arity(d, 1)
        p = d.premises[0].concl
        _want(isinstance(p, Times), SchemaMismatch("premise must be a conjunction"))
        _want(d.concl == (p.left, p.right)[i - 1], SchemaMismatch("conclusion must be the selected component"))
        return self._merge(d, prem_opens)

    def _rule_plusI_1(self, d, prem_opens):
        self._arity(d, 1)
        _want(isinstance(d.concl, Plus) and d.concl.left == d.premises[0].concl, SchemaMismatch("conclusion must inject the premise on the left"))
        return self._merge(d, prem_opens)

    def _rule_plusI_2(self, d, prem_opens):
        self._arity(d, 1)
        _want(isinstance(d.concl, Plus) and d.concl.right == d.premises[0].concl, SchemaMismatch("conclusion must inject the premise on the right"))
        return self._merge(d, prem_opens)

    def _rule_plusE(self, d, prem_opens):
        self._arity(d, 3)
        major = d.premises[0].concl
        _want(isinstance(major, Plus), SchemaMismatch("major premise must be a disjunction"))
        _want(
            d.premises[1].concl == d.concl and d.premises[2].concl == d.concl,
            SchemaMismatch("both branches must conclude the rule conclusion"),
        )
        return self._merge(d, prem_opens, {1: (major.left,), 2: (major.right,)})

    def _rule_supI(self, d, prem_opens):
        self._arity(d, 1)
        _want(isinstance(d.concl, Sup) and d.concl.right == d.premises[0].concl, SchemaMismatch("conclusion must abstract the premise"))
        return self._merge(d, prem_opens, {0: (d.concl.left,)})

    def _rule_supE(self, d, prem_opens):
        self._arity(d, 2)
        major = d.premises[0].concl
        _want(isinstance(major, Sup), SchemaMismatch("major premise must be an implication"))
        _want(d.premises[1].concl == major.left, SchemaMismatch("minor premise must match the antecedent"))
        _want(d.concl == major.right, SchemaMismatch("conclusion must be the consequent"))
        return self._merge(d, prem_opens)

    def _rule_PiI(self, d, prem_opens):
        self._arity(d, 1)
        _want(isinstance(d.concl, Pi), SchemaMismatch("conclusion must be universally quantified"))
        _want(len(d.eigen) == 1, SchemaMismatch("universal introduction needs its proper variable"))
        nu = d.eigen[0]
        mu = d.concl.var
        _want(_same_kind(nu, mu), SchemaMismatch("bound variable and proper variable have different kinds"))
        if mu == nu:
            _want(d.concl.body == d.premises[0].concl, SchemaMismatch("body must be the premise"))
        else:
            _want(not var_free_in(mu, d.premises[0].concl), SchemaMismatch("bound variable already free in the premise"))
            _want(
                d.concl.body == rename_formula(d.premises[0].concl, nu, mu),
                SchemaMismatch("body must be the premise with the proper variable renamed"),
            )
        opens = self._merge(d, prem_opens)
        for (lbl, f) in opens:
            if var_free_in(nu, f):
                raise _Fail(
                    RestrictionViolated(f"{print_g_var(nu)} occurs free in open assumption {print_g(f)}", "PiI", print_g_var(nu))
                )
        return opens

    def _check_inst(self, nu: AnyVar, tau):
        # A bare functional variable may instantiate a quantifier of its own
        # kind (a renaming instantiation); otherwise the payload is a term of
        # the plain fragment with the type the quantifier demands.
        if isinstance(tau, (HVar, FVar)):
            _want(_same_kind(nu, tau), BadInstantiation("variable payload has the wrong kind or type"))
            return
        match nu:
            case Var():
                _want(not isinstance(tau, GTerm), BadInstantiation("individual variables take background terms"))
            case XiVar(ty, _) | FVar(ty, _):
                _want(isinstance(tau, GTerm), BadInstantiation("typed and functional variables take ground terms"))
                _want(type_of(tau) == ty, BadInstantiation("instantiating term has the wrong type"))
                _want(is_gen(tau), BadInstantiation("instantiating term must belong to the plain fragment"))
            case HVar(ty, param, _):
                _want(isinstance(tau, GTerm), BadInstantiation("functional variables take ground terms"))
                _want(type_of(tau) == ty, BadInstantiation("instantiating term has the wrong type"))
                _want(is_gen(tau), BadInstantiation("instantiating term must belong to the plain fragment"))
                for xiv in tm.free_vars(tau).xi:
                    _want(
                        param not in free_vars_l(xiv.type),
                        BadInstantiation(f"{param} occurs free in the type of {print_g_var(xiv)}"),
                    )

    def _instance_of(self, body: GFormula, nu: AnyVar, tau) -> GFormula:
        if isinstance(tau, (HVar, FVar)):
            if tau == nu:
                return body
            _want(not var_free_in(tau, body), BadInstantiation("renaming payload already occurs in the body"))
            return rename_formula(body, nu, tau)
        return subst_formula(body, nu, tau)

    def _rule_PiE(self, d, prem_opens):
        self._arity(d, 1)
        p = d.premises[0].concl
        _want(isinstance(p, Pi), SchemaMismatch("premise must be universally quantified"))
        _want(d.inst is not None, BadInstantiation("instantiation rule needs its term"))
        self._check_inst(p.var, d.inst)
        if isinstance(p.var, Var):
            _want(free_for_formula(d.inst, p.var, p.body), BadInstantiation("instantiating term is not free for the variable"))
        _want(d.concl == self._instance_of(p.body, p.var, d.inst), SchemaMismatch("conclusion must be the instance of the body"))
        return self._merge(d, prem_opens)

    def _rule_EpsI(self, d, prem_opens):
        self._arity(d, 1)
        _want(isinstance(d.concl, Eps), SchemaMismatch("conclusion must be existentially quantified"))
        _want(d.inst is not None, BadInstantiation("instantiation rule needs its term"))
        nu = d.concl.var
        self._check_inst(nu, d.inst)
        if isinstance(nu, Var):
            _want(free_for_formula(d.inst, nu, d.concl.body), BadInstantiation("instantiating term is not free for the variable"))
        _want(
            d.premises[0].concl == self._instance_of(d.concl.body, nu, d.inst),
            SchemaMismatch("premise must be the instance of the body"),
        )
        return self._merge(d, prem_opens)

    def _rule_EpsE(self, d, prem_opens):
        self._arity(d, 2)
        major = d.premises[0].concl
        _want(isinstance(major, Eps), SchemaMismatch("major premise must be existentially quantified"))
        _want(d.premises[1].concl == d.concl, SchemaMismatch("minor premise must conclude the rule conclusion"))
        _want(len(d.eigen) == 1, SchemaMismatch("existential elimination needs its proper variable"))
        mu = d.eigen[0]
        nu = major.var
        _want(_same_kind(mu, nu), SchemaMismatch("proper variable and bound variable have different kinds"))
        if mu == nu:
            hypo = major.body
        else:
            _want(not var_free_in(mu, major.body), SchemaMismatch("proper variable already free in the quantified body"))
            hypo = rename_formula(major.body, nu, mu)
        opens = self._merge(d, prem_opens, {1: (hypo,)})
        minor_opens = self._drop_labels(prem_opens[1], d.discharge)
        self._restrict(d.rule, mu, minor_opens, d.concl)
        return opens


def _same_kind(a: AnyVar, b: AnyVar) -> bool:
    kinds = {Var: 0, XiVar: 1, HVar: 2, FVar: 3}
    if kinds[type(a)] != kinds[type(b)]:
        return False
    if isinstance(a, (XiVar, FVar)):
        return a.type == b.type
    if isinstance(a, HVar):
        return a.type == b.type and a.param == b.param
    return True


def print_g_var(v) -> str:
    if isinstance(v, Var):
        return str(v)
    if isinstance(v, XiVar):
        return f"xi[{print_l(v.type)}]#{v.index}"
    if isinstance(v, HVar):
        return f"h[{print_l(v.type)};{v.param}]#{v.index}"
    if isinstance(v, FVar):
        return f"f[{print_l(v.type)}]#{v.index}"
    raise TypeError(v)


def check(d: Derivation, base: AtomicBase, ext=None) -> CheckReport:
    """Validate a derivation against the rule catalog; never raises."""
    return Checker(base, ext).run(d)


def open_assumptions(d: Derivation) -> Counter:
    """Open-assumption multiset, computable without a full check."""

    def go(n: Derivation) -> Counter:
        if n.rule == "assume":
            return Counter({(n.label, n.concl): 1})
        out = Counter()
        for p in n.premises:
            out += go(p)
        if n.discharge:
            out = Checker._drop_labels(out, n.discharge)
        return out

    flat = Counter()
    for (lbl, f), cnt in go(d).items():
        flat[f] += cnt
    return flat


# ---------------------------------------------------------------------------
# Alpha-equivalence of derivations (used by golden tests and the normalizer)


class _AlphaEnv:
    def __init__(self):
        self.vars: dict = {}
        self.labels: dict = {}
        self.label_values: set = set()

    def push(self, a, b):
        old = self.vars.get(a, _MISSING)
        self.vars[a] = b
        return (a, old)

    def pop(self, token):
        a, old = token
        if old is _MISSING:
            del self.vars[a]
        else:
            self.vars[a] = old

    def map_label(self, a, b) -> bool:
        if a is None or b is None:
            return a is None and b is None
        if a in self.labels:
            return self.labels[a] == b
        if b in self.label_values:
            return False
        self.labels[a] = b
        self.label_values.add(b)
        return True


_MISSING = object()


def _conv_type(ty: LFormula, env: _AlphaEnv) -> LFormula:
    for a, b in env.vars.items():
        if isinstance(a, Var) and isinstance(b, Var):
            ty = l_subst(ty, a, b)
    return ty


def _conv_var(v: AnyVar, env: _AlphaEnv) -> AnyVar:
    if v in env.vars:
        return env.vars[v]
    match v:
        case Var():
            return v
        case XiVar(ty, i):
            w = XiVar(_conv_type(ty, env), i)
            return env.vars.get(w, env.vars.get(v, w))
        case HVar(ty, param, i):
            return HVar(_conv_type(ty, env), param, i)
        case FVar(ty, i):
            return FVar(_conv_type(ty, env), i)
    raise TypeError(v)


def _alpha_term(t1: GTerm, t2: GTerm, env: _AlphaEnv) -> bool:
    if type(t1) is not type(t2):
        return False
    match t1:
        case Delta():
            return t1 == t2
        case XiVar() | HVar() | FVar():
            return _conv_var(t1, env) == t2
        case HApp(h, a):
            return _conv_var(h, env) == t2.var and _conv_lterm(a, env) == t2.arg
        case FApp(f, a):
            return _conv_var(f, env) == t2.var and _alpha_term(a, t2.arg, env)
        case AndIntro(l, r):
            return _alpha_term(l, t2.left, env) and _alpha_term(r, t2.right, env)
        case OrIntro(side, other, a):
            return side == t2.side and _conv_type(other, env) == t2.other and _alpha_term(a, t2.arg, env)
        case ImpIntro(b, body):
            tok = env.push(b, t2.binder)
            try:
                return _conv_var(b, env) == t2.binder and _alpha_term(body, t2.body, env)
            finally:
                env.pop(tok)
        case ForallIntro(x, y, body):
            tok = env.push(x, t2.var)
            try:
                ok = _alpha_term(body, t2.body, env)
            finally:
                env.pop(tok)
            return ok and (y == x and t2.out_var == t2.var or y == t2.out_var)
        case ExistsIntro(out, wit, a):
            return _conv_type(out, env) == t2.out and _conv_lterm(wit, env) == t2.witness and _alpha_term(a, t2.arg, env)
        case AndElim(side, a):
            return side == t2.side and _alpha_term(a, t2.arg, env)
        case OrElim(b1, b2, s, l, r):
            if not _alpha_term(s, t2.scrutinee, env):
                return False
            tok1 = env.push(b1, t2.bind1)
            try:
                okl = _conv_var(b1, env) == t2.bind1 and _alpha_term(l, t2.left, env)
            finally:
                env.pop(tok1)
            tok2 = env.push(b2, t2.bind2)
            try:
                okr = _conv_var(b2, env) == t2.bind2 and _alpha_term(r, t2.right, env)
            finally:
                env.pop(tok2)
            return okl and okr
        case ImpElim(fn, a):
            return _alpha_term(fn, t2.fn, env) and _alpha_term(a, t2.arg, env)
        case ForallElim(inst, a):
            return _conv_lterm(inst, env) == t2.instance and _alpha_term(a, t2.arg, env)
        case ExistsElim(y, b, s, body):
            if not _alpha_term(s, t2.scrutinee, env):
                return False
            tok1 = env.push(y, t2.var)
            tok2 = env.push(b, t2.binder)
            try:
                return _conv_var(b, env) == t2.binder and _alpha_term(body, t2.body, env)
            finally:
                env.pop(tok2)
                env.pop(tok1)
        case tm.BotElim(out, a):
            return _conv_type(out, env) == t2.out and _alpha_term(a, t2.arg, env)
        case ExtApp(sym, args):
            return sym == t2.sym and all(_alpha_term(a, b, env) for a, b in zip(args, t2.args))
        case tm.MetaVar():
            return t1 == t2
    raise TypeError(t1)


def _conv_lterm(t: LTerm, env: _AlphaEnv) -> LTerm:
    for a, b in env.vars.items():
        if isinstance(a, Var) and isinstance(b, Var):
            t = subst_term(t, a, b)
    return t


def _alpha_formula(f1: GFormula, f2: GFormula, env: _AlphaEnv) -> bool:
    if type(f1) is not type(f2):
        return False
    match f1:
        case Gr(t, ty):
            return _conv_type(ty, env) == f2.type and _alpha_term(t, f2.term, env)
        case Equiv(l, r):
            return _alpha_term(l, f2.left, env) and _alpha_term(r, f2.right, env)
        case BotG():
            return True
        case Times(l, r) | Plus(l, r) | Sup(l, r):
            return _alpha_formula(l, f2.left, env) and _alpha_formula(r, f2.right, env)
        case Pi(v, b) | Eps(v, b):
            tok = env.push(v, f2.var)
            try:
                return _conv_var(v, env) == f2.var and _alpha_formula(b, f2.body, env)
            finally:
                env.pop(tok)
    raise TypeError(f1)


def alpha_eq_formula(f1: GFormula, f2: GFormula) -> bool:
    return _alpha_formula(f1, f2, _AlphaEnv())


_ALPHA_BINDING = {
    "case-and": lambda d: [(v, (1,)) for v in d.eigen],
    "case-or": lambda d: list(zip(d.eigen, ((1,), (2,)))),
    "case-imp": lambda d: [(v, (1,)) for v in d.eigen],
    "case-forall": lambda d: [(v, (1,)) for v in d.eigen],
    "case-exists": lambda d: [(v, (1,)) for v in d.eigen],
    "PiI": lambda d: [(v, (0,)) for v in d.eigen],
    "EpsE": lambda d: [(v, (1,)) for v in d.eigen],
    "forallI": lambda d: [(v, (0,)) for v in d.eigen] if d.eigen else ([(d.concl.term.var, (0,))] if isinstance(d.concl, Gr) and isinstance(d.concl.term, ForallIntro) else []),
    "impI": lambda d: [(d.concl.term.binder, (0,))] if isinstance(d.concl, Gr) and isinstance(d.concl.term, ImpIntro) else [],
}


def _alpha_deriv(d1: Derivation, d2: Derivation, env: _AlphaEnv) -> bool:
    if d1.rule != d2.rule or len(d1.premises) != len(d2.premises):
        return False
    if not env.map_label(d1.label, d2.label):
        return False
    if len(d1.discharge) != len(d2.discharge):
        return False
    for a, b in zip(sorted(d1.discharge), sorted(d2.discharge)):
        if not env.map_label(a, b):
            return False
    if not _alpha_formula(d1.concl, d2.concl, env):
        return False
    if (d1.inst is None) != (d2.inst is None):
        return False
    if d1.inst is not None:
        if isinstance(d1.inst, (HVar, FVar)):
            if _conv_var(d1.inst, env) != d2.inst:
                return False
        elif isinstance(d1.inst, GTerm):
            if not (isinstance(d2.inst, GTerm) and _alpha_term(d1.inst, d2.inst, env)):
                return False
        elif _conv_lterm(d1.inst, env) != d2.inst:
            return False
    binds1 = _ALPHA_BINDING.get(d1.rule, lambda d: [])(d1)
    binds2 = _ALPHA_BINDING.get(d2.rule, lambda d: [])(d2)
    if len(binds1) != len(binds2):
        return False
    for i, (p1, p2) in enumerate(zip(d1.premises, d2.premises)):
        in_scope = [((a, sc), (b, _)) for (a, sc), (b, _) in zip(binds1, binds2) if i in sc]
        tokens = [env.push(a, b) for ((a, _), (b, _)) in in_scope]
        try:
            if not _alpha_deriv(p1, p2, env):
                return False
        finally:
            for t in reversed(tokens):
                env.pop(t)
    return True


def alpha_eq(d1: Derivation, d2: Derivation) -> bool:
    """Equality of derivations up to renaming of proper variables, rule-level
    binders and discharge labels."""
    return _alpha_deriv(d1, d2, _AlphaEnv())
