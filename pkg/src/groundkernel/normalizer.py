"""Cut elimination: reductions, permutations and the normalization loop.

A typing maximal formula (a type introduction feeding the matching
generalized elimination) reduces by replacing the elimination's
dischargeable assumptions: the equation assumption becomes a reflexivity
axiom, the typing assumptions become the introduction's premise
derivations, and the proper variables are substituted away.  Logical
maximal formulas reduce by the usual detour removals.  A segment longer
than one permutes the final elimination above the pass-through node.

Every step is followed by a hygiene pass and a full re-check, and the
degree is verified to decrease strictly; the loop terminates by
well-foundedness of the lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .formulas import Eps, Equiv, GFormula, Gr, Pi, Sup, Times, subst_formula
from .kernel import (
    CheckReport,
    Derivation,
    assume,
    check,
    max_index,
    max_label,
    open_assumptions,
    relabel,
    relabel_fresh,
    rename_apart,
    rename_derivation,
    rename_formula,
    subst_derivation,
    atomize_botG,
)
from .lang import l_subst
from .measures import CutSegment, Degree, Measure, degree, find_cut_segments, mu, node_at
from . import terms as tm
from .terms import FApp, FVar, GTerm, HApp, HVar, XiVar


class NormalizeError(Exception):
    pass


class NotTMF(NormalizeError):
    pass


class NotLMF(NormalizeError):
    pass


class NotPermutable(NormalizeError):
    pass


class SegmentStale(NormalizeError):
    pass


class AlreadyNormal(NormalizeError):
    pass


class InternalMeasureViolation(NormalizeError):
    pass


@dataclass(frozen=True)
class Step:
    kind: str  # "tmf-reduce" | "lmf-reduce" | "permute"
    segment: CutSegment
    degree_before: Degree
    degree_after: Degree

    def as_sexp(self):
        return [
            "step",
            self.kind,
            ["segment", ["length", self.segment.length], ["formula", _fsexp(self.segment.formula)]],
            ["degree-before", self.degree_before.as_sexp()],
            ["degree-after", self.degree_after.as_sexp()],
        ]


def _fsexp(f: GFormula):
    from .formulas import gformula_to_sexp

    return gformula_to_sexp(f)


# ---------------------------------------------------------------------------
# Tree surgery helpers


def _replace_at(d: Derivation, path: tuple, new: Derivation) -> Derivation:
    if not path:
        return new
    i = path[0]
    prems = list(d.premises)
    prems[i] = _replace_at(prems[i], path[1:], new)
    return replace(d, premises=tuple(prems))


def _check_segment(d: Derivation, seg: CutSegment, want_len_one: bool, kind: str | None = None):
    try:
        upper = node_at(d, seg.upper)
        lower = node_at(d, seg.lower)
    except (IndexError, AttributeError):
        raise SegmentStale("segment paths no longer address the derivation") from None
    if upper.concl != seg.formula or lower.concl != seg.formula:
        raise SegmentStale("segment formula no longer matches the derivation")
    if want_len_one and seg.length != 1:
        raise (NotTMF if kind == "tmf" else NotLMF)("segment has pass-through occurrences; permute first")
    return upper, lower


def _discharged_leaves(minor: Derivation, labels: set) -> dict:
    out: dict = {}
    def walk(n: Derivation):
        if n.rule == "assume" and n.label in labels:
            out[n.label] = n.concl
        for p in n.premises:
            walk(p)
    walk(minor)
    return out


def _copies(sub: Derivation, lcounter: list):
    first = [True]

    def make() -> Derivation:
        if first[0]:
            first[0] = False
            return sub
        return relabel_fresh(sub, lcounter)

    return make


# ---------------------------------------------------------------------------
# Reductions for typing maximal formulas


def reduce_tmf(d: Derivation, seg: CutSegment) -> Derivation:
    """Remove one typing detour: the segment's occurrence is both the
    conclusion of a type introduction and the major premise of the matching
    elimination."""
    if seg.kind != "tmf":
        raise NotTMF("segment is not headed by a type introduction")
    intro, _ = _check_segment(d, seg, want_len_one=True, kind="tmf")
    elim_path = seg.lower[:-1]
    elim = node_at(d, elim_path)
    if seg.lower[-1] != 0 or not elim.rule.startswith("case-"):
        raise NotTMF("segment does not end at the major premise of a type elimination")
    lcounter = [max_label(d)]
    reduct = _tmf_reduct(intro, elim, lcounter)
    return _replace_at(d, elim_path, reduct)


def _tmf_reduct(intro: Derivation, elim: Derivation, lcounter: list) -> Derivation:
    labels = set(elim.discharge)
    term = intro.concl.term
    refl = Derivation("eq-refl", Equiv(term, term))

    match intro.rule:
        case "andI":
            minor = elim.premises[1]
            found = _discharged_leaves(minor, labels)
            xa, xb = _props_and(elim, found, intro)
            d1, d2 = intro.premises
            minor = subst_derivation(minor, xa, d1.concl.term)
            minor = subst_derivation(minor, xb, d2.concl.term)
            repl = {}
            mk1, mk2 = _copies(d1, lcounter), _copies(d2, lcounter)
            for lbl, f in found.items():
                role = _classify_and(f, intro.concl.term, xa, xb)
                repl[lbl] = (lambda: refl) if role == "eq" else (mk1 if role == "a" else mk2)
            return _replace_leaves(minor, repl)
        case "orI":
            side = intro.concl.term.side
            minor = elim.premises[side]
            found = _discharged_leaves(minor, labels)
            v = _props_or(elim, found, intro, side)
            d1 = intro.premises[0]
            minor = subst_derivation(minor, v, d1.concl.term)
            mk = _copies(d1, lcounter)
            repl = {}
            for lbl, f in found.items():
                repl[lbl] = (lambda: refl) if isinstance(f, Equiv) else mk
            return _replace_leaves(minor, repl)
        case "existsI":
            minor = elim.premises[1]
            found = _discharged_leaves(minor, labels)
            y, xv = _props_exists(elim, found, intro)
            wit = intro.concl.term.witness
            d1 = intro.premises[0]
            minor = subst_derivation(minor, y, wit)
            xv2 = XiVar(l_subst(xv.type, y, wit), xv.index)
            minor = subst_derivation(minor, xv2, d1.concl.term)
            mk = _copies(d1, lcounter)
            repl = {}
            for lbl, f in found.items():
                repl[lbl] = (lambda: refl) if isinstance(f, Equiv) else mk
            return _replace_leaves(minor, repl)
        case "impI":
            minor = elim.premises[1]
            found = _discharged_leaves(minor, labels)
            fv = _props_imp(elim, found)
            b = intro.concl.term.binder
            body = intro.concl.term.body
            if fv is not None:
                minor = _subst_f_apply_deriv(minor, fv, b, body)
            pi_block = None
            if any(isinstance(f, Pi) for f in found.values()):
                d1 = intro.premises[0]
                sup = Derivation("supI", Sup(Gr(b, b.type), d1.concl), (d1,), discharge=intro.discharge)
                pi_block = Derivation("PiI", Pi(b, sup.concl), (sup,), eigen=(b,))
            repl = {}
            mk = _copies(pi_block, lcounter) if pi_block is not None else None
            for lbl, f in found.items():
                repl[lbl] = (lambda: refl) if isinstance(f, Equiv) else mk
            return _replace_leaves(minor, repl)
        case "forallI":
            minor = elim.premises[1]
            found = _discharged_leaves(minor, labels)
            hv = _props_forall(elim, found)
            x = intro.concl.term.var
            body = intro.concl.term.body
            if hv is not None:
                minor = _subst_h_deriv(minor, hv, body)
            pi_leaf = next((f for f in found.values() if isinstance(f, Pi)), None)
            pi_block = None
            if pi_leaf is not None:
                d1 = intro.premises[0]
                target = _subst_h_formula(pi_leaf, hv, body)
                pi_block = Derivation("PiI", target, (d1,), eigen=(x,))
            repl = {}
            mk = _copies(pi_block, lcounter) if pi_block is not None else None
            for lbl, f in found.items():
                repl[lbl] = (lambda: refl) if isinstance(f, Equiv) else mk
            return _replace_leaves(minor, repl)
    raise NotTMF(f"unsupported introduction {intro.rule}")


def _replace_leaves(d: Derivation, repl: dict) -> Derivation:
    if d.rule == "assume" and d.label in repl:
        return repl[d.label]()
    return replace(d, premises=tuple(_replace_leaves(p, repl) for p in d.premises))


def _classify_and(f: GFormula, term: GTerm, xa: XiVar, xb: XiVar) -> str:
    if isinstance(f, Equiv):
        return "eq"
    if f == Gr(xa, xa.type):
        return "a"
    return "b"


def _props_and(elim, found, intro):
    if len(elim.eigen) == 2:
        return elim.eigen
    ty = intro.concl.type
    for f in found.values():
        match f:
            case Equiv(_, tm.AndIntro(XiVar() as a, XiVar() as b)):
                return a, b
    gra = [f.term for f in found.values() if isinstance(f, Gr) and f.type == ty.left]
    grb = [f.term for f in found.values() if isinstance(f, Gr) and f.type == ty.right and f.term not in gra]
    xa = gra[0] if gra else tm.fresh_xi(ty.left)
    xb = grb[0] if grb else tm.fresh_xi(ty.right, (xa,))
    return xa, xb


def _props_or(elim, found, intro, side):
    if len(elim.eigen) == 2:
        return elim.eigen[side - 1]
    for f in found.values():
        match f:
            case Equiv(_, tm.OrIntro(_, _, XiVar() as v)):
                return v
            case Gr(XiVar() as v, _):
                return v
    return tm.fresh_xi(tm.type_of(intro.premises[0].concl.term))


def _props_exists(elim, found, intro):
    if len(elim.eigen) == 2:
        return elim.eigen
    for f in found.values():
        match f:
            case Equiv(_, tm.ExistsIntro(_, wit, XiVar() as v)):
                return wit, v
    for f in found.values():
        match f:
            case Gr(XiVar() as v, _):
                out = intro.concl.type
                from .kernel import infer_instance

                t = infer_instance(out.body, out.var, v.type)
                if t is not None:
                    return t, v
    return tm.fresh_ind("y"), tm.fresh_xi(intro.premises[0].concl.type)


def _props_imp(elim, found):
    if len(elim.eigen) == 1:
        return elim.eigen[0]
    for f in found.values():
        match f:
            case Equiv(_, tm.ImpIntro(_, FApp(fv, _))):
                return fv
            case Pi(_, Sup(_, Gr(FApp(fv, _), _))):
                return fv
    return None


def _props_forall(elim, found):
    if len(elim.eigen) == 1:
        return elim.eigen[0]
    for f in found.values():
        match f:
            case Equiv(_, tm.ForallIntro() as fi):
                match fi.body:
                    case HApp(hv, _):
                        return hv
            case Pi(_, Gr(HApp(hv, _), _)):
                return hv
    return None


# Second-order replacements over whole derivations: every application of the
# functional variable becomes the introduction's body applied to the argument.


def _map_formulas(d: Derivation, fn) -> Derivation:
    new_inst = d.inst
    if isinstance(new_inst, GTerm) and not isinstance(new_inst, (HVar, FVar)):
        new_inst = fn(Gr(new_inst, tm.type_of(new_inst))).term
    return Derivation(
        rule=d.rule,
        concl=fn(d.concl),
        premises=tuple(_map_formulas(p, fn) for p in d.premises),
        discharge=d.discharge,
        eigen=d.eigen,
        inst=new_inst,
        label=d.label,
    )


def _formula_map_terms(f: GFormula, tfn) -> GFormula:
    from .formulas import BotG, Plus

    match f:
        case Gr(t, ty):
            return Gr(tfn(t), ty)
        case Equiv(l, r):
            return Equiv(tfn(l), tfn(r))
        case BotG():
            return f
        case Times(l, r):
            return Times(_formula_map_terms(l, tfn), _formula_map_terms(r, tfn))
        case Plus(l, r):
            return Plus(_formula_map_terms(l, tfn), _formula_map_terms(r, tfn))
        case Sup(l, r):
            return Sup(_formula_map_terms(l, tfn), _formula_map_terms(r, tfn))
        case Pi(v, b) | Eps(v, b):
            cls = type(f)
            if isinstance(v, (HVar, FVar)) and getattr(tfn, "shadows", None) == v:
                return f
            return cls(v, _formula_map_terms(b, tfn))
    raise TypeError(f)


def _subst_f_apply_deriv(d: Derivation, fv: FVar, param: XiVar, body: GTerm) -> Derivation:
    def tfn(t: GTerm) -> GTerm:
        return tm.subst_f_apply(t, fv, param, body)

    tfn.shadows = fv
    return _map_formulas(d, lambda f: _formula_map_terms(f, tfn))


def _subst_h_deriv(d: Derivation, hv: HVar, body: GTerm) -> Derivation:
    def tfn(t: GTerm) -> GTerm:
        return tm.subst_h(t, hv, body, allow_enriched=True)

    tfn.shadows = hv
    return _map_formulas(d, lambda f: _formula_map_terms(f, tfn))


def _subst_h_formula(f: GFormula, hv: HVar, body: GTerm) -> GFormula:
    def tfn(t: GTerm) -> GTerm:
        return tm.subst_h(t, hv, body, allow_enriched=True)

    tfn.shadows = hv
    return _formula_map_terms(f, tfn)


# ---------------------------------------------------------------------------
# Reductions for logically maximal formulas


def reduce_lmf(d: Derivation, seg: CutSegment) -> Derivation:
    """Remove one logical detour (introduction immediately eliminated)."""
    if seg.kind != "lmf":
        raise NotLMF("segment is not headed by a logical introduction")
    intro, _ = _check_segment(d, seg, want_len_one=True, kind="lmf")
    elim_path = seg.lower[:-1]
    elim = node_at(d, elim_path)
    if seg.lower[-1] != 0:
        raise NotLMF("segment does not end at the major premise of an elimination")
    lcounter = [max_label(d)]
    reduct = _lmf_reduct(intro, elim, lcounter)
    return _replace_at(d, elim_path, reduct)


def _lmf_reduct(intro: Derivation, elim: Derivation, lcounter: list) -> Derivation:
    match (intro.rule, elim.rule):
        case ("timesI", "timesE-1"):
            return intro.premises[0]
        case ("timesI", "timesE-2"):
            return intro.premises[1]
        case ("plusI-1", "plusE") | ("plusI-2", "plusE"):
            side = 1 if intro.rule == "plusI-1" else 2
            branch = elim.premises[side]
            labels = set(elim.discharge)
            found = _discharged_leaves(branch, labels)
            mk = _copies(intro.premises[0], lcounter)
            return _replace_leaves(branch, {lbl: mk for lbl in found})
        case ("supI", "supE"):
            d1 = intro.premises[0]
            d2 = elim.premises[1]
            labels = set(intro.discharge)
            found = _discharged_leaves(d1, labels)
            mk = _copies(d2, lcounter)
            return _replace_leaves(d1, {lbl: mk for lbl in found})
        case ("PiI", "PiE"):
            d1 = intro.premises[0]
            nu = intro.eigen[0]
            tau = elim.inst
            if isinstance(tau, (HVar, FVar)):
                return d1 if tau == nu else rename_derivation(d1, nu, tau)
            return subst_derivation(d1, nu, tau)
        case ("EpsI", "EpsE"):
            d1 = intro.premises[0]
            minor = elim.premises[1]
            mus = elim.eigen
            mu = mus[0]
            tau = intro.inst
            labels = set(elim.discharge)
            found = _discharged_leaves(minor, labels)
            if isinstance(tau, (HVar, FVar)):
                minor = minor if tau == mu else rename_derivation(minor, mu, tau)
            else:
                minor = subst_derivation(minor, mu, tau)
            mk = _copies(d1, lcounter)
            return _replace_leaves(minor, {lbl: mk for lbl in found})
    raise NotLMF(f"no detour between {intro.rule} and {elim.rule}")


# ---------------------------------------------------------------------------
# Permutation


_MINOR_POSITIONS = {
    "plusE": (1, 2),
    "EpsE": (1,),
    "case-and": (1,),
    "case-or": (1, 2),
    "case-imp": (1,),
    "case-forall": (1,),
    "case-exists": (1,),
}


def permute(d: Derivation, seg: CutSegment) -> Derivation:
    """One permutation stage: copy the final elimination above the minor
    premises of the pass-through node producing the segment's lower edge."""
    if seg.length < 2:
        raise NotPermutable("segment has no pass-through occurrence")
    _check_segment(d, seg, want_len_one=False)
    lower_path = seg.lower
    star = node_at(d, lower_path)
    minors = _MINOR_POSITIONS.get(star.rule)
    if minors is None:
        raise NotPermutable(f"{star.rule} is not a pass-through node")
    elim_path = lower_path[:-1]
    if lower_path[-1] != 0:
        raise NotPermutable("lower edge is not the major premise of the elimination below")
    elim = node_at(d, elim_path)
    lcounter = [max_label(d)]

    side_premises = elim.premises[1:]
    side_labels = set()
    for p in side_premises:
        side_labels |= _all_labels(p)
    side_labels |= set(elim.discharge)

    new_premises = list(star.premises)
    first = True
    for i in minors:
        branch = star.premises[i]
        if first:
            copies = side_premises
            discharge = elim.discharge
            first = False
        else:
            mapping = {}
            for lbl in sorted(side_labels):
                lcounter[0] += 1
                mapping[lbl] = lcounter[0]
            copies = tuple(relabel(p, mapping) for p in side_premises)
            discharge = tuple(mapping.get(l, l) for l in elim.discharge)
        new_premises[i] = Derivation(
            rule=elim.rule,
            concl=elim.concl,
            premises=(branch, *copies),
            discharge=discharge,
            eigen=elim.eigen,
            inst=elim.inst,
        )
    lifted = replace(star, concl=elim.concl, premises=tuple(new_premises))
    return _replace_at(d, elim_path, lifted)


def _all_labels(d: Derivation) -> set:
    out = set(d.discharge)
    if d.label is not None:
        out.add(d.label)
    for p in d.premises:
        out |= _all_labels(p)
    return out


# ---------------------------------------------------------------------------
# Topmost-rightmost maximal cut-segment selection


def _above(p: tuple, q: tuple) -> bool:
    """p stands above q: q is a proper ancestor of p (premises sit above)."""
    return len(p) > len(q) and p[: len(q)] == q


def _side_connected(p: tuple, q: tuple) -> bool:
    return len(p) == len(q) and p[:-1] == q[:-1] and p != q


def select_trmcs(d: Derivation, segs: list | None = None) -> CutSegment:
    """A topmost rightmost cut-segment of maximal measure: no equal-measure
    segment finishes above its upper edge, none is side-connected to its
    lower edge, and none finishes above a sibling of its lower edge."""
    segs = find_cut_segments(d) if segs is None else segs
    if not segs:
        raise AlreadyNormal("derivation has no cut-segments")
    top = max(mu(s.formula) for s in segs)
    maximal = [s for s in segs if mu(s.formula) == top]

    def admissible(s: CutSegment) -> bool:
        for other in maximal:
            if other is s:
                continue
            if _above(other.lower, s.upper):
                return False
            if any(_side_connected(o, s.lower) for o in other.nodes):
                return False
            siblings = [s.lower[:-1] + (j,) for j in range(len(node_at(d, s.lower[:-1]).premises)) if s.lower[:-1] + (j,) != s.lower] if s.lower else []
            if any(_above(other.lower, sib) or other.lower == sib for sib in siblings):
                return False
        return True

    ranked = sorted(maximal, key=lambda s: (len(s.lower), s.lower), reverse=True)
    for s in ranked:
        if admissible(s):
            return s
    raise InternalMeasureViolation("no admissible maximal segment found")


# ---------------------------------------------------------------------------
# Normalization loop


def normalize(d: Derivation, base, ext=None, max_steps: int = 100000) -> tuple[Derivation, list]:
    """Drive the derivation to degree ((0,0),0), recording every step.

    The input is put under the two hygiene conventions first; every
    intermediate derivation is re-checked and the degree must decrease
    strictly at each step.
    """
    report = check(d, base, ext)
    if not report.ok:
        raise NormalizeError(f"input does not check: {report.errors[0][1]}")
    d = rename_apart(atomize_botG(d))
    report = check(d, base, ext)
    if not report.ok:
        raise InternalMeasureViolation(f"hygiene passes broke the derivation: {report.errors[0][1]}")
    trace: list[Step] = []
    deg = degree(d)
    for _ in range(max_steps):
        if deg.normal:
            break
        seg = select_trmcs(d)
        if seg.length > 1:
            kind = "permute"
            d2 = permute(d, seg)
        elif seg.kind == "tmf":
            kind = "tmf-reduce"
            d2 = reduce_tmf(d, seg)
        else:
            kind = "lmf-reduce"
            d2 = reduce_lmf(d, seg)
        d2 = rename_apart(d2)
        report = check(d2, base, ext)
        if not report.ok:
            raise InternalMeasureViolation(f"step {kind} broke the derivation: {report.errors[0][1]}")
        deg2 = degree(d2)
        if not (deg2 < deg):
            raise InternalMeasureViolation(f"step {kind} did not decrease the degree: {deg} -> {deg2}")
        trace.append(Step(kind, seg, deg, deg2))
        d, deg = d2, deg2
    else:
        raise InternalMeasureViolation("step budget exhausted")
    return d, trace
