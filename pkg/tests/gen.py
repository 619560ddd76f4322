"""Random generators for plain-fragment terms and cut-seeded derivations.

Terms are generated top-down against a target type; every binder receives
a globally fresh index so that substitution never needs to rename during
synthesis.  Cut seeding wraps synthesized typing derivations with
eliminations and logical detours so that normalization has work to do.
"""

from __future__ import annotations

import random

from groundkernel.formulas import Eps, Equiv, Gr, Pi, Plus, Sup, Times, gr
from groundkernel.kernel import Derivation, assume, check, max_label
from groundkernel.lang import And, Atom, Bot, Const, Exists, Forall, Imp, Or, Var
from groundkernel.terms import (
    AndElim,
    AndIntro,
    BotElim,
    Delta,
    ExistsElim,
    ExistsIntro,
    ForallElim,
    ForallIntro,
    ImpElim,
    ImpIntro,
    OrElim,
    OrIntro,
    XiVar,
    free_vars,
    type_of,
)

P = Atom("P", (Const("c"),))
Q = Atom("Q")
R = Atom("R")
X = Var("x")
PX = Atom("P", (X,))

ATOMS = (P, Q, R)


def random_type(rng: random.Random, depth: int = 2):
    if depth <= 0 or rng.random() < 0.4:
        return rng.choice(ATOMS)
    match rng.randrange(4):
        case 0:
            return And(random_type(rng, depth - 1), random_type(rng, depth - 1))
        case 1:
            return Or(random_type(rng, depth - 1), random_type(rng, depth - 1))
        case 2:
            return Imp(random_type(rng, depth - 1), random_type(rng, depth - 1))
        case _:
            return Forall(X, PX) if rng.random() < 0.5 else Exists(X, PX)


DELTAS = {P: "dPc", Q: "dQ", R: "dR"}


class TermGen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.fresh = 1000

    def _fresh_index(self) -> int:
        self.fresh += 1
        return self.fresh

    def leaf(self, ty, scope):
        options = [v for v in scope if v.type == ty]
        if options and self.rng.random() < 0.7:
            return self.rng.choice(options)
        if ty in DELTAS and self.rng.random() < 0.4:
            return Delta(DELTAS[ty], ty)
        return XiVar(ty, self.rng.randrange(3))

    def term(self, ty, size: int, scope=(), depth: int = 0):
        rng = self.rng
        if size <= 1 or depth > 6:
            return self.leaf(ty, scope)
        builders = []
        match ty:
            case And(a, b):
                builders.append(lambda: AndIntro(self.term(a, size // 2, scope, depth + 1), self.term(b, size // 2, scope, depth + 1)))
            case Or(a, b):
                builders.append(
                    lambda: OrIntro(1, b, self.term(a, size - 1, scope, depth + 1))
                    if rng.random() < 0.5
                    else OrIntro(2, a, self.term(b, size - 1, scope, depth + 1))
                )
            case Imp(a, b):
                def mk_imp():
                    binder = XiVar(a, self._fresh_index())
                    return ImpIntro(binder, self.term(b, size - 1, scope + (binder,), depth + 1))

                builders.append(mk_imp)
            case Forall(x, body) if (x, body) == (X, PX):
                builders.append(lambda: ForallIntro(X, X, self.term(PX, size - 1, scope, depth + 1)))
            case Exists(x, body) if (x, body) == (X, PX):
                builders.append(lambda: ExistsIntro(ty, Const("c"), self.term(P, size - 1, scope, depth + 1)))
        if ty == PX:
            builders.append(lambda: ForallElim(X, self.term(Forall(X, PX), size - 1, scope, depth + 1)))

        def mk_and_elim():
            other = self.rng.choice(ATOMS)
            side = rng.randrange(1, 3)
            big = And(ty, other) if side == 1 else And(other, ty)
            return AndElim(side, self.term(big, size - 1, scope, depth + 1))

        def mk_imp_elim():
            a = self.rng.choice(ATOMS)
            return ImpElim(self.term(Imp(a, ty), size // 2, scope, depth + 1), self.term(a, size // 2, scope, depth + 1))

        def mk_or_elim():
            a, b = self.rng.choice(ATOMS), self.rng.choice(ATOMS)
            b1 = XiVar(a, self._fresh_index())
            b2 = XiVar(b, self._fresh_index())
            return OrElim(
                b1,
                b2,
                self.term(Or(a, b), size // 3, scope, depth + 1),
                self.term(ty, size // 3, scope + (b1,), depth + 1),
                self.term(ty, size // 3, scope + (b2,), depth + 1),
            )

        def mk_exists_elim():
            binder = XiVar(PX, self._fresh_index())
            return ExistsElim(
                X,
                binder,
                self.term(Exists(X, PX), size // 2, scope, depth + 1),
                self.term(ty, size // 2, scope + (binder,), depth + 1),
            )

        def mk_bot_elim():
            return BotElim(ty, self.term(Bot(), size - 1, scope, depth + 1))

        builders.extend([mk_and_elim, mk_imp_elim])
        if depth < 4:
            builders.extend([mk_or_elim])
        if ty != PX and not isinstance(ty, (Forall, Exists)):
            builders.append(mk_exists_elim)
        if rng.random() < 0.15:
            builders.append(mk_bot_elim)
        if ty == Bot():
            builders = [lambda: ImpElim(self.term(Imp(Q, Bot()), size // 2, scope, depth + 1), self.term(Q, size // 2, scope, depth + 1))]
        return rng.choice(builders)()


def random_gen_term(rng: random.Random, size: int = 12):
    from groundkernel.terms import TermError

    for _ in range(50):
        ty = random_type(rng)
        g = TermGen(rng)
        try:
            t = g.term(ty, size)
            type_of(t)
            return t
        except TermError:
            continue
    raise AssertionError("generator failed to produce a well-formed term")


# ---------------------------------------------------------------------------
# Cut seeding


def _labels_from(d: Derivation):
    box = [max_label(d) + 100]

    def nxt():
        box[0] += 1
        return box[0]

    return nxt


def wrap_times_detour(rng, d: Derivation) -> Derivation:
    lab = _labels_from(d)
    other = assume(Gr(XiVar(Q, 77), Q), lab())
    side = rng.randrange(1, 3)
    pair = Derivation("timesI", Times(d.concl, other.concl), (d, other)) if side == 1 else Derivation(
        "timesI", Times(other.concl, d.concl), (other, d)
    )
    return Derivation(f"timesE-{side}", d.concl, (pair,))


def wrap_sup_detour(rng, d: Derivation) -> Derivation:
    lab = _labels_from(d)
    a0 = Gr(XiVar(R, 78), R)
    sup = Derivation("supI", Sup(a0, d.concl), (d,))
    return Derivation("supE", d.concl, (sup, assume(a0, lab())))


def wrap_pi_detour(rng, d: Derivation) -> Derivation:
    idx = 900 + rng.randrange(50)
    v = XiVar(Q, idx)
    pi = Derivation("PiI", Pi(v, d.concl), (d,), eigen=(v,))
    payload = Delta("dQ", Q)
    return Derivation("PiE", d.concl, (pi,), inst=payload)


def wrap_eps_detour(rng, d: Derivation) -> Derivation:
    # quantify a variable not occurring in the conclusion: premise == body
    lab = _labels_from(d)
    v = XiVar(Q, 950 + rng.randrange(50))
    intro = Derivation("EpsI", Eps(v, d.concl), (d,), inst=v)
    mu = XiVar(Q, 999 + rng.randrange(50))
    return _eps_e(intro, d.concl, mu, lab())


def _eps_e(intro, concl, mu, hyp_label):
    # minor assumes the (vacuously) instantiated body and concludes it
    minor = assume(concl, hyp_label)
    return Derivation("EpsE", concl, (intro, minor), discharge=(hyp_label,), eigen=(mu,))


def wrap_plus_detour(rng, d: Derivation) -> Derivation:
    lab = _labels_from(d)
    other = Gr(XiVar(Q, 79), Q)
    side = rng.randrange(1, 3)
    shape = Plus(d.concl, other) if side == 1 else Plus(other, d.concl)
    inj = Derivation(f"plusI-{side}", shape, (d,))
    l1, l2 = lab(), lab()
    b1 = assume(shape.left, l1)
    b2 = assume(shape.right, l2)
    target = d.concl
    br1 = b1 if shape.left == target else _weaken_to(b1, target, lab)
    br2 = b2 if shape.right == target else _weaken_to(b2, target, lab)
    return Derivation("plusE", target, (inj, br1, br2), discharge=(l1, l2))


def _weaken_to(leaf: Derivation, target, lab) -> Derivation:
    # target follows from anything via a throwaway implication assumption
    bridge = assume(Sup(leaf.concl, target), lab())
    return Derivation("supE", target, (bridge, leaf))


def wrap_case_detour(rng, d: Derivation) -> Derivation:
    """Turn an introduction-headed typing derivation into a typing detour."""
    if not isinstance(d.concl, Gr):
        return d
    term = d.concl.term
    lab = _labels_from(d)
    ty = d.concl.type
    match d.rule:
        case "andI":
            xa = XiVar(ty.left, 600 + rng.randrange(20))
            xb = XiVar(ty.right, 650 + rng.randrange(20))
            l1, l2, l3 = lab(), lab(), lab()
            body = Times(Equiv(term, AndIntro(xa, xb)), Times(Gr(xa, ty.left), Gr(xb, ty.right)))
            pack = Derivation(
                "timesI",
                body,
                (
                    assume(body.left, l1),
                    Derivation("timesI", body.right, (assume(Gr(xa, ty.left), l2), assume(Gr(xb, ty.right), l3))),
                ),
            )
            minor = Derivation("EpsI", Eps(xb, body), (pack,), inst=xb)
            minor = Derivation("EpsI", Eps(xa, minor.concl), (minor,), inst=xa)
            return Derivation("case-and", minor.concl, (d, minor), discharge=(l1, l2, l3), eigen=(xa, xb))
        case "orI":
            xa = XiVar(ty.left, 600 + rng.randrange(20))
            xb = XiVar(ty.right, 650 + rng.randrange(20))
            l1, l2, l3, l4 = lab(), lab(), lab(), lab()
            body = Plus(
                Times(Equiv(term, OrIntro(1, ty.right, xa)), Gr(xa, ty.left)),
                Times(Equiv(term, OrIntro(2, ty.left, xb)), Gr(xb, ty.right)),
            )
            big = Eps(xa, Eps(xb, body))
            br1 = Derivation("plusI-1", body, (Derivation("timesI", body.left, (assume(body.left.left, l1), assume(Gr(xa, ty.left), l2))),))
            br1 = Derivation("EpsI", Eps(xb, body), (br1,), inst=xb)
            br1 = Derivation("EpsI", big, (br1,), inst=xa)
            br2 = Derivation("plusI-2", body, (Derivation("timesI", body.right, (assume(body.right.left, l3), assume(Gr(xb, ty.right), l4))),))
            br2 = Derivation("EpsI", Eps(xb, body), (br2,), inst=xb)
            br2 = Derivation("EpsI", big, (br2,), inst=xa)
            return Derivation("case-or", big, (d, br1, br2), discharge=(l1, l2, l3, l4), eigen=(xa, xb))
        case "existsI":
            y = Var("w", 700 + rng.randrange(20))
            from groundkernel.lang import l_subst

            xa = XiVar(l_subst(ty.body, ty.var, y), 600 + rng.randrange(20))
            l1, l2 = lab(), lab()
            body = Times(Equiv(term, ExistsIntro(ty, y, xa)), Gr(xa, xa.type))
            pack = Derivation("timesI", body, (assume(body.left, l1), assume(body.right, l2)))
            minor = Derivation("EpsI", Eps(xa, body), (pack,), inst=xa)
            minor = Derivation("EpsI", Eps(y, minor.concl), (minor,), inst=y)
            return Derivation("case-exists", minor.concl, (d, minor), discharge=(l1, l2), eigen=(y, xa))
    return d


WRAPPERS = (wrap_times_detour, wrap_sup_detour, wrap_pi_detour, wrap_eps_detour, wrap_plus_detour)


def cut_seeded(rng: random.Random, base, size: int = 10, wraps: int = 3):
    """A checked derivation with detours, grown from a synthesized typing."""
    from groundkernel.theory import synthesize_typing

    t = random_gen_term(rng, size)
    d = synthesize_typing(t)
    d = wrap_case_detour(rng, d)
    for _ in range(wraps):
        d = rng.choice(WRAPPERS)(rng, d)
    report = check(d, base)
    assert report.ok, [str(e) for _, e in report.errors][:2]
    return d
