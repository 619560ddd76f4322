"""Parsing of ground terms, formulas and derivations from S-expressions.

Parsing needs context: the atomic base supplies delta constants and the
symbol signature, the extension registry supplies user operation symbols.
Everything the reader accepts round-trips through the printers in
`formulas`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import (
    AtomicBase,
    EMPTY_BASE,
    Exists,
    Forall,
    LangError,
    Signature,
    Var,
    formula_from_sexp,
    parse_var,
    term_from_sexp,
)
from .sexpr import read, write
from . import terms as tm
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
    OrElim,
    OrIntro,
    XiVar,
)
from .formulas import BOTG, AnyVar, Eps, Equiv, GFormula, Gr, Pi, Plus, Sup, Times
from .kernel import Derivation, infer_instance
from .theory import EMPTY_REGISTRY, ExtensionRegistry, OpSymbol, RewriteRule, register_extension


class ReadError(LangError):
    pass


_GTERM_HEADS = frozenset(
    (
        "xi",
        "h",
        "f",
        "andI",
        "orI",
        "impI",
        "forallI",
        "existsI",
        "andE",
        "orE",
        "impE",
        "forallE",
        "existsE",
        "botE",
        "delta",
        "meta",
    )
)


@dataclass
class Reader:
    base: AtomicBase = EMPTY_BASE
    registry: ExtensionRegistry = EMPTY_REGISTRY
    sig: Signature = field(default_factory=Signature)

    @classmethod
    def for_base(cls, base: AtomicBase, registry: ExtensionRegistry = EMPTY_REGISTRY) -> "Reader":
        return cls(base=base, registry=registry, sig=base.signature())

    # -- background syntax --------------------------------------------------

    def lterm(self, e):
        return term_from_sexp(e, self.sig)

    def lformula(self, e):
        return formula_from_sexp(e, self.sig)

    # -- variables -----------------------------------------------------------

    def xivar(self, e) -> XiVar:
        if not (isinstance(e, list) and len(e) == 3 and e[0] == "xi" and isinstance(e[2], int)):
            raise ReadError(f"bad typed variable {write(e)}")
        return XiVar(self.lformula(e[1]), e[2])

    def anyvar(self, e) -> AnyVar:
        if isinstance(e, str):
            return parse_var(e)
        if isinstance(e, list) and e:
            match e[0], len(e):
                case ("xi", 3):
                    return self.xivar(e)
                case ("h", 4):
                    return HVar(self.lformula(e[1]), parse_var(e[2]), _int(e[3]))
                case ("f", 3):
                    return FVar(self.lformula(e[1]), _int(e[2]))
        raise ReadError(f"bad variable {write(e)}")

    # -- ground terms ---------------------------------------------------------

    def term(self, e) -> GTerm:
        if not (isinstance(e, list) and e and isinstance(e[0], str)):
            raise ReadError(f"bad ground term {write(e)}")
        head, args = e[0], e[1:]
        match head:
            case "xi":
                return self.xivar(e)
            case "h":
                _n(e, 5)
                return HApp(HVar(self.lformula(args[0]), parse_var(args[1]), _int(args[2])), self.lterm(args[3]))
            case "f":
                _n(e, 4)
                return FApp(FVar(self.lformula(args[0]), _int(args[1])), self.term(args[2]))
            case "delta":
                _n(e, 2)
                return Delta(args[0], self.base.delta_type(args[0]))
            case "meta":
                _n(e, 3)
                return MetaVar(args[0], self.lformula(args[1]))
            case "andI":
                _n(e, 3)
                return AndIntro(self.term(args[0]), self.term(args[1]))
            case "orI":
                _n(e, 3)
                dom, cod, side = self._rhd(args[0], want_extra=True)
                from .lang import Or

                if not isinstance(cod, Or):
                    raise ReadError(f"injection codomain must be a disjunction: {write(args[0])}")
                if side is None:
                    side = 1 if cod.left == dom else 2
                other = cod.right if side == 1 else cod.left
                return OrIntro(side, other, self.term(args[1]))
            case "impI":
                _n(e, 3)
                return ImpIntro(self.xivar(args[0]), self.term(args[1]))
            case "forallI":
                if len(args) == 2:
                    x = parse_var(args[0])
                    return ForallIntro(x, x, self.term(args[1]))
                _n(e, 4)
                return ForallIntro(parse_var(args[0]), parse_var(args[1]), self.term(args[2]))
            case "existsI":
                _n(e, 3)
                dom, cod, wit = self._rhd(args[0], want_extra=True, extra_term=True)
                if not isinstance(cod, Exists):
                    raise ReadError(f"packaging codomain must be an existential: {write(args[0])}")
                if wit is None:
                    wit = infer_instance(cod.body, cod.var, dom)
                    if wit is None and dom == cod.body:
                        wit = cod.var
                    if wit is None:
                        raise ReadError(f"cannot infer the witness of {write(e)}; annotate the rhd")
                return ExistsIntro(cod, wit, self.term(args[1]))
            case "andE":
                _n(e, 3)
                return AndElim(_int(args[0]), self.term(args[1]))
            case "orE":
                _n(e, 6)
                return OrElim(
                    self.xivar(args[0]),
                    self.xivar(args[1]),
                    self.term(args[2]),
                    self.term(args[3]),
                    self.term(args[4]),
                )
            case "impE":
                _n(e, 3)
                return ImpElim(self.term(args[0]), self.term(args[1]))
            case "forallE":
                _n(e, 3)
                dom, cod, inst = self._rhd(args[0], want_extra=True, extra_term=True)
                if not isinstance(dom, Forall):
                    raise ReadError(f"instantiation domain must be universal: {write(args[0])}")
                if inst is None:
                    inst = infer_instance(dom.body, dom.var, cod)
                    if inst is None and cod == dom.body:
                        inst = dom.var
                    if inst is None:
                        raise ReadError(f"cannot infer the instance of {write(e)}; annotate the rhd")
                return ForallElim(inst, self.term(args[1]))
            case "existsE":
                _n(e, 5)
                return ExistsElim(parse_var(args[0]), self.xivar(args[1]), self.term(args[2]), self.term(args[3]))
            case "botE":
                _n(e, 3)
                return BotElim(self.lformula(args[0]), self.term(args[1]))
        if head in self.registry.symbols:
            sym = self.registry.symbols[head]
            if len(args) != len(sym.domain):
                raise ReadError(f"{head} expects {len(sym.domain)} arguments")
            return ExtApp(sym, tuple(self.term(a) for a in args))
        raise ReadError(f"unknown term constructor {head!r}")

    def _rhd(self, e, want_extra=False, extra_term=False):
        if not (isinstance(e, list) and e and e[0] == "rhd" and len(e) in (3, 4)):
            raise ReadError(f"bad operational type {write(e)}")
        dom = self.lformula(e[1])
        cod = self.lformula(e[2])
        extra = None
        if len(e) == 4:
            extra = self.lterm(e[3]) if extra_term else _int(e[3])
        return dom, cod, extra

    # -- formulas --------------------------------------------------------------

    def formula(self, e) -> GFormula:
        if e == "botG":
            return BOTG
        if not (isinstance(e, list) and e and isinstance(e[0], str)):
            raise ReadError(f"bad formula {write(e)}")
        head, args = e[0], e[1:]
        match head:
            case "gr":
                _n(e, 3)
                return Gr(self.term(args[0]), self.lformula(args[1]))
            case "equiv":
                _n(e, 3)
                return Equiv(self.term(args[0]), self.term(args[1]))
            case "times":
                _n(e, 3)
                return Times(self.formula(args[0]), self.formula(args[1]))
            case "plus":
                _n(e, 3)
                return Plus(self.formula(args[0]), self.formula(args[1]))
            case "sup":
                _n(e, 3)
                return Sup(self.formula(args[0]), self.formula(args[1]))
            case "Pi":
                _n(e, 3)
                return Pi(self.anyvar(args[0]), self.formula(args[1]))
            case "Eps":
                _n(e, 3)
                return Eps(self.anyvar(args[0]), self.formula(args[1]))
        raise ReadError(f"unknown formula constructor {head!r}")

    # -- derivations -------------------------------------------------------------

    def derivation(self, e) -> Derivation:
        if isinstance(e, list) and e and e[0] == "assume" and len(e) == 3:
            return Derivation("assume", self.formula(e[2]), label=_int(e[1]))
        if not (isinstance(e, list) and len(e) >= 3 and e[0] == "deriv" and isinstance(e[1], str)):
            raise ReadError(f"bad derivation {write(e)}")
        rule = e[1]
        concl = None
        discharge: list = []
        eigen: list = []
        inst = None
        label = None
        premises: list = []
        for item in e[2:]:
            if isinstance(item, list) and item and item[0] == "concl":
                _n(item, 2)
                concl = self.formula(item[1])
            elif isinstance(item, list) and item and item[0] == "discharge":
                for x in item[1:]:
                    if isinstance(x, int):
                        discharge.append(x)
                    elif isinstance(x, list) and len(x) == 2 and isinstance(x[0], int):
                        discharge.append(x[0])
                    else:
                        raise ReadError(f"bad discharge item {write(x)}")
            elif isinstance(item, list) and item and item[0] == "eigen":
                _n(item, 2)
                eigen.append(self.anyvar(item[1]))
            elif isinstance(item, list) and item and item[0] == "inst":
                _n(item, 2)
                inst = self.inst(item[1])
            elif isinstance(item, list) and item and item[0] == "label":
                _n(item, 2)
                label = _int(item[1])
            else:
                premises.append(self.derivation(item))
        if concl is None:
            raise ReadError(f"derivation node lacks a conclusion: {write(e[:2])}")
        return Derivation(rule, concl, tuple(premises), tuple(discharge), tuple(eigen), inst, label)

    def inst(self, e):
        if isinstance(e, list) and e and e[0] in _GTERM_HEADS:
            if e[0] == "h" and len(e) == 4:
                return HVar(self.lformula(e[1]), parse_var(e[2]), _int(e[3]))
            if e[0] == "f" and len(e) == 3:
                return FVar(self.lformula(e[1]), _int(e[2]))
            return self.term(e)
        if isinstance(e, list) and e and isinstance(e[0], str) and e[0] in self.registry.symbols:
            return self.term(e)
        return self.lterm(e)

    # -- extensions ----------------------------------------------------------------

    def extension(self, e) -> ExtensionRegistry:
        if not (isinstance(e, list) and e and e[0] == "extend"):
            raise ReadError("extension file must start with (extend ...)")
        sym = None
        raw_eqs = []
        for item in e[1:]:
            if isinstance(item, list) and item and item[0] == "symbol":
                name = item[1]
                domain = codomain = None
                binders: list = []
                for part in item[2:]:
                    match part:
                        case ["domain", *ds]:
                            domain = tuple(self.lformula(x) for x in ds)
                        case ["codomain", c]:
                            codomain = self.lformula(c)
                        case ["binds", *vs]:
                            binders = [self.anyvar(v) for v in vs]
                        case _:
                            raise ReadError(f"bad symbol clause {write(part)}")
                if domain is None or codomain is None:
                    raise ReadError("symbol declaration needs (domain ...) and (codomain ...)")
                sym = OpSymbol(name, domain, codomain, tuple(binders))
            elif isinstance(item, list) and item and item[0] == "equation":
                raw_eqs.append(item)
            else:
                raise ReadError(f"bad extension clause {write(item)}")
        if sym is None:
            raise ReadError("extension file declares no symbol")
        sub = Reader(self.base, self.registry.with_extension(sym, ()), self.sig)
        eqs = []
        for item in raw_eqs:
            lhs = rhs = None
            for part in item[1:]:
                match part:
                    case ["lhs", x]:
                        lhs = sub.term(x)
                    case ["rhs", x]:
                        rhs = sub.term(x)
                    case _:
                        raise ReadError(f"bad equation clause {write(part)}")
            if lhs is None or rhs is None:
                raise ReadError("equation needs (lhs ...) and (rhs ...)")
            eqs.append(RewriteRule(sym, lhs, rhs))
        return register_extension(sym, eqs, self.registry)

    # -- text entry points ------------------------------------------------------------

    def parse_term(self, text: str) -> GTerm:
        return self.term(read(text))

    def parse_formula(self, text: str) -> GFormula:
        return self.formula(read(text))

    def parse_derivation(self, text: str) -> Derivation:
        return self.derivation(read(text))

    def parse_extension(self, text: str) -> ExtensionRegistry:
        return self.extension(read(text))


def _n(e, n: int):
    if len(e) != n:
        raise ReadError(f"{e[0]} takes {n - 1} arguments: {write(e)}")


def _int(x) -> int:
    if not isinstance(x, int):
        raise ReadError(f"expected an integer, got {write(x)}")
    return x


# ---------------------------------------------------------------------------
# Derivation printing


def derivation_to_sexp(d: Derivation):
    from .formulas import anyvar_to_sexp, gformula_to_sexp, gterm_to_sexp
    from .lang import term_to_sexp

    if d.rule == "assume":
        return ["assume", d.label, gformula_to_sexp(d.concl)]
    out = ["deriv", d.rule, ["concl", gformula_to_sexp(d.concl)]]
    if d.discharge:
        out.append(["discharge", *d.discharge])
    for v in d.eigen:
        out.append(["eigen", anyvar_to_sexp(v)])
    if d.inst is not None:
        if isinstance(d.inst, (HVar, FVar)):
            out.append(["inst", anyvar_to_sexp(d.inst)])
        elif isinstance(d.inst, GTerm):
            out.append(["inst", gterm_to_sexp(d.inst)])
        else:
            out.append(["inst", term_to_sexp(d.inst)])
    out.extend(derivation_to_sexp(p) for p in d.premises)
    return out


def print_derivation(d: Derivation) -> str:
    return write(derivation_to_sexp(d))
