"""Background first-order language, atomic bases and their derivations.

The background language supplies the types of every ground term: its
formulas are built from predicate atoms over terms with the usual
connectives and quantifiers, plus the absurdity constant.  An atomic base
packages individual constants, relations and a Post system of production
rules over atomic formulas; closed derivations in that system are the
denotata of the delta constants of the ground language.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .sexpr import read, write


class LangError(Exception):
    pass


class ArityError(LangError):
    pass


# ---------------------------------------------------------------------------
# Terms and formulas


@dataclass(frozen=True)
class Var:
    name: str
    index: int = 0

    def __str__(self):
        return self.name if self.index == 0 else f"{self.name}#{self.index}"


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple

    def __str__(self):
        return write(term_to_sexp(self))


LTerm = Var | Const | App


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class And:
    left: "LFormula"
    right: "LFormula"


@dataclass(frozen=True)
class Or:
    left: "LFormula"
    right: "LFormula"


@dataclass(frozen=True)
class Imp:
    left: "LFormula"
    right: "LFormula"


@dataclass(frozen=True)
class Forall:
    var: Var
    body: "LFormula"


@dataclass(frozen=True)
class Exists:
    var: Var
    body: "LFormula"


LFormula = Atom | Bot | And | Or | Imp | Forall | Exists

BOT = Bot()


def term_vars(t: LTerm) -> frozenset[Var]:
    match t:
        case Var():
            return frozenset((t,))
        case Const():
            return frozenset()
        case App(_, args):
            return frozenset().union(*(term_vars(a) for a in args)) if args else frozenset()
    raise TypeError(t)


@lru_cache(maxsize=None)
def free_vars_l(a: LFormula) -> frozenset[Var]:
    match a:
        case Atom(_, args):
            return frozenset().union(*(term_vars(t) for t in args)) if args else frozenset()
        case Bot():
            return frozenset()
        case And(l, r) | Or(l, r) | Imp(l, r):
            return free_vars_l(l) | free_vars_l(r)
        case Forall(v, b) | Exists(v, b):
            return free_vars_l(b) - {v}
    raise TypeError(a)


@lru_cache(maxsize=None)
def bound_vars_l(a: LFormula) -> frozenset[Var]:
    match a:
        case Atom() | Bot():
            return frozenset()
        case And(l, r) | Or(l, r) | Imp(l, r):
            return bound_vars_l(l) | bound_vars_l(r)
        case Forall(v, b) | Exists(v, b):
            return bound_vars_l(b) | {v}
    raise TypeError(a)


def fresh_var(base: Var, *avoid: frozenset[Var]) -> Var:
    """Lowest-index variant of `base` not occurring in any avoid set."""
    taken = {v.index for s in avoid for v in s if v.name == base.name}
    i = base.index + 1
    while i in taken:
        i += 1
    return Var(base.name, i)


def subst_term(t: LTerm, x: Var, u: LTerm) -> LTerm:
    match t:
        case Var():
            return u if t == x else t
        case Const():
            return t
        case App(fn, args):
            return App(fn, tuple(subst_term(a, x, u) for a in args))
    raise TypeError(t)


def l_subst(a, x: Var, t: LTerm):
    """Capture-avoiding substitution of x by t, on a term or formula."""
    if isinstance(a, (Var, Const, App)):
        return subst_term(a, x, t)
    match a:
        case Atom(p, args):
            return Atom(p, tuple(subst_term(s, x, t) for s in args))
        case Bot():
            return a
        case And(l, r):
            return And(l_subst(l, x, t), l_subst(r, x, t))
        case Or(l, r):
            return Or(l_subst(l, x, t), l_subst(r, x, t))
        case Imp(l, r):
            return Imp(l_subst(l, x, t), l_subst(r, x, t))
        case Forall(v, b) | Exists(v, b):
            cls = type(a)
            if v == x:
                return a
            if x not in free_vars_l(b):
                return a
            if v in term_vars(t):
                w = fresh_var(v, term_vars(t), free_vars_l(b), bound_vars_l(b))
                b = l_subst(b, v, w)
                return cls(w, l_subst(b, x, t))
            return cls(v, l_subst(b, x, t))
    raise TypeError(a)


def free_for(t: LTerm, x: Var, a: LFormula) -> bool:
    """True iff substituting t for x in a captures no variable of t."""
    match a:
        case Atom() | Bot():
            return True
        case And(l, r) | Or(l, r) | Imp(l, r):
            return free_for(t, x, l) and free_for(t, x, r)
        case Forall(v, b) | Exists(v, b):
            if v == x or x not in free_vars_l(a):
                return True
            return v not in term_vars(t) and free_for(t, x, b)
    raise TypeError(a)


@lru_cache(maxsize=None)
def k1(a: LFormula) -> int:
    """Complexity of a background formula: atoms at 0, connectives add 1."""
    match a:
        case Atom() | Bot():
            return 0
        case And(l, r) | Or(l, r) | Imp(l, r):
            return max(k1(l), k1(r)) + 1
        case Forall(_, b) | Exists(_, b):
            return k1(b) + 1
    raise TypeError(a)


# ---------------------------------------------------------------------------
# Parsing and printing

_CONNECTIVES = {"and": And, "or": Or, "imp": Imp}


@dataclass
class Signature:
    """Symbol inventory used while parsing background syntax.

    With strict=False unknown symbols are recorded on first use; with
    strict=True (the mode used once a base file is loaded) unknown symbols
    are rejected.
    """

    constants: set[str] = field(default_factory=set)
    functions: dict[str, int] = field(default_factory=dict)
    relations: dict[str, int] = field(default_factory=dict)
    strict: bool = False

    def check_fn(self, name: str, arity: int):
        if name in self.functions:
            if self.functions[name] != arity:
                raise ArityError(f"function {name} used with arity {arity}, declared {self.functions[name]}")
        elif self.strict:
            raise LangError(f"unknown function symbol {name!r}")
        else:
            self.functions[name] = arity

    def check_rel(self, name: str, arity: int):
        if name in self.relations:
            if self.relations[name] != arity:
                raise ArityError(f"predicate {name} used with arity {arity}, declared {self.relations[name]}")
        elif self.strict:
            raise LangError(f"unknown predicate symbol {name!r}")
        else:
            self.relations[name] = arity


def parse_var(sym: str) -> Var:
    if "#" in sym:
        name, _, idx = sym.rpartition("#")
        if name and idx.isdigit():
            return Var(name, int(idx))
    return Var(sym)


def term_from_sexp(e, sig: Signature) -> LTerm:
    if isinstance(e, str):
        if e in sig.constants:
            return Const(e)
        if e == "bot":
            raise LangError("'bot' is a formula, not a term")
        return Var(parse_var(e).name, parse_var(e).index)
    if isinstance(e, list):
        if not e or not isinstance(e[0], str):
            raise LangError(f"bad term {write(e)}")
        fn, args = e[0], e[1:]
        sig.check_fn(fn, len(args))
        return App(fn, tuple(term_from_sexp(a, sig) for a in args))
    raise LangError(f"bad term {e!r}")


def formula_from_sexp(e, sig: Signature) -> LFormula:
    if e == "bot":
        return BOT
    if isinstance(e, str):
        sig.check_rel(e, 0)
        return Atom(e)
    if isinstance(e, list) and e and isinstance(e[0], str):
        head = e[0]
        if head in _CONNECTIVES:
            if len(e) != 3:
                raise ArityError(f"{head} takes 2 arguments: {write(e)}")
            return _CONNECTIVES[head](formula_from_sexp(e[1], sig), formula_from_sexp(e[2], sig))
        if head in ("forall", "exists"):
            if len(e) != 3 or not isinstance(e[1], str):
                raise LangError(f"bad quantifier {write(e)}")
            cls = Forall if head == "forall" else Exists
            return cls(parse_var(e[1]), formula_from_sexp(e[2], sig))
        sig.check_rel(head, len(e) - 1)
        return Atom(head, tuple(term_from_sexp(a, sig) for a in e[1:]))
    raise LangError(f"bad formula {e!r}")


def parse_l(text: str, role: str = "formula", sig: Signature | None = None):
    """Parse background syntax; role is 'term' or 'formula'."""
    sig = sig if sig is not None else Signature()
    e = read(text)
    if role == "term":
        return term_from_sexp(e, sig)
    if role == "formula":
        return formula_from_sexp(e, sig)
    raise ValueError(f"role must be 'term' or 'formula', got {role!r}")


def term_to_sexp(t: LTerm):
    match t:
        case Var():
            return str(t)
        case Const(name):
            return name
        case App(fn, args):
            return [fn, *(term_to_sexp(a) for a in args)]
    raise TypeError(t)


def formula_to_sexp(a: LFormula):
    match a:
        case Bot():
            return "bot"
        case Atom(p, args):
            return p if not args else [p, *(term_to_sexp(t) for t in args)]
        case And(l, r):
            return ["and", formula_to_sexp(l), formula_to_sexp(r)]
        case Or(l, r):
            return ["or", formula_to_sexp(l), formula_to_sexp(r)]
        case Imp(l, r):
            return ["imp", formula_to_sexp(l), formula_to_sexp(r)]
        case Forall(v, b):
            return ["forall", str(v), formula_to_sexp(b)]
        case Exists(v, b):
            return ["exists", str(v), formula_to_sexp(b)]
    raise TypeError(a)


def print_l(x) -> str:
    if isinstance(x, (Var, Const, App)):
        return write(term_to_sexp(x))
    return write(formula_to_sexp(x))


# ---------------------------------------------------------------------------
# Atomic bases


class BaseError(LangError):
    pass


class UnknownRule(BaseError):
    pass


class PremiseMismatch(BaseError):
    pass


class NonAtomicFormula(BaseError):
    pass


def _is_atomic(a: LFormula) -> bool:
    return isinstance(a, (Atom, Bot))


@dataclass(frozen=True)
class AtomicRule:
    premises: tuple
    conclusion: LFormula

    def __post_init__(self):
        for p in self.premises:
            if not isinstance(p, Atom):
                raise NonAtomicFormula(f"rule premise must be a non-absurd atom: {print_l(p)}")
        if not _is_atomic(self.conclusion):
            raise NonAtomicFormula(f"rule conclusion must be atomic: {print_l(self.conclusion)}")
        prem_vars = frozenset().union(*(free_vars_l(p) for p in self.premises)) if self.premises else frozenset()
        loose = free_vars_l(self.conclusion) - prem_vars
        if loose:
            raise BaseError(f"conclusion variables {sorted(map(str, loose))} not bound by any premise")


@dataclass(frozen=True)
class AtomicDerivation:
    conclusion: LFormula
    children: tuple = ()


def _match_term(pat: LTerm, t: LTerm, env: dict) -> bool:
    match pat:
        case Var():
            if pat in env:
                return env[pat] == t
            env[pat] = t
            return True
        case Const():
            return pat == t
        case App(fn, args):
            return (
                isinstance(t, App)
                and t.fn == fn
                and len(t.args) == len(args)
                and all(_match_term(p, s, env) for p, s in zip(args, t.args))
            )
    raise TypeError(pat)


def _match_atom(pat: LFormula, a: LFormula, env: dict) -> bool:
    if isinstance(pat, Bot) or isinstance(a, Bot):
        return pat == a
    return (
        isinstance(pat, Atom)
        and isinstance(a, Atom)
        and pat.pred == a.pred
        and len(pat.args) == len(a.args)
        and all(_match_term(p, t, env) for p, t in zip(pat.args, a.args))
    )


def _rule_applies(rule: AtomicRule, premises: tuple, conclusion: LFormula) -> bool:
    if len(rule.premises) != len(premises):
        return False
    env: dict = {}
    if not _match_atom(rule.conclusion, conclusion, env):
        return False
    return all(_match_atom(p, a, env) for p, a in zip(rule.premises, premises))


@dataclass(frozen=True)
class AtomicBase:
    constants: frozenset[str]
    relations: frozenset  # of (name, arity) pairs
    system: tuple
    named_derivations: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name, deriv in self.named_derivations.items():
            check_atomic_derivation(deriv, self)
            loose = _deriv_vars(deriv)
            if loose:
                raise BaseError(f"delta {name}: derivation contains variables {sorted(map(str, loose))}")

    def delta_type(self, name: str) -> LFormula:
        if name not in self.named_derivations:
            raise UnknownRule(f"unknown delta constant {name!r}")
        return self.named_derivations[name].conclusion

    def signature(self) -> Signature:
        sig = Signature(constants=set(self.constants), strict=True)
        for rel in self.relations:
            if isinstance(rel, tuple):
                sig.relations[rel[0]] = rel[1]
        return sig


def _deriv_vars(d: AtomicDerivation):
    out = set(free_vars_l(d.conclusion)) | set(bound_vars_l(d.conclusion))
    for c in d.children:
        out |= _deriv_vars(c)
    return out


def check_atomic_derivation(d: AtomicDerivation, base: AtomicBase) -> LFormula:
    """Verify every node instantiates a rule of the base; return the conclusion."""
    if not _is_atomic(d.conclusion):
        raise NonAtomicFormula(f"non-atomic conclusion {print_l(d.conclusion)}")
    child_concls = tuple(check_atomic_derivation(c, base) for c in d.children)
    for rule in base.system:
        if _rule_applies(rule, child_concls, d.conclusion):
            return d.conclusion
    if any(len(r.premises) == len(child_concls) and _match_atom(r.conclusion, d.conclusion, {}) for r in base.system):
        raise PremiseMismatch(f"no rule instance derives {print_l(d.conclusion)} from {[print_l(c) for c in child_concls]}")
    raise UnknownRule(f"no rule concludes {print_l(d.conclusion)} with {len(child_concls)} premises")


# Base files:
#   (base (constants c d ...)
#         (relations (P 1) ...)
#         (functions (f 2) ...)?
#         (rules (rule (premises F ...) (conclusion F)) ...)
#         (deltas (delta d1 (infer F <child>...)) ...))


def _clause(items: list, head: str):
    for it in items:
        if isinstance(it, list) and it and it[0] == head:
            return it[1:]
    return None


def _atomic_deriv_from_sexp(e, sig: Signature) -> AtomicDerivation:
    if not (isinstance(e, list) and e and e[0] == "infer" and len(e) >= 2):
        raise BaseError(f"bad atomic derivation {write(e)}")
    concl = formula_from_sexp(e[1], sig)
    return AtomicDerivation(concl, tuple(_atomic_deriv_from_sexp(c, sig) for c in e[2:]))


def base_from_sexp(e) -> AtomicBase:
    if not (isinstance(e, list) and e and e[0] == "base"):
        raise BaseError("base file must start with (base ...)")
    body = e[1:]
    sig = Signature()
    consts = _clause(body, "constants") or []
    sig.constants = set(consts)
    for decl in _clause(body, "relations") or []:
        if not (isinstance(decl, list) and len(decl) == 2 and isinstance(decl[1], int)):
            raise BaseError(f"bad relation declaration {write(decl)}")
        sig.relations[decl[0]] = decl[1]
    for decl in _clause(body, "functions") or []:
        if not (isinstance(decl, list) and len(decl) == 2 and isinstance(decl[1], int)):
            raise BaseError(f"bad function declaration {write(decl)}")
        sig.functions[decl[0]] = decl[1]
    sig.strict = True
    rules = []
    for r in _clause(body, "rules") or []:
        if not (isinstance(r, list) and r and r[0] == "rule"):
            raise BaseError(f"bad rule {write(r)}")
        prems = [formula_from_sexp(p, sig) for p in (_clause(r[1:], "premises") or [])]
        concl_clause = _clause(r[1:], "conclusion")
        if not concl_clause or len(concl_clause) != 1:
            raise BaseError(f"rule needs one conclusion: {write(r)}")
        rules.append(AtomicRule(tuple(prems), formula_from_sexp(concl_clause[0], sig)))
    deltas = {}
    for d in _clause(body, "deltas") or []:
        if not (isinstance(d, list) and len(d) == 3 and d[0] == "delta" and isinstance(d[1], str)):
            raise BaseError(f"bad delta declaration {write(d)}")
        deltas[d[1]] = _atomic_deriv_from_sexp(d[2], sig)
    return AtomicBase(
        constants=frozenset(sig.constants),
        relations=frozenset(sig.relations.items()),
        system=tuple(rules),
        named_derivations=deltas,
    )


def parse_base(text: str) -> AtomicBase:
    return base_from_sexp(read(text))


EMPTY_BASE = AtomicBase(frozenset(), frozenset(), ())
