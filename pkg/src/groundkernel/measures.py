"""Double measure for maximal formulas and the degree of a derivation.

A formula is measured by the pair (type-measure, logical measure): the
type-measure is the largest background complexity among the types stated
by its denotation atoms, the logical measure counts its own connective
nesting.  Pairs compare lexicographically.  The degree of a derivation
pairs the largest measure among its cut-segments with the summed length
of the segments attaining it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .formulas import BotG, Eps, Equiv, GFormula, Gr, Pi, Plus, Sup, Times
from .kernel import Derivation
from .lang import k1


@dataclass(frozen=True, order=True)
class Measure:
    tau: int
    k2: int

    def as_sexp(self):
        return [self.tau, self.k2]


@dataclass(frozen=True, order=True)
class Degree:
    max_measure: Measure
    total_length: int

    def as_sexp(self):
        return [self.max_measure.as_sexp(), self.total_length]

    @property
    def normal(self) -> bool:
        return self == Degree(Measure(0, 0), 0)


@lru_cache(maxsize=None)
def k2(a: GFormula) -> int:
    match a:
        case Gr() | Equiv() | BotG():
            return 0
        case Times(l, r) | Plus(l, r) | Sup(l, r):
            return max(k2(l), k2(r)) + 1
        case Pi(_, b) | Eps(_, b):
            return k2(b) + 1
    raise TypeError(a)


@lru_cache(maxsize=None)
def type_set(a: GFormula) -> frozenset[int]:
    """Background complexities of the types stated by denotation atoms."""
    match a:
        case Gr(_, ty):
            return frozenset((k1(ty),))
        case Equiv() | BotG():
            return frozenset()
        case Times(l, r) | Plus(l, r) | Sup(l, r):
            return type_set(l) | type_set(r)
        case Pi(_, b) | Eps(_, b):
            return type_set(b)
    raise TypeError(a)


def tau(a: GFormula) -> int:
    return max(type_set(a), default=0)


def mu(a: GFormula) -> Measure:
    return Measure(tau(a), k2(a))


# ---------------------------------------------------------------------------
# Cut-segments

TYPE_INTRO_ELIM = {
    "andI": "case-and",
    "orI": "case-or",
    "impI": "case-imp",
    "forallI": "case-forall",
    "existsI": "case-exists",
}

LOGIC_INTRO_ELIM = {
    "timesI": ("timesE-1", "timesE-2"),
    "plusI-1": ("plusE",),
    "plusI-2": ("plusE",),
    "supI": ("supE",),
    "PiI": ("PiE",),
    "EpsI": ("EpsE",),
}

# premise positions whose conclusion the parent node repeats
_PASSTHROUGH = {
    "plusE": (1, 2),
    "EpsE": (1,),
    "case-and": (1,),
    "case-or": (1, 2),
    "case-imp": (1,),
    "case-forall": (1,),
    "case-exists": (1,),
}


@dataclass(frozen=True)
class CutSegment:
    nodes: tuple  # paths of the occurrence-carrying nodes, upper edge first
    formula: GFormula
    kind: str  # "tmf" | "lmf"

    @property
    def length(self) -> int:
        return len(self.nodes)

    @property
    def upper(self) -> tuple:
        return self.nodes[0]

    @property
    def lower(self) -> tuple:
        return self.nodes[-1]


def node_at(d: Derivation, path: tuple) -> Derivation:
    for i in path:
        d = d.premises[i]
    return d


def iter_nodes(d: Derivation, path: tuple = ()):
    yield path, d
    for i, p in enumerate(d.premises):
        yield from iter_nodes(p, path + (i,))


def find_cut_segments(d: Derivation) -> list[CutSegment]:
    """All cut-segments: chains from an introduction conclusion, through
    minor-premise repetitions, to the matching elimination's major premise."""
    out = []
    for path, node in iter_nodes(d):
        kind = None
        if node.rule in TYPE_INTRO_ELIM:
            kind, elims = "tmf", (TYPE_INTRO_ELIM[node.rule],)
        elif node.rule in LOGIC_INTRO_ELIM:
            kind, elims = "lmf", LOGIC_INTRO_ELIM[node.rule]
        if kind is None:
            continue
        chain = [path]
        cur = path
        while cur:
            parent_path, idx = cur[:-1], cur[-1]
            parent = node_at(d, parent_path)
            if idx == 0 and parent.rule in elims:
                out.append(CutSegment(tuple(chain), node.concl, kind))
                break
            if idx in _PASSTHROUGH.get(parent.rule, ()):
                chain.append(parent_path)
                cur = parent_path
                continue
            break
    out.sort(key=lambda s: s.nodes)
    return out


def degree(d: Derivation) -> Degree:
    segs = find_cut_segments(d)
    if not segs:
        return Degree(Measure(0, 0), 0)
    mx = max(mu(s.formula) for s in segs)
    n = sum(s.length for s in segs if mu(s.formula) == mx)
    return Degree(mx, n)
