"""Proof kernel for Gentzen-style grounding calculi.

Background language and atomic bases (`lang`), ground terms and formulas
with their substitution calculus (`terms`, `formulas`), the derivation
checker (`kernel`), the double measure (`measures`), the normalizer
(`normalizer`), the theorem builders and extension registry (`theory`),
and file parsing (`reader`).
"""

from .lang import AtomicBase, AtomicDerivation, AtomicRule, EMPTY_BASE, check_atomic_derivation, k1, l_subst, parse_base, parse_l
from .terms import canonical, free_vars, is_gen, subst_f, subst_h, subst_ind, subst_typed, type_of
from .formulas import free_vars_g, gr, subst_formula
from .kernel import CheckReport, Derivation, alpha_eq, assume, atomize_botG, check, open_assumptions, rename_apart
from .measures import Degree, Measure, degree, find_cut_segments, k2, mu, tau
from .normalizer import normalize, permute, reduce_lmf, reduce_tmf, select_trmcs
from .theory import (
    EMPTY_REGISTRY,
    ExtensionRegistry,
    OpSymbol,
    RewriteRule,
    build_ground_clause,
    build_rewritability,
    build_well_definedness,
    register_extension,
    synthesize_typing,
    worked_extension,
)
from .reader import Reader, print_derivation

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
