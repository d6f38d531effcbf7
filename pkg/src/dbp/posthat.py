"""One-step successor limits.

A limit denotes a downward-closed set of states.  One transition of any
member only ever consumes calls and knowledge from finitely many copies of
the iterated parts: an input pattern binds at most β names, each standing
for a message of size at most γ^(s-1) leaves, so b = β·γ^(s-1) + 1 copies
are always enough.  posthat therefore extends the limit by b, runs the
ω-free reduction semantics on the extension's fixed part, and reattaches
the untouched iterated parts to every successor.  The union of the emitted
limits covers the downward closure of everything reachable in one step
from the input's denotation.

Names referenced by the iterated parts are kept free during the successor
computation and rebound in the emitted limit.  That keeps them textually
pinned, so the ≡k-dedup of successors can never merge two states that the
iterated parts would tell apart.

Emitted siblings that embed into one another with the identity renaming
are pruned; the shared iterated part makes that sound, and it keeps the
follow-up inclusion checks small.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .calculus import (
    Budget,
    Sf,
    canonical_key,
    make_sf,
    pattern_arity_weight,
    standard_form,
    successors,
)
from .intruder import closure
from .limits import all_names, extend, limit_nesting

__all__ = ["PosthatResult", "extension_bound", "posthat"]


def extension_bound(defs, s: int, ty: Optional[dict] = None, *,
                    uncapped: bool = False) -> int:
    """The unfolding count that exposes every one-step redex: the worst
    pattern weight over all definitions, plus one.  With `uncapped` the
    typing is ignored and every binder counts at its full γ^(s-1) weight,
    which is the safe bound with no size assumptions on received names."""
    if not defs:
        return 1
    eff_ty = {} if uncapped else (ty or {})
    return max(pattern_arity_weight(d, s, eff_ty) for d in defs.values()) + 1


@dataclass(frozen=True)
class PosthatResult:
    """Successor limits with the parameters that produced them.

    `ty_pruning` lists the (definition, branch index, binder, bound) sites
    where the typing caps candidate enumeration below the global size
    bound, i.e. where the size assumption is load-bearing.
    `depth_violations` indexes successors whose restriction nesting
    exceeds the depth budget, when one was given.
    """

    successors: tuple
    b: int
    s: int
    ty: tuple
    ty_pruning: tuple = ()
    depth_violations: tuple = ()


def _identity_subsumed(qi: Sf, qj: Sf, clj) -> bool:
    """qi ⊑k qj without renaming: every restricted name, call, and piece of
    knowledge of qi is already in qj.  Sound sibling pruning because both
    successors carry the same iterated part."""
    if not set(qi.names) <= set(qj.names):
        return False
    if Counter(qi.calls) - Counter(qj.calls):
        return False
    return all(clj.synthesizable(m) for m in qi.knowledge)


def _prune_siblings(pairs: list) -> list:
    if len(pairs) <= 1:
        return pairs
    states = [q for _, q in pairs]
    closures = [closure(q.knowledge) for q in states]
    keys = [canonical_key(q) for q in states]
    keep = []
    for i, qi in enumerate(states):
        dominated = False
        for j, qj in enumerate(states):
            if i == j:
                continue
            if _identity_subsumed(qi, qj, closures[j]):
                # Mutual identity-subsumption would drop both; keep the
                # canonically first one.
                if _identity_subsumed(qj, qi, closures[i]) and \
                        (keys[i], i) < (keys[j], j):
                    continue
                dominated = True
                break
        if not dominated:
            keep.append(pairs[i])
    return keep


def _typing_prune_sites(defs, s: int, ty: dict) -> tuple:
    sites = []
    for dname in sorted(defs):
        for bi, br in enumerate(defs[dname].branches):
            if br.kind != "in":
                continue
            for x in br.binders:
                bound = ty.get(x.text, s)
                if bound < s:
                    sites.append((dname, bi, x.text, bound))
    return tuple(sites)


def posthat(l, defs, s: int, ty: Optional[dict] = None, *,
            uncapped: bool = False, budget: Optional[Budget] = None,
            depth_budget: Optional[int] = None,
            dedup: str = "congruent") -> PosthatResult:
    """All one-step successor limits of l under defs within Size_s.

    Model errors from the reduction semantics propagate; budget exhaustion
    raises BudgetExhausted.
    """
    ty = ty or {}
    sf = l if isinstance(l, Sf) else standard_form(l)
    b = extension_bound(defs, s, ty, uncapped=uncapped)
    ext = extend(sf, b)
    r_blocks = ext.blocks
    free_r: set = set()
    for bl in r_blocks:
        free_r |= set(bl.free_names)
    fixed_names = tuple(n for n in ext.names if n not in free_r)
    fixed = make_sf(fixed_names, ext.knowledge, ext.calls,
                    keep_names=fixed_names)
    raw = successors(fixed, defs, s, ty, avoid=all_names(ext),
                     budget=budget, dedup=dedup)
    ext_names = set(ext.names)
    emitted = []
    for lab, q in raw:
        q_names = set(q.names)
        names = [n for n in ext.names if n in free_r or n in q_names]
        names += [n for n in q.names if n not in ext_names]
        emitted.append((lab, make_sf(names, q.knowledge, q.calls, r_blocks)))
    emitted = _prune_siblings(emitted)
    violations = ()
    if depth_budget is not None:
        violations = tuple(
            i for i, (_, li) in enumerate(emitted)
            if limit_nesting(li) > depth_budget
        )
    return PosthatResult(
        successors=tuple(emitted),
        b=b,
        s=s,
        ty=tuple(sorted(ty.items())),
        ty_pruning=_typing_prune_sites(defs, s, ty),
        depth_violations=violations,
    )
