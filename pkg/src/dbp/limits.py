"""Limits: ω-iterated standard forms, their groundings and extensions.

A limit denotes the downward closure (under knowledge embedding) of the set
of its groundings: ``ground(l, n)`` unfolds every ω-block into n copies,
recursively.  ``extend(l, n)`` adds n unfolded copies next to each ω-block
but keeps the block, so the denotation is unchanged; extensions are what the
inclusion check and the post-image operator work on.

Copies are renamed deterministically by their position: copy i of block bi
renames a bound name x to ``x.bi.i`` (nested copies accumulate suffixes).
The naming only depends on the position, so the copies of ``extend(l, n)``
reappear verbatim inside ``extend(l, n + c)``; the invariant-checking
shortcut in `invariants.incorporate` relies on this.
"""

from __future__ import annotations

from typing import Optional

from .calculus import Sf, call_key, make_sf, standard_form
from .terms import Name, subst

__all__ = [
    "ground",
    "extend",
    "extend_with_origins",
    "subst_sf",
    "limit_standard_form",
    "limit_nesting",
    "all_names",
]

limit_standard_form = standard_form


def limit_nesting(l: Sf) -> int:
    """nestν of the representative: prefix length plus deepest block."""
    return l.nesting()


def all_names(l: Sf) -> frozenset:
    """Every name occurring in the limit, bound or free."""
    acc = set(l.free_names)
    _bound(l, acc)
    return frozenset(acc)


def _bound(l: Sf, acc: set) -> None:
    acc.update(l.names)
    for b in l.blocks:
        _bound(b, acc)


def subst_sf(sf: Sf, mapping: dict) -> Sf:
    """Apply a name mapping to every position, including the prefix.
    Nested binders shadow outer keys.  Block order is preserved, so the
    result's blocks correspond position by position to the input's; the
    copy-origin bookkeeping below depends on that."""
    if not mapping:
        return sf
    inner = {k: v for k, v in mapping.items() if k not in sf.names}
    names = tuple(mapping.get(n, n) for n in sf.names)
    knowledge = frozenset(subst(m, inner) for m in sf.knowledge)
    calls = tuple(sorted(
        ((c, tuple(subst(a, inner) for a in args)) for c, args in sf.calls),
        key=call_key))
    blocks = tuple(subst_sf(b, inner) for b in sf.blocks)
    return Sf(names, knowledge, calls, blocks)


def _copy_name(x: Name, path: tuple, avoid: set) -> Name:
    text = x.text + "." + ".".join(str(p) for p in path)
    while text in avoid:
        text += ".c"
    return Name(text)


def _unfold(sf: Sf, n: int, keep: bool, avoid: set, path: tuple,
            origins: Optional[dict] = None) -> Sf:
    names = list(sf.names)
    knowledge = set(sf.knowledge)
    calls = list(sf.calls)
    blocks: list = []
    for bi, b in enumerate(sf.blocks):
        if keep:
            blocks.append(b)
        for i in range(1, n + 1):
            pstr = path + (bi, i)
            ren = {x: _copy_name(x, pstr, avoid) for x in b.names}
            if origins is not None:
                # Block positions in `path` sit at the even offsets (copy
                # counters at the odd ones).  Since renaming preserves block
                # order, those positions index the original limit's blocks,
                # and the binder in a copied block is still the original
                # binder: only unfolding renames binders.
                lpath = pstr[0::2]
                for x in b.names:
                    origins[ren[x]] = (lpath, x)
            # rename the copy's own binders and their occurrences; inner
            # blocks go through subst_sf, which respects shadowing
            copy = Sf(
                tuple(ren[x] for x in b.names),
                frozenset(subst(m, ren) for m in b.knowledge),
                tuple((c, tuple(subst(a, ren) for a in args)) for c, args in b.calls),
                tuple(subst_sf(b2, ren) for b2 in b.blocks),
            )
            sub = _unfold(copy, n, keep, avoid, pstr, origins)
            names += list(sub.names)
            knowledge |= sub.knowledge
            calls += list(sub.calls)
            blocks += list(sub.blocks)
    return Sf(tuple(names), frozenset(knowledge), tuple(calls), tuple(blocks))


def ground(l: Sf, n: int) -> Sf:
    """⌊l⌋n: every ω-block becomes n recursively grounded copies."""
    g = _unfold(l, n, False, {t.text for t in all_names(l)}, ())
    return make_sf(g.names, g.knowledge, g.calls)


def extend(l: Sf, n: int) -> Sf:
    """l↑n: n unfolded copies alongside each kept ω-block; same denotation."""
    g = _unfold(l, n, True, {t.text for t in all_names(l)}, ())
    return make_sf(g.names, g.knowledge, g.calls, g.blocks, keep_names=g.names)


def extend_with_origins(l: Sf, n: int) -> tuple:
    """extend(l, n) next to a map from each copy name to its provenance.

    The provenance of a copy name is ``(lpath, binder)``: ``lpath`` indexes
    the chain of blocks of ``l`` whose unfolding produced the copy (one
    block index per nesting level), ``binder`` is the restricted name of
    ``l`` it renames.  The widening uses this to attach a difference back
    at the block its names came from."""
    origins: dict = {}
    g = _unfold(l, n, True, {t.text for t in all_names(l)}, (), origins)
    return make_sf(g.names, g.knowledge, g.calls, g.blocks, keep_names=g.names), origins
