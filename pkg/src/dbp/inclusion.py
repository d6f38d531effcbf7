"""Deciding denotational inclusion between limits.

⟦l1⟧ ⊆ ⟦l2⟧ reduces to a finite search.  Write stdf(l1) as
νx⃗.(⟨Γ1⟩ ∥ Q1 ∥ ∏ Bi^ω).  The fixed part νx⃗.(⟨Γ1⟩ ∥ Q1) only ever needs
|x⃗| + |Q1| + 1 unfoldings of l2 to land in (any embedding touches at most
that many copies, and copies of an iterated block are interchangeable), so
we extend l2 by m = 1, 2, ... up to that threshold and look for

  (A) an injective renaming σ of x⃗ into the extension's restricted names,
      together with an injection of Q1 into its calls, under which Γ1σ is
      derivable from the extension's knowledge, and

  (B) recursively, with each Bi stripped of one iteration layer:
      ⟦⟨Γ1⟩ ∥ ∏ Bi⟧σ ⊆ ⟦⟨Γ2⟩ ∥ R2⟧ where Γ2 and R2 are the knowledge and
      the residual iterated parts of the extension.  The matched names are
      free on both sides of the subproblem, so they pin exactly where the
      iterated parts must live.

The maximal ω-nesting depth drops by one per level, so the recursion
terminates.  A renaming that satisfies (A) can still fail (B); the search
then backtracks to the next renaming, and only after exhausting the
threshold does it answer "not included".

A successful search returns an InclusionWitness: the extension count, the
renaming and the call matching, one level per recursion step.  Witnesses
replay without any search, which is what certificate checking uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .calculus import (
    Sf,
    iter_knowledge_embeddings,
    knowledge_embedding,
    make_sf,
    standard_form,
)
from .intruder import closure
from .limits import all_names, extend, subst_sf
from .terms import App, FreshNames, Message, Name, subst

__all__ = [
    "InclusionWitness",
    "limit_included",
    "member",
    "downward_set_included",
    "replay_witness",
]


def _show(m: Message) -> str:
    if isinstance(m, Name):
        return m.text
    return f"{m.fn}({', '.join(_show(a) for a in m.args)})"


@dataclass(frozen=True)
class InclusionWitness:
    """One level of the inclusion proof.

    `extension` is the unfolding count of the right side, `names` the
    renaming σ as (left, right) pairs, `calls` the call matching as
    (left index, right index) pairs into the two sorted call tuples, and
    `sub` the witness for the iterated-part subproblem (None when the left
    side has no iterated parts).
    """

    extension: int
    names: tuple
    calls: tuple
    sub: Optional["InclusionWitness"]

    def renaming(self) -> dict:
        return dict(self.names)

    def describe(self) -> str:
        lines = []
        w, level = self, 0
        while w is not None:
            lines.append(f"level {level}: extension {w.extension}")
            for a, b in w.names:
                lines.append(f"  {a.text} -> {b.text}")
            for i, j in w.calls:
                lines.append(f"  call {i} -> call {j}")
            w, level = w.sub, level + 1
        return "\n".join(lines)

    def to_data(self) -> dict:
        return {
            "extension": self.extension,
            "names": [[a.text, b.text] for a, b in self.names],
            "calls": [list(p) for p in self.calls],
            "sub": self.sub.to_data() if self.sub is not None else None,
        }

    @staticmethod
    def from_data(d: dict) -> "InclusionWitness":
        sub = d.get("sub")
        return InclusionWitness(
            int(d["extension"]),
            tuple((Name(a), Name(b)) for a, b in d["names"]),
            tuple((int(i), int(j)) for i, j in d["calls"]),
            InclusionWitness.from_data(sub) if sub is not None else None,
        )


def _pairs(sigma: dict) -> tuple:
    return tuple(sorted(sigma.items(), key=lambda p: (p[0].text, p[1].text)))


def _fixed(sf: Sf) -> Sf:
    return Sf(sf.names, sf.knowledge, sf.calls, ())


def _peel(sf1: Sf, sigma: dict, ext2: Sf) -> Sf:
    """The left side of the iterated-part subproblem: the renamed knowledge
    next to every block with one iteration layer stripped.  Block binders
    are freshened against everything in sight so that they cannot collide
    with the extension's names, which are free from here on."""
    avoid = set(all_names(ext2)) | set(sigma.values()) | set(sf1.free_names)
    for b in sf1.blocks:
        # Everything bound strictly below a block's own top binders keeps
        # its scope, but stays avoided to keep distinct things distinct.
        avoid |= set(all_names(b)) - set(b.names)
    fresh = FreshNames(avoid)
    names: list = []
    knowledge = {subst(m, sigma) for m in sf1.knowledge}
    calls: list = []
    blocks: list = []
    for b in sf1.blocks:
        bb = subst_sf(b, sigma)
        ren: dict = {}
        for x in bb.names:
            nx = fresh.reserve(x)
            names.append(nx)
            if nx is not x:
                ren[x] = nx
        if ren:
            knowledge |= {subst(m, ren) for m in bb.knowledge}
            calls.extend(
                (nm, tuple(subst(a, ren) for a in args)) for nm, args in bb.calls
            )
            blocks.extend(subst_sf(ib, ren) for ib in bb.blocks)
        else:
            knowledge |= bb.knowledge
            calls.extend(bb.calls)
            blocks.extend(bb.blocks)
    return make_sf(names, knowledge, calls, blocks)


def _residual(ext2: Sf) -> Sf:
    """The right side of the subproblem: the extension's knowledge and its
    iterated parts.  The fixed calls are spent and the prefix names are
    free, already fixed by the renaming."""
    return make_sf((), ext2.knowledge, (), ext2.blocks)


def _trace(trace, level, m, sigma, stage, ok) -> None:
    if trace is not None:
        trace.append({
            "level": level,
            "m": m,
            "sigma": {a.text: b.text for a, b in sigma.items()},
            "stage": stage,
            "ok": ok,
        })


def _included(sf1, rhs, pin, trace, level, max_extension):
    thr = len(sf1.names) + len(sf1.calls) + 1
    if max_extension is not None:
        thr = min(thr, max_extension)
    if not rhs.blocks:
        # Extension changes nothing, one pass settles it.
        thr = min(thr, 1)
    lhs_fixed = _fixed(sf1)
    # Renamings only matter beyond the fixed part when there are iterated
    # parts to re-check under them.
    collapse = not sf1.blocks
    for m in range(1, thr + 1):
        ext2 = extend(rhs, m)
        ext2_fixed = _fixed(ext2)
        tried = set()
        for emb in iter_knowledge_embeddings(lhs_fixed, ext2_fixed, pin=pin,
                                             collapse_unconstrained=collapse):
            sigma = emb["names"]
            _trace(trace, level, m, sigma, "A", True)
            if not sf1.blocks:
                return InclusionWitness(m, _pairs(sigma), tuple(emb["calls"]), None)
            # (B) depends on σ alone; distinct call matchings with the same
            # renaming would just repeat it.
            key = tuple(sorted((a.text, b.text) for a, b in sigma.items()))
            if key in tried:
                continue
            tried.add(key)
            sub = _included(
                _peel(sf1, sigma, ext2), _residual(ext2),
                None, trace, level + 1, max_extension,
            )
            if sub is not None:
                return InclusionWitness(m, _pairs(sigma), tuple(emb["calls"]), sub)
            _trace(trace, level, m, sigma, "B", False)
    return None


def limit_included(l1, l2, *, pin: Optional[dict] = None, trace=None,
                   max_extension: Optional[int] = None) -> Optional[InclusionWitness]:
    """A witness that ⟦l1⟧ ⊆ ⟦l2⟧, or None.

    `pin` forces renaming choices at the top level (a test and debugging
    hook; pinned entries may also map free names, which incorporation
    uses).  `trace`, when given a list, receives one entry per condition
    checked: level, extension count, renaming, stage "A" or "B", outcome.

    `max_extension` caps the unfolding of the right side below the sound
    threshold.  A witness found under a cap is still a proof; None under a
    cap means "not shown", not "not included".
    """
    sf1 = l1 if isinstance(l1, Sf) else standard_form(l1)
    rhs = l2 if isinstance(l2, Sf) else standard_form(l2)
    return _included(sf1, rhs, pin, trace, 0, max_extension)


def member(p, l, *, extensions=None) -> bool:
    """Is the state p inside ⟦l⟧?  A state is a limit with no iterated
    parts, so this is inclusion with a trivial condition (B), and the
    extension's fixed part grows monotonically (earlier copies reappear
    verbatim), so searching once at the threshold decides it.

    With `extensions` the search runs at exactly those extension counts:
    a positive is still a genuine witness, but a negative only means "not
    found at these sizes".  Callers that screen many candidates cheaply
    before paying for an exact negative use this."""
    sf = p if isinstance(p, Sf) else standard_form(p)
    if sf.blocks:
        return limit_included(sf, l) is not None
    rhs = l if isinstance(l, Sf) else standard_form(l)
    if extensions is None:
        thr = len(sf.names) + len(sf.calls) + 1 if rhs.blocks else 1
        # A small extension catches nearly every positive cheaply; the
        # full threshold is only paid when it must be.
        steps = [2, thr] if thr > 2 else [thr]
    else:
        steps = [m if rhs.blocks else min(m, 1) for m in extensions]
    for m in steps:
        ext2 = extend(rhs, m)
        if knowledge_embedding(_fixed(sf), _fixed(ext2)) is not None:
            return True
    return False


def downward_set_included(d1, d2) -> bool:
    """⋃⟦d1⟧ ⊆ ⋃⟦d2⟧, checked limit by limit: every member of d1 must be
    included in a single member of d2.  Sound but not complete for unions;
    the invariant machinery only ever needs this directed form."""
    return all(
        any(limit_included(l1, l2) is not None for l2 in d2) for l1 in d1
    )


def replay_witness(l1, l2, w: Optional[InclusionWitness]) -> bool:
    """Check a witness without searching: every level must present a valid
    injective renaming, a complete call matching, and derivable knowledge
    images, and the level structure must mirror the iterated parts."""
    sf1 = l1 if isinstance(l1, Sf) else standard_form(l1)
    rhs = l2 if isinstance(l2, Sf) else standard_form(l2)
    while True:
        if w is None or w.extension < 1:
            return False
        ext2 = extend(rhs, w.extension)
        sigma = dict(w.names)
        targets = list(sigma.values())
        if len(set(targets)) != len(targets):
            return False
        bound1, bound2 = set(sf1.names), set(ext2.names)
        if any(x not in sigma for x in bound1):
            return False
        if any(x in bound1 and sigma[x] not in bound2 for x in sigma):
            return False
        lhs_fixed = _fixed(sf1)
        if any(f in bound2 and f not in sigma for f in lhs_fixed.free_names):
            return False
        calls1, calls2 = sf1.calls, ext2.calls
        if sorted(i for i, _ in w.calls) != list(range(len(calls1))):
            return False
        js = [j for _, j in w.calls]
        if len(set(js)) != len(js):
            return False
        if any(j < 0 or j >= len(calls2) for j in js):
            return False
        for i, j in w.calls:
            n1, a1 = calls1[i]
            n2, a2 = calls2[j]
            if n1 != n2 or len(a1) != len(a2):
                return False
            if tuple(subst(a, sigma) for a in a1) != tuple(a2):
                return False
        cl2 = closure(ext2.knowledge)
        if not all(cl2.synthesizable(subst(m, sigma)) for m in sf1.knowledge):
            return False
        if not sf1.blocks:
            return w.sub is None
        if w.sub is None:
            return False
        sf1, rhs, w = _peel(sf1, sigma, ext2), _residual(ext2), w.sub
