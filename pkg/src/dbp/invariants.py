"""Inductive invariants: checking, incorporation, widening, inference.

An invariant is a finite family of limits whose union is meant to be closed
under one reduction step: every successor limit of every member must denote
a subset of some member.  `check_inductive` establishes that and returns
receipts that replay without search; `infer_invariant` grows a candidate
from the initial process, widening each uncovered successor back into the
limit it escaped from until the check closes or the budget runs out.

The widening works on the identity difference between a successor and the
extension it was computed from: whatever the transition added beyond the
extension's fixed part is grouped into connected components, renamed from
copy names back to the binders they unfolded from, and attached as a new
ω-block at the deepest block those binders live in.  Differences that touch
no copied binder attach at the top.  When that produces nothing new, the
successor is merged in wholesale by parallel composition, which always
covers it but gives up structure.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .calculus import (
    Budget,
    BudgetExhausted,
    CallP,
    Label,
    ModelError,
    Sf,
    call_key,
    canonical_key,
    knowledge_embedding,
    make_sf,
    standard_form,
)
from .inclusion import InclusionWitness, limit_included, replay_witness
from .intruder import closure
from .limits import all_names, extend, extend_with_origins, limit_nesting, subst_sf
from .posthat import posthat
from .terms import App, FreshNames, Message, Name, msg_key, subst

__all__ = [
    "Invariant",
    "Coverage",
    "Membership",
    "CertificateCore",
    "Certificate",
    "Uncovered",
    "check_inductive",
    "incorporate",
    "widen",
    "infer_invariant",
    "replay_certificate",
]


# ---------------------------------------------------------------------------
# Types.
# ---------------------------------------------------------------------------


def _ty_tuple(ty) -> tuple:
    if ty is None:
        return ()
    if isinstance(ty, dict):
        return tuple(sorted((str(t), int(n)) for t, n in ty.items()))
    return tuple(sorted((str(t), int(n)) for t, n in ty))


@dataclass(frozen=True)
class Invariant:
    """A candidate or certified invariant: limits plus the problem bounds."""

    limits: tuple  # of Sf
    s: int
    ty: tuple = ()  # sorted ((binder text, size), ...)

    def __post_init__(self):
        if not self.limits:
            raise ModelError("an invariant needs at least one limit")

    @property
    def k(self) -> int:
        """Depth budget: the deepest nesting among the member limits."""
        return max(limit_nesting(l) for l in self.limits)

    def typing(self) -> dict:
        return dict(self.ty)


@dataclass(frozen=True)
class Coverage:
    """Receipt that one successor of one member limit stays inside the
    invariant.  `mode` "incorporation" carries the pinned embedding into an
    `extension`-fold unfolding of the source limit itself; "inclusion"
    carries a full inclusion witness against limit `target`."""

    source: int
    successor: str  # canonical key of the successor limit
    label: str
    mode: str
    target: int
    extension: int = 0
    names: tuple = ()  # ((Name, Name), ...) for incorporation
    calls: tuple = ()  # ((i, j), ...) for incorporation
    witness: Optional[InclusionWitness] = None


@dataclass(frozen=True)
class Membership:
    """Receipt that the initial process belongs to limit `target`."""

    target: int
    extension: int = 0
    names: tuple = ()
    calls: tuple = ()
    witness: Optional[InclusionWitness] = None


@dataclass(frozen=True)
class CertificateCore:
    """The inductiveness part of a certificate: per-limit extension bounds
    and one coverage receipt per emitted successor."""

    bounds: tuple
    coverage: tuple
    uncapped: bool = False

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Uncovered:
    """Failure report: the first successor no member limit covers."""

    source: int
    bound: int
    label: Label
    successor: Sf

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        return (f"successor of limit {self.source} escapes the invariant: "
                f"{self.label.describe()}")


@dataclass(frozen=True)
class Certificate:
    """Everything needed to re-establish the verdict without search."""

    invariant: Invariant
    membership: Membership
    core: CertificateCore
    verdicts: tuple = ()  # ((property, verdict, detail), ...)

    VERSION = 1

    def to_data(self) -> dict:
        inv = self.invariant
        return {
            "format": "dbp-certificate",
            "version": self.VERSION,
            "s": inv.s,
            "ty": [[t, n] for t, n in inv.ty],
            "limits": [_sf_data(l) for l in inv.limits],
            "membership": {
                "target": self.membership.target,
                "extension": self.membership.extension,
                "names": [[p.text, q.text] for p, q in self.membership.names],
                "calls": [list(c) for c in self.membership.calls],
                "witness": (self.membership.witness.to_data()
                            if self.membership.witness is not None else None),
            },
            "bounds": list(self.core.bounds),
            "uncapped": self.core.uncapped,
            "coverage": [{
                "source": r.source,
                "successor": r.successor,
                "label": r.label,
                "mode": r.mode,
                "target": r.target,
                "extension": r.extension,
                "names": [[p.text, q.text] for p, q in r.names],
                "calls": [list(c) for c in r.calls],
                "witness": r.witness.to_data() if r.witness is not None else None,
            } for r in self.core.coverage],
            "verdicts": [list(v) for v in self.verdicts],
        }

    @staticmethod
    def from_data(d: dict) -> "Certificate":
        if d.get("format") != "dbp-certificate":
            raise ModelError("not a certificate")
        if d.get("version") != Certificate.VERSION:
            raise ModelError(f"unsupported certificate version {d.get('version')!r}")
        inv = Invariant(tuple(_sf_from(x) for x in d["limits"]), int(d["s"]),
                        _ty_tuple([tuple(p) for p in d["ty"]]))
        m = d["membership"]
        membership = Membership(
            int(m["target"]), int(m["extension"]),
            tuple((Name(p), Name(q)) for p, q in m["names"]),
            tuple((int(i), int(j)) for i, j in m["calls"]),
            InclusionWitness.from_data(m["witness"]) if m["witness"] else None,
        )
        coverage = tuple(Coverage(
            int(r["source"]), str(r["successor"]), str(r["label"]),
            str(r["mode"]), int(r["target"]), int(r["extension"]),
            tuple((Name(p), Name(q)) for p, q in r["names"]),
            tuple((int(i), int(j)) for i, j in r["calls"]),
            InclusionWitness.from_data(r["witness"]) if r["witness"] else None,
        ) for r in d["coverage"])
        core = CertificateCore(tuple(int(b) for b in d["bounds"]), coverage,
                               bool(d.get("uncapped", False)))
        verdicts = tuple(tuple(v) for v in d.get("verdicts", []))
        return Certificate(inv, membership, core, verdicts)


def _msg_data(m: Message):
    if isinstance(m, Name):
        return m.text
    return [m.fn, [_msg_data(a) for a in m.args]]


def _msg_from(d) -> Message:
    if isinstance(d, str):
        return Name(d)
    fn, args = d
    return App(str(fn), tuple(_msg_from(a) for a in args))


def _sf_data(sf: Sf) -> dict:
    return {
        "names": [n.text for n in sf.names],
        "knowledge": [_msg_data(m) for m in sorted(sf.knowledge, key=msg_key)],
        "calls": [[n, [_msg_data(a) for a in args]] for n, args in sf.calls],
        "blocks": [_sf_data(b) for b in sf.blocks],
    }


def _sf_from(d: dict) -> Sf:
    return Sf(
        tuple(Name(t) for t in d["names"]),
        frozenset(_msg_from(m) for m in d["knowledge"]),
        tuple((str(n), tuple(_msg_from(a) for a in args)) for n, args in d["calls"]),
        tuple(_sf_from(b) for b in d["blocks"]),
    )


# ---------------------------------------------------------------------------
# Incorporation.
# ---------------------------------------------------------------------------


def _fixed(sf: Sf) -> Sf:
    return Sf(sf.names, sf.knowledge, sf.calls, ())


def _name_pairs(sigma: dict) -> tuple:
    return tuple(sorted(sigma.items(), key=lambda p: (p[0].text, p[1].text)))


def _incorporation(succ: Sf, host: Sf, b: int, rounds: int = 3,
                   ext_at=None) -> Optional[tuple]:
    """Try to embed the successor into an unfolding of its own source limit,
    keeping every name the successor shares with the extension fixed.  The
    pinning makes the iterated parts line up by themselves: the successor
    carries the extension's blocks verbatim, so an embedding of the fixed
    part extends to the whole limit.  Returns (extension count, embedding)
    or None; None means "run the full inclusion", not "not included"."""
    get = ext_at if ext_at is not None else (lambda n: extend(host, n))
    base_names = set(get(b).names)
    succ_names = set(succ.names)
    block_free = set()
    for bl in succ.blocks:
        block_free |= set(bl.free_names)
    # The shared-context argument needs the iterated parts' free names kept
    # literally; a block depending on a genuinely fresh name cannot be
    # incorporated.
    if any(f in succ_names and f not in base_names for f in block_free):
        return None
    pin = {x: x for x in succ.names if x in base_names}
    blocks_needed = Counter(succ.blocks)
    for n in range(b, b + rounds + 1):
        ext = get(n)
        if blocks_needed - Counter(ext.blocks):
            continue
        wit = knowledge_embedding(_fixed(succ), _fixed(ext), pin=pin)
        if wit is not None:
            return n, wit
    return None


def incorporate(l, redex, continuation, *, b: int = 1, rounds: int = 3) -> bool:
    """Sufficient check that replacing one `redex` occurrence of the limit's
    b-extension by `continuation` stays inside the limit.  False only means
    the shortcut failed and a full inclusion check is needed."""
    lsf = l if isinstance(l, Sf) else standard_form(l)
    if isinstance(redex, CallP):
        redex = (redex.name, tuple(redex.args))
    name, args = redex
    redex = (str(name), tuple(args))
    b = max(1, b)
    ext = extend(lsf, b)
    calls = list(ext.calls)
    if redex not in calls:
        raise ModelError(f"redex {redex[0]} not exposed by the {b}-extension")
    calls.remove(redex)
    csf = standard_form(continuation, avoid=all_names(ext))
    combined = Sf(
        tuple(ext.names) + tuple(csf.names),
        ext.knowledge | csf.knowledge,
        tuple(sorted(calls + list(csf.calls), key=call_key)),
        ext.blocks + csf.blocks,
    )
    return _incorporation(combined, lsf, b, rounds=rounds) is not None


# ---------------------------------------------------------------------------
# Inductiveness.
# ---------------------------------------------------------------------------


def check_inductive(inv: Invariant, defs: dict, *, budget: Optional[Budget] = None,
                    uncapped: bool = False, rounds: int = 3):
    """Certificate core if every successor of every member limit stays in
    some member, else the first Uncovered successor.  Tries the incorporation
    shortcut against the source limit first, then full inclusion against
    every member.  Budget exhaustion raises BudgetExhausted."""
    budget = budget if budget is not None else Budget()
    ty = inv.typing()
    bounds = []
    rows = []
    for si, host in enumerate(inv.limits):
        r = posthat(host, defs, inv.s, ty, uncapped=uncapped, budget=budget)
        bounds.append(r.b)
        ext_cache: dict = {}

        def ext_at(n, _host=host, _cache=ext_cache):
            got = _cache.get(n)
            if got is None:
                got = _cache[n] = extend(_host, n)
            return got

        targets = [si] + [t for t in range(len(inv.limits)) if t != si]
        for lab, succ in r.successors:
            key = canonical_key(succ)
            rec = _incorporation(succ, host, r.b, rounds=rounds, ext_at=ext_at)
            if rec is not None:
                n, wit = rec
                rows.append(Coverage(si, key, lab.describe(), "incorporation",
                                     si, n, _name_pairs(wit["names"]),
                                     tuple(wit["calls"])))
                continue
            row = None
            for t in targets:
                w = limit_included(succ, inv.limits[t])
                if w is not None:
                    row = Coverage(si, key, lab.describe(), "inclusion", t,
                                   w.extension, witness=w)
                    break
            if row is None:
                return Uncovered(si, r.b, lab, succ)
            rows.append(row)
    return CertificateCore(tuple(bounds), tuple(rows), uncapped)


# ---------------------------------------------------------------------------
# Widening.
# ---------------------------------------------------------------------------


def widen(p1, p2, host=None, *, witness: Optional[dict] = None):
    """Accelerate the difference between two trace states: p2 presented as
    νx⃗.(⟨Γ⟩ ∥ Q ∥ P) against an embedding image of p1 ≅ νx⃗.(⟨Γ⟩ ∥ Q)
    becomes νx⃗.(⟨Γ⟩ ∥ Q ∥ P^ω).  Both states belong to the result.  With a
    host limit the difference block is added at the host's top level; equal
    states leave the host unchanged."""
    sp1 = p1 if isinstance(p1, Sf) else standard_form(p1)
    sp2 = p2 if isinstance(p2, Sf) else standard_form(p2)
    if sp1.blocks or sp2.blocks:
        raise ModelError("widen expects ω-free trace states")
    wit = witness if witness is not None else \
        knowledge_embedding(_fixed(sp1), _fixed(sp2))
    if wit is None:
        raise ModelError("the first state does not embed into the second")
    sigma = wit["names"]
    image_names = set(sigma.values())
    matched = {j for _, j in wit["calls"]}
    rest_calls = tuple(c for j, c in enumerate(sp2.calls) if j not in matched)
    cl = closure(frozenset(subst(m, sigma) for m in sp1.knowledge))
    rest_know = frozenset(m for m in sp2.knowledge if not cl.synthesizable(m))
    rest_names = tuple(x for x in sp2.names if x not in image_names)
    if not rest_calls and not rest_know and not rest_names:
        return host if host is not None else sp2
    block = make_sf(rest_names, rest_know, rest_calls)
    if host is None:
        ctx_names = tuple(x for x in sp2.names if x not in set(block.names))
        return make_sf(ctx_names, sp2.knowledge - rest_know,
                       tuple(c for j, c in enumerate(sp2.calls) if j in matched),
                       (block,), keep_names=ctx_names)
    hsf = host if isinstance(host, Sf) else standard_form(host)
    if not set(block.free_names) <= set(hsf.names) | hsf.free_names:
        raise ModelError("difference mentions names not visible at the host's top")
    taken = all_names(hsf)
    if any(x in taken for x in block.names):
        f = FreshNames(taken)
        f.avoid_also(all_names(block))
        block = subst_sf(block, {x: f.fresh(x) for x in block.names
                                 if x in taken})
    if canonical_key(block) in {canonical_key(b) for b in hsf.blocks}:
        return hsf
    return make_sf(hsf.names, hsf.knowledge, hsf.calls, hsf.blocks + (block,),
                   keep_names=hsf.names)


def _components(new_names: list, new_know: list, new_calls: list) -> list:
    """Split the difference into pieces connected by shared new names.
    Items touching no new name become singleton pieces."""
    idx = {x: i for i, x in enumerate(new_names)}
    parent = list(range(len(new_names)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    items = [(m.names, ("k", m)) for m in new_know]
    items += [(frozenset().union(*(a.names for a in args)) if args else frozenset(),
               ("c", (n, args))) for n, args in new_calls]
    for nm, _ in items:
        touched = [idx[x] for x in nm if x in idx]
        for i in touched[1:]:
            parent[find(touched[0])] = find(i)
    groups: dict = {}
    order: list = []
    for pos, (nm, tagged) in enumerate(items):
        touched = [idx[x] for x in nm if x in idx]
        gid = ("root", find(touched[0])) if touched else ("single", pos)
        if gid not in groups:
            groups[gid] = ([], [], [])
            order.append(gid)
        kind, item = tagged
        (groups[gid][1] if kind == "k" else groups[gid][2]).append(item)
    for x in new_names:
        gid = ("root", find(idx[x]))
        if gid in groups:
            groups[gid][0].append(x)
    return [groups[g] for g in order]


def _block_at(l: Sf, path: tuple) -> Sf:
    for j in path:
        l = l.blocks[j]
    return l


def _graft(sf: Sf, merges: dict, additions: dict, path: tuple = ()) -> Sf:
    blocks = [_graft(b, merges, additions, path + (j,))
              for j, b in enumerate(sf.blocks)]
    have = {canonical_key(b) for b in blocks}
    for bl in additions.get(path, ()):
        k2 = canonical_key(bl)
        if k2 not in have:
            blocks.append(bl)
            have.add(k2)
    know = sf.knowledge | frozenset(merges.get(path, ()))
    return make_sf(sf.names, know, sf.calls, tuple(blocks), keep_names=sf.names)


def _widen_into(host: Sf, succ: Sf, b: int) -> Optional[Sf]:
    """Accelerate one uncovered successor back into its source limit.

    The difference is taken against the extension the successor was computed
    from, so unfolding copies never count as new material.  Each connected
    component is renamed from copy names to the binders they originate from
    and attached at the deepest originating block; components whose copy
    names cannot be renamed consistently fall back to a top-level block.
    Returns None when there is nothing to attach."""
    ext, origins = extend_with_origins(host, b)
    if Counter(succ.blocks) - Counter(ext.blocks):
        return None
    ext_names = set(ext.names)
    new_names = [x for x in succ.names if x not in ext_names]
    new_calls = list((Counter(succ.calls) - Counter(ext.calls)).elements())
    cl = closure(ext.knowledge)
    new_know = sorted((m for m in succ.knowledge if not cl.synthesizable(m)),
                      key=msg_key)
    if not new_calls and not new_know:
        return None
    merges: dict = {}
    additions: dict = {}
    # Components that keep their copy names must share one top-level block:
    # two siblings binding the same copy name would break the bound-name
    # distinctness of standard forms.
    loose = ([], set(), [])  # (knowledge, binders, calls)
    for names_c, know_c, calls_c in _components(new_names, new_know, new_calls):
        mentioned = set(names_c)
        for m in know_c:
            mentioned |= m.names
        for _, args in calls_c:
            for a in args:
                mentioned |= a.names
        copies = sorted((x for x in mentioned if x in origins),
                        key=lambda x: x.text)
        path: tuple = ()
        ren: dict = {}
        anchored = True
        if copies:
            path = max((origins[x][0] for x in copies), key=len)
            taken: dict = {}
            for x in copies:
                lp, binder = origins[x]
                if path[:len(lp)] != lp or taken.get(binder, x) != x:
                    # incomparable anchors or two copies of one binder:
                    # keep the copy names and bind them at the top instead
                    path, ren, anchored = (), {}, False
                    break
                taken[binder] = x
                ren[x] = binder
        if not anchored:
            loose[0].extend(know_c)
            loose[1].update(x for x in mentioned
                            if x in origins or x in set(names_c))
            loose[2].extend(calls_c)
            continue
        know2 = {subst(m, ren) for m in know_c}
        calls2 = [(n, tuple(subst(a, ren) for a in args))
                  for n, args in calls_c]
        nu = [x for x in names_c if x not in origins]
        body = _block_at(host, path)
        know2 -= set(body.knowledge)
        if not nu and not calls2:
            if know2:
                merges.setdefault(path, set()).update(know2)
            continue
        bl = make_sf(tuple(nu), frozenset(know2), tuple(calls2))
        additions.setdefault(path, []).append(bl)
    if loose[0] or loose[2]:
        bl = make_sf(tuple(sorted(loose[1], key=lambda x: x.text)),
                     frozenset(loose[0]), tuple(loose[2]))
        additions.setdefault((), []).append(bl)
    if not merges and not additions:
        return None
    return _graft(host, merges, additions)


def _parallel_merge(host: Sf, succ: Sf) -> Sf:
    """Pointwise upper bound of two limits sharing their bound names: the
    structureless fallback that always covers both."""
    host_names = set(host.names)
    names = tuple(host.names) + tuple(x for x in succ.names if x not in host_names)
    calls = tuple(host.calls) + \
        tuple((Counter(succ.calls) - Counter(host.calls)).elements())
    blocks = tuple(host.blocks) + \
        tuple((Counter(succ.blocks) - Counter(host.blocks)).elements())
    return make_sf(names, host.knowledge | succ.knowledge, calls, blocks,
                   keep_names=names)


# ---------------------------------------------------------------------------
# Inference.
# ---------------------------------------------------------------------------


def _membership_receipt(sf0: Sf, limits: tuple) -> Optional[Membership]:
    for t, l in enumerate(limits):
        if sf0.blocks:
            w = limit_included(sf0, l)
            if w is not None:
                return Membership(t, w.extension, witness=w)
            continue
        thr = len(sf0.names) + len(sf0.calls) + 1 if l.blocks else 1
        for m in sorted({min(2, thr), thr}):
            wit = knowledge_embedding(_fixed(sf0), _fixed(extend(l, m)))
            if wit is not None:
                return Membership(t, m, _name_pairs(wit["names"]),
                                  tuple(wit["calls"]))
    return None


def infer_invariant(p0, defs: dict, s: int, ty=None,
                    budget: Optional[Budget] = None, *,
                    union_mode: bool = False, rounds: int = 3):
    """Search for an inductive invariant containing p0.

    Check-then-widen loop: each round checks the current candidate and, on
    failure, widens the uncovered successor into its source limit.  When
    widening makes no progress the successor is merged wholesale: parallel
    composition by default, an extra union member with `union_mode`.  The
    budget is shared across all rounds; exhaustion returns None (unknown),
    never a verdict."""
    budget = budget if budget is not None else Budget()
    sf0 = p0 if isinstance(p0, Sf) else standard_form(p0)
    limits = [sf0]
    attempts: dict = {}
    while True:
        inv = Invariant(tuple(limits), s, _ty_tuple(ty))
        try:
            budget.charge(1)
            out = check_inductive(inv, defs, budget=budget, rounds=rounds)
        except BudgetExhausted:
            return None
        if out:
            mem = _membership_receipt(sf0, tuple(limits))
            if mem is None:
                return None
            return inv, Certificate(inv, mem, out)
        key = (out.source, canonical_key(out.successor))
        tries = attempts.get(key, 0)
        attempts[key] = tries + 1
        grown = None
        if tries == 0:
            grown = _widen_into(limits[out.source], out.successor, out.bound)
        if grown is not None and grown != limits[out.source]:
            limits[out.source] = grown
            continue
        if union_mode:
            limits.append(out.successor)
        else:
            limits[out.source] = _parallel_merge(limits[out.source],
                                                 out.successor)


# ---------------------------------------------------------------------------
# Replay.
# ---------------------------------------------------------------------------


def _valid_embedding(sf1: Sf, ext2: Sf, sigma: dict, call_pairs: tuple) -> bool:
    """Validate a recorded embedding of sf1's fixed part into ext2's without
    searching: total injective renaming of the bound names, literal free
    names, a complete call matching, derivable knowledge images."""
    bound1, bound2 = set(sf1.names), set(ext2.names)
    if set(sigma) != bound1:
        return False
    targets = list(sigma.values())
    if len(set(targets)) != len(targets):
        return False
    if any(v not in bound2 for v in targets):
        return False
    if any(f in bound2 for f in _fixed(sf1).free_names):
        return False
    calls1, calls2 = sf1.calls, ext2.calls
    if sorted(i for i, _ in call_pairs) != list(range(len(calls1))):
        return False
    js = [j for _, j in call_pairs]
    if len(set(js)) != len(js) or any(j < 0 or j >= len(calls2) for j in js):
        return False
    for i, j in call_pairs:
        n1, a1 = calls1[i]
        n2, a2 = calls2[j]
        if n1 != n2 or tuple(subst(a, sigma) for a in a1) != tuple(a2):
            return False
    cl = closure(ext2.knowledge)
    return all(cl.synthesizable(subst(m, sigma)) for m in sf1.knowledge)


def replay_certificate(cert: Certificate, defs: dict, p0=None) -> bool:
    """Re-establish inductiveness (and membership, when p0 is given) from
    the certificate's receipts alone.  The successor sets are recomputed;
    every receipt is validated, none is searched for."""
    inv = cert.invariant
    ty = inv.typing()
    if len(cert.core.bounds) != len(inv.limits):
        return False
    if p0 is not None:
        sf0 = p0 if isinstance(p0, Sf) else standard_form(p0)
        m = cert.membership
        if not (0 <= m.target < len(inv.limits)):
            return False
        l = inv.limits[m.target]
        if m.witness is not None:
            if not replay_witness(sf0, l, m.witness):
                return False
        elif sf0.blocks or m.extension < 1 or \
                not _valid_embedding(sf0, extend(l, m.extension),
                                     dict(m.names), m.calls):
            return False
    rows = {(r.source, r.successor): r for r in cert.core.coverage}
    for si, host in enumerate(inv.limits):
        try:
            r = posthat(host, defs, inv.s, ty, uncapped=cert.core.uncapped,
                        budget=Budget())
        except (BudgetExhausted, ModelError):
            return False
        if r.b != cert.core.bounds[si]:
            return False
        for _, succ in r.successors:
            row = rows.get((si, canonical_key(succ)))
            if row is None:
                return False
            if row.mode == "inclusion":
                if not (0 <= row.target < len(inv.limits)):
                    return False
                if not replay_witness(succ, inv.limits[row.target], row.witness):
                    return False
            elif row.mode == "incorporation":
                if row.target != si or row.extension < 1:
                    return False
                ext = extend(host, row.extension)
                if Counter(succ.blocks) - Counter(ext.blocks):
                    return False
                sigma = dict(row.names)
                block_free = set()
                for bl in succ.blocks:
                    block_free |= set(bl.free_names)
                if any(sigma.get(f, f) != f for f in block_free):
                    return False
                if not _valid_embedding(succ, ext, sigma, row.calls):
                    return False
            else:
                return False
    return True
