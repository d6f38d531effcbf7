"""Process terms, definitions, standard forms, embeddings, and the
size-bounded reduction semantics.

A runtime configuration is kept in standard form (:class:`Sf`): a prenex
list of restricted names over published knowledge, a multiset of process
calls, and (for limits) a multiset of iterated blocks.  The reduction
semantics works directly on standard forms.

Transitions (for a configuration ``new x.(<Γ> ∥ calls)``):

  Comm    an output branch of one call meets a matching input branch of
          another call on the same channel; both continuations spawn.
  PubOut  an output branch on a channel the intruder controls publishes
          its message into Γ.
  PubIn   an input branch on a channel the intruder controls fires with
          any pattern instance the intruder can derive from Γ plus a pool
          of self-generated fresh names; the fresh names used become
          restricted names of the successor.
  Tau     an internal step.

The public channel (the name ``in``) is always intruder-controlled; any
other channel requires Γ ⊢ c.  Intruder-generated fresh names are bound in
the successor but are not added to Γ: a name the intruder invented and only
ever embedded inside an undecryptable message is not retrievable later, and
published knowledge records exactly the messages sent over the network.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .intruder import (
    Closure,
    closure,
    derives,
    knowledge_leq,
    normalize_knowledge,
)
from .terms import (
    GAMMA,
    PUBLIC_CHANNEL,
    App,
    FreshNames,
    Message,
    Name,
    msg_key,
    subst,
)

PUBLIC = Name(PUBLIC_CHANNEL)


class ModelError(Exception):
    """Ill-formed model: undefined identifier, arity mismatch, bad ω."""


class BudgetExhausted(Exception):
    """Raised when a search exceeds its node or time budget."""


class Budget:
    """Shared countdown for search work.  `charge` raises when spent."""

    def __init__(self, nodes: int = 1_000_000, seconds: float = 600.0):
        self.nodes = nodes
        self.used = 0
        self.deadline = time.monotonic() + seconds

    def charge(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.nodes:
            raise BudgetExhausted(f"node budget exhausted ({self.nodes})")
        if self.used % 256 == 0 and time.monotonic() > self.deadline:
            raise BudgetExhausted("time budget exhausted")


# ---------------------------------------------------------------------------
# Process terms.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Out:
    """A published message ⟨M⟩."""

    message: Message


@dataclass(frozen=True)
class CallP:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Par:
    parts: tuple = ()


@dataclass(frozen=True)
class Res:
    names: tuple  # of Name
    body: "Process"


@dataclass(frozen=True)
class Omega:
    """ω-iterated block; only meaningful inside limits."""

    body: "Process"


Process = Union[Zero, Out, CallP, Par, Res, Omega]

ZERO = Zero()


def par(*parts: Process) -> Process:
    flat = []
    for p in parts:
        if isinstance(p, Par):
            flat.extend(p.parts)
        elif not isinstance(p, Zero):
            flat.append(p)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(flat))


def res(names: Iterable[Name], body: Process) -> Process:
    names = tuple(names)
    if not names:
        return body
    if isinstance(body, Res):
        return Res(names + body.names, body.body)
    return Res(names, body)


def proc_free_names(p: Process) -> frozenset:
    if isinstance(p, Zero):
        return frozenset()
    if isinstance(p, Out):
        return p.message.names
    if isinstance(p, CallP):
        return frozenset().union(*(a.names for a in p.args)) if p.args else frozenset()
    if isinstance(p, Par):
        return frozenset().union(*(proc_free_names(q) for q in p.parts)) if p.parts else frozenset()
    if isinstance(p, Res):
        return proc_free_names(p.body) - frozenset(p.names)
    if isinstance(p, Omega):
        return proc_free_names(p.body)
    raise TypeError(p)


def nesting_depth(p: Process) -> int:
    """nestν of the given representative: restriction nesting, with
    nestν(B^ω) = nestν(B)."""
    if isinstance(p, (Zero, Out, CallP)):
        return 0
    if isinstance(p, Par):
        return max((nesting_depth(q) for q in p.parts), default=0)
    if isinstance(p, Res):
        return len(p.names) + nesting_depth(p.body)
    if isinstance(p, Omega):
        return nesting_depth(p.body)
    raise TypeError(p)


def subst_process(p: Process, mapping: dict, fresh: Optional[FreshNames] = None) -> Process:
    """Apply a name->message substitution, renaming bound names to avoid
    capture."""
    if not mapping:
        return p
    if fresh is None:
        fresh = FreshNames(proc_free_names(p))
        for m in mapping.values():
            fresh.avoid_also(m.names)
    if isinstance(p, Zero):
        return p
    if isinstance(p, Out):
        return Out(subst(p.message, mapping))
    if isinstance(p, CallP):
        return CallP(p.name, tuple(subst(a, mapping) for a in p.args))
    if isinstance(p, Par):
        return par(*(subst_process(q, mapping, fresh) for q in p.parts))
    if isinstance(p, Omega):
        return Omega(subst_process(p.body, mapping, fresh))
    if isinstance(p, Res):
        inner = dict(mapping)
        ren = {}
        new_names = []
        captured = frozenset().union(*(v.names for v in mapping.values()))
        for n in p.names:
            inner.pop(n, None)
            if n in captured:
                n2 = fresh.fresh(like=n)
                ren[n] = n2
                new_names.append(n2)
            else:
                new_names.append(n)
        body = p.body
        if ren:
            body = subst_process(body, ren, fresh)
        inner = {k: v for k, v in inner.items() if k not in ren}
        return Res(tuple(new_names), subst_process(body, inner, fresh))
    raise TypeError(p)


# ---------------------------------------------------------------------------
# Definitions.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One summand of a definition body.

    kind is "tau", "in" or "out".  channel None means the public channel.
    For "in", payload is the pattern template over `binders`; for "out" it
    is the sent message.
    """

    kind: str
    channel: Optional[Message] = None
    binders: tuple = ()
    payload: Optional[Message] = None
    continuation: Process = ZERO


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple  # of Name
    branches: tuple  # of Branch


Defs = dict  # str -> Definition


def check_pattern_implementable(binders: Iterable[Name], template: Message) -> bool:
    """Whether a pattern x⃗:M can be realised with the actual primitives:
    treating the non-binder names Z of M as held values, receiving M must
    yield every binder, i.e. {M} ∪ Z ⊢ x for each binder x."""
    binders = tuple(binders)
    z = template.names - frozenset(binders)
    gamma = frozenset({template}) | z
    return all(derives(gamma, x) for x in binders)


def pattern_arity_weight(defn: Definition, s: int, ty: Optional[dict] = None) -> int:
    """Worst-case count of fresh intruder names one firing of any branch of
    `defn` can embed in received messages: Σ over binders of γ^(size-1)."""
    ty = ty or {}
    best = 0
    for br in defn.branches:
        if br.kind != "in":
            continue
        w = 0
        for x in br.binders:
            t = min(ty.get(x.text, s), s)
            w += GAMMA ** (t - 1)
        best = max(best, w)
    return best


# ---------------------------------------------------------------------------
# Standard forms.
# ---------------------------------------------------------------------------

Call = tuple  # (name: str, args: tuple[Message, ...])


def call_key(c: Call):
    return (c[0], tuple(msg_key(a) for a in c[1]))


@dataclass(frozen=True)
class Sf:
    """Standard form: ν names.(⟨knowledge⟩ ∥ calls ∥ blocks^ω).

    For plain processes `blocks` is empty.  Each block is itself an Sf whose
    free names may include outer restricted names.
    """

    names: tuple = ()
    knowledge: frozenset = frozenset()
    calls: tuple = ()
    blocks: tuple = ()

    @property
    def free_names(self) -> frozenset:
        used = set()
        for m in self.knowledge:
            used |= m.names
        for _, args in self.calls:
            for a in args:
                used |= a.names
        for b in self.blocks:
            used |= b.free_names
        return frozenset(used) - frozenset(self.names)

    @property
    def is_process(self) -> bool:
        return not self.blocks

    def messages(self) -> Iterator[Message]:
        """All messages stored in the configuration (knowledge and call
        arguments), including inside blocks."""
        yield from self.knowledge
        for _, args in self.calls:
            yield from args
        for b in self.blocks:
            yield from b.messages()

    def nesting(self) -> int:
        inner = max((b.nesting() for b in self.blocks), default=0)
        return len(self.names) + inner

    def omega_count(self) -> int:
        return len(self.blocks) + sum(b.omega_count() for b in self.blocks)

    def component_count(self) -> int:
        return len(self.knowledge) + len(self.calls) + sum(b.component_count() for b in self.blocks)


def make_sf(names, knowledge, calls, blocks=(), keep_names=()) -> Sf:
    """Assemble a standard form: drop restrictions of unused names, sort the
    call and block multisets."""
    knowledge = frozenset(knowledge)
    calls = tuple(sorted(calls, key=call_key))
    blocks = tuple(sorted(blocks, key=_block_sort_key))
    used = set(keep_names)
    for m in knowledge:
        used |= m.names
    for _, args in calls:
        for a in args:
            used |= a.names
    for b in blocks:
        used |= b.free_names
    names = tuple(n for n in names if n in used)
    return Sf(names, knowledge, calls, blocks)


def _block_sort_key(b: Sf) -> str:
    return canonical_key(b)


def standard_form(p: Process, *, keep_names=(), avoid=()) -> Sf:
    """Compute the standard form of a process or limit term.

    Restrictions are hoisted into one prefix (α-renaming on clashes), Nil is
    dropped, published messages are collected into the knowledge, ω-blocks
    are normalised: ⟨M⟩^ω collapses to ⟨M⟩, (P ∥ Q)^ω splits into
    P^ω ∥ Q^ω, and nested ω is idempotent.  Restrictions of names that end
    up unused are dropped (unless listed in keep_names).
    """
    fresh = FreshNames(proc_free_names(p))
    fresh.avoid_also(keep_names)
    fresh.avoid_also(avoid)
    pending_keep = set(keep_names)
    names: list = []
    knowledge: set = set()
    calls: list = []
    blocks: list = []

    def walk(t: Process, ren: dict, under: Optional[list]):
        # `under` is None at top level, else the collector of the enclosing
        # block body.
        if isinstance(t, Zero):
            return
        if isinstance(t, Out):
            m = subst(t.message, ren)
            (knowledge if under is None else under[1]).add(m)
            return
        if isinstance(t, CallP):
            c = (t.name, tuple(subst(a, ren) for a in t.args))
            (calls if under is None else under[2]).append(c)
            return
        if isinstance(t, Par):
            for q in t.parts:
                walk(q, ren, under)
            return
        if isinstance(t, Res):
            ren2 = dict(ren)
            here = []
            for n in t.names:
                if n in pending_keep:
                    # a name the caller needs to survive literally
                    pending_keep.discard(n)
                    n2 = n
                else:
                    n2 = fresh.reserve(n)
                if n2 is not n:
                    ren2[n] = n2
                else:
                    ren2.pop(n, None)
                here.append(n2)
            (names if under is None else under[0]).extend(here)
            walk(t.body, ren2, under)
            return
        if isinstance(t, Omega):
            walk_omega(t.body, ren, under)
            return
        raise TypeError(t)

    def walk_omega(t: Process, ren: dict, under: Optional[list]):
        if isinstance(t, Zero):
            return
        if isinstance(t, Omega):  # (B^ω)^ω ≡ B^ω
            walk_omega(t.body, ren, under)
            return
        if isinstance(t, Out):  # ⟨M⟩^ω ≡ ⟨M⟩
            walk(t, ren, under)
            return
        if isinstance(t, Par):  # (P ∥ Q)^ω ≡ P^ω ∥ Q^ω
            for q in t.parts:
                walk_omega(q, ren, under)
            return
        if isinstance(t, (CallP, Res)):
            collector = [[], set(), [], []]
            walk(t, ren, collector)
            b = make_sf(collector[0], collector[1], collector[2], collector[3])
            if b.names or b.knowledge or b.calls or b.blocks:
                (blocks if under is None else under[3]).append(b)
            return
        raise TypeError(t)

    walk(p, {}, None)
    return make_sf(names, knowledge, calls, blocks, keep_names=keep_names)


def sf_to_process(sf: Sf) -> Process:
    parts = [Out(m) for m in sorted(sf.knowledge, key=msg_key)]
    parts += [CallP(n, args) for n, args in sf.calls]
    parts += [Omega(sf_to_process(b)) for b in sf.blocks]
    return res(sf.names, par(*parts))


def canonical_key(sf: Sf) -> str:
    """A deterministic text key for fast deduplication and ordering.

    Restricted names are replaced by occurrence indexes, so α-variants
    usually collide (ties between structurally equal components can order
    either way, in which case two α-variants may keep distinct keys; that
    only costs a missed dedup, never a wrong merge).  Equal keys imply
    α-equivalent terms.
    """
    bound = _collect_bound(sf)
    index: dict = {}

    def blind(m: Message) -> str:
        if isinstance(m, Name):
            return "*" if m in bound else m.text
        return f"{m.fn}({','.join(blind(a) for a in m.args)})"

    def render(m: Message) -> str:
        if isinstance(m, Name):
            if m in bound:
                if m not in index:
                    index[m] = len(index)
                return f"${index[m]}"
            return m.text
        return f"{m.fn}({','.join(render(a) for a in m.args)})"

    def go(s: Sf) -> str:
        items = []
        items += [("k", blind(m), ("k", m)) for m in s.knowledge]
        items += [("c", c[0] + "(" + ",".join(blind(a) for a in c[1]) + ")", ("c", c)) for c in s.calls]
        items += [("b", go_blind(b), ("b", b)) for b in s.blocks]
        items.sort(key=lambda it: (it[0], it[1]))
        out = []
        for tag, _, payload in items:
            if tag == "k":
                out.append("<" + render(payload[1]) + ">")
            elif tag == "c":
                n, args = payload[1]
                out.append(n + "[" + ",".join(render(a) for a in args) + "]")
            else:
                out.append("{" + go(payload[1]) + "}w")
        return f"v{len(s.names)}." + "|".join(out)

    def go_blind(s: Sf) -> str:
        items = sorted(
            ["<" + blind(m) + ">" for m in s.knowledge]
            + [c[0] + "(" + ",".join(blind(a) for a in c[1]) + ")" for c in s.calls]
            + ["{" + go_blind(b) + "}w" for b in s.blocks]
        )
        return f"v{len(s.names)}." + "|".join(items)

    return go(sf)


def _collect_bound(sf: Sf, acc=None) -> set:
    if acc is None:
        acc = set()
    acc.update(sf.names)
    for b in sf.blocks:
        _collect_bound(b, acc)
    return acc


# ---------------------------------------------------------------------------
# Knowledge embedding and congruence.
# ---------------------------------------------------------------------------

def iter_knowledge_embeddings(sf1: Sf, sf2: Sf, *, pin: Optional[dict] = None,
                              collapse_unconstrained: bool = False):
    """Enumerate witnesses that sf1 ⊑k sf2: an injective map σ of sf1's
    restricted names into sf2's (free names map to themselves), an injection
    of sf1's call multiset into sf2's compatible with σ, and Γ1σ ⊑ Γ2.

    Both arguments must be ω-free.  `pin` pre-seeds σ (and its entries are
    honoured even for free names, which is what incorporation uses).

    Yields {"names": σ, "calls": [(i, j), ...]} snapshots in a deterministic
    order.  The inclusion decision needs the full enumeration because a
    renaming that satisfies the knowledge condition can still fail on the
    iterated parts, in which case the next candidate must be tried.

    Call targets that are equal as (name, arguments) values are tried once
    per search frame: picking a different identical copy gives an isomorphic
    continuation, so the enumeration stays complete up to that symmetry.
    With `collapse_unconstrained`, restricted names that occur in no
    knowledge message get a single greedy assignment instead of a branch
    per target.  Every witness existence question is unaffected, but
    callers that go on to distinguish σ by names outside the knowledge
    (inclusion does, through the iterated parts) must leave this off.
    """
    if sf1.blocks or sf2.blocks:
        raise ValueError("knowledge_embedding expects ω-free standard forms")
    bound1 = set(sf1.names)
    bound2 = set(sf2.names)
    if len(bound1) > len(bound2):
        return
    sigma: dict = dict(pin) if pin else {}
    for n in list(sigma):
        if n in bound1 and sigma[n] not in bound2:
            return
    used = set(sigma.values())
    cl2 = closure(sf2.knowledge)

    # Free names of sf1 map to themselves, so sf2 must not bind them
    # (unless a pin says otherwise, which incorporation relies on).
    free1 = sf1.free_names
    if any((n in bound2) and (n not in sigma) for n in free1):
        return

    calls2 = list(sf2.calls)
    taken = [False] * len(calls2)

    def map_msg(m: Message) -> Optional[Message]:
        # None when m mentions still-unmapped bound names.
        if any(n in bound1 and n not in sigma for n in m.names):
            return None
        return subst(m, sigma)

    def knowledge_ok() -> bool:
        for m in sf1.knowledge:
            img = map_msg(m)
            if img is not None and not cl2.synthesizable(img):
                return False
        return True

    def try_bind(a: Message, b: Message) -> Optional[list]:
        """Extend sigma so aσ = b; returns the list of new bindings or None."""
        added = []

        def go(x: Message, y: Message) -> bool:
            if isinstance(x, Name):
                if x in sigma:
                    return sigma[x] == y
                if x in bound1:
                    if not isinstance(y, Name) or y not in bound2 or y in used:
                        return False
                    sigma[x] = y
                    used.add(y)
                    added.append(x)
                    return True
                return x == y
            if not isinstance(y, App) or y.fn != x.fn or len(y.args) != len(x.args):
                return False
            return all(go(xa, ya) for xa, ya in zip(x.args, y.args))

        if go(a, b):
            return added
        for x in added:
            used.discard(sigma[x])
            del sigma[x]
        return None

    def undo(added: list) -> None:
        for x in added:
            used.discard(sigma[x])
            del sigma[x]

    match: dict = {}

    def emit():
        if all(cl2.synthesizable(subst(m, sigma)) for m in sf1.knowledge):
            yield {"names": dict(sigma), "calls": sorted((i, match[i]) for i in match)}

    def bind_args(args, args2) -> Optional[list]:
        added_all = []
        for a, b in zip(args, args2):
            added = try_bind(a, b)
            if added is None:
                undo(added_all)
                return None
            added_all.extend(added)
        return added_all

    def candidates(i) -> list:
        # Non-taken targets call i can still bind to, one per distinct
        # argument value (identical copies give isomorphic continuations).
        name, args = sf1.calls[i]
        out = []
        seen_values = set()
        for j, (name2, args2) in enumerate(calls2):
            if taken[j] or name2 != name or len(args2) != len(args):
                continue
            if args2 in seen_values:
                continue
            added = bind_args(args, args2)
            if added is None:
                continue
            undo(added)
            seen_values.add(args2)
            out.append(j)
        return out

    def match_calls(remaining: list):
        if not remaining:
            yield from finish_names()
            return
        # Most-constrained call first, recomputed as bindings accumulate.
        # The up-front candidate scan doubles as forward checking: a call
        # with no target left fails the whole branch now rather than after
        # exhausting permutations of the interchangeable copies.
        best = None
        for i in remaining:
            cand = candidates(i)
            if not cand:
                return
            key = (len(cand), call_key(sf1.calls[i]), i)
            if best is None or key < best[0]:
                best = (key, i, cand)
        _, i, cand = best
        rest = [x for x in remaining if x != i]
        name, args = sf1.calls[i]
        for j in cand:
            added = bind_args(args, calls2[j][1])
            if added is None:
                continue
            taken[j] = True
            match[i] = j
            if knowledge_ok():
                yield from match_calls(rest)
            taken[j] = False
            del match[i]
            undo(added)

    def finish_names():
        rest = [n for n in sf1.names if n not in sigma]
        if collapse_unconstrained:
            k_names = set()
            for m in sf1.knowledge:
                k_names |= m.names
            loose = [n for n in rest if n not in k_names]
            rest = [n for n in rest if n in k_names]
        else:
            loose = []
        targets = [n for n in sf2.names if n not in used]

        def place_loose():
            free = [y for y in targets if y not in used]
            if len(free) < len(loose):
                return
            for x, y in zip(loose, free):
                sigma[x] = y
                used.add(y)
            yield from emit()
            for x in loose:
                used.discard(sigma[x])
                del sigma[x]

        def assign(k: int):
            if k == len(rest):
                yield from place_loose() if loose else emit()
                return
            x = rest[k]
            for y in targets:
                if y in used:
                    continue
                sigma[x] = y
                used.add(y)
                if knowledge_ok():
                    yield from assign(k + 1)
                used.discard(y)
                del sigma[x]

        yield from assign(0)

    if not knowledge_ok():
        return
    yield from match_calls(list(range(len(sf1.calls))))


def knowledge_embedding(sf1: Sf, sf2: Sf, *, pin: Optional[dict] = None) -> Optional[dict]:
    """First witness from iter_knowledge_embeddings, or None.  Collapsing
    the unconstrained-name choices is safe here: only existence matters."""
    for wit in iter_knowledge_embeddings(sf1, sf2, pin=pin,
                                         collapse_unconstrained=True):
        return wit
    return None


def knowledge_congruent(sf1: Sf, sf2: Sf) -> bool:
    """≡k on ω-free standard forms: embeddings both ways."""
    if len(sf1.calls) != len(sf2.calls):
        return False
    if sorted(c[0] for c in sf1.calls) != sorted(c[0] for c in sf2.calls):
        return False
    return (
        knowledge_embedding(sf1, sf2) is not None
        and knowledge_embedding(sf2, sf1) is not None
    )


# ---------------------------------------------------------------------------
# Reduction semantics.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Label:
    kind: str  # "Comm" | "PubOut" | "PubIn" | "Tau"
    calls: tuple  # consumed call(s), instantiated
    branches: tuple  # branch indexes within their definitions
    theta: tuple = ()  # sorted ((binder, message), ...)
    fresh: tuple = ()  # intruder-generated names bound in the successor

    def describe(self) -> str:
        who = " + ".join(f"{n}[{','.join(map(str, a))}]" for n, a in self.calls)
        th = ", ".join(f"{x}:={m}" for x, m in self.theta)
        extra = f" {{{th}}}" if th else ""
        return f"{self.kind} {who}{extra}"


@dataclass
class _InstBranch:
    branch_index: int
    kind: str
    channel: Optional[Message]
    binders: tuple
    payload: Optional[Message]
    continuation: Process
    bounds: dict  # binder -> max size


def _instantiate(defn: Definition, args: tuple, fresh: FreshNames, s: int, ty: dict) -> list:
    if len(args) != len(defn.params):
        raise ModelError(f"{defn.name} expects {len(defn.params)} arguments, got {len(args)}")
    base = dict(zip(defn.params, args))
    out = []
    for bi, br in enumerate(defn.branches):
        ren = {x: fresh.fresh(like=x) for x in br.binders}
        mapping = dict(base)
        mapping.update(ren)
        channel = subst(br.channel, base) if br.channel is not None else None
        payload = subst(br.payload, mapping) if br.payload is not None else None
        cont = subst_process(br.continuation, mapping, fresh)
        binders = tuple(ren[x] for x in br.binders)
        bounds = {ren[x]: min(ty.get(x.text, s), s) for x in br.binders}
        out.append(_InstBranch(bi, br.kind, channel, binders, payload, cont, bounds))
    return out


def _enabled(channel: Optional[Message], cl: Closure) -> bool:
    if channel is None or channel == PUBLIC:
        return True
    return cl.synthesizable(channel)


def _unify(template: Message, target: Message, theta: dict, binders: set, bounds: dict) -> Optional[dict]:
    """One-way match: extend theta so that template·theta = target, binding
    only names in `binders` and respecting their size bounds."""
    th = dict(theta)

    def go(t: Message, g: Message) -> bool:
        t = subst(t, th)
        if isinstance(t, Name) and t in binders:
            if g.size > bounds.get(t, g.size):
                return False
            th[t] = g
            return True
        if isinstance(t, Name) or isinstance(g, Name):
            return t == g
        if t.fn != g.fn or len(t.args) != len(g.args):
            return False
        return all(go(a, b) for a, b in zip(t.args, g.args))

    return th if go(template, target) else None


def _enum_candidates(
    cl: Closure,
    pool: tuple,
    bound: int,
    s: int,
    budget: Optional[Budget],
    cache: Optional[dict] = None,
) -> list:
    """Messages of size ≤ min(bound, s) the intruder can produce: analysis
    closure elements and fresh pool names, closed under constructors.

    Built in one ascending-size pass (constructor arguments are strictly
    smaller than the result, so no fixpoint is needed)."""
    t = min(bound, s)
    if cache is not None:
        got = cache.get((pool, t))
        if got is not None:
            return got
    seen = {m for m in cl.elements if m.size <= t}
    seen.update(pool)
    for size in range(2, t + 1):
        small = sorted((m for m in seen if m.size <= size - 1), key=msg_key)
        for a in small:
            m = App("pub", (a,))
            if m not in seen:
                if budget:
                    budget.charge()
                seen.add(m)
        for fn in ("pair", "senc", "aenc"):
            for a in small:
                for b in small:
                    m = App(fn, (a, b))
                    if m not in seen:
                        if budget:
                            budget.charge()
                        seen.add(m)
    out = sorted(seen, key=msg_key)
    if cache is not None:
        cache[(pool, t)] = out
    return out


def _match_pattern(
    template: Message,
    binders: tuple,
    bounds: dict,
    cl: Closure,
    pool: tuple,
    s: int,
    budget: Optional[Budget],
    cache: Optional[dict] = None,
) -> list:
    """All substitutions θ over `binders` such that the intruder can derive
    template·θ from the closure plus the fresh-name pool.

    Two routes are interleaved: matching the template against analysis
    closure elements (which may bind binders to underivable subterms — the
    receiving principal decrypts, not the intruder), and synthesising the
    template from derivable pieces (where bare binders range over candidate
    messages within their size bound)."""
    binder_set = set(binders)
    pool_set = frozenset(pool)
    results: list = []
    seen: set = set()

    def emit(th: dict) -> None:
        missing = [x for x in binders if x not in th]
        if missing:
            # A binder the template never mentions is unconstrained: it
            # ranges over everything the intruder can produce.
            x = missing[0]
            for cand in _enum_candidates(cl, pool, bounds.get(x, s), s, budget, cache):
                if budget:
                    budget.charge()
                th2 = dict(th)
                th2[x] = cand
                emit(th2)
            return
        key = tuple(sorted(((x, th[x]) for x in th), key=lambda kv: msg_key(kv[0])))
        if key not in seen:
            seen.add(key)
            results.append(th)

    def go(t: Message, th: dict, cont) -> None:
        t = subst(t, th)
        free_binders = [x for x in binder_set if x in t.names and x not in th]
        if not free_binders:
            if cl.synthesizable(t, extra=pool_set):
                cont(th)
            return
        if isinstance(t, Name):
            # A bare unbound binder: enumerate candidate messages.
            for cand in _enum_candidates(cl, pool, bounds.get(t, s), s, budget, cache):
                if budget:
                    budget.charge()
                th2 = dict(th)
                th2[t] = cand
                cont(th2)
            return
        # Composite template: match against closure elements...
        for e in sorted(cl.elements, key=msg_key):
            if isinstance(e, App) and e.fn == t.fn:
                if budget:
                    budget.charge()
                th2 = _unify(t, e, th, binder_set, bounds)
                if th2 is not None:
                    cont(th2)
        # ... or synthesise it argument by argument.
        def chain(args, th_now):
            if not args:
                cont(th_now)
                return
            go(args[0], th_now, lambda th_next: chain(args[1:], th_next))

        chain(list(t.args), th)

    go(template, {}, emit)
    return results


def successors(
    sf: Sf,
    defs: Defs,
    s: int,
    ty: Optional[dict] = None,
    *,
    avoid: Iterable[Name] = (),
    keep_names: Iterable[Name] = (),
    budget: Optional[Budget] = None,
    dedup: str = "congruent",
) -> list:
    """All one-step successors of an ω-free standard form, within the size
    bound and the typing, deduplicated up to ≡k.

    dedup: "congruent" (pairwise ≡k inside hash buckets, complete) or
    "canonical" (α-canonical text key only; faster, may keep ≡k-duplicates).
    """
    if sf.blocks:
        raise ValueError("successors expects an ω-free standard form")
    ty = ty or {}
    cl = closure(sf.knowledge)
    keep_names = tuple(keep_names)
    cand_cache: dict = {}

    results: list = []

    def freshener() -> FreshNames:
        f = FreshNames(sf.names)
        f.avoid_also(sf.free_names)
        f.avoid_also(avoid)
        f.avoid_also(keep_names)
        return f

    def build(consumed: tuple, spawned: list, new_names: tuple, label: Label) -> None:
        remaining = list(sf.calls)
        for c in consumed:
            remaining.remove(c)
        knowledge = set(sf.knowledge)
        names = list(sf.names) + list(new_names)
        calls = list(remaining)
        for piece in spawned:
            sub = standard_form(piece, avoid=tuple(names) + tuple(keep_names) + tuple(avoid))
            names += list(sub.names)
            knowledge |= sub.knowledge
            calls += list(sub.calls)
            if sub.blocks:
                raise ModelError("ω is not allowed in definition bodies")
        for m in knowledge:
            if m.size > s:
                return
        for _, args in calls:
            for a in args:
                if a.size > s:
                    return
        succ = make_sf(names, normalize_knowledge(knowledge), calls, keep_names=keep_names)
        results.append((label, succ))

    inst_cache: dict = {}

    def inst(call: Call) -> list:
        got = inst_cache.get(call)
        if got is None:
            name, args = call
            if name not in defs:
                raise ModelError(f"undefined process identifier {name}")
            got = _instantiate(defs[name], args, freshener(), s, ty)
            inst_cache[call] = got
        return got

    distinct_calls = sorted(set(sf.calls), key=call_key)
    counts = {c: sf.calls.count(c) for c in distinct_calls}

    for call in distinct_calls:
        for br in inst(call):
            if budget:
                budget.charge()
            if br.kind == "tau":
                build((call,), [br.continuation], (), Label("Tau", (call,), (br.branch_index,)))
            elif br.kind == "out":
                if _enabled(br.channel, cl):
                    build(
                        (call,),
                        [Out(br.payload), br.continuation],
                        (),
                        Label("PubOut", (call,), (br.branch_index,)),
                    )
            elif br.kind == "in":
                if not _enabled(br.channel, cl):
                    continue
                pool_size = sum(GAMMA ** (min(br.bounds.get(x, s), s) - 1) for x in br.binders)
                f = freshener()
                pool = tuple(f.fresh(stem="i") for _ in range(pool_size))
                for th in _match_pattern(
                    br.payload, br.binders, br.bounds, cl, pool, s, budget, cand_cache
                ):
                    used_fresh = tuple(
                        n for n in pool if any(n in m.names for m in th.values())
                    )
                    cont = subst_process(br.continuation, th, f)
                    theta = tuple(sorted(th.items(), key=lambda kv: msg_key(kv[0])))
                    build(
                        (call,),
                        [cont],
                        used_fresh,
                        Label("PubIn", (call,), (br.branch_index,), theta, used_fresh),
                    )

    # Comm: an output branch of one call with an input branch of another.
    for c1 in distinct_calls:
        for c2 in distinct_calls:
            if c1 == c2 and counts[c1] < 2:
                continue
            for bo in inst(c1):
                if bo.kind != "out":
                    continue
                for bi_ in inst(c2):
                    if bi_.kind != "in":
                        continue
                    ch1 = bo.channel if bo.channel is not None else PUBLIC
                    ch2 = bi_.channel if bi_.channel is not None else PUBLIC
                    if ch1 != ch2:
                        continue
                    if budget:
                        budget.charge()
                    th = _unify(bi_.payload, bo.payload, {}, set(bi_.binders), bi_.bounds)
                    if th is None:
                        continue
                    if any(x not in th for x in bi_.binders):
                        raise ModelError(
                            f"{c2[0]}: synchronising on a pattern that does not "
                            "mention all its binders"
                        )
                    cont2 = subst_process(bi_.continuation, th)
                    theta = tuple(sorted(th.items(), key=lambda kv: msg_key(kv[0])))
                    build(
                        (c1, c2),
                        [bo.continuation, cont2],
                        (),
                        Label("Comm", (c1, c2), (bo.branch_index, bi_.branch_index), theta),
                    )

    return _dedup(results, dedup)


def _skeleton(sf: Sf) -> tuple:
    bound = _collect_bound(sf)

    def blind(m: Message) -> str:
        if isinstance(m, Name):
            return "*" if m in bound else m.text
        return f"{m.fn}({','.join(blind(a) for a in m.args)})"

    return (
        len(sf.names),
        tuple(sorted(blind(m) for m in sf.knowledge)),
        tuple(sorted(c[0] + "(" + ",".join(blind(a) for a in c[1]) + ")" for c in sf.calls)),
    )


def _dedup(results: list, mode: str) -> list:
    out: list = []
    buckets: dict = {}
    for label, succ in results:
        key = canonical_key(succ)
        if mode == "canonical":
            if key in buckets:
                continue
            buckets[key] = [succ]
            out.append((label, succ))
            continue
        bucket = buckets.setdefault(_skeleton(succ), [])
        if any(k == key for k, _ in bucket):
            continue
        if any(knowledge_congruent(succ, other) for _, other in bucket):
            continue
        bucket.append((key, succ))
        out.append((label, succ))
    out.sort(key=lambda ls: (canonical_key(ls[1]), ls[0].kind, ls[0].branches))
    return out
