"""Security-property checkers over certified invariants, and the race
between invariant inference (Prover) and state exploration (Refuter).

The check_* functions judge the invariant inside a certificate: limits
denote downward-closed sets, so a limit that contains no call to Leak
excludes every Leak-containing process, and similarly for the other
syntactic and inclusion-based checks.  Handed a bare Invariant instead of
a Certificate they answer UNKNOWN, since nothing ties an uncertified
candidate to the protocol's reachable states.

prover_refuter interleaves the two semi-procedures deterministically in
one thread: each round runs one breadth-first exploration layer, then one
check-and-widen round of inference, until either side is conclusive or
the shared budget runs out.  A negative verdict read off the invariant
(say, an inferred invariant that contains Leak) does not stop the race:
the explorer keeps looking for a confirming trace, and exhausting the
state space overrules the invariant's over-approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .calculus import (
    Budget,
    BudgetExhausted,
    Label,
    ModelError,
    Sf,
    canonical_key,
    knowledge_embedding,
    make_sf,
    standard_form,
    successors,
)
from .inclusion import limit_included, member
from .invariants import (
    Certificate,
    Invariant,
    _membership_receipt,
    _parallel_merge,
    _sf_data,
    _ty_tuple,
    _widen_into,
    check_inductive,
)
from .terms import FreshNames, Name, senc

__all__ = [
    "OMEGA",
    "Secrecy",
    "ControlStateReach",
    "Misauthentication",
    "KnownPlaintext",
    "Boundedness",
    "Verdict",
    "Trace",
    "Report",
    "ExploreResult",
    "validate_property",
    "check_secrecy",
    "check_control_state",
    "check_misauthentication",
    "check_known_plaintext",
    "prover_refuter",
    "explore",
]

OMEGA = "omega"


# ---------------------------------------------------------------------------
# Property specifications.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Secrecy:
    """No reachable process calls Leak (armed by Secret[m] monitors)."""

    def describe(self) -> str:
        return "secrecy"


@dataclass(frozen=True)
class ControlStateReach:
    """Can a call to the given identifier ever appear?"""

    q: str

    def describe(self) -> str:
        return f"control-state {self.q}"


@dataclass(frozen=True)
class Misauthentication:
    """Two Auth claims sharing a nonce but chaining distinct partners."""

    def describe(self) -> str:
        return "misauthentication"


@dataclass(frozen=True)
class KnownPlaintext:
    """Can the intruder amass n known plaintexts encrypted under key?"""

    key: Name
    n: object = OMEGA  # positive count, or OMEGA for "unboundedly many"

    def describe(self) -> str:
        return f"known-plaintext {self.key.text} {self.n}"


@dataclass(frozen=True)
class Boundedness:
    """Do all size-s runs stay within restriction depth k?"""

    s: int
    k: Optional[int] = None  # None: report whatever depth certifies

    def describe(self) -> str:
        return f"boundedness ({self.s},{'?' if self.k is None else self.k})"


def validate_property(prop, defs: dict) -> None:
    """Reject malformed specs up front.  Identifiers referenced by
    control-state questions need no definition: an identifier absent from
    both the definitions and the invariant is trivially unreachable."""
    if isinstance(prop, (Secrecy, Misauthentication)):
        return
    if isinstance(prop, ControlStateReach):
        if not str(prop.q):
            raise ModelError("control-state property needs an identifier")
        return
    if isinstance(prop, KnownPlaintext):
        if not isinstance(prop.key, Name):
            raise ModelError("known-plaintext key must be a name")
        if prop.n != OMEGA and (not isinstance(prop.n, int) or prop.n < 1):
            raise ModelError("known-plaintext count must be positive or omega")
        return
    if isinstance(prop, Boundedness):
        if prop.s < 1:
            raise ModelError("size bound must be at least 1")
        if prop.k is not None and prop.k < 0:
            raise ModelError("depth bound must not be negative")
        return
    raise ModelError(f"not a property specification: {prop!r}")


# ---------------------------------------------------------------------------
# Verdicts.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """status is property-specific; holds is the three-valued outcome the
    exit code is computed from (True holds, False violated, None unknown)."""

    status: str
    holds: Optional[bool]
    reason: str = ""

    def describe(self) -> str:
        tag = {True: "holds", False: "violated", None: "unknown"}[self.holds]
        out = f"{self.status} ({tag})"
        return f"{out}: {self.reason}" if self.reason else out


def _fixed(sf: Sf) -> Sf:
    return Sf(sf.names, sf.knowledge, sf.calls, ())


def _certified(x):
    if isinstance(x, Certificate):
        return x.invariant, None
    if isinstance(x, Invariant):
        return x, "no inductiveness certificate supplied for the invariant"
    raise ModelError("expected an Invariant or a Certificate")


def _each_block(l: Sf):
    for b in l.blocks:
        yield b
        yield from _each_block(b)


def _calls_to(inv: Invariant, q: str) -> Optional[int]:
    for i, l in enumerate(inv.limits):
        parts = [l] + list(_each_block(l))
        if any(c == q for p in parts for c, _ in p.calls):
            return i
    return None


def check_secrecy(x) -> Verdict:
    """SECURE iff no member limit contains a call to Leak: limits denote
    downward-closed sets, so a Leak-free limit excludes every process
    containing one."""
    inv, why = _certified(x)
    if why:
        return Verdict("UNKNOWN", None, why)
    i = _calls_to(inv, "Leak")
    if i is None:
        return Verdict("SECURE", True)
    return Verdict("LEAKY", False, f"limit {i} contains a call to Leak")


def check_control_state(x, q: str) -> Verdict:
    """UNREACHABLE iff no member limit contains a call to q."""
    inv, why = _certified(x)
    if why:
        return Verdict("UNKNOWN", None, why)
    i = _calls_to(inv, str(q))
    if i is None:
        return Verdict("UNREACHABLE", True)
    return Verdict("REACHABLE-POSSIBLE", None,
                   f"limit {i} contains a call to {q}; the invariant "
                   f"over-approximates, so reachability is not confirmed")


def _auth_pattern() -> Sf:
    a, b, c, n = (Name(t) for t in ("auth.a", "auth.b", "auth.c", "auth.n"))
    return make_sf((a, b, c, n), (),
                   (("Auth", (a, b, n)), ("Auth", (b, c, n))),
                   keep_names=(a, b, c, n))


def check_misauthentication(x) -> Verdict:
    """SAFE iff the two-claims-one-nonce pattern is in no member limit."""
    inv, why = _certified(x)
    if why:
        return Verdict("UNKNOWN", None, why)
    if _calls_to(inv, "Auth") is None:
        return Verdict("SAFE", True, "no Auth claims are ever emitted")
    pat = _auth_pattern()
    for i, l in enumerate(inv.limits):
        if member(pat, l):
            return Verdict("UNSAFE", False,
                           f"limit {i} admits Auth[a,b,n] next to Auth[b,c,n]")
    return Verdict("SAFE", True)


def _pair_block(key: Name) -> Sf:
    m = FreshNames((key,)).fresh(stem="m")
    return make_sf((m,), frozenset({m, senc(m, key)}), ())


def _kp_pattern(limits: tuple, key: Name, n) -> Sf:
    """The test set for known-plaintext susceptibility: n (or ω) parallel
    copies of νm.(⟨m⟩ ∥ ⟨senc(m,key)⟩).  A key that is free somewhere in
    the invariant stays free in the pattern; an internal key is bound over
    the whole pattern, asking for the pairs to share one protocol key."""
    free = any(key in l.free_names for l in limits)
    outer = () if free else (key,)
    if n == OMEGA:
        return make_sf(outer, (), (), (_pair_block(key),), keep_names=outer)
    f = FreshNames((key,))
    names = tuple(f.fresh(stem="m") for _ in range(n))
    know = frozenset(m for m in names) | frozenset(senc(m, key) for m in names)
    return make_sf(outer + names, know, (), keep_names=outer + names)


def _is_pair_block(b: Sf, key: Name) -> bool:
    if len(b.names) != 1 or b.calls or b.blocks:
        return False
    m = b.names[0]
    return b.knowledge == frozenset({m, senc(m, key)})


def check_known_plaintext(x, key: Name, n=OMEGA) -> Verdict:
    """RESISTANT iff the invariant excludes n (or unboundedly many) known
    plaintext/ciphertext pairs under the key.  With n = ω inclusion of the
    pattern only shows the invariant is too coarse to rule it out, so the
    verdict is SUSCEPTIBLE only on literal syntactic containment and
    UNKNOWN otherwise."""
    validate_property(KnownPlaintext(key, n), {})
    inv, why = _certified(x)
    if why:
        return Verdict("UNKNOWN", None, why)
    for i, l in enumerate(inv.limits):
        if any(_is_pair_block(b, key) for b in _each_block(l)):
            return Verdict("SUSCEPTIBLE", False,
                           f"limit {i} iterates a known plaintext/ciphertext "
                           f"pair under {key.text}")
    if n == OMEGA:
        pat = _kp_pattern(inv.limits, key, n)
        if any(limit_included(pat, l) is not None for l in inv.limits):
            return Verdict("UNKNOWN", None,
                           "the invariant admits unboundedly many known "
                           "pairs; susceptibility is not confirmed")
        return Verdict("RESISTANT", True)
    pat = _kp_pattern(inv.limits, key, n)
    for i, l in enumerate(inv.limits):
        if member(pat, l):
            return Verdict("UNKNOWN", None,
                           f"limit {i} admits {n} known pairs; "
                           f"susceptibility is not confirmed")
    return Verdict("RESISTANT", True)


def _bounded_verdict(cert: Certificate, spec: Boundedness) -> Verdict:
    k = cert.invariant.k
    if spec.k is None or k <= spec.k:
        return Verdict("BOUNDED", True,
                       f"invariant certifies depth {k} at size {spec.s}")
    return Verdict("UNKNOWN", None,
                   f"inferred invariant has depth {k}, above the "
                   f"requested {spec.k}")


# ---------------------------------------------------------------------------
# Traces.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """A finite run: the initial state and one (label, state) per step."""

    initial: Sf
    steps: tuple  # ((Label, Sf), ...)

    def replay(self, defs: dict, s: int, ty=None) -> bool:
        """Confirm every step against the one-step successor relation."""
        cur = self.initial
        for lab, st in self.steps:
            if not any(l2 == lab and q == st
                       for l2, q in successors(cur, defs, s, ty)):
                return False
            cur = st
        return True

    def describe(self) -> str:
        lines = [f"trace of {len(self.steps)} steps"]
        lines += [f"  {i + 1}. {lab.describe()}"
                  for i, (lab, _) in enumerate(self.steps)]
        return "\n".join(lines)

    def to_data(self) -> dict:
        return {
            "initial": _sf_data(self.initial),
            "steps": [{"label": lab.describe(), "state": _sf_data(st)}
                      for lab, st in self.steps],
        }


# ---------------------------------------------------------------------------
# The refuter: breadth-first exploration with subsumption pruning.
# ---------------------------------------------------------------------------


class _Refuter:
    """Layered search through reach_s.  States are standard forms deduped
    by canonical key; a new state embedded in an already-seen one is
    dropped (its traces are simulated by the larger state, so violations,
    which are upward-closed, are still found)."""

    def __init__(self, sf0: Sf, defs: dict, s: int, ty, check, prune: bool):
        self.defs, self.s, self.ty = defs, s, ty
        self.check = check
        self.prune = prune
        self.states = [sf0]
        self.parents = [(-1, None)]
        self.frontier = [0]
        self.seen = {canonical_key(sf0)}
        self.exhausted = False
        self.start = True

    def _trace(self, i: int) -> Trace:
        steps = []
        while i != 0:
            j, lab = self.parents[i]
            steps.append((lab, self.states[i]))
            i = j
        return Trace(self.states[0], tuple(reversed(steps)))

    def step(self, budget: Budget):
        """Expand one layer; a (reason, trace) pair on violation."""
        if self.start:
            self.start = False
            why = self.check(self.states[0])
            if why is not None:
                return why, self._trace(0)
        nxt = []
        for i in self.frontier:
            budget.charge()
            for lab, q in successors(self.states[i], self.defs, self.s,
                                     self.ty, budget=budget):
                why = self.check(q)
                if why is not None:
                    self.states.append(q)
                    self.parents.append((i, lab))
                    return why, self._trace(len(self.states) - 1)
                key = canonical_key(q)
                if key in self.seen:
                    continue
                if self.prune and any(
                        knowledge_embedding(_fixed(q), _fixed(v)) is not None
                        for v in self.states):
                    continue
                self.seen.add(key)
                self.states.append(q)
                self.parents.append((i, lab))
                nxt.append(len(self.states) - 1)
        self.frontier = nxt
        if not nxt:
            self.exhausted = True
        return None


def _violation_checker(prop, sf0: Sf, defs: dict):
    """A state predicate returning a violation description, or None if the
    property has no refuter (known-plaintext with ω, boundedness)."""
    if isinstance(prop, Secrecy):
        return lambda st: ("a call to Leak is reachable"
                           if any(c == "Leak" for c, _ in st.calls) else None)
    if isinstance(prop, ControlStateReach):
        q = str(prop.q)
        return lambda st: (f"a call to {q} is reachable"
                           if any(c == q for c, _ in st.calls) else None)
    if isinstance(prop, Misauthentication):
        pat = _fixed(_auth_pattern())
        return lambda st: ("conflicting Auth claims are reachable"
                           if knowledge_embedding(pat, _fixed(st)) is not None
                           else None)
    if isinstance(prop, KnownPlaintext) and prop.n != OMEGA:
        pat = _fixed(_kp_pattern((sf0,), prop.key, prop.n))
        return lambda st: (f"{prop.n} known pairs under {prop.key.text} "
                           f"are reachable"
                           if knowledge_embedding(pat, _fixed(st)) is not None
                           else None)
    return None


# ---------------------------------------------------------------------------
# The prover: the inference loop, one check-and-widen round at a time.
# ---------------------------------------------------------------------------


class _Prover:
    def __init__(self, sf0: Sf, defs: dict, s: int, ty, rounds: int,
                 union_mode: bool):
        self.sf0, self.defs, self.s = sf0, defs, s
        self.ty = _ty_tuple(ty)
        self.rounds = rounds
        self.union_mode = union_mode
        self.limits = [sf0]
        self.attempts: dict = {}
        self.done = False
        self.result = None  # (Invariant, Certificate)
        self.reason = ""

    def step(self, budget: Budget) -> None:
        budget.charge()
        inv = Invariant(tuple(self.limits), self.s, self.ty)
        out = check_inductive(inv, self.defs, budget=budget,
                              rounds=self.rounds)
        if out:
            mem = _membership_receipt(self.sf0, tuple(self.limits))
            if mem is None:
                self.done = True
                self.reason = "no membership receipt for the initial process"
                return
            self.done = True
            self.result = (inv, Certificate(inv, mem, out))
            return
        key = (out.source, canonical_key(out.successor))
        tries = self.attempts.get(key, 0)
        self.attempts[key] = tries + 1
        grown = None
        if tries == 0:
            grown = _widen_into(self.limits[out.source], out.successor,
                                out.bound)
        if grown is not None and grown != self.limits[out.source]:
            self.limits[out.source] = grown
        elif self.union_mode:
            self.limits.append(out.successor)
        else:
            self.limits[out.source] = _parallel_merge(
                self.limits[out.source], out.successor)


def _prover_verdict(prop, cert: Certificate) -> Verdict:
    if isinstance(prop, Secrecy):
        return check_secrecy(cert)
    if isinstance(prop, ControlStateReach):
        return check_control_state(cert, prop.q)
    if isinstance(prop, Misauthentication):
        return check_misauthentication(cert)
    if isinstance(prop, KnownPlaintext):
        return check_known_plaintext(cert, prop.key, prop.n)
    return _bounded_verdict(cert, prop)


_POSITIVE = {
    Secrecy: "SECURE",
    ControlStateReach: "UNREACHABLE",
    Misauthentication: "SAFE",
    KnownPlaintext: "RESISTANT",
    Boundedness: "BOUNDED",
}

_NEGATIVE = {
    Secrecy: "LEAKY",
    ControlStateReach: "REACHABLE",
    Misauthentication: "UNSAFE",
    KnownPlaintext: "SUSCEPTIBLE",
    Boundedness: "UNBOUNDED",
}


# ---------------------------------------------------------------------------
# The race.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Report:
    """Outcome of a race, with whichever evidence the winner produced."""

    prop: object
    verdict: Verdict
    winner: Optional[str]  # "prover" | "refuter" | None
    certificate: Optional[Certificate] = None
    trace: Optional[Trace] = None
    visited: int = 0
    rounds: int = 0

    def describe(self) -> str:
        lines = [f"property  {self.prop.describe()}",
                 f"verdict   {self.verdict.describe()}"]
        if self.winner:
            lines.append(f"winner    {self.winner} "
                         f"({self.visited} states, {self.rounds} rounds)")
        if self.trace is not None:
            lines.append(self.trace.describe())
        return "\n".join(lines)

    def to_data(self) -> dict:
        return {
            "property": self.prop.describe(),
            "status": self.verdict.status,
            "holds": self.verdict.holds,
            "reason": self.verdict.reason,
            "winner": self.winner,
            "visited": self.visited,
            "rounds": self.rounds,
            "certificate": (self.certificate.to_data()
                            if self.certificate is not None else None),
            "trace": self.trace.to_data() if self.trace is not None else None,
        }


def prover_refuter(p0, defs: dict, s: int, ty=None, prop=None,
                   budget: Optional[Budget] = None, *,
                   union_mode: bool = False, rounds: int = 3,
                   prune: bool = True) -> Report:
    """Race inference against exploration on a shared budget.

    Refuter violations and an exhausted state space are conclusive either
    way; a certified invariant is conclusive when the property check on it
    holds.  A failing check on the invariant (a leak, a contained attack
    pattern) is reported only once the refuter can no longer overrule it."""
    prop = Secrecy() if prop is None else prop
    validate_property(prop, defs)
    budget = budget if budget is not None else Budget()
    sf0 = p0 if isinstance(p0, Sf) else standard_form(p0)
    check = _violation_checker(prop, sf0, defs)
    refuter = (None if check is None else
               _Refuter(sf0, defs, s, ty, check, prune))
    prover = _Prover(sf0, defs, s, ty, rounds, union_mode)
    pending: Optional[Verdict] = None
    nrounds = 0

    def report(verdict, winner, trace=None) -> Report:
        cert = prover.result[1] if prover.result is not None else None
        return Report(prop, verdict, winner, cert, trace,
                      visited=len(refuter.states) if refuter else 0,
                      rounds=nrounds)

    try:
        while True:
            nrounds += 1
            if refuter is not None and not refuter.exhausted:
                hit = refuter.step(budget)
                if hit is not None:
                    why, trace = hit
                    return report(Verdict(_NEGATIVE[type(prop)], False, why),
                                  "refuter", trace)
                if refuter.exhausted:
                    n = len(refuter.states)
                    return report(
                        Verdict(_POSITIVE[type(prop)], True,
                                f"explored all {n} reachable states "
                                f"without a violation"),
                        "refuter")
            if not prover.done:
                prover.step(budget)
                if prover.done and prover.result is not None:
                    v = _prover_verdict(prop, prover.result[1])
                    if v.holds:
                        return report(v, "prover")
                    pending = v
            if prover.done and (refuter is None or refuter.exhausted):
                if pending is not None:
                    return report(pending, "prover")
                return report(
                    Verdict("UNKNOWN", None,
                            prover.reason or "no conclusion"), None)
    except BudgetExhausted:
        if pending is not None:
            return report(pending, "prover")
        return report(Verdict("UNKNOWN", None, "budget exhausted"), None)


# ---------------------------------------------------------------------------
# Plain exploration (the refuter without a property).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExploreResult:
    layers: tuple  # layer 0 is the initial state
    visited: int
    truncated: bool


def explore(p0, defs: dict, s: int, ty=None, *, depth: int = 3,
            budget: Optional[Budget] = None, cap: int = 64,
            prune: bool = True) -> ExploreResult:
    """Breadth-first layers of reach_s, for inspecting how configurations
    grow.  Oversized layers keep the deepest-nested states (the ones that
    witness unbounded growth); a hit budget truncates the result rather
    than failing."""
    budget = budget if budget is not None else Budget()
    sf0 = p0 if isinstance(p0, Sf) else standard_form(p0)
    layers = [(sf0,)]
    seen = {canonical_key(sf0)}
    visited = [sf0]
    truncated = False
    try:
        for _ in range(depth):
            nxt = []
            for st in layers[-1]:
                budget.charge()
                for _lab, q in successors(st, defs, s, ty, budget=budget):
                    key = canonical_key(q)
                    if key in seen:
                        continue
                    if prune and any(
                            knowledge_embedding(_fixed(q), _fixed(v))
                            is not None for v in visited):
                        continue
                    seen.add(key)
                    visited.append(q)
                    nxt.append((key, q))
            if len(nxt) > cap:
                nxt.sort(key=lambda kq: (-kq[1].nesting(), kq[0]))
                nxt = nxt[:cap]
                truncated = True
            if not nxt:
                break
            layers.append(tuple(q for _, q in nxt))
    except BudgetExhausted:
        truncated = True
    return ExploreResult(tuple(layers), len(visited), truncated)
