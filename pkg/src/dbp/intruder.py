"""Intruder deduction for the pair/senc/aenc/pub signature.

Derivability Γ ⊢ M is decided in two phases:

  analysis   saturate Γ with everything extractable (projections of pairs,
             decryptions whose key is derivable from the current set);
  synthesis  check M can be built from the closure with constructors.

The sequent-style rules (projection, decryption, encryption, pairing, pub)
are also implemented directly as an exhaustive proof search
(:func:`derives_by_proof_search`); it is exponentially slower but
structurally independent, and the test suite uses it as a differential
oracle for :func:`derives`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable

from .terms import App, Message, Name, msg_key, pub, subst

Knowledge = frozenset  # of Message


def knowledge(msgs: Iterable[Message]) -> Knowledge:
    return frozenset(msgs)


class Closure:
    """Analysis closure of a knowledge set, with a synthesis cache."""

    __slots__ = ("elements", "_synth")

    def __init__(self, gamma: Iterable[Message]):
        elems = set(gamma)
        # Saturate.  Projections are unconditional; decryptions need their key
        # derivable from the evolving closure, so iterate to a fixpoint.
        changed = True
        while changed:
            changed = False
            for m in list(elems):
                if not isinstance(m, App):
                    continue
                if m.fn == "pair":
                    for a in m.args:
                        if a not in elems:
                            elems.add(a)
                            changed = True
                elif m.fn == "senc":
                    body, key = m.args
                    if body not in elems and _synth_from(elems, key):
                        elems.add(body)
                        changed = True
                elif m.fn == "aenc":
                    body, key = m.args
                    if (
                        body not in elems
                        and isinstance(key, App)
                        and key.fn == "pub"
                        and _synth_from(elems, key.args[0])
                    ):
                        elems.add(body)
                        changed = True
        self.elements = frozenset(elems)
        self._synth: dict[Message, bool] = {}

    def synthesizable(self, m: Message, extra: frozenset = frozenset()) -> bool:
        """Can m be built from the closure (plus the names in `extra`)?"""
        if extra:
            return _synth_from(self.elements | extra, m)
        got = self._synth.get(m)
        if got is None:
            got = _synth_from(self.elements, m)
            self._synth[m] = got
        return got


def _synth_from(elems, m: Message) -> bool:
    if m in elems:
        return True
    if isinstance(m, App):
        return all(_synth_from(elems, a) for a in m.args)
    return False


_closure_cache: dict[Knowledge, Closure] = {}


def closure(gamma: Knowledge) -> Closure:
    got = _closure_cache.get(gamma)
    if got is None:
        if len(_closure_cache) > 4096:
            _closure_cache.clear()
        got = Closure(gamma)
        _closure_cache[gamma] = got
    return got


def derives(gamma: Iterable[Message], m: Message) -> bool:
    """Γ ⊢ M via analysis/synthesis saturation."""
    g = gamma if isinstance(gamma, frozenset) else frozenset(gamma)
    return closure(g).synthesizable(m)


def knowledge_leq(g1: Iterable[Message], g2: Iterable[Message]) -> bool:
    """Γ1 ⊑ Γ2: everything in Γ1 is derivable from Γ2 (hence, by cut and
    monotonicity, everything derivable from Γ1 is)."""
    g2f = g2 if isinstance(g2, frozenset) else frozenset(g2)
    c2 = closure(g2f)
    return all(c2.synthesizable(m) for m in g1)


def knowledge_equiv(g1: Iterable[Message], g2: Iterable[Message]) -> bool:
    return knowledge_leq(g1, g2) and knowledge_leq(g2, g1)


def normalize_knowledge(gamma: Iterable[Message]) -> Knowledge:
    """A minimal generating set: analysis closure pruned of every element
    derivable from the rest.

    Deterministic: elements are dropped in descending canonical order, so
    composites are re-derived from their parts rather than the reverse.
    E.g. {pair(a,b)} normalizes to {a,b} and {senc(m,k),k} to {m,k}.
    """
    elems = set(closure(frozenset(gamma)).elements)
    for m in sorted(elems, key=msg_key, reverse=True):
        rest = frozenset(elems - {m})
        if Closure(rest).synthesizable(m):
            elems.remove(m)
    return frozenset(elems)


# ---------------------------------------------------------------------------
# Reference implementation: exhaustive sequent proof search.
# ---------------------------------------------------------------------------

def derives_by_proof_search(gamma: Iterable[Message], goal: Message) -> bool:
    """Decide Γ ⊢ M by exhaustive backward search over the sequent rules.

    Left rules saturate the antecedent (pair projection; decryption after
    proving the key), right rules decompose the goal.  Loops are cut by
    failing on a repeated (Γ, goal) pair along a branch; since every rule
    stays within the subterm closure of the inputs, the search space is
    finite without any depth bound.
    """
    memo: dict[tuple, bool] = {}

    def prove(g: frozenset, m: Message, pending: frozenset) -> bool:
        key = (g, m)
        if key in memo:
            return memo[key]
        if key in pending:
            return False
        pending = pending | {key}
        result = _prove(g, m, pending)
        memo[key] = result
        return result

    def _prove(g: frozenset, m: Message, pending) -> bool:
        if m in g:  # Id
            return True
        # Left rules: each one extends the antecedent; provability is
        # preserved in both directions, so trying each extension is complete.
        for e in g:
            if not isinstance(e, App):
                continue
            if e.fn == "pair":
                g2 = g | set(e.args)
                if g2 != g and prove(g2, m, pending):
                    return True
            elif e.fn == "senc":
                body, key_ = e.args
                g2 = g | {body, key_}
                if g2 != g and prove(g, key_, pending) and prove(g2, m, pending):
                    return True
            elif e.fn == "aenc":
                body, key_ = e.args
                if isinstance(key_, App) and key_.fn == "pub":
                    priv = key_.args[0]
                    g2 = g | {body, priv}
                    if g2 != g and prove(g, priv, pending) and prove(g2, m, pending):
                        return True
        # Right rules: build the goal.
        if isinstance(m, App):
            if all(prove(g, a, pending) for a in m.args):
                return True
        return False

    return prove(frozenset(gamma), goal, frozenset())


# ---------------------------------------------------------------------------
# Randomized axiom suite.
# ---------------------------------------------------------------------------

@dataclass
class AxiomReport:
    trials: dict[str, int] = field(default_factory=dict)
    failures: dict[str, list[str]] = field(default_factory=dict)

    def record(self, axiom: str, ok: bool, detail: str = "") -> None:
        self.trials[axiom] = self.trials.get(axiom, 0) + 1
        if not ok:
            self.failures.setdefault(axiom, []).append(detail)

    @property
    def total_failures(self) -> int:
        return sum(len(v) for v in self.failures.values())


AXIOMS = ("Id", "Mon", "Cut", "Constr", "Alpha", "Relevancy", "Absorption")


def _random_message(rng: random.Random, names: list[Name], max_size: int) -> Message:
    if max_size <= 1 or rng.random() < 0.4:
        return rng.choice(names)
    fn = rng.choice(("pair", "senc", "aenc", "pub"))
    if fn == "pub":
        return pub(_random_message(rng, names, max_size - 1))
    a = _random_message(rng, names, max_size - 1)
    b = _random_message(rng, names, max_size - 1)
    if fn == "aenc" and rng.random() < 0.5:
        b = pub(b)
    return App(fn, (a, b))


def _random_knowledge(rng: random.Random, names: list[Name], max_size: int) -> Knowledge:
    n = rng.randint(0, 5)
    return frozenset(_random_message(rng, names, max_size) for _ in range(n))


def check_intruder_axioms(
    seed: int = 0,
    trials: int = 1000,
    max_size: int = 4,
    max_names: int = 5,
) -> AxiomReport:
    """Randomized validation of `derives` against the deduction axioms.

    Each axiom gets `trials` independently sampled instances.  Returns a
    report with per-axiom trial counts and any failing instances.
    """
    rng = random.Random(seed)
    names = [Name(f"n{i}") for i in range(1, max_names + 1)]
    spare = [Name(f"w{i}") for i in range(1, max_names + 1)]
    report = AxiomReport()

    for _ in range(trials):
        g = _random_knowledge(rng, names, max_size)
        m = _random_message(rng, names, max_size)
        n2 = _random_message(rng, names, max_size)

        # Id: M ⊢ M.
        report.record("Id", derives(frozenset({m}), m), f"Id {m}")

        # Mon: Γ ⊢ M and Γ ⊆ Γ' imply Γ' ⊢ M.
        bigger = g | _random_knowledge(rng, names, max_size)
        ok = (not derives(g, m)) or derives(bigger, m)
        report.record("Mon", ok, f"Mon {sorted(g, key=msg_key)} {m}")

        # Cut: Γ ⊢ M and Γ,M ⊢ N imply Γ ⊢ N.
        ok = not (derives(g, m) and derives(g | {m}, n2)) or derives(g, n2)
        report.record("Cut", ok, f"Cut {sorted(g, key=msg_key)} {m} {n2}")

        # Constr: M1,…,Mn ⊢ f(M1,…,Mn).
        fn = rng.choice(("pair", "senc", "aenc", "pub"))
        args = tuple(_random_message(rng, names, max_size - 1) for _ in range(2 if fn != "pub" else 1))
        ok = derives(frozenset(args), App(fn, args))
        report.record("Constr", ok, f"Constr {fn} {args}")

        # Alpha: Γθ ⊢ Mθ iff Γ ⊢ M, θ an injective renaming onto fresh names.
        involved = sorted(frozenset().union(*(x.names for x in (g | {m}))) or set(), key=msg_key)
        targets = rng.sample(spare, len(involved)) if involved else []
        theta = dict(zip(involved, targets))
        g_r = frozenset(subst(x, theta) for x in g)
        m_r = subst(m, theta)
        ok = derives(g, m) == derives(g_r, m_r)
        report.record("Alpha", ok, f"Alpha {sorted(g, key=msg_key)} {m} {theta}")

        # Relevancy: Γ,a ⊢ M with a not in names(Γ,M) implies Γ ⊢ M.
        a = rng.choice(spare)
        if a not in frozenset().union(*(x.names for x in (g | {m})) or [frozenset()]):
            ok = (not derives(g | {a}, m)) or derives(g, m)
            report.record("Relevancy", ok, f"Relevancy {sorted(g, key=msg_key)} {a} {m}")

        # Absorption: for Γ' = Γ{x⃗→y⃗} with y⃗ fresh and names(M) ⊆ names(Γ):
        # Γ ∪ Γ' ⊢ M iff Γ ⊢ M.
        gnames = sorted(frozenset().union(*(x.names for x in g)) if g else set(), key=msg_key)
        if gnames:
            ys = rng.sample(spare, min(len(gnames), len(spare)))
            theta = dict(zip(gnames, ys))
            g_prime = frozenset(subst(x, theta) for x in g)
            m_in = rng.choice(sorted(g, key=msg_key))  # names(m_in) ⊆ names(Γ)
            ok = derives(g | g_prime, m_in) == derives(g, m_in)
            # Also test a composed message over Γ's names.
            m2 = _random_message(rng, gnames, max_size)
            ok = ok and (derives(g | g_prime, m2) == derives(g, m2))
            report.record("Absorption", ok, f"Absorption {sorted(g, key=msg_key)} {theta}")

    return report
