"""Standard forms, knowledge embedding, and the reduction semantics."""

import random

import pytest

from _gen import rand_config, rand_defs, weaken
from _models import nss_defs, nss_p0, oracle_defs, oracle_state

from dbp.calculus import (
    Branch,
    BudgetExhausted,
    Budget,
    CallP,
    Definition,
    ModelError,
    Omega,
    Out,
    check_pattern_implementable,
    canonical_key,
    knowledge_congruent,
    knowledge_embedding,
    make_sf,
    nesting_depth,
    par,
    res,
    standard_form,
    subst_process,
    successors,
)
from dbp.terms import Name, pair, pub, senc, subst

a, b, c, k, m, x, y = (Name(t) for t in "a b c k m x y".split())


# -- standard forms ---------------------------------------------------------

def test_standard_form_drops_unused_restriction():
    sf = standard_form(res((a,), par(Out(a), res((b,), par()))))
    assert sf.names == (a,)
    assert sf.knowledge == frozenset({a})


def test_standard_form_keep_names():
    sf = standard_form(res((a, b), Out(a)), keep_names=(b,))
    assert sf.names == (a, b)


def test_standard_form_renames_clashing_binders():
    p = par(res((a,), Out(senc(a, k))), res((a,), Out(pair(a, a))))
    sf = standard_form(p)
    assert len(sf.names) == 2
    assert len(sf.knowledge) == 2
    texts = sorted(n.text for n in sf.names)
    assert texts == ["a", "a.1"]


def test_standard_form_splits_omega_of_par():
    body = par(CallP("A", (a,)), CallP("B", (a,)))
    sf = standard_form(res((a,), Omega(body)))
    assert len(sf.blocks) == 2
    assert all(bl.names == () and len(bl.calls) == 1 for bl in sf.blocks)


def test_standard_form_collapses_omega_of_message():
    sf = standard_form(Omega(Out(pair(a, b))))
    assert sf.blocks == ()
    assert sf.knowledge == frozenset({pair(a, b)})


def test_standard_form_omega_idempotent():
    sf1 = standard_form(Omega(Omega(CallP("A", (a,)))))
    sf2 = standard_form(Omega(CallP("A", (a,))))
    assert canonical_key(sf1) == canonical_key(sf2)


def test_nesting_depth():
    p = res((a,), par(res((b,), par()), res((c,), Out(c))))
    # the b-branch is empty but nestν is a syntactic measure
    assert nesting_depth(p) == 2
    assert nesting_depth(Omega(p)) == 2
    assert nesting_depth(par(p, res((a, b, c), Out(a)))) == 3


def test_subst_process_avoids_capture():
    p = res((y,), Out(pair(x, y)))
    q = subst_process(p, {x: y})
    assert isinstance(q.names[0], Name)
    fresh = q.names[0]
    assert fresh != y
    assert q.body.message == pair(y, fresh)


# -- knowledge embedding ----------------------------------------------------

def test_congruence_decryption_chain():
    lhs = standard_form(res((a, b, c), par(
        Out(a), Out(senc(b, a)), Out(senc(c, b)), Out(c))))
    rhs = standard_form(res((a, b, c), par(Out(a), Out(b), Out(c))))
    assert knowledge_congruent(lhs, rhs)


def test_congruence_respects_keys():
    lhs = standard_form(res((a, b), par(Out(senc(a, b)))))
    rhs = standard_form(res((a, b), par(Out(a))))
    assert not knowledge_congruent(lhs, rhs)


def test_embedding_witness():
    small = standard_form(res((x,), par(Out(senc(x, k)), CallP("A", (x,)))))
    big = standard_form(res((a, b), par(
        Out(senc(a, k)), Out(b), CallP("A", (a,)), CallP("B", (b,)))))
    w = knowledge_embedding(small, big)
    assert w is not None
    assert w["names"][x] == a
    assert w["calls"] == [(0, 0)]


def test_embedding_is_injective_on_restricted_names():
    # B[x,y] ∥ B[y,x] shares its two names; two independent blocks cannot
    # host it.
    entangled = standard_form(res((x, y), par(CallP("B", (x, y)), CallP("B", (y, x)))))
    split = standard_form(res((a, b, c, m), par(CallP("B", (a, b)), CallP("B", (c, m)))))
    assert knowledge_embedding(entangled, split) is None
    joined = standard_form(res((a, b), par(CallP("B", (a, b)), CallP("B", (b, a)))))
    assert knowledge_embedding(entangled, joined) is not None


def test_embedding_free_names_are_literal():
    lhs = standard_form(res((x,), Out(senc(x, k))))
    assert knowledge_embedding(lhs, standard_form(res((y,), Out(senc(y, k))))) is not None
    assert knowledge_embedding(lhs, standard_form(res((y, m), Out(senc(y, m))))) is None


def test_embedding_knowledge_is_up_to_derivability():
    lhs = standard_form(par(Out(pair(a, b))))
    rhs = standard_form(par(Out(a), Out(b)))
    assert knowledge_embedding(lhs, rhs) is not None
    assert knowledge_embedding(rhs, lhs) is not None


def test_embedding_pin():
    lhs = standard_form(res((x,), Out(senc(x, k))))
    rhs = standard_form(res((a, b), par(Out(senc(a, k)), Out(senc(b, k)))))
    w = knowledge_embedding(lhs, rhs, pin={x: b})
    assert w is not None and w["names"][x] == b


# -- pattern implementability ----------------------------------------------

def test_pattern_implementable_examples():
    kbs = Name("kbs")
    assert check_pattern_implementable((x,), x)
    assert check_pattern_implementable((k,), senc(k, kbs))
    assert check_pattern_implementable((x, k), pair(x, k))
    assert not check_pattern_implementable((x, k), pair(x, senc(x, k)))
    assert not check_pattern_implementable((x, k), senc(x, k))
    assert not check_pattern_implementable((x,), senc(x, pub(x)))


# -- reduction --------------------------------------------------------------

def test_tau_successor_shape():
    defs = nss_defs()
    p0 = nss_p0()
    succs = successors(p0, defs, 3)
    taus = [(l, q) for l, q in succs if l.kind == "Tau"]
    assert len(taus) == 1
    _, q = taus[0]
    assert len(q.names) == 5
    assert sorted(c[0] for c in q.calls) == ["A1", "A2", "B1", "S"]
    # successor knowledge is normalised, so the published pairs decompose
    na = [n for n in q.names if n.text.startswith("na")][0]
    assert q.knowledge == frozenset({a, b, na})


def test_nss_first_input_round():
    defs = nss_defs()
    p0 = nss_p0()
    succs = successors(p0, defs, 3)
    # S can already be driven: the attacker knows pair(a,b), so it can feed
    # na:=a, na:=b, or a fresh name.
    s_inputs = [(l, q) for l, q in succs if l.kind == "PubIn" and l.calls[0][0] == "S"]
    got = {l.theta[0][1] for l, _ in s_inputs}
    assert a in got and b in got
    assert any(n not in (a, b) for n in got)
    assert len(s_inputs) == 3


def test_secret_gated_on_derivability():
    defs = nss_defs()
    kk = Name("kk")
    locked = standard_form(res((kk, b), par(Out(senc(kk, b)), CallP("Secret", (kk,)))))
    assert successors(locked, defs, 3) == []
    opened = standard_form(res((kk,), par(Out(kk), CallP("Secret", (kk,)))))
    succs = successors(opened, defs, 3)
    assert len(succs) == 1
    assert succs[0][1].calls[0][0] == "Leak"


def test_oracle_typed_single_successor():
    defs = oracle_defs()
    st = oracle_state()
    succs = successors(st, defs, 3, ty={"x": 1})
    assert len(succs) == 1
    label, q = succs[0]
    assert label.kind == "PubIn" and len(label.fresh) == 1
    fresh = label.fresh[0]
    assert q.knowledge == frozenset({senc(fresh, k)})
    assert q.calls == (("E", (k,)),)
    assert set(q.names) == {k, fresh}


def test_oracle_untyped_successor_classes():
    defs = oracle_defs()
    st = oracle_state()
    succs = successors(st, defs, 3)
    # payloads the attacker can build from two generated names, up to
    # renaming: n, (n,n), (n,n'), senc / aenc both ways, pub(n)
    assert len(succs) == 8
    payloads = {l.theta[0][1] for l, _ in succs}
    assert all(p.size <= 3 for p in payloads)
    stored = {next(iter(q.knowledge)) for _, q in succs}
    assert all(s.size <= 3 for s in stored)


def test_oracle_fresh_names_not_published():
    defs = oracle_defs()
    st = oracle_state()
    ((label, q),) = successors(st, defs, 3, ty={"x": 1})
    fresh = label.fresh[0]
    assert fresh not in q.knowledge
    # and the attacker cannot re-derive it at the next step: the only way
    # to mention it again is inside the stored ciphertext
    succs2 = successors(q, defs, 3, ty={"x": 1})
    for l2, _ in succs2:
        assert l2.theta[0][1] != fresh


def test_comm_on_private_channel():
    ch, d = Name("ch"), Name("d")
    defs = {
        "W": Definition("W", (ch,), (
            Branch("out", ch, (), a, CallP("Done", ())),)),
        "R": Definition("R", (ch, d), (
            Branch("in", ch, (x,), x, Out(senc(x, d))),)),
        "Done": Definition("Done", (), ()),
    }
    st = standard_form(res((ch, d), par(CallP("W", (ch,)), CallP("R", (ch, d)))))
    succs = successors(st, defs, 3)
    # the channel is not derivable: no PubOut, no PubIn, only Comm
    assert [l.kind for l, _ in succs] == ["Comm"]
    _, q = succs[0]
    assert senc(a, d) in q.knowledge
    assert ("Done", ()) in q.calls


def test_pubout_needs_derivable_channel():
    ch = Name("ch")
    defs = {
        "W": Definition("W", (ch,), (
            Branch("out", ch, (), a, CallP("W", (ch,))),)),
    }
    hidden = standard_form(res((ch,), CallP("W", (ch,))))
    assert successors(hidden, defs, 3) == []
    exposed = standard_form(res((ch,), par(Out(ch), CallP("W", (ch,)))))
    succs = successors(exposed, defs, 3)
    assert [l.kind for l, _ in succs] == ["PubOut"]
    assert a in succs[0][1].knowledge


def test_input_binding_inside_undecryptable_message():
    kk = Name("kk")
    defs = {
        "A": Definition("A", (kk,), (
            Branch("in", None, (x,), senc(x, kk), Out(pair(x, x))),)),
    }
    st = standard_form(res((kk, m), par(Out(senc(m, kk)), CallP("A", (kk,)))))
    succs = successors(st, defs, 3)
    # the principal decrypts; the attacker can only replay the whole
    # ciphertext, so x binds to m and to nothing else
    assert len(succs) == 1
    label, q = succs[0]
    assert label.theta == ((label.theta[0][0], m),)
    # republishing pair(m,m) hands the attacker m itself
    assert q.knowledge == frozenset({m, senc(m, kk)})
    assert label.fresh == ()


def test_size_bound_prunes_successors():
    defs = oracle_defs()
    st = oracle_state()
    # at s=2 only senc(n, k) fits the store
    assert len(successors(st, defs, 2)) == 1
    # a type bound caps the binder even when s is roomy
    succs = successors(st, defs, 4, ty={"x": 2})
    assert len(succs) == 8
    assert all(next(iter(q.knowledge)).size <= 3 for _, q in succs)


def test_unconstrained_binder_ranges_over_candidates():
    kk = Name("kk")
    defs = {
        "A": Definition("A", (kk,), (
            Branch("in", None, (x, y), x, Out(senc(pair(x, y), kk))),)),
    }
    st = standard_form(res((kk,), par(Out(a), CallP("A", (kk,)))))
    succs = successors(st, defs, 3, ty={"x": 1, "y": 1})
    combos = {(l.theta[0][1], l.theta[1][1]) for l, _ in succs}
    assert (a, a) in combos
    assert len(succs) == len(combos) >= 3


def test_budget_exhaustion_raises():
    defs = oracle_defs()
    st = oracle_state()
    with pytest.raises(BudgetExhausted):
        successors(st, defs, 3, budget=Budget(nodes=50))


def test_successors_deterministic():
    defs = nss_defs()
    p0 = nss_p0()
    one = [canonical_key(q) for _, q in successors(p0, defs, 3)]
    two = [canonical_key(q) for _, q in successors(p0, defs, 3)]
    assert one == two


def test_comm_requires_fully_bound_pattern():
    ch = Name("ch")
    defs = {
        "W": Definition("W", (ch,), (Branch("out", ch, (), a, par()),)),
        "R": Definition("R", (ch,), (Branch("in", ch, (x, y), x, Out(y)),)),
    }
    st = standard_form(res((ch,), par(CallP("W", (ch,)), CallP("R", (ch,)))))
    with pytest.raises(ModelError):
        successors(st, defs, 3)


# -- simulation -------------------------------------------------------------

def test_smaller_configurations_are_simulated():
    """If p1 embeds into p2, every successor of p1 embeds into some
    successor of p2 (the embedding is a simulation)."""
    rng = random.Random(7041)
    checked = 0
    for trial in range(60):
        s = rng.choice((2, 2, 3))
        ty = {"x1": 1, "x2": 1} if s == 3 else None
        defs = rand_defs(rng, s)
        p2 = rand_config(rng, defs, s)
        p1 = weaken(rng, p2)
        if knowledge_embedding(p1, p2) is None:
            continue
        succ2 = successors(p2, defs, s, ty)
        for label, q1 in successors(p1, defs, s, ty):
            assert any(
                knowledge_embedding(q1, q2) is not None for _, q2 in succ2
            ), f"trial {trial}: unmatched {label.describe()}"
            checked += 1
    assert checked > 30


def test_congruent_states_have_congruent_successors():
    rng = random.Random(2209)
    for _ in range(40):
        s = 2
        defs = rand_defs(rng, s)
        p1 = rand_config(rng, defs, s)
        ren = {n: Name(f"r{i}") for i, n in enumerate(p1.names)}
        p2 = make_sf(
            tuple(ren[n] for n in p1.names),
            [subst(msg, ren) for msg in p1.knowledge],
            [(cn, tuple(subst(arg, ren) for arg in args)) for cn, args in p1.calls],
        )
        assert knowledge_congruent(p1, p2)
        succ1 = successors(p1, defs, s)
        succ2 = successors(p2, defs, s)
        assert len(succ1) == len(succ2)
        for _, q1 in succ1:
            assert any(knowledge_congruent(q1, q2) for _, q2 in succ2)
