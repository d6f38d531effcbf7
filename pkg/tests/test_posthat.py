"""Successor limits checked against the brute-force grounding semantics."""

import random

import pytest

from _gen import rand_defs, rand_limit
from _models import oracle_defs
from _oracles import posthat_coverage_gap

from dbp.calculus import (
    Branch,
    Budget,
    CallP,
    Definition,
    Out,
    Par,
    knowledge_embedding,
    make_sf,
    successors,
)
from dbp.inclusion import downward_set_included
from dbp.limits import ground
from dbp.posthat import extension_bound, posthat
from dbp.terms import Name, senc

a, b, k, x = Name("a"), Name("b"), Name("k"), Name("x")


def enc_limit():
    """E[k] next to an iterated block publishing a fresh name under k."""
    block = make_sf([x], [senc(x, k)], [], [], keep_names=[x])
    return make_sf([k], [], [("E", (k,))], [block], keep_names=[k])


def test_extension_bound_formula():
    defs = oracle_defs()
    assert extension_bound(defs, 3, {"x": 1}) == 2
    assert extension_bound(defs, 3, {}) == 5
    assert extension_bound(defs, 3, {"x": 1}, uncapped=True) == 5
    assert extension_bound(defs, 2, {}) == 3
    assert extension_bound({}, 3, {}) == 1


def test_enc_oracle_emits_one_injection():
    defs = oracle_defs()
    l = enc_limit()
    r = posthat(l, defs, 3, {"x": 1})
    assert r.b == 2 and r.s == 3
    assert len(r.successors) == 1
    lab, li = r.successors[0]
    assert lab.kind == "PubIn"
    assert lab.fresh, "the only size-1 candidate is a fresh intruder name"
    # The iterated part comes back untouched.
    assert li.blocks == l.blocks
    assert any(c == ("E", (k,)) for c in li.calls)


def test_enc_oracle_inductive():
    defs = oracle_defs()
    l = enc_limit()
    r = posthat(l, defs, 3, {"x": 1})
    assert downward_set_included([li for _, li in r.successors], [l])


def test_enc_oracle_coverage():
    defs = oracle_defs()
    l = enc_limit()
    r = posthat(l, defs, 3, {"x": 1})
    assert posthat_coverage_gap(l, defs, 3, {"x": 1}, list(r.successors),
                                r.b + 2) is None


def test_no_transition_no_successors():
    l = make_sf([k], [k], [], [make_sf([x], [x], [], [], keep_names=[x])],
                keep_names=[k])
    r = posthat(l, {}, 3, {})
    assert r.successors == ()
    assert r.b == 1


def test_deterministic_output():
    defs = oracle_defs()
    l = enc_limit()
    assert posthat(l, defs, 3, {"x": 1}) == posthat(l, defs, 3, {"x": 1})


def test_sibling_subsumption_pruned():
    # Two τ branches whose successors differ only by extra published
    # knowledge: the smaller one is covered by the larger and disappears.
    defs = {
        "D": Definition("D", (Name("p1"), Name("p2")), (
            Branch("tau", None, (), None, Out(Name("p1"))),
            Branch("tau", None, (), None,
                   Par((Out(Name("p1")), Out(Name("p2"))))),
        )),
    }
    l = make_sf([a, b], [], [("D", (a, b))],
                [make_sf([x], [x], [], [], keep_names=[x])],
                keep_names=[a, b])
    r = posthat(l, defs, 3, {})
    assert len(r.successors) == 1
    _, li = r.successors[0]
    assert a in li.knowledge and b in li.knowledge


def test_depth_budget_flags():
    defs = oracle_defs()
    l = enc_limit()
    assert posthat(l, defs, 3, {"x": 1}).depth_violations == ()
    r = posthat(l, defs, 3, {"x": 1}, depth_budget=1)
    assert r.depth_violations != ()


def test_typing_prune_sites_reported():
    defs = oracle_defs()
    r = posthat(enc_limit(), defs, 3, {"x": 1})
    assert ("E", 0, "x", 1) in r.ty_pruning
    r2 = posthat(enc_limit(), defs, 3, {})
    assert r2.ty_pruning == ()


def test_emitted_zero_groundings_reachable():
    defs = oracle_defs()
    l = enc_limit()
    r = posthat(l, defs, 3, {"x": 1})
    base = ground(l, r.b)
    succ = [q for _, q in successors(base, defs, 3, {"x": 1})]
    for _, li in r.successors:
        g0 = ground(li, 0)
        assert any(knowledge_embedding(g0, q) is not None for q in succ)


def _rand_instance(rng):
    defs = rand_defs(rng, 2)
    callees = tuple((n, len(d.params)) for n, d in sorted(defs.items()))
    l = rand_limit(rng, 2, max_depth=1, callees=callees)
    return defs, l


def test_random_coverage():
    rng = random.Random(46)
    ty = {"x1": 1, "x2": 1}
    for _ in range(25):
        defs, l = _rand_instance(rng)
        r = posthat(l, defs, 2, ty, budget=Budget(nodes=50_000))
        gap = posthat_coverage_gap(l, defs, 2, ty, list(r.successors),
                                   min(r.b + 2, 4), nodes=50_000)
        assert gap is None, f"uncovered successor: {gap}"


def test_random_zero_grounding_soundness():
    rng = random.Random(47)
    ty = {"x1": 1, "x2": 1}
    for _ in range(10):
        defs, l = _rand_instance(rng)
        r = posthat(l, defs, 2, ty, budget=Budget(nodes=50_000))
        if not r.successors:
            continue
        base = ground(l, r.b)
        succ = [q for _, q in successors(base, defs, 2, ty,
                                         budget=Budget(nodes=50_000))]
        for _, li in r.successors:
            g0 = ground(li, 0)
            assert any(knowledge_embedding(g0, q) is not None for q in succ)
