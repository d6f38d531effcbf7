"""Limit inclusion: worked examples, membership, order laws, differential."""

import random

import pytest

from _gen import rand_limit, rename_bound, weaken_limit
from _oracles import inclusion_counterexample

from dbp.calculus import CallP, Out, Par, Res, Zero, make_sf, standard_form
from dbp.inclusion import (
    downward_set_included,
    limit_included,
    member,
    replay_witness,
)
from dbp.limits import extend, ground
from dbp.terms import Name, pair, senc

x1, x2 = Name("x1"), Name("x2")
y1, y2, y3 = Name("y1"), Name("y2"), Name("y3")
a, b, c, k = Name("a"), Name("b"), Name("c"), Name("k")


def chain_pair():
    """Two limits with the same denotation written very differently.

    Left: one iterated block that restricts x2 and publishes senc(x2, x1)
    next to calls A[x2] and A[x1], all under an outer restriction x1.
    Right: a published free-standing name y3, A[y3] iterated, and an
    iterated block publishing a fresh y2 with A[y2].  The right side also
    restricts a y1 that occurs nowhere, which gives the renaming search a
    wrong first candidate for x1.
    """
    b1 = make_sf([x2], [senc(x2, x1)], [("A", (x2,)), ("A", (x1,))], [],
                 keep_names=[x2])
    l1 = make_sf([x1], [], [], [b1], keep_names=[x1])
    b0 = make_sf([], [], [("A", (y3,))], [])
    b2 = make_sf([y2], [y2], [("A", (y2,))], [], keep_names=[y2])
    l2 = make_sf([y1, y3], [y3], [], [b0, b2], keep_names=[y1, y3])
    return l1, l2


def test_chain_example_included():
    l1, l2 = chain_pair()
    w = limit_included(l1, l2)
    assert w is not None
    ren = w.renaming()
    assert ren[x1] == y3
    assert w.extension == 1
    assert w.sub is not None
    assert w.sub.extension == 1
    inner = w.sub.renaming()
    assert inner[x2].text.startswith("y2.")
    assert replay_witness(l1, l2, w)


def test_chain_example_not_included_reverse():
    l1, l2 = chain_pair()
    # The right side publishes a plain name; the left side only ever
    # publishes ciphertexts under an unreleased key.
    assert limit_included(l2, l1) is None
    assert inclusion_counterexample(l2, l1) == 0


def test_chain_example_wrong_pin_fails_late():
    l1, l2 = chain_pair()
    trace = []
    w = limit_included(l1, l2, pin={x1: y1}, trace=trace)
    assert w is None
    # The pinned renaming survives the fixed-part match (nothing constrains
    # x1 there) and dies on the iterated part: no call can ever match A[y1].
    passed_a = [e for e in trace if e["level"] == 0 and e["stage"] == "A"]
    assert any(e["sigma"].get("x1") == "y1" and e["ok"] for e in passed_a)
    failed_b = [e for e in trace if e["level"] == 0 and e["stage"] == "B"]
    assert any(e["sigma"].get("x1") == "y1" and not e["ok"] for e in failed_b)


def test_chain_example_right_pin_succeeds():
    l1, l2 = chain_pair()
    w = limit_included(l1, l2, pin={x1: y3})
    assert w is not None and w.renaming()[x1] == y3


def test_chain_example_unpinned_search_backtracks():
    l1, l2 = chain_pair()
    trace = []
    w = limit_included(l1, l2, trace=trace)
    assert w is not None
    # y1 precedes y3 in the prefix, so the search must have tried and
    # rejected the y1 branch before settling on y3.
    rejected = [
        e for e in trace
        if e["level"] == 0 and e["stage"] == "B" and not e["ok"]
    ]
    assert any(e["sigma"].get("x1") == "y1" for e in rejected)


def test_member_published_key_pair():
    p = Res((a, b), Par((Out(senc(a, b)), CallP("A", (b,)))))
    l = make_sf([], [], [], [make_sf([x1], [x1], [("A", (x1,))], [],
                                     keep_names=[x1])])
    assert member(p, l)
    # Two distinct copies are needed: one supplies b with its call, the
    # other supplies a.
    w = limit_included(standard_form(p), l)
    assert w is not None and w.extension == 2


def test_member_entangled_calls():
    p = Res((x1, x2), Par((CallP("B", (x1, x2)), CallP("B", (x2, x1)))))
    l = make_sf([], [], [], [make_sf([x1, x2], [], [("B", (x1, x2))], [],
                                     keep_names=[x1, x2])])
    assert not member(p, l)


def test_member_zero_in_anything():
    l1, l2 = chain_pair()
    assert member(Zero(), l1)
    assert member(Zero(), l2)
    assert member(Zero(), make_sf([y1], [y1], [], [], keep_names=[y1]))


def test_member_free_name_argument():
    # c is free in the call, so it cannot be matched by a restricted copy.
    p = CallP("A", (c,))
    l = make_sf([], [], [], [make_sf([x1], [], [("A", (x1,))], [],
                                     keep_names=[x1])])
    assert not member(p, l)
    lc = make_sf([], [], [], [make_sf([], [], [("A", (c,))], [])])
    assert member(p, lc)


def test_downward_set_included():
    l1, l2 = chain_pair()
    assert downward_set_included([], [l2])
    assert downward_set_included([l1], [l2])
    assert not downward_set_included([l2], [l1])
    # A parallel composition over-approximates the union of its parts.
    la = make_sf([a], [senc(a, k)], [], [], keep_names=[a])
    lb = make_sf([b], [pair(b, k)], [("A", (b,))], [], keep_names=[b])
    lab = make_sf([a, b], [senc(a, k), pair(b, k)], [("A", (b,))], [],
                  keep_names=[a, b])
    assert downward_set_included([la, lb], [lab])
    assert not downward_set_included([lab], [la, lb])


def test_extension_preserves_denotation():
    rng = random.Random(41)
    for _ in range(12):
        l = rand_limit(rng, 3, max_depth=1)
        e = extend(l, 2)
        assert limit_included(l, e) is not None
        assert limit_included(e, l) is not None


def test_reflexive_and_alpha_invariant():
    rng = random.Random(42)
    for _ in range(15):
        l = rand_limit(rng, 3, max_depth=1)
        w = limit_included(l, l)
        assert w is not None and replay_witness(l, l, w)
        r = rename_bound(l, ".r")
        assert limit_included(l, r) is not None
        assert limit_included(r, l) is not None


def test_transitive_on_weakening_chains():
    rng = random.Random(43)
    for _ in range(15):
        l3 = rand_limit(rng, 3, max_depth=1)
        l2 = weaken_limit(rng, l3)
        l1 = weaken_limit(rng, l2)
        assert limit_included(l2, l3) is not None
        assert limit_included(l1, l2) is not None
        assert limit_included(l1, l3) is not None


def test_witness_replay_rejects_tampering():
    l1, l2 = chain_pair()
    w = limit_included(l1, l2)
    assert replay_witness(l1, l2, w)
    import dataclasses
    bad_ext = dataclasses.replace(w, extension=0)
    assert not replay_witness(l1, l2, bad_ext)
    bad_ren = dataclasses.replace(w, names=((x1, y1),))
    assert not replay_witness(l1, l2, bad_ren)
    bad_sub = dataclasses.replace(w, sub=None)
    assert not replay_witness(l1, l2, bad_sub)


def test_witness_describe_mentions_renaming():
    l1, l2 = chain_pair()
    w = limit_included(l1, l2)
    text = w.describe()
    assert "x1 -> y3" in text
    assert "extension" in text


def test_included_agrees_with_grounding_oracle():
    rng = random.Random(44)
    agree_pos = agree_neg = 0
    for trial in range(120):
        kind = trial % 3
        if kind == 0:
            l2 = rand_limit(rng, 3, max_depth=1)
            l1 = weaken_limit(rng, l2)
        elif kind == 1:
            l2 = rand_limit(rng, 3, max_depth=1)
            l1 = rename_bound(weaken_limit(rng, l2), ".r")
        else:
            l1 = rand_limit(rng, 3, max_depth=1)
            l2 = rand_limit(rng, 3, max_depth=1)
        w = limit_included(l1, l2)
        if w is not None:
            assert replay_witness(l1, l2, w)
            assert inclusion_counterexample(l1, l2) is None
            agree_pos += 1
        else:
            ce = inclusion_counterexample(l1, l2)
            if ce is None:
                sf = l1
                deep = len(sf.names) + len(sf.calls) + 3
                ce = inclusion_counterexample(l1, l2, n_max=deep)
            assert ce is not None
            agree_neg += 1
    assert agree_pos > 30 and agree_neg > 30


def test_nested_blocks_roundtrip():
    rng = random.Random(45)
    checked = 0
    for _ in range(20):
        l = rand_limit(rng, 3, max_depth=2)
        if l.omega_count() > 2:
            continue
        w = limit_included(l, l)
        assert w is not None and replay_witness(l, l, w)
        g = ground(l, 2)
        assert member(g, l)
        checked += 1
    assert checked >= 8
