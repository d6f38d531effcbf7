"""Seeded random model generators for the differential test suites."""

import random

from dbp.calculus import Branch, CallP, Definition, Out, Sf, make_sf, par, res, standard_form
from dbp.limits import subst_sf
from dbp.terms import App, Name, subst


def rand_message(rng, leaves, max_size):
    if max_size <= 1 or rng.random() < 0.45:
        return rng.choice(leaves)
    fn = rng.choice(("pair", "senc", "aenc", "pub"))
    if fn == "pub":
        return App(fn, (rand_message(rng, leaves, max_size - 1),))
    return App(fn, (
        rand_message(rng, leaves, max_size - 1),
        rand_message(rng, leaves, max_size - 1),
    ))


def rand_defs(rng, s, n_defs=2):
    """Random definitions D0, D1, ... with arities 1-3, whose in-patterns
    mention every binder."""
    names = [f"D{i}" for i in range(n_defs)]
    arities = {n: rng.randint(1, 3) for n in names}
    defs = {}
    xs = (Name("x1"), Name("x2"))
    for dname in names:
        params = tuple(Name(f"p{i}") for i in range(arities[dname]))
        branches = []
        for _ in range(rng.randint(1, 2)):
            kind = rng.choices(("in", "out", "tau"), weights=(5, 3, 2))[0]
            channel = params[0] if rng.random() < 0.2 else None
            leaves = list(params)

            def rand_cont(depth=0):
                pieces = []
                cleaves = leaves + ([Name("w")] if depth else [])
                for _ in range(rng.randint(0, 2)):
                    kind2 = rng.random()
                    if kind2 < 0.5:
                        pieces.append(Out(rand_message(rng, cleaves, s)))
                    else:
                        callee = rng.choice(names)
                        args = tuple(rng.choice(cleaves) for _ in range(arities[callee]))
                        pieces.append(CallP(callee, args))
                body = par(*pieces)
                if depth == 0 and rng.random() < 0.4:
                    w = Name("w")
                    leaves.append(w)
                    inner = rand_cont(1)
                    leaves.remove(w)
                    return res((w,), par(Out(rand_message(rng, leaves + [w], s)), inner))
                return body

            if kind == "in":
                template = rand_message(rng, list(params) + list(xs), s)
                binders = tuple(x for x in xs if x in template.names)
                leaves = list(params) + list(binders)
                branches.append(Branch("in", channel, binders, template, rand_cont()))
            elif kind == "out":
                branches.append(Branch("out", channel, (), rand_message(rng, leaves, s), rand_cont()))
            else:
                branches.append(Branch("tau", None, (), None, rand_cont()))
        defs[dname] = Definition(dname, params, tuple(branches))
    return defs


def rand_config(rng, defs, s, n_names=4):
    names = [Name(f"m{i}") for i in range(rng.randint(2, n_names))]
    pieces = [Out(rand_message(rng, names, s)) for _ in range(rng.randint(0, 3))]
    for _ in range(rng.randint(1, 3)):
        d = rng.choice(sorted(defs))
        args = tuple(rng.choice(names) for _ in range(len(defs[d].params)))
        pieces.append(CallP(d, args))
    return standard_form(res(names, par(*pieces)))


def weaken(rng, sf):
    """A random sub-configuration: drop knowledge and calls, keep the rest."""
    knowledge = [m for m in sf.knowledge if rng.random() > 0.35]
    calls = [c for c in sf.calls if rng.random() > 0.35]
    return make_sf(sf.names, knowledge, calls)


def weaken_limit(rng, l):
    """A limit with a smaller denotation: drop components at every level."""
    knowledge = [m for m in l.knowledge if rng.random() > 0.3]
    calls = [c for c in l.calls if rng.random() > 0.3]
    blocks = [weaken_limit(rng, b) for b in l.blocks if rng.random() > 0.3]
    return make_sf(l.names, knowledge, calls, blocks, keep_names=l.names)


def rename_bound(l, suffix):
    """An α-variant of a limit: every bound name x becomes x<suffix>."""
    ren = {x: Name(x.text + suffix) for x in l.names}
    names = tuple(ren[x] for x in l.names)
    knowledge = [subst(m, ren) for m in l.knowledge]
    calls = [(n, tuple(subst(a, ren) for a in args)) for n, args in l.calls]
    blocks = [rename_bound(subst_sf(b, ren), suffix) for b in l.blocks]
    return make_sf(names, knowledge, calls, blocks, keep_names=names)


def rand_limit(rng, s, max_depth=2, callees=(("A", 1), ("B", 2))):
    """A random limit over dummy callees A/1 and B/2."""
    ctr = [0]

    def fresh():
        ctr[0] += 1
        return Name(f"n{ctr[0]}")

    def go(depth, outer):
        names = [fresh() for _ in range(rng.randint(1 if depth == 0 else 0, 2))]
        leaves = list(outer) + names
        knowledge = [rand_message(rng, leaves, s) for _ in range(rng.randint(0, 2))]
        calls = []
        for _ in range(rng.randint(0, 2)):
            cn, ar = rng.choice(callees)
            calls.append((cn, tuple(rng.choice(leaves) for _ in range(ar))))
        blocks = []
        if depth < max_depth:
            for _ in range(rng.randint(0, 2 if depth == 0 else 1)):
                blocks.append(go(depth + 1, leaves))
        return make_sf(names, knowledge, calls, blocks, keep_names=names)

    return go(0, [])
