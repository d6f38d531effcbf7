"""Names and messages.

Messages are first-order terms over a fixed constructor signature

    pair/2   senc/2   aenc/2   pub/1

with names at the leaves.  Both names and applications are interned, so
equality is pointer equality and structurally shared terms are stored once.
Sizes (nesting depth of constructors) and free-name sets are computed at
construction and cached on the node.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Union

# Constructor arities.  `max` of these is the gamma used in fresh-name and
# extension bounds.
SIGNATURE: dict[str, int] = {"pair": 2, "senc": 2, "aenc": 2, "pub": 1}

GAMMA: int = max(SIGNATURE.values())

# Inputs and outputs on this channel talk to the public network: they are
# always enabled, and their traffic is what the intruder controls.
PUBLIC_CHANNEL = "in"


class Name:
    """An atomic name (nonce, key, agent identity, channel).

    Interned: ``Name.get(text)`` returns the same object for the same text.
    """

    __slots__ = ("text", "_key")
    _table: dict[str, "Name"] = {}

    def __init__(self, text: str):
        self.text = text
        self._key = (0, text)

    def __new__(cls, text: str):
        got = cls._table.get(text)
        if got is not None:
            return got
        obj = super().__new__(cls)
        cls._table[text] = obj
        return obj

    def __repr__(self) -> str:
        return self.text

    def __hash__(self) -> int:
        return hash(self.text)

    def __eq__(self, other) -> bool:
        return self is other

    def __lt__(self, other) -> bool:
        return self.text < other.text

    @property
    def size(self) -> int:
        return 1

    @property
    def names(self) -> frozenset["Name"]:
        return frozenset((self,))

    @property
    def key(self):
        """Canonical sort key: names sort before applications."""
        return self._key

    def base(self) -> str:
        """The user-facing stem of the name, without freshness suffixes."""
        return self.text.split(".")[0].rstrip("'~0123456789")


class App:
    """A constructor application.  Interned on (fn, args)."""

    __slots__ = ("fn", "args", "size", "names", "_key", "_hash")
    _table: dict[tuple, "App"] = {}

    def __init__(self, fn: str, args: tuple):
        pass  # populated in __new__

    def __new__(cls, fn: str, args: tuple):
        tab_key = (fn, args)
        got = cls._table.get(tab_key)
        if got is not None:
            return got
        if fn not in SIGNATURE:
            raise ValueError(f"unknown constructor {fn!r}")
        if len(args) != SIGNATURE[fn]:
            raise ValueError(f"{fn} expects {SIGNATURE[fn]} arguments, got {len(args)}")
        obj = super().__new__(cls)
        obj.fn = fn
        obj.args = args
        obj.size = 1 + max((a.size for a in args), default=0)
        obj.names = frozenset().union(*(a.names for a in args))
        obj._key = (1, fn, len(args), tuple(a.key for a in args))
        obj._hash = hash((fn,) + tuple(id(a) for a in args))
        cls._table[tab_key] = obj
        return obj

    def __repr__(self) -> str:
        return f"{self.fn}({', '.join(map(repr, self.args))})"

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other

    def __lt__(self, other) -> bool:
        return self.key < other.key

    @property
    def key(self):
        return self._key


Message = Union[Name, App]


def pair(a: Message, b: Message) -> App:
    return App("pair", (a, b))


def senc(m: Message, k: Message) -> App:
    return App("senc", (m, k))


def aenc(m: Message, k: Message) -> App:
    return App("aenc", (m, k))


def pub(k: Message) -> App:
    return App("pub", (k,))


def msg_key(m: Message):
    """Total order on messages: names first (by text), then applications by
    constructor tag, arity and argument keys."""
    return m.key


def subst(m: Message, mapping: dict[Name, Message]) -> Message:
    """Capture-free substitution of names by messages."""
    if not mapping:
        return m
    if isinstance(m, Name):
        return mapping.get(m, m)
    if m.names.isdisjoint(mapping.keys()):
        return m
    return App(m.fn, tuple(subst(a, mapping) for a in m.args))


def subterms(m: Message) -> Iterator[Message]:
    yield m
    if isinstance(m, App):
        for a in m.args:
            yield from subterms(a)


class FreshNames:
    """Deterministic generator of names that cannot clash with a given set.

    Produced names look like ``base.3``: the DSL lexer accepts the dot so the
    results survive printing and reparsing.
    """

    def __init__(self, avoid: Iterable[Name] = ()):
        self._avoid: set[str] = {n.text for n in avoid}
        self._counters: dict[str, int] = {}

    def avoid_also(self, names: Iterable[Name]) -> None:
        self._avoid.update(n.text for n in names)

    def fresh(self, like: Optional[Name] = None, stem: str = "x") -> Name:
        base = like.text.split(".")[0] if like is not None else stem
        i = self._counters.get(base, 0)
        while True:
            i += 1
            text = f"{base}.{i}"
            if text not in self._avoid:
                break
        self._counters[base] = i
        self._avoid.add(text)
        return Name(text)

    def reserve(self, n: Name) -> Name:
        """Keep `n` as is when it does not clash, else rename it."""
        if n.text not in self._avoid:
            self._avoid.add(n.text)
            return n
        return self.fresh(like=n)


def parse_message_sexp(s: str) -> Message:
    """Small helper for tests: parse ``senc(pair(a,b),k)`` style text."""
    s = s.strip()
    pos = 0

    def parse() -> Message:
        nonlocal pos
        start = pos
        while pos < len(s) and (s[pos].isalnum() or s[pos] in "_'.~"):
            pos += 1
        ident = s[start:pos]
        if not ident:
            raise ValueError(f"message syntax error at {pos} in {s!r}")
        if pos < len(s) and s[pos] == "(":
            pos += 1
            args = [parse()]
            while pos < len(s) and s[pos] == ",":
                pos += 1
                while pos < len(s) and s[pos] == " ":
                    pos += 1
                args.append(parse())
            if pos >= len(s) or s[pos] != ")":
                raise ValueError(f"expected ')' at {pos} in {s!r}")
            pos += 1
            return App(ident, tuple(args))
        return Name(ident)

    out = parse()
    if pos != len(s):
        raise ValueError(f"trailing input at {pos} in {s!r}")
    return out
