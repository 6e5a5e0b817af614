"""Exact arithmetic in free groups F_n, in Z, and in the semigroup N.

Free-group elements are tuples of nonzero ints: ``i`` stands for the
generator g_i and ``-i`` for its inverse. Tuples are always freely reduced.
Integer elements are plain Python ints.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .errors import GuardError, InputError, UnsupportedOperationError

Word = tuple
Element = Union[Word, int]

DEFAULT_ELEMENT_CAP = 10**6
DEFAULT_TUPLE_CAP = 10**7


def _letter_key(letter: int) -> tuple:
    # g1 < g1^-1 < g2 < g2^-1 < ...
    return (abs(letter), letter < 0)


@dataclass(frozen=True)
class FreeGroup:
    rank: int
    kind = "free"
    has_inverses = True

    def __post_init__(self):
        if not isinstance(self.rank, int) or self.rank < 1:
            raise InputError(f"free group rank must be a positive integer, got {self.rank!r}")

    def identity(self) -> Word:
        return ()

    def letters(self) -> list[int]:
        """All 2n letters in canonical order."""
        return sorted((s * i for i in range(1, self.rank + 1) for s in (1, -1)), key=_letter_key)

    def generators(self) -> list[Word]:
        return [(i,) for i in range(1, self.rank + 1)]

    def reduce(self, letters: Iterable[int]) -> Word:
        out: list[int] = []
        for x in letters:
            if not isinstance(x, int) or x == 0 or abs(x) > self.rank:
                raise InputError(f"generator index {x!r} out of range for F_{self.rank}")
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def mul(self, a: Word, b: Word) -> Word:
        # cancel the junction only; both inputs are reduced
        k = 0
        la, lb = len(a), len(b)
        while k < la and k < lb and a[la - 1 - k] == -b[k]:
            k += 1
        return a[: la - k] + b[k:]

    def inv(self, a: Word) -> Word:
        return tuple(-x for x in reversed(a))

    def length(self, a: Word) -> int:
        return len(a)

    def is_identity(self, a: Word) -> bool:
        return len(a) == 0

    def key(self, a: Word) -> tuple:
        return (len(a), tuple(_letter_key(x) for x in a))

    def validate(self, a) -> Word:
        if not isinstance(a, tuple):
            raise InputError(f"free group element must be a tuple of letters, got {a!r}")
        r = self.reduce(a)
        if r != a:
            raise InputError(f"word {a!r} is not reduced")
        return a

    def format(self, a: Word) -> str:
        if not a:
            return "e"
        return " ".join(f"a{x}" if x > 0 else f"a{-x}^-1" for x in a)

    _token = re.compile(r"^a(\d+)(?:\^(-?\d+))?$")

    def parse(self, text: str) -> Word:
        text = text.strip()
        if text in ("", "e"):
            return ()
        letters: list[int] = []
        for tok in text.split():
            m = self._token.match(tok)
            if not m:
                raise InputError(f"cannot parse letter {tok!r}")
            idx = int(m.group(1))
            power = int(m.group(2)) if m.group(2) is not None else 1
            letters.extend([idx if power > 0 else -idx] * abs(power))
        return self.reduce(letters)

    def to_dict(self) -> dict:
        return {"kind": "free", "rank": self.rank}

    def __str__(self):
        return f"F_{self.rank}"


@dataclass(frozen=True)
class IntegerGroup:
    kind = "integers"
    has_inverses = True

    def identity(self) -> int:
        return 0

    def reduce(self, letters: Iterable[int]) -> int:
        return sum(letters)

    def mul(self, a: int, b: int) -> int:
        return a + b

    def inv(self, a: int) -> int:
        return -a

    def length(self, a: int) -> int:
        return abs(a)

    def is_identity(self, a: int) -> bool:
        return a == 0

    def key(self, a: int) -> tuple:
        return (a,)

    def validate(self, a) -> int:
        if isinstance(a, bool) or not isinstance(a, int):
            raise InputError(f"integer element expected, got {a!r}")
        return a

    def format(self, a: int) -> str:
        return str(a)

    def parse(self, text: str) -> int:
        try:
            return int(str(text).strip())
        except ValueError:
            raise InputError(f"cannot parse integer {text!r}") from None

    def to_dict(self) -> dict:
        return {"kind": "integers"}

    def __str__(self):
        return "Z"


@dataclass(frozen=True)
class NaturalSemigroup(IntegerGroup):
    kind = "naturals"
    has_inverses = False

    def inv(self, a: int) -> int:
        raise UnsupportedOperationError("inversion is not defined in the semigroup N; embed in Z")

    def validate(self, a) -> int:
        a = super().validate(a)
        if a < 0:
            raise InputError(f"negative element {a} is not in N")
        return a

    def embedding(self) -> IntegerGroup:
        return IntegerGroup()

    def to_dict(self) -> dict:
        return {"kind": "naturals"}

    def __str__(self):
        return "N"


GroupSpec = Union[FreeGroup, IntegerGroup, NaturalSemigroup]


def group_from_dict(d: dict) -> GroupSpec:
    kind = d.get("kind")
    if kind == "free":
        return FreeGroup(int(d["rank"]))
    if kind == "integers":
        return IntegerGroup()
    if kind == "naturals":
        return NaturalSemigroup()
    raise InputError(f"unknown group kind {kind!r}")


def group_with_inverses(group: GroupSpec) -> GroupSpec:
    """N is embedded in Z whenever inverses are needed."""
    if isinstance(group, NaturalSemigroup):
        return group.embedding()
    return group


@dataclass(frozen=True)
class FiniteSet:
    """Ordered list of distinct elements of one group."""

    group: GroupSpec
    elements: tuple
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        elems = tuple(self.group.validate(_as_element(self.group, x)) for x in self.elements)
        index = {}
        for i, x in enumerate(elems):
            if x in index:
                raise InputError(f"duplicate element {self.group.format(x)}")
            index[x] = i
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __contains__(self, x):
        return x in self._index

    def index(self, x) -> int:
        return self._index[x]

    def get_index(self, x, default=None):
        return self._index.get(x, default)

    def sorted(self) -> "FiniteSet":
        return FiniteSet(self.group, tuple(sorted(self.elements, key=self.group.key)))

    def inverse(self) -> "FiniteSet":
        g = group_with_inverses(self.group)
        return FiniteSet(g, tuple(g.inv(x) for x in self.elements))

    def formatted(self) -> list[str]:
        return [self.group.format(x) for x in self.elements]

    def to_dict(self) -> dict:
        return {"group": self.group.to_dict(), "elements": self.formatted()}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteSet":
        group = group_from_dict(d["group"])
        return cls(group, tuple(group.parse(s) if isinstance(s, str) else s for s in d["elements"]))

    @classmethod
    def interval(cls, group: GroupSpec, lo: int, hi: int) -> "FiniteSet":
        """Integers lo..hi inclusive."""
        if isinstance(group, FreeGroup):
            raise UnsupportedOperationError("intervals are only defined for Z and N")
        return cls(group, tuple(range(lo, hi + 1)))


def _as_element(group, x):
    if isinstance(group, FreeGroup) and isinstance(x, list):
        return tuple(x)
    return x


def ball_size(group: FreeGroup, radius: int) -> int:
    n = group.rank
    if n == 1:
        return 2 * radius + 1
    q = 2 * n - 1
    return 1 + 2 * n * (q**radius - 1) // (q - 1)


def sphere_size(group: FreeGroup, k: int) -> int:
    if k == 0:
        return 1
    return 2 * group.rank * (2 * group.rank - 1) ** (k - 1)


def _require_free(group, what):
    if not isinstance(group, FreeGroup):
        raise UnsupportedOperationError(f"{what} is only defined for free groups; use FiniteSet.interval")


def _spheres(group: FreeGroup, radius: int):
    letters = group.letters()
    layer = [()]
    yield layer
    for _ in range(radius):
        layer = [w + (x,) for w in layer for x in letters if not (w and w[-1] == -x)]
        yield layer


def ball(group: GroupSpec, radius: int, cap: int = DEFAULT_ELEMENT_CAP) -> FiniteSet:
    """All reduced words of length <= radius, ordered by length then letters."""
    _require_free(group, "ball")
    if radius < 0:
        raise InputError("radius must be nonnegative")
    size = ball_size(group, radius)
    if size > cap:
        raise GuardError(f"ball of radius {radius} in {group} has {size} elements (cap {cap})", size=size, cap=cap)
    elems: list = []
    for layer in _spheres(group, radius):
        elems.extend(layer)
    return FiniteSet(group, tuple(elems))


def sphere(group: GroupSpec, k: int, cap: int = DEFAULT_ELEMENT_CAP) -> FiniteSet:
    _require_free(group, "sphere")
    if k < 0:
        raise InputError("sphere radius must be nonnegative")
    size = sphere_size(group, k)
    if size > cap:
        raise GuardError(f"sphere of radius {k} in {group} has {size} elements (cap {cap})", size=size, cap=cap)
    *_, last = _spheres(group, k)
    return FiniteSet(group, tuple(last))


@dataclass(frozen=True)
class RelationResult:
    """Outcome of a bounded-depth freeness or Leinert search.

    ``holds`` means no relation was found among products up to ``depth``.
    ``witness`` is a list of (element, exponent) factors whose product is e.
    """

    holds: bool
    depth: int
    witness: list | None
    examined: int

    def to_dict(self, group) -> dict:
        w = None
        if self.witness is not None:
            w = [[group.format(x), e] for x, e in self.witness]
        return {"holds": self.holds, "depth": self.depth, "witness": w, "examined": self.examined}


def is_free_set(S: FiniteSet, depth: int, cap: int = DEFAULT_TUPLE_CAP) -> RelationResult:
    """Search for a nontrivial relation among the elements of S.

    A product of at most ``depth`` factors s^{+-1}, with no factor followed by
    its own formal inverse, that evaluates to e refutes freeness.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    g = group_with_inverses(S.group)
    symbols = [(i, e) for i in range(len(S)) for e in (1, -1)]
    values = {(i, e): S[i] if e == 1 else g.inv(S[i]) for i, e in symbols}
    examined = 0

    def dfs(prefix, prod, remaining):
        nonlocal examined
        for sym in symbols:
            if prefix and prefix[-1] == (sym[0], -sym[1]):
                continue
            examined += 1
            if examined > cap:
                raise GuardError(f"freeness search exceeded {cap} products", cap=cap)
            p = g.mul(prod, values[sym])
            path = prefix + [sym]
            if remaining == 1:
                if g.is_identity(p):
                    return path
            else:
                found = dfs(path, p, remaining - 1)
                if found:
                    return found
        return None

    for length in range(1, depth + 1):
        found = dfs([], g.identity(), length)
        if found:
            return RelationResult(False, depth, [(S[i], e) for i, e in found], examined)
    return RelationResult(True, depth, None, examined)


def leinert_check(S: FiniteSet, depth: int, cap: int = DEFAULT_TUPLE_CAP) -> RelationResult:
    """Bounded Leinert test.

    For 2 <= k <= depth and x_1..x_{2k} in S with x_i != x_{i+1}, checks that
    x_1^{-1} x_2 x_3^{-1} x_4 ... x_{2k} != e.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    g = group_with_inverses(S.group)
    elems = list(S)
    inverses = [g.inv(x) for x in elems]
    examined = 0

    def dfs(prefix, prod, total):
        nonlocal examined
        pos = len(prefix)
        for i, x in enumerate(elems):
            if prefix and prefix[-1] == i:
                continue
            p = g.mul(prod, inverses[i] if pos % 2 == 0 else x)
            path = prefix + [i]
            if pos + 1 == total:
                examined += 1
                if examined > cap:
                    raise GuardError(f"Leinert search exceeded {cap} tuples", cap=cap)
                if g.is_identity(p):
                    return path
            else:
                found = dfs(path, p, total)
                if found:
                    return found
        return None

    for k in range(2, depth + 1):
        found = dfs([], g.identity(), 2 * k)
        if found:
            witness = [(elems[i], -1 if pos % 2 == 0 else 1) for pos, i in enumerate(found)]
            return RelationResult(False, depth, witness, examined)
    return RelationResult(True, depth, None, examined)


def product_of(group: GroupSpec, factors: Sequence[tuple]) -> Element:
    """Evaluate a list of (element, exponent) factors; exponent in {1, -1}."""
    g = group_with_inverses(group)
    p = g.identity()
    for x, e in factors:
        p = g.mul(p, x if e == 1 else g.inv(x))
    return p
