"""Words in a free group of finite rank.

A word is a tuple of nonzero ints: generator ``i`` (1-based) is ``i`` and its
inverse is ``-i``.  Functions returning a ``Word`` always return it freely
reduced.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from . import kernels
from .errors import UnknownLetter

Word = tuple

_TOKEN = re.compile(r"^(?P<name>[^\s^⁻¹]+?)(?:(?:\^(?P<exp>-?\d+))|(?P<inv>⁻¹))?$")


def letter_key(x: int):
    """Sort key putting a < a^-1 < b < b^-1 < ..."""
    return (abs(x), x < 0)


def word_key(w: Sequence[int]):
    return (len(w), [letter_key(x) for x in w])


@dataclass(frozen=True)
class Alphabet:
    rank: int
    names: tuple = ()

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        names = tuple(self.names) if self.names else _default_names(self.rank)
        if len(names) != self.rank:
            raise ValueError(f"expected {self.rank} generator names, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError("generator names must be distinct")
        for n in names:
            if not n or any(ch.isspace() for ch in n) or "^" in n or "⁻" in n:
                raise ValueError(f"bad generator name {n!r}")
        object.__setattr__(self, "names", names)

    @property
    def letters(self) -> tuple:
        """All letters in sort order: 1, -1, 2, -2, ..."""
        return tuple(x for i in range(1, self.rank + 1) for x in (i, -i))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name) + 1
        except ValueError:
            raise UnknownLetter(f"unknown generator {name!r}") from None

    def check(self, letters: Iterable[int]) -> tuple:
        out = tuple(letters)
        for x in out:
            if not isinstance(x, int) or x == 0 or abs(x) > self.rank:
                raise UnknownLetter(f"letter {x!r} outside an alphabet of rank {self.rank}")
        return out

    def parse(self, text: str) -> Word:
        """Parse ``"a b^-1"`` style text into a reduced word."""
        raw = []
        for tok in text.split():
            m = _TOKEN.match(tok)
            if not m:
                raise UnknownLetter(f"cannot parse token {tok!r}")
            x = self.index(m.group("name"))
            exp = -1 if m.group("inv") else int(m.group("exp") or 1)
            raw.extend([x if exp > 0 else -x] * abs(exp))
        return kernels.free_reduce(raw)

    def letter_name(self, x: int) -> str:
        name = self.names[abs(x) - 1]
        return name if x > 0 else name + "^-1"

    def format(self, w: Sequence[int]) -> str:
        return " ".join(self.letter_name(x) for x in w)


def _default_names(rank: int) -> tuple:
    if rank <= 26:
        return tuple(string.ascii_lowercase[:rank])
    return tuple(f"x{i}" for i in range(1, rank + 1))


def reduce(letters: Iterable[int], alphabet: Alphabet | None = None) -> Word:
    """Freely reduce a letter sequence.

    >>> reduce([1, -1, 2])
    (2,)
    >>> reduce([1, 2, -2, 1])
    (1, 1)
    """
    seq = alphabet.check(letters) if alphabet is not None else tuple(letters)
    if alphabet is None:
        for x in seq:
            if not isinstance(x, int) or x == 0:
                raise UnknownLetter(f"bad letter {x!r}")
    return kernels.free_reduce(seq)


def inverse(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


def multiply(*words: Sequence[int]) -> Word:
    out: list = []
    for w in words:
        out.extend(w)
    return kernels.free_reduce(out)


def power(w: Sequence[int], d: int) -> Word:
    if d < 0:
        return power(inverse(w), -d)
    return kernels.free_reduce(tuple(w) * d)


def cyclic_reduce(w: Sequence[int]):
    """Split a reduced word as ``conjugator * core * conjugator^-1``.

    >>> cyclic_reduce((1, 2, -1))
    ((2,), (1,))
    """
    return kernels.cyclic_reduce(tuple(w))


def conjugacy_length(w: Sequence[int]) -> int:
    return len(kernels.cyclic_reduce(tuple(w))[0])


def min_rotation(w: Sequence[int]) -> Word:
    """Least rotation of a cyclic word under ``letter_key`` order."""
    w = tuple(w)
    if not w:
        return w
    keyed = [letter_key(x) for x in w]
    n = len(w)
    best = 0
    for i in range(1, n):
        for j in range(n):
            a, b = keyed[(i + j) % n], keyed[(best + j) % n]
            if a != b:
                if a < b:
                    best = i
                break
    return w[best:] + w[:best]


def cyclic_normal_form(w: Sequence[int]) -> Word:
    """Canonical representative of the conjugacy class of ``w`` and of its inverse."""
    core, _ = cyclic_reduce(w)
    a, b = min_rotation(core), min_rotation(inverse(core))
    return min(a, b, key=word_key)


def conjugacy_class(w: Sequence[int]) -> Word:
    """Canonical cyclic representative of the conjugacy class of ``w`` alone."""
    return min_rotation(cyclic_reduce(w)[0])


def are_conjugate(u: Sequence[int], v: Sequence[int]) -> bool:
    return conjugacy_class(u) == conjugacy_class(v)


def reduced_words(alphabet: Alphabet, length: int) -> Iterator[Word]:
    """All reduced words of exactly ``length`` letters, in (lex) order."""
    letters = alphabet.letters
    if length == 0:
        yield ()
        return
    stack = [()]
    # depth-first in reverse so that popping yields lex order
    while stack:
        w = stack.pop()
        if len(w) == length:
            yield w
            continue
        nxt = [x for x in letters if not w or x != -w[-1]]
        for x in reversed(nxt):
            stack.append(w + (x,))


def cyclic_words(alphabet: Alphabet, length: int) -> Iterator[Word]:
    """Cyclically reduced words of given length, one per class up to rotation and inversion."""
    for w in reduced_words(alphabet, length):
        if length > 1 and w[0] == -w[-1]:
            continue
        if cyclic_normal_form(w) == w:
            yield w


@dataclass(frozen=True)
class Endomorphism:
    alphabet: Alphabet
    images: tuple

    def __post_init__(self):
        imgs = tuple(kernels.free_reduce(self.alphabet.check(im)) for im in self.images)
        if len(imgs) != self.alphabet.rank:
            raise ValueError("one image per generator is required")
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "_table", ((),) + imgs)

    @classmethod
    def from_strings(cls, alphabet: Alphabet, images: dict) -> "Endomorphism":
        missing = [n for n in alphabet.names if n not in images]
        if missing:
            raise ValueError(f"missing images for {missing}")
        extra = [n for n in images if n not in alphabet.names]
        if extra:
            raise UnknownLetter(f"images given for unknown generators {extra}")
        return cls(alphabet, tuple(alphabet.parse(images[n]) for n in alphabet.names))

    @classmethod
    def identity(cls, alphabet: Alphabet) -> "Endomorphism":
        return cls(alphabet, tuple((i,) for i in range(1, alphabet.rank + 1)))

    def __call__(self, w: Sequence[int]) -> Word:
        return kernels.substitute(tuple(w), self._table)

    def compose(self, inner: "Endomorphism") -> "Endomorphism":
        """``self o inner``: apply ``inner`` first."""
        return Endomorphism(self.alphabet, tuple(self(im) for im in inner.images))

    def power(self, k: int) -> "Endomorphism":
        if k < 0:
            raise ValueError("power must be nonnegative")
        out = Endomorphism.identity(self.alphabet)
        for _ in range(k):
            out = self.compose(out)
        return out

    def is_identity(self) -> bool:
        return all(im == (i,) for i, im in enumerate(self.images, 1))

    def to_strings(self) -> dict:
        return {n: self.alphabet.format(im) for n, im in zip(self.alphabet.names, self.images)}


def apply_endo(phi: Endomorphism, w: Sequence[int]) -> Word:
    return phi(w)


def is_injective_on_ball(phi: Endomorphism, radius: int):
    """``True`` if no nontrivial word of length <= radius dies, else the shortest one."""
    if radius < 1:
        raise ValueError("radius must be positive")
    for n in range(1, radius + 1):
        for w in reduced_words(phi.alphabet, n):
            if not phi(w):
                return w
    return True
