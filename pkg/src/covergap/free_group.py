"""Reduced words in the free group F_d, balls, and support splitting.

A word is a tuple of nonzero integers. Letter ``k`` (1 <= k <= d) stands for
the generator g_k and ``-k`` for its inverse. The identity is the empty tuple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

Word = tuple

IDENTITY: Word = ()


class InvalidLetterError(ValueError):
    """A letter is zero or exceeds the rank of the group."""


class BudgetExceededError(RuntimeError):
    """An enumeration would exceed the configured element budget."""


def _check_letters(letters: Sequence[int], d: int | None) -> None:
    for a in letters:
        a = int(a)
        if a == 0 or (d is not None and abs(a) > d):
            raise InvalidLetterError(f"invalid letter {a} for rank {d}")


def reduce_word(letters: Iterable[int], d: int | None = None) -> Word:
    """Free reduction of a letter sequence.

    Parameters
    ----------
    letters : iterable of int
        Signed letters, zero not allowed.
    d : int, optional
        Rank of the group; if given, letters with ``|a| > d`` are rejected.

    Returns
    -------
    tuple of int
        The unique reduced representative.
    """
    letters = [int(a) for a in letters]
    _check_letters(letters, d)
    stack: list[int] = []
    for a in letters:
        if stack and stack[-1] == -a:
            stack.pop()
        else:
            stack.append(a)
    return tuple(stack)


def mul(u: Word, v: Word) -> Word:
    """Product of two reduced words (cancellation only at the seam)."""
    k = 0
    n = min(len(u), len(v))
    while k < n and u[len(u) - 1 - k] == -v[k]:
        k += 1
    return tuple(u[: len(u) - k]) + tuple(v[k:])


def inv(w: Word) -> Word:
    return tuple(-a for a in reversed(w))


def word_length(w: Word) -> int:
    return len(w)


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def shortlex_key(w: Word) -> tuple:
    """Total order used everywhere for deterministic iteration."""
    return (len(w), tuple((abs(a), a < 0) for a in w))


def letters_of(d: int) -> list[int]:
    return [k for k in range(1, d + 1)] + [-k for k in range(1, d + 1)]


def ball_size(d: int, l: int) -> int:
    """Number of reduced words of length at most ``l`` in F_d."""
    if l < 0:
        return 0
    if d == 1:
        return 2 * l + 1
    q = 2 * d - 1
    return 1 + 2 * d * (q**l - 1) // (q - 1)


@dataclass(frozen=True)
class SupportSet:
    """A finite set of reduced words.

    Attributes
    ----------
    elements : frozenset of tuple
        The words in the set.
    """

    elements: frozenset

    @classmethod
    def of(cls, words: Iterable[Sequence[int]], d: int | None = None) -> "SupportSet":
        return cls(frozenset(reduce_word(w, d) for w in words))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Word]:
        return iter(self.sorted())

    def __contains__(self, w) -> bool:
        return tuple(w) in self.elements

    def sorted(self) -> list[Word]:
        return sorted(self.elements, key=shortlex_key)

    @property
    def radius(self) -> int:
        return max((len(w) for w in self.elements), default=0)

    def is_symmetric(self) -> bool:
        return all(inv(w) in self.elements for w in self.elements)

    def symmetric_closure(self) -> "SupportSet":
        return SupportSet(self.elements | frozenset(inv(w) for w in self.elements))

    def with_identity(self) -> "SupportSet":
        return SupportSet(self.elements | {IDENTITY})

    def quotient_set(self) -> "SupportSet":
        """All products g^{-1} h with g, h in the set."""
        words = self.sorted()
        return SupportSet(frozenset(mul(inv(g), h) for g in words for h in words))


def ball(d: int, l: int, budget: int = 10**6) -> SupportSet:
    """The ball B_l of reduced words of length at most ``l``.

    Raises
    ------
    BudgetExceededError
        If the ball has more than ``budget`` elements.
    """
    if d < 1 or l < 0:
        raise ValueError("need d >= 1 and l >= 0")
    size = ball_size(d, l)
    if size > budget:
        raise BudgetExceededError(f"|B_{l}| = {size} exceeds budget {budget}")
    out = [IDENTITY]
    layer = [IDENTITY]
    gens = letters_of(d)
    for _ in range(l):
        nxt = []
        for w in layer:
            for a in gens:
                if w and w[-1] == -a:
                    continue
                nxt.append(w + (a,))
        out.extend(nxt)
        layer = nxt
    return SupportSet(frozenset(out))


def split_support(S: SupportSet | Iterable[Word], l: int) -> SupportSet:
    """Symmetric S1 in B_{ceil(l/2)} containing the identity with S in S1^{-1} S1.

    Each word not already covered is split at its midpoint ``w = g^{-1} h``
    and both halves (and their inverses) are added, so ``|S1| <= 4|S| + 1``.
    Odd ``l`` is handled as ``l + 1``.
    """
    if not isinstance(S, SupportSet):
        S = SupportSet.of(S)
    if S.radius > l:
        raise ValueError(f"support radius {S.radius} exceeds l = {l}")
    half = (l + 1) // 2
    s1: set = {IDENTITY}
    covered: set = {IDENTITY}

    def add(x: Word) -> None:
        for y in (x, inv(x)):
            if y in s1:
                continue
            for z in list(s1):
                covered.add(mul(inv(z), y))
                covered.add(mul(inv(y), z))
            covered.add(IDENTITY)
            s1.add(y)

    for w in S.sorted():
        if w in covered:
            continue
        if len(w) <= half:
            add(w)
        else:
            k = len(w) // 2
            add(inv(w[:k]))
            add(w[k:])
    return SupportSet(frozenset(s1))


def words_to_json(words: Iterable[Word]) -> str:
    return json.dumps([list(w) for w in words])


def words_from_json(text: str, d: int | None = None) -> list[Word]:
    return [reduce_word(w, d) for w in json.loads(text)]


class CayleyBall:
    """Array-backed ball of the Cayley tree of F_d, for large radii.

    Nodes are indexed layer by layer. Within a layer the children of a node
    occupy a contiguous block, ordered by letter code. Letter codes are
    ``0..d-1`` for generators and ``d..2d-1`` for their inverses.

    Parameters
    ----------
    d : int
        Rank.
    radius : int
        Ball radius.
    budget : int
        Maximum number of nodes.
    """

    def __init__(self, d: int, radius: int, budget: int = 10**6):
        size = ball_size(d, radius)
        if size > budget:
            raise BudgetExceededError(f"|B_{radius}| = {size} exceeds budget {budget}")
        self.d = d
        self.radius = radius
        self.size = size
        q = 2 * d - 1
        starts = [0, 1]
        last = [np.array([-1], dtype=np.int8)]
        # allowed[c] lists codes that may follow last code c (sorted)
        allowed = np.array(
            [[b for b in range(2 * d) if b != self.inverse_code(c)] for c in range(2 * d)],
            dtype=np.int8,
        )
        if radius >= 1:
            last.append(np.arange(2 * d, dtype=np.int8))
            starts.append(1 + 2 * d)
        for _ in range(2, radius + 1):
            nxt = allowed[last[-1].astype(np.intp)].ravel()
            last.append(nxt)
            starts.append(starts[-1] + nxt.size)
        self.starts = np.array(starts, dtype=np.int64)
        self.last = np.concatenate(last)
        self.depth = np.repeat(np.arange(radius + 1, dtype=np.int8), np.diff(self.starts))
        self._q = q

    def inverse_code(self, c: int) -> int:
        return (c + self.d) % (2 * self.d)

    def code(self, letter: int) -> int:
        return letter - 1 if letter > 0 else self.d - letter - 1

    def parent(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        k = self.depth[idx].astype(np.int64)
        out = np.full(idx.shape, -1, dtype=np.int64)
        m = k >= 2
        out[m] = self.starts[k[m] - 1] + (idx[m] - self.starts[k[m]]) // self._q
        out[k == 1] = 0
        return out

    def right_multiply(self, idx: np.ndarray, letter: int) -> np.ndarray:
        """Index of ``x * letter`` for nodes ``x``; -1 when it leaves the ball.

        Entries of ``idx`` equal to -1 stay -1.
        """
        idx = np.asarray(idx, dtype=np.int64)
        s = self.code(letter)
        s_inv = self.inverse_code(s)
        out = np.full(idx.shape, -1, dtype=np.int64)
        live = idx >= 0
        safe = np.where(live, idx, 0)
        k = self.depth[safe].astype(np.int64)
        lst = self.last[safe].astype(np.int64)
        back = live & (k >= 1) & (lst == s_inv)
        out[back] = self.parent(safe[back])
        root = live & (k == 0)
        if self.radius >= 1:
            out[root] = 1 + s
        fwd = live & (k >= 1) & (lst != s_inv) & (k < self.radius)
        kf = k[fwd]
        # rank of s among the codes allowed after lst
        rank = s - (s > (lst[fwd] + self.d) % (2 * self.d)).astype(np.int64)
        out[fwd] = self.starts[kf + 1] + (safe[fwd] - self.starts[kf]) * self._q + rank
        return out

    def index_of(self, w: Word) -> int:
        idx = np.array([0])
        for a in w:
            idx = self.right_multiply(idx, a)
        return int(idx[0])

    def word_of(self, i: int) -> Word:
        letters = []
        i = np.array([i])
        while i[0] > 0:
            c = int(self.last[i[0]])
            letters.append(c + 1 if c < self.d else -(c - self.d + 1))
            i = self.parent(i)
        return tuple(reversed(letters))

    def translation_pairs(self, w: Word) -> tuple[np.ndarray, np.ndarray]:
        """Source/target indices of the partial map ``x -> x w`` inside the ball."""
        idx = np.arange(self.size, dtype=np.int64)
        cur = idx
        for a in w:
            cur = self.right_multiply(cur, a)
        keep = cur >= 0
        return idx[keep], cur[keep]
