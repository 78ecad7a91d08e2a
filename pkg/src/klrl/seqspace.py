"""Finite spaces of EOS-terminated token sequences.

A space holds every sequence of content tokens of length at most ``max_len``.
Sequences are ordered shorter-first, then lexicographically by token index,
and that order defines the integer index used by every probability vector
in the package.

Decision prefixes (content strings shorter than ``max_len``) are exactly the
first ``n_prefixes`` sequences of this order, so a prefix's row in a logit
table is its sequence index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence as _Seq

import numpy as np
import scipy.sparse as sp

MAX_SPACE_SIZE = 10**6

Sequence = tuple  # tuple[int, ...] of vocab indices, EOS excluded


class SpaceError(ValueError):
    """Invalid sequence, index, or space configuration."""


@dataclass(frozen=True)
class Vocab:
    symbols: tuple[str, ...]
    eos_index: int

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(self.symbols) < 2:
            raise SpaceError("vocabulary needs at least one content token plus EOS")
        if len(set(self.symbols)) != len(self.symbols):
            raise SpaceError(f"duplicate symbols in vocabulary: {self.symbols}")
        if not 0 <= self.eos_index < len(self.symbols):
            raise SpaceError(f"eos_index {self.eos_index} out of range")

    @classmethod
    def from_symbols(cls, symbols: _Seq[str], eos: str) -> "Vocab":
        symbols = tuple(symbols)
        if eos not in symbols:
            raise SpaceError(f"EOS symbol {eos!r} not in vocabulary")
        return cls(symbols, symbols.index(eos))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def eos(self) -> str:
        return self.symbols[self.eos_index]

    @property
    def content(self) -> tuple[int, ...]:
        """Vocab indices of the content tokens, in vocab order."""
        return tuple(i for i in range(self.size) if i != self.eos_index)

    @property
    def single_char(self) -> bool:
        return all(len(self.symbols[i]) == 1 for i in self.content)


def count_sequences(n_content: int, max_len: int) -> int:
    """Number of content strings of length 0..max_len over ``n_content`` tokens."""
    return sum(n_content**k for k in range(max_len + 1))


def space_size(space: "SequenceSpace") -> int:
    return space.size


class SequenceSpace:
    """All EOS-terminated sequences with content length <= ``max_len``.

    Besides enumeration and indexing, the space precomputes the sparse
    structure shared by every tabular policy on it:

    ``path_matrix``
        ``(size, n_prefixes * vocab.size)`` 0/1 matrix; entry ``(x, row*V + t)``
        is 1 when sequence ``x`` picks token ``t`` at prefix ``row``
        (the EOS step included, the forced EOS at depth ``max_len`` excluded).
    ``visit_matrix``
        ``(size, n_prefixes)`` 0/1 matrix of the prefixes each sequence passes.
    ``child``
        ``(n_prefixes, vocab.size)`` table of the sequence index reached by
        appending a content token; -1 in the EOS column.
    """

    def __init__(self, vocab: Vocab, max_len: int, max_size: int = MAX_SPACE_SIZE):
        if max_len < 0:
            raise SpaceError("max_len must be >= 0")
        n_content = vocab.size - 1
        size = count_sequences(n_content, max_len)
        if size > max_size:
            raise SpaceError(f"space has {size} sequences, limit is {max_size}")
        self.vocab = vocab
        self.max_len = max_len
        self.size = size
        self.n_prefixes = count_sequences(n_content, max_len - 1) if max_len > 0 else 0
        self._build()

    def _build(self) -> None:
        content = self.vocab.content
        seqs: list[Sequence] = [()]
        level = [()]
        for _ in range(self.max_len):
            level = [s + (t,) for s in level for t in content]
            seqs.extend(level)
        self._seqs = seqs
        self._index = {s: i for i, s in enumerate(seqs)}
        self.lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=self.size)

        V = self.vocab.size
        child = np.full((self.n_prefixes, V), -1, dtype=np.int64)
        parent = np.full(self.size, -1, dtype=np.int64)
        last = np.full(self.size, -1, dtype=np.int64)
        for i, s in enumerate(seqs):
            if s:
                p = self._index[s[:-1]]
                parent[i] = p
                last[i] = s[-1]
                child[p, s[-1]] = i
        self.child = child
        self.parent = parent
        self.last_token = last

        rows, cols, vrows, vcols = [], [], [], []
        for i, s in enumerate(seqs):
            for k in range(len(s)):
                r = self._index[s[:k]]
                rows.append(i)
                cols.append(r * V + s[k])
                vrows.append(i)
                vcols.append(r)
            if len(s) < self.max_len:
                rows.append(i)
                cols.append(i * V + self.vocab.eos_index)
                vrows.append(i)
                vcols.append(i)
        n_params = self.n_prefixes * V
        self.path_matrix = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.size, n_params)
        )
        self.visit_matrix = sp.csr_matrix(
            (np.ones(len(vrows)), (vrows, vcols)), shape=(self.size, self.n_prefixes)
        )

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Sequence]:
        return iter(self._seqs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SequenceSpace)
            and self.vocab == other.vocab
            and self.max_len == other.max_len
        )

    def __hash__(self) -> int:
        return hash((self.vocab, self.max_len))

    def __repr__(self) -> str:
        return f"SequenceSpace({list(self.vocab.symbols)!r}, eos={self.vocab.eos!r}, max_len={self.max_len})"

    @property
    def logits_shape(self) -> tuple[int, int]:
        return (self.n_prefixes, self.vocab.size)

    def index_of(self, x: Sequence) -> int:
        try:
            return self._index[tuple(x)]
        except KeyError:
            raise SpaceError(f"sequence {x!r} is not in {self!r}") from None

    def sequence_at(self, i: int) -> Sequence:
        if not 0 <= i < self.size:
            raise SpaceError(f"index {i} out of range [0, {self.size})")
        return self._seqs[i]

    def prefixes(self) -> Iterator[Sequence]:
        return iter(self._seqs[: self.n_prefixes])

    def render(self, x: Sequence) -> str:
        sep = "" if self.vocab.single_char else " "
        return sep.join(self.vocab.symbols[t] for t in x)

    def parse(self, text: str) -> Sequence:
        """Inverse of :meth:`render`; raises if the result is not in the space."""
        x = self.tokenize(text)
        self.index_of(x)
        return x

    def tokenize(self, text: str) -> Sequence:
        """Token indices for ``text`` (chars if all symbols are single chars, else whitespace split)."""
        parts = list(text) if self.vocab.single_char else text.split()
        lookup = {self.vocab.symbols[i]: i for i in self.vocab.content}
        try:
            return tuple(lookup[p] for p in parts)
        except KeyError as e:
            raise SpaceError(f"unknown content token {e.args[0]!r} in {text!r}") from None


def enumerate_space(space: SequenceSpace) -> Iterator[Sequence]:
    return iter(space)


def make_space(symbols: _Seq[str], eos: str, max_len: int) -> SequenceSpace:
    return SequenceSpace(Vocab.from_symbols(symbols, eos), max_len)
