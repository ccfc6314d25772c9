"""Ordering of product-basis indices and the divisor-function utilities.

A multi-index ``j = (j^1, ..., j^d)`` is ranked by the product of its
entries.  Rows with the same product are emitted block by block: for every
factorization of the product into factors >= 2 (shorter factorizations
first, then lexicographic), the factors are written into each increasing
choice of positions, positions taken in lexicographic order.  With
``d_prime < d`` only indices with at most ``d_prime`` entries above one are
generated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

#: Default cap on ``rows * d`` for a generated index matrix.
MEMORY_BUDGET = 50_000_000

_INT64_MAX = np.iinfo(np.int64).max


class IndexBudgetError(MemoryError):
    """Raised when an index matrix would exceed the configured entry budget."""


@dataclass(frozen=True, eq=False)
class IndexMatrix:
    """Ordered list of multi-indices.

    ``rows`` is an ``(J, d)`` int64 array with 1-based frequencies and ``c``
    the product of each row.
    """

    d: int
    d_prime: int
    rows: np.ndarray
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.rows.setflags(write=False)
        self.c.setflags(write=False)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __getitem__(self, i):
        return tuple(int(v) for v in self.rows[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexMatrix):
            return NotImplemented
        return (
            self.d == other.d
            and self.d_prime == other.d_prime
            and np.array_equal(self.rows, other.rows)
        )

    @property
    def max_freq(self) -> int:
        return int(self.rows.max()) if len(self) else 1

    def head(self, J: int) -> "IndexMatrix":
        """First ``J`` rows."""
        if J < 1:
            raise ValueError("an index matrix keeps at least the constant row")
        return IndexMatrix(self.d, self.d_prime, self.rows[:J].copy(), self.c[:J].copy())

    @classmethod
    def from_rows(cls, rows, d_prime: int | None = None) -> "IndexMatrix":
        """Wrap an explicit list of rows, checking the structural invariants."""
        arr = np.asarray(rows, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("index rows must form a non-empty 2-d array")
        if np.any(arr < 1):
            raise ValueError("index entries must be positive integers")
        d = arr.shape[1]
        varying = (arr > 1).sum(axis=1)
        if d_prime is None:
            d_prime = max(1, int(varying.max()))
        if np.any(varying > d_prime):
            raise ValueError(f"row with more than d_prime={d_prime} entries above 1")
        if not np.all(arr[0] == 1):
            raise ValueError("first index row must be the all-ones row")
        return cls(d, int(d_prime), arr, np.prod(arr, axis=1))


def _divisors(n: int) -> list[int]:
    small, large = [], []
    f = 1
    while f * f <= n:
        if n % f == 0:
            small.append(f)
            if f * f != n:
                large.append(n // f)
        f += 1
    return small + large[::-1]


def _ordered_factorizations(n: int, max_len: int) -> list[tuple[int, ...]]:
    # all ordered tuples of factors >= 2 with product n and length <= max_len
    if n == 1:
        return [()]
    if max_len == 0:
        return []
    out = []
    for f in _divisors(n)[1:]:
        for rest in _ordered_factorizations(n // f, max_len - 1):
            out.append((f,) + rest)
    return out


@lru_cache(maxsize=4096)
def factorizations(product: int, d_prime: int) -> tuple[tuple[int, ...], ...]:
    """Distinct ordered factorizations of ``product`` into at most ``d_prime``
    factors, all >= 2.

    The result is what remains of the ``d_prime``-fold ordered factorizations
    after dropping the unit factors and merging duplicates.  Ordering is by
    length, then lexicographic, e.g. ``factorizations(6, 2)`` gives
    ``((6,), (2, 3), (3, 2))``.  ``product == 1`` yields the single empty
    tuple.
    """
    product, d_prime = int(product), int(d_prime)
    if product < 1 or d_prime < 1:
        raise ValueError("product and d_prime must be positive")
    found = set(_ordered_factorizations(product, d_prime))
    return tuple(sorted(found, key=lambda t: (len(t), t)))


def iter_index_rows(d: int, d_prime: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield ``(row, product)`` in canonical order, without end."""
    _check_dims(d, d_prime)
    yield (1,) * d, 1
    prod = 1
    while True:
        prod += 1
        for factors in factorizations(prod, d_prime):
            m = len(factors)
            if m > d:
                continue
            for positions in itertools.combinations(range(d), m):
                row = [1] * d
                for p, f in zip(positions, factors):
                    row[p] = f
                yield tuple(row), prod


def _check_dims(d: int, d_prime: int) -> None:
    if d < 1 or d_prime < 1:
        raise ValueError("d and d_prime must be positive")
    if d_prime > d:
        raise ValueError(f"d_prime={d_prime} exceeds d={d}")


def _collect(d, d_prime, stop, budget) -> IndexMatrix:
    rows, cs = [], []
    limit = budget // d
    for row, c in iter_index_rows(d, d_prime):
        if stop(len(rows), c):
            break
        if len(rows) >= limit:
            raise IndexBudgetError(
                f"index matrix would exceed {budget} entries (d={d}, d_prime={d_prime})"
            )
        rows.append(row)
        cs.append(c)
    return IndexMatrix(d, d_prime, np.array(rows, dtype=np.int64).reshape(-1, d),
                       np.array(cs, dtype=np.int64))


def generate_index_matrix(d: int, d_prime: int, prod_max: int,
                          budget: int = MEMORY_BUDGET) -> IndexMatrix:
    """All rows with product <= ``prod_max``, in canonical order."""
    if prod_max < 1:
        raise ValueError("prod_max must be >= 1")
    return _collect(d, d_prime, lambda _, c: c > prod_max, budget)


def index_matrix_for_count(d: int, d_prime: int, J: int,
                           budget: int = MEMORY_BUDGET) -> IndexMatrix:
    """The first ``J`` rows of the canonical order."""
    if J < 1:
        raise ValueError("J must be >= 1")
    if J * d > budget:
        raise IndexBudgetError(f"J={J} rows of width {d} exceed the budget of {budget} entries")
    return _collect(d, d_prime, lambda k, _: k >= J, budget)


# -- divisor functions ----------------------------------------------------

def _factorint(n: int) -> dict[int, int]:
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def tau(D: int, n: int) -> int:
    """Number of ordered D-tuples of positive integers with product ``n``."""
    if D < 1 or n < 1:
        raise ValueError("tau requires D >= 1 and n >= 1")
    # multiplicative: tau_D(p^a) = C(a + D - 1, D - 1)
    out = 1
    for a in _factorint(n).values():
        out *= math.comb(a + D - 1, D - 1)
    if out > _INT64_MAX:
        raise OverflowError(f"tau_{D}({n}) exceeds 64-bit range")
    return out


def tau_table(D: int, x: int) -> np.ndarray:
    """``t[n] = tau_D(n)`` for ``0 <= n <= x`` (``t[0]`` is 0).

    Built by repeated Dirichlet convolution with the constant-one function.
    """
    if D < 1 or x < 0:
        raise ValueError("tau_table requires D >= 1 and x >= 0")
    # crude bound T_D(x) <= x (1 + ln x)^(D-1) keeps int64 sums safe
    if x > 1 and x * (1.0 + math.log(x)) ** (D - 1) > 2.0 ** 62:
        raise OverflowError(f"divisor sums for D={D}, x={x} exceed 64-bit range")
    t = np.zeros(x + 1, dtype=np.int64)
    t[1:] = 1
    for _ in range(D - 1):
        nxt = np.zeros_like(t)
        for k in range(1, x + 1):
            nxt[k::k] += t[k]
        t = nxt
    return t


@lru_cache(maxsize=None)
def big_t(D: int, x: int) -> int:
    """Count of D-tuples of positive integers with product <= ``x``."""
    x = int(x)
    if D < 1 or x < 1:
        raise ValueError("big_t requires D >= 1 and x >= 1")
    return int(tau_table(D, x).sum())
