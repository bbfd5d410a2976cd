"""Integer partitions, set partitions, rising factorials, divisor power sums.

Partitions are weakly decreasing tuples of positive ints; set partitions of
``range(n)`` are tuples of blocks, each block a sorted tuple, blocks ordered
by least element.  Enumeration orders are documented and deterministic.
"""

from __future__ import annotations

from math import factorial
from typing import Iterator

from gmpy2 import mpq


def partitions(d: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """All partitions of ``d`` with parts bounded by ``max_part``, in
    descending lexicographic order: (d), (d-1,1), ..., (1,)*d.

    ``partitions(0)`` yields the single empty partition.
    """
    if d < 0:
        raise ValueError("cannot partition a negative integer")
    first = d if max_part is None else min(d, max_part)

    def rec(remaining: int, cap: int, prefix: tuple[int, ...]):
        if remaining == 0:
            yield prefix
            return
        for part in range(min(cap, remaining), 0, -1):
            yield from rec(remaining - part, part, prefix + (part,))

    yield from rec(d, first if d else 0, ())


def partition_multiplicities(parts: tuple[int, ...]) -> dict[int, int]:
    mult: dict[int, int] = {}
    for p in parts:
        mult[p] = mult.get(p, 0) + 1
    return mult


def automorphism_factor(parts: tuple[int, ...]) -> int:
    """prod_j m_j! over the part multiplicities m_j of the partition."""
    out = 1
    for m in partition_multiplicities(parts).values():
        out *= factorial(m)
    return out


def set_partitions(n: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All set partitions of ``range(n)``, each exactly once.

    Elements are assigned in restricted-growth order: element k joins each
    existing block in turn (in order of creation) and then opens a new block,
    which makes the enumeration lexicographic in the growth string.
    """
    if n < 1:
        raise ValueError("set partitions need n >= 1")

    def rec(k: int, blocks: list[list[int]]):
        if k == n:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(k)
            yield from rec(k + 1, blocks)
            b.pop()
        blocks.append([k])
        yield from rec(k + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def pochhammer(a, b: int) -> mpq:
    """Rising factorial a(a+1)...(a+b-1), with the empty product 1 at b = 0."""
    if b < 0:
        raise ValueError("rising factorial needs b >= 0")
    acc = mpq(1)
    x = mpq(a)
    for i in range(b):
        acc *= x + i
    return acc


def divisors(n: int) -> Iterator[int]:
    if n < 1:
        raise ValueError("divisors need n >= 1")
    small, large = [], []
    i = 1
    while i * i <= n:
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
        i += 1
    yield from small
    yield from reversed(large)


def divisor_power_sum(n: int, k: int) -> int:
    """sum of d^k over the divisors d of n."""
    return sum(d ** k for d in divisors(n))
