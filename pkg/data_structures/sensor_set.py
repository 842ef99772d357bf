"""
    Bit-vector set of sensor indices, used for the blocks of set partitions.
"""

from __future__ import annotations

from typing import Iterable, Iterator


class SensorSet:
    """A set of non-negative sensor indices held in one integer.

        Index k is present if and only if bit k is set, so sets compare and
        hash as plain integers.

        Attributes:
        elems (int): bitwise representation of the set
    """

    __slots__ = ("elems",)

    def __init__(self, items: Iterable[int] = ()) -> None:
        self.elems = 0
        for item in items:
            self.add(item)

    @classmethod
    def from_bits(cls, bits: int) -> SensorSet:
        res = cls()
        res.elems = bits
        return res

    def __len__(self) -> int:
        return bin(self.elems).count("1")

    def __iter__(self) -> Iterator[int]:
        bits, k = self.elems, 0
        while bits:
            if bits & 1:
                yield k
            bits >>= 1
            k += 1

    def add(self, item: int) -> None:
        _check(item)
        self.elems |= 1 << item

    def with_item(self, item: int) -> SensorSet:
        _check(item)
        return SensorSet.from_bits(self.elems | (1 << item))

    def __eq__(self, other) -> bool:
        return isinstance(other, SensorSet) and self.elems == other.elems

    def __hash__(self) -> int:
        return hash(self.elems)

    def __str__(self) -> str:
        return "{" + ", ".join(str(k) for k in self) + "}"

    __repr__ = __str__


def _check(item) -> None:
    if not isinstance(item, int) or item < 0:
        raise TypeError("sensor indices should be non-negative integers")
