"""Bit vectors for SRAM readouts and the distance primitives built on them.

Bits are packed least-significant first: bit ``i`` lives in byte ``i // 8`` at
position ``i % 8``. Padding bits in the last byte are always zero, so packed
buffers compare and XOR cleanly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class Role(enum.IntEnum):
    PRE_AGING = 0
    POST_AGING = 1


class RoleError(ValueError):
    """A readout with the wrong aging role was supplied."""


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ResponseVector:
    """Immutable packed bit vector of SRAM power-up states.

    Build one with :meth:`from_bits` or :meth:`from_packed`; the constructor
    takes an already-normalised packed buffer.
    """

    packed: bytes
    length: int
    role: Role | None = None

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        nbytes = (self.length + 7) // 8
        if len(self.packed) != nbytes:
            raise ValueError(f"packed buffer holds {len(self.packed)} bytes, expected {nbytes} for {self.length} bits")
        if self.length % 8 and self.packed[-1] >> (self.length % 8):
            raise ValueError("padding bits beyond length must be zero")

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray | str, role: Role | None = None) -> "ResponseVector":
        """Pack a sequence of 0/1 values, or a string such as ``"1100_1010"``."""
        if isinstance(bits, str):
            bits = [int(c) for c in bits if c in "01"]
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("bits must be 0 or 1")
        packed = np.packbits(arr.astype(bool), bitorder="little").tobytes()
        return cls(packed, int(arr.size), role)

    @classmethod
    def from_packed(cls, data: bytes, length: int, role: Role | None = None) -> "ResponseVector":
        buf = bytearray(data)
        if length % 8 and buf:
            buf[-1] &= (1 << (length % 8)) - 1
        return cls(bytes(buf), length, role)

    @property
    def bits(self) -> np.ndarray:
        """Unpacked ``uint8`` array of length :attr:`length` (a fresh copy)."""
        raw = np.frombuffer(self.packed, dtype=np.uint8)
        return np.unpackbits(raw, count=self.length, bitorder="little")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.packed, dtype=np.uint8)

    def with_role(self, role: Role | None) -> "ResponseVector":
        return ResponseVector(self.packed, self.length, role)

    def project(self, addresses: Sequence[int] | np.ndarray) -> "ResponseVector":
        """Bits at ``addresses``, in the order given."""
        idx = np.asarray(addresses, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.length):
            raise IndexError(f"address out of range for a {self.length}-bit readout")
        return ResponseVector.from_bits(self.bits[idx], self.role)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.packed[i >> 3] >> (i & 7)) & 1

    def __eq__(self, other) -> bool:
        # role is metadata; equality is bitwise
        if not isinstance(other, ResponseVector):
            return NotImplemented
        return self.length == other.length and self.packed == other.packed

    def __hash__(self) -> int:
        return hash((self.length, self.packed))

    def __repr__(self) -> str:
        shown = "".join(map(str, self.bits[:32]))
        more = "..." if self.length > 32 else ""
        return f"ResponseVector({shown}{more}, length={self.length}, role={self.role and self.role.name})"


@dataclass(frozen=True)
class ReadoutSet:
    """Repeated readouts of one device under one condition.

    :param temperature: kelvin
    :param voltage: millivolts
    :param effective_age: hours of nominal-condition aging the device had seen
    """

    readouts: tuple[ResponseVector, ...]
    temperature: float
    voltage: int
    effective_age: float
    role: Role
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        readouts = tuple(self.readouts)
        role = Role(self.role)
        if self.effective_age < 0:
            raise ValueError("effective_age must be >= 0")
        if role is Role.PRE_AGING and self.effective_age != 0:
            raise ValueError("a pre-aging set must have effective_age == 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive (kelvin)")
        if readouts:
            n = readouts[0].length
            if any(r.length != n for r in readouts):
                raise LengthMismatchError("all readouts in a set must share one length")
        for r in readouts:
            if r.role is not None and r.role is not role:
                raise RoleError(f"{r.role.name} readout cannot join a {role.name} set")
        readouts = tuple(r if r.role is role else r.with_role(role) for r in readouts)
        object.__setattr__(self, "readouts", readouts)
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "_matrix", None)

    @classmethod
    def from_matrix(cls, bits: np.ndarray, temperature: float, voltage: int = 3250,
                    effective_age: float = 0.0, role: Role = Role.PRE_AGING) -> "ReadoutSet":
        """Build a set from a ``(readouts, cells)`` 0/1 array."""
        bits = np.atleast_2d(np.asarray(bits))
        vecs = tuple(ResponseVector.from_bits(row, role) for row in bits)
        return cls(vecs, temperature, voltage, effective_age, role)

    @property
    def cell_count(self) -> int:
        return self.readouts[0].length if self.readouts else 0

    def matrix(self) -> np.ndarray:
        """Unpacked ``(readouts, cells)`` uint8 array, cached and read-only."""
        if self._matrix is None:
            if self.readouts:
                m = np.stack([r.bits for r in self.readouts])
            else:
                m = np.zeros((0, 0), dtype=np.uint8)
            m.setflags(write=False)
            object.__setattr__(self, "_matrix", m)
        return self._matrix

    def head(self, count: int) -> "ReadoutSet":
        """The first ``count`` readouts as a new set."""
        return ReadoutSet(self.readouts[:count], self.temperature, self.voltage, self.effective_age, self.role)

    def __len__(self) -> int:
        return len(self.readouts)

    def __iter__(self):
        return iter(self.readouts)

    def __getitem__(self, i):
        return self.readouts[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReadoutSet):
            return NotImplemented
        return (self.readouts == other.readouts and self.temperature == other.temperature
                and self.voltage == other.voltage and self.effective_age == other.effective_age
                and self.role is other.role)


def _check_lengths(a: ResponseVector, b: ResponseVector) -> None:
    if a.length != b.length:
        raise LengthMismatchError(f"cannot compare a {a.length}-bit vector with a {b.length}-bit vector")


def hamming_distance(a: ResponseVector, b: ResponseVector) -> int:
    _check_lengths(a, b)
    return int(np.bitwise_count(np.bitwise_xor(a.as_array(), b.as_array())).sum(dtype=np.int64))


def fractional_hamming(a: ResponseVector, b: ResponseVector) -> float:
    if a.length == 0 or b.length == 0:
        raise ValueError("fractional Hamming distance is undefined for zero-length vectors")
    return hamming_distance(a, b) / a.length


def _require_role(v: ResponseVector, role: Role, name: str) -> None:
    # untagged vectors are accepted; a tagged one must carry the right role
    if v.role is not None and v.role is not role:
        raise RoleError(f"{name} must be a {role.name} readout, got {v.role.name}")


def intra_a_distance(reference: ResponseVector, reeval: ResponseVector) -> int:
    """Distance between two pre-aging evaluations of the same cells."""
    _require_role(reference, Role.PRE_AGING, "reference")
    _require_role(reeval, Role.PRE_AGING, "reeval")
    return hamming_distance(reference, reeval)


def inter_a_distance(pre: ResponseVector, post: ResponseVector) -> int:
    """Distance between a pre-aging and a post-aging evaluation of the same cells."""
    _require_role(pre, Role.PRE_AGING, "pre")
    _require_role(post, Role.POST_AGING, "post")
    return hamming_distance(pre, post)


def estimate_p(reference: ResponseVector, observations: ReadoutSet | Sequence[ResponseVector]) -> float:
    """Binomial bit-flip estimate: mean fractional distance of each observation
    from ``reference``.

    With pre-aging observations this is the intra-aging estimate, with
    post-aging observations the inter-aging one.
    """
    obs = list(observations)
    if not obs:
        raise ValueError("estimate_p needs at least one observation")
    if reference.length == 0:
        raise ValueError("estimate_p is undefined for zero-length readouts")
    total = sum(hamming_distance(reference, o) for o in obs)
    return total / (len(obs) * reference.length)


def flip_fraction(reference_bits: np.ndarray, readouts: np.ndarray) -> float:
    """Mean fraction of positions where rows of ``readouts`` differ from
    ``reference_bits``. Array counterpart of :func:`estimate_p`."""
    readouts = np.atleast_2d(readouts)
    if readouts.shape[0] == 0 or readouts.shape[1] == 0:
        raise ValueError("need at least one non-empty readout")
    if readouts.shape[1] != reference_bits.shape[0]:
        raise LengthMismatchError("reference and readouts differ in length")
    return float(np.count_nonzero(readouts != reference_bits) / readouts.size)
