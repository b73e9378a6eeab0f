"""HTR problem instances and their canonical bit encoding.

An instance fixes a branching factor ``d``, a depth ``N`` and the hierarchical
address ``(a_1, ..., a_N)`` of the target leaf.  The d-ary tree itself is never
materialized; only the address path is stored.

The canonical payload is the header bit ``a_0 = 1`` followed by one
``w = ceil(log2 d)``-bit block per address digit, each block big-endian:

>>> inst = new_instance(4, 2, [3, 2], Family.PARITY, 1)
>>> "".join(map(str, encode(inst).bits))
'11110'
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "Family",
    "HtrInstance",
    "BitPayload",
    "InstanceError",
    "DigitOutOfRange",
    "BadShape",
    "BadTarget",
    "BadHeader",
    "BadLength",
    "block_width",
    "state_space_size",
    "new_instance",
    "random_instance",
    "encode",
    "decode",
    "payload_length",
    "instance_to_dict",
    "instance_from_dict",
    "payload_to_dict",
    "payload_from_dict",
    "dumps_instance",
    "loads_instance",
]

MAX_D = 2 ** 16
MAX_N = 2 ** 20


class Family(str, Enum):
    """Concrete validation-predicate families."""

    CHECKSUM = "CHECKSUM"
    PARITY = "PARITY"


class InstanceError(ValueError):
    """Base class for malformed instances and payloads."""


class DigitOutOfRange(InstanceError):
    def __init__(self, index: int, value: int, d: int):
        self.index = index
        self.value = value
        super().__init__(f"address digit {index} is {value}, not in [0, {d})")


class BadShape(InstanceError):
    pass


class BadTarget(InstanceError):
    pass


class BadHeader(InstanceError):
    pass


class BadLength(InstanceError):
    pass


def block_width(d: int) -> int:
    """Bits per address block, ``ceil(log2 d)``."""
    if d < 2:
        raise BadShape(f"branching factor must be >= 2, got {d}")
    return (d - 1).bit_length()


def state_space_size(d: int) -> int:
    return max(d, 2)


def payload_length(d: int, N: int) -> int:
    return 1 + N * block_width(d)


@dataclass(frozen=True)
class HtrInstance:
    d: int
    N: int
    address: tuple[int, ...]
    family: Family
    target: int

    @property
    def w(self) -> int:
        return block_width(self.d)

    @property
    def state_space(self) -> int:
        return state_space_size(self.d)

    @property
    def target_range(self) -> int:
        return self.d if self.family is Family.CHECKSUM else 2


@dataclass(frozen=True)
class BitPayload:
    bits: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.bits)

    def to_hex(self) -> str:
        """Pack MSB-first, zero padded to a byte boundary."""
        packed = np.packbits(np.asarray(self.bits, dtype=np.uint8))
        return packed.tobytes().hex()

    @classmethod
    def from_hex(cls, hex_bits: str, bit_len: int) -> "BitPayload":
        raw = np.frombuffer(bytes.fromhex(hex_bits), dtype=np.uint8)
        if bit_len < 0 or bit_len > 8 * raw.size:
            raise BadLength(f"bit_len {bit_len} does not fit in {raw.size} bytes")
        bits = np.unpackbits(raw)[:bit_len]
        return cls(tuple(int(b) for b in bits))


def _coerce_family(family) -> Family:
    try:
        return Family(family)
    except ValueError:
        raise BadShape(f"unknown predicate family {family!r}") from None


def new_instance(d: int, N: int, address: Sequence[int], family, target: int) -> HtrInstance:
    """Validate the parameters and build an instance.

    Raises
    ------
    BadShape
        ``d < 2``, ``N < 1``, sizes beyond the supported caps, or an address
        whose length is not ``N``.
    DigitOutOfRange
        Some ``address[i] >= d`` (or negative); ``index`` is zero-based.
    BadTarget
        ``target`` outside ``[0, d)`` for CHECKSUM or ``{0, 1}`` for PARITY.
    """
    family = _coerce_family(family)
    if d < 2 or d > MAX_D:
        raise BadShape(f"branching factor must be in [2, {MAX_D}], got {d}")
    if N < 1 or N > MAX_N:
        raise BadShape(f"depth must be in [1, {MAX_N}], got {N}")
    address = tuple(int(a) for a in address)
    if len(address) != N:
        raise BadShape(f"address has {len(address)} digits, expected N={N}")
    for i, a in enumerate(address):
        if not 0 <= a < d:
            raise DigitOutOfRange(i, a, d)
    limit = d if family is Family.CHECKSUM else 2
    if not 0 <= int(target) < limit:
        raise BadTarget(f"target {target} not in [0, {limit}) for {family.value}")
    return HtrInstance(d, N, address, family, int(target))


def random_instance(d: int, N: int, family, seed: int) -> HtrInstance:
    """Uniform address digits and target from a seeded generator."""
    family = _coerce_family(family)
    block_width(d)  # rejects d < 2 before touching the generator
    if N < 1:
        raise BadShape(f"depth must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    address = rng.integers(0, d, size=N)
    target = rng.integers(0, d if family is Family.CHECKSUM else 2)
    return new_instance(d, N, address.tolist(), family, int(target))


def encode(instance: HtrInstance) -> BitPayload:
    w = instance.w
    bits = [1]
    for a in instance.address:
        bits.extend((a >> (w - 1 - k)) & 1 for k in range(w))
    return BitPayload(tuple(bits))


def decode(payload: BitPayload | Sequence[int], d: int, N: int, family, target: int) -> HtrInstance:
    """Inverse of :func:`encode`.

    Checks run length first, then header, then each block, so every malformed
    payload maps to exactly one error class.
    """
    bits = payload.bits if isinstance(payload, BitPayload) else tuple(payload)
    if any(b not in (0, 1) for b in bits):
        raise InstanceError("payload contains non-bit values")
    expected = payload_length(d, N)
    if len(bits) != expected:
        raise BadLength(f"payload has {len(bits)} bits, expected {expected}")
    if bits[0] != 1:
        raise BadHeader("header bit a_0 must be 1")
    w = block_width(d)
    address = []
    for i in range(N):
        value = 0
        for b in bits[1 + i * w: 1 + (i + 1) * w]:
            value = (value << 1) | b
        if value >= d:
            raise DigitOutOfRange(i, value, d)
        address.append(value)
    return new_instance(d, N, address, family, target)


# JSON file formats

def instance_to_dict(instance: HtrInstance) -> dict:
    return {
        "d": instance.d,
        "N": instance.N,
        "family": instance.family.value,
        "address": list(instance.address),
        "target": instance.target,
    }


def instance_from_dict(obj: dict) -> HtrInstance:
    try:
        return new_instance(obj["d"], obj["N"], obj["address"], obj["family"], obj["target"])
    except KeyError as exc:
        raise BadShape(f"instance object missing field {exc.args[0]!r}") from None


def payload_to_dict(payload: BitPayload) -> dict:
    return {"bits": payload.to_hex(), "bit_len": payload.length}


def payload_from_dict(obj: dict) -> BitPayload:
    return BitPayload.from_hex(obj["bits"], int(obj["bit_len"]))


def dumps_instance(instance: HtrInstance) -> str:
    return json.dumps(instance_to_dict(instance), sort_keys=True) + "\n"


def loads_instance(text: str) -> HtrInstance:
    return instance_from_dict(json.loads(text))
