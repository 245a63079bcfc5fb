"""Sub-seed derivation.

Every random stream in a run is seeded by ``derive(master_seed, *tags)``::

    key  = "/".join(str(t) for t in tags)            e.g. "round/4/select"
    x    = (master_seed XOR fnv1a64(key)) mod 2**64
    seed = splitmix64(x)

FNV-1a (64-bit, offset 0xcbf29ce484222325, prime 0x100000001b3) hashes the
UTF-8 key; splitmix64 is the finaliser of Steele, Lea and Flood's generator.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(master_seed: int, *tags) -> int:
    key = "/".join(str(t) for t in tags).encode("utf-8")
    return splitmix64((int(master_seed) ^ fnv1a64(key)) & MASK64)
