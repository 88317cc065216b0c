"""Reproducible random substreams.

Each replication gets a 64-bit substream seed hashed from
``(master_seed, index)``; within a replication, independent Philox
generators are spawned per purpose so that, for example, changing a
service-time law never shifts the inspection draws (common random numbers).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

_PURPOSES = ("arrivals", "lorries", "inspections", "service")


def substream_seed(master_seed: int, index: int, domain: str = "replication") -> int:
    """Stable 64-bit hash of ``(domain, master_seed, index)``."""
    payload = domain.encode("utf-8") + b"\x00" + struct.pack("<QQ", master_seed % 2**64, index)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass
class Streams:
    arrivals: np.random.Generator
    lorries: np.random.Generator
    inspections: np.random.Generator
    service: np.random.Generator


def replication_streams(seed: int) -> Streams:
    children = np.random.SeedSequence(seed).spawn(len(_PURPOSES))
    gens = [np.random.Generator(np.random.Philox(c)) for c in children]
    return Streams(*gens)
