"""Key derivation and per-layer scheduling of embedding positions.

A 32-byte seed is the only secret. It deterministically expands to a
256-entry scramble vector nu; per layer, nu is rotated by the layer's
index and hashed into a keystream that drives a partial Fisher-Yates
shuffle over the layer's detail-coefficient space. The result is a
collision-free, uniform-looking ordered selection of positions, and
without the seed the positions are unpredictable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import BadSeedLength, InsufficientCapacity

SEED_BYTES = 32
NU_ENTRIES = 256
DETAIL_BANDS = 16  # frequency bands 17..32

DEFAULT_CHUNK_LENGTH = 8192


@dataclass(frozen=True)
class ScrambleKey:
    """Seed plus its expanded 256-entry vector of 64-bit values."""

    seed: bytes
    nu: tuple[int, ...]

    def __post_init__(self):
        if len(self.nu) != NU_ENTRIES:
            raise BadSeedLength(f"nu must have {NU_ENTRIES} entries, got {len(self.nu)}")


def derive_nu(seed: bytes) -> ScrambleKey:
    """Expand a 32-byte seed: nu[i] = first 8 bytes of SHA-256(seed, i)."""
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_BYTES:
        raise BadSeedLength(
            f"seed must be exactly {SEED_BYTES} bytes, got {len(seed) if isinstance(seed, (bytes, bytearray)) else type(seed).__name__}"
        )
    seed = bytes(seed)
    nu = tuple(
        int.from_bytes(hashlib.sha256(seed + bytes([i])).digest()[:8], "big")
        for i in range(NU_ENTRIES)
    )
    return ScrambleKey(seed=seed, nu=nu)


def _keystream(key_material: bytes) -> Iterator[int]:
    """Endless 64-bit words: SHA-256(key, counter), four words per block."""
    counter = 0
    while True:
        block = hashlib.sha256(key_material + counter.to_bytes(8, "big")).digest()
        for off in range(0, 32, 8):
            yield int.from_bytes(block[off:off + 8], "big")
        counter += 1


@dataclass(frozen=True)
class ScrambleSchedule:
    """Ordered, collision-free embedding positions for one layer.

    Positions are stored flat over the layer's concatenated detail space
    (all full chunks, bands 17-32 in frequency order, coefficients in
    order). `triples()` exposes the equivalent (chunk_index,
    subband_index, coeff_index) view with 1-based band numbering 17-32.
    """

    layer_index: int
    flat_positions: np.ndarray
    detail_space_size: int
    chunk_length: int

    def __post_init__(self):
        object.__setattr__(self, "flat_positions",
                           np.asarray(self.flat_positions, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.flat_positions.size)

    def triples(self) -> list[tuple[int, int, int]]:
        chunk_detail = self.chunk_length // 2
        band_width = self.chunk_length // 32
        out = []
        for f in self.flat_positions.tolist():
            chunk, rem = divmod(f, chunk_detail)
            band, coeff = divmod(rem, band_width)
            out.append((chunk, 17 + band, coeff))
        return out


def schedule_for_layer(key: ScrambleKey, layer_index: int, detail_space_size: int,
                       count: int, chunk_length: int = DEFAULT_CHUNK_LENGTH
                       ) -> ScrambleSchedule:
    """Select and order `count` distinct positions out of `detail_space_size`.

    The keystream is keyed by nu rotated by layer_index, so each layer
    of a model gets an unrelated schedule from the same seed. Collision
    freedom holds by construction: this is the first `count` steps of a
    Fisher-Yates shuffle of the whole space.
    """
    if layer_index < 0:
        raise InsufficientCapacity(f"layer index must be nonnegative, got {layer_index}")
    if count > detail_space_size:
        raise InsufficientCapacity(
            f"need {count} positions but layer offers {detail_space_size} "
            "detail coefficients in full chunks"
        )

    shift = layer_index % NU_ENTRIES
    rotated = key.nu[shift:] + key.nu[:shift]
    material = hashlib.sha256(
        b"".join(v.to_bytes(8, "big") for v in rotated) + layer_index.to_bytes(8, "big")
    ).digest()

    arr = np.arange(detail_space_size, dtype=np.int64)
    words = _keystream(material)
    for i in range(count):
        j = i + next(words) % (detail_space_size - i)
        arr[i], arr[j] = arr[j], arr[i]
    return ScrambleSchedule(
        layer_index=layer_index,
        flat_positions=arr[:count].copy(),
        detail_space_size=detail_space_size,
        chunk_length=chunk_length,
    )


def load_seed_hex(text: str) -> bytes:
    """Parse the key-file format: 64 hex characters on one line."""
    token = text.strip()
    try:
        seed = bytes.fromhex(token)
    except ValueError as exc:
        raise BadSeedLength(f"key file is not hex: {exc}") from exc
    if len(seed) != SEED_BYTES:
        raise BadSeedLength(f"key file holds {len(seed)} bytes, expected {SEED_BYTES}")
    return seed
