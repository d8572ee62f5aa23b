"""Per-layer payload assembly: secret, model digest, and integrity hash.

Every carrier layer receives the same fixed-size bitstring layout,
8192 bits total:

    [ secret bit-length : 16-bit big-endian ]
    [ secret bytes      : stamp 0x00 user secret, <= 956 bytes ]
    [ model digest      : 32 bytes ]
    [ SHA-256 over everything above ]
    [ zero padding to 1024 bytes ]

The stamp is a human-readable UTF-8 line naming the layer index and the
container's identifying metadata, so each layer's payload is unique and
self-describing. The model digest binds the class map and every tensor
that carries no payload (output layer, excluded tensors) into each
hidden layer's payload; swapping class labels or touching the output
layer changes the digest and is caught even though no carrier weight
moved.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .container import ModelContainer, ROLE_HIDDEN
from .errors import SecretTooLarge, WrongLength

PAYLOAD_BITS = 8192
PAYLOAD_BYTES = PAYLOAD_BITS // 8
HEADER_BYTES = 2
DIGEST_BYTES = 32
HASH_BYTES = 32
MAX_SECRET_BYTES = 956

STAMP_KEYS = ("model_name", "model_version", "owner", "created")
_STAMP_SEP = b"\x00"


def bytes_to_bits(raw: bytes) -> np.ndarray:
    """Big-endian bit expansion: b'\\x80' -> [1,0,0,0,0,0,0,0]."""
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1 or bits.size % 8 != 0:
        raise WrongLength(f"bit array of length {bits.size} is not byte-aligned")
    return np.packbits(bits).tobytes()


def ber(extracted: np.ndarray, expected: np.ndarray) -> float:
    """Fraction of differing bits between two equal-length bit arrays."""
    a = np.asarray(extracted, dtype=np.uint8)
    b = np.asarray(expected, dtype=np.uint8)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise WrongLength(f"cannot compare bit arrays of shapes {a.shape} and {b.shape}")
    return float(np.count_nonzero(a != b)) / a.size


# --- model digest ----------------------------------------------------------

def model_digest(container: ModelContainer, embedded_layers: Iterable[str] | None = None
                 ) -> bytes:
    """256-bit digest over the class map and all non-carrier tensors.

    `embedded_layers` names the layers that carry (or will carry) a
    payload; their scalars change during embedding and are protected by
    their own hidden hashes instead. When None, carriers are assumed to
    be exactly the hidden-role layers. Serialization is a concatenation
    of self-delimiting tagged records, so an empty class map with no
    covered tensors hashes the empty string.
    """
    if embedded_layers is None:
        skip = {t.name for t in container.layers if t.role_tag == ROLE_HIDDEN}
    else:
        skip = set(embedded_layers)

    h = hashlib.sha256()
    for label in container.class_map:
        enc = label.encode("utf-8")
        h.update(b"C" + len(enc).to_bytes(4, "little") + enc)
    for t in container.layers:
        if t.name in skip:
            continue
        name = t.name.encode("utf-8")
        h.update(b"L" + len(name).to_bytes(4, "little") + name)
        h.update(len(t.shape).to_bytes(1, "little"))
        for d in t.shape:
            h.update(d.to_bytes(8, "little"))
        h.update(t.dtype.encode("ascii"))
        h.update(t.data.tobytes())
    return h.digest()


# --- stamp -----------------------------------------------------------------

def make_stamp(layer_index: int, metadata: dict[str, str]) -> str:
    """Human-readable per-layer identity line serialized into the secret."""
    parts = [f"layer:{layer_index}"]
    for key in STAMP_KEYS:
        parts.append(f"{key}:{metadata.get(key, '')}")
    return "|".join(parts)


def split_stamp(secret_bytes: bytes) -> tuple[str, bytes]:
    """Inverse of the stamp/user-secret merge: (stamp text, user secret)."""
    head, sep, tail = secret_bytes.partition(_STAMP_SEP)
    if not sep:
        return head.decode("utf-8", errors="replace"), b""
    return head.decode("utf-8", errors="replace"), tail


# --- payload ---------------------------------------------------------------

@dataclass(frozen=True)
class SecretPayload:
    """Assembled but not yet bit-serialized payload for one layer."""

    secret_bytes: bytes
    model_digest_value: bytes

    def __post_init__(self):
        if len(self.secret_bytes) > MAX_SECRET_BYTES:
            raise SecretTooLarge(
                f"{len(self.secret_bytes)} secret bytes exceed the {MAX_SECRET_BYTES}-byte limit"
            )
        if len(self.model_digest_value) != DIGEST_BYTES:
            raise WrongLength(f"model digest must be {DIGEST_BYTES} bytes")

    @property
    def secret_len(self) -> int:
        """Bit length of the secret, as serialized in the 16-bit header."""
        return 8 * len(self.secret_bytes)

    def body(self) -> bytes:
        return (self.secret_len.to_bytes(HEADER_BYTES, "big")
                + self.secret_bytes + self.model_digest_value)

    @property
    def hash_value(self) -> bytes:
        return hashlib.sha256(self.body()).digest()

    def to_bits(self) -> np.ndarray:
        buf = self.body() + self.hash_value
        buf += b"\x00" * (PAYLOAD_BYTES - len(buf))
        return bytes_to_bits(buf)


def prepare_secret(container: ModelContainer, layer_index: int,
                   user_secret: bytes = b"", digest: bytes | None = None
                   ) -> SecretPayload:
    """Build the payload for one layer of a container.

    The caller that knows the true set of carrier layers passes the
    shared `digest` explicitly; standalone callers get the hidden-role
    default. Raises SecretTooLarge when stamp plus user secret exceed
    the 956-byte budget.
    """
    stamp = make_stamp(layer_index, container.metadata).encode("utf-8")
    secret_bytes = stamp + _STAMP_SEP + user_secret
    if digest is None:
        digest = model_digest(container)
    return SecretPayload(secret_bytes=secret_bytes, model_digest_value=digest)


class ParsedPayload(NamedTuple):
    secret_bytes: bytes
    model_digest_value: bytes
    hash_match: bool


def parse_and_check(bits: np.ndarray) -> ParsedPayload:
    """Deserialize an extracted 8192-bit payload and test its integrity.

    Never raises on corrupt content: structurally impossible headers and
    any mismatch (recomputed hash, or nonzero padding) simply yield
    hash_match False, since tampered extractions are the expected input.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (PAYLOAD_BITS,):
        raise WrongLength(f"payload must be exactly {PAYLOAD_BITS} bits, got {bits.shape}")
    buf = bits_to_bytes(bits)
    secret_len = int.from_bytes(buf[:HEADER_BYTES], "big")
    if secret_len % 8 != 0 or secret_len // 8 > MAX_SECRET_BYTES:
        return ParsedPayload(b"", bytes(DIGEST_BYTES), False)
    nsec = secret_len // 8
    body_end = HEADER_BYTES + nsec + DIGEST_BYTES
    secret = buf[HEADER_BYTES:HEADER_BYTES + nsec]
    digest = buf[HEADER_BYTES + nsec:body_end]
    embedded_hash = buf[body_end:body_end + HASH_BYTES]
    pad = buf[body_end + HASH_BYTES:]
    ok = (hashlib.sha256(buf[:body_end]).digest() == embedded_hash
          and pad.count(0) == len(pad))
    return ParsedPayload(secret, digest, ok)
