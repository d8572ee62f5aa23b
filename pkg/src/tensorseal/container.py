"""Neutral weight-container format plus the reshaping/chunking front end.

A container is a named, ordered collection of weight tensors with an
optional class map and free-form string metadata. On disk it is a small
binary file: fixed header, human-readable JSON manifest, then raw
little-endian scalars. The byte layout is documented in docs/FORMAT.md
and is the interchange surface for external exporters.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyTensor,
    FormatError,
    InvalidChunkLength,
    ShapeMismatch,
    UnsupportedVersion,
)

MAGIC = b"TSEALBX1"
FORMAT_VERSION = 1
HEADER_LEN = 28  # magic(8) + version(4) + manifest_len(8) + data_offset(8)
DATA_ALIGN = 64

ROLE_HIDDEN = "hidden"
ROLE_OUTPUT = "output"
ROLE_EXCLUDED = "excluded"
ROLES = (ROLE_HIDDEN, ROLE_OUTPUT, ROLE_EXCLUDED)

DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}

# Tensors below this element count default to the excluded role: they are
# too small to carry a payload chunk and are protected via the model digest
# instead.
MIN_CARRIER_ELEMENTS = 8192

MAX_CHUNK_LENGTH = 12000
DEFAULT_CHUNK_LENGTH = 8192


@dataclass
class LayerTensor:
    """A named weight tensor with flat row-major data.

    `data` is always kept as a 1-D numpy array of the declared dtype; the
    logical shape lives in `shape` (1 to 4 positive dimensions).
    """

    name: str
    shape: tuple[int, ...]
    dtype: str
    data: np.ndarray
    role_tag: str = ROLE_HIDDEN

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        if not 1 <= len(self.shape) <= 4:
            raise ShapeMismatch(f"layer {self.name!r}: rank must be 1-4, got {len(self.shape)}")
        if any(d <= 0 for d in self.shape):
            raise EmptyTensor(f"layer {self.name!r}: zero-length dimension in {self.shape}")
        if self.dtype not in DTYPES:
            raise ShapeMismatch(f"layer {self.name!r}: unsupported dtype {self.dtype!r}")
        if self.role_tag not in ROLES:
            raise ShapeMismatch(f"layer {self.name!r}: unknown role {self.role_tag!r}")
        self.data = np.asarray(self.data, dtype=DTYPES[self.dtype]).reshape(-1)
        if self.data.size != self.size:
            raise ShapeMismatch(
                f"layer {self.name!r}: {self.data.size} scalars for shape {self.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ShapeMismatch(f"layer {self.name!r}: non-finite scalars")

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    def copy(self) -> "LayerTensor":
        return replace(self, data=self.data.copy())


@dataclass
class ModelContainer:
    """Ordered model: layer position in `layers` is significant."""

    layers: list[LayerTensor]
    class_map: list[str] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        names = [t.name for t in self.layers]
        if len(set(names)) != len(names):
            raise ShapeMismatch("duplicate layer names in container")

    def layer(self, name: str) -> LayerTensor:
        for t in self.layers:
            if t.name == name:
                return t
        raise KeyError(name)

    def layer_index(self, name: str) -> int:
        for i, t in enumerate(self.layers):
            if t.name == name:
                return i
        raise KeyError(name)

    def copy(self) -> "ModelContainer":
        return ModelContainer(
            layers=[t.copy() for t in self.layers],
            class_map=list(self.class_map),
            metadata=dict(self.metadata),
            format_version=self.format_version,
        )


def default_role(numel: int, is_output: bool = False) -> str:
    """Role assignment used when an importer does not specify one."""
    if is_output:
        return ROLE_OUTPUT
    return ROLE_HIDDEN if numel >= MIN_CARRIER_ELEMENTS else ROLE_EXCLUDED


# --- reshaping -------------------------------------------------------------

def reshape_to_2d(layer: LayerTensor) -> np.ndarray:
    """Collapse a rank 1-4 tensor to a 2-D matrix, row-major.

    Rank 4 (a,b,c,d) becomes (a*b*c) x d; rank 1 becomes 1 x n; rank 2
    passes through. The flat scalar order is unchanged, so the operation
    is exactly inverted by shape_to_nd.
    """
    if any(d == 0 for d in layer.shape):
        raise EmptyTensor(layer.name)
    if len(layer.shape) == 1:
        return layer.data.reshape(1, layer.shape[0])
    rows = 1
    for d in layer.shape[:-1]:
        rows *= d
    return layer.data.reshape(rows, layer.shape[-1])


def shape_to_nd(matrix: np.ndarray, original_shape, *, name: str = "layer",
                dtype: str = "float64", role_tag: str = ROLE_HIDDEN) -> LayerTensor:
    """Inverse of reshape_to_2d: rebuild a LayerTensor from a 2-D matrix."""
    original_shape = tuple(int(d) for d in original_shape)
    want = 1
    for d in original_shape:
        want *= d
    mat = np.asarray(matrix)
    if mat.size != want:
        raise ShapeMismatch(f"{mat.size} elements cannot fill shape {original_shape}")
    return LayerTensor(name=name, shape=original_shape, dtype=dtype,
                       data=mat.reshape(-1), role_tag=role_tag)


# --- chunking --------------------------------------------------------------

@dataclass(frozen=True)
class ChunkPlan:
    """How a layer's flat data is partitioned for per-chunk transforms."""

    layer_name: str
    chunk_length: int
    chunk_count: int
    padded_tail: int
    original_length: int

    @property
    def full_chunks(self) -> int:
        """Chunks with no zero padding; only these may carry payload bits."""
        return self.chunk_count - (1 if self.padded_tail else 0)


def validate_chunk_length(chunk_length: int) -> None:
    if chunk_length <= 0 or chunk_length % 32 != 0 or chunk_length > MAX_CHUNK_LENGTH:
        raise InvalidChunkLength(
            f"chunk length must be a positive multiple of 32 and <= {MAX_CHUNK_LENGTH}, "
            f"got {chunk_length}"
        )


def plan_chunks(layer: LayerTensor, chunk_length: int = DEFAULT_CHUNK_LENGTH
                ) -> tuple[ChunkPlan, np.ndarray]:
    """Partition a layer's flat row-major data into equal chunks.

    Returns the plan and a (chunk_count, chunk_length) float64 array; the
    final chunk is zero-padded. Concatenating the rows and truncating to
    original_length reproduces the flat data exactly.
    """
    validate_chunk_length(chunk_length)
    flat = layer.data.astype(np.float64, copy=False)
    n = flat.size
    if n < 1:
        raise EmptyTensor(layer.name)
    count = -(-n // chunk_length)
    padded = count * chunk_length - n
    chunks = np.zeros((count, chunk_length), dtype=np.float64)
    chunks.reshape(-1)[:n] = flat
    plan = ChunkPlan(layer_name=layer.name, chunk_length=chunk_length,
                     chunk_count=count, padded_tail=padded, original_length=n)
    return plan, chunks


def assemble_chunks(plan: ChunkPlan, chunks: np.ndarray) -> np.ndarray:
    """Inverse of plan_chunks: flat float64 data of original_length."""
    if chunks.shape != (plan.chunk_count, plan.chunk_length):
        raise ShapeMismatch(
            f"expected {(plan.chunk_count, plan.chunk_length)}, got {chunks.shape}"
        )
    return chunks.reshape(-1)[: plan.original_length]


# --- file I/O --------------------------------------------------------------

def _align(n: int, a: int = DATA_ALIGN) -> int:
    return (n + a - 1) // a * a


def save_container(container: ModelContainer, path: str | os.PathLike) -> None:
    """Write a container file atomically (temp file + rename)."""
    records = []
    offset = 0
    blobs = []
    for t in container.layers:
        raw = t.data.astype(DTYPES[t.dtype], copy=False).tobytes()
        records.append({
            "name": t.name,
            "shape": list(t.shape),
            "dtype": t.dtype,
            "role": t.role_tag,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset = _align(offset + len(raw))

    manifest = {
        "layers": records,
        "class_map": list(container.class_map),
        "metadata": {k: container.metadata[k] for k in sorted(container.metadata)},
    }
    mbytes = json.dumps(manifest, separators=(",", ":"), sort_keys=False).encode("utf-8")
    data_offset = _align(HEADER_LEN + len(mbytes))

    header = (
        MAGIC
        + container.format_version.to_bytes(4, "little")
        + len(mbytes).to_bytes(8, "little")
        + data_offset.to_bytes(8, "little")
    )

    path = os.fspath(path)
    dirpath = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tseal-", dir=dirpath)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(mbytes)
            f.write(b"\x00" * (data_offset - HEADER_LEN - len(mbytes)))
            pos = 0
            for rec, raw in zip(records, blobs):
                f.write(b"\x00" * (rec["offset"] - pos))
                f.write(raw)
                pos = rec["offset"] + len(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_container(path: str | os.PathLike) -> ModelContainer:
    """Read a container file, validating structure as it goes.

    Raises FormatError (with the byte offset of the fault) on any
    malformed input, UnsupportedVersion on a future format version.
    """
    with open(path, "rb") as f:
        blob = f.read()

    if len(blob) < HEADER_LEN:
        raise FormatError("file shorter than fixed header", offset=len(blob))
    if blob[:8] != MAGIC:
        raise FormatError(f"bad magic {blob[:8]!r}", offset=0)
    version = int.from_bytes(blob[8:12], "little")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version} (supported: {FORMAT_VERSION})")
    manifest_len = int.from_bytes(blob[12:20], "little")
    data_offset = int.from_bytes(blob[20:28], "little")
    if HEADER_LEN + manifest_len > len(blob) or data_offset > len(blob):
        raise FormatError("manifest or data section extends past end of file",
                          offset=len(blob))
    if data_offset < HEADER_LEN + manifest_len:
        raise FormatError("data section overlaps manifest", offset=20)

    try:
        manifest = json.loads(blob[HEADER_LEN:HEADER_LEN + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}", offset=HEADER_LEN) from exc

    if not isinstance(manifest, dict) or "layers" not in manifest:
        raise FormatError("manifest missing 'layers'", offset=HEADER_LEN)

    layers = []
    for rec in manifest["layers"]:
        try:
            name = rec["name"]
            shape = tuple(int(d) for d in rec["shape"])
            dtype = rec["dtype"]
            role = rec.get("role", ROLE_HIDDEN)
            off = int(rec["offset"])
            nbytes = int(rec["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad layer record: {exc}", offset=HEADER_LEN) from exc
        if dtype not in DTYPES:
            raise FormatError(f"layer {name!r}: unknown dtype {dtype!r}", offset=HEADER_LEN)
        start = data_offset + off
        end = start + nbytes
        if end > len(blob):
            raise FormatError(f"layer {name!r}: data truncated", offset=len(blob))
        want = 1
        for d in shape:
            want *= d
        if nbytes != want * DTYPES[dtype].itemsize:
            raise FormatError(
                f"layer {name!r}: {nbytes} bytes does not match shape {shape}", offset=start
            )
        data = np.frombuffer(blob[start:end], dtype=DTYPES[dtype]).copy()
        try:
            layers.append(LayerTensor(name=name, shape=shape, dtype=dtype,
                                      data=data, role_tag=role))
        except (ShapeMismatch, EmptyTensor) as exc:
            raise FormatError(f"layer {name!r}: {exc}", offset=start) from exc

    class_map = manifest.get("class_map", [])
    metadata = manifest.get("metadata", {})
    if not isinstance(class_map, list) or not all(isinstance(s, str) for s in class_map):
        raise FormatError("class_map must be a list of strings", offset=HEADER_LEN)
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise FormatError("metadata must map strings to strings", offset=HEADER_LEN)

    try:
        return ModelContainer(layers=layers, class_map=class_map,
                              metadata=metadata, format_version=version)
    except ShapeMismatch as exc:
        raise FormatError(str(exc), offset=HEADER_LEN) from exc
