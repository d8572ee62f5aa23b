"""Independent implementation of the weight-container byte format.

This module is written against docs/FORMAT.md in the watermarking
package, not against that package's code: it is the second
implementation that keeps the documented format honest. Writing is
deterministic so exporting the same checkpoint twice yields
byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ContainerFormatError

MAGIC = b"TSEALBX1"
FORMAT_VERSION = 1
HEADER_LEN = 28
DATA_ALIGN = 64

ROLES = ("hidden", "output", "excluded")
DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}

# Tensors below one default chunk cannot carry a payload; exporters give
# them the excluded role unless told otherwise.
MIN_CARRIER_ELEMENTS = 8192


@dataclass
class TensorEntry:
    """One exported tensor: flat row-major scalars plus its manifest row."""

    name: str
    shape: tuple[int, ...]
    dtype: str
    role: str
    data: np.ndarray

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        if not 1 <= len(self.shape) <= 4 or any(d <= 0 for d in self.shape):
            raise ContainerFormatError(f"{self.name!r}: bad shape {self.shape}")
        if self.dtype not in DTYPES:
            raise ContainerFormatError(f"{self.name!r}: unsupported dtype {self.dtype!r}")
        if self.role not in ROLES:
            raise ContainerFormatError(f"{self.name!r}: unknown role {self.role!r}")
        self.data = np.ascontiguousarray(self.data, dtype=DTYPES[self.dtype]).reshape(-1)
        want = int(np.prod(self.shape))
        if self.data.size != want:
            raise ContainerFormatError(
                f"{self.name!r}: {self.data.size} scalars for shape {self.shape}")


@dataclass
class ContainerDoc:
    """In-memory view of a container file."""

    tensors: list[TensorEntry]
    class_map: list[str] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def tensor(self, name: str) -> TensorEntry:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)


def _align(n: int) -> int:
    return (n + DATA_ALIGN - 1) // DATA_ALIGN * DATA_ALIGN


def write_container(doc: ContainerDoc, path: str | os.PathLike) -> None:
    """Serialize to the documented layout, atomically."""
    names = [t.name for t in doc.tensors]
    if len(set(names)) != len(names):
        raise ContainerFormatError("duplicate tensor names")

    records = []
    blobs = []
    offset = 0
    for t in doc.tensors:
        raw = t.data.tobytes()
        records.append({
            "name": t.name,
            "shape": list(t.shape),
            "dtype": t.dtype,
            "role": t.role,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset = _align(offset + len(raw))

    manifest = {
        "layers": records,
        "class_map": list(doc.class_map),
        "metadata": {k: doc.metadata[k] for k in sorted(doc.metadata)},
    }
    mbytes = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    data_offset = _align(HEADER_LEN + len(mbytes))
    header = (MAGIC
              + FORMAT_VERSION.to_bytes(4, "little")
              + len(mbytes).to_bytes(8, "little")
              + data_offset.to_bytes(8, "little"))

    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(prefix=".tsadapt-",
                               dir=os.path.dirname(os.path.abspath(path)))
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


def read_container(path: str | os.PathLike) -> ContainerDoc:
    """Parse a container file back into tensors, class map, and metadata."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < HEADER_LEN or blob[:8] != MAGIC:
        raise ContainerFormatError("not a container file (bad magic or truncated)")
    version = int.from_bytes(blob[8:12], "little")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"unsupported format version {version}")
    manifest_len = int.from_bytes(blob[12:20], "little")
    data_offset = int.from_bytes(blob[20:28], "little")
    if HEADER_LEN + manifest_len > len(blob) or data_offset > len(blob):
        raise ContainerFormatError("manifest or data section out of bounds")

    try:
        manifest = json.loads(blob[HEADER_LEN:HEADER_LEN + manifest_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"manifest is not valid JSON: {exc}") from exc

    tensors = []
    for rec in manifest.get("layers", []):
        dtype = rec["dtype"]
        if dtype not in DTYPES:
            raise ContainerFormatError(f"{rec.get('name')!r}: unknown dtype {dtype!r}")
        start = data_offset + int(rec["offset"])
        end = start + int(rec["nbytes"])
        if end > len(blob):
            raise ContainerFormatError(f"{rec['name']!r}: data truncated")
        data = np.frombuffer(blob[start:end], dtype=DTYPES[dtype]).copy()
        tensors.append(TensorEntry(name=rec["name"], shape=tuple(rec["shape"]),
                                   dtype=dtype, role=rec.get("role", "hidden"),
                                   data=data))
    return ContainerDoc(tensors=tensors,
                        class_map=list(manifest.get("class_map", [])),
                        metadata=dict(manifest.get("metadata", {})))
