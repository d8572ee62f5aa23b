"""Checkpoint <-> container conversion.

Rank-4 convolution kernels are stored (out, in, kh, kw) by torch but
(kh, kw, in, out) in the container, so a 3x3 kernel over 256 input and
512 output channels appears as (3, 3, 256, 512); import-back inverts
the transpose, and scalars survive both directions bit-exactly at
source precision. Lower ranks pass through unchanged.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .container_io import ContainerDoc, TensorEntry, read_container, write_container
from .errors import ContainerFormatError, UnmappedTensor
from .manifest import ExportManifest

_TORCH_DTYPES = {torch.float32: "float32", torch.float64: "float64"}


def _to_container_layout(arr: np.ndarray) -> np.ndarray:
    return arr.transpose(2, 3, 1, 0) if arr.ndim == 4 else arr


def _to_framework_layout(arr: np.ndarray) -> np.ndarray:
    return arr.transpose(3, 2, 0, 1) if arr.ndim == 4 else arr


def _entries_from_state(state: dict[str, torch.Tensor],
                        manifest: ExportManifest) -> list[TensorEntry]:
    missing = [k for k in manifest.name_map if k not in state]
    if missing:
        raise UnmappedTensor(f"checkpoint lacks mapped tensors: {missing}")
    extra = [k for k in state if k not in manifest.name_map]
    if extra:
        raise UnmappedTensor(f"checkpoint tensors not covered by the manifest: {extra}")

    entries = []
    for ckpt_name, cont_name in manifest.name_map.items():
        t = state[ckpt_name]
        if not isinstance(t, torch.Tensor) or t.dtype not in _TORCH_DTYPES:
            raise ContainerFormatError(
                f"{ckpt_name!r}: only float32/float64 tensors are exportable, "
                f"got {getattr(t, 'dtype', type(t).__name__)}")
        arr = _to_container_layout(t.detach().cpu().numpy())
        entries.append(TensorEntry(
            name=cont_name,
            shape=arr.shape,
            dtype=_TORCH_DTYPES[t.dtype],
            role=manifest.role_for(cont_name, arr.size),
            data=arr.reshape(-1),
        ))
    return entries


def export_state(state: dict[str, torch.Tensor], manifest: ExportManifest,
                 out_path: str | os.PathLike,
                 metadata: dict[str, str] | None = None) -> None:
    """Write an in-memory state dict as a container file.

    `metadata` overrides the manifest's metadata wholesale; the
    re-export half of the attack demo passes a marked container's
    metadata through so its embed records survive the framework round
    trip.
    """
    doc = ContainerDoc(
        tensors=_entries_from_state(state, manifest),
        class_map=list(manifest.class_map),
        metadata=dict(manifest.metadata if metadata is None else metadata),
    )
    write_container(doc, out_path)


def export_checkpoint(checkpoint_path: str | os.PathLike, manifest: ExportManifest,
                      out_path: str | os.PathLike,
                      metadata: dict[str, str] | None = None) -> None:
    """Load a torch checkpoint (a flat state dict) and export it."""
    state = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    export_state(state, manifest, out_path, metadata=metadata)


@dataclass
class ImportedCheckpoint:
    """A container pulled back into framework terms."""

    state: dict[str, torch.Tensor]
    class_map: list[str]
    metadata: dict[str, str] = field(default_factory=dict)


def import_container(container_path: str | os.PathLike,
                     manifest: ExportManifest) -> ImportedCheckpoint:
    """Inverse of export: container file -> framework state dict.

    Uses the manifest's mapping in reverse, so the result loads straight
    into the original module via load_state_dict.
    """
    doc = read_container(container_path)
    reverse = {cont: ckpt for ckpt, cont in manifest.name_map.items()}
    state: dict[str, torch.Tensor] = {}
    for entry in doc.tensors:
        if entry.name not in reverse:
            raise UnmappedTensor(f"container layer {entry.name!r} is not in the manifest")
        arr = _to_framework_layout(entry.data.reshape(entry.shape))
        state[reverse[entry.name]] = torch.from_numpy(np.ascontiguousarray(arr))
    missing = [cont for cont in reverse if cont not in {t.name for t in doc.tensors}]
    if missing:
        raise UnmappedTensor(f"container lacks mapped layers: {missing}")
    return ImportedCheckpoint(state=state, class_map=doc.class_map,
                              metadata=doc.metadata)
