"""Declarative export manifest: what goes into a container, under which names.

The manifest is the contract between a framework checkpoint and the
container file: every checkpoint tensor must be mapped to a container
name (export refuses surprises), exactly one mapped tensor is
designated as the output layer, and the class labels travel along.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .container_io import MIN_CARRIER_ELEMENTS, ROLES
from .errors import MissingOutputLayer, UnmappedTensor


@dataclass(frozen=True)
class ExportManifest:
    """Everything export_checkpoint needs besides the checkpoint itself.

    name_map keys are checkpoint tensor names, values are container
    layer names; container order follows name_map insertion order.
    roles optionally pins a container name to hidden/output/excluded;
    unpinned tensors default by size, and the output designation always
    wins for its layer.
    """

    framework: str
    framework_version: str
    name_map: dict[str, str]
    output_layer: str
    class_map: list[str] = field(default_factory=list)
    roles: dict[str, str] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name_map:
            raise UnmappedTensor("manifest maps no tensors")
        targets = list(self.name_map.values())
        if len(set(targets)) != len(targets):
            raise UnmappedTensor(f"duplicate container names in mapping: {targets}")
        if not self.output_layer or self.output_layer not in targets:
            raise MissingOutputLayer(
                f"output layer {self.output_layer!r} is not a mapped container name")
        for name, role in self.roles.items():
            if role not in ROLES:
                raise ValueError(f"{name!r}: unknown role {role!r}")
            if name not in targets:
                raise UnmappedTensor(f"role pinned for unmapped layer {name!r}")
        if self.roles.get(self.output_layer, "output") != "output":
            raise MissingOutputLayer(
                f"output layer {self.output_layer!r} pinned to a non-output role")

    def role_for(self, container_name: str, numel: int) -> str:
        if container_name == self.output_layer:
            return "output"
        if container_name in self.roles:
            return self.roles[container_name]
        return "hidden" if numel >= MIN_CARRIER_ELEMENTS else "excluded"


def load_manifest(path: str | os.PathLike) -> ExportManifest:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    try:
        return ExportManifest(
            framework=doc["framework"],
            framework_version=doc.get("framework_version", ""),
            name_map=dict(doc["name_map"]),
            output_layer=doc["output_layer"],
            class_map=list(doc.get("class_map", [])),
            roles=dict(doc.get("roles", {})),
            metadata=dict(doc.get("metadata", {})),
        )
    except KeyError as exc:
        raise UnmappedTensor(f"manifest file missing required field: {exc}") from exc


def save_manifest(manifest: ExportManifest, path: str | os.PathLike) -> None:
    doc = {
        "framework": manifest.framework,
        "framework_version": manifest.framework_version,
        "name_map": dict(manifest.name_map),
        "output_layer": manifest.output_layer,
        "class_map": list(manifest.class_map),
        "roles": dict(manifest.roles),
        "metadata": dict(manifest.metadata),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=False)
        f.write("\n")
