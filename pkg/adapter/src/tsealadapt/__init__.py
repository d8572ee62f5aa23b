"""Framework adapter: move torch checkpoints in and out of sealed containers."""

from .container_io import ContainerDoc, TensorEntry, read_container, write_container
from .errors import (AdapterError, ContainerFormatError, MissingOutputLayer,
                     UnmappedTensor)
from .export import (ImportedCheckpoint, export_checkpoint, export_state,
                     import_container)
from .manifest import ExportManifest, load_manifest, save_manifest
from .train import (CLASS_NAMES, TinyCNN, finetune_attack, make_dataset,
                    pretrain, tinycnn_manifest)

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "CLASS_NAMES",
    "ContainerDoc",
    "ContainerFormatError",
    "ExportManifest",
    "ImportedCheckpoint",
    "MissingOutputLayer",
    "TensorEntry",
    "TinyCNN",
    "UnmappedTensor",
    "export_checkpoint",
    "export_state",
    "finetune_attack",
    "import_container",
    "load_manifest",
    "make_dataset",
    "pretrain",
    "read_container",
    "save_manifest",
    "tinycnn_manifest",
    "write_container",
    "__version__",
]
