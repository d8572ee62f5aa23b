"""Fragile invisible watermarking for neural-network weight containers.

Embed a keyed, hash-bound secret into the wavelet detail coefficients
of hidden-layer weights; any later modification of weights or output
labels breaks the hidden hash or the model digest and is detected.
"""

from .analysis import (
    DistortionPoint,
    StrengthReport,
    capacity,
    probe_agreement,
    search_space,
    sweep_distortion,
)
from .attacksim import AttackSpec, DetectionSummary, apply_attack, detection_trial
from .container import (
    ChunkPlan,
    LayerTensor,
    ModelContainer,
    load_container,
    plan_chunks,
    reshape_to_2d,
    save_container,
    shape_to_nd,
)
from .errors import TensorSealError
from .keying import ScrambleKey, ScrambleSchedule, derive_nu, schedule_for_layer
from .marker import (
    EmbedRecord,
    ScalingParams,
    VerificationReport,
    embed_layer,
    embed_model,
    extract_layer,
    verify_model,
)
from .payload import (
    PAYLOAD_BITS,
    SecretPayload,
    model_digest,
    parse_and_check,
    prepare_secret,
)
from .wavelet import SubbandGrid, wipe_details, wpt_forward, wpt_inverse

__version__ = "0.1.0"

__all__ = [
    "AttackSpec",
    "ChunkPlan",
    "DetectionSummary",
    "DistortionPoint",
    "EmbedRecord",
    "LayerTensor",
    "ModelContainer",
    "PAYLOAD_BITS",
    "ScalingParams",
    "ScrambleKey",
    "ScrambleSchedule",
    "SecretPayload",
    "StrengthReport",
    "SubbandGrid",
    "TensorSealError",
    "VerificationReport",
    "apply_attack",
    "capacity",
    "derive_nu",
    "detection_trial",
    "embed_layer",
    "embed_model",
    "extract_layer",
    "load_container",
    "model_digest",
    "parse_and_check",
    "plan_chunks",
    "prepare_secret",
    "probe_agreement",
    "reshape_to_2d",
    "save_container",
    "schedule_for_layer",
    "search_space",
    "shape_to_nd",
    "sweep_distortion",
    "verify_model",
    "wipe_details",
    "wpt_forward",
    "wpt_inverse",
    "__version__",
]
