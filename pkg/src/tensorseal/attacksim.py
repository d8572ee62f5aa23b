"""Direct-mutation stand-ins for training-based tampering.

Detection only cares that weights changed, not how, so retraining
attacks are simulated by seeded parameter mutation: Gaussian noise
(fine-tuning/poisoning proxy), constant offsets at chosen positions
(trojan-weight proxy), and class-label swaps that leave every scalar
intact (output poisoning, the digest-only detection path).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .container import DTYPES, ModelContainer, ROLE_HIDDEN
from .errors import EmptyClassMap, UnknownLayer, WrongLength
from .marker import VerificationReport, verify_model

KIND_WEIGHT_PERTURB = "weight_perturb"
KIND_TARGETED_EDIT = "targeted_edit"
KIND_CLASS_FLIP = "class_flip"
KINDS = (KIND_WEIGHT_PERTURB, KIND_TARGETED_EDIT, KIND_CLASS_FLIP)


@dataclass(frozen=True)
class AttackSpec:
    """One declarative tampering action.

    target_layers None means every hidden-role layer. For class_flip,
    `labels` picks the two class names to swap; None lets the seeded rng
    choose a distinct pair.
    """

    kind: str
    target_layers: tuple[str, ...] | None = None
    magnitude: float = 0.0
    fraction: float = 0.0
    rng_seed: int = 0
    labels: tuple[str, str] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise WrongLength(f"unknown attack kind {self.kind!r}; choose from {KINDS}")
        if self.kind in (KIND_WEIGHT_PERTURB, KIND_TARGETED_EDIT):
            if not 0.0 < self.fraction <= 1.0:
                raise WrongLength(f"fraction must be in (0, 1], got {self.fraction}")
            if self.magnitude <= 0.0:
                raise WrongLength(f"magnitude must be positive, got {self.magnitude}")
        if self.labels is not None and (len(self.labels) != 2
                                        or self.labels[0] == self.labels[1]):
            raise WrongLength(
                f"labels must name two distinct classes, got {self.labels!r}")


def _resolve_targets(container: ModelContainer, spec: AttackSpec) -> list[str]:
    if spec.target_layers is None:
        return [t.name for t in container.layers if t.role_tag == ROLE_HIDDEN]
    known = {t.name for t in container.layers}
    for name in spec.target_layers:
        if name not in known:
            raise UnknownLayer(name)
    return list(spec.target_layers)


def apply_attack(container: ModelContainer, spec: AttackSpec) -> ModelContainer:
    """Return a tampered copy of the container; the input is untouched."""
    out = container.copy()
    rng = np.random.default_rng(spec.rng_seed)

    if spec.kind == KIND_CLASS_FLIP:
        if len(out.class_map) < 2:
            raise EmptyClassMap(
                f"class_flip needs at least 2 classes, have {len(out.class_map)}"
            )
        if spec.labels is not None:
            try:
                i = out.class_map.index(spec.labels[0])
                j = out.class_map.index(spec.labels[1])
            except ValueError as exc:
                raise EmptyClassMap(f"label not in class map: {exc}") from exc
        else:
            i, j = rng.choice(len(out.class_map), size=2, replace=False)
        out.class_map[i], out.class_map[j] = out.class_map[j], out.class_map[i]
        return out

    for name in _resolve_targets(out, spec):
        layer = out.layer(name)
        n = max(1, int(round(spec.fraction * layer.size)))
        idx = rng.choice(layer.size, size=n, replace=False)
        if spec.kind == KIND_WEIGHT_PERTURB:
            bump = rng.normal(0.0, spec.magnitude, size=n)
        else:
            bump = np.full(n, spec.magnitude)
        layer.data[idx] += bump.astype(DTYPES[layer.dtype])
    return out


@dataclass(frozen=True)
class DetectionSummary:
    trials: int
    detection_rate: float
    ber_min: float | None
    ber_max: float | None


def detection_trial(container: ModelContainer, seed: bytes, spec: AttackSpec | None,
                    trials: int, expected_secret: bytes = b"") -> DetectionSummary:
    """Attack-and-verify `trials` times with varied rng seeds.

    spec None measures the false-alarm baseline: verification of the
    untouched marked container. detection_rate is the fraction of trials
    whose report fails overall; ber_min/ber_max range over every
    per-layer BER observed across all trials.
    """
    if trials < 1:
        raise WrongLength(f"trials must be >= 1, got {trials}")
    detected = 0
    bers: list[float] = []
    for t in range(trials):
        if spec is None:
            victim = container
        else:
            victim = apply_attack(container, replace(spec, rng_seed=spec.rng_seed + t))
        report: VerificationReport = verify_model(victim, seed,
                                                  expected_secret=expected_secret)
        if not report.overall_verdict:
            detected += 1
        bers.extend(v.ber for v in report.layers if v.ber is not None)
    return DetectionSummary(
        trials=trials,
        detection_rate=detected / trials,
        ber_min=min(bers) if bers else None,
        ber_max=max(bers) if bers else None,
    )
