"""Embedding and verification codec for whole models.

Embedding pipeline per layer: reshape to flat chunks, wavelet packet
transform, then for each key-scheduled detail coefficient shift by
delta, scale by rho, round to an integer, replace its lowest `level`
bits with payload bits, and map back. Only scheduled coefficients are
quantized; everything else passes through the transform round-trip
untouched. Verification re-runs the analysis side, reads the low bits
back, and checks the payload hash plus the model digest.

The recovery margin is the load-bearing correctness fact: transform
round-trip error plus float32 storage move a scaled coefficient by far
less than 0.5, so rounding at extraction recovers the embedded integer
exactly and untampered models verify with zero bit errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .container import (
    ChunkPlan,
    LayerTensor,
    ModelContainer,
    ROLE_HIDDEN,
    assemble_chunks,
    plan_chunks,
    reshape_to_2d,
    shape_to_nd,
    validate_chunk_length,
)
from .errors import (
    CoefficientOutOfRange,
    InsufficientCapacity,
    MissingEmbedRecords,
    NoEligibleLayers,
    WrongLength,
)
from .keying import ScrambleKey, ScrambleSchedule, derive_nu, schedule_for_layer
from .payload import (
    PAYLOAD_BITS,
    SecretPayload,
    make_stamp,
    model_digest,
    parse_and_check,
    prepare_secret,
    ber as bit_error_rate,
)
from .wavelet import wpt_forward, wpt_inverse

RECORD_KEY_PREFIX = "tseal.record."
MAX_EXACT_SCALED = float(1 << 52)  # beyond this, float64 integers skip


@dataclass(frozen=True)
class ScalingParams:
    """Coefficient conditioning constants.

    delta shifts every selected coefficient positive; rho scales so the
    four leading decimals become integer bits; watermark_level is how
    many low bits of each scaled coefficient carry payload.
    """

    delta: float = 16.0
    rho: float = 10_000.0
    watermark_level: int = 2

    def __post_init__(self):
        if self.delta < 0:
            raise CoefficientOutOfRange(f"delta must be nonnegative, got {self.delta}")
        if self.rho <= 0:
            raise CoefficientOutOfRange(f"rho must be positive, got {self.rho}")
        if self.watermark_level not in (1, 2, 3, 4):
            raise WrongLength(f"watermark level must be 1-4, got {self.watermark_level}")

    @property
    def fragment_count(self) -> int:
        """Scheduled positions needed for one payload."""
        return -(-PAYLOAD_BITS // self.watermark_level)


def scale(coeff: float, params: ScalingParams) -> int:
    """q = round((coeff + delta) * rho), guaranteed exact and nonnegative."""
    shifted = coeff + params.delta
    if shifted <= 0 or shifted * params.rho >= MAX_EXACT_SCALED:
        raise CoefficientOutOfRange(
            f"coefficient {coeff} not in ({-params.delta}, "
            f"{MAX_EXACT_SCALED / params.rho - params.delta}); raise delta"
        )
    return int(round(shifted * params.rho))


def rescale(q: int, params: ScalingParams) -> float:
    """Inverse of scale up to the rounding grid: q / rho - delta."""
    if q < 0:
        raise CoefficientOutOfRange(f"scaled coefficient must be nonnegative, got {q}")
    return q / params.rho - params.delta


def hide_bits(q: int, bits: int, level: int = 2) -> int:
    """Replace the lowest `level` bits of q with `bits`."""
    mask = (1 << level) - 1
    if not 0 <= bits <= mask:
        raise WrongLength(f"payload fragment {bits} does not fit in {level} bits")
    return (q & ~mask) | bits


def read_bits(q: int, level: int = 2) -> int:
    """The lowest `level` bits of q."""
    return q & ((1 << level) - 1)


# --- embed records -----------------------------------------------------------

@dataclass(frozen=True)
class EmbedRecord:
    """Everything the verifier needs besides the key and the container.

    embed_digest is the model digest at embedding time (hex); the
    verifier uses it to reconstruct the expected payload for BER
    reporting. The record is not secret and not trusted: altering it
    breaks extraction and the payload hash check fails.
    """

    layer_name: str
    chunk_plan: ChunkPlan
    schedule_length: int
    scaling: ScalingParams
    payload_bits: int
    embed_digest: str

    def to_json(self) -> str:
        return json.dumps({
            "layer_name": self.layer_name,
            "chunk_length": self.chunk_plan.chunk_length,
            "chunk_count": self.chunk_plan.chunk_count,
            "padded_tail": self.chunk_plan.padded_tail,
            "original_length": self.chunk_plan.original_length,
            "schedule_length": self.schedule_length,
            "delta": self.scaling.delta,
            "rho": self.scaling.rho,
            "watermark_level": self.scaling.watermark_level,
            "payload_bits": self.payload_bits,
            "embed_digest": self.embed_digest,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EmbedRecord":
        d = json.loads(text)
        plan = ChunkPlan(
            layer_name=d["layer_name"],
            chunk_length=int(d["chunk_length"]),
            chunk_count=int(d["chunk_count"]),
            padded_tail=int(d["padded_tail"]),
            original_length=int(d["original_length"]),
        )
        scaling = ScalingParams(
            delta=float(d["delta"]),
            rho=float(d["rho"]),
            watermark_level=int(d["watermark_level"]),
        )
        return cls(
            layer_name=d["layer_name"],
            chunk_plan=plan,
            schedule_length=int(d["schedule_length"]),
            scaling=scaling,
            payload_bits=int(d["payload_bits"]),
            embed_digest=d["embed_digest"],
        )


def records_from_container(container: ModelContainer) -> list[EmbedRecord]:
    """Embed records stored in metadata, in container layer order."""
    by_name = {}
    for key, value in container.metadata.items():
        if key.startswith(RECORD_KEY_PREFIX):
            rec = EmbedRecord.from_json(value)
            by_name[rec.layer_name] = rec
    ordered = [by_name.pop(t.name) for t in container.layers if t.name in by_name]
    ordered.extend(by_name.values())  # records whose layer vanished
    return ordered


def _detail_space(numel: int, chunk_length: int) -> int:
    """Schedulable positions: detail half of each fully populated chunk.

    The zero-padded tail chunk is excluded: its padding is dropped when
    the layer's shape is restored, which would destroy any bits hidden
    there.
    """
    return (numel // chunk_length) * (chunk_length // 2)


def _positions_to_grid_index(schedule: ScrambleSchedule
                             ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Map flat detail positions to grid indices.

    Returns (affected chunk indices, local row into the affected stack,
    band row 16-31 of the coefficient grid, position within the band).
    """
    chunk_detail = schedule.chunk_length // 2
    band_width = schedule.chunk_length // 32
    pos = schedule.flat_positions
    chunk_idx = pos // chunk_detail
    offset = pos % chunk_detail
    affected = np.unique(chunk_idx)
    local = np.searchsorted(affected, chunk_idx)
    return affected, local, 16 + offset // band_width, offset % band_width


def _check_geometry(layer: LayerTensor, schedule: ScrambleSchedule,
                    params: ScalingParams, payload_bits: int) -> None:
    space = _detail_space(layer.size, schedule.chunk_length)
    if params.watermark_level * space < payload_bits:
        raise InsufficientCapacity(
            f"layer {layer.name!r} offers {params.watermark_level * space} bits "
            f"({space} detail coefficients at level {params.watermark_level}), "
            f"payload needs {payload_bits}"
        )
    if len(schedule) != -(-payload_bits // params.watermark_level):
        raise InsufficientCapacity(
            f"schedule has {len(schedule)} positions, payload of {payload_bits} bits "
            f"at level {params.watermark_level} needs {-(-payload_bits // params.watermark_level)}"
        )
    if schedule.detail_space_size != space:
        raise InsufficientCapacity(
            f"schedule was built for a {schedule.detail_space_size}-coefficient space, "
            f"layer {layer.name!r} has {space}"
        )


def _bits_to_fragments(bits: np.ndarray, level: int) -> np.ndarray:
    """Group payload bits into level-bit integers, zero-padding the tail."""
    n_frag = -(-bits.size // level)
    padded = np.zeros(n_frag * level, dtype=np.uint8)
    padded[: bits.size] = bits
    weights = 1 << np.arange(level - 1, -1, -1)
    return (padded.reshape(n_frag, level) * weights).sum(axis=1).astype(np.int64)


def _fragments_to_bits(frags: np.ndarray, level: int, payload_bits: int) -> np.ndarray:
    shifts = np.arange(level - 1, -1, -1)
    bits = ((frags[:, None] >> shifts) & 1).astype(np.uint8)
    return bits.reshape(-1)[:payload_bits]


def embed_layer(layer: LayerTensor, payload: np.ndarray, schedule: ScrambleSchedule,
                params: ScalingParams) -> tuple[LayerTensor, EmbedRecord]:
    """Hide one payload in one layer; returns the marked layer and its record.

    Non-scheduled coefficients are bit-identical through the round trip
    only up to float arithmetic; chunks containing no scheduled position
    are never transformed at all and stay exactly identical.
    """
    payload = np.asarray(payload, dtype=np.uint8).reshape(-1)
    _check_geometry(layer, schedule, params, payload.size)
    level = params.watermark_level

    plan, chunks = plan_chunks(layer, schedule.chunk_length)
    affected, local, band, pos = _positions_to_grid_index(schedule)

    grid = wpt_forward(chunks[affected])
    coeffs = grid.coeffs[local, band, pos]

    shifted = coeffs + params.delta
    if np.any(shifted <= 0) or np.any(shifted * params.rho >= MAX_EXACT_SCALED):
        worst = float(coeffs.min())
        raise CoefficientOutOfRange(
            f"layer {layer.name!r}: coefficient {worst} out of range for delta "
            f"{params.delta}; raise delta"
        )
    q = np.rint(shifted * params.rho).astype(np.int64)
    mask = (1 << level) - 1
    q = (q & ~mask) | _bits_to_fragments(payload, level)
    grid.coeffs[local, band, pos] = q / params.rho - params.delta

    chunks[affected] = wpt_inverse(grid)
    flat = assemble_chunks(plan, chunks)
    marked = shape_to_nd(flat, layer.shape, name=layer.name, dtype=layer.dtype,
                         role_tag=layer.role_tag)

    parsed = parse_and_check(payload) if payload.size == PAYLOAD_BITS else None
    record = EmbedRecord(
        layer_name=layer.name,
        chunk_plan=plan,
        schedule_length=len(schedule),
        scaling=params,
        payload_bits=int(payload.size),
        embed_digest=parsed.model_digest_value.hex() if parsed else "",
    )
    return marked, record


def extract_layer(layer: LayerTensor, schedule: ScrambleSchedule, params: ScalingParams,
                  payload_bits: int = PAYLOAD_BITS) -> np.ndarray:
    """Read the scheduled low bits back out of a (possibly tampered) layer.

    Total on any input that fits the geometry: out-of-range coefficients
    are clamped rather than raised, since garbage bits from a mangled
    layer are exactly what the hash check exists to catch.
    """
    _check_geometry(layer, schedule, params, payload_bits)
    _, chunks = plan_chunks(layer, schedule.chunk_length)
    affected, local, band, pos = _positions_to_grid_index(schedule)
    grid = wpt_forward(chunks[affected])
    coeffs = grid.coeffs[local, band, pos]
    q = np.rint((coeffs + params.delta) * params.rho)
    q = np.maximum(q, 0.0).astype(np.int64)
    frags = q & ((1 << params.watermark_level) - 1)
    return _fragments_to_bits(frags, params.watermark_level, payload_bits)


# --- whole-model orchestration ----------------------------------------------

@dataclass
class LayerVerdict:
    layer_name: str
    hash_match: bool
    digest_match: bool
    ber: float | None = None

    @property
    def ok(self) -> bool:
        return self.hash_match and self.digest_match


@dataclass
class VerificationReport:
    layers: list[LayerVerdict] = field(default_factory=list)

    @property
    def overall_verdict(self) -> bool:
        return bool(self.layers) and all(v.ok for v in self.layers)

    @property
    def failing_layers(self) -> list[str]:
        return [v.layer_name for v in self.layers if not v.ok]


def eligible_layer_names(container: ModelContainer, params: ScalingParams,
                         chunk_length: int) -> list[str]:
    """Hidden-role layers with enough full-chunk detail space for a payload."""
    names = []
    for t in container.layers:
        if t.role_tag != ROLE_HIDDEN:
            continue
        space = _detail_space(t.size, chunk_length)
        if space >= params.fragment_count and params.watermark_level * space >= PAYLOAD_BITS:
            names.append(t.name)
    return names


def embed_model(container: ModelContainer, seed: bytes, user_secret: bytes = b"",
                params: ScalingParams = ScalingParams(), chunk_length: int = 8192,
                max_workers: int = 1) -> ModelContainer:
    """Mark every eligible hidden layer of a container.

    Returns a new container; the input is never mutated. Each layer gets
    a unique layer-stamped payload carrying the shared model digest,
    plus an embed record in the metadata. Any per-layer failure aborts
    the whole embedding with no partial result.
    """
    validate_chunk_length(chunk_length)
    key = derive_nu(seed)
    out = container.copy()
    # A fresh mark supersedes any previous one.
    out.metadata = {k: v for k, v in out.metadata.items()
                    if not k.startswith(RECORD_KEY_PREFIX)}

    targets = eligible_layer_names(out, params, chunk_length)
    if not targets:
        raise NoEligibleLayers(
            f"no hidden-role layer has >= {params.fragment_count} schedulable detail "
            f"coefficients at chunk length {chunk_length}"
        )
    digest = model_digest(out, embedded_layers=targets)

    def mark_one(name: str) -> tuple[int, LayerTensor, EmbedRecord]:
        idx = out.layer_index(name)
        layer = out.layers[idx]
        payload = prepare_secret(out, idx, user_secret, digest=digest)
        schedule = schedule_for_layer(key, idx, _detail_space(layer.size, chunk_length),
                                      params.fragment_count, chunk_length)
        marked, record = embed_layer(layer, payload.to_bits(), schedule, params)
        return idx, marked, record

    results = _run_per_layer(mark_one, targets, max_workers)

    for idx, marked, record in results:
        out.layers[idx] = marked
        out.metadata[RECORD_KEY_PREFIX + record.layer_name] = record.to_json()
    return out


def verify_model(container: ModelContainer, seed: bytes,
                 expected_secret: bytes | None = None,
                 max_workers: int = 1) -> VerificationReport:
    """Check every recorded layer of a marked container.

    A layer passes when its extracted payload self-verifies (hash_match)
    and the digest it carries equals the digest of the container as it
    stands now (digest_match). BER against the expected payload is
    reported when the expected secret is supplied. Fails closed: a
    missing layer or impossible extraction is a tamper verdict for that
    layer, not an error.
    """
    records = records_from_container(container)
    if not records:
        raise MissingEmbedRecords("container carries no embed records")
    key = derive_nu(seed)
    fresh_digest = model_digest(container, embedded_layers=[r.layer_name for r in records])

    def check_one(record: EmbedRecord) -> LayerVerdict:
        try:
            idx = container.layer_index(record.layer_name)
        except KeyError:
            return LayerVerdict(record.layer_name, hash_match=False, digest_match=False)
        layer = container.layers[idx]
        if layer.size != record.chunk_plan.original_length:
            return LayerVerdict(record.layer_name, hash_match=False, digest_match=False)
        try:
            schedule = schedule_for_layer(
                key, idx, _detail_space(layer.size, record.chunk_plan.chunk_length),
                record.schedule_length, record.chunk_plan.chunk_length)
            bits = extract_layer(layer, schedule, record.scaling, record.payload_bits)
        except (InsufficientCapacity, CoefficientOutOfRange):
            return LayerVerdict(record.layer_name, hash_match=False, digest_match=False)
        parsed = parse_and_check(bits)
        verdict = LayerVerdict(
            record.layer_name,
            hash_match=parsed.hash_match,
            digest_match=parsed.model_digest_value == fresh_digest,
        )
        if expected_secret is not None and len(record.embed_digest) == 64:
            stamp = make_stamp(idx, container.metadata).encode("utf-8")
            expected = SecretPayload(
                secret_bytes=stamp + b"\x00" + expected_secret,
                model_digest_value=bytes.fromhex(record.embed_digest),
            ).to_bits()
            verdict.ber = bit_error_rate(bits, expected)
        return verdict

    verdicts = _run_per_layer(check_one, records, max_workers)
    return VerificationReport(layers=list(verdicts))


def _run_per_layer(fn, items: Iterable, max_workers: int) -> list:
    """Apply fn per layer, optionally across threads (layers are independent)."""
    items = list(items)
    if max_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))
