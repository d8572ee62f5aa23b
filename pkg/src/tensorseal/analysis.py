"""Desk-scale analytics: distortion sweep, capacity, and strength math.

These reproduce the scheme's analytical artifacts without any model
training: how much embedding distorts weights at each watermark level
and chunk size, how many bits a geometry can hold, and the size of the
search space an attacker without the key would face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .container import LayerTensor, validate_chunk_length
from .errors import EmptyTensor, WrongLength
from .keying import derive_nu, schedule_for_layer
from .marker import ScalingParams, _detail_space, embed_layer
from .payload import PAYLOAD_BITS

# A weight can move by at most about 3.5e-4 at level 2, so relative
# distortion is only meaningful above 3.5e-4 / 0.25% = 0.14 magnitude.
REL_MAGNITUDE_FLOOR = 0.14

_SWEEP_SEED = bytes(range(32))


@dataclass(frozen=True)
class DistortionPoint:
    """Weight-domain damage measured for one (level, chunk_length) cell."""

    watermark_level: int
    chunk_length: int
    max_abs_distortion: float
    max_rel_distortion: float
    mean_abs_distortion: float


@dataclass(frozen=True)
class StrengthReport:
    confidentiality_bits: int
    search_space_T: int
    log10_T: float


def round_up_chunk_length(n: int) -> int:
    """Sweep convenience: next multiple of 32 at or above n."""
    return -(-int(n) // 32) * 32


def sweep_distortion(weights: np.ndarray, levels=(1, 2, 3, 4),
                     chunk_lengths=(8192,), rng_seed: int = 0) -> list[DistortionPoint]:
    """Embed a random payload at each (level, chunk_length) and measure damage.

    Chunk lengths that are not multiples of 32 are rounded up and
    reported as rounded. Deterministic for a fixed rng_seed. Relative
    distortion is taken over weights with magnitude >= 0.14; 0.0 when no
    weight clears the floor.
    """
    flat = np.asarray(weights, dtype=np.float64).reshape(-1)
    if flat.size == 0:
        raise EmptyTensor("sweep needs a nonempty weight array")
    rng = np.random.default_rng(rng_seed)
    payload = rng.integers(0, 2, size=PAYLOAD_BITS).astype(np.uint8)
    key = derive_nu(_SWEEP_SEED)

    points = []
    for raw_len in chunk_lengths:
        chunk_length = round_up_chunk_length(raw_len)
        validate_chunk_length(chunk_length)
        layer = LayerTensor(name="sweep", shape=(flat.size,), dtype="float64", data=flat)
        for level in sorted(levels):
            params = ScalingParams(watermark_level=level)
            schedule = schedule_for_layer(
                key, 0, _detail_space(flat.size, chunk_length),
                params.fragment_count, chunk_length)
            marked, _ = embed_layer(layer, payload, schedule, params)
            delta = np.abs(marked.data - flat)
            big = np.abs(flat) >= REL_MAGNITUDE_FLOOR
            rel = float((delta[big] / np.abs(flat[big])).max()) if big.any() else 0.0
            points.append(DistortionPoint(
                watermark_level=level,
                chunk_length=chunk_length,
                max_abs_distortion=float(delta.max()),
                max_rel_distortion=rel,
                mean_abs_distortion=float(delta.mean()),
            ))
    return points


def distortion_table(points: list[DistortionPoint]) -> str:
    """Comma-separated report with header row, one line per sweep point."""
    lines = ["watermark_level,chunk_length,max_abs_distortion,"
             "max_rel_distortion,mean_abs_distortion"]
    for p in points:
        lines.append(f"{p.watermark_level},{p.chunk_length},{p.max_abs_distortion:.9e},"
                     f"{p.max_rel_distortion:.9e},{p.mean_abs_distortion:.9e}")
    return "\n".join(lines) + "\n"


def capacity(chunk_count: int, chunk_length: int, level: int) -> int:
    """Total hideable bits: level bits per detail coefficient."""
    if chunk_count < 1 or chunk_length < 2 or chunk_length % 2:
        raise WrongLength(f"bad geometry: {chunk_count} chunks of {chunk_length}")
    if level not in (1, 2, 3, 4):
        raise WrongLength(f"watermark level must be 1-4, got {level}")
    return level * chunk_count * (chunk_length // 2)


def _log10_int(n: int) -> float:
    try:
        return math.log10(n)
    except OverflowError:
        return float(Decimal(n).log10())


def search_space(R: int, C: int, t: int) -> StrengthReport:
    """Size of the brute-force search over embedding arrangements.

    Evaluates T = (R * R!) * ((C - t + 1) * C!) with exact integers; the
    two factors are the row-permutation and column-selection sums, each
    summand constant. Confidentiality itself rests on the 256-bit seed.
    """
    if R < 1 or C < 1 or t < 1 or t > C:
        raise WrongLength(f"need R, C, t >= 1 and t <= C, got R={R} C={C} t={t}")
    T = (R * math.factorial(R)) * ((C - t + 1) * math.factorial(C))
    return StrengthReport(confidentiality_bits=256, search_space_T=T,
                          log10_T=_log10_int(T))


def probe_agreement(layer_a: LayerTensor, layer_b: LayerTensor,
                    n_inputs: int = 1000, rng_seed: int = 0) -> float:
    """Top-1 agreement of two weight matrices under a random linear probe.

    Both layers are viewed as (rows x cols) linear maps; for n random
    standard-normal inputs, returns the fraction where both pick the
    same argmax row. 1.0 means embedding left the layer's decisions
    untouched on every probe input.
    """
    from .container import reshape_to_2d
    a = reshape_to_2d(layer_a)
    b = reshape_to_2d(layer_b)
    if a.shape != b.shape:
        raise WrongLength(f"probe needs equal shapes, got {a.shape} and {b.shape}")
    rng = np.random.default_rng(rng_seed)
    x = rng.standard_normal((a.shape[1], n_inputs))
    return float(np.mean(np.argmax(a @ x, axis=0) == np.argmax(b @ x, axis=0)))
