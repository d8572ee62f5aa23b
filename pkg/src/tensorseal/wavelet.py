"""Five-level wavelet packet transform used to host hidden payload bits.

The transform is a full packet tree over the Daubechies-2 orthonormal
filter pair with periodized boundaries, so each 1-D chunk of length N
maps to 32 critically sampled sub-bands of N/32 coefficients each with
perfect reconstruction and preserved energy. Sub-bands are presented in
frequency order: band 1 is the smoothest (approximation) end, band 32
the most oscillatory. Bands 1-16 are never touched by embedding; bands
17-32 form the detail half where coefficients may be modified.

Filters are hard-coded from the closed-form D4 coefficients rather than
pulled from a wavelet library: the transform is the load-bearing
primitive here, and the periodized packet variant with an explicit
frequency ordering is narrower than what general libraries guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthNotDivisible, MalformedGrid

LEVELS = 5
BAND_COUNT = 1 << LEVELS  # 32
DETAIL_START = BAND_COUNT // 2  # first frequency-ordered detail band, 0-based

_SQRT3 = np.sqrt(3.0)
# D4 analysis lowpass, exact closed form; highpass is the alternating flip.
DEC_LO = np.array([
    (1.0 + _SQRT3), (3.0 + _SQRT3), (3.0 - _SQRT3), (1.0 - _SQRT3),
]) / (4.0 * np.sqrt(2.0))
DEC_HI = np.array([DEC_LO[3], -DEC_LO[2], DEC_LO[1], -DEC_LO[0]])

# Natural (tree) order -> frequency order is the binary-reflected Gray code:
# frequency slot k holds natural leaf gray(k).
_GRAY = np.array([k ^ (k >> 1) for k in range(BAND_COUNT)])
_GRAY_INV = np.argsort(_GRAY)


def _analyze_step(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One periodized analysis step along the last axis (length halves)."""
    lo = np.zeros(x.shape[:-1] + (x.shape[-1] // 2,))
    hi = np.zeros_like(lo)
    for m in range(4):
        shifted = np.roll(x, -m, axis=-1)[..., ::2]
        lo += DEC_LO[m] * shifted
        hi += DEC_HI[m] * shifted
    return lo, hi


def _synthesize_step(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Exact inverse of _analyze_step (orthonormal, so same taps transposed)."""
    out = np.zeros(lo.shape[:-1] + (lo.shape[-1] * 2,))
    for band, taps in ((lo, DEC_LO), (hi, DEC_HI)):
        up = np.zeros_like(out)
        up[..., ::2] = band
        for m in range(4):
            out += taps[m] * np.roll(up, m, axis=-1)
    return out


@dataclass
class SubbandGrid:
    """Frequency-ordered packet coefficients for a batch of chunks.

    coeffs has shape (chunk_count, 32, chunk_length // 32); row b of axis 1
    is frequency band b+1.
    """

    coeffs: np.ndarray
    chunk_length: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 3 or c.shape[1] != BAND_COUNT:
            raise MalformedGrid(f"expected (chunks, {BAND_COUNT}, width), got {c.shape}")
        if c.shape[2] * BAND_COUNT != self.chunk_length:
            raise MalformedGrid(
                f"band width {c.shape[2]} inconsistent with chunk length {self.chunk_length}"
            )
        if not np.all(np.isfinite(c)):
            raise MalformedGrid("non-finite coefficients")
        self.coeffs = c

    @property
    def chunk_count(self) -> int:
        return self.coeffs.shape[0]

    @property
    def band_width(self) -> int:
        return self.coeffs.shape[2]

    def detail_view(self) -> np.ndarray:
        """Writable view of bands 17-32: shape (chunks, 16, band_width)."""
        return self.coeffs[:, DETAIL_START:, :]

    def detail_flat(self) -> np.ndarray:
        """Detail coefficients flattened per chunk, C order over (band, pos).

        The flattening copies (the band slice is not contiguous); write
        through detail_view or direct grid indexing instead.
        """
        return self.detail_view().reshape(self.chunk_count, -1).copy()


def wpt_forward(chunks: np.ndarray) -> SubbandGrid:
    """Full 5-level packet decomposition of each row of (chunks, N).

    N must be divisible by 32; rows are transformed independently.
    """
    x = np.asarray(chunks, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise MalformedGrid(f"expected 2-D (chunks, length), got shape {x.shape}")
    n = x.shape[-1]
    if n % BAND_COUNT != 0 or n == 0:
        raise LengthNotDivisible(f"chunk length {n} is not a positive multiple of {BAND_COUNT}")

    # Grow the band axis one level at a time: (chunks, bands, width).
    nodes = x[:, None, :]
    for _ in range(LEVELS):
        lo, hi = _analyze_step(nodes)
        paired = np.stack([lo, hi], axis=2)  # (chunks, bands, 2, width/2)
        nodes = paired.reshape(x.shape[0], nodes.shape[1] * 2, nodes.shape[2] // 2)
    # nodes is natural (tree) order; reindex to frequency order.
    return SubbandGrid(coeffs=nodes[:, _GRAY, :], chunk_length=n)


def wpt_inverse(grid: SubbandGrid) -> np.ndarray:
    """Reconstruct (chunks, chunk_length) rows from a frequency-ordered grid."""
    nodes = grid.coeffs[:, _GRAY_INV, :]  # back to natural order
    for _ in range(LEVELS):
        paired = nodes.reshape(nodes.shape[0], nodes.shape[1] // 2, 2, nodes.shape[2])
        nodes = _synthesize_step(paired[:, :, 0, :], paired[:, :, 1, :])
    return nodes.reshape(nodes.shape[0], -1)


def wipe_details(chunks: np.ndarray) -> np.ndarray:
    """Zero bands 17-32 and reconstruct: the smooth half of each chunk."""
    grid = wpt_forward(chunks)
    grid.detail_view()[:] = 0.0
    return wpt_inverse(grid)
