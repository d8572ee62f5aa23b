"""Exception hierarchy for the tensorseal toolkit.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps these onto stable exit codes.
"""


class TensorSealError(Exception):
    """Base class for all tensorseal errors."""


# --- container -------------------------------------------------------------

class EmptyTensor(TensorSealError):
    """A tensor has a zero-length dimension."""


class ShapeMismatch(TensorSealError):
    """Element count does not match the requested shape."""


class InvalidChunkLength(TensorSealError):
    """Chunk length is not a multiple of 32 or exceeds the 12000 bound."""


class FormatError(TensorSealError):
    """Container file is malformed. Carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedVersion(TensorSealError):
    """Container file declares a format version this build cannot read."""


# --- wavelet ---------------------------------------------------------------

class LengthNotDivisible(TensorSealError):
    """Input length is not divisible by 2**levels."""


class MalformedGrid(TensorSealError):
    """Sub-band grid does not have the expected band count or band lengths."""


# --- payload ---------------------------------------------------------------

class SecretTooLarge(TensorSealError):
    """Secret does not fit in the fixed payload capacity."""


class WrongLength(TensorSealError):
    """Bitstring passed to the payload parser is not exactly payload-sized."""


# --- keying ----------------------------------------------------------------

class BadSeedLength(TensorSealError):
    """Seed is not exactly 32 bytes."""


class InsufficientCapacity(TensorSealError):
    """Layer does not have enough detail coefficients for the payload."""


# --- marker ----------------------------------------------------------------

class CoefficientOutOfRange(TensorSealError):
    """A coefficient falls outside the embeddable range for the configured
    offset; raise the offset (delta) or exclude the layer."""


class NoEligibleLayers(TensorSealError):
    """No layer in the container can carry a payload."""


class MissingEmbedRecords(TensorSealError):
    """Container carries no embedding records; it cannot be verified."""


# --- attacksim -------------------------------------------------------------

class UnknownLayer(TensorSealError):
    """A named target layer does not exist in the container."""


class EmptyClassMap(TensorSealError):
    """class_flip needs at least two labels in the class map."""
