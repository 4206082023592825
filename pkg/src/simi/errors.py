"""Exception types raised across the package."""


class SimiError(Exception):
    """Base class for all errors raised by this package."""


# --- image I/O ---

class UnsupportedFormat(SimiError):
    """File is not a readable PNG or binary PPM (P6)."""


class CorruptData(SimiError):
    """File header and payload disagree (truncated or malformed data)."""


class ShapeMismatch(SimiError):
    """Tensor shapes are incompatible for the requested operation."""


class DimensionMismatch(SimiError):
    """Two images that must share dimensions do not."""


# --- decomposition ---

class ChannelCountMismatch(SimiError):
    """Image does not have exactly 3 channels."""


class NonBinaryValue(SimiError):
    """Bit-plane stack contains values other than 0.0 and 1.0."""


class InvalidLevelCount(SimiError):
    """Quantization level count below 2."""


# --- tensor core / optimizer ---

class NonPositiveStride(SimiError):
    """Convolution stride must be >= 1."""


class NonScalarLoss(SimiError):
    """backward() requires a scalar-valued node."""


class MissingGradient(SimiError):
    """Optimizer step requested for a parameter with no gradient."""


class DivisionRangeViolation(SimiError):
    """Elementwise division hit a denominator below the configured floor."""


# --- enhancer / losses ---

class EmptyTrace(SimiError):
    """Loss over an enhancement trace with no stages."""


# --- training / checkpoints ---

class EmptyDataset(SimiError):
    """Training data directory contains no loadable images."""


class DivergedLoss(SimiError):
    """Total loss became NaN or Inf; training aborted."""


class ConfigDigestMismatch(SimiError):
    """Checkpoint was written under a different training configuration."""


class CorruptCheckpoint(SimiError):
    """Checkpoint file is truncated or malformed."""


# --- metrics ---

class ImageTooSmall(SimiError):
    """Image smaller than the SSIM window."""
