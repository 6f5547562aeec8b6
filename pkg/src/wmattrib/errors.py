"""Exception types shared across the package."""


class LengthMismatchError(ValueError):
    """Two watermarks (or a watermark and a codebook) have different lengths."""


class CodebookFormatError(ValueError):
    """A codebook stream is malformed: bad header, bad record, or bad padding."""


class DuplicateUserError(ValueError):
    """The user id is already present in the codebook."""


class DuplicateWatermarkError(ValueError):
    """The watermark is already assigned to another user."""


class WorkBudgetExceededError(RuntimeError):
    """A solver or enumeration exceeded its configured work budget."""


class ConfigError(ValueError):
    """An experiment or CLI configuration is invalid."""
