"""Exception types shared across the channel charting toolkit."""


class ChannelChartError(Exception):
    """Base class for all toolkit errors."""


class ContainerFormatError(ChannelChartError):
    """A CCDS container failed structural validation.

    Carries the byte offset at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ContainerHeaderError(ContainerFormatError):
    """Magic bytes missing or header fields out of range."""


class ContainerVersionError(ContainerFormatError):
    """Container declares an unsupported format version."""


class ContainerTruncatedError(ContainerFormatError):
    """Payload is shorter (or longer) than the header promises."""


class ContainerValueError(ContainerFormatError):
    """Payload contains non-finite values."""


class DatasetError(ChannelChartError):
    """Dataset invariant violation (empty dataset, bad geometry, bad window)."""


class FeatureError(ChannelChartError):
    """Feature engineering received invalid input."""


class TripletSelectionError(ChannelChartError):
    """Triplet generation cannot satisfy its selection rule.

    ``index`` names the offending datapoint where one exists.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NetworkError(ChannelChartError):
    """Charting network misuse: dimension mismatch or malformed weights file."""


class TrainingDivergedError(NetworkError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class MetricsError(ChannelChartError):
    """Invalid metric parameters (neighborhood size, subsample size)."""


class ConfigError(ChannelChartError):
    """A run configuration failed validation before any stage executed."""


class StageError(ChannelChartError):
    """A pipeline stage failed; wraps the underlying error with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
