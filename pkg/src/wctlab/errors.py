"""Exception hierarchy shared by the library and the command line."""


class WctLabError(Exception):
    """Base class for all errors raised by wctlab."""

    exit_code = 1


class ConfigurationError(WctLabError, ValueError):
    """Invalid simulation, dataset or training configuration."""

    exit_code = 2


class FormatError(WctLabError):
    """A dataset, checkpoint or sample file could not be parsed."""

    exit_code = 3


class TrainingDivergedError(WctLabError, FloatingPointError):
    """Loss became NaN or infinite during training."""

    exit_code = 4

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss
