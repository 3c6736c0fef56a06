"""
Error types
Exceptions raised by the numeric engine, the evolution loop and the CLI.
"""


class CDEGANError(Exception):
    """Base class for every error raised by this package"""


class ShapeError(CDEGANError, ValueError):
    """Operand shapes do not conform to an operation's rules"""


class DomainError(CDEGANError, ValueError):
    """Input outside an operation's mathematical domain (e.g. log of a non-positive value)"""


class ContractError(CDEGANError, RuntimeError):
    """A call precondition was violated (missing grads, non-scalar root, ...)"""


class NumericalError(CDEGANError, ArithmeticError):
    """A computation produced NaN or Inf"""


class SpecError(CDEGANError, ValueError):
    """Invalid network specification"""


class ConfigError(CDEGANError, ValueError):
    """Invalid or unparseable experiment configuration"""


class CheckpointError(CDEGANError, ValueError):
    """Corrupt or incompatible checkpoint document"""


class TrainingHalted(CDEGANError):
    """
    Training stopped on a non-finite loss or fitness value.

    Args:
        iteration (int): Generator iteration that failed
        checkpoint_path (str): Directory holding the last good population
    """

    def __init__(self, iteration: int, checkpoint_path: str, reason: str = ""):
        self.iteration = iteration
        self.checkpoint_path = checkpoint_path
        self.reason = reason
        super().__init__(
            f"Training halted at iteration {iteration}: {reason or 'non-finite value'} "
            f"(last good checkpoint: {checkpoint_path})"
        )
