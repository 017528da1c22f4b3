"""Exception hierarchy. The CLI maps InputError to exit code 1 and
NumericalFailure to exit code 2."""


class InputError(ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad config, ...)."""


class NumericalFailure(RuntimeError):
    """A computation could not be completed at the requested resolution."""


class GloballyBadPointSet(NumericalFailure):
    """No admissible cube radius below the cone radius satisfies the local fill condition."""


class DegenerateConfiguration(NumericalFailure):
    """Gram matrix could not be factorized even at the largest jitter."""
