"""Exception hierarchy shared across the package.

The three intermediate classes define the process exit-code contract used
by the command line tool: input problems exit 1, numerical failures exit 2,
non-convergence exits 3.
"""


class GlarmaError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GlarmaError):
    """Malformed or inconsistent user input (exit code 1)."""


class NumericalError(GlarmaError):
    """Numerical failure during a computation (exit code 2)."""


class ConvergenceError(GlarmaError):
    """An iterative solver exhausted its iteration budget (exit code 3)."""


class OverflowGuard(NumericalError):
    """The log-mean recursion left the safe range |w| <= W_CLAMP.

    Signals numerically explosive parameters; raised instead of letting
    exp() produce infinities that would poison every downstream quantity.
    """

    def __init__(self, t: int, value: float):
        self.t = t
        self.value = value
        super().__init__(
            f"log-mean recursion exploded at time index {t}: w = {value!r}"
        )


class LikelihoodOverflow(NumericalError):
    """A Newton iterate could not be evaluated; carries the iterate."""

    def __init__(self, message: str, iterate=None):
        self.iterate = iterate
        super().__init__(message)


class NotIdentifiable(InputError):
    """More free parameters than observations."""


class SingularDesign(NumericalError):
    """The weighted normal equations of the GLM fit are rank deficient."""


class DegenerateCounts(SingularDesign):
    """All counts are zero; the Poisson MLE does not exist."""


class SingularHessian(NumericalError):
    """The (regularized) Newton system could not be solved."""


class EigenFailure(NumericalError):
    """The symmetric eigensolver did not converge."""


class DegenerateProblem(NumericalError):
    """The penalized problem is degenerate (zero correlation vector)."""


class NoConvergence(ConvergenceError):
    """Coordinate descent exhausted its sweep budget at some penalty."""

    def __init__(self, lam: float, sweeps: int, context: str = ""):
        self.lam = lam
        self.sweeps = sweeps
        self.context = context
        where = f" ({context})" if context else ""
        super().__init__(
            f"coordinate descent did not converge at lambda={lam!r} "
            f"after {sweeps} sweeps{where}"
        )


class EmptyGrid(InputError):
    """A search grid contains no points."""


class EmptyTruth(InputError):
    """ROC scoring requires a nonempty set of true positions."""
