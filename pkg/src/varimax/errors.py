"""Exception types raised by the solvers."""


class VarimaxError(Exception):
    """Base class for all solver errors."""


class IntegrationDiverged(VarimaxError):
    """An ODE right-hand side returned a non-finite value."""

    def __init__(self, node_index: int, message: str = ""):
        self.node_index = node_index
        super().__init__(message or f"integration diverged at node {node_index}")


class NonFiniteEvaluation(VarimaxError):
    """A function sampled for finite differences returned inf or nan."""


class SingularJacobian(VarimaxError):
    """The Newton Jacobian is numerically singular."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"singular Jacobian (condition estimate {condition:.3e})")


class DegenerateIntegrand(VarimaxError):
    """The Euler-Lagrange equation cannot be solved for the second derivative."""


class ControlSolveFailed(VarimaxError):
    """Pointwise stationarity of the Hamiltonian in u could not be reached."""


class ProblemNotFound(VarimaxError, KeyError):
    """Lookup of an unregistered problem name."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "problem not found"


class InvalidProblem(VarimaxError, ValueError):
    """A problem definition violates a structural requirement."""
