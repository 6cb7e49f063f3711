"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the CLI can emit
structured error JSON without string matching.
"""


class NetipwError(Exception):
    code = "ERROR"


class GraphInputError(NetipwError):
    """Malformed edge input (self-loop rows, empty edge list, bad ids)."""

    code = "GRAPH_INPUT"


class ValidationError(NetipwError):
    """Study data failed validation against the network."""

    code = "VALIDATION"


class EmptyInputError(ValidationError):
    code = "EMPTY_INPUT"


class IsolateError(ValidationError):
    """Degree-zero nodes present; spillover is undefined for isolates."""

    code = "ISOLATED_NODES"

    def __init__(self, node_ids):
        self.node_ids = list(node_ids)
        super().__init__(
            "network contains %d isolated node(s): %s"
            % (len(self.node_ids), ", ".join(map(str, self.node_ids[:10])))
        )


class SeparationError(NetipwError):
    """Propensity model separation: fitted probabilities hit 0 or 1."""

    code = "SEPARATION"


class ConvergenceError(NetipwError):
    """Optimizer did not reach the gradient tolerance within max iterations."""

    code = "NO_CONVERGENCE"

    def __init__(self, message, last_params=None, grad_norm=None):
        self.last_params = last_params
        self.grad_norm = grad_norm
        super().__init__(message)


class WeightFloorError(NetipwError):
    """An evaluated propensity fell below the positivity floor."""

    code = "WEIGHT_FLOOR"

    def __init__(self, node_id, value, floor):
        self.node_id = node_id
        self.value = value
        self.floor = floor
        super().__init__(
            f"propensity {value:.3e} for node {node_id!r} is below the floor {floor:.1e}"
        )


class SingularMatrixError(NetipwError):
    """Bread matrix of the sandwich is numerically singular."""

    code = "SINGULAR_MATRIX"

    def __init__(self, condition_number):
        self.condition_number = condition_number
        super().__init__(
            f"bread matrix condition number {condition_number:.3e} exceeds 1e10"
        )


class NetworkGenerationError(NetipwError):
    code = "NETWORK_GENERATION"


class StudyError(NetipwError):
    """Too many replicate failures in a simulation study."""

    code = "STUDY_FAILURES"
