"""Exception types shared across the package."""


class HconstabError(Exception):
    """Base class for all package errors."""


class EmptyEdgeError(HconstabError):
    def __init__(self, edge_index: int):
        self.edge_index = edge_index
        super().__init__(f"hyperedge {edge_index} has no vertices")


class IndexOutOfRangeError(HconstabError):
    def __init__(self, index: int, bound: int, what: str = "vertex"):
        self.index = index
        self.bound = bound
        super().__init__(f"{what} index {index} outside [0, {bound})")


class IsolatedVertexError(HconstabError):
    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"vertex {vertex} appears in no hyperedge")


class DimensionMismatchError(HconstabError):
    pass


class NoConvergenceError(HconstabError):
    """Power iteration ran out of sweeps; carries the last estimate."""

    def __init__(self, last_estimate: float, iterations: int):
        self.last_estimate = last_estimate
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} sweeps "
            f"(last estimate {last_estimate!r})"
        )


class NonFiniteEntryError(HconstabError):
    pass


class LabelOutOfRangeError(HconstabError):
    pass


class NonFiniteParameterError(HconstabError):
    """A training run diverged; carries the SGD step at which it happened."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite parameter at SGD step {step}")


class NotAUnitPerturbationError(HconstabError):
    pass


class SameSampleError(HconstabError):
    pass


class DegenerateInstanceError(HconstabError):
    pass


class DatasetParseError(HconstabError):
    pass


class DatasetSchemaError(HconstabError):
    pass


class BoundOverflowWarning(RuntimeWarning):
    """A closed-form bound overflowed float range and was reported as +inf."""
