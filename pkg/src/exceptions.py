"""Error hierarchy of the toric toolkit."""

from typing import Optional, Sequence


class ToricError(Exception):
    """Base class for every error raised by the engine."""


class PolytopeError(ToricError):
    """Invalid facets, empty or unbounded polytope, malformed spec."""


class GridError(ToricError):
    """Grid construction failed or fields/grids do not match."""


class UnsupportedGridError(GridError):
    """Operation needs a tensor-product grid."""


class DomainError(ToricError):
    """Point outside the open polytope."""


class NodeError(ToricError):
    """Error attached to a grid node."""

    def __init__(self, message: str, node: Optional[Sequence[float]] = None):
        self.node = None if node is None else [float(c) for c in node]
        if self.node is not None:
            message = f"{message} {self.node}"
        super().__init__(message)


class StencilError(NodeError):
    """No finite-difference stencil fits at a node."""


class SingularHessianError(NodeError):
    """Hessian cannot be inverted at a node."""


class ProjectionError(ToricError):
    """Normal equations of a projection are singular."""


class RejectedInputError(ToricError):
    """Flow start data is malformed or fails the positivity check."""


class StepFloorError(ToricError):
    """Time step fell below dt_min."""

    def __init__(self, dt: float, positivity: bool):
        self.dt = dt
        self.positivity = positivity
        cause = "positivity" if positivity else "energy increase"
        super().__init__(f"Time step {dt:.3e} fell below dt_min after rejection by {cause}")


class SpecFileError(ToricError):
    """Input file missing, unreadable or malformed."""
