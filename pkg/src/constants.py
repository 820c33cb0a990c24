"""
Constants for the numerical engine: tolerances, flow defaults and messages.
"""


class GridConstants:
    """Constants for grid construction and quadrature."""

    MIN_CELLS_PER_AXIS = 2

    # A cell center counts as interior when every facet value exceeds
    # this fraction of the largest spacing.
    INTERIOR_TOLERANCE = 1e-9

    # Chebyshev radii tried for least-squares stencil fallbacks
    FALLBACK_RADII = (2, 3)


class ToleranceConstants:
    """Relative tolerances for double-precision checks at desk-scale grids."""

    SEPARABILITY = 1e-10
    MEMBERSHIP = 1e-10
    SINGULAR_HESSIAN = 1e-14
    PROJECTION_RCOND = 1e-13
    TENSOR_MATCH = 1e-12
    ENERGY_ACCEPT_SLACK = 1e-12


class FlowConstants:
    """Defaults for the modified Calabi flow."""

    DT_FACTOR = 0.2          # dt_init = DT_FACTOR * h**4
    DT_GROWTH = 1.2
    DT_MIN_RATIO = 1e-6      # dt_min = DT_MIN_RATIO * dt_init
    TOL_ENERGY = 1e-8
    TOL_DEFECT = 1e-6
    T_MAX = 10.0
    MAX_STEPS = 1_000_000
    POSITIVITY_MARGIN = 0.0

    # theorem verdict: final defect must fall below this share of the initial one
    DEFECT_REDUCTION = 0.01

    LOG_EVERY = 500


class OutputConstants:
    """Formatting of written artifacts."""

    SIGNIFICANT_DIGITS = 17
    FLOAT_FORMAT = "{:.17g}"
    SERIES_SUFFIX = "_series.csv"
    CORRECTION_SUFFIX = "_correction.csv"


class ExitCodes:
    """Process exit codes of the command-line tool."""

    SUCCESS = 0
    NUMERICAL_FAILURE = 1
    INPUT_ERROR = 2


class ErrorMessages:
    """Standard error messages for the application."""

    NONPRIMITIVE_NORMAL = "Facet normal must be a nonzero primitive integer vector"
    DIMENSION_MISMATCH = "Facet normal length does not match polytope dimension"
    EMPTY_POLYTOPE = "Feasible set of the facet inequalities is empty"
    UNBOUNDED_POLYTOPE = "Feasible set of the facet inequalities is unbounded"
    NOT_A_PRODUCT = "Polytope has no product structure"
    NO_NODES = "No grid node survives inside the polytope"
    FIELD_LENGTH = "Field length does not match the number of grid nodes"
    GRID_MISMATCH = "Grids do not match"
    NON_TENSOR_GRID = "Grid is not the tensor product of its factor grids"
    OUTSIDE_POLYTOPE = "Point is not in the open polytope"
    STENCIL_DOES_NOT_FIT = "No difference stencil fits at node"
    SINGULAR_HESSIAN = "Hessian is singular at node"
    SINGULAR_NORMAL_EQUATIONS = "Normal equations of the affine projection are singular"
    DIFFERENT_GUILLEMIN = "Potentials have different Guillemin parts"
    START_NOT_POSITIVE = "Initial potential fails the positivity check"
    CONFIG_NOT_FOUND = "config not found"
    FILE_NOT_FOUND = "file not found"
