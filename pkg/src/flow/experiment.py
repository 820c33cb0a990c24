"""Flow experiments on product polytopes.

The extremal potential of a product is not known in advance, so the
separability statement is checked on the flow limit: start from a
nonseparable potential in the class, flow until the Calabi energy vanishes,
and measure how far the limit is from its separable projection.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..constants import ErrorMessages, FlowConstants
from ..curvature.abreu import calabi_energy
from ..exceptions import GridError, StepFloorError
from ..geometry.polytope import DelzantPolytope
from ..potential.potential import (
    SmoothPart,
    SymplecticPotential,
    guillemin_potential,
    hessian_field,
    positivity_report,
)
from ..separable.projection import (
    SeparablePart,
    l2_distance,
    project_separable,
    separability_defect,
    separable_parts,
)
from .calabi_flow import CalabiFlow, FlowParams, FlowReport, FlowStatus, run

logger = logging.getLogger(__name__)


class TheoremResult(BaseModel):
    """Outcome of flowing a perturbed product potential to its extremal limit."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    verdict: bool
    report: FlowReport
    final_parts: SeparablePart
    initial_defect: float
    final_defect: float
    final_positive: bool
    factor_energies: Tuple[float, float]

    def summary(self) -> dict:
        return {
            **self.report.summary(),
            "verdict": self.verdict,
            "initial_defect": self.initial_defect,
            "final_defect": self.final_defect,
            "final_positive": self.final_positive,
            "factor_energies": list(self.factor_energies),
            "final_parts": {
                "first": self.final_parts.first.tolist(),
                "second": self.final_parts.second.tolist(),
            },
        }


class ContractionReport(BaseModel):
    """Mutual L2 distance of two flows stepped with the same dt sequence."""

    status: FlowStatus
    steps: int
    times: List[float]
    distances: List[float]
    slack: float
    fraction_non_increasing: float
    final_le_initial: bool


def factor_extremality(parts: SeparablePart) -> Tuple[float, float]:
    """Calabi energies of the factor potentials u_G,i + g_i on the factor grids.

    A separable extremal potential on P_1 x P_2 has extremal factors, so both
    energies vanish at the flow limit.
    """
    energies = []
    for grid, values in ((parts.first_grid, parts.first), (parts.second_grid, parts.second)):
        u = guillemin_potential(grid.polytope, grid).with_correction(values)
        energies.append(calabi_energy(u))
    return energies[0], energies[1]


def _product_start(
    first: DelzantPolytope,
    second: DelzantPolytope,
    perturbation: SmoothPart,
) -> SymplecticPotential:
    grid = perturbation.grid
    polytope = grid.polytope
    if not polytope.is_product:
        raise GridError(ErrorMessages.NOT_A_PRODUCT)
    if not (polytope.factor(1).same_as(first) and polytope.factor(2).same_as(second)):
        raise GridError(f"{ErrorMessages.GRID_MISMATCH}: perturbation lives on another product")
    start = guillemin_potential(polytope, grid).with_correction(perturbation.values)
    # the flow conserves the mean of f, so fixing it here fixes it for the whole run
    return start.mean_free()


def theorem_experiment(
    first: DelzantPolytope,
    second: DelzantPolytope,
    perturbation: SmoothPart,
    params: Optional[FlowParams] = None,
) -> TheoremResult:
    """Flow u_G + perturbation on P_1 x P_2 and test that the limit is separable.

    The verdict holds when the flow converged, the final defect is below
    max(tol_defect, 0.01 * initial defect), and the final Hessian is positive.
    Raises RejectedInputError before any step if the start fails positivity.
    """
    u0 = _product_start(first, second, perturbation)
    reference = project_separable(u0).v
    report = run(u0, reference=reference, params=params)

    final = report.final
    initial_defect = separability_defect(u0.smooth)
    final_defect = separability_defect(final.smooth)
    positivity = positivity_report(hessian_field(final))
    final_positive = positivity.is_positive and positivity.min_eigenvalue > report.params.positivity_margin

    threshold = max(report.params.tol_defect, FlowConstants.DEFECT_REDUCTION * initial_defect)
    verdict = report.status == FlowStatus.CONVERGED and final_defect <= threshold and final_positive

    parts = separable_parts(final.smooth)
    energies = factor_extremality(parts)
    logger.info(
        "Theorem experiment: verdict=%s status=%s defect %.3e -> %.3e, factor energies %.3e, %.3e",
        verdict, report.status.value, initial_defect, final_defect, energies[0], energies[1],
    )
    return TheoremResult(
        verdict=verdict,
        report=report,
        final_parts=parts,
        initial_defect=initial_defect,
        final_defect=final_defect,
        final_positive=final_positive,
        factor_energies=energies,
    )


def contraction_experiment(
    u0: SymplecticPotential,
    params: Optional[FlowParams] = None,
) -> ContractionReport:
    """Flow u0 and project_separable(u0) side by side.

    The first flow chooses its steps adaptively; the second takes exactly the
    same step lengths, so both are compared at the same times.
    """
    u0 = u0.mean_free()
    flow = CalabiFlow.for_potential(u0, params)
    params = flow.params
    a = flow.initial_state(u0)
    b = flow.initial_state(project_separable(u0).v)

    times = [0.0]
    distances = [l2_distance(a.u, b.u)]
    status = FlowStatus.CONVERGED
    while a.energy >= params.tol_energy:
        if a.t >= params.t_max:
            status = FlowStatus.T_MAX_REACHED
            break
        if a.steps >= params.max_steps:
            status = FlowStatus.MAX_STEPS_REACHED
            break
        try:
            a = flow.step(a)
            b = flow.step(b, forced_dt=a.last_dt)
        except StepFloorError as e:
            status = FlowStatus.POSITIVITY_LOST if e.positivity else FlowStatus.STEP_FLOOR
            logger.warning("Contraction run ended at t=%.6g: %s", a.t, e)
            break
        times.append(a.t)
        distances.append(l2_distance(a.u, b.u))

    slack = 1e-8 * (1.0 + distances[0])
    increments = np.diff(np.asarray(distances))
    fraction = float(np.mean(increments <= slack)) if increments.size else 1.0
    logger.info(
        "Contraction run: %d steps, distance %.3e -> %.3e, non-increasing share %.4f",
        len(times) - 1, distances[0], distances[-1], fraction,
    )
    return ContractionReport(
        status=status,
        steps=len(times) - 1,
        times=times,
        distances=distances,
        slack=slack,
        fraction_non_increasing=fraction,
        final_le_initial=distances[-1] <= distances[0],
    )
