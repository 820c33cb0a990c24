"""Modified Calabi flow on symplectic potentials.

With S = -sum_jk d_j d_k U^jk the Calabi energy decreases along
du/dt = theta - S, so one explicit step moves the correction by
f' = f - dt (S - theta). Only f changes; the Guillemin part, and with it the
boundary behaviour, stays fixed. Candidates are accepted when the Hessian
stays positive definite and the Calabi energy does not increase; otherwise
dt is halved and the step retried.
"""

import logging
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import config
from ..constants import ErrorMessages, FlowConstants, ToleranceConstants
from ..curvature.abreu import AffineFunction, curvature_from_hessian, residual_energy
from ..exceptions import RejectedInputError, StepFloorError, UnsupportedGridError
from ..geometry.grid import Grid, Moments, integrate, moments
from ..potential.potential import SymplecticPotential, hessian_field, positivity_report
from ..separable.projection import l2_distance, separability_defect

logger = logging.getLogger(__name__)


class FlowStatus(Enum):
    """Terminal statuses of a flow run."""
    CONVERGED = "converged"
    T_MAX_REACHED = "t_max_reached"
    MAX_STEPS_REACHED = "max_steps_reached"
    STEP_FLOOR = "step_floor"
    POSITIVITY_LOST = "positivity_lost"
    SCHEDULE_COMPLETED = "schedule_completed"


FAILED_STATUSES = (FlowStatus.STEP_FLOOR, FlowStatus.POSITIVITY_LOST)


class FlowParams(BaseModel):
    """Step control and stopping rules.

    dt_init and dt_min may be left unset; `resolve` fills them from the grid
    as dt_init = dt_factor * h**4 and dt_min = 1e-6 * dt_init.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt_init: Optional[float] = None
    dt_min: Optional[float] = None
    dt_factor: float = Field(default_factory=lambda: config.flow_dt_factor)
    dt_growth: float = Field(default_factory=lambda: config.flow_dt_growth)
    t_max: float = Field(default_factory=lambda: config.flow_t_max)
    max_steps: int = Field(default_factory=lambda: config.flow_max_steps)
    tol_energy: float = Field(default_factory=lambda: config.flow_tol_energy)
    tol_defect: float = Field(default_factory=lambda: config.flow_tol_defect)
    positivity_margin: float = Field(default_factory=lambda: config.flow_positivity_margin)

    @field_validator("dt_init", "dt_min", "dt_factor", "t_max", "tol_energy", "tol_defect")
    @classmethod
    def _positive(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError(f"must be positive, got {value}")
        return value

    @field_validator("dt_growth")
    @classmethod
    def _growing(cls, value: float) -> float:
        if not value > 1:
            raise ValueError(f"dt_growth must exceed 1, got {value}")
        return value

    @field_validator("max_steps")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"max_steps must be at least 1, got {value}")
        return value

    @field_validator("positivity_margin")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError(f"positivity_margin must be non-negative, got {value}")
        return value

    @model_validator(mode="after")
    def _ordered(self) -> "FlowParams":
        if self.dt_init is not None and self.dt_min is not None and self.dt_min > self.dt_init:
            raise ValueError(f"dt_min {self.dt_min} exceeds dt_init {self.dt_init}")
        return self

    @classmethod
    def from_config(cls, overrides: Optional[Dict[str, object]] = None) -> "FlowParams":
        """Defaults from the environment, explicit overrides on top; unknown keys are refused."""
        return cls(**config.flow_defaults(overrides))

    def resolve(self, grid: Grid) -> "FlowParams":
        """Fill dt_init and dt_min from the grid spacing."""
        dt_init = self.dt_init if self.dt_init is not None else self.dt_factor * grid.min_spacing ** 4
        dt_min = self.dt_min if self.dt_min is not None else FlowConstants.DT_MIN_RATIO * dt_init
        return FlowParams(**{**self.model_dump(), "dt_init": dt_init, "dt_min": min(dt_min, dt_init)})


class FlowState(BaseModel):
    """Accepted point of a flow together with the quantities the next step needs."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float
    u: SymplecticPotential
    dt: float
    theta: AffineFunction
    energy: float
    residual: np.ndarray
    min_eigenvalue: float
    steps: int = 0
    rejections: int = 0
    last_dt: float = 0.0


class FlowRecord(BaseModel):
    """Monitors at one accepted step."""

    t: float
    calabi_energy: float
    l2_distance_to_reference: Optional[float] = None
    separability_defect: Optional[float] = None
    min_hessian_eigenvalue: float
    dt: float


class FlowReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: FlowStatus
    params: FlowParams
    steps: int
    rejections: int
    records: List[FlowRecord]
    dt_schedule: List[float]
    initial_moments: List[float]
    final_moments: List[float]
    moment_drift: float
    final: SymplecticPotential = Field(exclude=True)

    @property
    def failed(self) -> bool:
        return self.status in FAILED_STATUSES

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.calabi_energy for r in self.records])

    @property
    def moment_drift_per_1000_steps(self) -> float:
        return self.moment_drift * 1000.0 / max(self.steps, 1)

    def summary(self) -> Dict[str, object]:
        """Scalar results and the effective parameters, without the time series."""
        first, last = self.records[0], self.records[-1]
        return {
            "status": self.status.value,
            "steps": self.steps,
            "rejections": self.rejections,
            "t_final": last.t,
            "initial_energy": first.calabi_energy,
            "final_energy": last.calabi_energy,
            "initial_defect": first.separability_defect,
            "final_defect": last.separability_defect,
            "final_min_eigenvalue": last.min_hessian_eigenvalue,
            "moment_drift": self.moment_drift,
            "moment_drift_per_1000_steps": self.moment_drift_per_1000_steps,
            "params": self.params.model_dump(),
        }


def _evaluate(
    u: SymplecticPotential,
    exact: np.ndarray,
    grid_moments: Moments,
    margin: float,
):
    """Hessian positivity and, when positive, theta, S - theta and the energy."""
    field = hessian_field(u, exact)
    report = positivity_report(field)
    if not report.is_positive or report.min_eigenvalue <= margin:
        return report, None
    scalar = curvature_from_hessian(field)
    return report, residual_energy(u.grid, scalar, grid_moments)


class CalabiFlow:
    """Flow on one grid: caches the Guillemin Hessian and the grid moments."""

    def __init__(self, grid: Grid, params: FlowParams, guillemin_hessian: np.ndarray):
        self.grid = grid
        self.params = params.resolve(grid)
        self.exact = guillemin_hessian
        self.moments = moments(grid.polytope, grid)

    @classmethod
    def for_potential(cls, u: SymplecticPotential, params: Optional[FlowParams] = None) -> "CalabiFlow":
        params = params if params is not None else FlowParams.from_config()
        return cls(u.grid, params, u.guillemin.hessian(u.grid.nodes))

    def initial_state(self, u: SymplecticPotential) -> FlowState:
        """State at t = 0; refuses potentials that fail the positivity check."""
        report, evaluation = _evaluate(u, self.exact, self.moments, self.params.positivity_margin)
        if evaluation is None:
            raise RejectedInputError(
                f"{ErrorMessages.START_NOT_POSITIVE}: min eigenvalue {report.min_eigenvalue:.3e} "
                f"at {report.worst_node}"
            )
        theta, residual, energy = evaluation
        return FlowState(
            t=0.0, u=u, dt=self.params.dt_init, theta=theta, energy=energy,
            residual=residual, min_eigenvalue=report.min_eigenvalue,
        )

    def step(self, state: FlowState, forced_dt: Optional[float] = None) -> FlowState:
        """One accepted step, halving dt on every rejected candidate.

        With `forced_dt` the step length is fixed and the energy rule is
        skipped; a positivity failure then ends the flow.
        """
        params = self.params
        dt = state.dt if forced_dt is None else forced_dt
        rejections = 0
        blocked_by_positivity = False

        while True:
            if forced_dt is None and dt < params.dt_min:
                raise StepFloorError(dt, blocked_by_positivity)

            candidate = state.u.with_correction(state.u.correction - dt * state.residual)
            report, evaluation = _evaluate(candidate, self.exact, self.moments, params.positivity_margin)

            if evaluation is None:
                if forced_dt is not None:
                    raise StepFloorError(dt, True)
                logger.warning(
                    "Step rejected at t=%.6g: min eigenvalue %.3e at %s, halving dt %.3e",
                    state.t, report.min_eigenvalue, report.worst_node, dt,
                )
                blocked_by_positivity = True
            else:
                theta, residual, energy = evaluation
                accepted = energy <= state.energy * (1.0 + ToleranceConstants.ENERGY_ACCEPT_SLACK)
                if forced_dt is not None or accepted:
                    next_dt = state.dt if forced_dt is not None else min(dt * params.dt_growth, params.dt_init)
                    return FlowState(
                        t=state.t + dt,
                        u=candidate,
                        dt=next_dt,
                        theta=theta,
                        energy=energy,
                        residual=residual,
                        min_eigenvalue=report.min_eigenvalue,
                        steps=state.steps + 1,
                        rejections=state.rejections + rejections,
                        last_dt=dt,
                    )
                logger.debug("Step rejected at t=%.6g: energy %.6e > %.6e, dt %.3e", state.t, energy, state.energy, dt)
                blocked_by_positivity = False

            rejections += 1
            dt *= 0.5


def affine_moments(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Integrals of f, f x_1, ..., f x_d."""
    return np.array([integrate(grid, values)] + [integrate(grid, values * grid.nodes[:, i]) for i in range(grid.dim)])


def _moment_scale(grid: Grid, *fields: np.ndarray) -> float:
    reach = max(1.0, float(np.max(np.abs(grid.nodes))))
    return max(max(integrate(grid, np.abs(f)) for f in fields) * reach, np.finfo(float).tiny)


class _Monitor:
    """Builds the FlowRecord of every accepted state."""

    def __init__(self, u0: SymplecticPotential, reference: Optional[SymplecticPotential]):
        self.reference = reference
        self.track_defect = False
        if u0.polytope.is_product:
            try:
                u0.grid.factor_grids()
                self.track_defect = True
            except UnsupportedGridError as e:
                logger.warning("Separability defect not monitored: %s", e)

    def record(self, state: FlowState, dt: float) -> FlowRecord:
        return FlowRecord(
            t=state.t,
            calabi_energy=state.energy,
            l2_distance_to_reference=None if self.reference is None else l2_distance(state.u, self.reference),
            separability_defect=separability_defect(state.u.smooth) if self.track_defect else None,
            min_hessian_eigenvalue=state.min_eigenvalue,
            dt=dt,
        )


def run(
    u0: SymplecticPotential,
    reference: Optional[SymplecticPotential] = None,
    params: Optional[FlowParams] = None,
    schedule: Optional[Sequence[float]] = None,
) -> FlowReport:
    """Iterate accepted steps until a terminal status.

    Adaptive runs stop when the energy falls below tol_energy, t reaches
    t_max, or max_steps steps were taken. A forced `schedule` runs exactly
    those step lengths and ends with `schedule_completed`.
    """
    flow = CalabiFlow.for_potential(u0, params)
    params = flow.params
    state = flow.initial_state(u0)
    monitor = _Monitor(u0, reference)
    records = [monitor.record(state, state.dt)]
    dt_schedule: List[float] = []
    initial_moments = affine_moments(u0.grid, u0.correction)

    logger.info(
        "Starting flow on %d nodes: energy %.6e, dt_init %.3e, dt_min %.3e",
        u0.grid.size, state.energy, params.dt_init, params.dt_min,
    )

    forced = list(schedule) if schedule is not None else None
    status: Optional[FlowStatus] = None
    while status is None:
        if forced is not None:
            if state.steps >= len(forced):
                status = FlowStatus.SCHEDULE_COMPLETED
                break
        elif state.energy < params.tol_energy:
            status = FlowStatus.CONVERGED
            break
        elif state.t >= params.t_max:
            status = FlowStatus.T_MAX_REACHED
            break
        elif state.steps >= params.max_steps:
            status = FlowStatus.MAX_STEPS_REACHED
            logger.warning("Flow stopped after %d steps without converging", state.steps)
            break

        try:
            state = flow.step(state, None if forced is None else forced[state.steps])
        except StepFloorError as e:
            status = FlowStatus.POSITIVITY_LOST if e.positivity else FlowStatus.STEP_FLOOR
            logger.warning("Flow ended at t=%.6g: %s", state.t, e)
            break

        dt_schedule.append(state.last_dt)
        records.append(monitor.record(state, state.last_dt))
        logger.debug("Step %d: t=%.6g energy=%.6e dt=%.3e", state.steps, state.t, state.energy, state.last_dt)
        if state.steps % FlowConstants.LOG_EVERY == 0:
            logger.info("Step %d: t=%.6g energy=%.6e", state.steps, state.t, state.energy)

    final_moments = affine_moments(u0.grid, state.u.correction)
    drift = float(np.max(np.abs(final_moments - initial_moments)))
    drift /= _moment_scale(u0.grid, u0.correction, state.u.correction)

    logger.info(
        "Flow finished with status %s after %d steps (%d rejected): t=%.6g energy=%.6e",
        status.value, state.steps, state.rejections, state.t, state.energy,
    )
    return FlowReport(
        status=status,
        params=params,
        steps=state.steps,
        rejections=state.rejections,
        records=records,
        dt_schedule=dt_schedule,
        initial_moments=initial_moments.tolist(),
        final_moments=final_moments.tolist(),
        moment_drift=drift,
        final=state.u,
    )


def step(state: FlowState, params: Optional[FlowParams] = None, forced_dt: Optional[float] = None) -> FlowState:
    """Single step from a state, for callers that drive the loop themselves."""
    return CalabiFlow.for_potential(state.u, params).step(state, forced_dt)
