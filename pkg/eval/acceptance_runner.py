"""
Acceptance Runner for the toric toolkit.
Runs the property-based acceptance criteria at full scale and stores one CSV row per criterion.
"""

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.cli.commands import run_command, selftest
from src.config import config
from src.curvature.abreu import scalar_curvature
from src.exceptions import ToricError
from src.flow.calabi_flow import FlowParams, FlowReport, FlowStatus, run
from src.flow.experiment import contraction_experiment, theorem_experiment
from src.geometry.grid import build_grid
from src.geometry.polytope import interval, simplex, square
from src.potential.potential import guillemin_potential, hessian_field, positivity_report
from src.separable.projection import minimizer_check, project_separable, sample_competitors
from src.utils.perturbations import build_perturbation

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

FIELDNAMES = ['Criterion', 'Name', 'Passed', 'Detail', 'Seconds']

CriterionResult = Tuple[bool, str]


def _bump(t: np.ndarray) -> np.ndarray:
    return 0.01 * t ** 2 * (1 - t) ** 2


class AcceptanceRunner:
    """Runs acceptance criteria 1-9 and writes the results to CSV."""

    def __init__(self, output_csv_path: Optional[str] = None, flow_n: int = 32, interval_n: int = 64):
        """
        Initialize acceptance runner.

        Args:
            output_csv_path: Path to output CSV file (optional, defaults to eval/acceptance_results.csv)
            flow_n: Cells per axis for the flows on the square
            interval_n: Cells for the flow on [0, 1]
        """
        self.output_csv_path = output_csv_path or "eval/acceptance_results.csv"
        self.flow_n = flow_n
        self.interval_n = interval_n
        self.passed_count = 0
        self.failed_count = 0
        self.drifts: List[float] = []

    def _record_drift(self, report: FlowReport) -> None:
        self.drifts.append(report.moment_drift_per_1000_steps)

    def closed_form_curvature(self) -> CriterionResult:
        worst = 0.0
        for polytope, expected in ((interval(), 4.0), (simplex(2), 12.0), (square(), 8.0)):
            for n in (8, 16, 32, 64):
                S = scalar_curvature(guillemin_potential(polytope, build_grid(polytope, n))).values
                worst = max(worst, float(np.max(np.abs(S - expected))))
        return worst <= 1e-9, f"max |S - S_exact| = {worst:.3e}"

    def projection_validity(self, cases: int = 200) -> CriterionResult:
        grid = build_grid(square(), self.flow_n)
        x, y = grid.nodes[:, 0], grid.nodes[:, 1]
        base = guillemin_potential(square(), grid)
        rng = np.random.default_rng(config.selftest_seed)
        checked, worst_idempotence = 0, 0.0
        while checked < cases:
            a, b, c = rng.normal(size=3)
            amplitude = 0.05 * rng.uniform(0.1, 1.0)
            f = amplitude * (a * x ** 2 * y + b * np.sin(np.pi * x) * np.cos(np.pi * y) + c * (x * y) ** 2)
            u = base.with_correction(f)
            if not positivity_report(hessian_field(u)).is_positive:
                continue
            checked += 1
            v = project_separable(u).v
            if not positivity_report(hessian_field(v)).is_positive:
                return False, f"projection lost positivity in case {checked}"
            once = project_separable(u.mean_free()).v
            twice = project_separable(once).v
            worst_idempotence = max(worst_idempotence, float(np.max(np.abs(twice.correction - once.correction))))
        return worst_idempotence <= 1e-12, f"{checked} cases positive, idempotence {worst_idempotence:.3e}"

    def minimizer_property(self, competitors: int = 100) -> CriterionResult:
        grid = build_grid(square(), self.flow_n)
        perturbation = build_perturbation(grid, "polynomial", 0.01)
        u = guillemin_potential(square(), grid).with_correction(perturbation.values).mean_free()
        check = minimizer_check(u, sample_competitors(u, competitors, np.random.default_rng(config.selftest_seed)))
        ok = check.holds and check.max_pythagoras_residual <= 1e-12
        return ok, f"dist(u, v) = {check.distance_to_projection:.6e}, pythagoras residual {check.max_pythagoras_residual:.3e}"

    def interval_flow(self) -> CriterionResult:
        grid = build_grid(interval(), self.interval_n)
        u0 = guillemin_potential(interval(), grid).with_correction(_bump(grid.nodes[:, 0]))
        report = run(u0, params=FlowParams(tol_energy=1e-8))
        self._record_drift(report)
        energies = report.energies
        monotone = bool(np.all(np.diff(energies) <= 0.0))
        error = float(np.max(np.abs(scalar_curvature(report.final).values - 4.0)))
        # the discrete extremal differs from S = 4 at first order in h; 1e-3 is the n = 64 bound
        bound = 1e-3 * max(1.0, 64 / self.interval_n)
        ok = monotone and report.status == FlowStatus.CONVERGED and error <= bound
        return ok, f"status {report.status.value} after {report.steps} steps, max |S - 4| = {error:.3e}"

    def separability_preservation(self) -> CriterionResult:
        grid = build_grid(square(), self.flow_n)
        x, y = grid.nodes[:, 0], grid.nodes[:, 1]
        u0 = guillemin_potential(square(), grid).with_correction(_bump(x) + _bump(y)).mean_free()
        report = run(u0)
        self._record_drift(report)
        norm = float(np.sum(grid.weights * u0.correction ** 2))
        worst_defect = max(r.separability_defect for r in report.records)

        first, _ = grid.factor_grids()
        # mean-free g(x) + g(y) is the sum of the mean-free factor corrections
        g0 = guillemin_potential(interval(), first).with_correction(_bump(first.nodes[:, 0])).mean_free()
        factor_report = run(g0, schedule=report.dt_schedule)
        g = factor_report.final.correction
        lifted = (g[:, None] + g[None, :]).ravel()
        mismatch = float(np.max(np.abs(report.final.correction - lifted)))

        ok = worst_defect <= 1e-10 * (1 + norm) and mismatch <= 1e-6
        return ok, f"max defect {worst_defect:.3e}, lifted 1D mismatch {mismatch:.3e}"

    def theorem_and_contraction(self) -> List[Tuple[str, CriterionResult]]:
        grid = build_grid(square(), self.flow_n)
        perturbation = build_perturbation(grid, "polynomial", 0.01)
        params = FlowParams(tol_energy=1e-8)
        result = theorem_experiment(interval(), interval(), perturbation, params)
        self._record_drift(result.report)
        final_energy = result.report.records[-1].calabi_energy
        theorem_ok = (
            result.verdict
            and result.final_defect <= 0.01 * result.initial_defect
            and final_energy <= params.tol_energy
        )
        theorem = (theorem_ok, f"verdict {result.verdict}, defect {result.initial_defect:.3e} -> {result.final_defect:.3e}")

        u0 = guillemin_potential(square(), grid).with_correction(perturbation.values)
        contraction = contraction_experiment(u0, params)
        contraction_ok = contraction.fraction_non_increasing >= 0.95 and contraction.final_le_initial
        detail = (
            f"{contraction.fraction_non_increasing:.1%} of steps non-increasing, "
            f"distance {contraction.distances[0]:.3e} -> {contraction.distances[-1]:.3e}"
        )
        return [("theorem reproduction", theorem), ("distance contraction", (contraction_ok, detail))]

    def conservation(self) -> CriterionResult:
        if not self.drifts:
            return False, "no flow runs recorded"
        worst = max(self.drifts)
        return worst <= 1e-9, f"max drift per 1000 steps {worst:.3e} over {len(self.drifts)} runs"

    def determinism(self) -> CriterionResult:
        stream = io.StringIO()
        if selftest(stream) != 0:
            return False, "selftest failed"
        with tempfile.TemporaryDirectory() as tmp:
            paths = [os.path.join(tmp, f"project_{i}.json") for i in (1, 2)]
            for path in paths:
                if run_command(["project", "--builtin", "square", "--grid", "16", "--out", path]) != 0:
                    return False, "project run failed"
            with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
                identical = a.read() == b.read()
        return identical, "selftest passed, project output byte-identical" if identical else "project output differs"

    def write_headers_csv(self) -> None:
        """Create the output CSV with its header row."""
        directory = os.path.dirname(self.output_csv_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.output_csv_path, 'w', newline='', encoding='utf-8') as file:
            csv.DictWriter(file, fieldnames=FIELDNAMES).writeheader()

    def write_output_csv(self, result: Dict[str, object]) -> None:
        with open(self.output_csv_path, 'a', newline='', encoding='utf-8') as file:
            csv.DictWriter(file, fieldnames=FIELDNAMES).writerow(result)
        logger.info("Result written to %s", self.output_csv_path)

    def _record(self, number: int, name: str, outcome: CriterionResult, seconds: float) -> None:
        passed, detail = outcome
        if passed:
            self.passed_count += 1
        else:
            self.failed_count += 1
        logger.info("Criterion %d (%s): %s, %s", number, name, "PASS" if passed else "FAIL", detail)
        self.write_output_csv({
            'Criterion': number,
            'Name': name,
            'Passed': passed,
            'Detail': detail,
            'Seconds': f"{seconds:.1f}",
        })

    def _timed(self, number: int, name: str, check: Callable[[], CriterionResult]) -> None:
        start = time.perf_counter()
        try:
            outcome = check()
        except ToricError as e:
            logger.error("Criterion %d raised: %s", number, str(e))
            outcome = (False, f"{type(e).__name__}: {e}")
        self._record(number, name, outcome, time.perf_counter() - start)

    def run_acceptance(self) -> None:
        """Run every criterion in order; conservation is checked over the flows before it."""
        logger.info("Starting acceptance run (square n=%d, interval n=%d)...", self.flow_n, self.interval_n)
        self.write_headers_csv()

        self._timed(1, "closed-form scalar curvature", self.closed_form_curvature)
        self._timed(2, "projection validity", self.projection_validity)
        self._timed(3, "minimizer property", self.minimizer_property)
        self._timed(4, "flow sanity on [0, 1]", self.interval_flow)
        self._timed(5, "separability preservation", self.separability_preservation)

        start = time.perf_counter()
        try:
            outcomes = self.theorem_and_contraction()
        except ToricError as e:
            logger.error("Theorem run raised: %s", str(e))
            failure = (False, f"{type(e).__name__}: {e}")
            outcomes = [("theorem reproduction", failure), ("distance contraction", failure)]
        seconds = time.perf_counter() - start
        for number, (name, outcome) in zip((6, 7), outcomes):
            self._record(number, name, outcome, seconds)

        self._timed(8, "moment conservation", self.conservation)
        self._timed(9, "determinism", self.determinism)

        self.print_summary()

    def print_summary(self) -> None:
        """Print acceptance summary."""
        total = self.passed_count + self.failed_count

        print("\n" + "="*60)
        print("ACCEPTANCE SUMMARY")
        print("="*60)
        print(f"Criteria run: {total}")
        print(f"Passed: {self.passed_count}")
        print(f"Failed: {self.failed_count}")
        print(f"Results saved to: {self.output_csv_path}")
        print("="*60)


def main() -> int:
    """Main function to run the acceptance criteria."""
    parser = argparse.ArgumentParser(description="Run the acceptance criteria")
    parser.add_argument("--out", default=None, help="results CSV (default eval/acceptance_results.csv)")
    parser.add_argument("--quick", action="store_true", help="coarse grids (square n=8, interval n=16)")
    args = parser.parse_args()

    flow_n, interval_n = (8, 16) if args.quick else (32, 64)
    runner = AcceptanceRunner(args.out, flow_n=flow_n, interval_n=interval_n)
    try:
        runner.run_acceptance()
    except OSError as e:
        logger.error("Acceptance run failed: %s", str(e))
        print(f"\nAcceptance run failed: {str(e)}")
        return 2
    return 0 if runner.failed_count == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
