import os
from typing import Dict, Any, Optional
from dotenv import load_dotenv
from .constants import FlowConstants

# Load environment variables from .env file
load_dotenv()


class Config:
    """Application configuration."""

    # Logging
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_file: str = os.getenv("LOG_FILE", "")

    # Parallelism (0 means all cores)
    tool_threads: int = int(os.getenv("TOOL_THREADS", "0"))

    # Grid defaults
    default_grid_n: int = int(os.getenv("DEFAULT_GRID_N", "32"))

    # Flow defaults
    flow_dt_factor: float = float(os.getenv("FLOW_DT_FACTOR", str(FlowConstants.DT_FACTOR)))
    flow_dt_growth: float = float(os.getenv("FLOW_DT_GROWTH", str(FlowConstants.DT_GROWTH)))
    flow_tol_energy: float = float(os.getenv("FLOW_TOL_ENERGY", str(FlowConstants.TOL_ENERGY)))
    flow_tol_defect: float = float(os.getenv("FLOW_TOL_DEFECT", str(FlowConstants.TOL_DEFECT)))
    flow_t_max: float = float(os.getenv("FLOW_T_MAX", str(FlowConstants.T_MAX)))
    flow_max_steps: int = int(os.getenv("FLOW_MAX_STEPS", str(FlowConstants.MAX_STEPS)))
    flow_positivity_margin: float = float(
        os.getenv("FLOW_POSITIVITY_MARGIN", str(FlowConstants.POSITIVITY_MARGIN))
    )

    # Selftest
    selftest_seed: int = int(os.getenv("SELFTEST_SEED", "20240101"))

    def flow_defaults(self, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """Get flow parameter defaults, with explicit overrides applied on top."""
        defaults = {
            "dt_factor": self.flow_dt_factor,
            "dt_growth": self.flow_dt_growth,
            "tol_energy": self.flow_tol_energy,
            "tol_defect": self.flow_tol_defect,
            "t_max": self.flow_t_max,
            "max_steps": self.flow_max_steps,
            "positivity_margin": self.flow_positivity_margin,
        }
        if overrides:
            defaults.update({k: v for k, v in overrides.items() if v is not None})
        return defaults

    def thread_env(self) -> Dict[str, str]:
        """Environment variables that cap BLAS/OpenMP threads, empty when uncapped."""
        if self.tool_threads <= 0:
            return {}
        value = str(self.tool_threads)
        return {
            "OMP_NUM_THREADS": value,
            "OPENBLAS_NUM_THREADS": value,
            "MKL_NUM_THREADS": value,
        }

    def validate(self) -> bool:
        """Validate that configured values are in range."""
        if self.default_grid_n < 2:
            return False
        if self.flow_dt_factor <= 0 or self.flow_dt_growth <= 1:
            return False
        if self.flow_tol_energy <= 0 or self.flow_tol_defect <= 0:
            return False
        if self.flow_t_max <= 0 or self.flow_max_steps < 1:
            return False
        if self.flow_positivity_margin < 0:
            return False
        return True


# Global configuration instance
config = Config()
