"""
Simulation Session with Environment Variable Support
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, List, Optional, TypeVar

from src.gaussian_dynamics import IntegratorSettings

T = TypeVar("T")
R = TypeVar("R")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class SimulationSession:
    """
    Execution settings shared by every run: worker pool size, output location,
    an optional integrator step cap and the log level.
    """

    def __init__(
        self,
        workers: Optional[int] = None,
        output_dir: Optional[str] = None,
        max_step: Optional[float] = None,
        log_level: Optional[str] = None,
    ):
        """
        Initialize the simulation session.

        Args:
            workers: Worker processes for sweeps. Defaults to MIRROR_WORKERS or 1
            output_dir: Root directory for result tables.
                        Defaults to MIRROR_OUTPUT_DIR or "results"
            max_step: Upper bound on the deterministic integrator step.
                      Defaults to MIRROR_MAX_STEP (unset means no override)
            log_level: Logging level. Defaults to MIRROR_LOG_LEVEL or INFO
        """
        try:
            self.workers = int(workers if workers is not None else os.getenv("MIRROR_WORKERS", "1"))
        except ValueError:
            raise ValueError(f"MIRROR_WORKERS must be an integer, got {os.getenv('MIRROR_WORKERS')!r}") from None
        if self.workers < 1:
            raise ValueError(f"workers must be ≥ 1, got {self.workers}")

        self.output_dir = output_dir or os.getenv("MIRROR_OUTPUT_DIR", "results")

        raw_step = max_step if max_step is not None else os.getenv("MIRROR_MAX_STEP")
        try:
            self.max_step = float(raw_step) if raw_step not in (None, "") else None
        except ValueError:
            raise ValueError(f"MIRROR_MAX_STEP must be a number, got {raw_step!r}") from None
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")

        self.log_level = (log_level or os.getenv("MIRROR_LOG_LEVEL", "INFO")).upper()
        if self.log_level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {LOG_LEVELS}, got {self.log_level}")

    @classmethod
    def from_env(cls) -> "SimulationSession":
        """
        Create a session using only environment variables.

        Raises:
            ValueError: If an environment variable holds an invalid value
        """
        return cls()

    def configure_logging(self):
        logging.basicConfig(
            level=getattr(logging, self.log_level),
            format="%(asctime)s - %(levelname)s - %(message)s",
        )

    def apply(self, settings: IntegratorSettings) -> IntegratorSettings:
        """Cap the integrator step at MIRROR_MAX_STEP when it is set"""
        if self.max_step is None or settings.max_step <= self.max_step:
            return settings
        return replace(settings, max_step=self.max_step)

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """
        Order-preserving map over independent tasks.

        Results come back in input order whatever the worker count, so merged
        outputs do not depend on scheduling.
        """
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ProcessPoolExecutor(max_workers=min(self.workers, len(items))) as pool:
            return list(pool.map(fn, items))

    @staticmethod
    def check_env_vars():
        """
        Check and display the status of simulation environment variables.
        Useful for debugging configuration.
        """
        env_vars = {
            "MIRROR_WORKERS": os.getenv("MIRROR_WORKERS"),
            "MIRROR_OUTPUT_DIR": os.getenv("MIRROR_OUTPUT_DIR"),
            "MIRROR_MAX_STEP": os.getenv("MIRROR_MAX_STEP"),
            "MIRROR_LOG_LEVEL": os.getenv("MIRROR_LOG_LEVEL"),
        }

        print("Simulation Environment Variables:")
        print("-" * 40)

        for var_name, var_value in env_vars.items():
            if var_value:
                print(f"✓ {var_name} = {var_value}")
            else:
                print(f"✗ {var_name} = (not set)")

        print("-" * 40)
        print("Defaults:")
        print("  MIRROR_WORKERS defaults to: 1")
        print("  MIRROR_OUTPUT_DIR defaults to: results")
        print("  MIRROR_MAX_STEP: (optional - caps the integrator step)")
        print("  MIRROR_LOG_LEVEL defaults to: INFO")

    def __str__(self) -> str:
        """String representation of the session"""
        step = f"max_step={self.max_step}" if self.max_step is not None else "config step"
        return f"SimulationSession(workers={self.workers}, output={self.output_dir}, {step})"

    def __repr__(self) -> str:
        return (
            f"SimulationSession(workers={self.workers!r}, output_dir={self.output_dir!r}, "
            f"max_step={self.max_step!r}, log_level={self.log_level!r})"
        )
