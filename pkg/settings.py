#!/usr/bin/env python3
"""
Runtime Settings for the CV Quantum Switch Toolkit
==================================================

Values come from the environment (prefix ``CVSWITCH_``) or a local ``.env`` file.
CLI flags override them per invocation.
"""

import logging
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

# Full-resolution sweep protocol (201^3 grid points, 10^5 steps each)
FULL_DLAM = 0.005
FULL_STEPS = 100_000
DEFAULT_THRESHOLD = 1e-4


class SwitchSettings(BaseSettings):
    """Defaults for simulations, sweeps and enumeration caps."""

    model_config = SettingsConfigDict(env_prefix="CVSWITCH_", env_file=".env", extra="ignore")

    threshold: float = Field(DEFAULT_THRESHOLD, gt=0, description="Regression slope threshold (requests/step)")
    steps: int = Field(20_000, ge=1, description="Desk-scale simulation horizon")
    seed: int = Field(2024, ge=0, description="Base seed for every RNG stream")
    dlam: float = Field(0.02, gt=0, description="Desk-scale sweep grid step")
    workers: int = Field(-1, description="joblib n_jobs for sweeps (-1 = all cores)")
    enumeration_cap: int = Field(20, ge=1, description="Max links for exact outcome enumeration")
    max_flows: int = Field(20, ge=1, description="Max flows for exhaustive matching enumeration")
    sweep_work_cap: float = Field(2e10, gt=0, description="Max grid points x steps x repetitions")
    log_level: str = Field("INFO", description="Root logging level")


@lru_cache(maxsize=1)
def get_settings() -> SwitchSettings:
    """Load settings once per process."""
    settings = SwitchSettings()
    logger.debug(f"Loaded settings: {settings.model_dump()}")
    return settings
