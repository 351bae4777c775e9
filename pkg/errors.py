"""Exceptions shared by the switch toolkit; the CLI maps each to an exit code."""

from typing import Optional


class DomainError(ValueError):
    """A parameter lies outside its mathematical domain."""


class ConfigError(ValueError):
    """A topology or config file is unreadable or violates the model invariants."""

    def __init__(self, message: str, violations: Optional[list] = None):
        super().__init__(message)
        self.violations = list(violations or [])


class CapacityError(RuntimeError):
    """An enumeration or sweep would exceed its configured work cap."""

    def __init__(self, message: str, estimate: float = 0.0, cap: float = 0.0):
        super().__init__(message)
        self.estimate = estimate
        self.cap = cap


class TopologyMismatchError(ValueError):
    """Two artifacts (e.g. a sweep result and a region) describe different switches."""
