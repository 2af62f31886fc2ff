"""Simulated GPR pipe surveys, migration, registration and point-cloud completion."""

__version__ = "0.1.0"
