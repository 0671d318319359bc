"""Simulation and verification toolkit for the infinite-rate mutually catalytic branching process."""

from .kernels import BoundaryPoint, Branch, QuadrantPoint, kernel_F, kernel_H, lozenge

__all__ = ["BoundaryPoint", "Branch", "QuadrantPoint", "kernel_F", "kernel_H", "lozenge"]
__version__ = "0.1.0"
