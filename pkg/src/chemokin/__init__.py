"""Numerical laboratory for a one-dimensional kinetic chemotaxis model.

Modules: ``core`` (grids, fields, scaling, transport), ``signal`` (the
screened-Poisson signal and its moments), ``kinetic`` (phase-space
solver and Duhamel validators), ``moments`` (moment hierarchy, critical
masses), ``stationary`` (aggregated steady states) and ``cli``.
"""
from .core import DensityProfile, ModelKind, PhaseField, SpatialGrid, VelocityGrid, make_grids

__all__ = ["DensityProfile", "ModelKind", "PhaseField", "SpatialGrid", "VelocityGrid", "make_grids"]
