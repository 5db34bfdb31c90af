"""
Annual energy production objective with density interpolation
"""

from .aep_objective import DesignVector, InterpolationKind, InterpolationScheme, ObjectiveError, ObjectiveReport, aep, aep_batch

__all__ = ["DesignVector", "InterpolationKind", "InterpolationScheme", "ObjectiveError", "ObjectiveReport", "aep", "aep_batch"]
