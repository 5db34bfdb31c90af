"""
Volume and spacing constraints
"""

from .layout_constraints import ConstraintError, ConstraintSystem, build_constraint_system

__all__ = ["ConstraintError", "ConstraintSystem", "build_constraint_system"]
