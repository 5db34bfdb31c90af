"""
Gaussian wake deficits and their per-direction precomputation
"""

from .gaussian_wake import DeficitTensor, WakeModelError, WakeParams, gaussian_deficit, precompute_deficit_tensor

__all__ = ["DeficitTensor", "WakeModelError", "WakeParams", "gaussian_deficit", "precompute_deficit_tensor"]
