"""
Physics Package

Physics terms of the PINN objective. Each term lives in its own file and
derives from BasePhysics.
"""

from .base_physics import BasePhysics
from .aliev_panfilov_physics import AlievPanfilovPhysics, CollocationSet, sample_collocation
from .parameter_penalty_physics import ParameterPenaltyPhysics

__all__ = [
    'BasePhysics',
    'AlievPanfilovPhysics',
    'CollocationSet',
    'sample_collocation',
    'ParameterPenaltyPhysics',
]
