"""
Base Physics Class

All physics terms inherit from this base class.
Provides a consistent interface for the physics part of the PINN loss.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from core.autodiff import Node, Tape


class BasePhysics(ABC):
    """
    Abstract base class for physics terms L_phy(theta).

    All physics classes should inherit from this and implement loss_node().
    """

    def __init__(self):
        self.physics_name = self.__class__.__name__.replace('Physics', '').lower()

    @abstractmethod
    def loss_node(self, model, theta: Node) -> Node:
        """
        Record the physics loss on theta's tape.

        Args:
            model: Field model being trained
            theta: Parameter node

        Returns:
            Scalar node
        """
        pass

    def loss(self, model, theta: np.ndarray) -> float:
        """Evaluate the physics loss at plain parameter values"""
        tape = Tape()
        return float(self.loss_node(model, tape.variable(theta)).value)

    def exact_hessian(self, model, theta: np.ndarray) -> Optional[np.ndarray]:
        """
        Closed-form Hessian for terms that are exactly quadratic in theta.

        Returns None when the term is not quadratic.
        """
        return None

    def restrict_sensors(self, sensors) -> 'BasePhysics':
        """Physics terms do not depend on the sensor set"""
        return self

    def get_name(self) -> str:
        return self.physics_name

    def get_description(self) -> str:
        return self.__doc__ or "No description available"
