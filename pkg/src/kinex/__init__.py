"""Kinetic theory of gases whose particles exchange mass in binary collisions.

Modules
-------
mass_law   rate factors and beta statistics of the mass distribution
collision  two-particle kinematics
kinetic    discrete-velocity operator, BGK relaxation, kinetic entropy
dsmc       stochastic particle simulation of the homogeneous dynamics
fluid      Euler and Navier-Stokes mass-exchange solvers in 1-D
thermo     entropic variables, Massieu-Planck potential, Onsager matrix
cli        scenario runner (``kinex`` console script)
"""

from ._backend import BACKEND
from .collision import CollisionChannel, Kernel, Particle, collide_forward, collide_inverse
from .errors import (
    ConvergenceError,
    DomainError,
    KinexError,
    RangeError,
    StepError,
    ValidationError,
)
from .mass_law import MassLaw

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MassLaw",
    "Kernel",
    "Particle",
    "CollisionChannel",
    "collide_forward",
    "collide_inverse",
    "KinexError",
    "DomainError",
    "RangeError",
    "ConvergenceError",
    "StepError",
    "ValidationError",
]
