"""Coherent-feedback photonic network simulator.

Composes open quantum subsystems with the SLH calculus, realizes the result
on truncated Fock spaces, and predicts both semiclassical (optical
bistability) and quantum (photon blockade, multiphoton tunneling) behavior.
"""

__version__ = "0.1.0"

from .operators import ModeRegistry, OperatorExpr
from .slh import SlhTriple, feedback_loop, rotating_frame, series

__all__ = [
    "ModeRegistry",
    "OperatorExpr",
    "SlhTriple",
    "series",
    "feedback_loop",
    "rotating_frame",
    "__version__",
]
