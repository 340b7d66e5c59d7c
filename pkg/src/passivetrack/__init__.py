"""Passive bistatic mmWave blocker tracking and blockage prediction.

A receiver with a sweeping surveillance beam listens to two unmodified
transmitters. Cross-ambiguity processing of reference and surveillance
dwells yields per-sweep angle-of-arrival and bistatic Doppler features,
from which a nonlinear least-squares fit recovers the unknown transmitter
positions and the blocker trajectory, and straight-line extrapolation
predicts line-of-sight blockages.
"""

from .geometry import AdoaPair, MotionParams
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["AdoaPair", "MotionParams", "BACKEND", "__version__"]
