"""Real-time surface-EMG decoding engine.

Frame ingestion over TCP, spatial-filtered RMS features, boosted-tree
classification stabilized by conformal prediction sets, and kinematic
output streaming over UDP, plus a simulated amplifier and a session
orchestrator for desk-scale experiments.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
