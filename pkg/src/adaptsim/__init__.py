"""adaptsim: time-stepped distributed simulation with adaptive entity
migration (communication self-clustering + speed-aware load balancing),
bundled with a mobile ad-hoc network benchmark and a measurement pipeline.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
