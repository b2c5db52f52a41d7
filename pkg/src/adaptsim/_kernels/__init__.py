"""Kernel backend selection.

The compiled extension is preferred; the numpy implementation is the
fallback. Set ADAPTSIM_PURE_KERNELS=1 to force the fallback (used by the
benchmark and the backend-parity tests).
"""

import os

from . import pure

if os.environ.get("ADAPTSIM_PURE_KERNELS") == "1":
    impl = pure
else:
    try:
        from . import _fast as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pure

BACKEND = impl.BACKEND_NAME


def get_backend(name=None):
    """Return a kernel module by name ('fast', 'pure' or None for current)."""
    if name is None:
        return impl
    if name == "pure":
        return pure
    if name == "fast":
        from . import _fast
        return _fast
    raise ValueError(f"unknown kernel backend {name!r}")


se_init = impl.se_init
rwp_advance = impl.rwp_advance
lottery_mask = impl.lottery_mask
deliver_pings = impl.deliver_pings
digest_partial = impl.digest_partial
splitmix_u64 = impl.splitmix_u64
counter_u64 = impl.counter_u64
