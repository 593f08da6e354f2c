"""Pick the compiled kernels when available, else the numpy fallback.

Set ``RIRSF_PURE_PYTHON=1`` in the environment to force the fallback.
"""
import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("RIRSF_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:  # extension not built
        from . import _kernels_py as kernels
        COMPILED = False
        log.debug("compiled kernels unavailable; using numpy fallback")

__all__ = ["kernels", "COMPILED"]
