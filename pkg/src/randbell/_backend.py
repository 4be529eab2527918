"""Pick the compiled kernels when available, else the numpy fallback.

Set ``RANDBELL_PURE_PYTHON=1`` to force the fallback.
"""
import os

from randbell import _fallback

if os.environ.get("RANDBELL_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
else:
    try:
        from randbell import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _fallback

BACKEND: str = kernels.BACKEND
uniform_block = kernels.uniform_block
chsh_max_batch = kernels.chsh_max_batch
