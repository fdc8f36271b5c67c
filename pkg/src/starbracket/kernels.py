"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``STARBRACKET_PURE=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("STARBRACKET_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import derive, eval_mod, iadd, mul  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import derive, eval_mod, iadd, mul  # noqa: F401

from ._kernels_py import FIELD_BITS, FIELD_MASK  # noqa: F401,E402
