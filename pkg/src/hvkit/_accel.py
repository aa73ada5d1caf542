"""Select the compiled kernels when available, else the NumPy fallback.

Set ``HVKIT_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the cross-check tests).
"""

from __future__ import annotations

import os

from hvkit import _fallback

kernels = _fallback
HAVE_EXTENSION = False

if os.environ.get("HVKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from hvkit import _kernels as kernels  # type: ignore[no-redef]

        HAVE_EXTENSION = True
    except ImportError:
        pass

BACKEND_NAME = "cython" if HAVE_EXTENSION else "python"
