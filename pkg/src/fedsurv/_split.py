"""Split-scanner backend selection.

Prefers the compiled extension; falls back to the pure-Python mirror when
the extension is unavailable or ``FEDSURV_PURE_PYTHON=1`` is set. Both
backends are bit-identical; only speed differs.
"""
from __future__ import annotations

import os

if os.environ.get("FEDSURV_PURE_PYTHON") == "1":
    from fedsurv._split_py import best_split

    BACKEND = "python"
else:
    try:
        from fedsurv._speedups import best_split  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from fedsurv._split_py import best_split  # type: ignore[no-redef]

        BACKEND = "python"

__all__ = ["best_split", "BACKEND"]
