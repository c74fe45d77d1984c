"""Pick the compiled search kernel when available.

Set ``GRE_PURE_PYTHON=1`` to force the interpreted implementation.
"""

import os

from . import _purepy

BACKEND = "python"
exhaustive_search = _purepy.exhaustive_search

if os.environ.get("GRE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._speedups import exhaustive_search  # noqa: F401, F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"
