"""Pick the compiled kernel when it is importable, else the numpy fallback.

Set ``AMBIPORT_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

python_integrate = _kernels_py.integrate
compiled_integrate = None

if os.environ.get("AMBIPORT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import integrate as compiled_integrate
    except ImportError:
        compiled_integrate = None

if compiled_integrate is not None:
    integrate = compiled_integrate
    BACKEND = "cython"
else:
    integrate = python_integrate
    BACKEND = "python"
