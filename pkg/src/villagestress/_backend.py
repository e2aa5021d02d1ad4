"""Select the compiled kernels when available.

Set ``VILLAGESTRESS_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _kernels_py as python_kernels

compiled_kernels = None
if os.environ.get("VILLAGESTRESS_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"
