"""Kernel backend selection.

At import time the compiled extension is preferred; the numpy fallback is
used when it is missing (source checkout without a build) or when the
environment variable ``GNNLAB_KERNELS`` is set to ``python``.  Setting it to
``compiled`` makes a missing extension a hard error instead of a silent
fallback.
"""

import os

_choice = os.environ.get("GNNLAB_KERNELS", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        f"GNNLAB_KERNELS must be 'auto', 'compiled' or 'python', got {_choice!r}"
    )

if _choice == "python":
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _kernels_py as kernels

        BACKEND = "python"

interp_fractional = kernels.interp_fractional
laplace_apply = kernels.laplace_apply
plane_scan_min = kernels.plane_scan_min
