"""Numerical laboratory for quantitative symmetry stability of semilinear
elliptic Dirichlet problems on the unit disk.

Subpackages follow the pipeline: ``grid`` (polar substrate), ``fields``
(parametric data), ``solver`` (Newton on the disk), ``deficits`` and
``symmetry`` (the two sides of the stability estimates), ``movingplanes``
(critical plane diagnostics), ``domains`` (perturbed-domain pullbacks),
``chain`` (Harnack chain geometry), ``harness`` (sweeps, fits, reports).

Hot kernels (interpolation, stencil application, plane scans) run through a
compiled extension when available; ``gnnlab.kernel_backend()`` reports which
implementation is active.
"""

from ._backend import BACKEND as _KERNEL_BACKEND

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Either 'compiled' (Cython extension) or 'python' (numpy fallback)."""
    return _KERNEL_BACKEND
