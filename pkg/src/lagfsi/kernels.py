"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set LAGFSI_PURE_PYTHON=1 to force the numpy fallback (used by the parity
tests and the benchmark).
"""

import os

from . import _kernels_py

if os.environ.get("LAGFSI_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

inv_det = _impl.inv_det
energy = _kernels_py.energy  # cheap, numpy everywhere
pk1 = _impl.pk1
elem_residual = _impl.elem_residual
elem_tangent = _impl.elem_tangent
visc_elements = _impl.visc_elements
div_elements = _impl.div_elements
