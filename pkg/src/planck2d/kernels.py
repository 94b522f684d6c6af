"""Backend selection for the per-point kernels.

The compiled Cython extension is used when importable; otherwise the numpy
implementation is used. Setting ``PLANCK2D_PURE_PYTHON=1`` forces the
fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PLANCK2D_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

coth_ratio = _impl.coth_ratio
coth_ratio_dT = _impl.coth_ratio_dT
model = _impl.model
model_and_jacobian = _impl.model_and_jacobian
residual_and_jacobian = _impl.residual_and_jacobian
