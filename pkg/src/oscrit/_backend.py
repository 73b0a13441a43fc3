"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pykernels`` takes over.  Setting the environment
variable ``OSCRIT_PURE_PYTHON=1`` forces the fallback.
"""
import os

if os.environ.get("OSCRIT_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        from . import _pykernels as kernels

BACKEND = kernels.NAME

pw_eval = kernels.pw_eval
pw_antideriv = kernels.pw_antideriv
hermite_eval = kernels.hermite_eval
rk4_march = kernels.rk4_march
