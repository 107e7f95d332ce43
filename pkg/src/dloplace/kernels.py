"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. ``DLOPLACE_PURE_PYTHON=1`` forces the fallback.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DLOPLACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable; using numpy fallback")
    else:
        _impl = _compiled
        BACKEND = "cython"

agm_ladder = _impl.agm_ladder
am_zeta = _impl.am_zeta
ellipe_inc = _impl.ellipe_inc
elastica_states = _impl.elastica_states
rk4_states = _impl.rk4_states
adjoint_rk4 = _impl.adjoint_rk4
first_crossing = _impl.first_crossing

__all__ = [
    "BACKEND",
    "agm_ladder",
    "am_zeta",
    "ellipe_inc",
    "elastica_states",
    "rk4_states",
    "adjoint_rk4",
    "first_crossing",
]
