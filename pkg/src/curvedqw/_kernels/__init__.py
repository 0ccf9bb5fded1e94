"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built; set ``CQW_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as python

compiled = None
if os.environ.get("CQW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

_active = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

newton_solve = _active.newton_solve
newton_sweep = _active.newton_sweep
bravais_factor = _active.bravais_factor
tri_substep = _active.tri_substep

__all__ = [
    "BACKEND",
    "bravais_factor",
    "compiled",
    "newton_solve",
    "newton_sweep",
    "python",
    "tri_substep",
]
