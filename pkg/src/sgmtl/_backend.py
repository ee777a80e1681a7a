"""Select the coordinate-kernel implementation at import time.

The compiled extension is used when it was built; setting the environment
variable ``SGMTL_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

from sgmtl import _kernels_py

if os.environ.get("SGMTL_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from sgmtl import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    w_pass = _compiled.w_pass
    enet_pass = _compiled.enet_pass
    BACKEND = "cython"
else:
    w_pass = _kernels_py.w_pass
    enet_pass = _kernels_py.enet_pass
    BACKEND = "python"

compiled = _compiled
python = _kernels_py
