"""Selects the move-generation backend at import time.

The compiled ``_kernel`` extension is preferred; the pure-Python twin is used
when the extension is not built or ``CHESSDISTILL_PURE_PYTHON`` is set.
"""

import os

from . import _kernel_py

if os.environ.get("CHESSDISTILL_PURE_PYTHON"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl
    except ImportError:
        _impl = _kernel_py

BACKEND = _impl.BACKEND
attacked = _impl.attacked
in_check = _impl.in_check
legal_moves = _impl.legal_moves
perft = _impl.perft

# make/unmake are only needed on the Python side (apply_move)
make_move = _kernel_py.make_move
