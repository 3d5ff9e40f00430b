"""Kernel backend selection.

The compiled extension ``pfqr._ipqr`` is preferred when importable; the
numpy implementation in ``pfqr._ipqr_py`` is the fallback.  Set
``PFQR_BACKEND=python`` or ``PFQR_BACKEND=compiled`` to force one (the
latter raises if the extension is missing).  Both backends implement the
same algorithm; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

from . import _ipqr_py

_force = os.environ.get("PFQR_BACKEND", "").strip().lower()

_compiled = None
if _force != "python":
    try:
        from . import _ipqr as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

if _force == "compiled" and _compiled is None:
    raise ImportError(
        "PFQR_BACKEND=compiled but the pfqr._ipqr extension is not built; "
        "run `pip install -e . --no-build-isolation` or unset PFQR_BACKEND"
    )

if _compiled is not None:
    BACKEND = "compiled"
    qr_ip = _compiled.qr_ip
    cqr_ip = _compiled.cqr_ip
else:
    BACKEND = "python"
    qr_ip = _ipqr_py.qr_ip
    cqr_ip = _ipqr_py.cqr_ip

# the smoothed rescue path is cold; the numpy version serves both backends
smoothed_qr = _ipqr_py.smoothed_qr


def backend_name() -> str:
    return BACKEND
