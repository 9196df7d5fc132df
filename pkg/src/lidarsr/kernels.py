"""Scan kernel backend selection.

The compiled extension (lidarsr._scan_core, Cython) is used when it
imports; otherwise the numpy kernels take over.  Set LIDARSR_SCAN_BACKEND
to "cython" or "numpy" to force a backend ("cython" raises if the
extension was not built).  benchmarks/bench_scan.py compares the two.
"""

import os

from . import _scan_numpy

_FORCED = os.environ.get("LIDARSR_SCAN_BACKEND", "auto").lower()

if _FORCED not in ("auto", "cython", "numpy"):
    raise RuntimeError(
        f"LIDARSR_SCAN_BACKEND={_FORCED!r}: expected auto, cython or numpy"
    )

if _FORCED == "numpy":
    _impl = _scan_numpy
else:
    try:
        from . import _scan_core as _impl
    except ImportError:
        if _FORCED == "cython":
            raise RuntimeError(
                "LIDARSR_SCAN_BACKEND=cython but the compiled extension is "
                "not available; build it with 'pip install -e .'"
            ) from None
        _impl = _scan_numpy

lti_scan = _impl.lti_scan
selective_scan = _impl.selective_scan


def backend_name() -> str:
    """Name of the active backend: 'cython' or 'numpy'."""
    return _impl.BACKEND_NAME


def available_backends():
    """Importable backend modules keyed by name."""
    backends = {"numpy": _scan_numpy}
    try:
        from . import _scan_core

        backends["cython"] = _scan_core
    except ImportError:
        pass
    return backends
