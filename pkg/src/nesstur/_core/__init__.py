"""Hot-kernel backend selection.

The compiled extension ``_native`` is used when importable; otherwise the
pure-numpy ``_fallback`` takes over with identical semantics.  Set the
environment variable ``NESSTUR_PURE_PYTHON=1`` to force the fallback (useful
for benchmarking and debugging).
"""

import os

from . import _fallback

_force_pure = os.environ.get("NESSTUR_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

integrate_rk45 = _impl.integrate_rk45
tur_scan_records = _impl.tur_scan_records


def backend() -> str:
    """Name of the active kernel backend: 'native' or 'fallback'."""
    return BACKEND


def available_backends() -> dict:
    """All importable backends, keyed by name (for benchmarks and tests)."""
    out = {"fallback": _fallback}
    try:
        from . import _native  # type: ignore[attr-defined]

        out["native"] = _native
    except ImportError:
        pass
    return out
