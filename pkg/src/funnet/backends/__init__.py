"""Backend selection for the training kernels.

The compiled core is used when its extension module imported cleanly;
otherwise the NumPy implementation takes over. ``FUNNET_BACKEND`` forces
the choice: ``auto`` (default), ``python``, or ``compiled``.
"""

from __future__ import annotations

import os

from . import numpy_backend

_REQUESTED = os.environ.get("FUNNET_BACKEND", "auto").strip().lower() or "auto"
if _REQUESTED not in ("auto", "python", "compiled"):
    raise ImportError(
        f"FUNNET_BACKEND must be 'auto', 'python' or 'compiled', got {_REQUESTED!r}"
    )

_compiled = None
if _REQUESTED in ("auto", "compiled"):
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None

if _REQUESTED == "compiled" and _compiled is None:
    raise ImportError(
        "FUNNET_BACKEND=compiled but the compiled extension is not available"
    )

kernels = _compiled if _compiled is not None else numpy_backend


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return kernels.NAME


def available_backends() -> tuple:
    """All importable kernel modules, python one first."""
    mods = [numpy_backend]
    if _compiled is not None:
        mods.append(_compiled)
    return tuple(mods)
