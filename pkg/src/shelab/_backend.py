"""Backend selection: compiled scan kernel if importable, numpy otherwise.

SHELAB_BACKEND=python|compiled|auto forces the choice; 'compiled' raises if
the extension is missing instead of silently falling back.
"""

from __future__ import annotations

import os

from . import _scan_py

_choice = os.environ.get("SHELAB_BACKEND", "auto").lower()
if _choice not in {"auto", "python", "compiled"}:
    raise ValueError(f"SHELAB_BACKEND must be auto|python|compiled, got {_choice!r}")

ACTIVE = "python"
_mod = _scan_py
if _choice in {"auto", "compiled"}:
    try:
        from . import _scan as _compiled

        _mod = _compiled
        ACTIVE = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise

ou_scan = _mod.ou_scan


def available_backends() -> dict:
    """Name -> module for every importable backend (used by tests/benchmarks)."""
    out = {"python": _scan_py}
    try:
        from . import _scan as _compiled

        out["compiled"] = _compiled
    except ImportError:
        pass
    return out
