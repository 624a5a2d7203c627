"""Backend selection for the row-reduction kernel.

The compiled extension is preferred when it imported successfully;
setting ``BVCALC_PURE_PYTHON=1`` forces the pure backend.  Both expose
the same ``rref`` and produce byte-identical results.
"""

from __future__ import annotations

import os

from . import _rref_py

if os.environ.get("BVCALC_PURE_PYTHON") == "1":
    _impl = _rref_py
else:
    try:
        from . import _rref_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _rref_py

rref = _impl.rref


def backend_name() -> str:
    return "compiled" if _impl.__name__.endswith("_rref_cy") else "pure-python"


def available_backends():
    """All importable backends, keyed by name (used by the benchmark)."""
    backends = {"pure-python": _rref_py}
    try:
        from . import _rref_cy

        backends["compiled"] = _rref_cy
    except ImportError:
        pass
    return backends
