"""bvcalc: exact-arithmetic homotopy Batalin-Vilkovisky algebra engine."""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
