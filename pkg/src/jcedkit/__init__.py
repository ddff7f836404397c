"""Joint chance-constrained economic dispatch with inverter inertia/droop co-optimization."""
from .grid import GridCase, compute_ptdf, load_case, save_case

__version__ = "0.1.0"

__all__ = ["GridCase", "compute_ptdf", "load_case", "save_case", "__version__"]
