"""Classical phase-space wavefunctions: grids, operators, Liouvillians and propagators."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AnalysisError,
    AxisError,
    ConfigError,
    ForceError,
    GridError,
    KvnError,
    MarginError,
    PropagationError,
)
from .grid import GridSpec, WavefunctionField, build_grid, gaussian_packet  # noqa: E402

__all__ = [
    "AnalysisError",
    "AxisError",
    "ConfigError",
    "ForceError",
    "GridError",
    "GridSpec",
    "KvnError",
    "MarginError",
    "PropagationError",
    "WavefunctionField",
    "build_grid",
    "gaussian_packet",
]
