"""Exception types raised by the kvn engine."""


class KvnError(Exception):
    """Base class for all engine errors."""


class GridError(KvnError, ValueError):
    """Invalid grid specification or grid mismatch between operands."""


class AxisError(KvnError, KeyError):
    """An axis name that does not exist on the target grid."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown axis"


class MarginError(KvnError, ValueError):
    """Support of a state gets too close to a periodic boundary."""


class ForceError(KvnError, ValueError):
    """Invalid force field, potential, or Liouvillian recipe."""


class PropagationError(KvnError, RuntimeError):
    """Numerical failure during time evolution (NaN, margin breach)."""


class ConfigError(KvnError, ValueError):
    """Scenario configuration failed validation.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class AnalysisError(KvnError, ValueError):
    """Invalid input to an observable or diagnostic (unnormalized state, short series)."""
