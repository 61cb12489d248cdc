# multilayer_onn/errors.py
# Purpose: Exception hierarchy shared by every simulation module

"""
Module: errors.py
Purpose: Module-tagged exceptions raised by the geometry, optics, electronics, network,
datasets, calibration, energy and cli layers.
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple


class OnnError(Exception):
    """
    Base class for all simulator errors.

    Attributes:
        module (str): Name of the module that raised the error.
        context (Dict[str, Any]): Structured details for the run report.
    """

    module: str = "core"

    def __init__(self, message: str, *, module: Optional[str] = None, **context: Any) -> None:
        super().__init__(message)
        if module is not None:
            self.module = module
        self.context: Dict[str, Any] = context

    def to_report(self) -> Dict[str, Any]:
        """
        Build the structured error report written to status.json.

        Returns:
            Dict[str, Any]: Module tag, error type, message and context.
        """
        return {
            "module": self.module,
            "error": type(self).__name__,
            "message": str(self),
            "context": {k: _jsonable(v) for k, v in self.context.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        return [_jsonable(v) for v in value]
    return str(value)


# geometry

class InvalidGeometryError(OnnError, ValueError):
    module = "geometry"


class LayoutInfeasibleError(OnnError):
    """Raised when two mask windows share at least one pixel."""

    module = "geometry"

    def __init__(self, pairs: Sequence[Tuple[Tuple[int, int], Tuple[int, int]]]) -> None:
        self.pairs: List[Tuple[Tuple[int, int], Tuple[int, int]]] = list(pairs)
        shown = ", ".join(f"{a}/{b}" for a, b in self.pairs[:8])
        more = f" (+{len(self.pairs) - 8} more)" if len(self.pairs) > 8 else ""
        super().__init__(f"Overlapping mask windows: {shown}{more}", pairs=self.pairs)


class OutOfApertureError(OnnError):
    module = "geometry"


# shared argument checks

class InvalidArgumentError(OnnError, ValueError):
    pass


class ShapeError(OnnError, ValueError):
    pass


class DomainError(OnnError, ValueError):
    pass


# optics

class AliasingError(OnnError):
    """Raised when the diffraction grid violates the angular-spectrum band limit."""

    module = "optics"

    def __init__(self, message: str, required_grid_size: int) -> None:
        self.required_grid_size = int(required_grid_size)
        super().__init__(message, required_grid_size=self.required_grid_size)


# network

class ConfigurationError(OnnError):
    module = "network"


class TrainingDivergedError(OnnError):
    """Raised when the training loss becomes non-finite."""

    module = "network"

    def __init__(self, message: str, diagnostics: Dict[str, Any]) -> None:
        self.diagnostics = diagnostics
        super().__init__(message, **diagnostics)


class InconclusiveCheckError(OnnError):
    module = "network"


# datasets

class FormatError(OnnError):
    module = "datasets"


class LengthError(OnnError):
    module = "datasets"


class ConsistencyError(OnnError):
    module = "datasets"


# calibration

class CoverageError(OnnError):
    """Raised when a probe plan leaves weights unmeasured."""

    module = "calibration"

    def __init__(self, missing: Iterable[Tuple[int, int]]) -> None:
        self.missing: List[Tuple[int, int]] = sorted(missing)
        shown = ", ".join(str(p) for p in self.missing[:10])
        super().__init__(
            f"Probe plan leaves {len(self.missing)} weights unmeasured: {shown}",
            missing=self.missing,
        )


class InfeasibleCalibrationError(OnnError):
    module = "calibration"


class DivisionGuardError(OnnError):
    module = "calibration"


# energy

class InvalidModelError(OnnError):
    module = "energy"


class ResourceError(OnnError):
    """Raised when a diffraction sweep point needs a grid beyond the allowed size."""

    module = "energy"

    def __init__(self, message: str, required_grid_size: int) -> None:
        self.required_grid_size = int(required_grid_size)
        super().__init__(message, required_grid_size=self.required_grid_size)


# cli

class ConfigValidationError(OnnError):
    """Raised when a run config violates its schema; `key` names the offending entry."""

    module = "cli"

    def __init__(self, message: str, key: str = "") -> None:
        self.key = key
        super().__init__(message, key=key)


class ConfigIOError(OnnError):
    module = "cli"
