from typing import Any, Dict, List, Optional, Sequence, Tuple


class LabError(Exception):
    """
    Base class of every error raised by wblab.

    Subclasses carry the numbers needed to diagnose a failed run and expose them
    through `details()`, which the command line front end dumps to `error.json`.

    Example usage:
    ```
        >>> try:
        ...     steady_jump(0.0, 1.0, burgers_law(source=lambda u, a: 1.0 + 0.0 * u))
        ... except LabError as err:
        ...     print(type(err).__name__, err.details())
    ```
    """

    def details(self) -> Dict[str, Any]:
        return {}


class InvalidInputError(LabError, ValueError):
    pass


class PreconditionError(InvalidInputError):
    pass


class CapabilityError(LabError):
    pass


class InvalidConfigError(LabError, ValueError):
    pass


class IllPosedError(InvalidConfigError):
    pass


class ResonanceError(LabError):
    """Sonic crossing f'(u) = 0 met while integrating a standing wave."""

    def __init__(self, message: str, location: Optional[float] = None, interface: Optional[int] = None):
        super().__init__(message)
        self.location = location
        self.interface = interface

    def details(self) -> Dict[str, Any]:
        return {"location": self.location, "interface": self.interface}


class StepRejectedError(LabError):

    def __init__(self, message: str, dt: float, dt_max: float):
        super().__init__(message)
        self.dt = dt
        self.dt_max = dt_max

    def details(self) -> Dict[str, Any]:
        return {"dt": self.dt, "dt_max": self.dt_max}


class PositivityError(LabError):

    def __init__(self, message: str, index: Optional[int] = None, value: Optional[float] = None):
        super().__init__(message)
        self.index = index
        self.value = value

    def details(self) -> Dict[str, Any]:
        return {"index": self.index, "value": self.value}


class TruncationError(LabError):

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition

    def details(self) -> Dict[str, Any]:
        return {"condition": self.condition}


class NonConvergenceError(LabError):
    """Iteration failed; `trace` holds the last residuals or bracket values."""

    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = [float(t) for t in trace]

    def details(self) -> Dict[str, Any]:
        return {"trace": self.trace[-20:]}


class FoldingError(LabError):

    def __init__(self, message: str, time: float, jacobian_min: float):
        super().__init__(message)
        self.time = time
        self.jacobian_min = jacobian_min

    def details(self) -> Dict[str, Any]:
        return {"time": self.time, "jacobian_min": self.jacobian_min}


class ResolutionError(LabError):

    def __init__(self, message: str, tail_ratio: float):
        super().__init__(message)
        self.tail_ratio = tail_ratio

    def details(self) -> Dict[str, Any]:
        return {"tail_ratio": self.tail_ratio}


class WindowError(LabError):

    def __init__(self, message: str, tail: float):
        super().__init__(message)
        self.tail = tail

    def details(self) -> Dict[str, Any]:
        return {"tail": self.tail}


class ConfigError(LabError):
    """
    Every problem found in a scenario configuration, reported together.

    Args:
        problems (List[Tuple[str, str]]): (dotted key path, message) pairs.
    """

    def __init__(self, problems: List[Tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {message}" for path, message in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))

    def details(self) -> Dict[str, Any]:
        return {"problems": [{"key": p, "message": m} for p, m in self.problems]}
