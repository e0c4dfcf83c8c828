"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes:
ConfigError -> 2, DataError -> 3, NumericalError -> 4.
"""


class RRBError(Exception):
    pass


class ConfigError(RRBError, ValueError):
    """Invalid option or configuration value."""


class DataError(RRBError, ValueError):
    """Input data that fails validation."""


class NumericalError(RRBError, RuntimeError):
    """Divergence, non-convergence or an unreachable numerical target."""


# OBJ parsing
class ObjParseError(DataError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class MalformedVertexError(ObjParseError):
    pass


class FaceIndexError(ObjParseError):
    pass


class ShortFaceError(ObjParseError):
    pass


class EmptyMeshError(ObjParseError):
    pass


class BehindCameraError(DataError):
    def __init__(self, index, z, z_near):
        self.index = index
        self.z = z
        super().__init__(f"vertex {index} has depth {z:.6g} <= z_near {z_near:g}")


class EmptyMaskError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class FrameMismatchError(DataError):
    pass


class TrajectoryTooShortError(DataError):
    pass


class ScaleInferenceError(NumericalError):
    pass


class UnreachableScaleError(ScaleInferenceError):
    pass


class NonMonotoneScaleError(ScaleInferenceError):
    pass


class ScaleNotConvergedError(ScaleInferenceError):
    pass
