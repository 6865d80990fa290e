"""Exception hierarchy.

Every error carries a short ``category`` used by the command line to pick
an exit code and a machine-parsable prefix.
"""


class CCBMError(Exception):
    category = "error"
    exit_code = 1


class ParseError(CCBMError):
    category = "parse"
    exit_code = 2


class ValidationError(ParseError):
    category = "validation"


class SolverError(CCBMError):
    category = "solver"
    exit_code = 3


class AssemblyError(SolverError):
    category = "assembly"


class SingularMatrixError(SolverError):
    category = "singular"


class DegenerateGradientError(SolverError):
    category = "degenerate-gradient"


class MeshError(CCBMError):
    category = "mesh"
    exit_code = 4


class GeometryError(MeshError):
    category = "geometry"


class MeshingError(MeshError):
    category = "meshing"


class InvertedElementError(MeshError):
    category = "inverted-element"


class StallError(CCBMError):
    category = "stall"
    exit_code = 5


class IoError(CCBMError):
    category = "io"
    exit_code = 1
