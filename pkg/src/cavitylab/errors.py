"""Exception hierarchy.

Every error carries a ``code`` that maps onto the CLI's stable stderr prefix
(``ERR_PARSE``, ``ERR_PARAM``, ``ERR_NUMERIC``).
"""


class CavityError(Exception):
    code = "ERR_NUMERIC"


class InvalidParameter(CavityError, ValueError):
    code = "ERR_PARAM"


class ParseError(CavityError, ValueError):
    code = "ERR_PARSE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GenerationFailure(CavityError):
    pass


class TooLarge(CavityError):
    code = "ERR_PARAM"


class DegenerateMeasure(CavityError):
    pass


class NotATree(CavityError, ValueError):
    code = "ERR_PARAM"


class ReducibleMatrix(CavityError):
    pass


class DegenerateUpdate(CavityError):
    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class InvalidPolytopePoint(CavityError, ValueError):
    code = "ERR_PARAM"


class InvalidDirection(CavityError, ValueError):
    code = "ERR_PARAM"
