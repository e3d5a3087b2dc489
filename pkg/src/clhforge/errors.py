class ClhError(Exception):
    """Base class for everything this package raises on purpose."""


class StructureError(ClhError, ValueError):
    """An instance is malformed (bad support, wrong matrix side, ...)."""

    def __init__(self, message: str, term: int | None = None):
        super().__init__(message)
        self.term = term


class SchemaError(ClhError, ValueError):
    """A serialized document does not follow its schema.

    ``path`` points at the offending field, e.g. ``terms/3/matrix``.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class BudgetExceeded(ClhError, RuntimeError):
    """A desk-scale computation would exceed its configured size budget."""


class DecompositionError(ClhError, RuntimeError):
    """A numerical algebra decomposition failed its residual checks."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class IsolationError(ClhError, RuntimeError):
    """The isolation precondition of a decomposition does not hold."""

    def __init__(self, message: str, term: int | None = None):
        super().__init__(message)
        self.term = term


class OracleRefused(ClhError, RuntimeError):
    """A subspace oracle could not supply a block choice for a step."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
