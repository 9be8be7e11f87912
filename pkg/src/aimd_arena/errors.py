"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input does not satisfy a documented precondition.

    ``field`` names the offending parameter when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ModelInconsistencyError(RuntimeError):
    """The model reached a state its assumptions rule out.

    Raised for violations of the post-drop interior condition, unbounded
    rate growth, and replicator integrations leaving the simplex.
    """
