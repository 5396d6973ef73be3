"""Exception types shared across the package."""


class DegenerateParameterError(ValueError):
    """Parameters hit a degenerate configuration (sinh(eta) = 0, xi = 0,
    coinciding inhomogeneities, ...) for which the construction is undefined."""


class PoleError(ArithmeticError):
    """Evaluation requested at (or too close to) a pole of a Q-ratio."""


class SingularNormalizationError(ArithmeticError):
    """A normalization factor (Gram entry, vacuum scalar, ...) vanished."""


class ConsistencyError(RuntimeError):
    """Two constructions that must agree (dual transfer forms, commuting
    family members, certified eigenpairs) failed their internal cross-check."""


class SolverError(RuntimeError):
    """The dense eigensolver or a root solve failed outright."""
