"""Exception hierarchy shared by all solvers."""


class PressrecError(Exception):
    """Base class for every error raised by the toolkit."""


class OutOfDomainError(PressrecError):
    def __init__(self, index, point):
        self.index = int(index)
        self.point = tuple(float(v) for v in point)
        super().__init__(f"target point {self.index} at {self.point} lies outside the grid")


class ShapeError(PressrecError):
    pass


class EmptyFieldError(PressrecError):
    pass


class DegenerateInputError(PressrecError):
    pass


class DuplicatePointError(PressrecError):
    def __init__(self, pairs):
        self.pairs = [tuple(int(i) for i in p) for p in pairs]
        super().__init__(f"duplicate points at indices {self.pairs[:10]}")


class UnsupportedMeshError(PressrecError):
    pass


class UnsupportedGridError(PressrecError):
    pass


class SymmetryError(PressrecError):
    def __init__(self, asymmetry):
        self.asymmetry = float(asymmetry)
        super().__init__(f"system is not symmetric (relative asymmetry {self.asymmetry:.3e})")


class DivergenceError(PressrecError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)


class TopologyError(PressrecError):
    pass


class CoincidentPointError(PressrecError):
    pass


class RankDeficiencyError(PressrecError):
    def __init__(self, rank, n):
        self.rank = int(rank)
        self.n = int(n)
        super().__init__(f"boundary operator rank {self.rank} is too low for {self.n} elements")


class DegenerateNormalizationError(PressrecError):
    pass


class ConfigError(PressrecError):
    """Raised for invalid run configurations (maps to CLI exit code 2)."""
