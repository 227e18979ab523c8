"""Exception types raised by the reduction toolkit."""


class ReductionError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ReductionError, ValueError):
    """Operands have incompatible torus or matrix dimensions."""


class NearResonanceError(ReductionError):
    """A Fourier divisor fell below the admissible floor.

    Attributes
    ----------
    k : tuple of int
        Offending lattice mode.
    divisor : float
        Magnitude of the divisor at that mode.
    """

    def __init__(self, k, divisor, floor):
        self.k = tuple(int(x) for x in k)
        self.divisor = float(divisor)
        self.floor = float(floor)
        super().__init__(
            f"divisor |{self.divisor:.3e}| at mode k={self.k} is below {self.floor:.3e}"
        )


class SingularGridError(ReductionError):
    """A matrix function is (numerically) singular at a grid point."""

    def __init__(self, theta, det):
        self.theta = tuple(float(t) for t in theta)
        self.det = float(det)
        super().__init__(f"|det| = {self.det:.3e} at theta = {self.theta}")


class NotNilpotentError(ReductionError):
    """The input matrix is not nilpotent within the rank tolerance."""


class EchelonError(ReductionError):
    """The input is not in (reduced) column echelon form, or a pivot is too small."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class ScheduleError(ReductionError):
    """A threshold schedule violates its summability condition."""


class SeparationError(ReductionError):
    """Two spectral clusters are not separated as required."""


class StructureMismatchError(ReductionError):
    """Conjugate Jordan blocks do not carry the same block structure."""


class StarPropertyError(ReductionError):
    """Some eigenvalue has no resonance link at all."""

    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"nodes without any link: {self.nodes}")


class DuplicateWitnessError(ReductionError):
    """Two distinct lattice witnesses realise the same link within rho."""

    def __init__(self, pair, k1, k2):
        self.pair = pair
        self.k1 = tuple(k1)
        self.k2 = tuple(k2)
        super().__init__(f"pair {pair}: witnesses {self.k1} and {self.k2} both within rho")


class HypothesisError(ReductionError):
    """A quantitative hypothesis failed in strict mode.

    Attributes
    ----------
    name : str
        Name of the failed inequality.
    step : int or None
        Pipeline step index, when raised from a pipeline.
    """

    def __init__(self, name, lhs=None, rhs=None, step=None):
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(f"hypothesis '{name}' failed{where}: lhs={lhs!r} rhs={rhs!r}")


class CertificateError(ReductionError):
    """A certified inequality failed in strict mode."""

    def __init__(self, name, lhs=None, rhs=None):
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"certificate '{name}' failed: lhs={lhs!r} rhs={rhs!r}")


class MalformedInputError(ReductionError, ValueError):
    """Input file or object does not follow the expected schema."""
