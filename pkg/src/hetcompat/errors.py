"""Exception hierarchy shared by all modules."""


class HetCompatError(Exception):
    """Base class for every error raised by the package."""


class InputError(HetCompatError):
    """Invalid user input; the CLI maps these to exit code 2."""


class NumericFailure(HetCompatError):
    """A numerical routine could not reach its tolerance; CLI exit code 3."""


# measures
class InvalidMeasure(InputError):
    pass


class NotNormalized(InputError):
    pass


class SpaceMismatch(InputError):
    pass


class NotDominated(InputError):
    pass


# convex order
class DimMismatch(InputError):
    pass


class ArityMismatch(InputError):
    pass


# compatibility
class CodomainMismatch(InputError):
    pass


class Incompatible(HetCompatError):
    """The requested object does not exist because the order check failed."""


class InvalidRefinement(InputError):
    pass


class ModeError(InputError):
    pass


class TooLarge(InputError):
    pass


class OracleViolation(HetCompatError):
    """Two independent decision procedures disagreed; always a bug."""


# optimisation
class Divergent(NumericFailure):
    pass


class InvalidProbability(InputError):
    pass


class NotMonotone(InputError):
    pass


class BracketError(NumericFailure):
    pass


class NotSingular(InputError):
    pass


class DomainError(InputError):
    pass


# girsanov
class HorizonMismatch(InputError):
    pass


class HypothesisViolated(InputError):
    pass


class GridError(InputError):
    pass
