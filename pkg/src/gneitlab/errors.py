"""Exception types raised across the package."""


class GneitlabError(Exception):
    """Base class for all package errors."""


class InvalidParams(GneitlabError, ValueError):
    """Parameters fall outside a family's certified validity range."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class Unsupported(GneitlabError):
    """The requested computation is outside what the implementation covers."""


class QuadratureNotConverged(GneitlabError):
    pass


class RankNotFound(GneitlabError):
    def __init__(self, qmax):
        super().__init__(f"no nonzero Hermite coefficient found up to order {qmax}")
        self.qmax = qmax


class HermiteOverflow(GneitlabError, OverflowError):
    pass


class EmbeddingFailed(GneitlabError):
    def __init__(self, lambda_min, threshold, discarded_mass=None):
        msg = (f"circulant embedding not nonnegative definite: lambda_min={lambda_min:.3e}, "
               f"threshold={threshold:.3e}")
        if discarded_mass is not None:
            msg += f", discarded spectral mass={discarded_mass:.3e}"
        super().__init__(msg)
        self.lambda_min = lambda_min
        self.threshold = threshold
        self.discarded_mass = discarded_mass


class NonFinite(GneitlabError, ArithmeticError):
    pass


class VarUndefined(GneitlabError):
    pass


class SeriesTail(GneitlabError):
    pass


class SingularityBudget(GneitlabError):
    def __init__(self, rel_stderr, budget):
        super().__init__(f"relative stderr {rel_stderr:.3%} exceeds 5% at budget {budget}")
        self.rel_stderr = rel_stderr
        self.budget = budget


class InvalidAlpha(GneitlabError, ValueError):
    pass


class SeriesDiverging(GneitlabError):
    pass


class InversionUnstable(GneitlabError):
    pass


class CDFUnavailable(GneitlabError):
    pass


class DegenerateLadder(GneitlabError, ValueError):
    pass


class ConfigError(GneitlabError, ValueError):
    pass
