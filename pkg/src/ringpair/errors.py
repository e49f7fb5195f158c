"""Exception types raised across the toolkit.

Precondition violations on physical inputs raise :class:`DomainError`;
estimator and fit failures raise the more specific types so callers (and
the CLI) can map them onto distinct exit codes.
"""


class DomainError(ValueError):
    """A physical input is outside its valid domain (e.g. Q <= 0)."""


class ConfigError(ValueError):
    """A pipeline configuration file failed schema validation."""


class TagFormatError(IOError):
    """A time-tag file is corrupt or not in a supported format."""


class EventCapExceeded(RuntimeError):
    """A simulation would emit more records than the configured safety cap."""


class NoResonance(RuntimeError):
    """No resonance dip found in the supplied transmission scan."""


class FitDiverged(RuntimeError):
    """A nonlinear fit failed to converge or is ill-conditioned."""


class FitDegenerate(RuntimeError):
    """The design matrix of a least-squares fit is rank deficient."""


class InsufficientData(ValueError):
    """Too few data points for the requested fit order."""


class ModeNumberUndefined(ValueError):
    """g2(0) <= 1: the effective-mode-number inversion has no solution."""


class NoTrueCoincidences(ValueError):
    """Coincidences do not exceed accidentals; efficiency inversion impossible."""


class InconsistentBudget(ValueError):
    """A loss budget implies an emission probability outside (0, 1]."""


class UnstableEstimate(RuntimeError):
    """Too many Monte Carlo resampling trials failed to produce an estimate."""
