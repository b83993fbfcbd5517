"""Exceptions raised by the estimators."""

import numpy as np


class DuplicateAbscissa(ValueError):
    """Two sample abscissas are closer than the configured tolerance."""


class SingularSystem(np.linalg.LinAlgError):
    """The regularized sinc Gram system could not be factorized."""


class IdentifiabilityViolation(ValueError):
    """A TDL model has more taps than there are pilot observations."""


class RankDeficient(np.linalg.LinAlgError):
    """The TDL least-squares problem is numerically rank deficient."""
