"""Bounded band-limited signal estimation from nonuniform noisy samples.

A signal ``s(x)`` with spectral support inside ``]-1/2, 1/2[`` and
``|s(x)| <= A`` is estimated from samples ``z_m = s(x_m) + eps_m`` with the
linear estimator

    s_hat(x) = g(x)^T (G + mu I)^{-1} z,     mu = sigma^2 / A^2,

where ``G[m, m'] = sinc(x_m - x_m')`` and ``g(x)[m] = sinc(x - x_m)``.  The
coefficient vector minimizes an upper bound on the expected squared error,
and the minimum value of that bound is ``A^2 (1 - g(x)^T (G + mu I)^{-1} g(x))``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector, check_real_vector, check_scalar
from .exceptions import DuplicateAbscissa, SingularSystem

DEFAULT_EPS_X = 1e-9
# relative ridge used when the un-regularized Gram matrix is not numerically SPD
FALLBACK_RIDGE = 1e-12
_SERIES_CUTOFF = 1e-6


def sinc(x):
    """Normalized sinc, ``sin(pi x) / (pi x)``.

    Uses a 4th order Taylor series for ``|x| <= 1e-6`` so the removable
    singularity at 0 is handled without loss of relative accuracy.

    Parameters
    ----------
    x : float or array_like
        Finite real abscissas.

    Returns
    -------
    float or ndarray
        Same shape as ``x``.
    """
    arr = np.asarray(x, dtype=float)
    px = np.pi * arr
    small = np.abs(arr) <= _SERIES_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0 - px**2 / 6.0 + px**4 / 120.0, np.sin(px) / px)
    if out.ndim == 0:
        return float(out)
    return out


def _check_distinct(abscissas, eps_x):
    if abscissas.size < 2:
        return
    order = np.sort(abscissas)
    gaps = np.diff(order)
    i = int(np.argmin(gaps))
    if gaps[i] <= eps_x:
        raise DuplicateAbscissa(
            f"abscissas {order[i]!r} and {order[i + 1]!r} are closer than "
            f"eps_x={eps_x:g}")


def build_gram(abscissas, eps_x=DEFAULT_EPS_X):
    """Sinc Gram matrix ``G[m, m'] = sinc(x_m - x_m')``.

    The result is symmetric by construction (only the upper triangle is
    evaluated) and has an exact unit diagonal.

    Raises
    ------
    DuplicateAbscissa
        If two abscissas are within ``eps_x`` of each other.
    """
    x = check_real_vector(abscissas, "abscissas")
    _check_distinct(x, eps_x)
    diff = x[:, None] - x[None, :]
    upper = np.triu(sinc(diff), k=1)
    gram = upper + upper.T
    np.fill_diagonal(gram, 1.0)
    return gram


def kernel_identity_residual(y, y_prime, truncation):
    """Residual of the truncated sinc reproducing identity.

    Returns ``|sum_{p=-P}^{P} sinc(y - p) sinc(y' - p) - sinc(y - y')|``.
    Only used to check the kernel identity numerically.
    """
    if int(truncation) < 1:
        raise ValueError(f"truncation must be >= 1, got {truncation}")
    p = np.arange(-int(truncation), int(truncation) + 1, dtype=float)
    terms = sinc(y - p) * sinc(y_prime - p)
    return abs(math.fsum(terms) - sinc(y - y_prime))


@dataclass(frozen=True)
class EstimatorDesign:
    """Abscissas, regularization and the cached factorization of ``G + mu I``.

    Build instances with :meth:`from_abscissas`; arrays are read-only so a
    design can be shared between threads.

    Attributes
    ----------
    abscissas : ndarray of shape (M,)
    mu : float
        Requested regularization ``sigma^2 / A^2``.
    gram : ndarray of shape (M, M)
    cho : ndarray of shape (M, M)
        Lower Cholesky factor of ``G + ridge I``.
    ridge : float
        Diagonal loading actually applied. Equals ``mu`` unless the
        ``mu = 0`` fallback was needed.
    """

    abscissas: np.ndarray
    mu: float
    gram: np.ndarray
    cho: np.ndarray
    ridge: float

    @classmethod
    def from_abscissas(cls, abscissas, mu=0.0, eps_x=DEFAULT_EPS_X):
        x = check_real_vector(abscissas, "abscissas")
        mu = check_scalar(mu, "mu", min_val=0.0)
        gram = build_gram(x, eps_x=eps_x)
        m = x.size
        ridge = mu
        try:
            cho = linalg.cholesky(gram + mu * np.eye(m), lower=True)
        except linalg.LinAlgError as exc:
            if mu > 0:
                raise SingularSystem(f"G + {mu:g} I is not positive definite") from exc
            ridge = FALLBACK_RIDGE * np.trace(gram) / m
            warnings.warn(
                f"sinc Gram matrix is numerically singular; using ridge {ridge:.3g}",
                RuntimeWarning, stacklevel=2)
            try:
                cho = linalg.cholesky(gram + ridge * np.eye(m), lower=True)
            except linalg.LinAlgError as exc2:
                raise SingularSystem(
                    f"G + {ridge:g} I is not positive definite") from exc2
        for arr in (x, gram, cho):
            arr.setflags(write=False)
        return cls(abscissas=x, mu=mu, gram=gram, cho=cho, ridge=float(ridge))

    @property
    def n_samples(self):
        return self.abscissas.size

    def kernel_vector(self, x):
        """``g(x)``, shape ``(n_x, M)`` for array input or ``(M,)`` for a scalar."""
        xa = np.asarray(x, dtype=float)
        g = sinc(xa[..., None] - self.abscissas)
        return g

    def solve(self, rhs):
        """Solve ``(G + ridge I) c = rhs`` for ``rhs`` of shape (M,) or (M, k)."""
        return linalg.cho_solve((self.cho, True), rhs)


def design_coefficients(design, x):
    """Optimal real coefficients ``c(x) = (G + mu I)^{-1} g(x)``.

    Returns shape ``(M,)`` for scalar ``x`` and ``(n_x, M)`` for arrays.
    """
    g = design.kernel_vector(x)
    if g.ndim == 1:
        return design.solve(g)
    return design.solve(g.T).T


@dataclass(frozen=True)
class SampleVector:
    """Noisy complex samples ``z_m`` with their noise and amplitude bounds.

    ``noise_variance`` is the total variance of each complex noise sample.
    """

    values: np.ndarray
    noise_variance: float
    amplitude_bound: float

    def __post_init__(self):
        object.__setattr__(self, "values", check_complex_vector(self.values, name="values"))
        object.__setattr__(self, "noise_variance",
                           check_scalar(self.noise_variance, "noise_variance", min_val=0.0))
        object.__setattr__(self, "amplitude_bound",
                           check_scalar(self.amplitude_bound, "amplitude_bound",
                                        min_val=0.0, include_min=False))

    @property
    def mu(self):
        return self.noise_variance / self.amplitude_bound**2


def _check_paired(design, samples):
    if samples.values.shape[0] != design.n_samples:
        raise ValueError(f"{samples.values.shape[0]} samples for a design with "
                         f"{design.n_samples} abscissas")


def estimate(design, samples, x):
    """Linear estimate ``c(x)^T z`` of the signal at ``x``."""
    _check_paired(design, samples)
    c = design_coefficients(design, x)
    out = c @ samples.values
    if np.ndim(out) == 0:
        return complex(out)
    return out


def error_bound(design, amplitude_bound, x):
    """Bound on the expected squared error, ``A^2 (1 - g(x)^T c(x))``.

    Valid for every signal whose integer-grid samples satisfy ``|s(p)| <= A``
    when the design uses ``mu = sigma^2 / A^2``.  Rounding can push the bound a
    hair below zero close to a sample when ``mu = 0``; it is clipped at 0.
    """
    a = check_scalar(amplitude_bound, "amplitude_bound", min_val=0.0, include_min=False)
    g = design.kernel_vector(x)
    c = design_coefficients(design, x)
    quad = np.sum(g * c, axis=-1)
    out = np.maximum(a**2 * (1.0 - quad), 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def quadratic_form(design, c, x):
    """Right-hand side of the squared-error bound for arbitrary coefficients.

    ``c^T (G + mu I) c - 2 c^T g(x) + 1`` (in units of ``A^2``), evaluated
    with the design's requested ``mu``.
    """
    c = np.asarray(c, dtype=float)
    g = design.kernel_vector(x)
    return float(c @ design.gram @ c + design.mu * (c @ c) - 2.0 * (c @ g) + 1.0)


class SincInterpolator(BaseEstimator):
    """Regularized sinc-series estimator for bounded band-limited signals.

    Parameters
    ----------
    noise_variance : float, default=0.0
        Total variance of each complex noise sample.
    amplitude_bound : float, default=1.0
        Bound ``A`` on the signal modulus.
    eps_x : float, default=1e-9
        Minimum separation between abscissas.

    Attributes
    ----------
    design_ : EstimatorDesign
    samples_ : SampleVector

    Examples
    --------
    >>> import numpy as np
    >>> est = SincInterpolator().fit(np.arange(4.0), [1, 0, 0, 0])
    >>> round(float(est.predict([0.5])[0].real), 6)
    0.63662
    """

    def __init__(self, noise_variance=0.0, amplitude_bound=1.0, eps_x=DEFAULT_EPS_X):
        self.noise_variance = noise_variance
        self.amplitude_bound = amplitude_bound
        self.eps_x = eps_x

    def fit(self, X, y):
        x = check_real_vector(X, "X")
        self.samples_ = SampleVector(check_complex_vector(y, x.size),
                                     self.noise_variance, self.amplitude_bound)
        self.design_ = EstimatorDesign.from_abscissas(x, self.samples_.mu, eps_x=self.eps_x)
        self.n_features_in_ = 1
        return self

    def coefficients(self, X):
        check_is_fitted(self, "design_")
        return design_coefficients(self.design_, check_real_vector(X, "X"))

    def predict(self, X):
        check_is_fitted(self, "design_")
        return estimate(self.design_, self.samples_, check_real_vector(X, "X"))

    def error_bound(self, X):
        """Squared-error bound at each abscissa in ``X``."""
        check_is_fitted(self, "design_")
        return error_bound(self.design_, self.amplitude_bound, check_real_vector(X, "X"))
