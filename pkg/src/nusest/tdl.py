"""Tapped-delay-line (TDL) maximum-likelihood channel estimation.

The spectrum is approximated by a truncated Fourier series

    H(f) ~= T * sum_{q=q1}^{q2} h_q exp(-j 2 pi q T f),

and the tap weights are the least-squares (deterministic ML) fit to the pilot
samples.  Interpolation then becomes a fixed linear map of the pilot samples,
exposed through :func:`tdl_weights`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector, check_real_vector, check_scalar
from .exceptions import IdentifiabilityViolation, RankDeficient

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class TdlModelSpec:
    """Tap spacing ``T`` (seconds) and the inclusive tap index range ``[q1, q2]``."""

    spacing: float
    q1: int
    q2: int

    def __post_init__(self):
        check_scalar(self.spacing, "spacing", min_val=0.0, include_min=False)
        if int(self.q2) < int(self.q1):
            raise ValueError(f"empty tap range [{self.q1}, {self.q2}]")
        object.__setattr__(self, "q1", int(self.q1))
        object.__setattr__(self, "q2", int(self.q2))

    @classmethod
    def causal(cls, n_taps, spacing):
        return cls(spacing, 0, n_taps - 1)

    @classmethod
    def centered(cls, n_taps, spacing, delay_spread):
        """Window of ``n_taps`` taps centred on the middle of ``]0, delay_spread[``."""
        center = delay_spread / (2.0 * spacing)
        q1 = math.floor(center - (n_taps - 1) / 2.0 + 0.5)
        return cls(spacing, q1, q1 + n_taps - 1)

    @property
    def n_taps(self):
        return self.q2 - self.q1 + 1

    @property
    def tap_indices(self):
        return np.arange(self.q1, self.q2 + 1)


def steering(spec, f):
    """Rows ``a(f)[q] = T exp(-j 2 pi q T f)``, shape ``f.shape + (n_taps,)``."""
    fa = np.asarray(f, dtype=float)
    return spec.spacing * np.exp(-2j * np.pi * spec.spacing * fa[..., None] * spec.tap_indices)


def build_design_matrix(spec, pilot_freqs):
    """``W[m, q] = T exp(-j 2 pi q T f_m)`` for the pilot frequencies.

    Raises
    ------
    IdentifiabilityViolation
        If the model has more taps than pilots.
    """
    f = check_real_vector(pilot_freqs, "pilot_freqs")
    if spec.n_taps > f.size:
        raise IdentifiabilityViolation(
            f"{spec.n_taps} taps cannot be identified from {f.size} pilots")
    return steering(spec, f)


def _qr(spec, pilot_freqs):
    w = build_design_matrix(spec, pilot_freqs)
    q, r = linalg.qr(w, mode="economic")
    cond = np.linalg.cond(r) ** 2
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise RankDeficient(f"normal equations condition number {cond:.3g} exceeds "
                            f"{MAX_CONDITION:g} for taps [{spec.q1}, {spec.q2}]")
    return q, r


@dataclass(frozen=True)
class TdlFit:
    """Least-squares tap weights for a TDL model."""

    tap_weights: np.ndarray
    model: TdlModelSpec

    def predict(self, f):
        out = steering(self.model, f) @ self.tap_weights
        if np.ndim(out) == 0:
            return complex(out)
        return out


def ml_fit(obs, spec):
    """Deterministic ML (least-squares) tap weights from pilot observations.

    Solved through a QR factorization of the design matrix.
    """
    q, r = _qr(spec, obs.frequencies)
    h = linalg.solve_triangular(r, q.conj().T @ obs.values)
    return TdlFit(h, spec)


def tdl_weights(spec, pilot_freqs, f):
    """Interpolation weights with ``H_hat(f) = w(f) @ V``.

    ``w(f)^T = a(f)^T (W^H W)^{-1} W^H``.  Returns shape (M,) for scalar ``f``
    and (n_f, M) otherwise.
    """
    q, r = _qr(spec, pilot_freqs)
    a = steering(spec, f)
    # a R^{-1} via a triangular solve on the transposed system
    ar = linalg.solve_triangular(r, a.reshape(-1, spec.n_taps).T, trans="T").T
    w = ar @ q.conj().T
    return w.reshape(np.shape(f) + (q.shape[0],))


def sweep_tap_count(candidates, score, rtol=1e-9, atol=1e-12):
    """Pick the candidate model with the smallest score.

    Parameters
    ----------
    candidates : iterable of TdlModelSpec
    score : callable
        ``score(spec) -> float``; lower is better.  Candidates raising
        :class:`RankDeficient` or :class:`IdentifiabilityViolation` are skipped.

    Returns
    -------
    best : TdlModelSpec
    scores : dict
        ``n_taps -> score`` for every candidate that could be evaluated.

    Near-ties (within ``atol + rtol * |best|``) go to the model with fewer taps.
    """
    evaluated = []
    for spec in candidates:
        try:
            evaluated.append((spec, float(score(spec))))
        except (RankDeficient, IdentifiabilityViolation):
            continue
    if not evaluated:
        raise ValueError("no candidate TDL model could be evaluated")
    evaluated.sort(key=lambda item: item[0].n_taps)
    best, best_score = evaluated[0]
    for spec, s in evaluated[1:]:
        if s < best_score - (atol + rtol * abs(best_score)):
            best, best_score = spec, s
    return best, {spec.n_taps: s for spec, s in evaluated}


class TdlMLEstimator(BaseEstimator):
    """TDL least-squares channel estimator.

    Parameters
    ----------
    spacing : float
        Tap spacing ``T`` in seconds.
    n_taps : int
    first_tap : int, default=0
        Index ``q1`` of the first tap.
    """

    def __init__(self, spacing=1.0, n_taps=1, first_tap=0):
        self.spacing = spacing
        self.n_taps = n_taps
        self.first_tap = first_tap

    def _spec(self):
        return TdlModelSpec(self.spacing, self.first_tap, self.first_tap + self.n_taps - 1)

    def fit(self, X, y):
        f = check_real_vector(X, "X")
        v = check_complex_vector(y, f.size)
        spec = self._spec()
        q, r = _qr(spec, f)
        self.fit_ = TdlFit(linalg.solve_triangular(r, q.conj().T @ v), spec)
        self.tap_weights_ = self.fit_.tap_weights
        self.pilot_frequencies_ = f
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(check_real_vector(X, "X"))

    def weights(self, X):
        check_is_fitted(self, "fit_")
        return tdl_weights(self.fit_.model, self.pilot_frequencies_, check_real_vector(X, "X"))
