"""Sparse multipath channels, pilot observations and unit-band normalization.

A channel ``h(t) = sum_k a_k delta(t - tau_k)`` with every delay inside
``]0, T_h[`` has spectrum ``H(f) = sum_k a_k exp(-j 2 pi tau_k f)``.  With
``x = f T_h`` the rotated spectrum ``s(x) = H(x / T_h) exp(j pi x)`` has its
spectral content at ``1/2 - tau_k / T_h``, strictly inside ``]-1/2, 1/2[``,
so :mod:`nusest.sinc` applies directly.
"""

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector, check_real_vector, check_scalar
from .sinc import DEFAULT_EPS_X, SincInterpolator

CHANNEL_STREAM = 0
NOISE_STREAM = 1
_ENDPOINT_GUARD = 1e-12
_POISSON_TAIL = 1e-12


def stream_rng(seed, stream, index):
    """Independent generator for ``(seed, stream, index)``.

    Each trial of each stream gets its own child of ``SeedSequence(seed)``,
    so a single trial can be regenerated without replaying earlier ones.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SparseChannel:
    """Multipath channel as (delay, complex amplitude) pairs.

    Delays are in seconds and must lie strictly inside ``]0, delay_spread[``.
    """

    delays: np.ndarray
    amplitudes: np.ndarray
    delay_spread: float

    def __post_init__(self):
        tau = np.atleast_1d(check_real_vector(np.atleast_1d(self.delays), "delays"))
        amp = check_complex_vector(np.atleast_1d(self.amplitudes), tau.size, "amplitudes")
        th = check_scalar(self.delay_spread, "delay_spread", min_val=0.0, include_min=False)
        if tau.size < 1:
            raise ValueError("a channel needs at least one tap")
        if np.any(tau <= 0.0) or np.any(tau >= th):
            raise ValueError(f"tap delays must lie in ]0, {th:g}[")
        tau.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "delays", tau)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "delay_spread", th)

    @property
    def n_taps(self):
        return self.delays.size


def channel_spectrum(ch, f):
    """Exact spectrum ``H(f)`` of a sparse channel."""
    fa = np.asarray(f, dtype=float)
    out = np.exp(-2j * np.pi * fa[..., None] * ch.delays) @ ch.amplitudes
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class PilotGrid:
    """Pilot carrier indices and frequency spacing (Hz)."""

    carrier_indices: np.ndarray
    frequency_spacing: float = 1.0

    def __post_init__(self):
        idx = np.asarray(self.carrier_indices)
        if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
            raise ValueError("carrier_indices must be a 1-D integer array")
        if idx.size < 2:
            raise ValueError("a pilot grid needs at least 2 pilots")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("carrier_indices must be strictly increasing")
        idx = idx.astype(np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "carrier_indices", idx)
        object.__setattr__(self, "frequency_spacing",
                           check_scalar(self.frequency_spacing, "frequency_spacing",
                                        min_val=0.0, include_min=False))

    @classmethod
    def regular(cls, n_pilots, step, frequency_spacing=1.0, offset=0):
        return cls(offset + step * np.arange(n_pilots), frequency_spacing)

    @property
    def frequencies(self):
        return self.carrier_indices * self.frequency_spacing

    def __len__(self):
        return self.carrier_indices.size


@dataclass(frozen=True)
class PilotObservations:
    """Noisy channel samples ``V_m = H(f_m) + E_m`` at the pilot frequencies."""

    grid: PilotGrid
    values: np.ndarray
    noise_variance: float

    def __post_init__(self):
        v = check_complex_vector(self.values, len(self.grid), "values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "noise_variance",
                           check_scalar(self.noise_variance, "noise_variance", min_val=0.0))

    @property
    def frequencies(self):
        return self.grid.frequencies


@dataclass(frozen=True)
class ChannelModelParams:
    """Random channel model: Poisson tap count, exponential power profile.

    ``K - 1 ~ Poisson(lam)``; ``a_k ~ CN(0, sigma_a2 * exp(-2 (k - 1) / K))``;
    delays uniform over the delay spread.
    """

    delay_spread: float
    sigma_a2: float
    lam: float = 9.0
    seed: int = 0

    def __post_init__(self):
        check_scalar(self.delay_spread, "delay_spread", min_val=0.0, include_min=False)
        check_scalar(self.sigma_a2, "sigma_a2", min_val=0.0, include_min=False)
        check_scalar(self.lam, "lam", min_val=0.0, include_min=False)


def _uniform_open(rng, n, upper):
    tau = rng.uniform(0.0, upper, n)
    guard = _ENDPOINT_GUARD * upper
    bad = (tau <= guard) | (tau >= upper - guard)
    while np.any(bad):
        tau[bad] = rng.uniform(0.0, upper, int(bad.sum()))
        bad = (tau <= guard) | (tau >= upper - guard)
    return tau


def draw_channel(params, rng=None):
    """Draw one random channel.

    ``rng`` defaults to a generator seeded with ``params.seed``, so two calls
    with the same params return the same channel.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    k = int(rng.poisson(params.lam)) + 1
    power = params.sigma_a2 * np.exp(-2.0 * np.arange(k) / k)
    amp = np.sqrt(power / 2.0) * (rng.standard_normal(k) + 1j * rng.standard_normal(k))
    tau = _uniform_open(rng, k, params.delay_spread)
    return SparseChannel(tau, amp, params.delay_spread)


def _profile_sum(k):
    # sum_{i=0}^{k-1} exp(-2 i / k) in closed form
    return -math.expm1(-2.0) / -math.expm1(-2.0 / k)


def calibrate_sigma_a(lam, target_power=1.0):
    """Base tap variance giving ``E|H(f)|^2 = target_power``.

    ``E|H(f)|^2 = sigma_a2 * E_K[sum_k exp(-2 (k - 1) / K)]``, independent of
    ``f``.  The expectation over ``K - 1 ~ Poisson(lam)`` is a truncated series,
    cut where the cumulative probability exceeds ``1 - 1e-12``.
    """
    lam = check_scalar(lam, "lam", min_val=0.0, include_min=False)
    target_power = check_scalar(target_power, "target_power", min_val=0.0,
                                include_min=False)
    n_max = int(stats.poisson.isf(_POISSON_TAIL, lam)) + 1
    n = np.arange(n_max + 1)
    pmf = stats.poisson.pmf(n, lam)
    expected = math.fsum(p * _profile_sum(int(i) + 1) for i, p in zip(n, pmf))
    expected /= math.fsum(pmf)
    return target_power / expected


def observe_pilots(ch, grid, noise_variance, rng=None):
    """Sample the channel spectrum at the pilots with circular Gaussian noise."""
    noise_variance = check_scalar(noise_variance, "noise_variance", min_val=0.0)
    h = channel_spectrum(ch, grid.frequencies)
    if noise_variance > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        m = len(grid)
        e = np.sqrt(noise_variance / 2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        h = h + e
    return PilotObservations(grid, h, noise_variance)


def normalize_to_unit_band(obs, delay_spread):
    """Map pilot observations onto the unit-band problem.

    Returns ``(x, z)`` with ``x_m = f_m T_h`` and ``z_m = V_m exp(j pi x_m)``.
    The rotation has unit modulus, so the noise variance is unchanged.
    """
    th = check_scalar(delay_spread, "delay_spread", min_val=0.0, include_min=False)
    x = obs.frequencies * th
    z = obs.values * np.exp(1j * np.pi * x)
    return x, z


def denormalize_estimate(s_hat, f, delay_spread):
    """Inverse of the unit-band mapping: ``H(f) = s(f T_h) exp(-j pi f T_h)``."""
    x = np.asarray(f, dtype=float) * delay_spread
    out = np.asarray(s_hat) * np.exp(-1j * np.pi * x)
    if out.ndim == 0:
        return complex(out)
    return out


class PilotChannelEstimator(BaseEstimator):
    """Channel spectrum estimator from pilot samples, for a known delay spread.

    Fits :class:`~nusest.sinc.SincInterpolator` on the unit-band version of
    the pilot data and maps predictions back to frequency.

    Parameters
    ----------
    delay_spread : float
        ``T_h`` in seconds; the impulse response must lie in ``]0, T_h[``.
    noise_variance : float, default=0.0
        Total complex noise variance per pilot. ``0`` gives the noise-blind
        variant.
    amplitude_bound : float, default=1.0
        Bound on ``|H(f)|``.
    eps_x : float, default=1e-9
    """

    def __init__(self, delay_spread=1.0, noise_variance=0.0, amplitude_bound=1.0,
                 eps_x=DEFAULT_EPS_X):
        self.delay_spread = delay_spread
        self.noise_variance = noise_variance
        self.amplitude_bound = amplitude_bound
        self.eps_x = eps_x

    def fit(self, X, y):
        """Fit from pilot frequencies ``X`` (Hz) and samples ``y``."""
        f = check_real_vector(X, "X")
        th = check_scalar(self.delay_spread, "delay_spread", min_val=0.0, include_min=False)
        x = f * th
        z = check_complex_vector(y, f.size) * np.exp(1j * np.pi * x)
        self.interpolator_ = SincInterpolator(
            noise_variance=self.noise_variance, amplitude_bound=self.amplitude_bound,
            eps_x=self.eps_x).fit(x, z)
        self.pilot_frequencies_ = f
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "interpolator_")
        f = check_real_vector(X, "X")
        return denormalize_estimate(self.interpolator_.predict(f * self.delay_spread),
                                    f, self.delay_spread)

    def weights(self, X):
        """Complex weights ``w(f)`` with ``H_hat(f) = w(f) @ V``, shape (n_f, M)."""
        check_is_fitted(self, "interpolator_")
        f = check_real_vector(X, "X")
        x = f * self.delay_spread
        c = self.interpolator_.coefficients(x)
        xm = self.interpolator_.design_.abscissas
        return c * np.exp(1j * np.pi * (xm[None, :] - x[:, None]))

    def error_bound(self, X):
        check_is_fitted(self, "interpolator_")
        f = check_real_vector(X, "X")
        return self.interpolator_.error_bound(f * self.delay_spread)

    @classmethod
    def weights_for(cls, pilot_frequencies, delay_spread, mu, frequencies):
        """Weights without sample values, for analytic error evaluation."""
        est = cls(delay_spread=delay_spread, noise_variance=mu, amplitude_bound=1.0)
        est.fit(pilot_frequencies, np.zeros(np.size(pilot_frequencies), complex))
        return est.weights(frequencies)


# -- line-based channel dump ----------------------------------------------------

def write_channels(fh, channels, delay_spread, seed):
    """Write channels as text: a header, then one ``tau re(a) im(a)`` line per tap.

    ``fh`` is a path or a text file object.
    """
    if isinstance(fh, (str, os.PathLike)):
        with open(fh, "w", encoding="utf-8", newline="\n") as f:
            return write_channels(f, channels, delay_spread, seed)
    fh.write("# nusest channel dump\n")
    fh.write(f"# T_h {delay_spread!r}\n")
    fh.write(f"# seed {int(seed)}\n")
    for i, ch in enumerate(channels):
        fh.write(f"# trial {i}\n")
        for tau, a in zip(ch.delays, ch.amplitudes):
            fh.write(f"{tau:.17g} {a.real:.17g} {a.imag:.17g}\n")
    return None


def read_channels(fh):
    """Parse a channel dump. Returns ``(channels, delay_spread, seed)``."""
    if isinstance(fh, (str, os.PathLike)):
        with open(fh, encoding="utf-8") as f:
            return read_channels(f)
    delay_spread = seed = None
    groups = []
    for raw in fh:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["T_h"]:
                delay_spread = float(parts[1])
            elif parts[:1] == ["seed"]:
                seed = int(parts[1])
            elif parts[:1] == ["trial"]:
                groups.append([])
            continue
        if not groups:
            raise ValueError("tap line before the first '# trial' header")
        tau, re, im = (float(v) for v in line.split())
        groups[-1].append((tau, complex(re, im)))
    if delay_spread is None:
        raise ValueError("missing '# T_h' header")
    channels = [SparseChannel(np.array([t for t, _ in g]), np.array([a for _, a in g]),
                              delay_spread) for g in groups]
    return channels, delay_spread, seed


__all__ = [
    "ChannelModelParams", "PilotChannelEstimator", "PilotGrid", "PilotObservations",
    "SparseChannel", "calibrate_sigma_a", "channel_spectrum", "denormalize_estimate",
    "draw_channel", "normalize_to_unit_band", "observe_pilots", "read_channels",
    "stream_rng", "write_channels",
]
