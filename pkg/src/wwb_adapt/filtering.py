"""Particle filter over (frequencies, phase) with per-step phase reinitialization.

The frequency parameter is constant within a trial; the initial phase is
redrawn uniformly at every motion update, reflecting incoherent measurement
intervals.  The measurement update reweights by the Gaussian likelihood and
resamples every step with the residual scheme, returning equal weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .priors import PriorBelief, sample_prior
from .signal_model import Observation, SamplingMatrix, wrap_phase

logger = logging.getLogger(__name__)

__all__ = [
    "ParticleSet",
    "init_particles",
    "motion_update",
    "measurement_update",
    "residual_resample",
    "empirical_moments",
]

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ParticleSet:
    """Weighted particles over (u_1..u_{q-1}, phi).

    ``particles`` has shape (n, q) with the phase column last and wrapped to
    [-pi, pi); ``weights`` lies on the simplex to within 1e-12.
    """

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.particles, dtype=float)).copy()
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if states.shape[0] != weights.shape[0]:
            raise ValueError("particles and weights must have matching lengths")
        if states.shape[1] < 2:
            raise ValueError("particles need at least one frequency plus phase")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must sum to one")
        states[:, -1] = wrap_phase(states[:, -1])
        states.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "particles", states)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def n_params(self) -> int:
        return self.particles.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        return self.particles[:, :-1]

    @property
    def phases(self) -> np.ndarray:
        return self.particles[:, -1]


def init_particles(
    prior: PriorBelief, n_particles: int, rng: np.random.Generator
) -> ParticleSet:
    """Draw i.i.d. particles from the prior with equal weights."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    states = sample_prior(prior, n_particles, rng)
    return ParticleSet(states, np.full(n_particles, 1.0 / n_particles))


def motion_update(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Apply the state dynamics: frequencies constant, phase reinitialized."""
    states = particles.particles.copy()
    states[:, -1] = rng.uniform(-np.pi, np.pi, particles.size)
    return ParticleSet(states, particles.weights)


def residual_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Residual resampling: floor(n w_i) copies plus multinomial remainder.

    Returns an index array of length n.  Unbiased: the expected copy count
    of index i is exactly n * w_i.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    counts = np.floor(n * w).astype(int)
    remainder = n - counts.sum()
    if remainder > 0:
        residual = n * w - counts
        counts = counts + rng.multinomial(remainder, residual / residual.sum())
    return np.repeat(np.arange(n), counts)


def _log_likelihoods(x, sampling: SamplingMatrix, states, snr: float) -> np.ndarray:
    """-||x - a(theta_i) sqrt(snr)||^2 for every particle, vectorized."""
    data = x.x if isinstance(x, Observation) else np.asarray(x, dtype=complex)
    phases = states[:, :-1] @ sampling.columns.T + states[:, -1:]
    resid = data[None, :] - np.exp(1j * phases) * np.sqrt(snr)
    return -np.sum(resid.real**2 + resid.imag**2, axis=1)


def _measurement_update_impl(particles, x, sampling, snr, rng):
    log_w = _log_likelihoods(x, sampling, particles.particles, snr)
    log_w = log_w - log_w.max()
    raw = np.exp(log_w) * particles.weights
    total = raw.sum()
    degenerate = not np.isfinite(total) or total <= 0.0
    if degenerate:
        # Keep the filter alive rather than crashing the trial.
        logger.warning("all likelihoods degenerate; falling back to uniform weights")
        weights = np.full(particles.size, 1.0 / particles.size)
    else:
        weights = raw / total
    idx = residual_resample(weights, rng)
    resampled = ParticleSet(
        particles.particles[idx], np.full(particles.size, 1.0 / particles.size)
    )
    return resampled, degenerate


def measurement_update(
    particles: ParticleSet,
    x,
    sampling: SamplingMatrix,
    snr: float,
    rng: np.random.Generator,
) -> ParticleSet:
    """Reweight by the likelihood of ``x`` and residual-resample.

    Weights are computed in log space with max subtraction to avoid
    underflow; if every likelihood still underflows the update falls back
    to uniform weights with a logged warning.  The returned set has equal
    weights.
    """
    updated, _ = _measurement_update_impl(particles, x, sampling, snr, rng)
    return updated


def empirical_moments(particles: ParticleSet):
    """Weighted mean (phase circularly) and per-frequency weighted variance."""
    w = particles.weights
    freqs = particles.frequencies
    mean_f = w @ freqs
    var_f = w @ (freqs - mean_f) ** 2
    phases = particles.phases
    mean_phi = np.arctan2(w @ np.sin(phases), w @ np.cos(phases))
    return np.concatenate([mean_f, [mean_phi]]), var_f
