"""Belief families for the controller: uniform box and Gaussian frequencies.

Both families are crossed with a uniform phase on [-pi, pi].  The central
quantity is the prior overlap integral

    xi(v, vt) = integral p(theta) sqrt(p(theta+v) p(theta+vt)) / p(theta) dtheta,

which measures how much the prior, shifted by the two test points, still
overlaps its own support.  For both families xi depends only on the prior
variance, never on its mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = [
    "UniformBoxPrior",
    "GaussianPrior",
    "PriorBelief",
    "TestPointDomain",
    "xi_uniform",
    "xi_gaussian",
    "xi",
    "test_point_domain",
    "sample_prior",
    "approximate_from_particles",
]

# Width/sigma floor applied when approximating a degenerate particle cloud,
# keeping downstream bounds finite.
DEGENERATE_FLOOR = 1e-6


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UniformBoxPrior:
    """Uniform box over frequencies times uniform phase on [-pi, pi]."""

    center: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        widths = np.atleast_1d(np.asarray(self.widths, dtype=float))
        if center.shape != widths.shape:
            raise ValueError("center and widths must have matching shapes")
        if not np.all(widths > 0):
            raise ValueError("box widths must be positive")
        object.__setattr__(self, "center", _readonly(center))
        object.__setattr__(self, "widths", _readonly(widths))

    @property
    def n_freq(self) -> int:
        return self.center.shape[0]

    @property
    def n_params(self) -> int:
        return self.n_freq + 1

    @property
    def volume(self) -> float:
        return float(TWO_PI * np.prod(self.widths))

    @property
    def frequency_variances(self) -> np.ndarray:
        """Variance of each frequency coordinate, widths^2 / 12."""
        return self.widths**2 / 12.0


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian frequencies times uniform phase on [-pi, pi]."""

    mean: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if mean.shape != variances.shape:
            raise ValueError("mean and variances must have matching shapes")
        if not np.all(variances > 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "variances", _readonly(variances))

    @property
    def n_freq(self) -> int:
        return self.mean.shape[0]

    @property
    def n_params(self) -> int:
        return self.n_freq + 1

    @property
    def frequency_variances(self) -> np.ndarray:
        return self.variances


PriorBelief = Union[UniformBoxPrior, GaussianPrior]


@dataclass(frozen=True)
class TestPointDomain:
    """Axis-aligned box of admissible test points (phase coordinate last)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("bounds must have matching shapes")
        if not np.all(upper > lower):
            raise ValueError("domain must have positive extent")
        object.__setattr__(self, "lower", _readonly(lower))
        object.__setattr__(self, "upper", _readonly(upper))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _phase_overlap(v_phi, vt_phi):
    """Overlap fraction of [-pi, pi] under shifts v_phi and vt_phi."""
    spread = 0.5 * (np.abs(v_phi - vt_phi) + np.abs(v_phi) + np.abs(vt_phi))
    return np.maximum(0.0, TWO_PI - spread) / TWO_PI


def xi_uniform(prior: UniformBoxPrior, v, vt):
    """Prior overlap for the uniform box: a product of per-coordinate ramps.

    Each coordinate contributes r(L - (|v-vt| + |v| + |vt|)/2) / L with L the
    box edge (2*pi for the phase coordinate); the result is the volume of the
    doubly-shifted support intersection divided by the prior volume.
    Vectorized over leading axes of ``v`` and ``vt``; the trailing axis is
    the parameter coordinate with phase last.
    """
    v = np.asarray(v, dtype=float)
    vt = np.asarray(vt, dtype=float)
    spread = 0.5 * (np.abs(v - vt) + np.abs(v) + np.abs(vt))
    lengths = np.concatenate([prior.widths, [TWO_PI]])
    factors = np.maximum(0.0, lengths - spread) / lengths
    return factors.prod(axis=-1)


def xi_gaussian(prior: GaussianPrior, v, vt):
    """Prior overlap for the Gaussian family.

    The frequency block is the Bhattacharyya coefficient of two equal-
    covariance Gaussians, exp(-||v_u - vt_u||^2 / 8) in the Sigma^-1 norm;
    the phase keeps the uniform-overlap ramp.
    """
    v = np.asarray(v, dtype=float)
    vt = np.asarray(vt, dtype=float)
    diff = v[..., :-1] - vt[..., :-1]
    bc = np.exp(-0.125 * (diff**2 / prior.variances).sum(axis=-1))
    return bc * _phase_overlap(v[..., -1], vt[..., -1])


def xi(prior: PriorBelief, v, vt):
    """Dispatch xi on the prior family."""
    if isinstance(prior, UniformBoxPrior):
        return xi_uniform(prior, v, vt)
    if isinstance(prior, GaussianPrior):
        return xi_gaussian(prior, v, vt)
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


# Gaussian test points beyond 6 sigma contribute Bhattacharyya factors below
# 1e-3; a finite box is required by the global optimizer.
GAUSSIAN_DOMAIN_SIGMAS = 6.0


def test_point_domain(prior: PriorBelief) -> TestPointDomain:
    """Box of test points worth probing, phase restricted to [0, 2*pi].

    The phase lower bound is 0 because the bound is symmetric under
    h -> -h, so one half-space suffices for the optimization.
    """
    if isinstance(prior, UniformBoxPrior):
        radii = prior.widths
    elif isinstance(prior, GaussianPrior):
        radii = GAUSSIAN_DOMAIN_SIGMAS * np.sqrt(prior.variances)
    else:
        raise TypeError(f"unsupported prior type {type(prior).__name__}")
    lower = np.concatenate([-radii, [0.0]])
    upper = np.concatenate([radii, [TWO_PI]])
    return TestPointDomain(lower, upper)


def sample_prior(prior: PriorBelief, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (size, q) samples of (u..., phi) from the prior."""
    if isinstance(prior, UniformBoxPrior):
        lo = prior.center - prior.widths / 2.0
        hi = prior.center + prior.widths / 2.0
        freqs = rng.uniform(lo, hi, size=(size, prior.n_freq))
    elif isinstance(prior, GaussianPrior):
        freqs = prior.mean + np.sqrt(prior.variances) * rng.standard_normal(
            (size, prior.n_freq)
        )
    else:
        raise TypeError(f"unsupported prior type {type(prior).__name__}")
    phase = rng.uniform(-np.pi, np.pi, size=(size, 1))
    return np.hstack([freqs, phase])


def approximate_from_particles(
    particles: "ParticleSet", kind: str, inflation: float = 1.0
) -> PriorBelief:
    """Moment-match a prior of the requested family to a particle cloud.

    The returned prior has mean equal to the weighted particle mean and
    per-coordinate frequency variance ``inflation * empirical_variance``.
    ``inflation >= 1`` trades bound tightness for robustness against
    overconfident particle clouds.  Degenerate clouds fall back to the
    width/sigma floor so downstream bounds stay finite.
    """
    if inflation < 1.0:
        raise ValueError("inflation must be >= 1")
    states = np.asarray(particles.particles, dtype=float)
    weights = np.asarray(particles.weights, dtype=float)
    freqs = states[:, :-1]
    mean = weights @ freqs
    var = weights @ (freqs - mean) ** 2
    var = inflation * var
    if kind == "uniform":
        widths = np.maximum(np.sqrt(12.0 * var), DEGENERATE_FLOOR)
        return UniformBoxPrior(center=mean, widths=widths)
    if kind == "gaussian":
        var = np.maximum(var, DEGENERATE_FLOOR**2)
        return GaussianPrior(mean=mean, variances=var)
    raise ValueError(f"unknown prior kind {kind!r}")
