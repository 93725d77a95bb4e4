"""Observation model for spatio-temporal frequency estimation.

A single narrow-band far-field source sampled by an array scheme is observed
as ``x = a(theta) * sqrt(snr) + n`` with circularly-symmetric unit-variance
complex Gaussian noise.  The steering vector is

    a_n(theta) = exp(i * (sum_j d_jn * u_j + phi)),

where the sampling columns ``d_j`` carry phase slopes (antenna positions,
pulse times) and the trailing all-ones column carries the initial phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SamplingMatrix",
    "SourceParams",
    "Observation",
    "TdmMimoConfig",
    "snr_db_to_linear",
    "uniform_linear_array",
    "steering_vector",
    "build_tdm_sampling_matrix",
    "synthesize_observation",
    "log_likelihood",
    "array_factor",
]


def snr_db_to_linear(snr_db: float) -> float:
    """Convert an SNR given in dB to linear scale (single entry point)."""
    return float(10.0 ** (snr_db / 10.0))


def wrap_phase(phi):
    """Wrap angles to the interval [-pi, pi)."""
    return (np.asarray(phi) + np.pi) % (2.0 * np.pi) - np.pi


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SamplingMatrix:
    """Sampling columns d_1..d_{q-1}; the all-ones phase column is implicit.

    ``columns`` has shape (N, q-1).  The full N x q matrix (with the ones
    column appended) is produced on demand by :meth:`full`.
    """

    columns: np.ndarray

    def __post_init__(self):
        cols = np.atleast_2d(np.asarray(self.columns, dtype=float))
        if cols.ndim != 2:
            raise ValueError("sampling columns must form a 2-D array")
        if cols.shape[0] < 1 or cols.shape[1] < 1:
            raise ValueError("need at least one sample and one frequency column")
        object.__setattr__(self, "columns", _readonly(cols))

    @classmethod
    def from_positions(cls, positions) -> "SamplingMatrix":
        """Single-frequency sampling from a vector of phase slopes."""
        return cls(np.asarray(positions, dtype=float).reshape(-1, 1))

    @property
    def n_samples(self) -> int:
        return self.columns.shape[0]

    @property
    def n_params(self) -> int:
        """Parameter dimension q, including the phase coordinate."""
        return self.columns.shape[1] + 1

    def full(self) -> np.ndarray:
        """Return the N x q matrix with the ones column appended."""
        return np.hstack([self.columns, np.ones((self.n_samples, 1))])

    def scaled(self, factor: float) -> "SamplingMatrix":
        """Scale the frequency columns (the phase column is unaffected)."""
        return SamplingMatrix(self.columns * float(factor))


@dataclass(frozen=True)
class SourceParams:
    """Source parameters: frequencies u, initial phase phi, linear SNR."""

    u: np.ndarray
    phi: float
    snr: float

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if self.snr < 0:
            raise ValueError("snr must be nonnegative (linear scale)")
        object.__setattr__(self, "u", _readonly(u))
        object.__setattr__(self, "phi", float(wrap_phase(self.phi)))
        object.__setattr__(self, "snr", float(self.snr))


@dataclass(frozen=True)
class Observation:
    """A length-N vector of complex baseband samples."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex)
        if x.ndim != 1:
            raise ValueError("observation must be a 1-D complex vector")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class TdmMimoConfig:
    """TDM MIMO geometry: one transmitter active per pulse.

    Positions are in declared units (typically half-wavelength or meters),
    pulse times in seconds.  ``tx_activation[p]`` is the transmitter index
    active during pulse p; ``rx_selection`` lists the processed receivers.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    pulse_times: np.ndarray
    tx_activation: tuple
    rx_selection: tuple
    wavelength: float

    def __post_init__(self):
        tx = _readonly(np.atleast_1d(self.tx_positions))
        rx = _readonly(np.atleast_1d(self.rx_positions))
        times = _readonly(np.atleast_1d(self.pulse_times))
        act = tuple(int(i) for i in self.tx_activation)
        sel = tuple(int(i) for i in self.rx_selection)
        if len(act) == 0:
            raise ValueError("tx_activation must list one transmitter per pulse")
        if len(sel) == 0:
            raise ValueError("rx_selection must be non-empty")
        if len(act) != len(times):
            raise ValueError("tx_activation length must match pulse_times")
        if any(i < 0 or i >= len(tx) for i in act):
            raise ValueError("tx_activation index out of range")
        if any(i < 0 or i >= len(rx) for i in sel):
            raise ValueError("rx_selection index out of range")
        if len(set(sel)) != len(sel):
            raise ValueError("rx_selection indices must be distinct")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        object.__setattr__(self, "pulse_times", times)
        object.__setattr__(self, "tx_activation", act)
        object.__setattr__(self, "rx_selection", sel)
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @classmethod
    def from_json(cls, source) -> "TdmMimoConfig":
        """Build from a JSON document (path, file object, or dict)."""
        if isinstance(source, dict):
            doc = source
        elif hasattr(source, "read"):
            doc = json.load(source)
        else:
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        return cls(
            tx_positions=doc["tx_positions"],
            rx_positions=doc["rx_positions"],
            pulse_times=doc["pulse_times"],
            tx_activation=tuple(doc["tx_activation"]),
            rx_selection=tuple(doc["rx_selection"]),
            wavelength=doc["wavelength"],
        )

    def to_json_dict(self) -> dict:
        return {
            "tx_positions": self.tx_positions.tolist(),
            "rx_positions": self.rx_positions.tolist(),
            "pulse_times": self.pulse_times.tolist(),
            "tx_activation": list(self.tx_activation),
            "rx_selection": list(self.rx_selection),
            "wavelength": self.wavelength,
        }


def uniform_linear_array(n_elements: int, spacing: float) -> np.ndarray:
    """Positions of a uniform linear array centered at its center of mass.

    ``d_k = spacing * (k - (n+1)/2)`` for k = 1..n, so the mean is exactly
    zero.  The centering matters: known-phase bounds depend on the
    coordinate origin, and the centered convention is assumed throughout.
    """
    if n_elements < 1:
        raise ValueError("array needs at least one element")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    return spacing * (np.arange(1, n_elements + 1) - (n_elements + 1) / 2.0)


def steering_vector(sampling: SamplingMatrix, theta: SourceParams) -> np.ndarray:
    """Unit-modulus response exp(i(sum_j d_j u_j + phi)) of the sampling scheme."""
    if theta.u.shape[0] != sampling.n_params - 1:
        raise ValueError(
            f"frequency dimension {theta.u.shape[0]} does not match "
            f"sampling matrix with q={sampling.n_params}"
        )
    return np.exp(1j * (sampling.columns @ theta.u + theta.phi))


def build_tdm_sampling_matrix(cfg: TdmMimoConfig) -> SamplingMatrix:
    """Virtual-array sampling matrix for a TDM MIMO scheme.

    Row (p, r) gets virtual position tx[activation[p]] + rx[selection[r]]
    and virtual time pulse_times[p]; rows are ordered pulse-major.  Columns
    are divided by the wavelength.
    """
    act = np.asarray(cfg.tx_activation, dtype=int)
    sel = np.asarray(cfg.rx_selection, dtype=int)
    tx = cfg.tx_positions[act]          # (n_pulses,)
    rx = cfg.rx_positions[sel]          # (n_rx,)
    d_virtual = (tx[:, None] + rx[None, :]).ravel()
    t_virtual = np.repeat(cfg.pulse_times, len(sel))
    cols = np.stack([d_virtual, t_virtual], axis=1) / cfg.wavelength
    return SamplingMatrix(cols)


def synthesize_observation(
    sampling: SamplingMatrix, theta: SourceParams, rng: np.random.Generator
) -> Observation:
    """Draw x = a(theta) sqrt(snr) + n with unit-covariance complex noise."""
    n = sampling.n_samples
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return Observation(steering_vector(sampling, theta) * np.sqrt(theta.snr) + noise)


def log_likelihood(x: Observation, sampling: SamplingMatrix, theta: SourceParams) -> float:
    """Gaussian log-likelihood up to additive constants: -||x - a(theta) sqrt(snr)||^2.

    Constants independent of theta are dropped; only ratios and argmax are
    consumed downstream.
    """
    data = x.x if isinstance(x, Observation) else np.asarray(x, dtype=complex)
    if data.shape[0] != sampling.n_samples:
        raise ValueError("observation length does not match sampling matrix")
    resid = data - steering_vector(sampling, theta) * np.sqrt(theta.snr)
    return float(-np.real(np.vdot(resid, resid)))


def array_factor(positions, scale: float, offset):
    """Normalized ambiguity function B(h) = (1/N) sum_n exp(i g d_n h).

    Grating lobes are the |B| = 1 peaks away from h = 0; they mark
    frequency offsets indistinguishable from the true value.  Accepts a
    scalar or array ``offset`` and returns matching complex values.
    """
    d = np.asarray(positions, dtype=float)
    if d.size == 0:
        raise ValueError("array_factor needs at least one element")
    h = np.asarray(offset, dtype=float)
    out = np.exp(1j * scale * np.multiply.outer(h, d)).sum(axis=-1) / d.size
    return out if h.ndim else complex(out)
