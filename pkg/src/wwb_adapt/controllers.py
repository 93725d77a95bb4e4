"""Sensing-parameter selection policies.

Scaling policies map a belief summary (frequency variance, SNR) to the array
scaling for the next measurement: ad hoc baselines (fixed, linear, random),
a precomputed look-up table for real-time use, and a direct bound
optimization.  Antenna policies rank transmitter/receiver activations by
known-phase bound cost, either exactly or through a trained surrogate.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DegenerateBeliefError, VersionError
from .optimize import AnnealConfig, anneal_maximize_batch
from .priors import GaussianPrior, PriorBelief, UniformBoxPrior
from .signal_model import snr_db_to_linear
from .wwb import _kp_from_phases, scaling_cost_curve

logger = logging.getLogger(__name__)

__all__ = [
    "ScalingLut",
    "AntennaCandidate",
    "FixedScaling",
    "LinearScaling",
    "RandomScaling",
    "LutScaling",
    "DirectScaling",
    "ScalingPolicy",
    "build_scaling_lut",
    "select_scaling",
    "make_prior",
    "enumerate_antenna_candidates",
    "antenna_costs_exact",
    "select_antennas",
]

LUT_FORMAT_VERSION = 1

# Antenna task geometry: available elements on a uniform grid of 8 positions
# spaced 0.9 half-wavelengths; the first transmitter and receiver are fixed.
ANTENNA_GRID = 0.9 * np.arange(1, 9)
# Phase slope per unit electrical frequency for positions in half-wavelength
# units (u = sin of the arrival angle).
PHASE_PER_HALF_WAVELENGTH = np.pi


def make_prior(kind: str, variance: float, center: float = 0.0) -> PriorBelief:
    """Single-frequency prior of the given family and variance."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    if kind == "uniform":
        return UniformBoxPrior(center=[center], widths=[np.sqrt(12.0 * variance)])
    if kind == "gaussian":
        return GaussianPrior(mean=[center], variances=[variance])
    raise ValueError(f"unknown prior kind {kind!r}")


def _array_hash(positions: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(positions, dtype=float).tobytes()).hexdigest()


@dataclass(frozen=True)
class ScalingLut:
    """Optimal scaling indexed by (prior variance, SNR in dB).

    Lookups are nearest-neighbor in (log variance, SNR dB); queries outside
    the axes clamp to the edge cells.  The metadata records the bound model,
    prior family, array hash, and g grid used to build the table.
    """

    variance_axis: np.ndarray
    snr_axis_db: np.ndarray
    table: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        var_axis = np.atleast_1d(np.asarray(self.variance_axis, dtype=float))
        snr_axis = np.atleast_1d(np.asarray(self.snr_axis_db, dtype=float))
        table = np.asarray(self.table, dtype=float)
        if np.any(np.diff(var_axis) <= 0) or np.any(np.diff(snr_axis) < 0):
            raise ValueError("axes must be strictly increasing")
        if table.shape != (var_axis.size, snr_axis.size):
            raise ValueError("table shape must match the axes")
        if not np.all(table > 0):
            raise ValueError("table entries must be positive scalings")
        for arr in (var_axis, snr_axis, table):
            arr.setflags(write=False)
        object.__setattr__(self, "variance_axis", var_axis)
        object.__setattr__(self, "snr_axis_db", snr_axis)
        object.__setattr__(self, "table", table)

    def lookup(self, variance: float, snr_db: float) -> float:
        """Nearest cell in (log variance, SNR dB); no bound evaluations."""
        if variance <= 0:
            raise ValueError("variance must be positive")
        if (
            variance < self.variance_axis[0]
            or variance > self.variance_axis[-1]
            or snr_db < self.snr_axis_db[0]
            or snr_db > self.snr_axis_db[-1]
        ):
            logger.debug(
                "LUT query (var=%.3g, snr=%.3g dB) outside axes; clamping", variance, snr_db
            )
        i = int(np.argmin(np.abs(np.log(self.variance_axis) - np.log(variance))))
        j = int(np.argmin(np.abs(self.snr_axis_db - snr_db)))
        return float(self.table[i, j])

    def save(self, path: str) -> None:
        """Write the binary table plus a JSON sidecar next to it."""
        path = str(path)
        np.savez(
            path,
            version=np.array([LUT_FORMAT_VERSION]),
            variance_axis=self.variance_axis,
            snr_axis_db=self.snr_axis_db,
            table=self.table,
        )
        actual = path if path.endswith(".npz") else path + ".npz"
        sidecar = {
            "version": LUT_FORMAT_VERSION,
            "variance_axis": self.variance_axis.tolist(),
            "snr_axis_db": self.snr_axis_db.tolist(),
            "metadata": self.metadata,
        }
        with open(actual + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "ScalingLut":
        path = str(path)
        actual = path if path.endswith(".npz") else path + ".npz"
        with np.load(actual) as data:
            version = int(data["version"][0])
            if version != LUT_FORMAT_VERSION:
                raise VersionError(
                    f"LUT file {actual} has version {version}, expected {LUT_FORMAT_VERSION}"
                )
            var_axis = data["variance_axis"]
            snr_axis = data["snr_axis_db"]
            table = data["table"]
        metadata = {}
        try:
            with open(actual + ".json", "r", encoding="utf-8") as fh:
                metadata = json.load(fh).get("metadata", {})
        except FileNotFoundError:
            pass
        return cls(var_axis, snr_axis, table, metadata)


def _cell_seed(base_seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence((base_seed, i, j)).generate_state(1)[0])


def build_scaling_lut(
    model: str,
    prior_kind: str,
    positions,
    variance_grid,
    snr_grid_db,
    g_values,
    weights=None,
    cfg: Optional[AnnealConfig] = None,
    workers: int = 1,
) -> ScalingLut:
    """Tabulate the optimal scaling on a (variance, SNR) grid.

    Cells are independent (each gets its own deterministic seed derived from
    the config seed and the cell indices), so the table does not depend on
    evaluation order or worker count.
    """
    cfg = cfg or AnnealConfig()
    positions = np.asarray(positions, dtype=float)
    variance_grid = np.atleast_1d(np.asarray(variance_grid, dtype=float))
    snr_grid_db = np.atleast_1d(np.asarray(snr_grid_db, dtype=float))
    if variance_grid.size == 0 or snr_grid_db.size == 0:
        raise ValueError("grids must be non-empty")
    g_values = np.asarray(g_values, dtype=float)
    table = np.empty((variance_grid.size, snr_grid_db.size))

    def fill_cell(i: int, j: int) -> None:
        prior = make_prior(prior_kind, variance_grid[i])
        snr = snr_db_to_linear(snr_grid_db[j])
        cell_cfg = replace(cfg, seed=_cell_seed(cfg.seed, i, j))
        try:
            curve = scaling_cost_curve(
                prior, positions, snr, weights, g_values, model=model, cfg=cell_cfg
            )
        except DegenerateBeliefError as exc:
            raise DegenerateBeliefError(
                f"LUT cell (variance={variance_grid[i]:.6g}, "
                f"snr={snr_grid_db[j]:.6g} dB) has no valid test point"
            ) from exc
        table[i, j] = curve.g_opt

    cells = [(i, j) for i in range(variance_grid.size) for j in range(snr_grid_db.size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda ij: fill_cell(*ij), cells))
    else:
        for i, j in cells:
            fill_cell(i, j)

    metadata = {
        "model": model,
        "prior_kind": prior_kind,
        "array_hash": _array_hash(positions),
        "n_elements": int(positions.size),
        "g_grid": {
            "min": float(g_values.min()),
            "max": float(g_values.max()),
            "points": int(g_values.size),
        },
        "weights": None if weights is None else np.asarray(weights).tolist(),
        "seed": cfg.seed,
    }
    return ScalingLut(variance_grid, snr_grid_db, table, metadata)


@dataclass(frozen=True)
class FixedScaling:
    g0: float


@dataclass(frozen=True)
class LinearScaling:
    g0: float
    slope: float


@dataclass(frozen=True)
class RandomScaling:
    low: float
    high: float


@dataclass(frozen=True)
class LutScaling:
    lut: ScalingLut


@dataclass(frozen=True)
class DirectScaling:
    """Fresh bound optimization per decision (no precomputation)."""

    model: str
    prior_kind: str
    positions: np.ndarray
    g_values: np.ndarray
    weights: Optional[np.ndarray] = None
    cfg: AnnealConfig = field(default_factory=AnnealConfig)


ScalingPolicy = Union[FixedScaling, LinearScaling, RandomScaling, LutScaling, DirectScaling]


def select_scaling(
    policy: ScalingPolicy,
    variance: float,
    snr_db: float,
    step: int,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Pick the next scaling from the belief summary (variance, SNR).

    The LUT path performs a pure table lookup with no bound evaluations,
    which is what makes the controller real-time capable.
    """
    if variance <= 0:
        raise ValueError("belief variance must be positive")
    if isinstance(policy, FixedScaling):
        return float(policy.g0)
    if isinstance(policy, LinearScaling):
        return float(policy.g0 + policy.slope * step)
    if isinstance(policy, RandomScaling):
        if rng is None:
            raise ValueError("random policy needs an rng")
        return float(rng.uniform(policy.low, policy.high))
    if isinstance(policy, LutScaling):
        return policy.lut.lookup(variance, snr_db)
    if isinstance(policy, DirectScaling):
        prior = make_prior(policy.prior_kind, variance)
        curve = scaling_cost_curve(
            prior,
            policy.positions,
            snr_db_to_linear(snr_db),
            policy.weights,
            policy.g_values,
            model=policy.model,
            cfg=policy.cfg,
        )
        return curve.g_opt
    raise TypeError(f"unknown policy type {type(policy).__name__}")


@dataclass(frozen=True)
class AntennaCandidate:
    """One extra transmitter and receiver on the grid (indices 1-based).

    ``virtual_positions`` holds the four sorted Tx+Rx position sums in
    half-wavelength units, fixed Tx 1 / Rx 1 included; overlapping virtual
    elements keep their multiplicity here (the one-hot encoding reduces to
    presence).
    """

    tx_choice: int
    rx_choice: int
    virtual_positions: np.ndarray

    def __post_init__(self):
        pos = np.sort(np.asarray(self.virtual_positions, dtype=float))
        pos.setflags(write=False)
        object.__setattr__(self, "virtual_positions", pos)


def enumerate_antenna_candidates(grid_positions=None) -> list:
    """All pairings of one extra Tx and one extra Rx, tx-major order."""
    grid = ANTENNA_GRID if grid_positions is None else np.asarray(grid_positions, dtype=float)
    fixed = grid[0]
    candidates = []
    for ti in range(1, grid.size):
        for ri in range(1, grid.size):
            tx = np.array([fixed, grid[ti]])
            rx = np.array([fixed, grid[ri]])
            virtual = (tx[:, None] + rx[None, :]).ravel()
            candidates.append(
                AntennaCandidate(tx_choice=ti + 1, rx_choice=ri + 1, virtual_positions=virtual)
            )
    return candidates


def antenna_costs_exact(
    candidates: Sequence[AntennaCandidate],
    variance: float,
    snr: float,
    cfg: Optional[AnnealConfig] = None,
) -> np.ndarray:
    """Optimized known-phase cost of every candidate virtual array.

    Direction-only task: the virtual array is centered at its center of
    mass (the known-phase bound depends on the coordinate origin) and the
    prior is a uniform box matched to the belief variance.  All candidates
    are optimized as one annealing batch.
    """
    cfg = cfg or AnnealConfig()
    width = float(np.sqrt(12.0 * variance))
    arrays = np.stack(
        [
            PHASE_PER_HALF_WAVELENGTH
            * (c.virtual_positions - c.virtual_positions.mean())
            for c in candidates
        ]
    )  # (m, 4)
    m, n = arrays.shape

    def objective(points, rows):
        sub = arrays if rows is None else arrays[rows]
        h = points[..., 0]                                     # (r, n_pts)
        x = h[..., None] * sub[:, None, :]
        values = _kp_from_phases(width, snr, n, h, x)
        return np.where(np.isnan(values), -np.inf, values)

    lower = np.full((m, 1), -width)
    upper = np.full((m, 1), width)
    try:
        _, costs = anneal_maximize_batch(objective, lower, upper, cfg)
    except ValueError as exc:
        raise DegenerateBeliefError(f"antenna cost optimization failed: {exc}") from exc
    return costs


def select_antennas(
    evaluator,
    variance: float,
    snr: float,
    candidates: Optional[Sequence[AntennaCandidate]] = None,
    cfg: Optional[AnnealConfig] = None,
) -> AntennaCandidate:
    """Pick the candidate with the lowest (predicted) bound cost.

    ``evaluator`` is either ``"exact"`` or a callable mapping
    ``(candidates, variance)`` to a cost array (e.g. a trained surrogate
    ranker).  Ties resolve to the earlier candidate in enumeration order.
    """
    if candidates is None:
        candidates = enumerate_antenna_candidates()
    if len(candidates) == 0:
        raise ValueError("candidate list must be non-empty")
    if evaluator == "exact":
        costs = antenna_costs_exact(candidates, variance, snr, cfg)
    elif callable(evaluator):
        costs = np.asarray(evaluator(candidates, variance), dtype=float)
    else:
        raise ConfigError(f"unknown evaluator {evaluator!r}")
    return candidates[int(np.argmin(costs))]
