"""Closed-loop simulation harness and Monte Carlo experiment runner.

One trial runs the adaptive sensing loop: motion update, controller
selection from the current belief summary, observation synthesis at the
true parameters, measurement update, record.  The frequency ground truth is
redrawn from the initial belief at the start of every trial and held
constant within it; the true initial phase is redrawn every step.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .controllers import ScalingPolicy, select_scaling
from .filtering import (
    _measurement_update_impl,
    empirical_moments,
    init_particles,
    motion_update,
)
from .priors import (
    GaussianPrior,
    PriorBelief,
    UniformBoxPrior,
    approximate_from_particles,
)
from .signal_model import SamplingMatrix, SourceParams, snr_db_to_linear, synthesize_observation

__all__ = [
    "ControllerSpec",
    "Scenario",
    "TrialRecord",
    "MonteCarloResult",
    "run_closed_loop",
    "monte_carlo_mse",
    "export_results",
    "default_histogram_edges",
]


@dataclass(frozen=True)
class ControllerSpec:
    """Scaling policy plus how the particle belief is summarized for it."""

    policy: ScalingPolicy
    approx: str = "uniform"
    label: str = "controller"


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment configuration (single frequency plus phase).

    ``positions`` is the unscaled sampling vector; the controller scales it
    each step.  ``inflation`` multiplies the empirical belief variance
    before it reaches the controller.
    """

    positions: np.ndarray
    snr_db: float
    initial_prior: PriorBelief
    n_steps: int
    n_particles: int
    controller: ControllerSpec
    inflation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).copy()
        pos.setflags(write=False)
        if self.n_steps < 1:
            raise ValueError("need at least one step")
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.initial_prior.n_params != 2:
            raise ValueError("scaling scenarios use one frequency plus phase")
        if self.inflation < 1.0:
            raise ValueError("inflation must be >= 1")
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class TrialRecord:
    """Per-step trace of one closed-loop trial."""

    scalings: np.ndarray
    estimates: np.ndarray
    sq_errors: np.ndarray
    variances: np.ndarray
    truth: float
    seed: Optional[int]
    wall_clock: float
    degenerate_steps: tuple = ()


def _sample_truth(prior: PriorBelief, rng: np.random.Generator) -> float:
    if isinstance(prior, UniformBoxPrior):
        lo = prior.center[0] - prior.widths[0] / 2.0
        return float(rng.uniform(lo, lo + prior.widths[0]))
    if isinstance(prior, GaussianPrior):
        return float(prior.mean[0] + np.sqrt(prior.variances[0]) * rng.standard_normal())
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


def run_closed_loop(
    scenario: Scenario, rng: np.random.Generator, seed: Optional[int] = None
) -> TrialRecord:
    """Run one trial of the adaptive sensing loop.

    Per step: motion update (phase reinitialization; the dynamics do not
    depend on the scaling, so this happens once before the controller),
    controller selection from the inflated belief variance, observation at
    the true parameters, measurement update, record.  Filter degeneracies
    flag the step but do not abort the trial.
    """
    start = time.perf_counter()
    snr = snr_db_to_linear(scenario.snr_db)
    spec = scenario.controller
    u_true = _sample_truth(scenario.initial_prior, rng)
    particles = init_particles(scenario.initial_prior, scenario.n_particles, rng)

    k_steps = scenario.n_steps
    scalings = np.empty(k_steps)
    estimates = np.empty(k_steps)
    variances = np.empty(k_steps)
    degenerate = []
    for k in range(k_steps):
        particles = motion_update(particles, rng)
        summary = approximate_from_particles(particles, spec.approx, scenario.inflation)
        belief_var = float(summary.frequency_variances[0])
        g = select_scaling(spec.policy, belief_var, scenario.snr_db, k, rng)
        sampling = SamplingMatrix.from_positions(g * scenario.positions)
        theta = SourceParams(
            u=[u_true], phi=rng.uniform(-np.pi, np.pi), snr=snr
        )
        x = synthesize_observation(sampling, theta, rng)
        particles, was_degenerate = _measurement_update_impl(
            particles, x, sampling, snr, rng
        )
        if was_degenerate:
            degenerate.append(k)
        mean, var = empirical_moments(particles)
        scalings[k] = g
        estimates[k] = mean[0]
        variances[k] = var[0]

    return TrialRecord(
        scalings=scalings,
        estimates=estimates,
        sq_errors=(estimates - u_true) ** 2,
        variances=variances,
        truth=u_true,
        seed=seed,
        wall_clock=time.perf_counter() - start,
        degenerate_steps=tuple(degenerate),
    )


def default_histogram_edges() -> np.ndarray:
    """Log-spaced squared-error bins, four per decade from 1e-12 to 1e2."""
    return np.logspace(-12, 2, 57)


@dataclass(frozen=True)
class MonteCarloResult:
    """Aggregated Monte Carlo output for one policy."""

    label: str
    mse: np.ndarray                 # (K,)
    sq_errors: np.ndarray           # (n_trials, K)
    scalings: np.ndarray            # (n_trials, K)
    hist_counts: np.ndarray         # (K, n_bins)
    hist_edges: np.ndarray
    n_trials: int
    seed_base: int


def _run_trial_batch(scenario: Scenario, seeds) -> list:
    return [
        run_closed_loop(scenario, np.random.default_rng(s), seed=s) for s in seeds
    ]


def monte_carlo_mse(
    scenario: Scenario,
    n_trials: int,
    seed_base: Optional[int] = None,
    workers: int = 1,
    hist_edges=None,
) -> MonteCarloResult:
    """Per-step MSE and squared-error histograms over independent trials.

    Trial i uses seed ``seed_base + i``, so the result is independent of the
    worker count and of scheduling.  MSE at step k is the plain average of
    the squared estimation errors across trials.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    seed_base = scenario.seed if seed_base is None else int(seed_base)
    seeds = [seed_base + i for i in range(n_trials)]
    hist_edges = (
        default_histogram_edges() if hist_edges is None else np.asarray(hist_edges, dtype=float)
    )

    if workers > 1 and n_trials > 1:
        chunks = np.array_split(np.asarray(seeds), min(workers * 4, n_trials))
        records = [None] * n_trials
        offset = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, result in zip(
                chunks, pool.map(_run_trial_batch, [scenario] * len(chunks), chunks)
            ):
                records[offset : offset + len(chunk)] = result
                offset += len(chunk)
    else:
        records = _run_trial_batch(scenario, seeds)

    sq_errors = np.stack([r.sq_errors for r in records])
    scalings = np.stack([r.scalings for r in records])
    k_steps = scenario.n_steps
    counts = np.stack(
        [np.histogram(sq_errors[:, k], bins=hist_edges)[0] for k in range(k_steps)]
    )
    return MonteCarloResult(
        label=scenario.controller.label,
        mse=sq_errors.mean(axis=0),
        sq_errors=sq_errors,
        scalings=scalings,
        hist_counts=counts,
        hist_edges=hist_edges,
        n_trials=n_trials,
        seed_base=seed_base,
    )


def _fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def export_results(results: Sequence[MonteCarloResult], out_dir, formats=("csv", "json")):
    """Write mse/choices/hist tables for a set of policies.

    CSV floats use shortest round-trip formatting, so re-parsing recovers
    the in-memory values exactly; the JSON export carries identical numbers.
    Returns the list of written paths.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if "csv" in formats:
        mse_path = out / "mse.csv"
        with open(mse_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "policy", "mse", "trials"])
            for res in results:
                for k in range(res.mse.size):
                    writer.writerow([k + 1, res.label, _fmt(res.mse[k]), res.n_trials])
        written.append(mse_path)

        choices_path = out / "choices.csv"
        with open(choices_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy", "trial", "step", "g"])
            for res in results:
                for t in range(res.scalings.shape[0]):
                    for k in range(res.scalings.shape[1]):
                        writer.writerow([res.label, t, k + 1, _fmt(res.scalings[t, k])])
        written.append(choices_path)

        hist_path = out / "hist.csv"
        with open(hist_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy", "step", "bin_lo", "bin_hi", "count"])
            for res in results:
                for k in range(res.hist_counts.shape[0]):
                    for b in range(res.hist_counts.shape[1]):
                        writer.writerow(
                            [
                                res.label,
                                k + 1,
                                _fmt(res.hist_edges[b]),
                                _fmt(res.hist_edges[b + 1]),
                                int(res.hist_counts[k, b]),
                            ]
                        )
        written.append(hist_path)

    if "json" in formats:
        doc = {
            res.label: {
                "mse": res.mse.tolist(),
                "trials": res.n_trials,
                "scalings": res.scalings.tolist(),
                "hist_edges": res.hist_edges.tolist(),
                "hist_counts": res.hist_counts.tolist(),
            }
            for res in results
        }
        json_path = out / "results.json"
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
        written.append(json_path)

    return written
