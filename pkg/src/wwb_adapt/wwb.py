"""Weiss-Weinstein error bounds for the array observation model.

Three signal models are covered:

* random-phase (``rp``): initial phase uniform per coherent interval, SNR
  known; the primary model, evaluated in closed form for uniform-box and
  Gaussian priors,
* known-phase (``kp``): conditional model with the phase assumed known; its
  value depends on the coordinate origin of the sampling vector,
* unconditional (``uc``): complex Gaussian amplitude, so the per-trial SNR
  is exponentially distributed.

For a single-column test point h the random-phase bound is the rank-one
matrix ``WWB(h) = h h^T / Q`` with

    Q = 2 * (eta(h, h) - eta(h, -h)) / eta(h, 0)^2,
    eta(v, vt) = eta_acute(v, vt) * xi(v, vt),

where ``eta_acute`` integrates the likelihood overlap over observations and
``xi`` (see :mod:`wwb_adapt.priors`) integrates over the prior.  The
tightest bound is found by maximizing a weighted trace over test points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateBeliefError
from .optimize import AnnealConfig, anneal_maximize, anneal_maximize_batch
from .priors import (
    GaussianPrior,
    PriorBelief,
    TestPointDomain,
    UniformBoxPrior,
    test_point_domain,
    xi,
)
from .signal_model import SamplingMatrix

__all__ = [
    "CostQuery",
    "WwbEvaluation",
    "ScalingCurve",
    "eta_acute",
    "rp_wwb",
    "rp_wwb_batch",
    "kp_wwb",
    "uc_wwb",
    "wwb_cost",
    "scaling_cost_curve",
    "default_weights",
]

# Evaluations whose closed-form denominator falls below this fraction of its
# leading term are flagged invalid: h -> 0 gives 0/0 and contributes nothing
# to the sup over test points.
DENOM_GUARD = 1e-12

# Costs within this relative tolerance of the minimum count as ties when
# selecting the optimal scaling; the smallest (most conservative) g wins.
# The unconditional model produces exactly tied basin minima, so bitwise
# comparison alone would pick among them by floating-point noise.
ARGMIN_TIE_RTOL = 1e-9

MODELS = ("rp", "kp", "uc")


def default_weights(n_params: int) -> np.ndarray:
    """Unit weight on every frequency coordinate, zero on the phase."""
    w = np.ones(n_params)
    w[-1] = 0.0
    return w


@dataclass(frozen=True)
class CostQuery:
    """Inputs of a bound optimization: prior, sampling scheme, SNR, weighting.

    ``snr`` is linear.  ``weights`` balances the contribution of each
    parameter coordinate to the scalar cost; it defaults to frequency
    coordinates only.
    """

    prior: PriorBelief
    sampling: SamplingMatrix
    snr: float
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.snr < 0:
            raise ValueError("snr must be nonnegative (linear scale)")
        q = self.sampling.n_params
        if self.prior.n_params != q:
            raise ValueError(
                f"prior dimension {self.prior.n_params} does not match sampling q={q}"
            )
        w = default_weights(q) if self.weights is None else np.asarray(
            self.weights, dtype=float
        )
        if w.shape != (q,):
            raise ValueError(f"weights must have shape ({q},)")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be nonnegative and not all zero")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "snr", float(self.snr))


@dataclass(frozen=True)
class WwbEvaluation:
    """Bound at one test point: scalar Q, rank-one matrix, weighted trace."""

    test_point: np.ndarray
    scalar_q: float
    matrix: np.ndarray
    weighted_trace: float
    valid: bool


@dataclass(frozen=True)
class ScalingCurve:
    """Optimized cost per candidate scaling, plus the argmin selection."""

    g_values: np.ndarray
    costs: np.ndarray
    test_points: np.ndarray
    argmin_index: int

    @property
    def g_opt(self) -> float:
        return float(self.g_values[self.argmin_index])


def eta_acute(sampling: SamplingMatrix, snr: float, v, vt):
    """Likelihood-overlap integral over observations.

    For the unit-noise Gaussian model this is
    exp(-snr/2 * (N - Re sum_n exp(i [D (vt - v)]_n))), which equals 1 when
    vt = v or snr = 0.  Vectorized over leading axes of ``v``/``vt``.
    """
    diff = np.asarray(vt, dtype=float) - np.asarray(v, dtype=float)
    phases = diff @ sampling.full().T
    c = np.cos(phases).sum(axis=-1)
    out = np.exp(-0.5 * snr * (sampling.n_samples - c))
    return out if diff.ndim > 1 else float(out)


def _xi_triplet(prior, points):
    """(xi(h,h), xi(h,-h), xi(h,0)) sharing common subexpressions.

    Identical to calling :func:`wwb_adapt.priors.xi` three times; for the
    uniform box xi(h,0) equals xi(h,h) on the rectangular support.
    """
    if isinstance(prior, UniformBoxPrior):
        lengths = np.concatenate([prior.widths, [2.0 * np.pi]])
        habs = np.abs(points)
        xi_hh = (np.maximum(0.0, lengths - habs) / lengths).prod(axis=-1)
        xi_hmh = (np.maximum(0.0, lengths - 2.0 * habs) / lengths).prod(axis=-1)
        return xi_hh, xi_hmh, xi_hh
    if isinstance(prior, GaussianPrior):
        hphi = np.abs(points[..., -1])
        p1 = np.maximum(0.0, 2.0 * np.pi - hphi) / (2.0 * np.pi)
        p2 = np.maximum(0.0, 2.0 * np.pi - 2.0 * hphi) / (2.0 * np.pi)
        s = (points[..., :-1] ** 2 / prior.variances).sum(axis=-1)
        return p1, np.exp(-0.5 * s) * p2, np.exp(-0.125 * s) * p1
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


def _rp_q_values(prior, snr, n_samples, points, c1, c2):
    """Scalar Q and validity from precomputed steering sums.

    ``c1`` and ``c2`` are Re sum_n exp(i (D h)_n) and the same at 2h.  The
    eta(h, h) factor needs no steering sum because the observation overlap
    at zero shift is exactly one.
    """
    e0 = np.exp(-0.5 * snr * (n_samples - c1))
    e2 = np.exp(-0.5 * snr * (n_samples - c2))
    xi_hh, xi_hmh, xi_h0 = _xi_triplet(prior, points)
    core = xi_hh - e2 * xi_hmh
    nonzero = np.any(points != 0.0, axis=-1)
    valid = nonzero & (xi_h0 > 0.0) & (core > DENOM_GUARD * xi_hh)
    denom = np.where(valid, (e0 * xi_h0) ** 2, 1.0)
    q_values = np.where(valid, 2.0 * core / denom, np.nan)
    return q_values, valid


def _steering_sums(phases):
    """Re sum exp(i x) and Re sum exp(i 2x) with one trig evaluation."""
    c = np.cos(phases)
    return c.sum(axis=-1), (2.0 * c * c - 1.0).sum(axis=-1)


def _test_point_phases(full_matrix, points):
    """(..., N) phase block (D h) accumulated column-wise.

    Written as broadcast products rather than a matmul so that results do
    not depend on the batch size (BLAS kernels round differently by shape),
    keeping batch evaluation bitwise equal to scalar evaluation.
    """
    phases = np.multiply.outer(points[..., 0], full_matrix[:, 0])
    for j in range(1, full_matrix.shape[1]):
        phases += np.multiply.outer(points[..., j], full_matrix[:, j])
    return phases


def rp_wwb_batch(query: CostQuery, points):
    """Random-phase bound at a batch of test points.

    ``points`` has shape (m, q).  Returns ``(q_values, traces, valid)``; the
    scalar path is this same computation with m = 1, so batch and scalar
    evaluation agree bitwise.  Invalid points (outside the support overlap,
    zero, or with a degenerate denominator) yield NaN entries.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phases = _test_point_phases(query.sampling.full(), points)
    c1, c2 = _steering_sums(phases)
    q_values, valid = _rp_q_values(
        query.prior, query.snr, query.sampling.n_samples, points, c1, c2
    )
    traces = (points**2 @ query.weights) / q_values
    return q_values, traces, valid


def rp_wwb(query: CostQuery, test_point) -> WwbEvaluation:
    """Random-phase bound at a single test point (closed form)."""
    h = np.asarray(test_point, dtype=float)
    q_values, traces, valid = rp_wwb_batch(query, h[None, :])
    return WwbEvaluation(
        test_point=h.copy(),
        scalar_q=float(q_values[0]),
        matrix=np.outer(h, h) / q_values[0],
        weighted_trace=float(traces[0]),
        valid=bool(valid[0]),
    )


def _kp_from_phases(width, snr, n, h, x):
    """Known-phase value from precomputed phase block x = g * outer(h, d)."""
    s1, s2 = _steering_sums(x)
    e0 = np.exp(-0.5 * snr * (n - s1))
    e2 = np.exp(-0.5 * snr * (n - s2))
    a = width - np.abs(h)
    core = a - e2 * np.maximum(0.0, width - 2.0 * np.abs(h))
    valid = (np.abs(h) > 0.0) & (a > 0.0) & (core > DENOM_GUARD * a)
    return np.where(
        valid, 0.5 * h**2 * e0**2 * a**2 / (width * np.where(valid, core, 1.0)), np.nan
    )


def _uc_from_phases(width, avg_snr, n, h, x):
    """Unconditional value from precomputed phase block x = g * outer(h, d)."""
    kappa = avg_snr**2 / (n * avg_snr + 1.0)
    z = np.exp(1j * x)
    m1 = np.abs(z.sum(axis=-1)) ** 2
    m2 = np.abs((z * z).sum(axis=-1)) ** 2
    a1 = 1.0 + 0.25 * kappa * (n**2 - m1)
    a2 = 1.0 + 0.25 * kappa * (n**2 - m2)
    a = width - np.abs(h)
    core = a - np.maximum(0.0, width - 2.0 * np.abs(h)) / a2
    valid = (np.abs(h) > 0.0) & (a > 0.0) & (core > DENOM_GUARD * a)
    return np.where(
        valid,
        h**2 / (2.0 * width) * a**2 / a1**2 / np.where(valid, core, 1.0),
        np.nan,
    )


def kp_wwb(width: float, positions, scale: float, snr: float, offset):
    """Known-phase bound for one frequency on a uniform prior of given width.

    Single-frequency analog of the uniform random-phase closed form with
    the phase dimension removed; the observation overlap uses
    Re sum_n exp(i g d_n h), so the value changes under a coordinate-origin
    shift of ``positions``.  Invalid offsets (|h| >= width, h = 0, or a
    degenerate denominator) yield NaN.  Vectorized over ``offset``.
    """
    d = np.asarray(positions, dtype=float)
    h = np.asarray(offset, dtype=float)
    value = _kp_from_phases(width, snr, d.size, h, scale * np.multiply.outer(h, d))
    return value if h.ndim else float(value)


def uc_wwb(width: float, positions, scale: float, avg_snr: float, offset):
    """Unconditional bound: complex Gaussian amplitude with mean power avg_snr.

    Uses kappa = avg_snr^2 / (N * avg_snr + 1); the per-trial SNR is
    exponentially distributed with mean ``avg_snr``.  Symmetric in the
    offset, so optimization may be restricted to [0, width].  Vectorized
    over ``offset``; invalid offsets yield NaN.
    """
    d = np.asarray(positions, dtype=float)
    h = np.asarray(offset, dtype=float)
    value = _uc_from_phases(width, avg_snr, d.size, h, scale * np.multiply.outer(h, d))
    return value if h.ndim else float(value)


def _uniform_width(prior: PriorBelief) -> float:
    """Support width for the single-frequency kp/uc models.

    Gaussian beliefs are matched by variance: width = sqrt(12 * var).
    """
    if isinstance(prior, UniformBoxPrior):
        return float(prior.widths[0])
    if isinstance(prior, GaussianPrior):
        return float(np.sqrt(12.0 * prior.variances[0]))
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


def _scalar_domain(model: str, width: float) -> TestPointDomain:
    # kp is not symmetric for off-center arrays, so keep both signs there.
    if model == "kp":
        return TestPointDomain(np.array([-width]), np.array([width]))
    return TestPointDomain(np.array([0.0]), np.array([width]))


def wwb_cost(query: CostQuery, model: str = "rp", cfg: Optional[AnnealConfig] = None):
    """Tightest bound over test points: sup of the weighted trace.

    Returns ``(cost, h_star)``.  The sup is computed by the global
    optimizer (coarse grid plus annealing refinement) and is deterministic
    given ``cfg.seed``.  Raises :class:`DegenerateBeliefError` when no test
    point is valid.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    cfg = cfg or AnnealConfig()
    if model == "rp":
        domain = test_point_domain(query.prior)

        def objective(points):
            _, traces, valid = rp_wwb_batch(query, points)
            return np.where(valid, traces, -np.inf)

    else:
        if query.sampling.n_params != 2:
            raise ValueError("kp/uc models require a single frequency column")
        width = _uniform_width(query.prior)
        positions = query.sampling.columns[:, 0]
        bound_fn = kp_wwb if model == "kp" else uc_wwb
        w0 = query.weights[0]
        domain = _scalar_domain(model, width)

        def objective(points):
            values = bound_fn(width, positions, 1.0, query.snr, points[:, 0])
            return np.where(np.isnan(values), -np.inf, w0 * values)

    try:
        h_star, cost = anneal_maximize(objective, domain.lower, domain.upper, cfg)
    except ValueError as exc:
        raise DegenerateBeliefError(
            f"no valid test point for model {model!r}: {exc}"
        ) from exc
    return float(cost), h_star


def scaling_cost_curve(
    prior: PriorBelief,
    positions,
    snr: float,
    weights,
    g_values,
    model: str = "rp",
    cfg: Optional[AnnealConfig] = None,
) -> ScalingCurve:
    """Optimized cost for each candidate scaling of the sampling vector.

    The sampling matrix for scaling g is ``g * positions`` plus the phase
    column.  All scalings are optimized jointly as one annealing batch with
    a shared seed, which keeps look-up-table construction fast.  The argmin
    treats costs within ``ARGMIN_TIE_RTOL`` of the minimum as tied and
    returns the smallest such g.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    cfg = cfg or AnnealConfig()
    d = np.asarray(positions, dtype=float)
    g_values = np.asarray(g_values, dtype=float)
    if g_values.size == 0:
        raise ValueError("g grid must be non-empty")
    if np.any(g_values <= 0):
        raise ValueError("scalings must be positive")
    m = g_values.size
    n = d.size
    snr = float(snr)

    if model == "rp":
        if prior.n_params != 2:
            raise ValueError("scaling task expects one frequency plus phase")
        w = (
            default_weights(2)
            if weights is None
            else np.asarray(weights, dtype=float)
        )
        domain = test_point_domain(prior)

        def objective(points, rows):
            # points: (r, n_pts, 2); phases: (r, n_pts, N)
            g = g_values if rows is None else g_values[rows]
            phases = np.multiply.outer(g[:, None] * points[..., 0], d)
            phases += points[..., 1, None]
            c1, c2 = _steering_sums(phases)
            q_values, valid = _rp_q_values(prior, snr, n, points, c1, c2)
            traces = (points**2 @ w) / q_values
            return np.where(valid, traces, -np.inf)

    else:
        width = _uniform_width(prior)
        core_fn = _kp_from_phases if model == "kp" else _uc_from_phases
        w0 = 1.0 if weights is None else float(np.asarray(weights, dtype=float)[0])
        domain = _scalar_domain(model, width)

        def objective(points, rows):
            g = g_values if rows is None else g_values[rows]
            h = points[..., 0]                      # (r, n_pts)
            x = g[:, None, None] * np.multiply.outer(h, d)
            values = core_fn(width, snr, n, h, x)
            return np.where(np.isnan(values), -np.inf, w0 * values)

    lower = np.tile(domain.lower, (m, 1))
    upper = np.tile(domain.upper, (m, 1))
    try:
        h_stars, costs = anneal_maximize_batch(objective, lower, upper, cfg)
    except ValueError as exc:
        raise DegenerateBeliefError(
            f"no valid test point for model {model!r}: {exc}"
        ) from exc
    tied = costs <= costs.min() * (1.0 + ARGMIN_TIE_RTOL)
    argmin = int(np.flatnonzero(tied)[0])
    return ScalingCurve(
        g_values=g_values.copy(),
        costs=costs,
        test_points=h_stars,
        argmin_index=argmin,
    )
