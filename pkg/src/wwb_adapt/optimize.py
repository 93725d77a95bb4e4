"""Bounded global maximization: coarse grid seeding plus multi-particle
simulated annealing, with a deterministic pattern-search polish.

Objectives must be total on the box; invalid points map to -inf.  All
routines are deterministic given the config seed.  Batched variants advance
many independent problems in lockstep with shared vectorized evaluations,
which is what makes look-up-table construction cheap; problems whose
improvement has stalled are frozen early and skip further evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AnnealConfig", "grid_scan", "anneal_maximize", "anneal_maximize_batch"]


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing settings.

    ``initial_temperature`` is both the proposal scale (as a fraction of the
    box width) and, multiplied by the per-problem objective spread, the
    Metropolis acceptance temperature.  A problem stops once the mean
    relative improvement of its incumbent over the last ``stop_window``
    temperature stages falls below ``stop_threshold``.
    """

    n_particles: int = 32
    grid_points_per_dim: int = 23
    initial_temperature: float = 0.3
    cooling: float = 0.95
    steps_per_temperature: int = 50
    stop_threshold: float = 1e-4
    stop_window: int = 3
    max_temperatures: int = 60
    polish: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.grid_points_per_dim < 2:
            raise ValueError("grid needs at least two points per dimension")


def _unit_grid(dim: int, points: int) -> np.ndarray:
    """Tensor grid on [0, 1]^dim including corners, C-ordered, (points^dim, dim)."""
    ticks = np.linspace(0.0, 1.0, points)
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_scan(f, lower, upper, points_per_dim: int):
    """Exhaustively evaluate f on a tensor grid spanning the box.

    Returns ``(best_x, best_f, values)`` with values in C order of the grid;
    ties resolve to the lowest index.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if points_per_dim < 2:
        raise ValueError("grid needs at least two points per dimension")
    pts = lower + _unit_grid(lower.size, points_per_dim) * (upper - lower)
    values = np.asarray(f(pts), dtype=float)
    best = int(np.argmax(values))
    return pts[best].copy(), float(values[best]), values


def _reflect(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Reflect points at the box boundaries (period 2 * width)."""
    width = upper - lower
    y = np.mod(x - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return lower + y


def _polish(f, x, fval, lower, upper, max_sweeps: int = 120):
    """Deterministic pattern search from the incumbent, batched per problem.

    Each sweep proposes +/- step along every coordinate; the best proposal
    is taken if it improves, otherwise the step is halved.  Improves the
    annealed value to local-optimum accuracy so downstream argmins over
    near-flat cost curves are reproducible.
    """
    m, q = x.shape
    width = upper - lower
    step = 0.02 * width.copy()
    rows = np.arange(m)
    eye = np.eye(q)
    offsets = np.concatenate([eye, -eye], axis=0)                # (2q, q)
    for _ in range(max_sweeps):
        cand = x[:, None, :] + offsets[None, :, :] * step[:, None, :]
        cand = np.clip(cand, lower[:, None, :], upper[:, None, :])
        fc = np.asarray(f(cand, None), dtype=float)              # (m, 2q)
        best = np.argmax(fc, axis=1)
        best_val = fc[rows, best]
        improved = best_val > fval
        x = np.where(improved[:, None], cand[rows, best], x)
        fval = np.where(improved, best_val, fval)
        step = np.where(improved[:, None], step, step * 0.5)
        if np.all(step < 1e-13 * width):
            break
    return x, fval


def anneal_maximize_batch(f, lower, upper, cfg: AnnealConfig):
    """Maximize m independent problems over per-problem boxes.

    ``f(points, rows)`` maps an (r, n, q) block of points to (r, n) values;
    ``rows`` gives the problem index of each block row (None means all m in
    order).  Returns ``(x_star, f_star)`` of shapes (m, q) and (m,); each
    f_star is at least the best value seen on that problem's seeding grid.
    Random draws are full-shape every step, so freezing converged problems
    does not perturb the remaining ones.
    """
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    m, q = lower.shape
    rng = np.random.default_rng(cfg.seed)
    width = upper - lower

    unit = _unit_grid(q, cfg.grid_points_per_dim)                # (G, q)
    grid_pts = lower[:, None, :] + unit[None, :, :] * width[:, None, :]
    grid_vals = np.asarray(f(grid_pts, None), dtype=float)       # (m, G)

    finite = np.isfinite(grid_vals)
    dead = ~finite.any(axis=1)
    if np.any(dead):
        idx = np.flatnonzero(dead)
        raise ValueError(
            f"objective is -inf on the entire seeding grid for problem(s) {idx.tolist()}"
        )

    n_p = min(cfg.n_particles, grid_vals.shape[1])
    order = np.argsort(-grid_vals, axis=1, kind="stable")[:, :n_p]
    x = np.take_along_axis(grid_pts, order[:, :, None], axis=1).copy()
    f_cur = np.take_along_axis(grid_vals, order, axis=1).copy()
    best_x = x[:, 0, :].copy()
    best_f = f_cur[:, 0].copy()

    # Metropolis temperature in objective units: spread of the finite grid values.
    masked = np.where(finite, grid_vals, np.nan)
    spread = np.nanmax(masked, axis=1) - np.nanpercentile(masked, 25, axis=1)
    f_scale = np.where((spread > 0) & np.isfinite(spread), spread, 1.0)

    temp = cfg.initial_temperature
    history = np.full((cfg.stop_window, m), np.inf)
    active = np.arange(m)
    for stage in range(cfg.max_temperatures):
        prev_best = best_f[active].copy()
        scale_a = (temp * width[active])[:, None, :]
        accept_t = (temp * f_scale[active])[:, None]
        for _ in range(cfg.steps_per_temperature):
            noise = rng.standard_normal((m, n_p, q))
            uniforms = rng.random((m, n_p))
            prop = _reflect(
                x[active] + noise[active] * scale_a,
                lower[active, None, :],
                upper[active, None, :],
            )
            f_prop = np.asarray(f(prop, active), dtype=float)
            delta = f_prop - f_cur[active]
            with np.errstate(over="ignore", invalid="ignore"):
                accept = (delta >= 0) | (
                    uniforms[active] < np.exp(delta / accept_t)
                )
            x[active] = np.where(accept[:, :, None], prop, x[active])
            f_cur[active] = np.where(accept, f_prop, f_cur[active])

            sub = np.arange(active.size)
            step_arg = np.argmax(f_prop, axis=1)
            step_val = f_prop[sub, step_arg]
            improved = step_val > best_f[active]
            rows_improved = active[improved]
            best_x[rows_improved] = prop[sub[improved], step_arg[improved]]
            best_f[rows_improved] = step_val[improved]

        rel = (best_f[active] - prev_best) / np.maximum(np.abs(prev_best), 1e-300)
        history[stage % cfg.stop_window, active] = rel
        if stage >= cfg.stop_window - 1:
            converged = history[:, active].mean(axis=0) < cfg.stop_threshold
            active = active[~converged]
            if active.size == 0:
                break
        temp *= cfg.cooling

    if cfg.polish:
        best_x, best_f = _polish(f, best_x, best_f, lower, upper)
    return best_x, best_f


def anneal_maximize(f, lower, upper, cfg: AnnealConfig):
    """Maximize a single objective over a box.

    ``f`` maps an (n, q) array of points to (n,) values.  Returns
    ``(x_star, f_star)``; f_star never falls below the best coarse-grid
    value, and repeated calls with the same seed are byte-identical.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    q = lower.size

    def batched(block, rows):
        return np.asarray(f(block.reshape(-1, q)), dtype=float).reshape(
            block.shape[:2]
        )

    best_x, best_f = anneal_maximize_batch(
        batched, lower[None, :], upper[None, :], cfg
    )
    return best_x[0], float(best_f[0])
