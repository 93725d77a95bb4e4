"""Independent numerical oracles used to validate the closed forms.

Everything here evaluates the defining integrals directly (quadrature or
Monte Carlo) and deliberately shares no code with the closed-form paths in
the package.
"""

import numpy as np

from wwb_adapt.priors import GaussianPrior, UniformBoxPrior

TWO_PI = 2.0 * np.pi


def _overlap_uniform_1d(length, v, vt, n_points):
    """integral over [0, L] of (1/L) 1[t+v in [0,L]] 1[t+vt in [0,L]] dt."""
    t = np.linspace(0.0, length, n_points)
    inside = ((t + v >= 0) & (t + v <= length) & (t + vt >= 0) & (t + vt <= length))
    return np.trapezoid(inside.astype(float), t) / length


def _overlap_gaussian_1d(sigma, v, vt, n_points):
    """integral over R of sqrt(N(t+v; 0, s^2) N(t+vt; 0, s^2)) dt."""
    center = -(v + vt) / 2.0
    span = 10.0 * sigma + abs(v - vt)
    t = np.linspace(center - span, center + span, n_points)
    log_pdf = lambda x: -0.5 * (x / sigma) ** 2 - 0.5 * np.log(TWO_PI * sigma**2)
    integrand = np.exp(0.5 * (log_pdf(t + v) + log_pdf(t + vt)))
    return np.trapezoid(integrand, t)


def xi_quadrature(prior, v, vt, n_uniform=1_000_001, n_gauss=200_001):
    """Trapezoid evaluation of the prior-overlap integral, factorized per
    coordinate (the priors are products of independent coordinates)."""
    v = np.asarray(v, dtype=float)
    vt = np.asarray(vt, dtype=float)
    total = _overlap_uniform_1d(TWO_PI, v[-1], vt[-1], n_uniform)
    if isinstance(prior, UniformBoxPrior):
        for j, width in enumerate(prior.widths):
            total *= _overlap_uniform_1d(width, v[j], vt[j], n_uniform)
    elif isinstance(prior, GaussianPrior):
        for j, var in enumerate(prior.variances):
            total *= _overlap_gaussian_1d(np.sqrt(var), v[j], vt[j], n_gauss)
    else:
        raise TypeError(type(prior).__name__)
    return total


def xi_monte_carlo(prior, v, vt, n_samples, rng):
    """Monte Carlo of the defining integral: E_p[ sqrt(p(t+v)p(t+vt)) / p(t) ]."""
    v = np.asarray(v, dtype=float)
    vt = np.asarray(vt, dtype=float)
    if isinstance(prior, UniformBoxPrior):
        lo = np.concatenate([prior.center - prior.widths / 2.0, [-np.pi]])
        hi = np.concatenate([prior.center + prior.widths / 2.0, [np.pi]])
        theta = rng.uniform(lo, hi, size=(n_samples, lo.size))
        inside_v = np.all((theta + v >= lo) & (theta + v <= hi), axis=1)
        inside_vt = np.all((theta + vt >= lo) & (theta + vt <= hi), axis=1)
        return float(np.mean(inside_v & inside_vt))
    if isinstance(prior, GaussianPrior):
        # Importance-sample the frequency block from a 3x widened proposal:
        # the prior-ratio estimator is lognormal with heavy tails, while the
        # widened proposal keeps integrand/proposal bounded.
        sig = np.sqrt(prior.variances)
        prop_sig = 3.0 * sig
        u = prior.mean + prop_sig * rng.standard_normal((n_samples, sig.size))
        phi = rng.uniform(-np.pi, np.pi, size=n_samples)

        def log_freq_pdf(x, scale):
            return (
                -0.5 * ((x - prior.mean) / scale) ** 2
                - 0.5 * np.log(2 * np.pi * scale**2)
            ).sum(axis=1)

        log_weight = (
            0.5 * (log_freq_pdf(u + v[:-1], sig) + log_freq_pdf(u + vt[:-1], sig))
            - log_freq_pdf(u, prop_sig)
        )
        in_v = (np.abs(phi + v[-1]) <= np.pi) & (np.abs(phi + vt[-1]) <= np.pi)
        return float(np.mean(np.exp(log_weight) * in_v))
    raise TypeError(type(prior).__name__)


def eta_acute_analytic(full_matrix, snr, v, vt):
    """Observation-overlap integral, re-derived from the Gaussian model."""
    phases = full_matrix @ (np.asarray(vt, float) - np.asarray(v, float))
    n = full_matrix.shape[0]
    return float(np.exp(-0.5 * snr * (n - np.cos(phases).sum())))


def eta_acute_monte_carlo(full_matrix, snr, v, vt, n_draws, rng):
    """MC of integral sqrt(p(x|theta+v) p(x|theta+vt)) dx at theta = 0.

    Draw x ~ p(.|v) and average sqrt(p(x|vt)/p(x|v)).
    """
    n = full_matrix.shape[0]
    a_v = np.exp(1j * (full_matrix @ np.asarray(v, float)))
    a_vt = np.exp(1j * (full_matrix @ np.asarray(vt, float)))
    root_snr = np.sqrt(snr)
    noise = (
        rng.standard_normal((n_draws, n)) + 1j * rng.standard_normal((n_draws, n))
    ) / np.sqrt(2.0)
    x = a_v * root_snr + noise
    r_v = x - a_v * root_snr
    r_vt = x - a_vt * root_snr
    log_ratio = -np.sum(np.abs(r_vt) ** 2 - np.abs(r_v) ** 2, axis=1)
    return float(np.mean(np.exp(0.5 * log_ratio)))


def q_from_defining_integrals(prior, full_matrix, snr, h, xi_fn=xi_quadrature, **kw):
    """Assemble Q = 2 (eta(h,h) - eta(h,-h)) / eta(h,0)^2 from first principles.

    eta(v, vt) = eta_acute(v, vt) * xi(v, vt) with analytic eta_acute and a
    numerically integrated xi.
    """
    h = np.asarray(h, dtype=float)
    zero = np.zeros_like(h)
    eta_hh = eta_acute_analytic(full_matrix, snr, h, h) * xi_fn(prior, h, h, **kw)
    eta_hmh = eta_acute_analytic(full_matrix, snr, h, -h) * xi_fn(prior, h, -h, **kw)
    eta_h0 = eta_acute_analytic(full_matrix, snr, h, zero) * xi_fn(prior, h, zero, **kw)
    return 2.0 * (eta_hh - eta_hmh) / eta_h0**2
