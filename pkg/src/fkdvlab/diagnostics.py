"""Invariants, moments, weighted norms, tail-decay fits and the
near-zero spectral jump estimator.

All integrals use the rectangle rule native to the periodic grid, which
is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .spectral import (Field, MEAN_TOL, bessel, frac_deriv, hilbert, l2_norm,
                       mean_coefficient, transform, truncated_weight)

#: fits are rejected above this (relative rms) log-log residual
FIT_RESIDUAL_MAX = 0.05


@dataclass
class DiagnosticsRecord:
    t: float
    i1: float
    i2: float
    i3: Optional[float]
    i3_reason: str
    mean: float
    moment_x: float
    max_u: float
    min_ux: float
    tail_frac: float
    wnorms: dict = field(default_factory=dict)
    zsnorm: Optional[float] = None
    jump: Optional[complex] = None


def invariants(f: Field, alpha: float):
    """The three formally conserved functionals (i1, i2, i3).

    i3 needs D^(alpha/2); for alpha < 0 that operator lives on the
    zero-mean class, so i3 is reported as None with a reason when the
    mean is not negligible.
    """
    dx = f.grid.dx
    u = f.samples
    i1 = float(np.sum(u) * dx)
    i2 = float(np.sum(u * u) * dx)
    i3 = None
    reason = ""
    try:
        half = frac_deriv(f, alpha / 2.0)
        i3 = float(np.sum(half.samples ** 2) * dx - np.sum(u ** 3) * dx / 3.0)
    except DomainError as exc:
        reason = str(exc)
    return i1, i2, i3, reason


def moment_first(f: Field) -> float:
    """Box first moment sum x_j u_j dx (meaningful only for clean tails)."""
    return float(np.sum(f.grid.x * f.samples) * f.grid.dx)


def weighted_norm(f: Field, r: float, weight: str = "exact",
                  n_w: float = 0.0) -> float:
    """L2 norm against <x>^r (or its truncated version).

    weight = "exact" uses (1+x^2)^(r/2); weight = "truncated" uses the
    smooth bounded surrogate with parameter ``n_w``.
    """
    if r < 0:
        raise ConfigurationError(f"weight order must be >= 0, got {r}")
    if weight == "exact":
        w2r = (1.0 + f.grid.x ** 2) ** r
    elif weight == "truncated":
        w2r = truncated_weight(f.grid, n_w, 1.0) ** (2.0 * r)
    else:
        raise ConfigurationError(f"unknown weight kind '{weight}'")
    return float(np.sqrt(np.sum(w2r * f.samples ** 2) * f.grid.dx))


def sobolev_norm(f: Field, s: float) -> float:
    """H^s norm through the Bessel symbol <k>^s."""
    return l2_norm(bessel(f, s))


def tail_mass(f: Field, radius: float) -> float:
    """Squared mass beyond |x| > radius."""
    sel = np.abs(f.grid.x) > radius
    return float(np.sum(f.samples[sel] ** 2) * f.grid.dx)


@dataclass
class DecayFit:
    radii: np.ndarray
    tail_mass: np.ndarray
    fitted_p: float
    r_critical: float
    fit_window: tuple
    residual: float
    accepted: bool
    superalgebraic: bool = False


def decay_fit(f: Field, window: tuple, n_radii: int = 12) -> DecayFit:
    """Pointwise decay exponent from the tail-mass profile.

    For |u| ~ |x|^-p the half-box tail mass follows
    ``Phi(R) = c (R^(1-2p) - (L/2)^(1-2p))``; the subtracted end term is
    what the finite box cuts off, and ignoring it biases a naive log-log
    slope upward.  The exponent is fitted against the truncated model by
    a one-parameter search.  Super-algebraic profiles (a Gaussian, say)
    are flagged with p = inf rather than fitted.
    """
    from scipy.optimize import minimize_scalar

    r_lo, r_hi = window
    if not (0 < r_lo < r_hi):
        raise ConfigurationError(f"invalid fit window {window}")
    if r_hi > 0.35 * f.grid.length:
        raise ConfigurationError(
            f"fit window must stay inside 0.35 L = {0.35 * f.grid.length:g} "
            "to avoid wrap-around bias")
    radii = np.geomspace(r_lo, r_hi, n_radii)
    phi = np.array([tail_mass(f, R) for R in radii])
    if np.any(phi <= 0):
        return DecayFit(radii, phi, math.inf, math.inf, window, 0.0,
                        accepted=False, superalgebraic=True)
    # reject non-monotone profiles beyond round-off
    growth = np.diff(phi) / phi[:-1]
    if np.any(growth > 1e-6):
        return DecayFit(radii, phi, math.nan, math.nan, window,
                        float(np.max(growth)), accepted=False)
    logphi = np.log(phi)
    scale = float(np.std(logphi)) or 1.0
    edge = 0.5 * f.grid.length

    def rms(p):
        shape = radii ** (1.0 - 2.0 * p) - edge ** (1.0 - 2.0 * p)
        logm = np.log(shape)
        c = float(np.mean(logphi - logm))
        return float(np.sqrt(np.mean((logphi - logm - c) ** 2)))

    best = minimize_scalar(rms, bounds=(0.55, 15.0), method="bounded",
                           options={"xatol": 1e-6})
    p = float(best.x)
    residual = float(best.fun) / scale
    if p >= 14.0:
        return DecayFit(radii, phi, math.inf, math.inf, window, residual,
                        accepted=False, superalgebraic=True)
    return DecayFit(radii, phi, p, p - 0.5, window, residual,
                    accepted=residual <= FIT_RESIDUAL_MAX)


def interpolation_probe(f: Field, a: float, b: float, theta1: float) -> float:
    """Ratio ||J^(th a) (<x>^((1-th) b) f)|| / (||<x>^b f||^(1-th) ||J^a f||^th).

    Scale-invariant in the amplitude of f; finite and order-one for
    smooth concentrated fields.
    """
    if not (a > 0 and b > 0):
        raise ConfigurationError("orders a and b must be positive")
    if not (0 < theta1 < 1):
        raise ConfigurationError(f"theta1 must lie in (0,1), got {theta1}")
    wless = Field(f.grid, (1.0 + f.grid.x ** 2) ** ((1.0 - theta1) * b / 2.0) * f.samples)
    lhs = sobolev_norm(wless, theta1 * a)
    den_w = weighted_norm(f, b)
    den_s = sobolev_norm(f, a)
    if den_w == 0 or den_s == 0:
        raise DomainError("degenerate input: zero weighted or Sobolev norm")
    return lhs / (den_w ** (1.0 - theta1) * den_s ** theta1)


def spectral_jump(f: Field, refine: bool = False):
    """One-sided difference quotients of u_hat at the smallest wavenumbers.

    Returns (m_plus, m_minus) estimating the one-sided derivatives of
    u_hat at 0+ and 0-.  ``refine`` switches to the 3-point one-sided
    formula (4 u_hat(k1) - u_hat(2 k1)) / (2 k1).  For real fields the
    pair satisfies m_minus = -conj(m_plus).
    """
    mean = mean_coefficient(f)
    if abs(mean) > MEAN_TOL * max(l2_norm(f), 1e-300):
        raise DomainError(
            f"jump estimator needs zero mean; u_hat(0) = {mean:.3e}")
    spec = transform(f)
    c = spec.coefficients
    k1 = f.grid.k[1]
    if refine:
        m_plus = (4.0 * c[1] - c[2]) / (2.0 * k1)
        m_minus = (4.0 * c[-1] - c[-2]) / (-2.0 * k1)
    else:
        m_plus = c[1] / k1
        m_minus = c[-1] / (-k1)
    return complex(m_plus), complex(m_minus)


def make_record(f: Field, t: float, alpha: float, weight_orders=(),
                sobolev_order: Optional[float] = None,
                with_jump: bool = False) -> DiagnosticsRecord:
    """Assemble the per-time diagnostics row."""
    from .solver import tail_fraction        # local import; solver depends on us

    i1, i2, i3, reason = invariants(f, alpha)
    ux = frac_deriv_dx(f)
    rec = DiagnosticsRecord(
        t=t, i1=i1, i2=i2, i3=i3, i3_reason=reason,
        mean=mean_coefficient(f),
        moment_x=moment_first(f),
        max_u=float(np.max(f.samples)),
        min_ux=float(np.min(ux.samples)),
        tail_frac=tail_fraction(f.samples, f.grid),
        wnorms={r: weighted_norm(f, r) for r in weight_orders},
    )
    if sobolev_order is not None:
        rec.zsnorm = sobolev_norm(f, sobolev_order)
    if with_jump:
        rec.jump = spectral_jump(f)[0]
    return rec


def frac_deriv_dx(f: Field) -> Field:
    """Spectral first derivative."""
    from .spectral import apply_multiplier, derivative_symbol
    return apply_multiplier(f, derivative_symbol())


def hilbert_weighted_norm(f: Field, r: float) -> float:
    """Optional companion norm ||<x>^r H u||_2 tracked for the alpha = -1 runs."""
    return weighted_norm(hilbert(f), r)
