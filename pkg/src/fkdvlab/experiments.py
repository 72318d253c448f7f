"""Scripted campaigns: moment law, sharp time, constant-frequency jump
evolution, decay thresholds, symmetry checks, wave breaking.

Each campaign returns a report whose metrics carry (measured, expected,
tolerance, passed); passes are always derived from those numbers.  All
campaigns are deterministic for a fixed configuration, seeds included.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from . import diagnostics as diag
from .errors import ConfigurationError, DomainError
from .solver import (InitialCondition, SimConfig, Trajectory, linear_propagator,
                     solve, tail_fraction)
from .spectral import (Field, apply_multiplier, coordinate_multiply,
                       dispersion_symbol, frac_deriv, l2_norm,
                       mean_coefficient, transform)


@dataclass
class MetricEntry:
    """One falsifiable number; ``mode`` is 'abs' (|m-e| <= tol),
    'le' (m <= e + tol) or 'ge' (m >= e - tol)."""

    measured: float
    expected: float
    tolerance: float
    mode: str = "abs"
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.mode == "abs":
            ok = abs(self.measured - self.expected) <= self.tolerance
        elif self.mode == "le":
            ok = self.measured <= self.expected + self.tolerance
        elif self.mode == "ge":
            ok = self.measured >= self.expected - self.tolerance
        else:
            raise ConfigurationError(f"unknown metric mode '{self.mode}'")
        self.passed = bool(ok)


@dataclass
class ExperimentReport:
    name: str
    config_echo: dict
    metrics: dict
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics.values())


@dataclass
class TStarReport:
    moment0: float
    l2sq: float
    t_star_predicted: float
    integral_of_moment: float
    residual: float
    zero_crossing: float
    zero_crossing_expected: float
    passed: bool
    notes: list = field(default_factory=list)


def _require_zero_mean(u0: Field, what: str):
    mean = mean_coefficient(u0)
    if abs(mean) > 1e-10 * max(l2_norm(u0), 1e-300):
        raise DomainError(
            f"{what} assumes zero-mean data; u_hat(0) = {mean:.3e}")


def _echo(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["ic"] = {"family": cfg.ic.family, "params": list(cfg.ic.params),
               "zero_mean_projected": cfg.ic.zero_mean_projected}
    return d


# ---------------------------------------------------------------------------
# moment law


def run_moment_law(cfg: SimConfig) -> ExperimentReport:
    """First-moment production law: d/dt of the first moment is half the
    conserved squared L2 norm, for zero-mean data and -1 < alpha < 1.

    The box moment can only track the line identity up to the moment
    carried by dispersive tails leaving the window; the irreducible gap
    is recorded in the notes.
    """
    if not (-1.0 < cfg.alpha < 1.0) or cfg.alpha == 0.0:
        raise DomainError(
            "the moment production law holds for -1 < alpha < 1, alpha != 0; "
            f"got alpha = {cfg.alpha}")
    grid = cfg.grid()
    u0 = cfg.ic.build(grid)
    _require_zero_mean(u0, "moment law")
    traj = solve(cfg, grid=grid, u0=u0)
    m0 = traj.diagnostics[0].moment_x
    l2sq = traj.diagnostics[0].i2
    devs = [abs(r.moment_x - (m0 + 0.5 * l2sq * r.t)) for r in traj.diagnostics]
    max_dev = max(devs)
    # integral of D^alpha u vanishes identically under the zero-mode convention
    dmean = max(abs(mean_coefficient(frac_deriv(traj.final, cfg.alpha))), 0.0)
    slope = np.polyfit([r.t for r in traj.diagnostics],
                       [r.moment_x for r in traj.diagnostics], 1)[0]
    report = ExperimentReport(
        "moment_law", _echo(cfg),
        {
            "moment_max_deviation": MetricEntry(max_dev, 0.0, 1e-5 * l2sq),
            "dispersive_mean": MetricEntry(dmean, 0.0, 1e-14),
        },
        notes=[
            f"fitted moment slope {slope:.8f} vs predicted {0.5 * l2sq:.8f}",
            "dispersive_mean is zero by the zero-mode convention; "
            "its vanishing is a consistency note, not evidence",
        ])
    if traj.truncated:
        report.notes.append(f"TRUNCATED: {traj.truncation_reason}")
    return report


# ---------------------------------------------------------------------------
# sharp time


def run_tstar(cfg: SimConfig) -> TStarReport:
    """Time-integrated first moment vanishes exactly at the sharp time
    t* = -4 (first moment) / (squared L2 norm) of the data.
    """
    grid = cfg.grid()
    u0 = cfg.ic.build(grid)
    _require_zero_mean(u0, "sharp-time run")
    m0 = diag.moment_first(u0)
    l2sq = diag.invariants(u0, cfg.alpha)[1]
    t_star = -4.0 * m0 / l2sq
    if t_star <= 0:
        raise DomainError(
            f"t* = {t_star:g} is not positive (first moment {m0:g} must be negative)")
    if t_star > cfg.t_final:
        raise ConfigurationError(
            f"t* = {t_star:g} exceeds the horizon t_final = {cfg.t_final:g}; "
            f"rerun with t_final >= {t_star:g}")
    # land on t* exactly with a uniform checkpoint grid for Simpson quadrature
    n_steps = max(8, int(round(t_star / cfg.dt)))
    n_steps += n_steps % 2
    dt_eff = t_star / n_steps
    run_cfg = replace(cfg, dt=dt_eff, t_final=t_star, diag_every=2)
    traj = solve(run_cfg, grid=grid, u0=u0)
    ts = np.array([r.t for r in traj.diagnostics])
    ms = np.array([r.moment_x for r in traj.diagnostics])
    integral = float(simpson(ms, x=ts))
    residual = abs(integral) / (abs(m0) * t_star)
    # moment zero crossing, expected at t*/2
    sign_change = np.nonzero(np.diff(np.sign(ms)))[0]
    if sign_change.size:
        j = sign_change[0]
        zc = ts[j] + (ts[j + 1] - ts[j]) * (-ms[j]) / (ms[j + 1] - ms[j])
    else:
        zc = math.nan
    notes = []
    if traj.truncated:
        notes.append(f"TRUNCATED: {traj.truncation_reason}")
    return TStarReport(
        moment0=m0, l2sq=l2sq, t_star_predicted=t_star,
        integral_of_moment=integral, residual=residual,
        zero_crossing=float(zc), zero_crossing_expected=0.5 * t_star,
        passed=bool(residual <= 1e-4), notes=notes)


# ---------------------------------------------------------------------------
# constant-frequency (alpha = -1) jump evolution


def _states_at(cfg: SimConfig, grid, u0: Field, times: Sequence[float]) -> dict:
    idx = [int(round(t / cfg.dt)) for t in times]
    cadence = math.gcd(*idx) if idx else 1
    run_cfg = replace(cfg, store_every=max(cadence, 1),
                      t_final=max(times), diag_every=max(cadence, 1))
    traj = solve(run_cfg, grid=grid, u0=u0)
    out = {}
    for t in times:
        key = min(traj.states, key=lambda s: abs(s - t))
        if abs(key - t) > 0.5 * cfg.dt:
            raise ConfigurationError(f"time {t:g} not reached (truncated run?)")
        out[t] = traj.states[key]
    return out, traj


def _jump_plus(f: Field) -> complex:
    return diag.spectral_jump(f, refine=True)[0]


def run_two_time_bh(cfg: SimConfig, t1: float, t2: float) -> ExperimentReport:
    """Jump evolution and the two-time identity for the alpha = -1 flow.

    The one-sided derivative of u_hat at 0+ obeys
    ``m(t) = e^{it} m(0) - (||u0||^2 / 2)(e^{it} - 1)`` for the full
    equation (pure rotation when the nonlinearity is off).  The two-time
    identity residual ``R = 2 sin(t2-t1) * moment(t1) -
    (cos(t2-t1) - 1) ||u0||^2`` is reported against the value that the
    jump law predicts; R = 0 is what extra decay at both times would
    force, and generic data violates it.
    """
    if cfg.alpha != -1.0:
        raise ConfigurationError("two-time identity run requires alpha = -1")
    if not (0 <= t1 < t2 <= cfg.t_final):
        raise ConfigurationError(f"need 0 <= t1 < t2 <= t_final, got {t1}, {t2}")
    grids = []
    jumps = {}
    moments = {}
    i2 = None
    for scale in (1, 2):
        sc_cfg = replace(cfg, n=cfg.n * scale, length=cfg.length * scale)
        grid = sc_cfg.grid()
        u0 = cfg.ic.build(grid)
        _require_zero_mean(u0, "two-time identity run")
        times = sorted({t for t in (t1, t2) if t > 0})
        states, traj = _states_at(sc_cfg, grid, u0, times)
        states[0.0] = u0
        jumps[scale] = {t: _jump_plus(states[min(states, key=lambda s: abs(s - t))])
                        for t in (0.0, t1, t2)}
        moments[scale] = {t: diag.moment_first(states[min(states, key=lambda s: abs(s - t))])
                          for t in (0.0, t1, t2)}
        if scale == 1:
            i2 = diag.invariants(u0, cfg.alpha)[1]
        grids.append(grid)

    # Richardson in 1/L: the one-sided quotient bias scales with k1 ~ 1/L
    ext = {t: 2.0 * jumps[2][t] - jumps[1][t] for t in (0.0, t1, t2)}
    m0 = ext[0.0]

    def predicted(t):
        rot = np.exp(1j * t)
        if cfg.nonlinear:
            return rot * m0 - 0.5 * i2 * (rot - 1.0)
        return rot * m0

    tol = 1e-3 if cfg.nonlinear else 1e-6
    errs = {t: abs(ext[t] - predicted(t)) / abs(predicted(t)) for t in (t1, t2)}
    delta = t2 - t1
    r_meas = 2.0 * math.sin(delta) * moments[2][t1] - (math.cos(delta) - 1.0) * i2
    r_pred = 2.0 * math.sin(delta) * (-predicted(t1).imag) - (math.cos(delta) - 1.0) * i2
    report = ExperimentReport(
        "two_time_bh", _echo(cfg),
        {
            "jump_law_rel_error_t1": MetricEntry(errs[t1], 0.0, tol),
            "jump_law_rel_error_t2": MetricEntry(errs[t2], 0.0, tol),
            "identity_residual_vs_prediction": MetricEntry(
                r_meas, r_pred, max(1e-3 * i2, 5e-3 * abs(r_pred))),
        },
        notes=[
            f"identity residual R = {r_meas:.6e} (zero only if extra decay holds "
            "at both times; generic data keeps it nonzero)",
            f"jump m(0) extrapolated = {m0:.6e}",
        ])
    if abs(delta - 2 * math.pi) < 1e-12:
        report.metrics["identity_trivial_at_2pi"] = MetricEntry(
            abs(r_meas), 0.0, 1e-6 * i2)
    return report


# ---------------------------------------------------------------------------
# decay thresholds


def _scaled_cfg(cfg: SimConfig, L: float) -> SimConfig:
    factor = L / cfg.length
    n = int(round(cfg.n * factor))
    n += n % 2
    return replace(cfg, n=n, length=L)


def run_decay_threshold(cfg: SimConfig, r_probe: Sequence[float],
                        L_list: Sequence[float]) -> ExperimentReport:
    """Tail exponent and weighted-norm growth of the free evolution.

    The same physical data is embedded in boxes of increasing size; the
    pointwise tail exponent p of the solution at t_final is fitted from
    the tail-mass profile, and the weighted norm of order r is tracked
    across boxes: at the critical order it keeps growing (log-type),
    a quarter below it converges.
    """
    if len(L_list) < 2:
        raise ConfigurationError("need at least two box sizes")
    L_list = sorted(L_list)
    t = cfg.t_final
    alpha = cfg.alpha
    probe0 = cfg.ic.build(cfg.grid())
    zero_mean = abs(mean_coefficient(probe0)) <= 1e-10 * max(l2_norm(probe0), 1e-300)
    if zero_mean:
        # zero-mean projection of non-decaying-mean data leaves a uniform
        # shelf whose weighted content grows with the box; the mean must
        # vanish structurally (odd or derivative-form data)
        outer = np.abs(probe0.grid.x) > 0.45 * probe0.grid.length
        shelf = float(np.median(probe0.samples[outer]))
        if abs(shelf) > 1e-12 * float(np.max(np.abs(probe0.samples))):
            raise ConfigurationError(
                "zero-mean decay scans need structurally mean-free data "
                "(odd or derivative-form); projection leaves a uniform shelf "
                f"of size {shelf:.3e}")
    r_crit = 1.5 + alpha
    fits = {}
    wnorms = {r: [] for r in set(list(r_probe) + [r_crit, r_crit - 0.25])}
    for L in L_list:
        sc = _scaled_cfg(cfg, L)
        grid = sc.grid()
        u0 = sc.ic.build(grid)
        u_t = linear_propagator(u0, t, alpha)
        if tail_fraction(u_t.samples, grid) > 1e-3:
            raise DomainError(f"contamination before measurement time at L = {L:g}")
        if alpha == -1.0:
            window = (0.015 * L, 0.035 * L)
        else:
            window = (0.04 * L, 0.12 * L)
        fits[L] = diag.decay_fit(u_t, window, n_radii=12)
        for r in wnorms:
            wnorms[r].append(diag.weighted_norm(u_t, r))
    ps = [fits[L].fitted_p for L in L_list]
    # bias from the periodized tail shrinks like 1/L; extrapolate when monotone
    if all(np.isfinite(ps)) and (np.all(np.diff(ps) <= 0) or np.all(np.diff(ps) >= 0)):
        p = 2.0 * ps[-1] - ps[-2]
    else:
        p = ps[-1]
    p_expected = 1.0 if alpha == -1.0 else 2.0 + alpha
    p_tol = 0.05 if alpha == -1.0 else 0.15
    if zero_mean:
        p_expected += 1.0
        # zero-mean data gains one order of tail decay; threshold lifted

    g_crit = np.asarray(wnorms[r_crit])
    g_below = np.asarray(wnorms[r_crit - 0.25])
    inc = np.diff(g_crit ** 2)
    conv_below = abs(g_below[-1] - g_below[-2]) / g_below[-1]
    metrics = {
        "tail_exponent": MetricEntry(float(p), p_expected, p_tol),
        "subcritical_norm_convergence": MetricEntry(conv_below, 0.0, 0.02),
    }
    if zero_mean:
        conv_crit = abs(g_crit[-1] - g_crit[-2]) / g_crit[-1]
        metrics["critical_norm_convergence"] = MetricEntry(conv_crit, 0.0, 0.02)
    else:
        growing = bool(np.all(inc > 0) and inc[-1] >= 0.4 * inc[0])
        metrics["critical_norm_growth"] = MetricEntry(float(growing), 1.0, 0.0)
    def _table(vals, digits):
        return {L: round(float(v), digits) for L, v in zip(L_list, vals)}

    report = ExperimentReport(
        "decay_threshold", _echo(cfg), metrics,
        notes=[
            f"per-box tail exponents {_table(ps, 4)}",
            f"critical-order norms {_table(g_crit, 6)}",
            f"subcritical norms {_table(g_below, 6)}",
        ])
    for r in sorted(r_probe):
        report.notes.append(f"w_{r:g} across boxes: {np.round(wnorms[r], 6).tolist()}")
    return report


# ---------------------------------------------------------------------------
# symmetry checks


def _evaluate_at(f: Field, pts: np.ndarray) -> np.ndarray:
    """Trigonometric-interpolant values at arbitrary points."""
    spec = transform(f)
    k = f.grid.k
    out = np.zeros(pts.size, dtype=complex)
    chunk = 512
    for j in range(0, pts.size, chunk):
        ph = np.exp(1j * np.outer(pts[j:j + chunk], k))
        out[j:j + chunk] = ph @ spec.coefficients
    return out.real / f.grid.length


def _scaled_ic(ic: InitialCondition, lam: float, alpha: float) -> InitialCondition:
    amp_factor = lam ** alpha
    if ic.family == "gaussian":
        a, s, x0 = ic.params
        return replace(ic, params=(a * amp_factor, s / lam, x0 / lam))
    if ic.family == "odd_gaussian":
        a, s = ic.params
        return replace(ic, params=(a * amp_factor * lam, s / lam))
    if ic.family == "sine_packet":
        a, kc, s = ic.params
        return replace(ic, params=(a * amp_factor, kc * lam, s / lam))
    raise ConfigurationError(
        f"scaling check supports analytic families only, not '{ic.family}'")


def run_symmetry_checks(cfg: SimConfig, lam: float) -> ExperimentReport:
    """Scaling covariance of the flow and the coordinate commutation laws.

    (a) lam^alpha u(lam x, lam^(1+alpha) t) solves the equation when u
    does; (b) the free flow commutes with x + (1+alpha) t D^alpha;
    (c) [x, d/dx D^alpha] f = -(1+alpha) D^alpha f.
    """
    if not (-1.0 < cfg.alpha < 1.0) or cfg.alpha == 0.0:
        raise ConfigurationError("symmetry checks need -1 < alpha < 1, alpha != 0")
    if not (0.5 <= lam <= 2.0):
        raise ConfigurationError(f"lambda must lie in [1/2, 2], got {lam}")
    grid = cfg.grid()
    alpha = cfg.alpha
    u0 = cfg.ic.build(grid)
    if alpha < 0:
        # negative-order derivatives below act on the zero-mean class only
        _require_zero_mean(u0, "symmetry checks")

    # (a) two solver runs compared through the scaling map
    ic2 = _scaled_ic(cfg.ic, lam, alpha)
    u0_scaled = ic2.build(grid)
    if tail_fraction(u0_scaled.samples, grid) > cfg.tail_tol:
        raise ConfigurationError("rescaled data does not fit the box")
    T1 = cfg.t_final
    T2 = T1 / lam ** (1.0 + alpha)
    traj1 = solve(replace(cfg, t_final=T1), grid=grid, u0=u0)
    dt2 = T2 / max(1, int(round(T2 / cfg.dt)))
    traj2 = solve(replace(cfg, ic=ic2, t_final=T2, dt=dt2), grid=grid, u0=u0_scaled)
    sel = np.abs(grid.x) <= 0.25 * grid.length / max(lam, 1.0)
    pts = grid.x[sel]
    v2 = traj2.final.samples[sel]
    v1 = lam ** alpha * _evaluate_at(traj1.final, lam * pts)
    scale_res = float(np.linalg.norm(v1 - v2) / np.linalg.norm(v2))

    # (b) commuting vector field along the free flow:
    #     x e^{tL} u0 + (1+alpha) t D^alpha e^{tL} u0 = e^{tL} (x u0)
    t = cfg.t_final
    vt = linear_propagator(u0, t, alpha)
    lhs = coordinate_multiply(vt) + (1.0 + alpha) * t * frac_deriv(vt, alpha)
    rhs = linear_propagator(coordinate_multiply(u0), t, alpha)
    comm_res = float(np.linalg.norm(lhs.samples - rhs.samples)
                     / np.linalg.norm(rhs.samples))

    # (c) coordinate commutator with the dispersion generator
    gen = dispersion_symbol(alpha)
    a_term = coordinate_multiply(apply_multiplier(u0, gen))
    b_term = apply_multiplier(coordinate_multiply(u0), gen)
    c_term = (1.0 + alpha) * frac_deriv(u0, alpha)
    num = np.linalg.norm(a_term.samples - b_term.samples + c_term.samples)
    den = np.linalg.norm(c_term.samples)
    ident_res = float(num / den) if den > 0 else 0.0

    return ExperimentReport(
        "symmetry_checks", _echo(cfg),
        {
            "scaling_residual": MetricEntry(scale_res, 0.0, 1e-6),
            "commuting_field_residual": MetricEntry(comm_res, 0.0, 1e-8),
            "coordinate_commutator_residual": MetricEntry(ident_res, 0.0, 1e-8),
        },
        notes=[f"lambda = {lam:g}, matched times ({T1:g}, {T2:g})"])


# ---------------------------------------------------------------------------
# wave breaking


def _grad_sup_series(traj: Trajectory):
    return np.array([r.t for r in traj.diagnostics]), \
        np.array([max(-r.min_ux, 0.0) for r in traj.diagnostics])


def _onset_time(ts, gs, threshold):
    above = np.nonzero(gs >= threshold)[0]
    if not above.size:
        return math.nan
    j = above[0]
    if j == 0:
        return float(ts[0])
    # linear crossing between diagnostics rows
    frac = (threshold - gs[j - 1]) / (gs[j] - gs[j - 1])
    return float(ts[j - 1] + frac * (ts[j] - ts[j - 1]))


def run_wave_breaking(cfg: SimConfig) -> ExperimentReport:
    """Gradient blow-up detector for the weak-dispersion range.

    Declares onset when the gradient sup exceeds 10x its initial value,
    requires the onset time to be stable (5 percent) under halving dt,
    and contrasts with a dispersive control run at alpha = 0.5 on the
    same data.  Contamination before onset flags the run inconclusive.
    """
    if not (-1.0 <= cfg.alpha < -1.0 / 3.0):
        raise ConfigurationError(
            f"breaking range is -1 <= alpha < -1/3, got {cfg.alpha}")
    grid = cfg.grid()
    u0 = cfg.ic.build(grid)
    _require_zero_mean(u0, "wave-breaking run")
    traj = solve(cfg, grid=grid, u0=u0)
    ts, gs = _grad_sup_series(traj)
    g0 = gs[0]
    onset = _onset_time(ts, gs, 10.0 * g0)
    notes = []
    inconclusive = traj.truncated and math.isnan(onset)
    if inconclusive:
        notes.append("INCONCLUSIVE: tail contamination before gradient growth; "
                     + traj.truncation_reason)
    half = replace(cfg, dt=0.5 * cfg.dt, diag_every=2 * cfg.diag_every)
    traj_h = solve(half, grid=grid, u0=u0)
    ts_h, gs_h = _grad_sup_series(traj_h)
    onset_h = _onset_time(ts_h, gs_h, 10.0 * g0)
    control = solve(replace(cfg, alpha=0.5), grid=grid, u0=u0)
    _, gs_c = _grad_sup_series(control)
    growth_c = float(np.max(gs_c) / g0)

    detected = not math.isnan(onset)
    stable = detected and not math.isnan(onset_h) \
        and abs(onset - onset_h) <= 0.05 * onset
    metrics = {
        "onset_detected": MetricEntry(float(detected), 1.0, 0.0),
        "onset_dt_stability": MetricEntry(
            abs(onset - onset_h) / onset if detected and not math.isnan(onset_h)
            else math.inf, 0.0, 0.05),
        "control_gradient_growth": MetricEntry(growth_c, 0.0, 10.0, mode="le"),
    }
    notes.append(f"onset at dt: {onset:g}, at dt/2: {onset_h:g}; "
                 f"max gradient growth {float(np.max(gs) / g0):.2f}x")
    if traj.truncated and not inconclusive:
        notes.append(f"run truncated after onset: {traj.truncation_reason}")
    report = ExperimentReport("wave_breaking", _echo(cfg), metrics, notes)
    return report


def run_no_breaking(cfg: SimConfig) -> ExperimentReport:
    """Companion check: same data in a regime where gradients stay bounded."""
    grid = cfg.grid()
    u0 = cfg.ic.build(grid)
    traj = solve(cfg, grid=grid, u0=u0)
    ts, gs = _grad_sup_series(traj)
    growth = float(np.max(gs) / gs[0])
    return ExperimentReport(
        "no_breaking", _echo(cfg),
        {"gradient_growth": MetricEntry(growth, 0.0, 10.0, mode="le")},
        notes=[f"max gradient growth {growth:.2f}x over horizon {cfg.t_final:g}"])
