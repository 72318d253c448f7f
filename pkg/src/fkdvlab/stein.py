"""Pointwise square-function derivative, its asymptotic laws, and
commutator-inequality probes.

The central object is the square-integral difference quotient

    S_b f(x) = ( integral |f(x) - f(y)|^2 / |x - y|^(1+2b) dy )^(1/2)

for 0 < b < 1, evaluated by composite Gauss-Legendre quadrature on
dyadic panels accumulating at the difference singularity y = x and at
every kink of the target.  The inner ball |y - x| < delta is excluded
from the value and accounted for in the error estimate through a local
Hölder envelope; the tail beyond |y| > y_max is added analytically when
the target has exact constant limits, otherwise bounded and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .spectral import (Field, apply_multiplier, derivative_symbol, flat_top_bump,
                       frac_deriv_symbol, hilbert_symbol, l2_norm, lowpass_symbol,
                       CutoffSpec)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class SteinTarget:
    """Closed-form or sampled target of the square-function derivative.

    ``tail_limits`` holds exact constant limits (c_plus, c_minus) beyond
    the quadrature truncation; ``oscillatory_tail`` marks unimodular
    oscillating targets whose tail is added in the mean.  ``holder``
    maps an evaluation point to (exponent, constant) of the local
    increment bound; ``nonholder`` lists points where the derivative
    does not exist pointwise.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple = ()
    tail_limits: Optional[tuple] = None
    oscillatory_tail: bool = False
    holder: Optional[Callable[[float], tuple]] = None
    nonholder: tuple = ()
    sup_norm: float = 1.0


def power_cutoff(beta: float) -> SteinTarget:
    """|xi|^beta under the smooth flat-top cutoff (1 on |xi|<=1, 0 beyond 2)."""
    if beta <= 0:
        raise ConfigurationError(f"power exponent must be positive, got {beta}")

    def f(y):
        return np.abs(y) ** beta * flat_top_bump(y, 1.0)

    def holder(eta):
        if abs(eta) < 1e-13:
            return (min(beta, 1.0), 1.0)
        return (1.0, beta * abs(eta) ** (beta - 1.0) + 2.0)

    return SteinTarget(f"|xi|^{beta:g}*cutoff", f, breakpoints=(0.0, -1.0, 1.0, -2.0, 2.0),
                       tail_limits=(0.0, 0.0), holder=holder)


def signed_power_cutoff(beta: float) -> SteinTarget:
    if beta <= 0:
        raise ConfigurationError(f"power exponent must be positive, got {beta}")

    def f(y):
        return np.sign(y) * np.abs(y) ** beta * flat_top_bump(y, 1.0)

    def holder(eta):
        if abs(eta) < 1e-13:
            return (min(beta, 1.0), 2.0)
        return (1.0, beta * abs(eta) ** (beta - 1.0) + 2.0)

    return SteinTarget(f"sign*|xi|^{beta:g}*cutoff", f,
                       breakpoints=(0.0, -1.0, 1.0, -2.0, 2.0),
                       tail_limits=(0.0, 0.0), holder=holder)


def propagator_target(alpha: float, t: float) -> SteinTarget:
    """Unitary dispersive propagator exp(i t xi |xi|^alpha)."""
    if not (-1.0 <= alpha < 1.0) or alpha == 0.0:
        raise ConfigurationError(f"alpha must lie in [-1,1) nonzero, got {alpha}")

    def f(y):
        ay = np.abs(y)
        return np.exp(1j * t * y * np.where(ay > 0, ay ** alpha, 0.0))

    def holder(eta):
        if abs(eta) < 1e-13:
            return (min(1.0, 1.0 + alpha), abs(t) + 1.0)
        return (1.0, abs(t) * (1.0 + abs(alpha)) * abs(eta) ** alpha + 1.0)

    return SteinTarget(f"exp(i*{t:g}*xi|xi|^{alpha:g})", f, breakpoints=(0.0,),
                       oscillatory_tail=True, holder=holder)


def sign_propagator(t: float) -> SteinTarget:
    """exp(i t sign(xi)): locally constant, one jump at the origin."""

    def f(y):
        return np.exp(1j * t * np.sign(y))

    def holder(eta):
        return (math.inf, 0.0)   # locally constant away from 0

    return SteinTarget(f"exp(i*{t:g}*sign)", f, breakpoints=(0.0,),
                       tail_limits=(np.exp(1j * t), np.exp(-1j * t)),
                       holder=holder, nonholder=(0.0,))


def weight_target(theta: float, n_w: float) -> SteinTarget:
    """The smooth bounded coordinate weight, flat beyond 3N."""
    if not (0 < theta <= 1):
        raise ConfigurationError(f"theta must lie in (0,1], got {theta}")
    flat = (2.0 * n_w) ** theta

    def f(y):
        ay = np.abs(y)
        inner = (1.0 + ay ** 2) ** (theta / 2.0)
        r = np.clip((ay - n_w) / (2.0 * n_w), 0.0, 1.0)
        s = r * r * r * (10.0 + r * (-15.0 + 6.0 * r))
        return np.where(ay >= 3.0 * n_w, flat, (1.0 - s) * inner + s * flat)

    return SteinTarget(f"weight(theta={theta:g},N={n_w:g})", f,
                       breakpoints=(-3.0 * n_w, -n_w, n_w, 3.0 * n_w),
                       tail_limits=(flat, flat),
                       holder=lambda eta: (1.0, 1.0), sup_norm=flat)


def sampled_target(f: Field) -> SteinTarget:
    """Cubic-spline interpolation of a grid field (zero outside the box)."""
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(f.grid.x, f.samples, bc_type="natural", extrapolate=False)
    half = 0.5 * f.grid.length

    def g(y):
        out = spline(np.clip(y, f.grid.x[0], f.grid.x[-1]))
        return np.where(np.abs(y) >= half, 0.0, out)

    slope = float(np.max(np.abs(np.gradient(f.samples, f.grid.dx))))
    return SteinTarget("sampled", g, breakpoints=(-half, half),
                       tail_limits=(0.0, 0.0),
                       holder=lambda eta: (1.0, slope + 1.0),
                       sup_norm=float(np.max(np.abs(f.samples))))


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadSpec:
    delta: float = 1e-8          # inner split radius, scaled by max(|eta|, delta_floor)
    y_max: float = 1e3
    n_panels: int = 2048
    delta_floor: float = 1e-4


@dataclass(frozen=True)
class SteinRequest:
    b: float
    target: SteinTarget
    eval_points: np.ndarray
    quad: QuadSpec = field(default_factory=QuadSpec)

    def __post_init__(self):
        if not (0.0 < self.b < 1.0):
            raise ConfigurationError(f"order b must lie in (0,1), got {self.b}")
        pts = np.atleast_1d(np.asarray(self.eval_points, dtype=float))
        object.__setattr__(self, "eval_points", pts)


@dataclass
class SteinResult:
    values: np.ndarray
    error_estimates: np.ndarray
    tail_bound: float


def _panel_edges(center: float, inner: float, outer: float, n_dyadic: int) -> np.ndarray:
    r = np.geomspace(inner, outer, n_dyadic + 1)
    return np.concatenate([center - r[::-1], center + r])


def _quad_sq(target: SteinTarget, eta: float, b: float, delta: float,
             y_max: float, n_dyadic: int) -> float:
    """Quadrature of |f(eta)-f(y)|^2 |eta-y|^(-1-2b) over delta < |y-eta|, |y| < y_max."""
    fe = complex(target.func(np.asarray([eta]))[0])
    edge_sets = [_panel_edges(eta, delta, 2.0 * y_max, n_dyadic)]
    for bp in target.breakpoints:
        if abs(bp - eta) > 2.0 * delta:
            edge_sets.append(_panel_edges(bp, 1e-13 * max(1.0, abs(bp - eta)),
                                          2.0 * y_max, n_dyadic))
    edges = np.unique(np.concatenate(edge_sets))
    edges = edges[(edges >= -y_max) & (edges <= y_max)]
    edges = np.concatenate([[-y_max], edges, [y_max]])
    edges = np.unique(edges)
    a, c = edges[:-1], edges[1:]
    keep = ~((a >= eta - 1.0000001 * delta) & (c <= eta + 1.0000001 * delta))
    a, c = a[keep], c[keep]
    mid, half = 0.5 * (a + c), 0.5 * (c - a)
    y = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    w = half[:, None] * _GL_WEIGHTS[None, :]
    vals = np.abs(fe - target.func(y)) ** 2 / np.abs(eta - y) ** (1.0 + 2.0 * b)
    return float(np.sum(vals * w))


def _tail_sq(target: SteinTarget, eta: float, b: float, y_max: float):
    """(analytic tail added to the value, residual uncertainty) beyond y_max."""
    fe = complex(target.func(np.asarray([eta]))[0])
    up = (y_max - eta) ** (-2.0 * b) / (2.0 * b)
    dn = (y_max + eta) ** (-2.0 * b) / (2.0 * b)
    if target.tail_limits is not None:
        cp, cm = target.tail_limits
        return abs(fe - cp) ** 2 * up + abs(fe - cm) ** 2 * dn, 0.0
    if target.oscillatory_tail:
        # |f(eta)-f(y)|^2 oscillates about 2 for unimodular targets
        est = 2.0 * (up + dn)
        return est, 0.5 * est
    bound = 4.0 * target.sup_norm ** 2 * (up + dn)
    return 0.0, bound


def _inner_sq_bound(target: SteinTarget, eta: float, b: float, delta: float) -> float:
    if target.holder is None:
        return math.inf
    gamma, const = target.holder(eta)
    if not math.isfinite(gamma):
        return 0.0
    if gamma <= b:
        return math.inf
    return 2.0 * const ** 2 * delta ** (2.0 * (gamma - b)) / (2.0 * (gamma - b))


def stein_derivative(req: SteinRequest) -> SteinResult:
    """Evaluate the square-function derivative at the requested points.

    error_estimates combine panel-refinement differences, the excluded
    inner ball, and any non-exact tail.  Requests at a pointwise
    non-Hölder point of the target are rejected.
    """
    b, target, quad = req.b, req.target, req.quad
    n_dyadic = max(8, quad.n_panels // (2 * (1 + len(target.breakpoints))))
    values = np.empty(req.eval_points.size)
    errors = np.empty(req.eval_points.size)
    worst_tail = 0.0
    for i, eta in enumerate(req.eval_points):
        for bad in target.nonholder:
            if abs(eta - bad) < 1e-13:
                raise DomainError(
                    f"target '{target.name}' is not pointwise Hölder at {bad:g}")
        delta = quad.delta * max(abs(eta), quad.delta_floor)
        full = _quad_sq(target, eta, b, delta, quad.y_max, n_dyadic)
        coarse = _quad_sq(target, eta, b, delta, quad.y_max, n_dyadic // 2)
        tail_add, tail_unc = _tail_sq(target, eta, b, quad.y_max)
        inner = _inner_sq_bound(target, eta, b, delta)
        sq = full + tail_add
        values[i] = math.sqrt(max(sq, 0.0))
        err_sq = abs(full - coarse) + tail_unc + (0.0 if math.isinf(inner) else inner)
        # convert the squared-scale uncertainty to the value scale
        errors[i] = 0.5 * err_sq / values[i] if values[i] > 0 else math.sqrt(err_sq)
        worst_tail = max(worst_tail, tail_unc)
    return SteinResult(values, errors, worst_tail)


# ---------------------------------------------------------------------------
# slope fits


@dataclass
class SlopeFit:
    regime: str
    fitted_slope: float
    expected_slope: float
    log_correction_detected: bool
    residual: float
    accepted: bool


def _power_exponent(target: SteinTarget) -> Optional[float]:
    name = target.name
    if "cutoff" not in name:
        return None
    return float(name.split("^")[1].split("*")[0])


def stein_slope_fit(req: SteinRequest, regime: str) -> SlopeFit:
    """Log-log slope of the derivative over a small- or large-argument regime.

    For power targets |xi|^beta the expected small-argument slope is
    beta - b when beta < b, saturation (slope 0) when beta > b, and a
    square-root-of-log law exactly at beta = b, which is detected by a
    linear fit of the squared values against -log|eta|.
    """
    if regime not in ("small_eta", "large_eta"):
        raise ConfigurationError(f"unknown regime '{regime}'")
    pts = req.eval_points
    if pts.size < 6:
        raise ConfigurationError("slope fits need at least 6 evaluation points")
    res = stein_derivative(req)
    beta = _power_exponent(req.target)
    theta = req.b
    log_branch = False
    if regime == "large_eta":
        expected = -0.5 - theta
    elif beta is None:
        expected = math.nan
    elif beta < theta:
        expected = beta - theta
    elif beta > theta:
        expected = 0.0
    else:
        log_branch = True
        expected = math.nan

    if log_branch:
        # squared values against -log eta must be an increasing line
        sq = res.values ** 2
        A = np.vstack([-np.log(np.abs(pts)), np.ones_like(pts)]).T
        coef, *_ = np.linalg.lstsq(A, sq, rcond=None)
        pred = A @ coef
        ss = float(np.sum((sq - sq.mean()) ** 2)) or 1.0
        r2 = 1.0 - float(np.sum((sq - pred) ** 2)) / ss
        detected = bool(coef[0] > 0 and r2 > 0.99)
        return SlopeFit(regime, math.nan, math.nan, detected, 1.0 - r2, detected)

    logx, logy = np.log(np.abs(pts)), np.log(res.values)
    slope, intercept = np.polyfit(logx, logy, 1)
    pred = slope * logx + intercept
    scale = float(np.std(logy)) or 1.0
    residual = float(np.sqrt(np.mean((logy - pred) ** 2))) / scale
    accepted = residual <= 0.25
    return SlopeFit(regime, float(slope), expected, False, residual, accepted)


# ---------------------------------------------------------------------------
# propagator bound


def _propagator_envelope(alpha: float, b: float, t: float, x: float) -> float:
    """Growth envelope of the derivative of the dispersive propagator."""
    if t == 0:
        return 1.0
    at = abs(t)
    if alpha > 0:
        return at ** (b / (1.0 + alpha)) + at ** b * abs(x) ** (b * alpha)
    # -1 < alpha < 0
    lead = at ** (b / (1.0 + alpha))
    if abs(1.0 + alpha - b) > 1e-12 or abs(x) >= 1.0:
        return lead + at * abs(x) ** (1.0 + alpha - b)
    z = abs(at ** (1.0 / (1.0 + alpha)) * x)
    if z >= 1.0:
        return lead + at * abs(x) ** (1.0 + alpha - b)
    return lead * (1.0 + math.sqrt(-math.log(z)))


@dataclass
class PropagatorBoundReport:
    constant: float
    constant_refined: float
    ratios: dict
    stable: bool


def propagator_stein_bound(alpha: float, b: float, t_list: Sequence[float],
                           x_list: Sequence[float],
                           quad: QuadSpec = QuadSpec()) -> PropagatorBoundReport:
    """Fitted constant sup S_b(propagator) / envelope over the sample grid.

    The constant must be stable (within 2x) under doubling of the panel
    count; both values are reported.
    """
    if not (0.0 < b < 1.0):
        raise ConfigurationError(f"order b must lie in (0,1), got {b}")
    if not (-1.0 < alpha < 1.0) or alpha == 0.0:
        raise ConfigurationError(f"alpha must lie in (-1,1) nonzero, got {alpha}")
    ratios = {}
    best = 0.0
    best2 = 0.0
    quad2 = QuadSpec(quad.delta, quad.y_max, 2 * quad.n_panels, quad.delta_floor)
    for t in t_list:
        target = propagator_target(alpha, t)
        for x in x_list:
            if t == 0:
                ratios[(t, x)] = 0.0
                continue
            r1 = stein_derivative(SteinRequest(b, target, np.asarray([x]), quad))
            r2 = stein_derivative(SteinRequest(b, target, np.asarray([x]), quad2))
            env = _propagator_envelope(alpha, b, t, x)
            ratios[(t, x)] = r1.values[0] / env
            best = max(best, r1.values[0] / env)
            best2 = max(best2, r2.values[0] / env)
    stable = best == 0.0 or (best2 / best < 2.0 and best / max(best2, 1e-300) < 2.0)
    return PropagatorBoundReport(best, best2, ratios, stable)


# ---------------------------------------------------------------------------
# non-membership scans


@dataclass
class GrowthTable:
    eps: np.ndarray
    q_squared: np.ndarray
    fitted_c: float
    residual: float
    divergent: bool
    order: float
    target_name: str


def _bessel_weighted(alpha: float, t: float, kind: str) -> SteinTarget:
    """Targets of the truncated-norm scans, carrying the <xi>^-2 damping."""
    if kind == "propagator":
        def f(y):
            ay = np.abs(y)
            osc = np.exp(1j * t * y * np.where(ay > 0, ay ** alpha, 0.0))
            return (1.0 + y ** 2) ** (-1.0) * osc * flat_top_bump(y, 1.0)
        name = f"<xi>^-2*exp(i*{t:g}*xi|xi|^{alpha:g})*cutoff"
        def holder(eta):
            if abs(eta) < 1e-13:
                return (min(1.0, 1.0 + alpha), abs(t) + 3.0)
            return (1.0, abs(t) * (1 + abs(alpha)) * abs(eta) ** alpha + 3.0)
    elif kind == "symbol":
        def f(y):
            ay = np.abs(y)
            return (1.0 + y ** 2) ** (-1.0) * np.where(ay > 0, ay ** alpha, 0.0) \
                * flat_top_bump(y, 1.0)
        name = f"<xi>^-2*|xi|^{alpha:g}*cutoff"
        def holder(eta):
            if abs(eta) < 1e-13:
                return (min(1.0, alpha), 3.0)
            return (1.0, abs(alpha) * abs(eta) ** (alpha - 1.0) + 3.0)
    else:
        raise ConfigurationError(f"unknown scan kind '{kind}'")
    return SteinTarget(name, f, breakpoints=(0.0, -1.0, 1.0, -2.0, 2.0),
                       tail_limits=(0.0, 0.0), holder=holder)


def nonmembership_scan(alpha: float, t: float, s_order: float,
                       eps_list: Sequence[float], n_eta: int = 48,
                       quad: QuadSpec = QuadSpec(n_panels=1024, y_max=50.0)) -> GrowthTable:
    """Truncated-norm blow-up scan near the frequency origin.

    Q(eps)^2 integrates the squared derivative of order ``s_order`` of
    the scan target over eps < |eta| < 1.  Logarithmic divergence means
    Q(eps)^2 - Q(eps_0)^2 grows affinely in log(eps_0/eps) with a
    positive fitted coefficient; the report carries the fit and its
    relative residual.

    ``s_order`` selects the scan: 3/2 + alpha probes the damped
    propagator (alpha < 0 branch, local derivative used when the order
    hits exactly 1), while 1/2 + alpha probes the damped symbol
    |xi|^alpha (0 < alpha < 1/2 branch).
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))[::-1]
    if eps.size < 3:
        raise ConfigurationError("need at least 3 truncation radii")
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise ConfigurationError("truncation radii must lie in (0, 1)")
    if abs(s_order - (1.5 + alpha)) < 1e-9:
        kind = "propagator"
    elif abs(s_order - (0.5 + alpha)) < 1e-9:
        kind = "symbol"
    else:
        raise ConfigurationError(
            f"scan order {s_order:g} matches neither 3/2+alpha nor 1/2+alpha")
    target = _bessel_weighted(alpha, t, kind)
    etas = np.geomspace(eps[-1], 1.0, n_eta)
    if abs(s_order - 1.0) < 1e-12:
        dens = _local_derivative_density(target, etas)
    else:
        if not (0 < s_order < 1):
            raise ConfigurationError(
                f"scan order {s_order:g} outside (0,1); only order 1 has a local branch")
        req_p = SteinRequest(s_order, target, etas, quad)
        req_m = SteinRequest(s_order, target, -etas, quad)
        dens = stein_derivative(req_p).values ** 2 + stein_derivative(req_m).values ** 2
    q2 = np.empty(eps.size)
    for i, e in enumerate(eps):
        m = etas >= e * 0.9999
        q2[i] = np.trapezoid(dens[m], etas[m])
    lo = np.log(eps[0] / eps)
    A = np.vstack([lo, np.ones_like(lo)]).T
    coef, *_ = np.linalg.lstsq(A, q2 - q2[0], rcond=None)
    pred = A @ coef
    span = q2[-1] - q2[0]
    residual = float(np.sqrt(np.mean((q2 - q2[0] - pred) ** 2)) / abs(span)) \
        if span != 0 else math.inf
    c = float(coef[0])
    divergent = bool(c > 0 and residual <= 0.10)
    return GrowthTable(eps, q2, c, residual, divergent, s_order, target.name)


def _local_derivative_density(target: SteinTarget, etas: np.ndarray) -> np.ndarray:
    out = np.empty(etas.size)
    for i, e in enumerate(etas):
        h = 1e-7 * max(e, 1e-7)
        dp = (target.func(np.asarray([e + h]))[0] - target.func(np.asarray([e - h]))[0]) / (2 * h)
        dm = (target.func(np.asarray([-e + h]))[0] - target.func(np.asarray([-e - h]))[0]) / (2 * h)
        out[i] = abs(dp) ** 2 + abs(dm) ** 2
    return out


# ---------------------------------------------------------------------------
# commutator probes


_PROBE_KINDS = ("hilbert_frac", "frac_com", "triple", "projector", "hilbert_local")


@dataclass(frozen=True)
class ProbeParams:
    beta: float = 0.5
    gamma: float = 0.25
    l: int = 1
    m: int = 0
    p: int = 2


def _sup(f: Field) -> float:
    return float(np.max(np.abs(f.samples)))


def commutator_probe(kind: str, g: Field, f: Field, params: ProbeParams) -> float:
    """Ratio of a commutator norm to its inequality right-hand side.

    Computed spectrally at p = 2.  A constant g gives a vanishing
    commutator and ratio 0; parameters outside the hypothesis of the
    respective inequality are rejected with the violated constraint
    named.
    """
    if params.p != 2:
        raise ConfigurationError("only p = 2 is supported")
    if kind not in _PROBE_KINDS:
        raise ConfigurationError(f"unknown probe kind '{kind}'")
    hil = hilbert_symbol()
    der = derivative_symbol()

    def D(h, s):
        return apply_multiplier(h, frac_deriv_symbol(s))

    def H(h):
        return apply_multiplier(h, hil)

    def mul(a, b_):
        return Field(a.grid, a.samples * b_.samples)

    if kind == "hilbert_frac":
        if not (params.beta > 0):
            raise ConfigurationError("hilbert_frac requires beta > 0")
        dbf = D(f, params.beta)
        lhs = l2_norm(H(mul(g, dbf)) - mul(g, H(dbf)))
        rhs = _sup(D(g, params.beta)) * l2_norm(f)
    elif kind == "frac_com":
        if not (0 < params.beta <= 1):
            raise ConfigurationError("frac_com requires 0 < beta <= 1")
        lhs = l2_norm(D(mul(f, g), params.beta) - mul(f, D(g, params.beta)))
        rhs = l2_norm(D(f, params.beta)) * _sup(g)
    elif kind == "triple":
        if not (0 <= params.beta < 1):
            raise ConfigurationError("triple requires 0 <= beta < 1")
        if not (0 < params.gamma <= 1 - params.beta):
            raise ConfigurationError("triple requires 0 < gamma <= 1 - beta")
        rest = D(g, 1.0 - params.beta - params.gamma)
        inner = D(mul(f, rest), params.gamma) - mul(f, D(rest, params.gamma))
        lhs = l2_norm(D(inner, params.beta))
        rhs = _sup(apply_multiplier(f, der)) * l2_norm(g)
    elif kind == "projector":
        if not (params.beta >= 0):
            raise ConfigurationError("projector requires beta >= 0")
        if not (params.gamma > 0):
            raise ConfigurationError("projector requires gamma > 0")
        low = lowpass_symbol(CutoffSpec(1.0))
        def P(h):
            return apply_multiplier(h, low)
        rest = D(g, params.gamma)
        inner = P(mul(f, rest)) - mul(f, P(rest))
        lhs = l2_norm(D(inner, params.beta))
        rhs = (_sup(D(f, params.beta + params.gamma))
               + _sup(apply_multiplier(f, der))) * l2_norm(g)
    else:  # hilbert_local
        if params.l < 0 or params.m < 0 or params.l + params.m < 1:
            raise ConfigurationError(
                "hilbert_local requires integer l, m >= 0 with l + m >= 1")
        def DX(h, j):
            out = h
            for _ in range(j):
                out = apply_multiplier(out, der)
            return out
        dmf = DX(f, params.m)
        inner = H(mul(g, dmf)) - mul(g, H(dmf))
        lhs = l2_norm(DX(inner, params.l))
        rhs = _sup(DX(g, params.l + params.m)) * l2_norm(f)

    if lhs == 0.0:
        return 0.0
    if rhs == 0.0:
        raise DomainError(f"degenerate probe: zero right-hand side with lhs {lhs:g}")
    return lhs / rhs


def probe_ensemble(kind: str, grid, params: ProbeParams, n_pairs: int = 50,
                   seed: int = 0, k_band=(0.5, 4.0), amplitude: float = 1.0):
    """Max and median probe ratio over seeded band-limited field pairs."""
    from .solver import InitialCondition

    ratios = []
    for j in range(n_pairs):
        g = InitialCondition("random_band", (seed + 2 * j, *k_band, amplitude)).build(grid)
        f = InitialCondition("random_band", (seed + 2 * j + 1, *k_band, amplitude)).build(grid)
        ratios.append(commutator_probe(kind, g, f, params))
    arr = np.asarray(ratios)
    return float(np.max(arr)), float(np.median(arr))
